//! Experiment configuration: a JSON document naming one command and its
//! parameters. Parsing fills in every default so the stored config is enough
//! to rerun the experiment.

use std::fmt;

use lattice_multipliers::Exponent;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kernel,
    Apply,
    VerifyMikhlin,
    VerifyWeak,
    VerifyHormander,
    VerifyDecay,
    Norm,
    Wave,
    Strichartz,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Kernel,
        Command::Apply,
        Command::VerifyMikhlin,
        Command::VerifyWeak,
        Command::VerifyHormander,
        Command::VerifyDecay,
        Command::Norm,
        Command::Wave,
        Command::Strichartz,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Apply => "apply",
            Command::VerifyMikhlin => "verify-mikhlin",
            Command::VerifyWeak => "verify-weak",
            Command::VerifyHormander => "verify-hormander",
            Command::VerifyDecay => "verify-decay",
            Command::Norm => "norm",
            Command::Wave => "wave",
            Command::Strichartz => "strichartz",
            Command::Selftest => "selftest",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    fn needs_symbol(self) -> bool {
        !matches!(self, Command::Wave | Command::Strichartz | Command::Selftest)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Lebesgue exponent written as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentValue {
    Number(f64),
    Name(InfName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "inf")]
    Inf,
}

impl ExponentValue {
    pub fn to_exponent(self) -> Result<Exponent, String> {
        match self {
            ExponentValue::Number(p) => Exponent::new(p).map_err(|e| e.to_string()),
            ExponentValue::Name(InfName::Inf) => Ok(Exponent::Infinity),
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExponentValue::Number(p) => Some(p),
            ExponentValue::Name(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Radius of the centered kernel box.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bx: Option<usize>,
    /// Radius of the centered output window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Torus grid size per axis for sampled certificates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub accept_unconverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Input data for `apply`: see [`crate::data::DataSpec`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    /// Use the finite stencil instead of the multiplier engine where one exists.
    #[serde(default)]
    pub stencil: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<ExponentValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ExponentValue>,
    /// Radius of the centered cube carrying input data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<usize>>,
}

fn default_d() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed JSON or a field of the wrong type.
    Parse { line: usize, column: usize, message: String },
    /// Well-formed JSON with an invalid value.
    Invalid { field: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { message, .. } => write!(f, "config parse error: {message}"),
            ConfigError::Invalid { field, message } => write!(f, "invalid config field `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a JSON config, filling command-specific defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.normalized()
}

pub fn to_json(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

fn set<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn positive(field: &str, v: Option<usize>) -> Result<(), ConfigError> {
    match v {
        Some(0) => Err(invalid(field, "must be positive")),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        serde_json::from_value(serde_json::json!({ "command": command })).expect("minimal config")
    }

    pub fn is_randomized(&self) -> bool {
        match self.command {
            Command::Strichartz | Command::Selftest => true,
            Command::Norm => self.method.as_deref() == Some("lower-bound"),
            Command::Apply => self.input.as_deref().is_some_and(|s| s.starts_with("random")),
            Command::Wave => [&self.f, &self.g]
                .iter()
                .any(|s| s.as_deref().is_some_and(|s| s.starts_with("random"))),
            _ => false,
        }
    }

    /// Validates the config and fills every default that the command uses.
    pub fn normalized(mut self) -> Result<Self, ConfigError> {
        if !(1..=3).contains(&self.d) {
            return Err(invalid("d", format!("must be 1, 2 or 3, got {}", self.d)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", "must be a positive number"));
        }
        if self.command.needs_symbol() && self.symbol.is_none() {
            return Err(invalid("symbol", format!("required by `{}`", self.command)));
        }
        if let Some(spec) = &self.symbol {
            lattice_multipliers::parse_symbol(spec, self.d).map_err(|e| invalid("symbol", e.to_string()))?;
        }
        for (name, v) in [
            ("box", self.bx),
            ("window", self.window),
            ("grid", self.grid),
            ("max_order", self.max_order),
            ("r_max", self.r_max),
            ("trials", self.trials),
        ] {
            positive(name, v)?;
        }
        let d = self.d;
        match self.command {
            Command::Kernel => set(&mut self.bx, 32),
            Command::Apply => {
                set(&mut self.input, "delta".into());
                set(&mut self.radius, 4);
                set(&mut self.window, 16);
            }
            Command::VerifyMikhlin => {
                set(&mut self.grid, [512, 128, 32][d - 1]);
                set(&mut self.max_order, d + 1);
                set(&mut self.method, "both".into());
                set(&mut self.weight, "euclidean".into());
                match self.method.as_deref() {
                    Some("analytic" | "fd" | "both") => {}
                    _ => return Err(invalid("method", "expected analytic, fd or both")),
                }
                match self.weight.as_deref() {
                    Some("euclidean") => {}
                    Some("interval") if d == 1 => {}
                    Some("interval") => return Err(invalid("weight", "the interval form needs d = 1")),
                    _ => return Err(invalid("weight", "expected euclidean or interval")),
                }
            }
            Command::VerifyWeak => {
                set(&mut self.grid, [1 << 16, 512, 64][d - 1]);
                set(&mut self.alpha, d as f64);
                if !self.alpha.is_some_and(|a| a > 1.0 && a.is_finite()) {
                    return Err(invalid("alpha", "must exceed 1"));
                }
            }
            Command::VerifyHormander => {
                set(&mut self.bx, 64);
                set(&mut self.shift_radius, 4.0);
                let s = self.shift_radius.unwrap_or(0.0);
                if !(s > 0.0 && s.is_finite()) {
                    return Err(invalid("shift_radius", "must be positive"));
                }
                let reach = self.bx.unwrap_or(0).saturating_sub(s.ceil() as usize);
                set(&mut self.r_max, reach);
                if self.r_max.unwrap_or(0) + s.ceil() as usize > self.bx.unwrap_or(0) || self.r_max == Some(0) {
                    return Err(invalid("r_max", "r_max + shift_radius must fit in the box"));
                }
            }
            Command::VerifyDecay => set(&mut self.bx, 64),
            Command::Norm => {
                set(&mut self.method, "l2".into());
                match self.method.as_deref() {
                    Some("l2") => set(&mut self.grid, [1 << 16, 512, 64][d - 1]),
                    Some("lower-bound") => {
                        set(&mut self.p, ExponentValue::Number(2.0));
                        set(&mut self.q, ExponentValue::Number(2.0));
                        set(&mut self.radius, 8);
                        set(&mut self.trials, 64);
                        for (name, v) in [("p", self.p), ("q", self.q)] {
                            v.expect("set above").to_exponent().map_err(|e| invalid(name, e))?;
                        }
                    }
                    _ => return Err(invalid("method", "expected l2 or lower-bound")),
                }
            }
            Command::Wave => {
                set(&mut self.f, "delta".into());
                set(&mut self.g, "zero".into());
                set(&mut self.radius, 4);
                set(&mut self.times, vec![1.0]);
                set(&mut self.method, "spectral".into());
                let tmax = self.times.as_ref().expect("set above").iter().fold(0.0f64, |a, t| a.max(t.abs()));
                if self.times.as_ref().is_some_and(|ts| ts.is_empty() || ts.iter().any(|t| !t.is_finite())) {
                    return Err(invalid("times", "need at least one finite time"));
                }
                let margin = lattice_multipliers::wave::buffer_margin(tmax);
                set(&mut self.window, self.radius.expect("set above") + margin);
                match self.method.as_deref() {
                    Some("spectral") => {}
                    Some("leapfrog") => set(&mut self.dt, 0.05),
                    Some("rk4") => set(&mut self.dt, 0.02),
                    _ => return Err(invalid("method", "expected spectral, leapfrog or rk4")),
                }
                if let Some(dt) = self.dt {
                    if !(dt > 0.0 && dt.is_finite()) {
                        return Err(invalid("dt", "must be positive"));
                    }
                }
            }
            Command::Strichartz => {
                set(&mut self.t, 1.0);
                set(&mut self.p, ExponentValue::Number(2.0));
                set(&mut self.q, ExponentValue::Number(2.0));
                set(&mut self.radius, 8);
                set(&mut self.trials, 32);
                let (p, q) = (self.p.and_then(ExponentValue::finite), self.q.and_then(ExponentValue::finite));
                match (p, q) {
                    (Some(p), Some(q)) if p > 1.0 && p <= 2.0 && q >= 2.0 => {}
                    _ => return Err(invalid("p", "need finite 1 < p <= 2 <= q")),
                }
            }
            Command::Selftest => {
                set(&mut self.seed, lattice_multipliers::selftest::DEFAULT_SEED);
                set(&mut self.criteria, (1..=15).collect());
                if self.criteria.as_ref().is_some_and(|c| c.iter().any(|&i| !(1..=15).contains(&i))) {
                    return Err(invalid("criteria", "entries must lie in 1..=15"));
                }
            }
        }
        if self.is_randomized() && self.seed.is_none() {
            return Err(invalid("seed", format!("required by randomized command `{}`", self.command)));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_kernel_config_gets_defaults() {
        let c = parse_config(r#"{"command":"kernel","symbol":"riesz:j=1","d":1,"box":64,"tol":1e-8}"#).unwrap();
        assert_eq!(c.command, Command::Kernel);
        assert_eq!(c.bx, Some(64));
        assert!(!c.accept_unconverged);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(r#"{"command":"kernel","symbol":"riesz:j=1","boxx":64}"#).unwrap_err();
        assert!(e.to_string().contains("boxx"), "{e}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_config("{\n\"command\": \"kernel\",\n\"d\": }").unwrap_err();
        match e {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_seed_for_random_data() {
        let e = parse_config(r#"{"command":"strichartz","d":1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref field, .. } if field == "seed"));
    }

    #[test]
    fn exponent_accepts_inf() {
        let c = parse_config(r#"{"command":"norm","symbol":"riesz:j=1","method":"lower-bound","p":1,"q":"inf","seed":3}"#)
            .unwrap();
        assert_eq!(c.q.unwrap().to_exponent().unwrap(), Exponent::Infinity);
    }
}
