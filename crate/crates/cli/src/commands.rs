//! Command implementations. Each returns a JSON result, the files it wrote
//! and a few summary rows for the terminal.

use std::path::{Path, PathBuf};

use lattice_multipliers::io::{save_kernel, write_atomic, write_grid_csv, KernelMeta};
use lattice_multipliers::multiplier::{apply_multiplier_with, default_cap, synthesize_kernel_with, Quadrature};
use lattice_multipliers::operators::{laplacian, laplacian_spectral};
use lattice_multipliers::regularity::{
    decay_constants, hormander_scan, mikhlin_constant, mikhlin_interval_constant, mikhlin_path_discrepancy,
    norm_lower_bound_on, operator_norm_l2, weak_lorentz_refined, DerivativeMethod, MikhlinReport, NormSearch,
    TruncatedOperator,
};
use lattice_multipliers::wave::{
    buffer_margin, energy, leapfrog_evolve, rk4_evolve, solve_wave_with, strichartz_study, WaveState,
};
use lattice_multipliers::{parse_symbol, selftest, Exponent, LatticeBox, Symbol, SymbolKind};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::data::{write_wave_csv, DataSpec};
use crate::error::CliError;

pub struct Outcome {
    pub result: Value,
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
    /// False when a check ran to completion but did not pass.
    pub passed: bool,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Self {
            result,
            files: Vec::new(),
            summary: Vec::new(),
            passed: true,
        }
    }

    fn row(&mut self, k: &str, v: impl ToString) {
        self.summary.push((k.to_string(), v.to_string()));
    }
}

/// Everything a command needs besides its config.
pub struct Context {
    pub out: PathBuf,
    /// Relative data paths are resolved against this directory.
    pub base: PathBuf,
}

impl Context {
    fn write(&self, o: &mut Outcome, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        o.files.push(path);
        Ok(())
    }
}

fn symbol(cfg: &ExperimentConfig) -> Result<Symbol, CliError> {
    let spec = cfg.symbol.as_deref().ok_or_else(|| CliError::Config("missing symbol".into()))?;
    Ok(parse_symbol(spec, cfg.d)?)
}

fn quadrature(cfg: &ExperimentConfig) -> Quadrature {
    let q = Quadrature::new(cfg.tol);
    if cfg.accept_unconverged {
        q.accepting_unconverged()
    } else {
        q
    }
}

fn exponent(v: Option<crate::config::ExponentValue>) -> Result<Exponent, CliError> {
    v.ok_or_else(|| CliError::Config("missing exponent".into()))?
        .to_exponent()
        .map_err(CliError::Config)
}

pub fn dispatch(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Kernel => kernel(cfg, ctx),
        Command::Apply => apply(cfg, ctx),
        Command::VerifyMikhlin => verify_mikhlin(cfg),
        Command::VerifyWeak => verify_weak(cfg),
        Command::VerifyHormander => verify_hormander(cfg),
        Command::VerifyDecay => verify_decay(cfg),
        Command::Norm => norm(cfg),
        Command::Wave => wave(cfg, ctx),
        Command::Strichartz => strichartz(cfg, ctx),
        Command::Selftest => run_selftest(cfg),
    }
}

fn kernel(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let bx = LatticeBox::cube(cfg.d, cfg.bx.expect("normalized"))?;
    let k = synthesize_kernel_with(&m, &bx, &quadrature(cfg))?;
    save_kernel(&k, &ctx.out, "kernel")?;
    let meta = KernelMeta::of(&k);
    let mut o = Outcome::new(json!({ "kernel": meta, "cap": default_cap(cfg.d) }));
    o.files.push(ctx.out.join("kernel.csv"));
    o.files.push(ctx.out.join("kernel.json"));
    o.row("symbol", m.tag());
    o.row("grid", format!("{:?}", k.grid));
    o.row("aliasing estimate", format!("{:.3e}", k.aliasing_estimate));
    o.row("converged", k.converged);
    Ok(o)
}

fn apply(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let spec = DataSpec::parse(cfg.input.as_deref().expect("normalized"), cfg.d)?;
    let f = spec.build(cfg.d, cfg.radius.expect("normalized"), &ctx.base)?;
    let window = LatticeBox::cube(cfg.d, cfg.window.expect("normalized"))?;
    let q = quadrature(cfg);
    let mut o;
    let output = if cfg.stencil {
        if !matches!(m.kind(), SymbolKind::Laplacian) {
            return Err(CliError::Config(format!("no stencil path for symbol {}", m.tag())));
        }
        // Both paths run so the report carries the cross-check.
        let direct = laplacian(&f)?;
        let spectral = laplacian_spectral(&f, &window, &q)?;
        let on_window = direct.restrict_to(&window)?;
        let diff = on_window.max_abs_diff(&spectral.output)?;
        o = Outcome::new(json!({
            "path": "stencil",
            "spectral_grid": spectral.grid,
            "spectral_change": spectral.change,
            "stencil_vs_spectral": diff,
        }));
        o.row("stencil vs spectral", format!("{diff:.3e}"));
        on_window
    } else {
        let a = apply_multiplier_with(&m, &f, &window, &q)?;
        o = Outcome::new(json!({
            "path": "multiplier",
            "grid": a.grid,
            "change": a.change,
            "converged": a.converged,
            "cap": default_cap(cfg.d),
        }));
        o.row("grid", format!("{:?}", a.grid));
        o.row("last change", format!("{:.3e}", a.change));
        a.output
    };
    let mut bytes = Vec::new();
    write_grid_csv(&output, &mut bytes)?;
    ctx.write(&mut o, "output.csv", &bytes)?;
    o.row("symbol", m.tag());
    Ok(o)
}

fn mikhlin_at(m: &Symbol, cfg: &ExperimentConfig, n: usize, method: DerivativeMethod) -> Result<MikhlinReport, CliError> {
    let k = cfg.max_order.expect("normalized");
    Ok(if cfg.weight.as_deref() == Some("interval") {
        mikhlin_interval_constant(m, k, n, method)?
    } else {
        mikhlin_constant(m, k, n, method)?
    })
}

fn verify_mikhlin(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let n = cfg.grid.expect("normalized");
    let methods: &[DerivativeMethod] = match cfg.method.as_deref() {
        Some("analytic") => &[DerivativeMethod::Analytic],
        Some("fd") => &[DerivativeMethod::FiniteDifference],
        _ => &[DerivativeMethod::Analytic, DerivativeMethod::FiniteDifference],
    };
    let mut runs = Vec::new();
    let mut o = Outcome::new(Value::Null);
    for &method in methods {
        let coarse = mikhlin_at(&m, cfg, n, method)?;
        let fine = mikhlin_at(&m, cfg, 2 * n, method)?;
        let drift: Vec<f64> = coarse
            .constants()
            .iter()
            .zip(fine.constants())
            .map(|(a, b)| if a.max(b) > 0.0 { (a - b).abs() / a.max(b) } else { 0.0 })
            .collect();
        for (k, (c, d)) in fine.constants().iter().zip(&drift).enumerate() {
            o.row(&format!("{method:?} c_{k} at N={}", 2 * n), format!("{c:.6e} (drift {:.2}%)", 100.0 * d));
        }
        runs.push(json!({ "method": method, "coarse": coarse, "fine": fine, "relative_drift": drift }));
    }
    let discrepancy = if methods.len() == 2 && cfg.weight.as_deref() == Some("euclidean") {
        let v = mikhlin_path_discrepancy(&m, cfg.max_order.expect("normalized"), n)?;
        o.row("analytic vs fd", format!("{:.3e}", v.iter().fold(0.0f64, |a, b| a.max(*b))));
        Some(v)
    } else {
        None
    };
    o.result = json!({ "symbol": m.tag(), "runs": runs, "path_discrepancy": discrepancy });
    Ok(o)
}

fn verify_weak(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let (coarse, fine, r) = weak_lorentz_refined(&m, cfg.alpha.expect("normalized"), cfg.grid.expect("normalized"))?;
    let mut o = Outcome::new(json!({
        "symbol": m.tag(),
        "coarse": coarse,
        "fine": fine,
        "refinement": { "coarse": r.coarse, "fine": r.fine, "n_coarse": r.n_coarse, "n_fine": r.n_fine,
                        "delta": r.delta(), "relative_delta": r.relative_delta() },
    }));
    o.row("constant (N)", format!("{:.6}", coarse.constant));
    o.row("constant (2N)", format!("{:.6}", fine.constant));
    o.row("relative change", format!("{:.3e}", r.relative_delta()));
    Ok(o)
}

fn verify_hormander(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let bx = LatticeBox::cube(cfg.d, cfg.bx.expect("normalized"))?;
    let k = synthesize_kernel_with(&m, &bx, &quadrature(cfg))?;
    let s = cfg.shift_radius.expect("normalized");
    let r = cfg.r_max.expect("normalized");
    let half = hormander_scan(&k, s, (r / 2).max(1))?;
    let full = hormander_scan(&k, s, r)?;
    let rel = if full.constant > 0.0 { (full.constant - half.constant).abs() / full.constant } else { 0.0 };
    let mut o = Outcome::new(json!({
        "symbol": m.tag(),
        "kernel": KernelMeta::of(&k),
        "cap": default_cap(cfg.d),
        "half": half,
        "full": full,
        "relative_change": rel,
    }));
    o.row(&format!("constant (R={})", half.r_max), format!("{:.6e}", half.constant));
    o.row(&format!("constant (R={r})"), format!("{:.6e}", full.constant));
    o.row("argmax shift", format!("{:?}", full.argmax));
    o.row("relative change", format!("{rel:.3e}"));
    Ok(o)
}

fn verify_decay(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    let r = cfg.bx.expect("normalized");
    let k = synthesize_kernel_with(&m, &LatticeBox::cube(cfg.d, r)?, &quadrature(cfg))?;
    let full = decay_constants(&k);
    let inner = LatticeBox::cube(cfg.d, (r / 2).max(1))?;
    let mut small = k.clone();
    small.kernel = k.kernel.restrict_to(&inner)?;
    let half = decay_constants(&small);
    let mut o = Outcome::new(json!({
        "symbol": m.tag(),
        "kernel": KernelMeta::of(&k),
        "cap": default_cap(cfg.d),
        "half_box": half,
        "full_box": full,
    }));
    o.row("c0 (half, full)", format!("{:.6e}, {:.6e}", half.c0, full.c0));
    o.row("c1 (half, full)", format!("{:.6e}, {:.6e}", half.c1, full.c1));
    Ok(o)
}

fn norm(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = symbol(cfg)?;
    if cfg.method.as_deref() == Some("l2") {
        let l2 = operator_norm_l2(&m, cfg.grid.expect("normalized"))?;
        let mut o = Outcome::new(json!({ "symbol": m.tag(), "l2": l2 }));
        o.row("||T||_2->2 = ess sup |m|", format!("{:.9}", l2.ess_sup));
        return Ok(o);
    }
    let (p, q) = (exponent(cfg.p)?, exponent(cfg.q)?);
    let search = NormSearch {
        trials: cfg.trials.expect("normalized"),
        seed: cfg.seed.expect("normalized"),
        ..NormSearch::default()
    };
    let op = TruncatedOperator::new(&m, cfg.radius.expect("normalized"), &quadrature(cfg))?;
    let est = norm_lower_bound_on(&op, p, q, &search)?;
    // Young's inequality bounds every (p, q) with q >= p by the kernel's l1 norm.
    let kernel_l1 = op.kernel().kernel.lp_norm(Exponent::Finite(1.0));
    let mut o = Outcome::new(json!({
        "symbol": m.tag(),
        "estimate": est,
        "kernel_l1_on_box": kernel_l1,
        "kernel_box": op.kernel().bounding_box(),
    }));
    o.row("lower bound", format!("{:.9}", est.lower_bound));
    o.row("method", format!("{:?}", est.method));
    o.row("witness", &est.witness_id);
    o.row("kernel l1 on box", format!("{kernel_l1:.6}"));
    Ok(o)
}

fn wave(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let d = cfg.d;
    let radius = cfg.radius.expect("normalized");
    let f = DataSpec::parse(cfg.f.as_deref().expect("normalized"), d)?.build(d, radius, &ctx.base)?;
    let g = DataSpec::parse(cfg.g.as_deref().expect("normalized"), d)?.build(d, radius, &ctx.base)?;
    let window = LatticeBox::cube(d, cfg.window.expect("normalized"))?;
    let times = cfg.times.clone().expect("normalized");
    let method = cfg.method.clone().expect("normalized");
    let q = quadrature(cfg);
    let data_box = f.bounding_box().hull(g.bounding_box());
    let e0 = energy(&WaveState::new(0.0, f.clone(), g.clone())?)?;
    let mut states = Vec::new();
    let mut o = Outcome::new(Value::Null);
    for (i, &t) in times.iter().enumerate() {
        let s = match method.as_str() {
            "spectral" => solve_wave_with(&f, &g, t, &window, &q)?,
            _ => {
                let margin = buffer_margin(t) as i64;
                let buffer = window.hull(&data_box.grown(margin));
                let dt = cfg.dt.expect("normalized");
                let full = if method == "leapfrog" {
                    leapfrog_evolve(&f, &g, t, dt, &buffer)?
                } else {
                    rk4_evolve(&f, &g, t, dt, &buffer)?
                };
                full.restrict_to(&window)?
            }
        };
        let mut bytes = Vec::new();
        write_wave_csv(&s, &mut bytes)?;
        let name = format!("wave_{i:03}.csv");
        ctx.write(&mut o, &name, &bytes)?;
        let e = energy(&s)?;
        o.row(&format!("t = {t}"), format!("energy {e:.12e}, file {name}"));
        states.push(json!({ "t": t, "file": name, "energy": e }));
    }
    o.result = json!({
        "method": method,
        "window": window,
        "data_box": data_box,
        "buffer_margin": buffer_margin(times.iter().fold(0.0f64, |a, t| a.max(t.abs()))),
        "initial_energy": e0,
        "states": states,
    });
    Ok(o)
}

fn strichartz(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let p = cfg.p.and_then(|v| v.finite()).expect("normalized");
    let q = cfg.q.and_then(|v| v.finite()).expect("normalized");
    let report = strichartz_study(
        cfg.d,
        cfg.t.expect("normalized"),
        p,
        q,
        cfg.radius.expect("normalized"),
        cfg.trials.expect("normalized"),
        cfg.seed.expect("normalized"),
        cfg.tol,
    )?;
    let mut o = Outcome::new(json!(report));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "ratio"]).map_err(lattice_multipliers::Error::from)?;
    for (l, r) in report.labels.iter().zip(&report.ratios) {
        w.write_record([l.clone(), r.to_string()]).map_err(lattice_multipliers::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    ctx.write(&mut o, "ratios.csv", &bytes)?;
    o.row("max ratio", format!("{:.9} ({})", report.max_ratio, report.argmax));
    o.row("window radius", report.window_radius);
    Ok(o)
}

fn run_selftest(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = cfg.seed.expect("normalized");
    let ids = cfg.criteria.clone().expect("normalized");
    let results: Vec<_> = ids.iter().map(|&id| selftest::run_criterion(id, seed)).collect();
    let mut o = Outcome::new(json!({ "criteria": results }));
    for r in &results {
        o.row(
            &format!("criterion {:>2}", r.id),
            format!("[{}] {} ({:.1} s)", if r.passed { "PASS" } else { "FAIL" }, r.title, r.seconds),
        );
    }
    o.passed = results.iter().all(|r| r.passed);
    Ok(o)
}

/// Resolves the output directory, creating it.
pub fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}
