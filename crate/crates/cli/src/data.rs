//! Input data for `apply` and `wave`, and the wave-state CSV layout.

use std::io::Write;
use std::path::Path;

use lattice_multipliers::io::read_grid_csv;
use lattice_multipliers::regularity::random_data;
use lattice_multipliers::wave::WaveState;
use lattice_multipliers::{Error, GridFunction, LatticeBox, Result, C64};

/// Built-in data or a CSV file:
///
/// * `zero`, `delta`, `delta:n=1/-2`
/// * `gaussian-profile` or `gaussian-profile:s=2.5`, `exp(-|n|^2 / (2 s^2))`
///   on the data cube, `s` defaulting to a third of its radius
/// * `random:SEED`, complex Gaussian entries on the data cube
/// * `csv:PATH` or a bare path
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Zero,
    Delta(Vec<i64>),
    Gaussian(Option<f64>),
    Random(u64),
    Csv(String),
}

fn bad(spec: &str, why: &str) -> Error {
    Error::InvalidParameter(format!("data spec {spec:?}: {why}"))
}

impl DataSpec {
    pub fn parse(spec: &str, d: usize) -> Result<DataSpec> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        match (head, arg) {
            ("zero", None) => Ok(DataSpec::Zero),
            ("delta", None) => Ok(DataSpec::Delta(vec![0; d])),
            ("delta", Some(a)) => {
                let coords = a.strip_prefix("n=").ok_or_else(|| bad(spec, "expected delta:n=..."))?;
                let n: Vec<i64> = coords
                    .split('/')
                    .map(|c| c.trim().parse().map_err(|_| bad(spec, "bad coordinate")))
                    .collect::<Result<_>>()?;
                if n.len() != d {
                    return Err(bad(spec, &format!("needs {d} coordinates")));
                }
                Ok(DataSpec::Delta(n))
            }
            ("gaussian-profile", None) => Ok(DataSpec::Gaussian(None)),
            ("gaussian-profile", Some(a)) => {
                let s: f64 = a
                    .strip_prefix("s=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(spec, "expected gaussian-profile:s=<width>"))?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(bad(spec, "width must be positive"));
                }
                Ok(DataSpec::Gaussian(Some(s)))
            }
            ("random", Some(a)) => Ok(DataSpec::Random(a.parse().map_err(|_| bad(spec, "expected random:<u64>"))?)),
            ("csv", Some(path)) => Ok(DataSpec::Csv(path.to_string())),
            _ if spec.ends_with(".csv") => Ok(DataSpec::Csv(spec.to_string())),
            _ => Err(bad(spec, "unknown data source")),
        }
    }

    /// Materializes the data; built-in profiles live on the cube of `radius`.
    pub fn build(&self, d: usize, radius: usize, base: &Path) -> Result<GridFunction> {
        let cube = LatticeBox::cube(d, radius)?;
        match self {
            DataSpec::Zero => Ok(GridFunction::zeros(cube)),
            DataSpec::Delta(n) => GridFunction::delta(n),
            DataSpec::Gaussian(s) => {
                let s = s.unwrap_or((radius as f64 / 3.0).max(0.5));
                GridFunction::from_fn(cube, |n| {
                    let r2: f64 = n.iter().map(|&x| (x * x) as f64).sum();
                    C64::new((-r2 / (2.0 * s * s)).exp(), 0.0)
                })
            }
            DataSpec::Random(seed) => {
                // Odd streams are complex Gaussian.
                let values = random_data(cube.len(), *seed, 1);
                GridFunction::new(cube, values)
            }
            DataSpec::Csv(path) => {
                let p = base.join(path);
                let f = read_grid_csv(std::fs::File::open(&p)?)?;
                if f.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: f.dim() });
                }
                Ok(f)
            }
        }
    }
}

/// `n_1,...,n_d,u_re,u_im,v_re,v_im`, one row per lattice point of the state.
pub fn write_wave_csv<W: Write>(s: &WaveState, out: W) -> Result<()> {
    let d = s.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|j| format!("n_{j}")).collect();
    header.extend(["u_re", "u_im", "v_re", "v_im"].map(String::from));
    w.write_record(&header)?;
    for (n, u) in s.u.iter() {
        let v = s.v.get(&n);
        let mut rec: Vec<String> = n.iter().map(|x| x.to_string()).collect();
        rec.extend([u.re, u.im, v.re, v.im].map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_specs() {
        assert_eq!(DataSpec::parse("delta", 2).unwrap(), DataSpec::Delta(vec![0, 0]));
        assert_eq!(DataSpec::parse("delta:n=1/-2", 2).unwrap(), DataSpec::Delta(vec![1, -2]));
        assert_eq!(DataSpec::parse("random:7", 1).unwrap(), DataSpec::Random(7));
        assert_eq!(DataSpec::parse("gaussian-profile:s=2", 1).unwrap(), DataSpec::Gaussian(Some(2.0)));
        assert_eq!(DataSpec::parse("f.csv", 1).unwrap(), DataSpec::Csv("f.csv".into()));
        assert!(DataSpec::parse("delta:n=1", 2).is_err());
        assert!(DataSpec::parse("noise", 1).is_err());
    }

    #[test]
    fn random_data_is_reproducible() {
        let a = DataSpec::Random(5).build(2, 3, Path::new(".")).unwrap();
        let b = DataSpec::Random(5).build(2, 3, Path::new(".")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, DataSpec::Random(6).build(2, 3, Path::new(".")).unwrap());
    }
}
