//! CSV and JSON exchange formats.
//!
//! Grid functions are tidy CSV with header `n_1,...,n_d,re,im`; torus samples
//! use `xi_1,...,xi_d,re,im`. Floats are written in shortest round-trip form
//! so identical inputs give byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{TorusGrid, TorusSamples};
use crate::lattice::{GridFunction, LatticeBox, C64};
use crate::multiplier::KernelTable;

fn header(prefix: &str, d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|j| format!("{prefix}_{j}")).collect();
    h.push("re".into());
    h.push("im".into());
    h
}

pub fn write_grid_csv<W: Write>(f: &GridFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("n", f.dim()))?;
    for (n, v) in f.iter() {
        let mut rec: Vec<String> = n.iter().map(|x| x.to_string()).collect();
        rec.push(v.re.to_string());
        rec.push(v.im.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `n_1,...,n_d,re,im` rows; the box is the hull of the listed points
/// and unlisted points are zero.
pub fn read_grid_csv<R: Read>(input: R) -> Result<GridFunction> {
    let mut r = csv::Reader::from_reader(input);
    let h = r.headers()?.clone();
    let cols = h.len();
    if cols < 3 || h.get(cols - 2) != Some("re") || h.get(cols - 1) != Some("im") {
        return Err(Error::Malformed("grid CSV header must be n_1,...,n_d,re,im".into()));
    }
    let d = cols - 2;
    for (j, name) in h.iter().take(d).enumerate() {
        if name != format!("n_{}", j + 1) {
            return Err(Error::Malformed(format!("unexpected column {name:?}")));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Malformed(format!("row {}: bad {what}", line + 2));
        let n: Vec<i64> = (0..d)
            .map(|j| rec[j].trim().parse().map_err(|_| bad("index")))
            .collect::<Result<_>>()?;
        let re: f64 = rec[d].trim().parse().map_err(|_| bad("re"))?;
        let im: f64 = rec[d + 1].trim().parse().map_err(|_| bad("im"))?;
        rows.push((n, C64::new(re, im)));
    }
    if rows.is_empty() {
        return Err(Error::Malformed("grid CSV has no rows".into()));
    }
    let mut lo = rows[0].0.clone();
    let mut hi = lo.clone();
    for (n, _) in &rows {
        for j in 0..d {
            lo[j] = lo[j].min(n[j]);
            hi[j] = hi[j].max(n[j]);
        }
    }
    let bx = LatticeBox::new(lo, hi)?;
    let mut values = vec![C64::new(0.0, 0.0); bx.len()];
    for (n, v) in rows {
        values[bx.index_of(&n).expect("inside hull")] = v;
    }
    GridFunction::new(bx, values)
}

pub fn write_samples_csv<W: Write>(s: &TorusSamples, out: W) -> Result<()> {
    let grid = s.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("xi", grid.dim()))?;
    let mut xi = vec![0.0; grid.dim()];
    for (i, v) in s.values().iter().enumerate() {
        grid.point_into(i, &mut xi);
        let mut rec: Vec<String> = xi.iter().map(|x| x.to_string()).collect();
        rec.push(v.re.to_string());
        rec.push(v.im.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads samples written by [`write_samples_csv`] for a known grid.
pub fn read_samples_csv<R: Read>(grid: &TorusGrid, input: R) -> Result<TorusSamples> {
    let mut r = csv::Reader::from_reader(input);
    let d = grid.dim();
    if r.headers()?.len() != d + 2 {
        return Err(Error::Malformed("sample CSV column count does not match the grid".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for rec in r.records() {
        let rec = rec?;
        let p = |k: usize| -> Result<f64> {
            rec[k].trim().parse().map_err(|_| Error::Malformed(format!("bad number {:?}", &rec[k])))
        };
        values.push(C64::new(p(d)?, p(d + 1)?));
    }
    TorusSamples::new(grid.clone(), values)
}

/// Everything in a [`KernelTable`] except the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub symbol: String,
    pub hermitian: bool,
    #[serde(rename = "box")]
    pub bx: LatticeBox,
    pub grid: Vec<usize>,
    pub aliasing_estimate: f64,
    pub tol: f64,
    pub converged: bool,
    pub history: Vec<(usize, f64)>,
}

impl KernelMeta {
    pub fn of(k: &KernelTable) -> Self {
        Self {
            symbol: k.symbol.clone(),
            hermitian: k.hermitian,
            bx: k.bounding_box().clone(),
            grid: k.grid.clone(),
            aliasing_estimate: k.aliasing_estimate,
            tol: k.tol,
            converged: k.converged,
            history: k.history.clone(),
        }
    }

    pub fn with_values(self, kernel: GridFunction) -> Result<KernelTable> {
        if kernel.bounding_box() != &self.bx {
            return Err(Error::Malformed("kernel values do not cover the recorded box".into()));
        }
        Ok(KernelTable {
            symbol: self.symbol,
            hermitian: self.hermitian,
            kernel,
            grid: self.grid,
            aliasing_estimate: self.aliasing_estimate,
            tol: self.tol,
            converged: self.converged,
            history: self.history,
        })
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// Writes `<stem>.csv` and `<stem>.json` for a kernel table.
pub fn save_kernel(k: &KernelTable, dir: &Path, stem: &str) -> Result<()> {
    let mut csv_bytes = Vec::new();
    write_grid_csv(&k.kernel, &mut csv_bytes)?;
    write_atomic(&dir.join(format!("{stem}.csv")), &csv_bytes)?;
    write_atomic(&dir.join(format!("{stem}.json")), to_json_pretty(&KernelMeta::of(k))?.as_bytes())
}

pub fn load_kernel(dir: &Path, stem: &str) -> Result<KernelTable> {
    let meta: KernelMeta = serde_json::from_reader(std::fs::File::open(dir.join(format!("{stem}.json")))?)?;
    let values = read_grid_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?)?;
    // The CSV lists every point, so the hull equals the recorded box.
    meta.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_csv_round_trip_is_exact() {
        let bx = LatticeBox::new(vec![-2, 3], vec![1, 5]).unwrap();
        let f = GridFunction::from_fn(bx, |n| C64::new(n[0] as f64 / 3.0, 1e-300 * n[1] as f64)).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n_1,n_2,re,im\n"));
        let g = read_grid_csv(&buf[..]).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn sparse_csv_fills_zeros() {
        let text = "n_1,re,im\n-1,1,0\n2,0,2\n";
        let g = read_grid_csv(text.as_bytes()).unwrap();
        assert_eq!(g.values().len(), 4);
        assert_eq!(g.get(&[0]), C64::new(0.0, 0.0));
        assert_eq!(g.get(&[2]), C64::new(0.0, 2.0));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_grid_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_grid_csv("n_1,re,im\nx,1,0\n".as_bytes()).is_err());
        assert!(read_grid_csv("n_1,re,im\n".as_bytes()).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let grid = TorusGrid::uniform(2, 8).unwrap();
        let s = TorusSamples::sample(&grid, |xi| C64::new(xi[0], xi[1] * 3.0)).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&s, &mut buf).unwrap();
        assert_eq!(read_samples_csv(&grid, &buf[..]).unwrap(), s);
    }

    #[test]
    fn kernel_files_round_trip() {
        let dir = std::env::temp_dir().join(format!("lm-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let m = crate::symbol::Symbol::riesz(1, 1).unwrap();
        let k = crate::multiplier::synthesize_kernel(&m, &LatticeBox::cube(1, 8).unwrap(), 1e-8).unwrap();
        save_kernel(&k, &dir, "riesz").unwrap();
        assert_eq!(load_kernel(&dir, "riesz").unwrap(), k);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
