//! Kernel synthesis and application of `T_m`.
//!
//! Torus integrals are evaluated with the rectangle rule on an `N`-point grid
//! per axis. `N` is doubled until the quantity of interest changes by less
//! than `tol` in `l^inf`, or until the per-dimension cap is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{convolve, forward_dft, inverse_dft, sample_grid, TorusGrid, TorusSamples};
use crate::lattice::{GridFunction, LatticeBox, C64};
use crate::symbol::{smooth_step, Symbol};

/// Largest grid size per axis for `d = 1, 2, 3`.
pub const GRID_CAPS: [usize; 3] = [1 << 20, 1 << 12, 1 << 8];

pub fn default_cap(d: usize) -> usize {
    GRID_CAPS[d.clamp(1, 3) - 1]
}

/// Controls the doubling loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub tol: f64,
    /// First grid size per axis; chosen from the boxes when `None`.
    pub start: Option<usize>,
    /// Largest grid size per axis; [`default_cap`] when `None`.
    pub cap: Option<usize>,
    /// Return the last iterate instead of an error when the cap is hit.
    pub accept_unconverged: bool,
}

impl Quadrature {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            start: None,
            cap: None,
            accept_unconverged: false,
        }
    }

    pub fn accepting_unconverged(mut self) -> Self {
        self.accept_unconverged = true;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn with_start(mut self, start: usize) -> Self {
        self.start = Some(start);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Initial grid: the power of two at least `2 * needed` (and at least 32),
    /// clamped to the cap but never below `needed`.
    fn initial_grid(&self, d: usize, needed: &[usize]) -> Result<(TorusGrid, usize)> {
        let cap = self.cap.unwrap_or_else(|| default_cap(d));
        let sizes: Vec<usize> = needed
            .iter()
            .enumerate()
            .map(|(axis, &e)| {
                let want = self
                    .start
                    .unwrap_or_else(|| (2 * e).max(32).next_power_of_two());
                let n = want.min(cap).max(e);
                if n > cap {
                    Err(Error::GridTooSmall {
                        axis,
                        extent: e,
                        size: cap,
                    })
                } else {
                    Ok(n)
                }
            })
            .collect::<Result<_>>()?;
        Ok((TorusGrid::new(&sizes)?, cap))
    }
}

/// Outcome of one doubling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doubling {
    /// `(N, max change from N/2 to N)` for every doubling step.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

impl Doubling {
    pub fn last_change(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |h| h.1)
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Runs `eval` on successively doubled grids until two iterates agree.
fn doubling<F>(
    what: &str,
    q: &Quadrature,
    mut grid: TorusGrid,
    cap: usize,
    mut eval: F,
) -> Result<(GridFunction, TorusGrid, Doubling)>
where
    F: FnMut(&TorusGrid) -> Result<GridFunction>,
{
    q.validate()?;
    let mut prev: Option<GridFunction> = None;
    let mut cur = eval(&grid)?;
    let mut history: Vec<(usize, f64)> = Vec::new();
    loop {
        let next_grid = grid.doubled();
        if next_grid.sizes().iter().any(|&n| n > cap) {
            if q.accept_unconverged {
                return Ok((cur, grid, Doubling { history, converged: false }));
            }
            return Err(Error::NonConvergence {
                what: what.to_string(),
                cap,
                tol: q.tol,
                last_diff: history.last().map_or(f64::INFINITY, |h| h.1),
                iterates: Box::new((
                    prev.map(GridFunction::into_values).unwrap_or_default(),
                    cur.into_values(),
                )),
            });
        }
        let next = eval(&next_grid)?;
        let diff = max_diff(cur.values(), next.values());
        history.push((next_grid.sizes()[0], diff));
        if diff < q.tol {
            return Ok((next, next_grid, Doubling { history, converged: true }));
        }
        prev = Some(std::mem::replace(&mut cur, next));
        grid = next_grid;
    }
}

/// Truncated convolution kernel `K(n) = int m(xi) e^{-2 pi i xi.n} dxi` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub symbol: String,
    pub hermitian: bool,
    pub kernel: GridFunction,
    /// Quadrature size per axis of the returned iterate.
    pub grid: Vec<usize>,
    /// Last observed doubling difference.
    pub aliasing_estimate: f64,
    pub tol: f64,
    pub converged: bool,
    pub history: Vec<(usize, f64)>,
}

impl KernelTable {
    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn bounding_box(&self) -> &LatticeBox {
        self.kernel.bounding_box()
    }

    /// `K(n)`, zero outside the box.
    pub fn get(&self, n: &[i64]) -> C64 {
        self.kernel.get(n)
    }

    pub fn values(&self) -> &[C64] {
        self.kernel.values()
    }

    /// Table from given values, e.g. an analytic kernel.
    pub fn from_values(symbol: &str, kernel: GridFunction) -> Self {
        Self {
            symbol: symbol.to_string(),
            hermitian: false,
            kernel,
            grid: Vec::new(),
            aliasing_estimate: 0.0,
            tol: 0.0,
            converged: true,
            history: Vec::new(),
        }
    }
}

/// `K_N(n)` by rectangle rule on `grid`, for `n` in `bx`.
pub fn kernel_on_grid(m: &Symbol, bx: &LatticeBox, grid: &TorusGrid) -> Result<GridFunction> {
    bx.check_same_dim(m.dim())?;
    let samples = TorusSamples::new(grid.clone(), sample_grid(grid, |xi| m.eval(xi)))?;
    inverse_dft(&samples, bx)
}

pub fn synthesize_kernel(m: &Symbol, bx: &LatticeBox, tol: f64) -> Result<KernelTable> {
    synthesize_kernel_with(m, bx, &Quadrature::new(tol))
}

pub fn synthesize_kernel_with(m: &Symbol, bx: &LatticeBox, q: &Quadrature) -> Result<KernelTable> {
    bx.check_same_dim(m.dim())?;
    let needed: Vec<usize> = bx.shape();
    let (grid, cap) = q.initial_grid(m.dim(), &needed)?;
    let what = format!("kernel of {}", m.tag());
    let (kernel, grid, run) = doubling(&what, q, grid, cap, |g| kernel_on_grid(m, bx, g))?;
    Ok(KernelTable {
        symbol: m.tag(),
        hermitian: m.is_hermitian(),
        kernel,
        grid: grid.sizes().to_vec(),
        aliasing_estimate: run.last_change(),
        tol: q.tol,
        converged: run.converged,
        history: run.history,
    })
}

/// Result of applying a multiplier with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applied {
    pub output: GridFunction,
    pub grid: Vec<usize>,
    pub change: f64,
    pub converged: bool,
}

fn apply_fn<F>(what: &str, d: usize, f: &GridFunction, window: &LatticeBox, q: &Quadrature, m: F) -> Result<Applied>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    f.bounding_box().check_same_dim(d)?;
    window.check_same_dim(d)?;
    let needed: Vec<usize> = (0..d)
        .map(|a| window.extent(a) + f.bounding_box().extent(a))
        .collect();
    let (grid, cap) = q.initial_grid(d, &needed)?;
    let (output, grid, run) = doubling(what, q, grid, cap, |g| {
        let mut ff = forward_dft(f, g)?;
        let ms = sample_grid(g, &m);
        for (v, w) in ff.values_mut().iter_mut().zip(ms) {
            *v *= w;
        }
        inverse_dft(&ff, window)
    })?;
    Ok(Applied {
        output,
        grid: grid.sizes().to_vec(),
        change: run.last_change(),
        converged: run.converged,
    })
}

/// `T_m f` restricted to `window`.
pub fn apply_multiplier(m: &Symbol, f: &GridFunction, window: &LatticeBox, tol: f64) -> Result<GridFunction> {
    Ok(apply_multiplier_with(m, f, window, &Quadrature::new(tol))?.output)
}

pub fn apply_multiplier_with(m: &Symbol, f: &GridFunction, window: &LatticeBox, q: &Quadrature) -> Result<Applied> {
    apply_fn(&format!("T_m f for {}", m.tag()), m.dim(), f, window, q, |xi| m.eval(xi))
}

/// `T_{m_k} ... T_{m_1} f` on `window`, composed on the torus grid so no
/// intermediate result is truncated.
pub fn apply_sequence(symbols: &[Symbol], f: &GridFunction, window: &LatticeBox, q: &Quadrature) -> Result<Applied> {
    let first = symbols
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty symbol sequence".into()))?;
    for s in symbols {
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: s.dim(),
            });
        }
    }
    let tags: Vec<String> = symbols.iter().map(|s| s.tag()).collect();
    apply_fn(&tags.join(" then "), first.dim(), f, window, q, |xi| {
        symbols.iter().map(|s| s.eval(xi)).product()
    })
}

/// Exact convolution of the truncated kernel with `f`.
pub fn apply_kernel(k: &KernelTable, f: &GridFunction) -> Result<GridFunction> {
    convolve(&k.kernel, f)
}

/// `||T_m f||_2^2` over all of `Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// Richardson-extrapolated value.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
}

/// `||T_m f||_2^2 = int |m|^2 |F f|^2` by the rectangle rule at `N` and `2N`,
/// extrapolated assuming an `N^{-d}` leading error. That is the error
/// produced by a jump or a bounded homogeneous singularity at a grid node.
pub fn l2_output_energy(m: &Symbol, f: &GridFunction) -> Result<EnergyEstimate> {
    let d = m.dim();
    f.bounding_box().check_same_dim(d)?;
    let ext = (0..d).map(|a| f.bounding_box().extent(a)).max().unwrap_or(1);
    let n0 = (4 * ext).max(128).next_power_of_two().min(default_cap(d) / 2);
    let raw = |n: usize| -> Result<f64> {
        let grid = TorusGrid::uniform(d, n)?;
        let ff = forward_dft(f, &grid)?;
        let ms = sample_grid(&grid, |xi| m.eval(xi));
        let s: f64 = ff
            .values()
            .iter()
            .zip(&ms)
            .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
            .sum();
        Ok(s / grid.len() as f64)
    };
    let coarse = raw(n0)?;
    let fine = raw(2 * n0)?;
    let r = (1u64 << d) as f64;
    Ok(EnergyEstimate {
        value: (r * fine - coarse) / (r - 1.0),
        coarse,
        fine,
        n_coarse: n0,
        n_fine: 2 * n0,
    })
}

/// `xi -> m(a + (b - a) xi)` on `(0, 1)`; `T` with this symbol is `T_m^{a,b}`.
pub fn rescale_interval_symbol(m: &Symbol, a: f64, b: f64) -> Result<Symbol> {
    Symbol::rescaled(a, b, m.clone())
}

/// `[phi, (1 - phi_1)/(s-1), ..., (1 - phi_{s-1})/(s-1)]` with
/// `phi = (1/(s-1)) sum_j phi_j`, where `phi_j` vanishes on
/// `(a_j - eps, a_j + eps)` and is 1 off `(a_j - 2 eps, a_j + 2 eps)`.
pub fn subdivision_partition(points: &[f64], eps: f64) -> Result<Vec<Symbol>> {
    let s = points.len().saturating_sub(1);
    if s < 2 || points[0] != 0.0 || points[s] != 1.0 {
        return Err(Error::InvalidParameter(
            "subdivision needs 0 = a_0 < a_1 < ... < a_s = 1 with s >= 2".into(),
        ));
    }
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("subdivision points must increase".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let interior = &points[1..s];
    for &a in interior {
        if a - 2.0 * eps <= 0.0 || a + 2.0 * eps >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "(a - 2 eps, a + 2 eps) around {a} leaves (0, 1) for eps = {eps}"
            )));
        }
    }
    for w in interior.windows(2) {
        if w[1] - w[0] <= 4.0 * eps {
            return Err(Error::InvalidParameter(format!(
                "cutoff intervals around {} and {} overlap for eps = {eps}",
                w[0], w[1]
            )));
        }
    }
    let c = 1.0 / (s - 1) as f64;
    let notches: Vec<Symbol> = interior
        .iter()
        .map(|&a| Symbol::notch(a, eps))
        .collect::<Result<_>>()?;
    let mut out = vec![Symbol::scaled(C64::new(c, 0.0), Symbol::sum(notches.clone())?)?];
    for n in notches {
        out.push(Symbol::sum(vec![
            Symbol::constant(1, C64::new(c, 0.0))?,
            Symbol::scaled(C64::new(-c, 0.0), n)?,
        ])?);
    }
    Ok(out)
}

/// `chi(t) = 1` for `|t| <= 1`, `0` for `|t| >= 2`, smooth in between.
pub fn dyadic_cutoff(t: f64) -> f64 {
    1.0 - smooth_step(&C64::new(t.abs() - 1.0, 0.0)).re
}

/// `phi(t) = chi(t) - chi(2t)`, supported in `1/2 <= |t| <= 2`.
pub fn dyadic_bump(t: f64) -> f64 {
    dyadic_cutoff(t) - dyadic_cutoff(2.0 * t)
}

/// Littlewood-Paley pieces `m_j = m(xi) phi(2^j |xi|)` for `j = 3..=j_max`,
/// sampled on the uniform grid of size `n`.
pub fn dyadic_components(m: &Symbol, j_max: u32, n: usize) -> Result<Vec<TorusSamples>> {
    if j_max < 3 {
        return Err(Error::InvalidParameter(format!("j_max must be >= 3, got {j_max}")));
    }
    let grid = TorusGrid::uniform(m.dim(), n)?;
    (3..=j_max)
        .map(|j| {
            let scale = (1u64 << j) as f64;
            TorusSamples::sample(&grid, |xi| {
                let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                m.eval(xi) * dyadic_bump(scale * r)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_one_gives_delta() {
        let m = Symbol::constant(2, c(1.0)).unwrap();
        let k = synthesize_kernel(&m, &LatticeBox::cube(2, 4).unwrap(), 1e-12).unwrap();
        for (n, v) in k.kernel.iter() {
            let expect = if n == [0, 0] { 1.0 } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-13);
        }
        assert!(k.aliasing_estimate < 1e-13);
    }

    #[test]
    fn exponential_gives_shifted_delta() {
        let m = Symbol::exponential(vec![2, -1]).unwrap();
        let k = synthesize_kernel(&m, &LatticeBox::cube(2, 3).unwrap(), 1e-12).unwrap();
        for (n, v) in k.kernel.iter() {
            let expect = if n == [2, -1] { 1.0 } else { 0.0 };
            assert!((v - c(expect)).norm() < 1e-13);
        }
    }

    #[test]
    fn riesz_1d_kernel_closed_form() {
        let m = Symbol::riesz(1, 1).unwrap();
        let k = synthesize_kernel(&m, &LatticeBox::cube(1, 64).unwrap(), 1e-9).unwrap();
        for (n, v) in k.kernel.iter() {
            let expect = C64::new(0.0, -1.0 / (PI * (2 * n[0] + 1) as f64));
            assert!((v - expect).norm() < 1e-9, "n = {n:?}: {v} vs {expect}");
        }
    }

    #[test]
    fn interval_kernel_closed_form() {
        let (a, b) = (0.2, 0.7);
        let m = Symbol::interval(a, b).unwrap();
        // Endpoints off the dyadic grid: the jumps give an O(1/N) error.
        let q = Quadrature::new(2e-6);
        let k = synthesize_kernel_with(&m, &LatticeBox::cube(1, 16).unwrap(), &q).unwrap();
        assert!((k.get(&[0]) - c(b - a)).norm() < 1e-5);
        for n in 1..=16i64 {
            let nf = n as f64;
            let expect = (C64::from_polar(1.0, -2.0 * PI * nf * a) - C64::from_polar(1.0, -2.0 * PI * nf * b))
                / C64::new(0.0, 2.0 * PI * nf);
            assert!((k.get(&[n]) - expect).norm() < 1e-5);
        }
        // Dyadic endpoints sit on grid points, where the value 1/2 makes K(0) exact.
        let m = Symbol::interval(0.25, 0.625).unwrap();
        let k = synthesize_kernel(&m, &LatticeBox::cube(1, 4).unwrap(), 1e-8).unwrap();
        assert!((k.get(&[0]) - c(0.375)).norm() < 1e-14);
    }

    #[test]
    fn apply_agrees_with_kernel_and_convolution() {
        let m = Symbol::wave_cos(2, 1.0).unwrap();
        let window = LatticeBox::cube(2, 6).unwrap();
        let delta = GridFunction::delta(&[0, 0]).unwrap();
        let out = apply_multiplier(&m, &delta, &window, 1e-12).unwrap();
        let k = synthesize_kernel(&m, &window, 1e-12).unwrap();
        assert!(out.max_abs_diff(&k.kernel).unwrap() < 2e-12);

        let f = GridFunction::from_fn(LatticeBox::cube(2, 2).unwrap(), |n| c((n[0] - 2 * n[1]) as f64)).unwrap();
        let big = synthesize_kernel(&m, &LatticeBox::cube(2, 24).unwrap(), 1e-13).unwrap();
        let via_kernel = convolve(&big.kernel, &f).unwrap().restrict_to(&window).unwrap();
        let direct = apply_multiplier(&m, &f, &window, 1e-12).unwrap();
        assert!(via_kernel.max_abs_diff(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn non_convergence_reports_iterates() {
        let m = Symbol::interval(0.1, 0.4).unwrap();
        let q = Quadrature::new(1e-14).with_cap(1 << 10);
        match synthesize_kernel_with(&m, &LatticeBox::cube(1, 4).unwrap(), &q) {
            Err(Error::NonConvergence { iterates, cap, .. }) => {
                assert_eq!(cap, 1 << 10);
                assert_eq!(iterates.0.len(), 9);
                assert_eq!(iterates.1.len(), 9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        let k = synthesize_kernel_with(&m, &LatticeBox::cube(1, 4).unwrap(), &q.accepting_unconverged()).unwrap();
        assert!(!k.converged);
        assert!(k.aliasing_estimate > 1e-14);
    }

    #[test]
    fn sequence_of_inverse_pair_is_identity() {
        let f = GridFunction::from_fn(LatticeBox::cube(1, 3).unwrap(), |n| C64::new(n[0] as f64, 1.0)).unwrap();
        let s = [
            Symbol::imaginary_power(1, 1.5).unwrap(),
            Symbol::imaginary_power(1, -1.5).unwrap(),
        ];
        let out = apply_sequence(&s, &f, &LatticeBox::cube(1, 10).unwrap(), &Quadrature::new(1e-10)).unwrap();
        assert!(out.output.max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn energy_of_unimodular_symbol_is_exact() {
        let f = GridFunction::from_fn(LatticeBox::cube(2, 3).unwrap(), |n| C64::new(n[0] as f64, n[1] as f64 + 0.5)).unwrap();
        let m = Symbol::imaginary_power(2, 0.7).unwrap();
        let e = l2_output_energy(&m, &f).unwrap();
        let norm2 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!((e.value - norm2).abs() < 1e-10 * norm2);
        assert!((e.coarse - norm2).abs() < 1e-10 * norm2);
    }

    #[test]
    fn partition_sums_to_one() {
        let pieces = subdivision_partition(&[0.0, 0.3, 0.6, 1.0], 0.05).unwrap();
        assert_eq!(pieces.len(), 3);
        for i in 0..1000 {
            let x = i as f64 / 1000.0 - 0.5;
            let s: C64 = pieces.iter().map(|p| p.eval(&[x])).sum();
            assert!((s - c(1.0)).norm() < 1e-12);
        }
        assert!(subdivision_partition(&[0.0, 0.3, 0.35, 1.0], 0.05).is_err());
        assert!(subdivision_partition(&[0.0, 0.05, 1.0], 0.05).is_err());
    }

    #[test]
    fn dyadic_pieces_overlap_at_most_three() {
        let m = Symbol::constant(2, c(1.0)).unwrap();
        let pieces = dyadic_components(&m, 9, 256).unwrap();
        let len = pieces[0].values().len();
        for i in 0..len {
            let count = pieces.iter().filter(|p| p.values()[i].norm() > 0.0).count();
            assert!(count <= 3);
        }
    }
}
