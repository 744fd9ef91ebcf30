//! Numerical certificates for multiplier hypotheses: distribution functions,
//! weak-Lorentz constants, Mikhlin derivative bounds, the integral Hörmander
//! sum, kernel decay constants and lower bounds for `l^p -> l^q` norms.
//!
//! These are measurements, not proofs. Every constant comes with the grid or
//! box it was measured on so refinement studies can be reproduced.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{forward_dft, sample_grid, NdFft, Refinement, TorusGrid};
use crate::lattice::{norm_of_abs, Exponent, GridFunction, LatticeBox, C64};
use crate::multiplier::{synthesize_kernel_with, KernelTable, Quadrature};
use crate::par::map_range;
use crate::symbol::{SingularPoint, Symbol};

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn euclid_i(x: &[i64]) -> f64 {
    x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Distribution function and weak-Lorentz constants

fn abs_samples_sorted(m: &Symbol, n: usize) -> Result<(Vec<f64>, usize)> {
    let grid = TorusGrid::uniform(m.dim(), n)?;
    let mut a: Vec<f64> = sample_grid(&grid, |xi| m.eval(xi))
        .into_iter()
        .map(|v| v.norm())
        .collect();
    a.sort_by(|x, y| y.total_cmp(x));
    Ok((a, grid.len()))
}

/// Number of leading entries of the descending list `a` that are `>= s`.
fn count_at_least(a: &[f64], s: f64) -> usize {
    a.partition_point(|&v| v >= s)
}

/// `|{xi : |m(xi)| >= s}|` by the rectangle rule on an `n`-point grid per axis.
pub fn distribution_function(m: &Symbol, s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    let (a, total) = abs_samples_sorted(m, n)?;
    Ok(count_at_least(&a, s) as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub s: f64,
    pub measure: f64,
    pub cells: usize,
    /// `s^alpha * measure`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLorentz {
    pub alpha: f64,
    pub n: usize,
    pub constant: f64,
    pub s_at_max: f64,
    pub ladder: Vec<LadderPoint>,
    /// Ladder points skipped because their superlevel set has fewer than
    /// `min_cells` grid points.
    pub excluded: usize,
    pub min_cells: usize,
}

/// Ladder points whose superlevel set covers fewer grid cells than this are
/// dominated by lattice-point counting error and are skipped.
pub const DEFAULT_MIN_CELLS: usize = 1024;

/// `sup_s s^alpha |{|m| >= s}|` over 64 log-spaced `s` in `[1, n]`.
pub fn weak_lorentz_constant(m: &Symbol, alpha: f64, n: usize) -> Result<WeakLorentz> {
    weak_lorentz_constant_with(m, alpha, n, DEFAULT_MIN_CELLS)
}

pub fn weak_lorentz_constant_with(m: &Symbol, alpha: f64, n: usize, min_cells: usize) -> Result<WeakLorentz> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must exceed 1, got {alpha}")));
    }
    let (a, total) = abs_samples_sorted(m, n)?;
    let top = (n as f64).ln();
    let mut ladder = Vec::new();
    let mut excluded = 0;
    for i in 0..64 {
        let s = (top * i as f64 / 63.0).exp();
        let cells = count_at_least(&a, s);
        if i > 0 && cells < min_cells {
            excluded += 1;
            continue;
        }
        let measure = cells as f64 / total as f64;
        ladder.push(LadderPoint {
            s,
            measure,
            cells,
            value: s.powf(alpha) * measure,
        });
    }
    let best = ladder
        .iter()
        .copied()
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("s = 1 is always on the ladder");
    Ok(WeakLorentz {
        alpha,
        n,
        constant: best.value,
        s_at_max: best.s,
        ladder,
        excluded,
        min_cells,
    })
}

/// Weak-Lorentz constant at `n` and `2n`.
pub fn weak_lorentz_refined(m: &Symbol, alpha: f64, n: usize) -> Result<(WeakLorentz, WeakLorentz, Refinement)> {
    let coarse = weak_lorentz_constant(m, alpha, n)?;
    let fine = weak_lorentz_constant(m, alpha, 2 * n)?;
    let r = Refinement {
        coarse: coarse.constant,
        fine: fine.constant,
        n_coarse: coarse.n,
        n_fine: fine.n,
    };
    Ok((coarse, fine, r))
}

// ---------------------------------------------------------------------------
// Mikhlin constants

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

/// Central difference weights for the `k`-th derivative on offsets
/// `-r..=r`, exact for polynomials of degree `2r`.
pub fn central_weights(k: usize, r: usize) -> Vec<f64> {
    let size = 2 * r + 1;
    assert!(k < size, "stencil too small for derivative order");
    let a = DMatrix::from_fn(size, size, |row, col| {
        let x = col as f64 - r as f64;
        x.powi(row as i32)
    });
    let mut b = DVector::zeros(size);
    b[k] = (1..=k).map(|v| v as f64).product();
    a.lu().solve(&b).expect("Vandermonde system is nonsingular").iter().copied().collect()
}

/// Stencil radius giving accuracy order `acc` for derivative order `k`.
fn stencil_radius(k: usize, acc: usize) -> usize {
    if k == 0 {
        0
    } else {
        (k + acc - 1) / 2
    }
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    /// Even accuracy order of the central stencils.
    pub accuracy: usize,
    /// Upper bound on the local length scale used to pick the step.
    pub scale_cap: f64,
    /// Step is `step_factor * eps^(1/(k + accuracy)) * scale`.
    pub step_factor: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            accuracy: 8,
            scale_cap: 0.5,
            step_factor: 0.35,
        }
    }
}

/// All partial derivatives of total order `<= max_order` at `xi` by tensor
/// products of central stencils with step `h`.
pub fn fd_derivatives(m: &Symbol, xi: &[f64], max_order: usize, h: f64, acc: usize) -> Vec<(Vec<usize>, C64)> {
    let d = xi.len();
    let r_max = stencil_radius(max_order, acc).max(1);
    let side = 2 * r_max + 1;
    let total = side.pow(d as u32);
    let mut patch = vec![C64::new(0.0, 0.0); total];
    let mut pt = vec![0.0; d];
    for (idx, slot) in patch.iter_mut().enumerate() {
        let mut rem = idx;
        for a in (0..d).rev() {
            let off = (rem % side) as f64 - r_max as f64;
            rem /= side;
            pt[a] = xi[a] + h * off;
        }
        *slot = m.eval(&pt);
    }
    let weights: Vec<Vec<f64>> = (0..=max_order)
        .map(|k| central_weights(k, stencil_radius(k, acc)))
        .collect();
    let mut out = Vec::new();
    for alpha in multi_indices(d, max_order) {
        let k: usize = alpha.iter().sum();
        let radii: Vec<usize> = alpha.iter().map(|&a| stencil_radius(a, acc)).collect();
        let mut acc_v = C64::new(0.0, 0.0);
        let counts: Vec<usize> = radii.iter().map(|r| 2 * r + 1).collect();
        let n_terms: usize = counts.iter().product();
        for t in 0..n_terms {
            let mut rem = t;
            let mut w = 1.0;
            let mut f = 0usize;
            for a in 0..d {
                let j = rem % counts[a];
                rem /= counts[a];
                w *= weights[alpha[a]][j];
                let off = j as i64 - radii[a] as i64;
                f = f * side + (off + r_max as i64) as usize;
            }
            acc_v += patch[f] * w;
        }
        out.push((alpha, acc_v / h.powi(k as i32)));
    }
    out
}

/// Multi-indices in `d` variables with total order `<= k`, graded.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=k {
        let mut cur = vec![0usize; d];
        rec(d, 0, total, &mut cur, &mut out);
    }
    fn rec(d: usize, axis: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if axis == d - 1 {
            cur[axis] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[axis] = v;
            rec(d, axis + 1, left - v, cur, out);
        }
    }
    out
}

/// Periodic distance from `xi` to the nearest singular point, if any.
fn distance_to_singular(xi: &[f64], sing: &[SingularPoint]) -> f64 {
    sing.iter()
        .map(|sp| {
            let diff: Vec<f64> = xi
                .iter()
                .zip(&sp.point)
                .map(|(a, b)| crate::fourier::reduce_to_fundamental(a - b))
                .collect();
            euclid(&diff)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Derivatives at one point by the chosen path; `None` when the point is
/// excluded.
fn point_derivatives(
    m: &Symbol,
    xi: &[f64],
    max_order: usize,
    method: DerivativeMethod,
    fd: &FdOptions,
    sing: &[SingularPoint],
    extra_scale: f64,
) -> std::result::Result<Vec<(Vec<usize>, C64)>, Exclusion> {
    let dist = distance_to_singular(xi, sing);
    if dist < 1e-12 {
        return Err(Exclusion::Singular);
    }
    match method {
        DerivativeMethod::Analytic => {
            let jet = m.jet(xi, max_order).ok_or(Exclusion::NoJet)?;
            Ok((0..=max_order).flat_map(|k| jet.derivatives_of_order(k)).collect())
        }
        DerivativeMethod::FiniteDifference => {
            if let Some(h) = table_spacing(m) {
                return Ok(fd_derivatives(m, xi, max_order, h, 2));
            }
            // Each order gets the step balancing its truncation and rounding errors.
            let scale = dist.min(fd.scale_cap).min(extra_scale);
            let mut out = Vec::new();
            for k in 0..=max_order {
                let h = fd.step_factor * f64::EPSILON.powf(1.0 / (k.max(1) + fd.accuracy) as f64) * scale;
                if h < 1e-12 {
                    return Err(Exclusion::Underflow);
                }
                out.extend(
                    fd_derivatives(m, xi, k, h, fd.accuracy)
                        .into_iter()
                        .filter(|(alpha, _)| alpha.iter().sum::<usize>() == k),
                );
            }
            Ok(out)
        }
    }
}

fn table_spacing(m: &Symbol) -> Option<f64> {
    use crate::symbol::SymbolKind;
    match m.kind() {
        SymbolKind::Table(t) => Some((0..t.sizes.len()).map(|a| t.spacing(a)).fold(0.0, f64::max)),
        SymbolKind::Sum(p) | SymbolKind::Product(p) => p.iter().filter_map(table_spacing).reduce(f64::max),
        SymbolKind::Rescaled { a, b, inner } => table_spacing(inner).map(|s| s / (b - a)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exclusion {
    Singular,
    NoJet,
    Underflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderConstant {
    pub order: usize,
    pub constant: f64,
    pub argmax: Vec<f64>,
    pub multi_index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MikhlinReport {
    pub symbol: String,
    pub n: usize,
    pub method: DerivativeMethod,
    /// `"euclidean"` for `|xi|^k` or `"interval"` for `(xi (1 - xi))^k`.
    pub weight: String,
    pub orders: Vec<OrderConstant>,
    pub excluded_singular: usize,
    pub excluded_underflow: usize,
    /// Grid points on the edge `xi_j = 1/2` of the fundamental domain are skipped.
    pub rim_cells: usize,
}

impl MikhlinReport {
    pub fn constants(&self) -> Vec<f64> {
        self.orders.iter().map(|o| o.constant).collect()
    }
}

/// `c_k = sup |xi|^k max_{|alpha| = k} |d^alpha m(xi)|` over the grid, `k <= max_order`.
pub fn mikhlin_constant(m: &Symbol, max_order: usize, n: usize, method: DerivativeMethod) -> Result<MikhlinReport> {
    mikhlin_generic(m, max_order, n, method, &FdOptions::default(), false)
}

pub fn mikhlin_constant_with(
    m: &Symbol,
    max_order: usize,
    n: usize,
    method: DerivativeMethod,
    fd: &FdOptions,
) -> Result<MikhlinReport> {
    mikhlin_generic(m, max_order, n, method, fd, false)
}

/// One-dimensional form `sup_{0<xi<1} (xi (1 - xi))^k |m^(k)(xi)|`.
pub fn mikhlin_interval_constant(m: &Symbol, max_order: usize, n: usize, method: DerivativeMethod) -> Result<MikhlinReport> {
    if m.dim() != 1 {
        return Err(Error::InvalidParameter("the interval form needs d = 1".into()));
    }
    mikhlin_generic(m, max_order, n, method, &FdOptions::default(), true)
}

fn mikhlin_generic(
    m: &Symbol,
    max_order: usize,
    n: usize,
    method: DerivativeMethod,
    fd: &FdOptions,
    interval_weight: bool,
) -> Result<MikhlinReport> {
    let d = m.dim();
    if max_order > d + 1 || max_order > crate::jet::MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "max_order {max_order} exceeds d + 1 = {}",
            d + 1
        )));
    }
    let grid = TorusGrid::uniform(d, n)?;
    let n = grid.sizes()[0];
    let sing = m.singular_points();
    let half = n / 2;
    let mut interval_sing = sing.clone();
    if interval_weight {
        interval_sing.push(SingularPoint {
            point: vec![0.0],
            value: m.eval(&[0.0]),
        });
    }
    let per_point = map_range(grid.len(), |idx| {
        let mut k = [0usize; 3];
        grid.index_into(idx, &mut k[..d]);
        if !interval_weight && k[..d].iter().any(|&v| v == half) {
            return None;
        }
        let mut xi = vec![0.0; d];
        if interval_weight {
            xi[0] = k[0] as f64 / n as f64;
        } else {
            grid.point_into(idx, &mut xi);
        }
        let (weight_base, extra) = if interval_weight {
            let w = xi[0] * (1.0 - xi[0]);
            (w, xi[0].min(1.0 - xi[0]))
        } else {
            (euclid(&xi), f64::INFINITY)
        };
        let res = point_derivatives(m, &xi, max_order, method, fd, &interval_sing, extra);
        Some((xi, weight_base, res))
    });
    let mut orders: Vec<OrderConstant> = (0..=max_order)
        .map(|k| OrderConstant {
            order: k,
            constant: 0.0,
            argmax: vec![0.0; d],
            multi_index: vec![0; d],
        })
        .collect();
    let (mut excluded_singular, mut excluded_underflow, mut rim_cells) = (0, 0, 0);
    for item in per_point {
        let Some((xi, w, res)) = item else {
            rim_cells += 1;
            continue;
        };
        match res {
            Err(Exclusion::Singular) => excluded_singular += 1,
            Err(Exclusion::Underflow) => excluded_underflow += 1,
            Err(Exclusion::NoJet) => {
                return Err(Error::InvalidParameter(format!(
                    "{} has no analytic derivatives; use finite differences",
                    m.tag()
                )))
            }
            Ok(derivs) => {
                for (alpha, v) in derivs {
                    let k: usize = alpha.iter().sum();
                    let val = w.powi(k as i32) * v.norm();
                    if val > orders[k].constant {
                        orders[k] = OrderConstant {
                            order: k,
                            constant: val,
                            argmax: xi.clone(),
                            multi_index: alpha,
                        };
                    }
                }
            }
        }
    }
    Ok(MikhlinReport {
        symbol: m.tag(),
        n,
        method,
        weight: if interval_weight { "interval" } else { "euclidean" }.into(),
        orders,
        excluded_singular,
        excluded_underflow,
        rim_cells,
    })
}

/// `max |xi|^k |d^alpha m_analytic - d^alpha m_fd|` over the grid, per order.
pub fn mikhlin_path_discrepancy(m: &Symbol, max_order: usize, n: usize) -> Result<Vec<f64>> {
    mikhlin_path_discrepancy_with(m, max_order, n, &FdOptions::default())
}

pub fn mikhlin_path_discrepancy_with(m: &Symbol, max_order: usize, n: usize, fd: &FdOptions) -> Result<Vec<f64>> {
    let d = m.dim();
    let grid = TorusGrid::uniform(d, n)?;
    let sing = m.singular_points();
    let fd = *fd;
    let per_point = map_range(grid.len(), |idx| {
        let xi = grid.point(idx);
        let a = point_derivatives(m, &xi, max_order, DerivativeMethod::Analytic, &fd, &sing, f64::INFINITY);
        let f = point_derivatives(m, &xi, max_order, DerivativeMethod::FiniteDifference, &fd, &sing, f64::INFINITY);
        (euclid(&xi), a, f)
    });
    let mut worst = vec![0.0f64; max_order + 1];
    for (r, a, f) in per_point {
        if let (Ok(a), Ok(f)) = (a, f) {
            for ((alpha, x), (_, y)) in a.iter().zip(&f) {
                let k: usize = alpha.iter().sum();
                worst[k] = worst[k].max(r.powi(k as i32) * (x - y).norm());
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Hörmander sums and decay constants

fn lattice_ball(d: usize, r: f64) -> Vec<Vec<i64>> {
    let ri = r.floor() as usize;
    let bx = LatticeBox::cube(d, ri).expect("valid dimension");
    bx.points().filter(|p| euclid_i(p) <= r + 1e-12).collect()
}

/// `sum_{2|s| <= |r| <= R} |K(r - s) - K(r)|`.
pub fn hormander_sum(k: &KernelTable, s: &[i64], r_max: usize) -> Result<f64> {
    let d = k.dim();
    k.bounding_box().check_same_dim(s.len())?;
    let ns = euclid_i(s);
    if ns == 0.0 {
        return Err(Error::InvalidParameter("shift s must be nonzero".into()));
    }
    let need = (r_max as f64 + ns).ceil() as usize;
    let ball = LatticeBox::cube(d, need)?;
    if !k.bounding_box().contains_box(&ball) {
        return Err(Error::BoxTooSmall(format!(
            "kernel box must contain the cube of radius {need} (R = {r_max}, |s| = {ns:.3})"
        )));
    }
    let mut sum = 0.0;
    let mut rs = vec![0i64; d];
    for r in ball.points() {
        let nr = euclid_i(&r);
        if nr < 2.0 * ns || nr > r_max as f64 {
            continue;
        }
        for a in 0..d {
            rs[a] = r[a] - s[a];
        }
        sum += (k.get(&rs) - k.get(&r)).norm();
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    pub symbol: String,
    pub shift_radius: f64,
    pub r_max: usize,
    pub constant: f64,
    pub argmax: Vec<i64>,
    pub sums: Vec<(Vec<i64>, f64)>,
}

/// Maximum of [`hormander_sum`] over all `0 < |s| <= shift_radius`.
pub fn hormander_constant(k: &KernelTable, shift_radius: f64, r_max: usize) -> Result<f64> {
    Ok(hormander_scan(k, shift_radius, r_max)?.constant)
}

pub fn hormander_scan(k: &KernelTable, shift_radius: f64, r_max: usize) -> Result<HormanderReport> {
    let shifts: Vec<Vec<i64>> = lattice_ball(k.dim(), shift_radius)
        .into_iter()
        .filter(|s| s.iter().any(|&v| v != 0))
        .collect();
    let sums: Vec<Result<f64>> = map_range(shifts.len(), |i| hormander_sum(k, &shifts[i], r_max));
    let mut out = Vec::with_capacity(shifts.len());
    for (s, v) in shifts.into_iter().zip(sums) {
        out.push((s, v?));
    }
    let (argmax, constant) = out
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(s, v)| (s.clone(), *v))
        .unwrap_or((vec![0; k.dim()], 0.0));
    Ok(HormanderReport {
        symbol: k.symbol.clone(),
        shift_radius,
        r_max,
        constant,
        argmax,
        sums: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    /// `max |K(n)| (1 + |n|)^d`
    pub c0: f64,
    pub argmax0: Vec<i64>,
    /// `max_j |K(n + e_j) - K(n)| (1 + |n|)^(d+1)`
    pub c1: f64,
    pub argmax1: Vec<i64>,
}

pub fn decay_constants(k: &KernelTable) -> DecayConstants {
    let d = k.dim();
    let bx = k.bounding_box();
    let mut out = DecayConstants {
        c0: 0.0,
        argmax0: vec![0; d],
        c1: 0.0,
        argmax1: vec![0; d],
    };
    let mut shifted = vec![0i64; d];
    for (n, v) in k.kernel.iter() {
        let w = 1.0 + euclid_i(&n);
        let a = v.norm() * w.powi(d as i32);
        if a > out.c0 {
            out.c0 = a;
            out.argmax0 = n.clone();
        }
        for j in 0..d {
            shifted.copy_from_slice(&n);
            shifted[j] += 1;
            if !bx.contains(&shifted) {
                continue;
            }
            let g = (k.get(&shifted) - v).norm() * w.powi(d as i32 + 1);
            if g > out.c1 {
                out.c1 = g;
                out.argmax1 = n.clone();
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Operator norms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Norm {
    /// `max |m|` over grid points off the singular set.
    pub ess_sup: f64,
    /// Largest `|m|` among singular-point conventions.
    pub convention_max: f64,
    pub n: usize,
}

/// `||T_m||_{2->2} = ess sup |m|`, measured on the grid.
pub fn operator_norm_l2(m: &Symbol, n: usize) -> Result<L2Norm> {
    let grid = TorusGrid::uniform(m.dim(), n)?;
    let sing = m.singular_points();
    let vals = map_range(grid.len(), |idx| {
        let xi = grid.point(idx);
        if distance_to_singular(&xi, &sing) < 1e-12 {
            0.0
        } else {
            m.eval(&xi).norm()
        }
    });
    Ok(L2Norm {
        ess_sup: vals.into_iter().fold(0.0, f64::max),
        convention_max: sing.iter().map(|s| s.value.norm()).fold(0.0, f64::max),
        n: grid.sizes()[0],
    })
}

/// The finite operator `f |-> (K * f)` restricted to an inner region, with
/// `f` supported on a centered box of radius `R`, `K` truncated to radius
/// `3R` and the output read on radius `2R`. There the truncation is exact,
/// so ratios are honest lower bounds for `||T_m||_{p->q}` up to the kernel
/// quadrature error.
pub struct TruncatedOperator {
    support: LatticeBox,
    inner: LatticeBox,
    kernel: KernelTable,
    grid: TorusGrid,
    spectrum: Vec<C64>,
    fft: NdFft,
}

impl std::fmt::Debug for TruncatedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TruncatedOperator")
            .field("support", &self.support)
            .field("inner", &self.inner)
            .field("grid", &self.grid)
            .finish()
    }
}

impl TruncatedOperator {
    pub fn new(m: &Symbol, radius: usize, q: &Quadrature) -> Result<Self> {
        let d = m.dim();
        let kernel = synthesize_kernel_with(m, &LatticeBox::cube(d, 3 * radius)?, q)?;
        Self::from_kernel(kernel, radius)
    }

    pub fn from_kernel(kernel: KernelTable, radius: usize) -> Result<Self> {
        let d = kernel.dim();
        let support = LatticeBox::cube(d, radius)?;
        let inner = LatticeBox::cube(d, 2 * radius)?;
        if !kernel.bounding_box().contains_box(&LatticeBox::cube(d, 3 * radius)?) {
            return Err(Error::BoxTooSmall(format!("kernel must cover radius {}", 3 * radius)));
        }
        let grid = TorusGrid::uniform(d, 10 * radius + 2)?;
        let spectrum = forward_dft(&kernel.kernel, &grid)?.into_values();
        let fft = NdFft::new(grid.sizes());
        Ok(Self {
            support,
            inner,
            kernel,
            grid,
            spectrum,
            fft,
        })
    }

    pub fn support(&self) -> &LatticeBox {
        &self.support
    }

    pub fn inner(&self) -> &LatticeBox {
        &self.inner
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    fn convolve_with(&self, x: &[C64], from: &LatticeBox, to: &LatticeBox, adjoint: bool) -> Vec<C64> {
        let mut data = vec![C64::new(0.0, 0.0); self.grid.len()];
        let mut n = vec![0i64; from.dim()];
        for (i, v) in x.iter().enumerate() {
            from.point_into(i, &mut n);
            data[self.grid.residue_index(&n)] = *v;
        }
        self.fft.process(&mut data, true);
        for (v, k) in data.iter_mut().zip(&self.spectrum) {
            *v *= if adjoint { k.conj() } else { *k };
        }
        self.fft.process(&mut data, false);
        let scale = 1.0 / self.grid.len() as f64;
        let mut out = Vec::with_capacity(to.len());
        for i in 0..to.len() {
            to.point_into(i, &mut n);
            out.push(data[self.grid.residue_index(&n)] * scale);
        }
        out
    }

    /// `A x` on the inner region, `x` given on the support box.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.convolve_with(x, &self.support, &self.inner, false)
    }

    /// `A^* y` on the support box, `y` given on the inner region.
    pub fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.convolve_with(y, &self.inner, &self.support, true)
    }

    /// `||A x||_q / ||x||_p`.
    pub fn ratio(&self, x: &[C64], p: Exponent, q: Exponent) -> f64 {
        let den = norm_of_abs(x.iter().map(|v| v.norm()), p);
        if den == 0.0 {
            return 0.0;
        }
        let y = self.apply(x);
        norm_of_abs(y.iter().map(|v| v.norm()), q) / den
    }

    /// Dense matrix of `A` (rows: inner region, columns: support box).
    pub fn dense(&self) -> DMatrix<C64> {
        let rows = self.inner.len();
        let cols = self.support.len();
        let mut a = DMatrix::zeros(rows, cols);
        let d = self.support.dim();
        let (mut n, mut j, mut diff) = (vec![0i64; d], vec![0i64; d], vec![0i64; d]);
        for r in 0..rows {
            self.inner.point_into(r, &mut n);
            for c in 0..cols {
                self.support.point_into(c, &mut j);
                for a in 0..d {
                    diff[a] = n[a] - j[a];
                }
                a[(r, c)] = self.kernel.get(&diff);
            }
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    DeltaProbe,
    RandomSearch,
    PowerIteration,
    CoordinateAscent,
    ExhaustiveSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub symbol: String,
    pub p: Exponent,
    pub q: Exponent,
    pub lower_bound: f64,
    pub method: NormMethod,
    pub trials: usize,
    pub seed: u64,
    /// Label of the witness, e.g. `delta`, `trial-17`, `refined`.
    pub witness_id: String,
    pub witness: GridFunction,
    pub support_radius: usize,
    /// Output read on the centered cube of this radius.
    pub window_radius: usize,
    /// Width of the excluded rim of the computed output, `4R - 2R`.
    pub rim: usize,
    pub kernel_aliasing_estimate: f64,
    /// Best ratio of each random trial.
    pub trial_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSearch {
    pub trials: usize,
    pub seed: u64,
    pub power_iterations: usize,
    /// Coordinate ascent runs only when the support has at most this many points.
    pub ascent_max_dim: usize,
}

impl Default for NormSearch {
    fn default() -> Self {
        Self {
            trials: 64,
            seed: 0,
            power_iterations: 60,
            ascent_max_dim: 64,
        }
    }
}

/// Seeded random stream for trial `i` of a run.
pub fn trial_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i + 1);
    rng
}

/// Random trial data: even trials are Rademacher `+-1`, odd trials complex Gaussian.
pub fn random_data(len: usize, seed: u64, i: u64) -> Vec<C64> {
    let mut rng = trial_rng(seed, i);
    (0..len)
        .map(|_| {
            if i % 2 == 0 {
                C64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0)
            } else {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            }
        })
        .collect()
}

/// `|v|^{r-1} v/|v|`, the duality map of `l^r` up to normalization.
fn duality(v: C64, r: f64) -> C64 {
    let a = v.norm();
    if a == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        v * a.powf(r - 2.0)
    }
}

/// Boyd's nonlinear power method for `||A||_{p->q}`; power iteration on
/// `A^* A` when `p = q = 2`. Needs `1 < p, q < inf`.
fn boyd(op: &TruncatedOperator, x0: &[C64], p: f64, q: f64, iters: usize) -> (Vec<C64>, f64) {
    let pe = Exponent::Finite(p);
    let qe = Exponent::Finite(q);
    let p_dual = p / (p - 1.0);
    let normalize = |x: Vec<C64>| {
        let s = norm_of_abs(x.iter().map(|v| v.norm()), pe);
        if s == 0.0 {
            x
        } else {
            x.into_iter().map(|v| v / s).collect::<Vec<_>>()
        }
    };
    let mut x = normalize(x0.to_vec());
    let mut best = (x.clone(), op.ratio(&x, pe, qe));
    for _ in 0..iters {
        let y = op.apply(&x);
        let z = op.adjoint(&y.iter().map(|&v| duality(v, q)).collect::<Vec<_>>());
        let next = normalize(z.into_iter().map(|v| duality(v, p_dual)).collect());
        let r = op.ratio(&next, pe, qe);
        let improved = r > best.1 * (1.0 + 1e-12);
        x = next;
        if r > best.1 {
            best = (x.clone(), r);
        }
        if !improved {
            break;
        }
    }
    best
}

/// Greedy phase and magnitude moves per coordinate.
fn coordinate_ascent(op: &TruncatedOperator, x0: &[C64], p: Exponent, q: Exponent, sweeps: usize) -> (Vec<C64>, f64) {
    let mut x = x0.to_vec();
    let mut best = op.ratio(&x, p, q);
    let moves: Vec<C64> = {
        let mut v = Vec::new();
        for k in 1..8 {
            v.push(C64::from_polar(1.0, std::f64::consts::PI * k as f64 / 4.0));
        }
        v.extend([C64::new(0.0, 0.0), C64::new(0.5, 0.0), C64::new(2.0, 0.0)]);
        v
    };
    for _ in 0..sweeps {
        let mut changed = false;
        for j in 0..x.len() {
            let orig = x[j];
            let base = if orig.norm() == 0.0 { C64::new(1.0, 0.0) } else { orig };
            for mv in &moves {
                x[j] = if *mv == C64::new(0.0, 0.0) { *mv } else { base * mv };
                let r = op.ratio(&x, p, q);
                if r > best * (1.0 + 1e-12) {
                    best = r;
                    changed = true;
                    break;
                }
                x[j] = orig;
            }
        }
        if !changed {
            break;
        }
    }
    (x, best)
}

/// Best ratio `||T_m f||_q / ||f||_p` found by delta probes, seeded random
/// trials and refinement of the best candidate.
pub fn operator_norm_lower_bound(
    m: &Symbol,
    p: Exponent,
    q: Exponent,
    radius: usize,
    search: &NormSearch,
    quad: &Quadrature,
) -> Result<NormEstimate> {
    let op = TruncatedOperator::new(m, radius, quad)?;
    norm_lower_bound_on(&op, p, q, search)
}

pub fn norm_lower_bound_on(op: &TruncatedOperator, p: Exponent, q: Exponent, search: &NormSearch) -> Result<NormEstimate> {
    let support = op.support().clone();
    let d = support.dim();
    let len = support.len();
    let radius = support.radii().expect("centered")[0];
    let center = support.index_of(&vec![0; d]).expect("origin in support");

    let mut delta = vec![C64::new(0.0, 0.0); len];
    delta[center] = C64::new(1.0, 0.0);
    let mut best = (delta.clone(), op.ratio(&delta, p, q), NormMethod::DeltaProbe, "delta".to_string());
    if len <= search.ascent_max_dim {
        for j in 0..len {
            let mut e = vec![C64::new(0.0, 0.0); len];
            e[j] = C64::new(1.0, 0.0);
            let r = op.ratio(&e, p, q);
            if r > best.1 {
                best = (e, r, NormMethod::DeltaProbe, format!("delta-{j}"));
            }
        }
    }

    let trials = map_range(search.trials, |i| {
        let x = random_data(len, search.seed, i as u64);
        let r = op.ratio(&x, p, q);
        (x, r)
    });
    let trial_ratios: Vec<f64> = trials.iter().map(|t| t.1).collect();
    for (i, (x, r)) in trials.into_iter().enumerate() {
        if r > best.1 {
            best = (x, r, NormMethod::RandomSearch, format!("trial-{i}"));
        }
    }

    let smooth = matches!((p, q), (Exponent::Finite(a), Exponent::Finite(b)) if a > 1.0 && b > 1.0);
    if smooth && search.power_iterations > 0 {
        let (x, r) = boyd(op, &best.0, p.as_f64(), q.as_f64(), search.power_iterations);
        if r > best.1 {
            best = (x, r, NormMethod::PowerIteration, "refined".into());
        }
    }
    if len <= search.ascent_max_dim {
        let (x, r) = coordinate_ascent(op, &best.0, p, q, 8);
        if r > best.1 {
            best = (x, r, NormMethod::CoordinateAscent, "ascent".into());
        }
    }

    Ok(NormEstimate {
        symbol: op.kernel().symbol.clone(),
        p,
        q,
        lower_bound: best.1,
        method: best.2,
        trials: search.trials,
        seed: search.seed,
        witness_id: best.3,
        witness: GridFunction::new(support, best.0)?,
        support_radius: radius,
        window_radius: 2 * radius,
        rim: 2 * radius,
        kernel_aliasing_estimate: op.kernel().aliasing_estimate,
        trial_ratios,
    })
}

/// Result of the small-case oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleNorm {
    pub value: f64,
    /// True when computed by a closed formula rather than a net search.
    pub exact: bool,
}

/// `||A||_{p->q}` of the finite operator for `d = 1`, radius `<= 6`,
/// `p, q in {1, 2, inf}`.
///
/// Closed forms: `p = 1` (largest column `q`-norm), `q = inf` (largest row
/// `p'`-norm), `p = q = 2` (largest singular value). The remaining pairs
/// maximize over `x` with unimodular entries, which contains a maximizer:
/// all `{+-1, +-i}` patterns when the support has at most 8 points, otherwise
/// a seeded net, followed by phase ascent.
pub fn exhaustive_norm_small(op: &TruncatedOperator, p: Exponent, q: Exponent) -> Result<OracleNorm> {
    let supp = op.support();
    let radius = supp.radii().map(|r| r[0]).unwrap_or(usize::MAX);
    if supp.dim() != 1 || radius > 6 {
        return Err(Error::InvalidParameter("exhaustive oracle needs d = 1 and R <= 6".into()));
    }
    let allowed = |e: Exponent| matches!(e, Exponent::Infinity) || e == Exponent::Finite(1.0) || e == Exponent::Finite(2.0);
    if !allowed(p) || !allowed(q) {
        return Err(Error::InvalidParameter("exhaustive oracle needs p, q in {1, 2, inf}".into()));
    }
    let a = op.dense();
    let col_norm = |c: usize, e: Exponent| norm_of_abs(a.column(c).iter().map(|v| v.norm()), e);
    let row_norm = |r: usize, e: Exponent| norm_of_abs(a.row(r).iter().map(|v| v.norm()), e);
    if p == Exponent::Finite(1.0) {
        let v = (0..a.ncols()).map(|c| col_norm(c, q)).fold(0.0, f64::max);
        return Ok(OracleNorm { value: v, exact: true });
    }
    if q == Exponent::Infinity {
        let v = (0..a.nrows()).map(|r| row_norm(r, p.conjugate())).fold(0.0, f64::max);
        return Ok(OracleNorm { value: v, exact: true });
    }
    if p == Exponent::Finite(2.0) && q == Exponent::Finite(2.0) {
        let sv = a.clone().svd(false, false).singular_values;
        return Ok(OracleNorm { value: sv.max(), exact: true });
    }
    // (2, 1) is handled through the adjoint: ||A||_{2->1} = ||A^*||_{inf->2}.
    let (mat, pp, qq) = if p == Exponent::Finite(2.0) && q == Exponent::Finite(1.0) {
        (a.adjoint(), Exponent::Infinity, Exponent::Finite(2.0))
    } else {
        (a, p, q)
    };
    debug_assert_eq!(pp, Exponent::Infinity);
    let dim = mat.ncols();
    let eval = |x: &DVector<C64>| {
        let y = &mat * x;
        norm_of_abs(y.iter().map(|v| v.norm()), qq)
    };
    let phases = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    let mut starts: Vec<DVector<C64>> = Vec::new();
    if dim <= 8 {
        for code in 0..4usize.pow(dim as u32) {
            starts.push(DVector::from_fn(dim, |i, _| phases[(code >> (2 * i)) & 3]));
        }
    } else {
        let mut rng = trial_rng(0x5eed, 0);
        for _ in 0..4096 {
            starts.push(DVector::from_fn(dim, |_, _| {
                C64::from_polar(1.0, rng.gen::<f64>() * 2.0 * std::f64::consts::PI)
            }));
        }
    }
    let mut scored: Vec<(f64, DVector<C64>)> = starts.into_iter().map(|x| (eval(&x), x)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for (_, x0) in scored.into_iter().take(16) {
        let mut x = x0;
        let mut cur = eval(&x);
        let mut step = std::f64::consts::PI / 4.0;
        while step > 1e-9 {
            let mut improved = false;
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    let old = x[j];
                    x[j] = old * C64::from_polar(1.0, sign * step);
                    let v = eval(&x);
                    if v > cur * (1.0 + 1e-13) {
                        cur = v;
                        improved = true;
                    } else {
                        x[j] = old;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        best = best.max(cur);
    }
    Ok(OracleNorm { value: best, exact: false })
}

/// Container for the regularity measurements of one symbol.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub symbol: String,
    pub dim: usize,
    pub conventions: Vec<SingularPoint>,
    pub weak_lorentz: Option<(WeakLorentz, WeakLorentz, Refinement)>,
    pub mikhlin: Option<(MikhlinReport, MikhlinReport)>,
    pub hormander: Option<(HormanderReport, HormanderReport)>,
    pub decay: Option<(DecayConstants, DecayConstants)>,
}

impl RegularityReport {
    pub fn new(m: &Symbol) -> Self {
        Self {
            symbol: m.tag(),
            dim: m.dim(),
            conventions: m.singular_points(),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stencil_weights_match_known_formulas() {
        let w = central_weights(1, 1);
        assert!((w[0] + 0.5).abs() < 1e-14 && w[1].abs() < 1e-14 && (w[2] - 0.5).abs() < 1e-14);
        let w = central_weights(2, 1);
        assert!((w[0] - 1.0).abs() < 1e-13 && (w[1] + 2.0).abs() < 1e-13);
        let w = central_weights(3, 3);
        let expect = [1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0].map(|v: f64| v / 8.0);
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 4).len(), 35);
        assert_eq!(multi_indices(1, 2), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn distribution_of_constant_and_interval() {
        let c = Symbol::constant(2, C64::new(0.0, 2.0)).unwrap();
        assert_eq!(distribution_function(&c, 2.0, 16).unwrap(), 1.0);
        assert_eq!(distribution_function(&c, 2.1, 16).unwrap(), 0.0);
        let iv = Symbol::interval(0.25, 0.75).unwrap();
        // Endpoints carry the value 1/2, so they drop out at s = 1.
        let d = distribution_function(&iv, 1.0, 64).unwrap();
        assert!((d - (0.5 - 1.0 / 64.0)).abs() < 1e-15);
    }

    #[test]
    fn weak_lorentz_of_one_is_one() {
        let one = Symbol::constant(1, C64::new(1.0, 0.0)).unwrap();
        let w = weak_lorentz_constant(&one, 2.0, 256).unwrap();
        assert_eq!(w.constant, 1.0);
        assert_eq!(w.s_at_max, 1.0);
    }

    #[test]
    fn mikhlin_of_constant() {
        let c = Symbol::constant(2, C64::new(3.0, 4.0)).unwrap();
        let r = mikhlin_constant(&c, 3, 16, DerivativeMethod::Analytic).unwrap();
        assert_eq!(r.constants(), vec![5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fd_matches_analytic_for_laplacian_symbol() {
        let m = Symbol::laplacian(2).unwrap();
        let worst = mikhlin_path_discrepancy(&m, 3, 16).unwrap();
        assert!(worst.iter().all(|&w| w < 1e-7), "{worst:?}");
    }

    fn table_of(values: impl Fn(i64) -> C64, r: usize, name: &str) -> KernelTable {
        let bx = LatticeBox::cube(1, r).unwrap();
        KernelTable::from_values(name, GridFunction::from_fn(bx, |n| values(n[0])).unwrap())
    }

    #[test]
    fn hormander_of_deltas() {
        let bx = LatticeBox::cube(2, 40).unwrap();
        let delta0 = KernelTable::from_values("delta", GridFunction::from_fn(bx.clone(), |n| {
            C64::new(if n == [0, 0] { 1.0 } else { 0.0 }, 0.0)
        }).unwrap());
        assert_eq!(hormander_constant(&delta0, 3.0, 20).unwrap(), 0.0);
        let dk = KernelTable::from_values("delta8", GridFunction::from_fn(bx, |n| {
            C64::new(if n == [8, 0] { 1.0 } else { 0.0 }, 0.0)
        }).unwrap());
        assert_eq!(hormander_sum(&dk, &[1, 0], 20).unwrap(), 2.0);
        assert_eq!(hormander_sum(&dk, &[0, 2], 20).unwrap(), 2.0);
        assert_eq!(hormander_sum(&dk, &[6, 0], 20).unwrap(), 1.0);
        assert!(matches!(hormander_sum(&dk, &[1, 0], 40), Err(Error::BoxTooSmall(_))));
    }

    #[test]
    fn decay_of_riesz_closed_form() {
        let k = table_of(|n| C64::new(0.0, -1.0 / (PI * (2 * n + 1) as f64)), 64, "riesz");
        let c = decay_constants(&k);
        let expect = (-64..=64i64)
            .map(|n| (1.0 + n.abs() as f64) / (PI * (2 * n + 1).abs() as f64))
            .fold(0.0, f64::max);
        assert!((c.c0 - expect).abs() < 1e-14);
    }

    #[test]
    fn l2_norm_of_riesz() {
        let m = Symbol::riesz(2, 1).unwrap();
        let r = operator_norm_l2(&m, 64).unwrap();
        assert!((r.ess_sup - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_norm_is_one() {
        let one = Symbol::constant(1, C64::new(1.0, 0.0)).unwrap();
        let search = NormSearch { trials: 8, ..Default::default() };
        for (p, q) in [(2.0, 2.0), (1.5, 1.5), (3.0, 3.0)] {
            let e = operator_norm_lower_bound(
                &one,
                Exponent::Finite(p),
                Exponent::Finite(q),
                4,
                &search,
                &Quadrature::new(1e-12),
            )
            .unwrap();
            assert!((e.lower_bound - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heuristic_never_exceeds_oracle() {
        let m = Symbol::riesz(1, 1).unwrap();
        let op = TruncatedOperator::new(&m, 3, &Quadrature::new(1e-10)).unwrap();
        let search = NormSearch { trials: 16, seed: 7, ..Default::default() };
        let e1 = Exponent::Finite(1.0);
        let e2 = Exponent::Finite(2.0);
        let inf = Exponent::Infinity;
        for (p, q) in [(e1, e1), (e1, e2), (e2, e2), (e2, inf), (inf, inf), (inf, e2), (e2, e1), (inf, e1)] {
            let oracle = exhaustive_norm_small(&op, p, q).unwrap();
            let h = norm_lower_bound_on(&op, p, q, &search).unwrap();
            assert!(h.lower_bound <= oracle.value * (1.0 + 1e-9), "{p}->{q}: {} > {}", h.lower_bound, oracle.value);
            assert!(h.lower_bound >= 0.8 * oracle.value, "{p}->{q}: {} vs {}", h.lower_bound, oracle.value);
        }
    }
}
