//! The lattice wave equation `d_t^2 u = Delta u`, `u(0) = f`, `d_t u(0) = g`.
//!
//! The spectral solution is
//! `u(t) = T_{cos(t phi)} f + T_{sin(t phi)/phi} g` with
//! `phi(xi) = 2 sqrt(sum sin^2(pi xi_j))`; the velocity uses
//! `-phi sin(t phi)` on `f` and `cos(t phi)` on `g`. Two time-stepping
//! schemes serve as independent oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{combine, lp_norm, Exponent, GridFunction, LatticeBox, C64};
use crate::multiplier::{apply_multiplier_with, Quadrature};
use crate::operators::{difference, Variant};
use crate::par::map_range;
use crate::regularity::random_data;
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub u: GridFunction,
    pub v: GridFunction,
}

impl WaveState {
    pub fn new(t: f64, u: GridFunction, v: GridFunction) -> Result<Self> {
        if u.dim() != v.dim() {
            return Err(Error::DimensionMismatch {
                expected: u.dim(),
                found: v.dim(),
            });
        }
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
        }
        Ok(Self { t, u, v })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn restrict_to(&self, bx: &LatticeBox) -> Result<WaveState> {
        Ok(WaveState {
            t: self.t,
            u: self.u.restrict_to(bx)?,
            v: self.v.restrict_to(bx)?,
        })
    }

    /// `max(|u - u'|_inf, |v - v'|_inf)`
    pub fn max_abs_diff(&self, other: &WaveState) -> Result<f64> {
        Ok(self.u.max_abs_diff(&other.u)?.max(self.v.max_abs_diff(&other.v)?))
    }
}

fn check_pair(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    Ok(())
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Spectral solution at time `t` on `window`.
pub fn solve_wave(f: &GridFunction, g: &GridFunction, t: f64, window: &LatticeBox, tol: f64) -> Result<WaveState> {
    solve_wave_with(f, g, t, window, &Quadrature::new(tol))
}

pub fn solve_wave_with(f: &GridFunction, g: &GridFunction, t: f64, window: &LatticeBox, q: &Quadrature) -> Result<WaveState> {
    check_pair(f, g)?;
    let d = f.dim();
    let ap = |m: Symbol, h: &GridFunction| apply_multiplier_with(&m, h, window, q).map(|a| a.output);
    let u = combine(one(), &ap(Symbol::wave_cos(d, t)?, f)?, one(), &ap(Symbol::wave_sinc(d, t)?, g)?)?;
    let v = combine(one(), &ap(Symbol::wave_velocity(d, t)?, f)?, one(), &ap(Symbol::wave_cos(d, t)?, g)?)?;
    WaveState::new(t, u.restrict_to(window)?, v.restrict_to(window)?)
}

/// `|v|_2^2 + sum_j |d_j u|_2^2`, with `u` and `v` taken as zero off their boxes.
pub fn energy(state: &WaveState) -> Result<f64> {
    let sq = |h: &GridFunction| h.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
    let mut e = sq(&state.v);
    for j in 1..=state.dim() {
        e += sq(&difference(&state.u, j, Variant::Forward)?);
    }
    Ok(e)
}

/// Largest stable leapfrog step, `0.9 * 2 / sqrt(4d)`.
pub fn leapfrog_stability_limit(d: usize) -> f64 {
    0.9 * 2.0 / (4.0 * d as f64).sqrt()
}

/// Cells the buffer must extend past the data in every direction for
/// evolution up to time `t`. The lattice group velocity is at most one, and
/// past that front the solution decays faster than exponentially.
pub fn buffer_margin(t: f64) -> usize {
    (1.5 * t.abs()).ceil() as usize + 16
}

/// Values of `h` on the buffer box, zero outside.
struct Field {
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Field {
    fn new(bx: &LatticeBox) -> Self {
        let shape = bx.shape();
        let mut strides = vec![1; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Self { shape, strides }
    }

    fn load(bx: &LatticeBox, h: &GridFunction) -> Vec<C64> {
        let mut n = vec![0i64; bx.dim()];
        (0..bx.len())
            .map(|i| {
                bx.point_into(i, &mut n);
                h.get(&n)
            })
            .collect()
    }

    /// `out = Delta x` with zero boundary values.
    fn laplacian(&self, x: &[C64], out: &mut [C64]) {
        let d = self.shape.len();
        let len = x.len();
        for i in 0..len {
            let mut acc = x[i] * (-2.0 * d as f64);
            for a in 0..d {
                let s = self.strides[a];
                let k = (i / s) % self.shape[a];
                if k > 0 {
                    acc += x[i - s];
                }
                if k + 1 < self.shape[a] {
                    acc += x[i + s];
                }
            }
            out[i] = acc;
        }
    }
}

fn check_buffer(f: &GridFunction, g: &GridFunction, t: f64, buffer: &LatticeBox) -> Result<()> {
    check_pair(f, g)?;
    buffer.check_same_dim(f.dim())?;
    let m = buffer_margin(t) as i64;
    for h in [f, g] {
        if !buffer.contains_box(&h.bounding_box().grown(m)) {
            return Err(Error::InvalidParameter(format!(
                "buffer {buffer:?} must extend {m} cells past the data box {:?}",
                h.bounding_box()
            )));
        }
    }
    Ok(())
}

fn step_count(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and dt > 0, got t = {t}, dt = {dt}")));
    }
    let steps = (t / dt).ceil() as usize;
    Ok((steps, if steps == 0 { 0.0 } else { t / steps as f64 }))
}

/// Central-difference two-step scheme, first step by Taylor expansion.
/// The step is shrunk to `t / ceil(t / dt)` so the final time is hit exactly.
pub fn leapfrog_evolve(f: &GridFunction, g: &GridFunction, t: f64, dt: f64, buffer: &LatticeBox) -> Result<WaveState> {
    check_buffer(f, g, t, buffer)?;
    let d = f.dim();
    if dt > leapfrog_stability_limit(d) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} exceeds the stability limit {} for d = {d}",
            leapfrog_stability_limit(d)
        )));
    }
    let (steps, h) = step_count(t, dt)?;
    let field = Field::new(buffer);
    let u0 = Field::load(buffer, f);
    let v0 = Field::load(buffer, g);
    if steps == 0 {
        return WaveState::new(0.0, GridFunction::new(buffer.clone(), u0)?, GridFunction::new(buffer.clone(), v0)?);
    }
    let len = u0.len();
    let mut lap = vec![C64::new(0.0, 0.0); len];
    field.laplacian(&u0, &mut lap);
    let mut lap_g = vec![C64::new(0.0, 0.0); len];
    field.laplacian(&v0, &mut lap_g);
    let mut prev = u0.clone();
    let mut cur: Vec<C64> = (0..len)
        .map(|i| u0[i] + v0[i] * h + lap[i] * (0.5 * h * h) + lap_g[i] * (h * h * h / 6.0))
        .collect();
    let h2 = h * h;
    for _ in 1..steps {
        field.laplacian(&cur, &mut lap);
        for i in 0..len {
            let next = cur[i] * 2.0 - prev[i] + lap[i] * h2;
            prev[i] = cur[i];
            cur[i] = next;
        }
    }
    // Second-order velocity from one more step.
    field.laplacian(&cur, &mut lap);
    let v: Vec<C64> = (0..len)
        .map(|i| {
            let next = cur[i] * 2.0 - prev[i] + lap[i] * h2;
            (next - prev[i]) / (2.0 * h)
        })
        .collect();
    WaveState::new(t, GridFunction::new(buffer.clone(), cur)?, GridFunction::new(buffer.clone(), v)?)
}

/// Classical fourth-order Runge-Kutta on the first-order system
/// `u' = v`, `v' = Delta u` with zero values off `buffer`.
pub fn rk4_evolve(f: &GridFunction, g: &GridFunction, t: f64, dt: f64, buffer: &LatticeBox) -> Result<WaveState> {
    check_buffer(f, g, t, buffer)?;
    let (steps, h) = step_count(t, dt)?;
    let field = Field::new(buffer);
    let mut u = Field::load(buffer, f);
    let mut v = Field::load(buffer, g);
    let len = u.len();
    let zero = C64::new(0.0, 0.0);
    let mut lap = vec![zero; len];
    let (mut ku, mut kv) = ([vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]], [
        vec![zero; len],
        vec![zero; len],
        vec![zero; len],
        vec![zero; len],
    ]);
    let mut tu = vec![zero; len];
    let mut tv = vec![zero; len];
    for _ in 0..steps {
        for stage in 0..4 {
            let c = match stage {
                0 => 0.0,
                3 => h,
                _ => 0.5 * h,
            };
            if stage == 0 {
                tu.copy_from_slice(&u);
                tv.copy_from_slice(&v);
            } else {
                for i in 0..len {
                    tu[i] = u[i] + ku[stage - 1][i] * c;
                    tv[i] = v[i] + kv[stage - 1][i] * c;
                }
            }
            field.laplacian(&tu, &mut lap);
            ku[stage].copy_from_slice(&tv);
            kv[stage].copy_from_slice(&lap);
        }
        for i in 0..len {
            u[i] += (ku[0][i] + ku[1][i] * 2.0 + ku[2][i] * 2.0 + ku[3][i]) * (h / 6.0);
            v[i] += (kv[0][i] + kv[1][i] * 2.0 + kv[2][i] * 2.0 + kv[3][i]) * (h / 6.0);
        }
    }
    WaveState::new(t, GridFunction::new(buffer.clone(), u)?, GridFunction::new(buffer.clone(), v)?)
}

/// `|u(t)|_q / (|g|_p + sum_j |d_j f|_p)` with `u` measured on `window`.
pub fn strichartz_ratio(
    f: &GridFunction,
    g: &GridFunction,
    t: f64,
    p: f64,
    q: f64,
    window: &LatticeBox,
    tol: f64,
) -> Result<f64> {
    check_exponents(p, q)?;
    let den = strichartz_denominator(f, g, p)?;
    if den == 0.0 {
        return Err(Error::InvalidParameter("Strichartz ratio needs nonzero data".into()));
    }
    let s = solve_wave(f, g, t, window, tol)?;
    Ok(lp_norm(&s.u, Exponent::Finite(q)) / den)
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0 && q >= 2.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 1 < p <= 2 <= q < inf, got p = {p}, q = {q}")));
    }
    Ok(())
}

fn strichartz_denominator(f: &GridFunction, g: &GridFunction, p: f64) -> Result<f64> {
    check_pair(f, g)?;
    let pe = Exponent::Finite(p);
    let mut den = lp_norm(g, pe);
    for j in 1..=f.dim() {
        den += lp_norm(&difference(f, j, Variant::Forward)?, pe);
    }
    Ok(den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzReport {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub t: f64,
    pub trials: usize,
    pub seed: u64,
    pub support_radius: usize,
    pub window_radius: usize,
    /// Cells between the data support and the edge of the window.
    pub rim: usize,
    pub tol: f64,
    /// `delta-f`, `delta-g`, then `trial-0`, `trial-1`, ...
    pub labels: Vec<String>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax: String,
}

/// Seeded study of the Strichartz ratio: the two delta probes `(delta, 0)`
/// and `(0, delta)`, then `trials` pairs of complex Gaussian data on the
/// centered cube of radius `support_radius`.
pub fn strichartz_study(
    d: usize,
    t: f64,
    p: f64,
    q: f64,
    support_radius: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<StrichartzReport> {
    check_exponents(p, q)?;
    let supp = LatticeBox::cube(d, support_radius)?;
    let rim = buffer_margin(t);
    let window = LatticeBox::cube(d, support_radius + rim)?;
    let origin = vec![0i64; d];
    let zero = GridFunction::zeros(LatticeBox::new(origin.clone(), origin.clone())?);
    let delta = GridFunction::delta(&origin)?;
    let mut labels = vec!["delta-f".to_string(), "delta-g".to_string()];
    let mut ratios = vec![
        strichartz_ratio(&delta, &zero, t, p, q, &window, tol)?,
        strichartz_ratio(&zero, &delta, t, p, q, &window, tol)?,
    ];
    let trial_results = map_range(trials, |i| {
        let f = GridFunction::new(supp.clone(), random_data(supp.len(), seed, 2 * i as u64 + 1))?;
        let g = GridFunction::new(supp.clone(), random_data(supp.len(), seed, 2 * i as u64 + 3))?;
        strichartz_ratio(&f, &g, t, p, q, &window, tol)
    });
    for (i, r) in trial_results.into_iter().enumerate() {
        labels.push(format!("trial-{i}"));
        ratios.push(r?);
    }
    let (k, max_ratio) = ratios
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least the probes");
    Ok(StrichartzReport {
        d,
        p,
        q,
        t,
        trials,
        seed,
        support_radius,
        window_radius: support_radius + rim,
        rim,
        tol,
        argmax: labels[k].clone(),
        labels,
        ratios,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(d: usize, r: usize, seed: u64) -> GridFunction {
        let bx = LatticeBox::cube(d, r).unwrap();
        GridFunction::new(bx.clone(), random_data(bx.len(), seed, 1)).unwrap()
    }

    #[test]
    fn time_zero_is_identity() {
        let f = gaussian(2, 3, 1);
        let g = gaussian(2, 3, 2);
        let w = LatticeBox::cube(2, 5).unwrap();
        let s = solve_wave(&f, &g, 0.0, &w, 1e-12).unwrap();
        assert!(s.u.max_abs_diff(&f).unwrap() < 1e-12);
        assert!(s.v.max_abs_diff(&g).unwrap() < 1e-12);
        let b = LatticeBox::cube(2, 30).unwrap();
        let l = leapfrog_evolve(&f, &g, 0.0, 0.1, &b).unwrap();
        assert_eq!(l.u.max_abs_diff(&f).unwrap(), 0.0);
        assert_eq!(l.v.max_abs_diff(&g).unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let z = GridFunction::zeros(LatticeBox::cube(1, 2).unwrap());
        assert_eq!(energy(&WaveState::new(0.0, z.clone(), z.clone()).unwrap()).unwrap(), 0.0);
        let d0 = GridFunction::delta(&[0]).unwrap();
        assert_eq!(energy(&WaveState::new(0.0, d0, z).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn spectral_matches_rk4() {
        let zero = GridFunction::zeros(LatticeBox::cube(1, 0).unwrap());
        let d0 = GridFunction::delta(&[0]).unwrap();
        let w = LatticeBox::cube(1, 32).unwrap();
        let s = solve_wave(&zero, &d0, 1.0, &w, 1e-12).unwrap();
        let r = rk4_evolve(&zero, &d0, 1.0, 1e-3, &LatticeBox::cube(1, 128).unwrap()).unwrap();
        assert!(s.max_abs_diff(&r.restrict_to(&w).unwrap()).unwrap() < 1e-9);
    }

    #[test]
    fn leapfrog_is_second_order() {
        let f = gaussian(1, 4, 3);
        let g = gaussian(1, 4, 4);
        let w = LatticeBox::cube(1, 12).unwrap();
        let b = LatticeBox::cube(1, 64).unwrap();
        let s = solve_wave(&f, &g, 1.0, &w, 1e-12).unwrap();
        let err = |dt: f64| {
            let l = leapfrog_evolve(&f, &g, 1.0, dt, &b).unwrap();
            l.u.restrict_to(&w).unwrap().max_abs_diff(&s.u).unwrap()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn leapfrog_rejects_bad_input() {
        let f = gaussian(1, 4, 3);
        let b = LatticeBox::cube(1, 64).unwrap();
        assert!(leapfrog_evolve(&f, &f, 1.0, 0.95, &b).is_err());
        assert!(leapfrog_evolve(&f, &f, 1.0, 0.1, &LatticeBox::cube(1, 10).unwrap()).is_err());
    }

    #[test]
    fn strichartz_homogeneity() {
        let f = gaussian(1, 4, 5);
        let g = gaussian(1, 4, 6);
        let w = LatticeBox::cube(1, 24).unwrap();
        let a = strichartz_ratio(&f, &g, 1.0, 4.0 / 3.0, 4.0, &w, 1e-12).unwrap();
        let l = C64::new(-2.5, 0.75);
        let b = strichartz_ratio(&f.scale(l), &g.scale(l), 1.0, 4.0 / 3.0, 4.0, &w, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let z = GridFunction::zeros(LatticeBox::cube(1, 1).unwrap());
        assert!(strichartz_ratio(&z, &z, 1.0, 1.5, 3.0, &w, 1e-12).is_err());
        assert!(strichartz_ratio(&f, &g, 1.0, 2.5, 3.0, &w, 1e-12).is_err());
    }
}
