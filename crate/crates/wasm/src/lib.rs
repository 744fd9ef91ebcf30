//! Browser entry points. Each takes plain numbers and strings and returns a
//! JSON document for the page to plot.

use lattice_multipliers::multiplier::{synthesize_kernel_with, Quadrature};
use lattice_multipliers::regularity::{operator_norm_lower_bound, NormSearch};
use lattice_multipliers::wave::solve_wave;
use lattice_multipliers::{parse_symbol, Exponent, GridFunction, LatticeBox};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn exponent(p: f64) -> Result<Exponent, String> {
    // The page sends 0 for infinity.
    if p == 0.0 {
        Ok(Exponent::Infinity)
    } else {
        Exponent::new(p).map_err(|e| e.to_string())
    }
}

/// One-dimensional kernel of a symbol spec on `-radius..=radius`.
pub fn kernel_json(spec: &str, radius: usize, tol: f64) -> Result<String, String> {
    let m = parse_symbol(spec, 1).map_err(|e| e.to_string())?;
    let bx = LatticeBox::cube(1, radius).map_err(|e| e.to_string())?;
    let q = Quadrature::new(tol).accepting_unconverged().with_cap(1 << 16);
    let k = synthesize_kernel_with(&m, &bx, &q).map_err(|e| e.to_string())?;
    let n: Vec<i64> = bx.points().map(|p| p[0]).collect();
    let (re, im): (Vec<f64>, Vec<f64>) = k.values().iter().map(|z| (z.re, z.im)).unzip();
    Ok(json!({
        "symbol": m.tag(), "n": n, "re": re, "im": im,
        "grid": k.grid, "aliasing_estimate": k.aliasing_estimate, "converged": k.converged,
    })
    .to_string())
}

/// `u(t)` for the lattice wave equation with `u(0) = delta_0` (`velocity =
/// false`) or `u_t(0) = delta_0`, on `-window..=window`.
pub fn wave_json(t: f64, window: usize, velocity: bool) -> Result<String, String> {
    let delta = GridFunction::delta(&[0]).map_err(|e| e.to_string())?;
    let zero = GridFunction::zeros(LatticeBox::cube(1, 0).map_err(|e| e.to_string())?);
    let (f, g) = if velocity { (zero, delta) } else { (delta, zero) };
    let w = LatticeBox::cube(1, window).map_err(|e| e.to_string())?;
    let s = solve_wave(&f, &g, t, &w, 1e-10).map_err(|e| e.to_string())?;
    let n: Vec<i64> = w.points().map(|p| p[0]).collect();
    let u: Vec<f64> = s.u.values().iter().map(|z| z.re).collect();
    Ok(json!({ "t": t, "n": n, "u": u }).to_string())
}

/// Seeded lower bound for the `l^p -> l^q` norm of a one-dimensional
/// multiplier truncated to data on `-radius..=radius`.
pub fn norm_json(spec: &str, p: f64, q: f64, radius: usize, trials: usize, seed: u64) -> Result<String, String> {
    let m = parse_symbol(spec, 1).map_err(|e| e.to_string())?;
    let (p, q) = (exponent(p)?, exponent(q)?);
    let search = NormSearch { trials, seed, ..NormSearch::default() };
    let quad = Quadrature::new(1e-8).accepting_unconverged().with_cap(1 << 16);
    let est = operator_norm_lower_bound(&m, p, q, radius, &search, &quad).map_err(|e| e.to_string())?;
    let witness: Vec<f64> = est.witness.values().iter().map(|z| z.norm()).collect();
    Ok(json!({
        "symbol": m.tag(), "lower_bound": est.lower_bound, "method": est.method,
        "witness_id": est.witness_id, "witness_abs": witness, "trial_ratios": est.trial_ratios,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn kernel(spec: &str, radius: usize, tol: f64) -> Result<String, JsError> {
    kernel_json(spec, radius, tol).map_err(js)
}

#[wasm_bindgen]
pub fn wave(t: f64, window: usize, velocity: bool) -> Result<String, JsError> {
    wave_json(t, window, velocity).map_err(js)
}

#[wasm_bindgen]
pub fn norm(spec: &str, p: f64, q: f64, radius: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    norm_json(spec, p, q, radius, trials, seed).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn riesz_kernel_matches_closed_form() {
        let v: serde_json::Value = serde_json::from_str(&kernel_json("riesz:j=1", 8, 1e-8).unwrap()).unwrap();
        assert_eq!(v["converged"], true);
        for (i, n) in (-8..=8i64).enumerate() {
            let want = -1.0 / (PI * (2 * n + 1) as f64);
            let err = (v["im"][i].as_f64().unwrap() - want).abs();
            assert!(err < 2e-8, "n = {n}: {err:.2e}");
        }
    }

    #[test]
    fn wave_at_time_zero_is_the_data() {
        let v: serde_json::Value = serde_json::from_str(&wave_json(0.0, 3, false).unwrap()).unwrap();
        let u: Vec<f64> = v["u"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(u.len(), 7);
        assert!((u[3] - 1.0).abs() < 1e-10 && u.iter().map(|x| x.abs()).sum::<f64>() < 1.0 + 1e-9);
    }

    #[test]
    fn norm_of_identity_is_one() {
        let v: serde_json::Value = serde_json::from_str(&norm_json("const:c=1", 2.0, 2.0, 3, 4, 1).unwrap()).unwrap();
        assert!((v["lower_bound"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn errors_are_reported() {
        assert!(kernel_json("nonsense", 4, 1e-8).is_err());
        assert!(norm_json("riesz:j=1", 0.5, 2.0, 3, 4, 1).is_err());
    }
}
