//! Difference operators, the discrete Laplacian, Riesz transforms and
//! imaginary powers of `-Delta`.
//!
//! Axes are 1-based, matching the symbol constructors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, LatticeBox, C64};
use crate::multiplier::{apply_multiplier, apply_multiplier_with, Applied, Quadrature};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `f(n + e_j) - f(n)`
    Forward,
    /// `f(n) - f(n - e_j)`
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferenceStencil {
    pub axis: usize,
    pub variant: Variant,
}

fn check_axis(axis: usize, d: usize) -> Result<()> {
    if axis == 0 || axis > d {
        return Err(Error::AxisOutOfRange { axis, dim: d });
    }
    Ok(())
}

fn unit(d: usize, axis: usize, s: i64) -> Vec<i64> {
    let mut e = vec![0; d];
    e[axis - 1] = s;
    e
}

/// `sum_k c_k f(n + o_k)` on `out`.
fn stencil(f: &GridFunction, out: LatticeBox, taps: &[(Vec<i64>, f64)]) -> Result<GridFunction> {
    let mut shifted = vec![0i64; f.dim()];
    GridFunction::from_fn(out, |n| {
        let mut acc = C64::new(0.0, 0.0);
        for (o, c) in taps {
            for (s, (a, b)) in shifted.iter_mut().zip(n.iter().zip(o)) {
                *s = a + b;
            }
            acc += f.get(&shifted) * *c;
        }
        acc
    })
}

impl DifferenceStencil {
    pub fn new(axis: usize, variant: Variant) -> Self {
        Self { axis, variant }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        difference(f, self.axis, self.variant)
    }
}

/// `d_j f` or `d*_j f`, exact on the box enlarged by one step along `j`.
pub fn difference(f: &GridFunction, axis: usize, variant: Variant) -> Result<GridFunction> {
    let d = f.dim();
    check_axis(axis, d)?;
    let bx = f.bounding_box();
    let (grow, taps) = match variant {
        Variant::Forward => (unit(d, axis, -1), vec![(unit(d, axis, 1), 1.0), (vec![0; d], -1.0)]),
        Variant::Backward => (unit(d, axis, 1), vec![(vec![0; d], 1.0), (unit(d, axis, -1), -1.0)]),
    };
    let out = bx.hull(&bx.shifted(&grow));
    stencil(f, out, &taps)
}

/// `Delta f(n) = sum_j (f(n + e_j) - 2 f(n) + f(n - e_j))`.
pub fn laplacian(f: &GridFunction) -> Result<GridFunction> {
    let d = f.dim();
    let mut taps = vec![(vec![0; d], -2.0 * d as f64)];
    for j in 1..=d {
        taps.push((unit(d, j, 1), 1.0));
        taps.push((unit(d, j, -1), 1.0));
    }
    stencil(f, f.bounding_box().grown(1), &taps)
}

/// `R_j f` on `window`.
pub fn riesz_apply(axis: usize, f: &GridFunction, window: &LatticeBox, tol: f64) -> Result<GridFunction> {
    check_axis(axis, f.dim())?;
    apply_multiplier(&Symbol::riesz(f.dim(), axis)?, f, window, tol)
}

/// `(-Delta)^{it} f` on `window`.
pub fn imaginary_power_apply(t: f64, f: &GridFunction, window: &LatticeBox, tol: f64) -> Result<GridFunction> {
    apply_multiplier(&Symbol::imaginary_power(f.dim(), t)?, f, window, tol)
}

/// `Delta f` computed through the multiplier engine, for cross-validation.
pub fn laplacian_spectral(f: &GridFunction, window: &LatticeBox, q: &Quadrature) -> Result<Applied> {
    apply_multiplier_with(&Symbol::laplacian(f.dim())?, f, window, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::transform_at;
    use crate::lattice::combine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(d: usize, r: usize, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(LatticeBox::cube(d, r).unwrap(), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn forward_difference_of_delta() {
        let f = GridFunction::delta(&[0]).unwrap();
        let g = difference(&f, 1, Variant::Forward).unwrap();
        assert_eq!(g.get(&[0]), C64::new(-1.0, 0.0));
        assert_eq!(g.get(&[-1]), C64::new(1.0, 0.0));
        assert_eq!(g.values().len(), 2);
    }

    #[test]
    fn axis_is_checked() {
        let f = GridFunction::delta(&[0, 0]).unwrap();
        assert!(matches!(difference(&f, 3, Variant::Forward), Err(Error::AxisOutOfRange { .. })));
        assert!(matches!(difference(&f, 0, Variant::Backward), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn differences_commute_and_factor_laplacian() {
        for d in 1..=3 {
            let f = random(d, 3, d as u64);
            let mut sum = GridFunction::zeros(f.bounding_box().clone());
            let mut sum2 = sum.clone();
            for j in 1..=d {
                let a = difference(&difference(&f, j, Variant::Forward).unwrap(), j, Variant::Backward).unwrap();
                let b = difference(&difference(&f, j, Variant::Backward).unwrap(), j, Variant::Forward).unwrap();
                assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
                let one = C64::new(1.0, 0.0);
                sum = combine(one, &sum, one, &a).unwrap();
                sum2 = combine(one, &sum2, one, &b).unwrap();
            }
            let lap = laplacian(&f).unwrap();
            assert!(lap.max_abs_diff(&sum).unwrap() < 1e-14);
            assert!(lap.max_abs_diff(&sum2).unwrap() < 1e-14);
        }
    }

    #[test]
    fn summation_by_parts_and_self_adjointness() {
        let f = random(2, 4, 10);
        let g = random(2, 5, 11);
        for j in 1..=2 {
            let lhs = difference(&f, j, Variant::Forward).unwrap().inner(&g).unwrap();
            let rhs = f.inner(&difference(&g, j, Variant::Backward).unwrap()).unwrap();
            assert!((lhs + rhs).norm() < 1e-12, "{lhs} vs {}", -rhs);
        }
        let a = laplacian(&f).unwrap().inner(&g).unwrap();
        let b = f.inner(&laplacian(&g).unwrap()).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn laplacian_of_delta_and_constant() {
        let l = laplacian(&GridFunction::delta(&[0]).unwrap()).unwrap();
        assert_eq!(l.values(), &[C64::new(1.0, 0.0), C64::new(-2.0, 0.0), C64::new(1.0, 0.0)]);
        let c = GridFunction::from_fn(LatticeBox::cube(2, 3).unwrap(), |_| C64::new(2.0, 0.0)).unwrap();
        let l = laplacian(&c).unwrap();
        for n in LatticeBox::cube(2, 2).unwrap().points() {
            assert_eq!(l.get(&n), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn symbols_of_stencils() {
        let d0 = GridFunction::delta(&[0, 0]).unwrap();
        let lap = laplacian(&d0).unwrap();
        let f = random(2, 3, 5);
        let df = difference(&f, 2, Variant::Forward).unwrap();
        for xi in [[0.1, 0.2], [-0.37, 0.45], [0.5, 0.5]] {
            let s: f64 = xi.iter().map(|x| (PI * x).sin().powi(2)).sum();
            assert!((transform_at(&lap, &xi).unwrap() - C64::new(-4.0 * s, 0.0)).norm() < 1e-12);
            let factor = C64::from_polar(1.0, -2.0 * PI * xi[1]) - 1.0;
            let want = factor * transform_at(&f, &xi).unwrap();
            assert!((transform_at(&df, &xi).unwrap() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn stencil_matches_spectral_laplacian() {
        for d in 1..=2 {
            let f = random(d, 4, 20 + d as u64);
            let window = LatticeBox::cube(d, 6).unwrap();
            let s = laplacian_spectral(&f, &window, &Quadrature::new(1e-12)).unwrap();
            let direct = laplacian(&f).unwrap();
            assert!(s.output.max_abs_diff(&direct).unwrap() < 1e-11);
        }
    }

    #[test]
    fn riesz_one_dimensional_kernel() {
        let w = LatticeBox::cube(1, 64).unwrap();
        let k = riesz_apply(1, &GridFunction::delta(&[0]).unwrap(), &w, 1e-9).unwrap();
        for n in -64..=64i64 {
            let want = C64::new(0.0, -1.0 / (PI * (2 * n + 1) as f64));
            assert!((k.get(&[n]) - want).norm() < 1e-9);
        }
    }

    #[test]
    fn imaginary_power_zero_is_identity() {
        let f = random(2, 3, 3);
        let g = imaginary_power_apply(0.0, &f, &LatticeBox::cube(2, 5).unwrap(), 1e-12).unwrap();
        assert!(g.max_abs_diff(&f).unwrap() < 1e-12);
    }
}
