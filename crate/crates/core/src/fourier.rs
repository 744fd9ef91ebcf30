//! The transform `F f(xi) = sum_n f(n) e^{+2 pi i n.xi}`, its inverse
//! `F^{-1} u(n) = int u(xi) e^{-2 pi i xi.n} dxi`, convolution and torus norms.
//!
//! Torus integrals are the uniform rectangle rule on `prod N_i` points, which
//! is exact for trigonometric polynomials of per-axis degree `< N_i`.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_dim, norm_of_abs, Exponent, GridFunction, LatticeBox, C64};

/// Smallest even 5-smooth integer `>= n` (and `>= 2`).
pub fn fast_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Maps `x` to its representative in `(-1/2, 1/2]`.
#[inline]
pub fn reduce_to_fundamental(x: f64) -> f64 {
    let r = x - x.floor();
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Uniform sample grid on `T^d`; `xi_k = k/N` mapped into `(-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    sizes: Vec<usize>,
}

impl TorusGrid {
    /// Requested sizes are rounded up to even 5-smooth sizes.
    pub fn new(requested: &[usize]) -> Result<Self> {
        check_dim(requested.len())?;
        Ok(Self {
            sizes: requested.iter().map(|&n| fast_size(n)).collect(),
        })
    }

    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn doubled(&self) -> Self {
        Self {
            sizes: self.sizes.iter().map(|n| 2 * n).collect(),
        }
    }

    /// Frequency index of flat position `idx` (each `k_i` in `0..N_i`).
    pub fn index_into(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
    }

    /// Sample point of flat position `idx`.
    pub fn point_into(&self, idx: usize, out: &mut [f64]) {
        let mut k = [0usize; 3];
        self.index_into(idx, &mut k[..self.dim()]);
        for a in 0..self.dim() {
            out[a] = coordinate(k[a], self.sizes[a]);
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.point_into(idx, &mut out);
        out
    }

    /// Flat position of the lattice residue `n mod N`.
    pub fn residue_index(&self, n: &[i64]) -> usize {
        let mut idx = 0;
        for (a, &x) in n.iter().enumerate() {
            let m = self.sizes[a] as i64;
            idx = idx * self.sizes[a] + x.rem_euclid(m) as usize;
        }
        idx
    }

    fn check_fits(&self, bx: &LatticeBox, window: bool) -> Result<()> {
        bx.check_same_dim(self.dim())?;
        for axis in 0..self.dim() {
            let extent = bx.extent(axis);
            let size = self.sizes[axis];
            if extent > size {
                return Err(if window {
                    Error::WindowTooLarge { axis, extent, size }
                } else {
                    Error::GridTooSmall { axis, extent, size }
                });
            }
        }
        Ok(())
    }
}

#[inline]
fn coordinate(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// Complex values at every point of a [`TorusGrid`], flat in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSamples {
    grid: TorusGrid,
    values: Vec<C64>,
}

impl TorusSamples {
    pub fn new(grid: TorusGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Malformed(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("non-finite torus sample".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `u(xi_k)` of a function on the fundamental domain.
    pub fn sample<F>(grid: &TorusGrid, u: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let values = sample_grid(grid, u);
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Pointwise product; grids must match.
    pub fn mul(&self, other: &TorusSamples) -> Result<TorusSamples> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("torus grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(TorusSamples {
            grid: self.grid.clone(),
            values,
        })
    }
}

pub(crate) fn sample_grid<F>(grid: &TorusGrid, u: F) -> Vec<C64>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let eval = |idx: usize| {
        let mut xi = [0.0; 3];
        grid.point_into(idx, &mut xi[..grid.dim()]);
        u(&xi[..grid.dim()])
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..grid.len()).into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..grid.len()).map(eval).collect()
    }
}

/// Batched multi-dimensional FFT over a row-major buffer.
pub(crate) struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub(crate) fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    /// Unnormalized transform with kernel `e^{-2 pi i jk/N}` (`positive = false`)
    /// or `e^{+2 pi i jk/N}` (`positive = true`).
    pub(crate) fn process(&self, data: &mut [C64], positive: bool) {
        let plans = if positive { &self.inverse } else { &self.forward };
        let d = self.shape.len();
        let total: usize = self.shape.iter().product();
        debug_assert_eq!(data.len(), total);
        for axis in 0..d {
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let plan = &plans[axis];
            if stride == 1 {
                plan.process(data);
                continue;
            }
            // Gather lines of this axis into a contiguous buffer.
            let outer = total / (n * stride);
            let mut buf = vec![C64::new(0.0, 0.0); total];
            for o in 0..outer {
                for s in 0..stride {
                    let line = o * stride + s;
                    let base = o * n * stride + s;
                    for k in 0..n {
                        buf[line * n + k] = data[base + k * stride];
                    }
                }
            }
            plan.process(&mut buf);
            for o in 0..outer {
                for s in 0..stride {
                    let line = o * stride + s;
                    let base = o * n * stride + s;
                    for k in 0..n {
                        data[base + k * stride] = buf[line * n + k];
                    }
                }
            }
        }
    }
}

/// `F f(xi) = sum_n f(n) e^{2 pi i n.xi}` by direct summation.
pub fn transform_at(f: &GridFunction, xi: &[f64]) -> Result<C64> {
    f.bounding_box().check_same_dim(xi.len())?;
    let mut acc = C64::new(0.0, 0.0);
    for (n, v) in f.iter() {
        let s: f64 = n.iter().zip(xi).map(|(&a, &b)| a as f64 * b).sum();
        let phase = s - s.round();
        acc += v * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase);
    }
    Ok(acc)
}

/// Samples of `F f` on `grid` by zero-padded FFT.
pub fn forward_dft(f: &GridFunction, grid: &TorusGrid) -> Result<TorusSamples> {
    grid.check_fits(f.bounding_box(), false)?;
    let mut data = vec![C64::new(0.0, 0.0); grid.len()];
    let bx = f.bounding_box();
    let mut n = vec![0; bx.dim()];
    for (i, v) in f.values().iter().enumerate() {
        bx.point_into(i, &mut n);
        data[grid.residue_index(&n)] = *v;
    }
    NdFft::new(grid.sizes()).process(&mut data, true);
    TorusSamples::new(grid.clone(), data)
}

/// Rectangle-rule `F^{-1} u` on `window`.
pub fn inverse_dft(u: &TorusSamples, window: &LatticeBox) -> Result<GridFunction> {
    let grid = u.grid();
    grid.check_fits(window, true)?;
    let mut data = u.values().to_vec();
    NdFft::new(grid.sizes()).process(&mut data, false);
    let scale = 1.0 / grid.len() as f64;
    GridFunction::from_fn(window.clone(), |n| data[grid.residue_index(n)] * scale)
}

/// `(f * g)(n) = sum_k f(k) g(n - k)` on the Minkowski sum of the boxes.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if f.values().len().saturating_mul(g.values().len()) <= 1 << 14 {
        convolve_direct(f, g)
    } else {
        convolve_fft(f, g)
    }
}

/// Convolution through the transform: `F(f * g) = F(f) F(g)`.
pub fn convolve_fft(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let (bf, bg) = (f.bounding_box(), g.bounding_box());
    bf.check_same_dim(g.dim())?;
    let out = bf.minkowski_sum(bg);
    let sizes: Vec<usize> = (0..f.dim()).map(|a| out.extent(a)).collect();
    let grid = TorusGrid::new(&sizes)?;
    let ff = forward_dft(f, &grid)?;
    let fg = forward_dft(g, &grid)?;
    inverse_dft(&ff.mul(&fg)?, &out)
}

/// Convolution by direct summation over both supports.
pub fn convolve_direct(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let (bf, bg) = (f.bounding_box(), g.bounding_box());
    bf.check_same_dim(g.dim())?;
    let out = bf.minkowski_sum(bg);
    let mut values = vec![C64::new(0.0, 0.0); out.len()];
    let mut s = vec![0; f.dim()];
    for (k, a) in f.iter() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        for (m, b) in g.iter() {
            for i in 0..s.len() {
                s[i] = k[i] + m[i];
            }
            let idx = out.index_of(&s).expect("Minkowski sum contains k + m");
            values[idx] += a * b;
        }
    }
    GridFunction::new(out, values)
}

/// `((1/prod N) sum |u(xi_k)|^p)^{1/p}`, or the maximum for `p = inf`.
pub fn torus_lp_norm(u: &TorusSamples, p: Exponent) -> f64 {
    let raw = norm_of_abs(u.values().iter().map(|v| v.norm()), p);
    match p {
        Exponent::Infinity => raw,
        Exponent::Finite(p) => raw * (u.grid().len() as f64).powf(-1.0 / p),
    }
}

/// A quadrature value at `N` and at `2N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
}

impl Refinement {
    pub fn delta(&self) -> f64 {
        (self.fine - self.coarse).abs()
    }

    pub fn relative_delta(&self) -> f64 {
        let scale = self.fine.abs().max(self.coarse.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.delta() / scale
        }
    }
}

/// Torus `L^p` norm of `u` at grid `N` and `2N`, for integrands where the
/// rectangle rule is not exact.
pub fn torus_lp_norm_refined<F>(u: F, grid: &TorusGrid, p: Exponent) -> Result<Refinement>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let fine_grid = grid.doubled();
    let coarse = torus_lp_norm(&TorusSamples::sample(grid, &u)?, p);
    let fine = torus_lp_norm(&TorusSamples::sample(&fine_grid, &u)?, p);
    Ok(Refinement {
        coarse,
        fine,
        n_coarse: grid.sizes()[0],
        n_fine: fine_grid.sizes()[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_function(rng: &mut ChaCha8Rng, bx: LatticeBox) -> GridFunction {
        GridFunction::from_fn(bx, |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn fast_sizes_are_even_and_smooth() {
        assert_eq!(fast_size(1), 2);
        assert_eq!(fast_size(17), 18);
        assert_eq!(fast_size(31), 32);
        assert_eq!(fast_size(33), 36);
        assert_eq!(fast_size(64), 64);
    }

    #[test]
    fn grid_points_lie_in_half_open_domain_and_are_symmetric() {
        let g = TorusGrid::uniform(1, 8).unwrap();
        let pts: Vec<f64> = (0..8).map(|i| g.point(i)[0]).collect();
        assert_eq!(pts, vec![0.0, 0.125, 0.25, 0.375, 0.5, -0.375, -0.25, -0.125]);
        for &x in &pts {
            assert!(pts.iter().any(|&y| (reduce_to_fundamental(-x) - y).abs() < 1e-15));
        }
    }

    #[test]
    fn delta_transforms_to_ones() {
        let f = GridFunction::delta(&[0, 0]).unwrap();
        let u = forward_dft(&f, &TorusGrid::uniform(2, 6).unwrap()).unwrap();
        assert!(u.values().iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn transform_of_shifted_delta_is_a_character() {
        let f = GridFunction::delta(&[3]).unwrap();
        let v = transform_at(&f, &[0.1]).unwrap();
        let expect = C64::from_polar(1.0, 2.0 * PI * 0.3);
        assert!((v - expect).norm() < 1e-14);
        let sym = GridFunction::new(
            LatticeBox::cube(1, 1).unwrap(),
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        assert!(transform_at(&sym, &[0.25]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn fft_agrees_with_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_function(&mut rng, LatticeBox::cube(1, 8).unwrap());
        let grid = TorusGrid::uniform(1, 64).unwrap();
        let u = forward_dft(&f, &grid).unwrap();
        for (i, v) in u.values().iter().enumerate() {
            let w = transform_at(&f, &grid.point(i)).unwrap();
            assert!((v - w).norm() <= 1e-12 * w.norm().max(1.0));
        }
    }

    #[test]
    fn grid_too_small_names_axis() {
        let f = GridFunction::zeros(LatticeBox::centered(&[1, 5]).unwrap());
        let err = forward_dft(&f, &TorusGrid::uniform(2, 8).unwrap()).unwrap_err();
        assert!(matches!(err, Error::GridTooSmall { axis: 1, .. }));
    }

    #[test]
    fn inverse_of_ones_is_delta_and_character_inverts_to_delta_one() {
        let grid = TorusGrid::uniform(1, 16).unwrap();
        let window = LatticeBox::cube(1, 7).unwrap();
        let ones = TorusSamples::sample(&grid, |_| C64::new(1.0, 0.0)).unwrap();
        let d = inverse_dft(&ones, &window).unwrap();
        assert!(d.max_abs_diff(&GridFunction::delta(&[0]).unwrap()).unwrap() < 1e-15);
        let e = TorusSamples::sample(&grid, |xi| C64::from_polar(1.0, 2.0 * PI * xi[0])).unwrap();
        let d1 = inverse_dft(&e, &window).unwrap();
        assert!(d1.max_abs_diff(&GridFunction::delta(&[1]).unwrap()).unwrap() < 1e-15);
        assert!(matches!(
            inverse_dft(&ones, &LatticeBox::cube(1, 8).unwrap()),
            Err(Error::WindowTooLarge { axis: 0, .. })
        ));
    }

    #[test]
    fn small_convolution_by_hand() {
        let bx = LatticeBox::new(vec![0], vec![1]).unwrap();
        let one = GridFunction::new(bx, vec![C64::new(1.0, 0.0); 2]).unwrap();
        let c = convolve(&one, &one).unwrap();
        assert_eq!(c.bounding_box(), &LatticeBox::new(vec![0], vec![2]).unwrap());
        let re: Vec<f64> = c.values().iter().map(|v| v.re).collect();
        assert_eq!(re, vec![1.0, 2.0, 1.0]);
        let d = GridFunction::delta(&[0]).unwrap();
        assert_eq!(convolve(&d, &one).unwrap(), one);
    }

    #[test]
    fn fft_convolution_matches_direct_exhaustively_for_small_boxes() {
        let units = [
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, -1.0),
        ];
        for r in 0..=4usize {
            let bx = LatticeBox::cube(1, r).unwrap();
            let len = bx.len();
            let g = GridFunction::from_fn(bx.clone(), |n| units[(n[0] + 7).rem_euclid(4) as usize])
                .unwrap();
            for code in 0..4usize.pow(len as u32) {
                let f = GridFunction::from_fn(bx.clone(), |n| {
                    let i = (n[0] + r as i64) as usize;
                    units[(code >> (2 * i)) & 3]
                })
                .unwrap();
                let a = convolve_fft(&f, &g).unwrap();
                let b = convolve_direct(&f, &g).unwrap();
                assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn torus_norms_of_constants_and_characters() {
        let grid = TorusGrid::uniform(2, 16).unwrap();
        let c = TorusSamples::sample(&grid, |_| C64::new(0.0, -3.0)).unwrap();
        let e = TorusSamples::sample(&grid, |xi| C64::from_polar(1.0, 2.0 * PI * xi[0])).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            let p = Exponent::new(p).unwrap();
            assert!((torus_lp_norm(&c, p) - 3.0).abs() < 1e-13);
            assert!((torus_lp_norm(&e, p) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn refinement_records_both_levels() {
        let grid = TorusGrid::uniform(1, 64).unwrap();
        let r = torus_lp_norm_refined(
            |xi| C64::new(if xi[0].abs() < 0.2 { 1.0 } else { 0.0 }, 0.0),
            &grid,
            Exponent::Finite(1.0),
        )
        .unwrap();
        assert_eq!((r.n_coarse, r.n_fine), (64, 128));
        assert!((r.fine - 0.4).abs() < 0.02);
    }
}
