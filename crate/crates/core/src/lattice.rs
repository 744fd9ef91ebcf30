//! Finitely supported functions on `Z^d` stored over axis-aligned boxes.
//!
//! Enumeration order is row-major with axis 1 slowest (the last axis varies
//! fastest). Every CSV writer and every flattened buffer in the crate uses it.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 3;

/// Exponent of an `l^p` / `L^p` norm: a real `p >= 1` or `p = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(1.0 / (1.0 - 1.0 / p)),
        }
    }

    /// `1/p`, zero for `p = inf`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Infinity => 0.0,
            Exponent::Finite(p) => 1.0 / p,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Infinity => f64::INFINITY,
            Exponent::Finite(p) => p,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinity => write!(f, "inf"),
            Exponent::Finite(p) => write!(f, "{p}"),
        }
    }
}

/// `(sum |x|^p)^(1/p)` or `max |x|`, scaled by the maximum so that large or
/// tiny magnitudes do not overflow.
pub fn norm_of_abs<I>(abs_values: I, p: Exponent) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = abs_values.clone().into_iter().fold(0.0_f64, f64::max);
    match p {
        Exponent::Infinity => max,
        Exponent::Finite(_) if max == 0.0 => 0.0,
        Exponent::Finite(p) if p == 1.0 => abs_values.into_iter().sum(),
        Exponent::Finite(p) if p == 2.0 => {
            let s: f64 = abs_values.into_iter().map(|a| (a / max) * (a / max)).sum();
            max * s.sqrt()
        }
        Exponent::Finite(p) => {
            let s: f64 = abs_values.into_iter().map(|a| (a / max).powf(p)).sum();
            max * s.powf(1.0 / p)
        }
    }
}

/// The box `{n : lo_i <= n_i <= hi_i}` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        check_dim(lo.len())?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter(format!(
                "empty box lo = {lo:?}, hi = {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Centered box `|n_i| <= radii_i`.
    pub fn centered(radii: &[usize]) -> Result<Self> {
        let hi: Vec<i64> = radii.iter().map(|&r| r as i64).collect();
        let lo = hi.iter().map(|r| -r).collect();
        Self::new(lo, hi)
    }

    /// Centered cube of radius `r` in dimension `d`.
    pub fn cube(d: usize, r: usize) -> Result<Self> {
        Self::centered(&vec![r; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim()).map(|a| self.extent(a)).collect()
    }

    /// Number of lattice points, `prod (hi_i - lo_i + 1)`.
    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radii of a centered box; `None` when the box is not centered.
    pub fn radii(&self) -> Option<Vec<usize>> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (l == -h).then_some(h as usize))
            .collect()
    }

    pub fn contains(&self, n: &[i64]) -> bool {
        n.len() == self.dim()
            && n
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Flat index of `n` in enumeration order.
    pub fn index_of(&self, n: &[i64]) -> Option<usize> {
        if !self.contains(n) {
            return None;
        }
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.extent(a) + (n[a] - self.lo[a]) as usize;
        }
        Some(idx)
    }

    /// Lattice point at flat index `idx`, written into `out`.
    pub fn point_into(&self, mut idx: usize, out: &mut [i64]) {
        for a in (0..self.dim()).rev() {
            let e = self.extent(a);
            out[a] = self.lo[a] + (idx % e) as i64;
            idx /= e;
        }
    }

    pub fn point(&self, idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim()];
        self.point_into(idx, &mut out);
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn shifted(&self, offset: &[i64]) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().zip(offset).map(|(l, o)| l + o).collect(),
            hi: self.hi.iter().zip(offset).map(|(h, o)| h + o).collect(),
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &LatticeBox) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    /// `{a + b : a in self, b in other}`.
    pub fn minkowski_sum(&self, other: &LatticeBox) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// Box grown by `k` on every side.
    pub fn grown(&self, k: i64) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().map(|l| l - k).collect(),
            hi: self.hi.iter().map(|h| h + k).collect(),
        }
    }

    pub(crate) fn check_same_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// Complex function on `Z^d`, zero outside its box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    #[serde(rename = "box")]
    bx: LatticeBox,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(bx: LatticeBox, values: Vec<C64>) -> Result<Self> {
        if values.len() != bx.len() {
            return Err(Error::Malformed(format!(
                "{} values for a box of {} points",
                values.len(),
                bx.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Malformed(format!(
                "non-finite value at {:?}",
                bx.point(i)
            )));
        }
        Ok(Self { bx, values })
    }

    pub fn zeros(bx: LatticeBox) -> Self {
        let values = vec![C64::new(0.0, 0.0); bx.len()];
        Self { bx, values }
    }

    /// Unit mass at `at`, stored on the one-point box.
    pub fn delta(at: &[i64]) -> Result<Self> {
        let bx = LatticeBox::new(at.to_vec(), at.to_vec())?;
        Ok(Self {
            bx,
            values: vec![C64::new(1.0, 0.0)],
        })
    }

    pub fn from_fn<F: FnMut(&[i64]) -> C64>(bx: LatticeBox, mut f: F) -> Result<Self> {
        let mut n = vec![0; bx.dim()];
        let values = (0..bx.len())
            .map(|i| {
                bx.point_into(i, &mut n);
                f(&n)
            })
            .collect();
        Self::new(bx, values)
    }

    pub fn dim(&self) -> usize {
        self.bx.dim()
    }

    pub fn bounding_box(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Value at `n`; zero outside the box.
    pub fn get(&self, n: &[i64]) -> C64 {
        self.bx
            .index_of(n)
            .map_or(C64::new(0.0, 0.0), |i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, C64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.bx.point(i), *v))
    }

    pub fn lp_norm(&self, p: Exponent) -> f64 {
        lp_norm(self, p)
    }

    /// Same function re-stored on `bx`: values outside `bx` are dropped,
    /// points of `bx` outside the old box are zero.
    pub fn restrict_to(&self, bx: &LatticeBox) -> Result<GridFunction> {
        bx.check_same_dim(self.dim())?;
        GridFunction::from_fn(bx.clone(), |n| self.get(n))
    }

    pub fn scale(&self, a: C64) -> GridFunction {
        GridFunction {
            bx: self.bx.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn conj(&self) -> GridFunction {
        GridFunction {
            bx: self.bx.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Pointwise product with `w(n)`.
    pub fn modulate<F: Fn(&[i64]) -> C64>(&self, w: F) -> GridFunction {
        let mut n = vec![0; self.dim()];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                self.bx.point_into(i, &mut n);
                v * w(&n)
            })
            .collect();
        GridFunction {
            bx: self.bx.clone(),
            values,
        }
    }

    /// `sum f(n) conj(g(n))`.
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        self.bx.check_same_dim(other.dim())?;
        Ok(self
            .iter()
            .map(|(n, v)| v * other.get(&n).conj())
            .sum())
    }

    /// `max_n |f(n) - g(n)|` over the union of both boxes.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        let d = combine(C64::new(1.0, 0.0), self, C64::new(-1.0, 0.0), other)?;
        Ok(d.lp_norm(Exponent::Infinity))
    }
}

/// `l^p` norm of a grid function.
pub fn lp_norm(f: &GridFunction, p: Exponent) -> f64 {
    norm_of_abs(f.values.iter().map(|v| v.norm()), p)
}

/// `g(k) = f(n + k)`; the box moves by `-n`.
pub fn translate(f: &GridFunction, n: &[i64]) -> Result<GridFunction> {
    f.bx.check_same_dim(n.len())?;
    let neg: Vec<i64> = n.iter().map(|x| -x).collect();
    Ok(GridFunction {
        bx: f.bx.shifted(&neg),
        values: f.values.clone(),
    })
}

/// `a f + b g` on the hull of both boxes.
pub fn combine(a: C64, f: &GridFunction, b: C64, g: &GridFunction) -> Result<GridFunction> {
    f.bx.check_same_dim(g.dim())?;
    let bx = f.bx.hull(&g.bx);
    if bx == f.bx && bx == g.bx {
        let values = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        return Ok(GridFunction { bx, values });
    }
    GridFunction::from_fn(bx, |n| a * f.get(n) + b * g.get(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn p(x: f64) -> Exponent {
        Exponent::new(x).unwrap()
    }

    #[test]
    fn box_enumeration_is_row_major_axis_one_slowest() {
        let bx = LatticeBox::centered(&[1, 2]).unwrap();
        assert_eq!(bx.len(), 15);
        assert_eq!(bx.point(0), vec![-1, -2]);
        assert_eq!(bx.point(1), vec![-1, -1]);
        assert_eq!(bx.point(5), vec![0, -2]);
        for (i, n) in bx.points().enumerate() {
            assert_eq!(bx.index_of(&n), Some(i));
        }
        assert_eq!(bx.index_of(&[2, 0]), None);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert!(Exponent::new(f64::NEG_INFINITY).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
        assert_eq!(p(4.0 / 3.0).conjugate(), Exponent::Finite(4.0));
        assert_eq!(p(1.0).conjugate(), Exponent::Infinity);
    }

    #[test]
    fn delta_has_unit_norm() {
        let f = GridFunction::delta(&[0, 0]).unwrap();
        for q in [1.0, 1.5, 2.0, 7.0] {
            assert_eq!(f.lp_norm(p(q)), 1.0);
        }
        assert_eq!(f.lp_norm(Exponent::Infinity), 1.0);
    }

    #[test]
    fn two_point_indicator_norms() {
        let bx = LatticeBox::new(vec![0], vec![1]).unwrap();
        let f = GridFunction::new(bx, vec![c(1.0), c(1.0)]).unwrap();
        assert!((f.lp_norm(p(2.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.lp_norm(p(1.0)), 2.0);
        assert!(f.lp_norm(p(1.0)) >= f.lp_norm(p(2.0)));
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let f = GridFunction::zeros(LatticeBox::cube(2, 3).unwrap());
        assert_eq!(f.lp_norm(p(3.0)), 0.0);
        assert_eq!(f.lp_norm(Exponent::Infinity), 0.0);
    }

    #[test]
    fn rejects_non_finite_values() {
        let bx = LatticeBox::cube(1, 0).unwrap();
        assert!(GridFunction::new(bx, vec![C64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn translate_delta_moves_to_minus_n() {
        let f = GridFunction::delta(&[0, 0]).unwrap();
        let g = translate(&f, &[2, -1]).unwrap();
        assert_eq!(g.get(&[-2, 1]), c(1.0));
        assert_eq!(g.bounding_box().len(), 1);
        let same = translate(&f, &[0, 0]).unwrap();
        assert_eq!(same, f);
    }

    #[test]
    fn combine_cancels_and_adds() {
        let bx = LatticeBox::cube(1, 2).unwrap();
        let f = GridFunction::from_fn(bx, |n| C64::new(n[0] as f64, 1.0)).unwrap();
        let z = combine(c(1.0), &f, c(-1.0), &f).unwrap();
        assert_eq!(z.lp_norm(Exponent::Infinity), 0.0);

        let d0 = GridFunction::delta(&[0]).unwrap();
        let d1 = GridFunction::delta(&[1]).unwrap();
        let s = combine(c(1.0), &d0, c(1.0), &d1).unwrap();
        assert_eq!(s.lp_norm(p(1.0)), 2.0);
        assert_eq!(s.bounding_box(), &LatticeBox::new(vec![0], vec![1]).unwrap());
    }

    #[test]
    fn combine_rejects_dimension_mismatch() {
        let f = GridFunction::delta(&[0]).unwrap();
        let g = GridFunction::delta(&[0, 0]).unwrap();
        assert!(matches!(
            combine(c(1.0), &f, c(1.0), &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
