//! Multipliers `m` on the torus `T^d`.
//!
//! Every symbol is 1-periodic in each coordinate and is evaluated through
//! its representative in the fundamental domain `(-1/2, 1/2]^d`. Formulas
//! are written once, generically over [`Scalar`], so the same code yields
//! values and exact partial derivatives (through [`Jet`]).
//!
//! Singular points carry a documented value convention:
//!
//! | symbol            | point      | value |
//! |-------------------|------------|-------|
//! | `riesz`           | `xi = 0`   | `0`   |
//! | `imagpow`         | `xi = 0`   | `1`   |
//! | `wavesinc`        | `xi = 0`   | `t`   |
//! | `wavecos`         | `xi = 0`   | `1`   |
//! | `wavevel`         | `xi = 0`   | `0`   |
//! | `negpower`        | `xi = 0`   | `0`   |
//! | `interval`        | endpoints  | `1/2` |
//!
//! The `wavecos` and `wavevel` values at the origin are their limits; the
//! point is listed only because the square root in `phi` is not smooth there.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{reduce_to_fundamental, TorusGrid};
use crate::jet::{Jet, Scalar};
use crate::lattice::{check_dim, C64};

const SINGULAR_EPS: f64 = 1e-12;

/// A point where a symbol's formula is singular and the value used there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub point: Vec<f64>,
    pub value: C64,
}

/// Samples of a symbol on a torus grid, evaluated by nearest sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTable {
    pub sizes: Vec<usize>,
    pub values: Vec<C64>,
    /// Points excluded from derivative certificates.
    pub singular: Vec<Vec<f64>>,
}

impl SampledTable {
    /// Nearest sample; on a cell boundary the neighbouring samples are
    /// averaged, as for the interval endpoints.
    fn nearest(&self, xi: &[f64]) -> C64 {
        let mut terms: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (a, &x) in xi.iter().enumerate() {
            let n = self.sizes[a];
            let u = x * n as f64;
            let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
            let lo = u.floor();
            let picks: Vec<(usize, f64)> = if ((u - lo) - 0.5).abs() < 1e-9 {
                vec![(wrap(lo as i64), 0.5), (wrap(lo as i64 + 1), 0.5)]
            } else {
                vec![(wrap(u.round() as i64), 1.0)]
            };
            terms = terms
                .iter()
                .flat_map(|&(i, w)| picks.iter().map(move |&(k, v)| (i * n + k, w * v)))
                .collect();
        }
        terms.iter().map(|&(i, w)| self.values[i] * w).sum()
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.sizes[axis] as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SymbolKind {
    Constant(C64),
    /// `e^{2 pi i k.xi}`
    Exponential(Vec<i64>),
    /// `e^{-i pi xi_j} sin(pi xi_j) / (2 sqrt(sum_k sin^2(pi xi_k)))`, `axis = j` (1-based).
    Riesz { axis: usize },
    /// `-4 sum_j sin^2(pi xi_j)`
    Laplacian,
    /// `(4 sum_j sin^2(pi xi_j))^{it}`
    ImaginaryPower { t: f64 },
    /// `cos(t phi)`, `phi = 2 sqrt(sum_j sin^2(pi xi_j))`
    WaveCos { t: f64 },
    /// `sin(t phi) / phi`
    WaveSinc { t: f64 },
    /// `-phi sin(t phi)`, the time derivative of `cos(t phi)`.
    WaveVelocity { t: f64 },
    /// `|xi|^{-r}` on the fundamental domain.
    NegativePower { r: f64 },
    /// Indicator of `(a, b)` modulo 1 (d = 1).
    Interval { a: f64, b: f64 },
    /// `xi -> inner(a + (b - a) frac(xi))` (d = 1).
    Rescaled { a: f64, b: f64, inner: Box<Symbol> },
    /// Smooth cutoff vanishing on `(c - eps, c + eps)` and equal to 1 off
    /// `(c - 2 eps, c + 2 eps)`, with `xi` read in `[0, 1)` (d = 1).
    Notch { center: f64, eps: f64 },
    Table(SampledTable),
    Sum(Vec<Symbol>),
    Product(Vec<Symbol>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    dim: usize,
    kind: SymbolKind,
}

fn wrong_dim(what: &str, d: usize) -> Error {
    Error::InvalidParameter(format!("{what} is only defined for d = 1 (got d = {d})"))
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

impl Symbol {
    fn make(dim: usize, kind: SymbolKind) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim, kind })
    }

    pub fn constant(d: usize, c: C64) -> Result<Self> {
        Self::make(d, SymbolKind::Constant(c))
    }

    pub fn exponential(k: Vec<i64>) -> Result<Self> {
        Self::make(k.len(), SymbolKind::Exponential(k))
    }

    /// Riesz component `psi_j`, `j` 1-based.
    pub fn riesz(d: usize, j: usize) -> Result<Self> {
        if j == 0 || j > d {
            return Err(Error::AxisOutOfRange { axis: j, dim: d });
        }
        Self::make(d, SymbolKind::Riesz { axis: j })
    }

    pub fn laplacian(d: usize) -> Result<Self> {
        Self::make(d, SymbolKind::Laplacian)
    }

    pub fn imaginary_power(d: usize, t: f64) -> Result<Self> {
        Self::make(d, SymbolKind::ImaginaryPower { t: finite("t", t)? })
    }

    pub fn wave_cos(d: usize, t: f64) -> Result<Self> {
        Self::make(d, SymbolKind::WaveCos { t: finite("t", t)? })
    }

    pub fn wave_sinc(d: usize, t: f64) -> Result<Self> {
        Self::make(d, SymbolKind::WaveSinc { t: finite("t", t)? })
    }

    pub fn wave_velocity(d: usize, t: f64) -> Result<Self> {
        Self::make(d, SymbolKind::WaveVelocity { t: finite("t", t)? })
    }

    pub fn negative_power(d: usize, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("negpower needs r >= 0, got {r}")));
        }
        Self::make(d, SymbolKind::NegativePower { r })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let (a, b) = (finite("a", a)?, finite("b", b)?);
        if !(a < b && b - a <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "interval needs a < b <= a + 1, got ({a}, {b})"
            )));
        }
        Self::make(1, SymbolKind::Interval { a, b })
    }

    /// The symbol `xi -> inner(a + (b - a) xi)` on `(0, 1)`, extended periodically.
    pub fn rescaled(a: f64, b: f64, inner: Symbol) -> Result<Self> {
        let (a, b) = (finite("a", a)?, finite("b", b)?);
        if a >= b {
            return Err(Error::InvalidParameter(format!(
                "rescaling needs a < b, got ({a}, {b})"
            )));
        }
        if inner.dim != 1 {
            return Err(wrong_dim("rescale", inner.dim));
        }
        Self::make(
            1,
            SymbolKind::Rescaled {
                a,
                b,
                inner: Box::new(inner),
            },
        )
    }

    pub fn notch(center: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("notch needs eps > 0, got {eps}")));
        }
        Self::make(
            1,
            SymbolKind::Notch {
                center: finite("center", center)?,
                eps,
            },
        )
    }

    pub fn table(grid: &TorusGrid, values: Vec<C64>, singular: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Malformed(format!(
                "{} table values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("non-finite table value".into()));
        }
        Self::make(
            grid.dim(),
            SymbolKind::Table(SampledTable {
                sizes: grid.sizes().to_vec(),
                values,
                singular,
            }),
        )
    }

    pub fn sum(parts: Vec<Symbol>) -> Result<Self> {
        let d = Self::common_dim(&parts)?;
        Self::make(d, SymbolKind::Sum(parts))
    }

    pub fn product(parts: Vec<Symbol>) -> Result<Self> {
        let d = Self::common_dim(&parts)?;
        Self::make(d, SymbolKind::Product(parts))
    }

    /// `c * m`
    pub fn scaled(c: C64, m: Symbol) -> Result<Self> {
        Self::product(vec![Symbol::constant(m.dim, c)?, m])
    }

    fn common_dim(parts: &[Symbol]) -> Result<usize> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty composite symbol".into()))?;
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    expected: first.dim,
                    found: p.dim,
                });
            }
        }
        Ok(first.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    /// Canonical spec string, used as the report tag.
    pub fn tag(&self) -> String {
        self.to_string()
    }

    /// `m(-xi) = conj(m(xi))`, so the kernel is real.
    pub fn is_hermitian(&self) -> bool {
        match &self.kind {
            SymbolKind::Constant(c) => c.im == 0.0,
            SymbolKind::Exponential(_)
            | SymbolKind::Laplacian
            | SymbolKind::WaveCos { .. }
            | SymbolKind::WaveSinc { .. }
            | SymbolKind::WaveVelocity { .. }
            | SymbolKind::NegativePower { .. } => true,
            SymbolKind::ImaginaryPower { t } => *t == 0.0,
            SymbolKind::Riesz { .. } => false,
            SymbolKind::Interval { a, b } => {
                let mid = reduce_to_fundamental(0.5 * (a + b));
                mid.abs() < SINGULAR_EPS || (mid - 0.5).abs() < SINGULAR_EPS
            }
            SymbolKind::Notch { center, .. } => {
                let c = reduce_to_fundamental(*center);
                c.abs() < SINGULAR_EPS || (c - 0.5).abs() < SINGULAR_EPS
            }
            SymbolKind::Rescaled { .. } => false,
            SymbolKind::Table(t) => {
                let grid = TorusGrid::new(&t.sizes).expect("table grid");
                (0..grid.len()).all(|i| {
                    let xi = grid.point(i);
                    let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
                    (t.nearest(&neg) - t.values[i].conj()).norm() <= 1e-14 * t.values[i].norm().max(1.0)
                })
            }
            SymbolKind::Sum(p) | SymbolKind::Product(p) => p.iter().all(Symbol::is_hermitian),
        }
    }

    /// Singular points of the formula in the fundamental domain, with the
    /// value used there.
    pub fn singular_points(&self) -> Vec<SingularPoint> {
        let origin = vec![0.0; self.dim];
        let at_origin = |v: C64| {
            vec![SingularPoint {
                point: origin.clone(),
                value: v,
            }]
        };
        match &self.kind {
            SymbolKind::Constant(_) | SymbolKind::Exponential(_) | SymbolKind::Laplacian => vec![],
            SymbolKind::Riesz { .. } => at_origin(C64::new(0.0, 0.0)),
            SymbolKind::ImaginaryPower { .. } => at_origin(C64::new(1.0, 0.0)),
            SymbolKind::WaveCos { .. } => at_origin(C64::new(1.0, 0.0)),
            SymbolKind::WaveSinc { t } => at_origin(C64::new(*t, 0.0)),
            SymbolKind::WaveVelocity { .. } => at_origin(C64::new(0.0, 0.0)),
            SymbolKind::NegativePower { r } if *r > 0.0 => at_origin(C64::new(0.0, 0.0)),
            SymbolKind::NegativePower { .. } => vec![],
            SymbolKind::Interval { a, b } => [a, b]
                .iter()
                .map(|&&x| SingularPoint {
                    point: vec![reduce_to_fundamental(x)],
                    value: C64::new(0.5, 0.0),
                })
                .collect(),
            SymbolKind::Notch { .. } => vec![],
            SymbolKind::Rescaled { a, b, inner } => {
                let mut pts = vec![SingularPoint {
                    point: vec![0.0],
                    value: self.eval(&[0.0]),
                }];
                let w = b - a;
                for sp in inner.singular_points() {
                    let p = sp.point[0];
                    let k0 = (a - p).ceil() as i64 - 1;
                    for k in k0..=k0 + w.ceil() as i64 + 1 {
                        let u = (p - a + k as f64) / w;
                        if (0.0..1.0).contains(&u) {
                            let x = reduce_to_fundamental(u);
                            pts.push(SingularPoint {
                                point: vec![x],
                                value: sp.value,
                            });
                        }
                    }
                }
                pts
            }
            SymbolKind::Table(t) => t
                .singular
                .iter()
                .map(|p| SingularPoint {
                    point: p.clone(),
                    value: t.nearest(p),
                })
                .collect(),
            SymbolKind::Sum(parts) | SymbolKind::Product(parts) => {
                let mut pts: Vec<SingularPoint> = Vec::new();
                for p in parts {
                    for sp in p.singular_points() {
                        if !pts.iter().any(|q| same_point(&q.point, &sp.point)) {
                            let value = self.eval(&sp.point);
                            pts.push(SingularPoint {
                                point: sp.point,
                                value,
                            });
                        }
                    }
                }
                pts
            }
        }
    }

    /// Whether `xi` (any representative) is one of the singular points.
    pub fn is_singular_at(&self, xi: &[f64]) -> bool {
        let r: Vec<f64> = xi.iter().map(|&x| reduce_to_fundamental(x)).collect();
        self.singular_points()
            .iter()
            .any(|sp| same_point(&sp.point, &r))
    }

    /// `m(xi)`.
    pub fn eval(&self, xi: &[f64]) -> C64 {
        debug_assert_eq!(xi.len(), self.dim);
        let mut r = [0.0; 3];
        for (slot, &x) in r.iter_mut().zip(xi) {
            *slot = reduce_to_fundamental(x);
        }
        let r = &r[..self.dim];
        if let Some(v) = self.convention_at(r) {
            return v;
        }
        match &self.kind {
            SymbolKind::Table(t) => t.nearest(r),
            SymbolKind::Sum(parts) => parts.iter().map(|p| p.eval(r)).sum(),
            SymbolKind::Product(parts) => parts.iter().map(|p| p.eval(r)).product(),
            SymbolKind::Rescaled { a, b, inner } => {
                let u = r[0] - r[0].floor();
                inner.eval(&[a + (b - a) * u])
            }
            _ => {
                let xs: Vec<C64> = r.iter().map(|&x| C64::new(x, 0.0)).collect();
                self.formula(&xs)
            }
        }
    }

    /// Value convention at a singular point of a leaf symbol, `r` reduced.
    fn convention_at(&self, r: &[f64]) -> Option<C64> {
        let at_origin = r.iter().all(|x| x.abs() < SINGULAR_EPS);
        match &self.kind {
            SymbolKind::Riesz { .. } | SymbolKind::WaveVelocity { .. } if at_origin => {
                Some(C64::new(0.0, 0.0))
            }
            SymbolKind::NegativePower { r: p } if at_origin && *p > 0.0 => Some(C64::new(0.0, 0.0)),
            SymbolKind::ImaginaryPower { .. } | SymbolKind::WaveCos { .. } if at_origin => {
                Some(C64::new(1.0, 0.0))
            }
            SymbolKind::WaveSinc { t } if at_origin => Some(C64::new(*t, 0.0)),
            SymbolKind::Interval { a, b } => {
                let u = r[0] - a;
                let u = u - u.floor();
                let w = b - a;
                let near = |x: f64, y: f64| (x - y).abs() < SINGULAR_EPS;
                if near(u, 0.0) || near(u, 1.0) || near(u, w) {
                    Some(C64::new(0.5, 0.0))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Jet of `m` of total order `order` at `xi`; `None` when the symbol has
    /// no analytic derivatives (tables) or `xi` is a singular point.
    pub fn jet(&self, xi: &[f64], order: usize) -> Option<Jet> {
        if self.is_singular_at(xi) {
            return None;
        }
        let vars = Jet::point(xi, order);
        self.eval_generic(&vars)
    }

    /// Generic evaluation on coordinates whose values need not be reduced.
    fn eval_generic<S: Scalar>(&self, xi: &[S]) -> Option<S> {
        let reduced: Vec<S> = xi
            .iter()
            .map(|x| {
                let v = x.value().re;
                let shift = v - reduce_to_fundamental(v);
                x.clone() - x.lift_re(shift)
            })
            .collect();
        match &self.kind {
            SymbolKind::Table(_) => None,
            SymbolKind::Sum(parts) => {
                let mut it = parts.iter();
                let mut acc = it.next()?.eval_generic(&reduced)?;
                for p in it {
                    acc = acc + p.eval_generic(&reduced)?;
                }
                Some(acc)
            }
            SymbolKind::Product(parts) => {
                let mut it = parts.iter();
                let mut acc = it.next()?.eval_generic(&reduced)?;
                for p in it {
                    acc = acc * p.eval_generic(&reduced)?;
                }
                Some(acc)
            }
            SymbolKind::Rescaled { a, b, inner } => {
                let x = &reduced[0];
                let v = x.value().re;
                let u = x.clone() - x.lift_re(v.floor());
                let arg = u.scale(C64::new(b - a, 0.0)) + x.lift_re(*a);
                inner.eval_generic(&[arg])
            }
            _ => Some(self.formula(&reduced)),
        }
    }

    /// Closed-form leaf formulas on reduced coordinates.
    fn formula<S: Scalar>(&self, xi: &[S]) -> S {
        let one = xi[0].lift_re(1.0);
        let sin2_sum = || {
            let mut acc = xi[0].lift_re(0.0);
            for x in xi {
                let s = x.scale(C64::new(PI, 0.0)).sin();
                acc = acc + s.clone() * s;
            }
            acc
        };
        let phi = || sin2_sum().sqrt().scale(C64::new(2.0, 0.0));
        match &self.kind {
            SymbolKind::Constant(c) => one.lift(*c),
            SymbolKind::Exponential(k) => {
                let mut arg = xi[0].lift_re(0.0);
                for (x, &kk) in xi.iter().zip(k) {
                    arg = arg + x.scale(C64::new(kk as f64, 0.0));
                }
                arg.scale(C64::new(0.0, 2.0 * PI)).exp()
            }
            SymbolKind::Riesz { axis } => {
                let x = &xi[axis - 1];
                let phase = x.scale(C64::new(0.0, -PI)).exp();
                let s = x.scale(C64::new(PI, 0.0)).sin();
                let den = sin2_sum().sqrt().scale(C64::new(2.0, 0.0));
                phase * s / den
            }
            SymbolKind::Laplacian => sin2_sum().scale(C64::new(-4.0, 0.0)),
            SymbolKind::ImaginaryPower { t } => {
                let base = sin2_sum().scale(C64::new(4.0, 0.0));
                (base.ln().scale(C64::new(0.0, *t))).exp()
            }
            SymbolKind::WaveCos { t } => phi().scale(C64::new(*t, 0.0)).cos(),
            SymbolKind::WaveSinc { t } => {
                let p = phi();
                p.scale(C64::new(*t, 0.0)).sin() / p
            }
            SymbolKind::WaveVelocity { t } => {
                let p = phi();
                -(p.clone() * p.scale(C64::new(*t, 0.0)).sin())
            }
            SymbolKind::NegativePower { r } => {
                let mut acc = xi[0].lift_re(0.0);
                for x in xi {
                    acc = acc + x.clone() * x.clone();
                }
                acc.powc(C64::new(-0.5 * r, 0.0))
            }
            SymbolKind::Interval { a, b } => {
                let u = xi[0].value().re - a;
                let u = u - u.floor();
                one.lift_re(if u < b - a { 1.0 } else { 0.0 })
            }
            SymbolKind::Notch { center, eps } => {
                let x = &xi[0];
                let v = x.value().re;
                let shift = v - (v - v.floor());
                let u = x.clone() - x.lift_re(shift + center);
                let dist = if u.value().re < 0.0 { -u } else { u };
                smooth_step(&(dist - one.lift_re(*eps)).scale(C64::new(1.0 / eps, 0.0)))
            }
            SymbolKind::Table(_)
            | SymbolKind::Sum(_)
            | SymbolKind::Product(_)
            | SymbolKind::Rescaled { .. } => unreachable!("composite handled by caller"),
        }
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let d = reduce_to_fundamental(x - y);
            d.abs() < SINGULAR_EPS
        })
}

/// `b(u) / (b(u) + b(1 - u))` with `b(u) = exp(-1/u)` for `u > 0`: a
/// `C^infinity` step from 0 (`u <= 0`) to 1 (`u >= 1`).
pub fn smooth_step<S: Scalar>(u: &S) -> S {
    let v = u.value().re;
    if v <= 0.0 {
        return u.lift_re(0.0);
    }
    if v >= 1.0 {
        return u.lift_re(1.0);
    }
    let bump = |x: S| (-(x.recip())).exp();
    let left = bump(u.clone());
    let right = bump(u.lift_re(1.0) - u.clone());
    left.clone() / (left + right)
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, name: &str, parts: &[Symbol]| {
            write!(f, "{name}(")?;
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, ";")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ")")
        };
        match &self.kind {
            SymbolKind::Constant(c) if c.im == 0.0 => write!(f, "const:c={}", c.re),
            SymbolKind::Constant(c) => write!(f, "const:c={},im={}", c.re, c.im),
            SymbolKind::Exponential(k) => {
                let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
                write!(f, "exp:k={}", ks.join("/"))
            }
            SymbolKind::Riesz { axis } => write!(f, "riesz:j={axis}"),
            SymbolKind::Laplacian => write!(f, "laplacian"),
            SymbolKind::ImaginaryPower { t } => write!(f, "imagpow:t={t}"),
            SymbolKind::WaveCos { t } => write!(f, "wavecos:t={t}"),
            SymbolKind::WaveSinc { t } => write!(f, "wavesinc:t={t}"),
            SymbolKind::WaveVelocity { t } => write!(f, "wavevel:t={t}"),
            SymbolKind::NegativePower { r } => write!(f, "negpower:r={r}"),
            SymbolKind::Interval { a, b } => write!(f, "interval:a={a},b={b}"),
            SymbolKind::Rescaled { a, b, inner } => write!(f, "rescale:a={a},b={b}({inner})"),
            SymbolKind::Notch { center, eps } => write!(f, "notch:c={center},eps={eps}"),
            SymbolKind::Table(t) => write!(f, "table:n={}", t.sizes.len()),
            SymbolKind::Sum(p) => join(f, "sum", p),
            SymbolKind::Product(p) => join(f, "product", p),
        }
    }
}

/// Parses the symbol mini-language, e.g. `riesz:j=1`, `interval:a=0.2,b=0.7`,
/// `sum(imagpow:t=1.5;const:c=-1)`, `rescale:a=0,b=2(exp:k=1)`.
pub fn parse_symbol(spec: &str, d: usize) -> Result<Symbol> {
    let mut p = Parser { s: spec, pos: 0, d };
    let sym = p.expr()?;
    p.skip_ws();
    if p.pos != spec.len() {
        return Err(p.err("trailing input"));
    }
    Ok(sym)
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
    d: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::SymbolSyntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn take_while<F: Fn(char) -> bool>(&mut self, f: F) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.s[start..self.pos]
    }

    fn expr(&mut self) -> Result<Symbol> {
        self.skip_ws();
        let name_pos = self.pos;
        let name = self
            .take_while(|c| c.is_ascii_alphanumeric() || c == '_')
            .to_string();
        if name.is_empty() {
            return Err(self.err("expected a symbol name"));
        }
        let mut params: Vec<(String, String)> = Vec::new();
        if self.eat(':') {
            loop {
                self.skip_ws();
                let key = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_').to_string();
                if key.is_empty() || !self.eat('=') {
                    return Err(self.err("expected key=value"));
                }
                self.skip_ws();
                let value = self
                    .take_while(|c| !matches!(c, ',' | ';' | '(' | ')') && !c.is_whitespace())
                    .to_string();
                if value.is_empty() {
                    return Err(self.err("empty parameter value"));
                }
                params.push((key, value));
                if !self.eat(',') {
                    break;
                }
            }
        }
        let mut children = Vec::new();
        if self.eat('(') {
            loop {
                children.push(self.expr()?);
                if self.eat(';') {
                    continue;
                }
                if self.eat(')') {
                    break;
                }
                return Err(self.err("expected ';' or ')'"));
            }
        }
        self.build(&name, name_pos, params, children)
    }

    fn build(
        &self,
        name: &str,
        pos: usize,
        params: Vec<(String, String)>,
        children: Vec<Symbol>,
    ) -> Result<Symbol> {
        let err = |msg: String| Error::SymbolSyntax { pos, msg };
        let allowed: &[&str] = match name {
            "const" => &["c", "im"],
            "exp" => &["k"],
            "riesz" => &["j"],
            "laplacian" | "sum" | "product" => &[],
            "imagpow" | "wavecos" | "wavesinc" | "wavevel" => &["t"],
            "negpower" => &["r"],
            "interval" | "rescale" => &["a", "b"],
            "notch" => &["c", "eps"],
            _ => return Err(err(format!("unknown symbol '{name}'"))),
        };
        for (k, _) in &params {
            if !allowed.contains(&k.as_str()) {
                return Err(err(format!("unknown parameter '{k}' for '{name}'")));
            }
        }
        let get = |key: &str| -> Result<f64> {
            let v = params
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| err(format!("'{name}' needs parameter '{key}'")))?;
            v.1.parse::<f64>()
                .map_err(|_| err(format!("bad number '{}' for '{key}'", v.1)))
        };
        let get_or = |key: &str, default: f64| -> Result<f64> {
            if params.iter().any(|(k, _)| k == key) {
                get(key)
            } else {
                Ok(default)
            }
        };
        let want_children = matches!(name, "sum" | "product" | "rescale");
        if want_children && children.is_empty() {
            return Err(err(format!("'{name}' needs arguments in parentheses")));
        }
        if !want_children && !children.is_empty() {
            return Err(err(format!("'{name}' takes no arguments")));
        }
        let d = self.d;
        match name {
            "const" => Symbol::constant(d, C64::new(get("c")?, get_or("im", 0.0)?)),
            "exp" => {
                let raw = &params
                    .iter()
                    .find(|(k, _)| k == "k")
                    .ok_or_else(|| err("'exp' needs parameter 'k'".into()))?
                    .1;
                let k: std::result::Result<Vec<i64>, _> =
                    raw.split('/').map(|x| x.parse::<i64>()).collect();
                let k = k.map_err(|_| err(format!("bad lattice vector '{raw}'")))?;
                let k = if k.len() == 1 && d > 1 {
                    let mut v = vec![0; d];
                    v[0] = k[0];
                    v
                } else {
                    k
                };
                if k.len() != d {
                    return Err(err(format!("'exp' vector has {} entries, d = {d}", k.len())));
                }
                Symbol::exponential(k)
            }
            "riesz" => {
                let j = get("j")?;
                if j.fract() != 0.0 || j < 1.0 {
                    return Err(err(format!("riesz axis must be a positive integer, got {j}")));
                }
                Symbol::riesz(d, j as usize)
            }
            "laplacian" => Symbol::laplacian(d),
            "imagpow" => Symbol::imaginary_power(d, get("t")?),
            "wavecos" => Symbol::wave_cos(d, get("t")?),
            "wavesinc" => Symbol::wave_sinc(d, get("t")?),
            "wavevel" => Symbol::wave_velocity(d, get("t")?),
            "negpower" => Symbol::negative_power(d, get("r")?),
            "interval" => {
                if d != 1 {
                    return Err(wrong_dim("interval", d));
                }
                Symbol::interval(get("a")?, get("b")?)
            }
            "notch" => {
                if d != 1 {
                    return Err(wrong_dim("notch", d));
                }
                Symbol::notch(get("c")?, get("eps")?)
            }
            "rescale" => {
                if children.len() != 1 {
                    return Err(err("'rescale' takes exactly one inner symbol".into()));
                }
                Symbol::rescaled(get("a")?, get("b")?, children.into_iter().next().unwrap())
            }
            "sum" => Symbol::sum(children),
            "product" => Symbol::product(children),
            _ => unreachable!(),
        }
    }
}
