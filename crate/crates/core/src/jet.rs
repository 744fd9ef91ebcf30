//! Truncated multivariate Taylor series ("jets") with complex coefficients.
//!
//! A jet of order `K` in `d <= 3` variables carries every coefficient
//! `c_alpha` with `|alpha| <= K` of the expansion around a base point, so
//! `d^alpha f(x0) = alpha! c_alpha` exactly up to rounding. Symbols are written
//! once against [`Scalar`] and evaluated either on plain numbers or on jets.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use crate::lattice::C64;

pub const MAX_ORDER: usize = 6;

#[derive(Debug)]
pub struct JetBasis {
    dim: usize,
    order: usize,
    exps: Vec<[u8; 3]>,
    /// `(i, j, k)` with `exps[i] + exps[j] = exps[k]`.
    products: Vec<(u16, u16, u16)>,
}

impl JetBasis {
    fn build(dim: usize, order: usize) -> Self {
        let mut exps = Vec::new();
        for total in 0..=order {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    let c = total - a - b;
                    let e = [a as u8, b as u8, c as u8];
                    let used = match dim {
                        1 => b == 0 && c == 0,
                        2 => c == 0,
                        _ => true,
                    };
                    if used {
                        exps.push(e);
                    }
                }
            }
        }
        let mut products = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                let s = [ei[0] + ej[0], ei[1] + ej[1], ei[2] + ej[2]];
                if (s[0] + s[1] + s[2]) as usize <= order {
                    let k = exps.iter().position(|e| *e == s).unwrap();
                    products.push((i as u16, j as u16, k as u16));
                }
            }
        }
        Self {
            dim,
            order,
            exps,
            products,
        }
    }

    pub fn get(dim: usize, order: usize) -> Arc<JetBasis> {
        static BASES: OnceLock<Vec<Arc<JetBasis>>> = OnceLock::new();
        assert!((1..=3).contains(&dim) && order <= MAX_ORDER);
        let all = BASES.get_or_init(|| {
            (1..=3)
                .flat_map(|d| (0..=MAX_ORDER).map(move |k| Arc::new(JetBasis::build(d, k))))
                .collect()
        });
        all[(dim - 1) * (MAX_ORDER + 1) + order].clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Multi-indices in storage order, graded by total degree.
    pub fn multi_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.exps
            .iter()
            .map(move |e| e[..self.dim].iter().map(|&x| x as usize).collect())
    }

    fn index(&self, alpha: &[usize]) -> Option<usize> {
        let mut e = [0u8; 3];
        for (slot, &a) in e.iter_mut().zip(alpha) {
            *slot = a as u8;
        }
        self.exps.iter().position(|x| *x == e)
    }
}

#[derive(Debug, Clone)]
pub struct Jet {
    basis: Arc<JetBasis>,
    coef: Vec<C64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Jet {
    pub fn constant(basis: &Arc<JetBasis>, v: C64) -> Self {
        let mut coef = vec![C64::new(0.0, 0.0); basis.exps.len()];
        coef[0] = v;
        Self {
            basis: basis.clone(),
            coef,
        }
    }

    /// The coordinate function `x_axis` expanded around `value`.
    pub fn variable(basis: &Arc<JetBasis>, value: f64, axis: usize) -> Self {
        let mut j = Self::constant(basis, C64::new(value, 0.0));
        if basis.order > 0 {
            let mut alpha = [0usize; 3];
            alpha[axis] = 1;
            let i = basis.index(&alpha[..basis.dim]).unwrap();
            j.coef[i] = C64::new(1.0, 0.0);
        }
        j
    }

    /// Coordinate jets of the point `x`.
    pub fn point(x: &[f64], order: usize) -> Vec<Jet> {
        let basis = JetBasis::get(x.len(), order);
        x.iter()
            .enumerate()
            .map(|(a, &v)| Jet::variable(&basis, v, a))
            .collect()
    }

    pub fn basis(&self) -> &Arc<JetBasis> {
        &self.basis
    }

    pub fn value(&self) -> C64 {
        self.coef[0]
    }

    /// `d^alpha f` at the base point.
    pub fn derivative(&self, alpha: &[usize]) -> C64 {
        let total: usize = alpha.iter().sum();
        assert!(total <= self.basis.order, "order {total} exceeds jet order");
        let i = self.basis.index(alpha).expect("multi-index in basis");
        let fact: f64 = alpha.iter().map(|&a| factorial(a)).product();
        self.coef[i] * fact
    }

    /// All derivatives of total order `k`, in basis order.
    pub fn derivatives_of_order(&self, k: usize) -> Vec<(Vec<usize>, C64)> {
        self.basis
            .multi_indices()
            .filter(|a| a.iter().sum::<usize>() == k)
            .map(|a| {
                let v = self.derivative(&a);
                (a, v)
            })
            .collect()
    }

    fn scale(mut self, s: C64) -> Self {
        for c in &mut self.coef {
            *c *= s;
        }
        self
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        let mut coef = vec![C64::new(0.0, 0.0); self.coef.len()];
        for &(i, j, k) in &self.basis.products {
            coef[k as usize] += self.coef[i as usize] * other.coef[j as usize];
        }
        Jet {
            basis: self.basis.clone(),
            coef,
        }
    }

    /// `sum_k derivs[k] / k! * (x - x0)^k` for a univariate `g` with
    /// `derivs[k] = g^(k)(x0)`, `x0` the value of `self`.
    fn compose(&self, derivs: &[C64]) -> Jet {
        let order = self.basis.order;
        let mut h = self.clone();
        h.coef[0] = C64::new(0.0, 0.0);
        let mut acc = Jet::constant(&self.basis, derivs[order] / factorial(order));
        for k in (0..order).rev() {
            acc = acc.mul_ref(&h);
            acc.coef[0] += derivs[k] / factorial(k);
        }
        acc
    }
}

/// Arithmetic shared by plain complex numbers and jets.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Constant `v` in the same context as `self`.
    fn lift(&self, v: C64) -> Self;
    fn value(&self) -> C64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powc(&self, c: C64) -> Self;
    fn recip(&self) -> Self;

    fn sqrt(&self) -> Self {
        self.powc(C64::new(0.5, 0.0))
    }

    fn lift_re(&self, v: f64) -> Self {
        self.lift(C64::new(v, 0.0))
    }

    fn scale(&self, s: C64) -> Self {
        self.clone() * self.lift(s)
    }
}

impl Scalar for C64 {
    fn lift(&self, v: C64) -> Self {
        v
    }
    fn value(&self) -> C64 {
        *self
    }
    fn sin(&self) -> Self {
        C64::sin(*self)
    }
    fn cos(&self) -> Self {
        C64::cos(*self)
    }
    fn exp(&self) -> Self {
        C64::exp(*self)
    }
    fn ln(&self) -> Self {
        C64::ln(*self)
    }
    fn powc(&self, c: C64) -> Self {
        if c.im == 0.0 && self.im == 0.0 && self.re > 0.0 {
            C64::new(self.re.powf(c.re), 0.0)
        } else {
            C64::powc(*self, c)
        }
    }
    fn recip(&self) -> Self {
        C64::new(1.0, 0.0) / *self
    }
    fn sqrt(&self) -> Self {
        if self.im == 0.0 && self.re >= 0.0 {
            C64::new(self.re.sqrt(), 0.0)
        } else {
            C64::sqrt(*self)
        }
    }
    fn scale(&self, s: C64) -> Self {
        self * s
    }
}

impl Scalar for Jet {
    fn lift(&self, v: C64) -> Self {
        Jet::constant(&self.basis, v)
    }
    fn value(&self) -> C64 {
        self.coef[0]
    }
    fn sin(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [s, c, -s, -c];
        let d: Vec<C64> = (0..=self.basis.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }
    fn cos(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [c, -s, -c, s];
        let d: Vec<C64> = (0..=self.basis.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }
    fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.basis.order + 1])
    }
    fn ln(&self) -> Self {
        let a = self.value();
        let mut d = vec![a.ln()];
        for k in 1..=self.basis.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * factorial(k - 1) / a.powi(k as i32));
        }
        self.compose(&d)
    }
    fn powc(&self, c: C64) -> Self {
        let a = self.value();
        let base = Scalar::powc(&a, c);
        let mut d = Vec::with_capacity(self.basis.order + 1);
        let mut falling = C64::new(1.0, 0.0);
        for k in 0..=self.basis.order {
            d.push(falling * base / a.powi(k as i32));
            falling *= c - k as f64;
        }
        self.compose(&d)
    }
    fn recip(&self) -> Self {
        let a = self.value();
        let d: Vec<C64> = (0..=self.basis.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(k) / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&d)
    }
    fn scale(&self, s: C64) -> Self {
        self.clone().scale(s)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.coef.iter_mut().zip(&rhs.coef) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.coef.iter_mut().zip(&rhs.coef) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_ref(&Scalar::recip(&rhs))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn basis_sizes_are_binomial() {
        assert_eq!(JetBasis::get(1, 4).exps.len(), 5);
        assert_eq!(JetBasis::get(2, 3).exps.len(), 10);
        assert_eq!(JetBasis::get(3, 4).exps.len(), 35);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x^2 y^3 at (2, -1)
        let v = Jet::point(&[2.0, -1.0], 5);
        let (x, y) = (v[0].clone(), v[1].clone());
        let f = x.clone() * x * y.clone() * y.clone() * y;
        assert!((f.value() - re(-4.0)).norm() < 1e-14);
        assert!((f.derivative(&[1, 0]) - re(-4.0)).norm() < 1e-14);
        assert!((f.derivative(&[0, 1]) - re(12.0)).norm() < 1e-14);
        assert!((f.derivative(&[2, 3]) - re(12.0)).norm() < 1e-13);
        assert!((f.derivative(&[1, 2]) - re(-24.0)).norm() < 1e-13);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::point(&[0.7], 4).remove(0);
        let s = Scalar::sin(&x);
        assert!((s.derivative(&[3]) - re(-(0.7f64).cos())).norm() < 1e-14);
        let l = Scalar::ln(&x);
        assert!((l.derivative(&[2]) - re(-1.0 / 0.49)).norm() < 1e-13);
        let r = Scalar::sqrt(&x);
        let expect = 0.5 * -0.5 * -1.5 * (0.7f64).powf(-2.5);
        assert!((r.derivative(&[3]) - re(expect)).norm() < 1e-12);
        let q = x.clone() / (x.clone() * x.clone());
        assert!((q.derivative(&[1]) - re(-1.0 / 0.49)).norm() < 1e-13);
        let e = Scalar::exp(&(x.lift(C64::new(0.0, 2.0)) * Scalar::ln(&x)));
        // x^{2i}: first derivative 2i x^{2i-1}
        let expect = C64::new(0.0, 2.0) * C64::new(0.7, 0.0).powc(C64::new(-1.0, 2.0));
        assert!((e.derivative(&[1]) - expect).norm() < 1e-13);
    }
}
