//! Derivative-carrying scalars.
//!
//! Every geometric quantity in the crate is written once, generically over
//! [`Scalar`], and differentiated by evaluating it on [`Dual`] inputs. A
//! `Dual<T>` carries one directional derivative; nesting (`Dual<Dual<f64>>`)
//! yields mixed second derivatives, and so on. Directional derivatives are the
//! natural currency here: `∇_X Y` needs exactly one seeded evaluation of `Y`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arithmetic needed by the geometry pipeline.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    /// Primal value with every infinitesimal part dropped.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }
}

/// First-order forward-mode number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        Self { re: f, eps: df * self.eps }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, eps: self.eps + o.eps }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, eps: self.eps - o.eps }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re, eps: self.re * o.eps + self.eps * o.re }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self { re: q, eps: (self.eps - q * o.eps) / o.re }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { re: -self.re, eps: -self.eps }
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(v: f64) -> Self {
        Self::constant(T::cst(v))
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, T::one() / (s + s))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), T::one() / self.re)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
}

/// Seeds `p + ε·v`.
pub fn seed<S: Scalar>(p: &[S], v: &[S]) -> Vec<Dual<S>> {
    p.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect()
}

/// Seeds `p + ε·∂_axis`.
pub fn seed_axis<S: Scalar>(p: &[S], axis: usize) -> Vec<Dual<S>> {
    p.iter()
        .enumerate()
        .map(|(i, &a)| Dual::new(a, if i == axis { S::one() } else { S::zero() }))
        .collect()
}

pub fn lift<S: Scalar>(p: &[S]) -> Vec<Dual<S>> {
    p.iter().map(|&a| Dual::constant(a)).collect()
}

pub fn primal<S: Scalar>(v: &[Dual<S>]) -> Vec<S> {
    v.iter().map(|d| d.re).collect()
}

pub fn tangent<S: Scalar>(v: &[Dual<S>]) -> Vec<S> {
    v.iter().map(|d| d.eps).collect()
}

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub partials: Vec<f64>,
    pub second_partials: Vec<Vec<f64>>,
}

impl DualScalar {
    /// Evaluates `f` on doubly seeded inputs; one evaluation per (i, j) pair.
    pub fn of<F>(p: &[f64], f: F) -> Self
    where
        F: Fn(&[Dual<Dual<f64>>]) -> Dual<Dual<f64>>,
    {
        let d = p.len();
        let mut partials = vec![0.0; d];
        let mut second = vec![vec![0.0; d]; d];
        let mut value = 0.0;
        for i in 0..d {
            for j in i..d {
                let x: Vec<Dual<Dual<f64>>> = (0..d)
                    .map(|k| {
                        Dual::new(
                            Dual::new(p[k], if k == j { 1.0 } else { 0.0 }),
                            Dual::new(if k == i { 1.0 } else { 0.0 }, 0.0),
                        )
                    })
                    .collect();
                let y = f(&x);
                value = y.re.re;
                if j == i {
                    partials[i] = y.eps.re;
                }
                second[i][j] = y.eps.eps;
                second[j][i] = y.eps.eps;
            }
        }
        Self { value, partials, second_partials: second }
    }

    pub fn max_hessian_asymmetry(&self) -> f64 {
        let d = self.partials.len();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.second_partials[i][j] - self.second_partials[j][i]).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: S, y: S) -> S {
        (x * y).sin() + x.exp() * y.powi(3) - (x * x + S::one()).ln() / y.sqrt()
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        let (x, y) = (0.3, 1.7);
        let d = f(Dual::new(x, 1.0), Dual::constant(y)).eps;
        let h = 1e-6;
        let fd = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8, "{d} vs {fd}");
    }

    #[test]
    fn hessian_is_symmetric_and_matches_differences() {
        let p = [0.3, 1.7];
        let j = DualScalar::of(&p, |v| f(v[0], v[1]));
        assert!(j.max_hessian_asymmetry() < 1e-14);
        let h = 1e-4;
        let fxy = (f(p[0] + h, p[1] + h) - f(p[0] + h, p[1] - h) - f(p[0] - h, p[1] + h)
            + f(p[0] - h, p[1] - h))
            / (4.0 * h * h);
        assert!((j.second_partials[0][1] - fxy).abs() < 1e-6);
        assert_eq!(j.value, f(p[0], p[1]));
    }

    #[test]
    fn third_order_nesting() {
        // d³/dx³ of x⁴ at x = 2 is 24·2 = 48
        let x: Dual<Dual<Dual<f64>>> =
            Dual::new(Dual::new(Dual::new(2.0, 1.0), Dual::new(1.0, 0.0)), Dual::new(Dual::new(1.0, 0.0), Dual::new(0.0, 0.0)));
        let y = x.powi(4);
        assert_eq!(y.eps.eps.eps, 48.0);
        assert_eq!(y.re(), 16.0);
    }
}
