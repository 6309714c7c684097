//! Truncated power series in the perturbation strength ε.
//!
//! Coefficients follow the normalized Taylor convention: slot i holds
//! ∂ε^i(·)|_{ε=0} / i!, so products are plain Cauchy convolutions and the
//! factorially growing raw derivatives never appear as stored numbers.

use crate::error::{Error, Result};
use crate::grid::{GridFn1D, GridFn2D, TripleY};

/// Payload that can live in a series coefficient slot.
pub trait SeriesPayload: Clone {
    fn zeros_like(&self) -> Self;
    fn scale(&mut self, a: f64);
    /// self += a * other
    fn axpy(&mut self, a: f64, other: &Self);
    /// Default magnitude used by generic diagnostics.
    fn magnitude(&self) -> f64;
}

/// Payloads with a pointwise product (needed by convolution and the
/// trigonometric composition).
pub trait PointwisePayload: SeriesPayload {
    fn mul(&self, other: &Self) -> Self;
    fn cos(&self) -> Self;
    fn sin(&self) -> Self;
}

impl SeriesPayload for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl PointwisePayload for f64 {
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
}

impl SeriesPayload for GridFn2D {
    fn zeros_like(&self) -> Self {
        GridFn2D::zeros(self.grid().clone())
    }
    fn scale(&mut self, a: f64) {
        GridFn2D::scale(self, a);
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        GridFn2D::axpy(self, a, other);
    }
    fn magnitude(&self) -> f64 {
        let sq: f64 = self.values().iter().map(|v| v * v).sum();
        (sq / self.values().len() as f64).sqrt()
    }
}

impl PointwisePayload for GridFn2D {
    fn mul(&self, other: &Self) -> Self {
        self.mul_pointwise(other)
    }
    fn cos(&self) -> Self {
        self.map(f64::cos)
    }
    fn sin(&self) -> Self {
        self.map(f64::sin)
    }
}

impl SeriesPayload for GridFn1D {
    fn zeros_like(&self) -> Self {
        GridFn1D::zeros(self.grid().clone())
    }
    fn scale(&mut self, a: f64) {
        GridFn1D::scale(self, a);
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        GridFn1D::axpy(self, a, other);
    }
    fn magnitude(&self) -> f64 {
        let sq: f64 = self.values().iter().map(|v| v * v).sum();
        (sq / self.values().len() as f64).sqrt()
    }
}

impl SeriesPayload for TripleY {
    fn zeros_like(&self) -> Self {
        TripleY::zeros(self.theta.grid().clone())
    }
    fn scale(&mut self, a: f64) {
        TripleY::scale(self, a);
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        TripleY::axpy(self, a, other);
    }
    fn magnitude(&self) -> f64 {
        self.theta.magnitude() + self.psi.magnitude() + self.lambda.magnitude()
    }
}

/// Truncated series Σ c_i ε^i with coefficients c_0 .. c_M.
#[derive(Debug, Clone)]
pub struct EpsSeries<T: SeriesPayload> {
    coeffs: Vec<T>,
}

impl<T: SeriesPayload> EpsSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn zeros(template: &T, order: usize) -> Self {
        Self {
            coeffs: (0..=order).map(|_| template.zeros_like()).collect(),
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn coeff(&self, i: usize) -> &T {
        &self.coeffs[i]
    }

    #[inline]
    pub fn coeff_mut(&mut self, i: usize) -> &mut T {
        &mut self.coeffs[i]
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn push(&mut self, c: T) {
        self.coeffs.push(c);
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self {
            coeffs: self.coeffs[..=order.min(self.order())].to_vec(),
        }
    }

    /// Horner evaluation Σ c_i ε^i.
    pub fn evaluate(&self, eps: f64) -> T {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc.scale(eps);
            acc.axpy(1.0, c);
        }
        acc
    }

    /// Series of the derivative d/dε: coefficient k is (k+1)·c_{k+1}.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![self.coeffs[0].zeros_like()]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .skip(1)
            .enumerate()
            .map(|(k, c)| {
                let mut d = c.clone();
                d.scale((k + 1) as f64);
                d
            })
            .collect();
        Self { coeffs }
    }

    /// Last-term-to-sum ratio ‖c_M‖ ε^M / max(‖Σ c_i ε^i‖, floor), with a
    /// caller-chosen magnitude functional. Flags ε outside the empirical
    /// convergence region.
    pub fn tail_ratio_with(&self, eps: f64, norm: impl Fn(&T) -> f64) -> f64 {
        const FLOOR: f64 = 1e-30;
        let m = self.order();
        let tail = norm(&self.coeffs[m]) * eps.abs().powi(m as i32);
        let total = norm(&self.evaluate(eps));
        tail / total.max(FLOOR)
    }

    pub fn tail_ratio(&self, eps: f64) -> f64 {
        self.tail_ratio_with(eps, |c| c.magnitude())
    }
}

impl<T: PointwisePayload> EpsSeries<T> {
    /// Cauchy product truncated at min(order_a, order_b).
    pub fn product(&self, other: &Self) -> Result<Self> {
        let order = self.order().min(other.order());
        let mut coeffs = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut acc = self.coeffs[0].zeros_like();
            for j in 0..=k {
                acc.axpy(1.0, &self.coeffs[j].mul(&other.coeffs[k - j]));
            }
            coeffs.push(acc);
        }
        Ok(Self { coeffs })
    }
}

/// cos/sin of `base + theta(ε)` as series in ε, where `theta` is the
/// hat-correction series and `base` the ε-independent background.
///
/// Normalized recurrences driven by cos' = −sin·θ', sin' = cos·θ':
///   (k+1)·cos_{k+1} = −Σ_{j=0}^{k} (j+1) θ_{j+1} sin_{k−j}
///   (k+1)·sin_{k+1} = +Σ_{j=0}^{k} (j+1) θ_{j+1} cos_{k−j}
pub fn cos_sin_series<T: PointwisePayload>(
    theta: &EpsSeries<T>,
    base: &T,
) -> Result<(EpsSeries<T>, EpsSeries<T>)> {
    let m = theta.order();
    let mut full0 = base.clone();
    full0.axpy(1.0, theta.coeff(0));
    let mut cos_coeffs = vec![full0.cos()];
    let mut sin_coeffs = vec![full0.sin()];
    for k in 0..m {
        let mut cnext = base.zeros_like();
        let mut snext = base.zeros_like();
        for j in 0..=k {
            let scale = (j + 1) as f64;
            cnext.axpy(-scale, &theta.coeff(j + 1).mul(&sin_coeffs[k - j]));
            snext.axpy(scale, &theta.coeff(j + 1).mul(&cos_coeffs[k - j]));
        }
        let inv = 1.0 / (k + 1) as f64;
        cnext.scale(inv);
        snext.scale(inv);
        cos_coeffs.push(cnext);
        sin_coeffs.push(snext);
    }
    Ok((EpsSeries::new(cos_coeffs), EpsSeries::new(sin_coeffs)))
}

/// Shape guard shared by grid-valued series operations.
pub fn check_same_grid(a: &GridFn2D, b: &GridFn2D) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::ShapeMismatch(
            "series coefficients on different grids".into(),
        ));
    }
    Ok(())
}
