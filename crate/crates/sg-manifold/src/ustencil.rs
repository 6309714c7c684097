//! Chebyshev collocation in the velocity parameter u.
//!
//! Coefficient fields are smooth in u on [−u*, u*]; a small Gauss–Lobatto
//! stencil with barycentric interpolation and a spectral differentiation
//! matrix handles all ∂u needs.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct UStencil {
    u_star: f64,
    /// Nodes in descending order: u_j = u* cos(jπ/(N−1)), j = 0..N−1.
    nodes: Vec<f64>,
    /// Spectral differentiation matrix mapping node samples to ∂u samples.
    diff: DMatrix<f64>,
    /// Barycentric weights (up to common scale).
    bary: Vec<f64>,
}

impl UStencil {
    pub fn new(u_star: f64, nu: usize) -> Result<Self> {
        if !(u_star > 0.0 && u_star < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "u_star = {u_star} must lie in (0, 1)"
            )));
        }
        if nu < 3 || nu % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "stencil size {nu} must be odd and at least 3 (so the nodes are symmetric about 0 and include it)"
            )));
        }
        let n = nu - 1;
        let ref_nodes: Vec<f64> = (0..nu).map(|j| (j as f64 * PI / n as f64).cos()).collect();
        let mut c = vec![1.0; nu];
        c[0] = 2.0;
        c[n] = 2.0;
        let mut diff = DMatrix::zeros(nu, nu);
        for i in 0..nu {
            for j in 0..nu {
                if i != j {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    diff[(i, j)] = (c[i] / c[j]) * sign / (ref_nodes[i] - ref_nodes[j]);
                }
            }
        }
        for i in 0..nu {
            let mut sum = 0.0;
            for j in 0..nu {
                if j != i {
                    sum += diff[(i, j)];
                }
            }
            diff[(i, i)] = -sum;
        }
        // map [-1, 1] -> [-u*, u*]; snap the nodes to exact antisymmetry
        diff /= u_star;
        let mut nodes: Vec<f64> = ref_nodes.iter().map(|&t| u_star * t).collect();
        for j in 0..nu / 2 {
            nodes[n - j] = -nodes[j];
        }
        nodes[n / 2] = 0.0;
        let bary: Vec<f64> = (0..nu)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        Ok(Self {
            u_star,
            nodes,
            diff,
            bary,
        })
    }

    #[inline]
    pub fn u_star(&self) -> f64 {
        self.u_star
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Index of the node holding u = 0 (stencil sizes are odd).
    pub fn center_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn contains(&self, u: f64) -> bool {
        u.abs() <= self.u_star + 1e-14
    }

    /// Barycentric interpolation weights for evaluating node samples at `u`.
    pub fn interp_weights(&self, u: f64) -> Result<Vec<f64>> {
        if !self.contains(u) {
            return Err(Error::OutOfRange(format!(
                "u = {u} outside stencil range [-{0}, {0}]",
                self.u_star
            )));
        }
        let mut w = vec![0.0; self.len()];
        for (j, &uj) in self.nodes.iter().enumerate() {
            if (u - uj).abs() < 1e-15 * self.u_star.max(1.0) {
                w[j] = 1.0;
                return Ok(w);
            }
        }
        let mut denom = 0.0;
        for j in 0..self.len() {
            let t = self.bary[j] / (u - self.nodes[j]);
            w[j] = t;
            denom += t;
        }
        for wj in &mut w {
            *wj /= denom;
        }
        Ok(w)
    }

    /// Interpolate scalar node samples at `u`.
    pub fn interp_scalar(&self, samples: &[f64], u: f64) -> Result<f64> {
        let w = self.interp_weights(u)?;
        Ok(w.iter().zip(samples).map(|(wi, s)| wi * s).sum())
    }

    /// Row `i` of the differentiation matrix: ∂u at node i from all samples.
    pub fn diff_row(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.diff
            .row(i)
            .iter()
            .copied()
            .collect::<Vec<_>>()
            .into_iter()
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// ∂u of scalar samples, returned at the nodes.
    pub fn differentiate(&self, samples: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.diff[(i, j)] * samples[j];
            }
            out[i] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_symmetric_and_contain_zero() {
        let st = UStencil::new(0.2, 9).unwrap();
        let n = st.len();
        for j in 0..n {
            assert_eq!(st.node(j), -st.node(n - 1 - j));
        }
        assert_eq!(st.node(st.center_index()), 0.0);
    }

    #[test]
    fn differentiates_square_exactly() {
        let st = UStencil::new(0.2, 9).unwrap();
        let samples: Vec<f64> = st.nodes().iter().map(|&u| u * u).collect();
        let d = st.differentiate(&samples);
        for (j, &u) in st.nodes().iter().enumerate() {
            assert!(
                (d[j] - 2.0 * u).abs() < 1e-10,
                "node {j}: got {}, want {}",
                d[j],
                2.0 * u
            );
        }
    }

    #[test]
    fn differentiates_degree_seven_exactly() {
        // spectral differentiation is exact on polynomials up to degree N-1
        let st = UStencil::new(0.3, 9).unwrap();
        let samples: Vec<f64> = st.nodes().iter().map(|&u| u.powi(7)).collect();
        let d = st.differentiate(&samples);
        for (j, &u) in st.nodes().iter().enumerate() {
            assert!((d[j] - 7.0 * u.powi(6)).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_exact_at_nodes_and_on_polynomials() {
        let st = UStencil::new(0.25, 9).unwrap();
        let f = |u: f64| 1.0 - 3.0 * u + 2.0 * u.powi(3);
        let samples: Vec<f64> = st.nodes().iter().map(|&u| f(u)).collect();
        for (j, &u) in st.nodes().iter().enumerate() {
            assert_eq!(st.interp_scalar(&samples, u).unwrap(), samples[j]);
        }
        for &u in &[0.01, -0.13, 0.22] {
            assert!((st.interp_scalar(&samples, u).unwrap() - f(u)).abs() < 1e-12);
        }
        assert!(st.interp_scalar(&samples, 0.3).is_err());
    }

    #[test]
    fn smooth_function_interpolates_spectrally() {
        let st = UStencil::new(0.2, 9).unwrap();
        // γ(u) is analytic with singularities at |u| = 1, far outside
        // [-0.2, 0.2]: 9-node interpolation lands around 1e-9.
        let f = |u: f64| (1.0 - u * u).sqrt().recip();
        let samples: Vec<f64> = st.nodes().iter().map(|&u| f(u)).collect();
        for &u in &[0.05, -0.11, 0.18] {
            let got = st.interp_scalar(&samples, u).unwrap();
            assert!((got - f(u)).abs() < 2e-8, "u = {u}");
        }
    }

    #[test]
    fn rejects_even_or_tiny_stencils() {
        assert!(UStencil::new(0.2, 8).is_err());
        assert!(UStencil::new(0.2, 1).is_err());
        assert!(UStencil::new(1.2, 9).is_err());
    }
}
