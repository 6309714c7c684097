//! Uniform grids and grid-sampled fields.
//!
//! A `GridFn2D` stores a real field over the tensor grid (ξ, x) in row-major
//! order (ξ slow, x fast); `GridFn1D` stores a profile over the ξ axis. The
//! pair/triple wrappers bundle the unknowns of the linearized system: a
//! `TripleY` is a candidate element of the constrained solution space, a
//! `PairZ` an element of the right-hand-side space.

use std::sync::Arc;

use crate::error::{Error, Result};

const UNIFORMITY_RTOL: f64 = 1e-12;

/// Uniform 1D grid with strictly increasing nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
    min: f64,
    max: f64,
    h: f64,
}

impl Grid1D {
    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 8 nodes, got {n}"
            )));
        }
        if !(max > min) {
            return Err(Error::InvalidParameter(format!(
                "grid range [{min}, {max}] is empty"
            )));
        }
        let h = (max - min) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| min + h * i as f64).collect();
        Ok(Self { nodes, min, max, h })
    }

    /// Validate an externally supplied node list (used when deserializing).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 8 nodes, got {}",
                nodes.len()
            )));
        }
        Self::from_nodes_relaxed(nodes)
    }

    /// Window sub-grids used by restricted norms only need the stencil
    /// minimum of 4 nodes.
    pub(crate) fn from_nodes_relaxed(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 nodes, got {}",
                nodes.len()
            )));
        }
        let h = nodes[1] - nodes[0];
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        for w in nodes.windows(2) {
            let step = w[1] - w[0];
            if (step - h).abs() > UNIFORMITY_RTOL * h.abs().max(1.0) {
                return Err(Error::InvalidParameter(
                    "grid spacing is not uniform".into(),
                ));
            }
        }
        let (min, max) = (nodes[0], *nodes.last().unwrap());
        Ok(Self { nodes, min, max, h })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn min(&self) -> f64 {
        self.min
    }

    #[inline]
    pub fn max(&self) -> f64 {
        self.max
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min - UNIFORMITY_RTOL && v <= self.max + UNIFORMITY_RTOL
    }

    /// Trapezoidal quadrature weight of node `i`.
    #[inline]
    pub fn quad_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n() {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Index of the node closest to `v`, with its distance.
    pub fn nearest_node(&self, v: f64) -> (usize, f64) {
        let raw = ((v - self.min) / self.h).round();
        let i = raw.clamp(0.0, (self.n() - 1) as f64) as usize;
        (i, (self.nodes[i] - v).abs())
    }
}

/// Tensor grid in (ξ, x).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub xi: Grid1D,
    pub x: Grid1D,
}

impl Grid2D {
    /// Internal constructor for derived sub-grids (norм windows); skips the
    /// cutoff-margin invariant.
    pub(crate) fn unchecked(xi: Grid1D, x: Grid1D) -> Arc<Self> {
        Arc::new(Self { xi, x })
    }

    /// `xi_cap` is the cutoff plateau half-width Ξ; the ξ-range must leave
    /// the transition region strictly interior with margin ≥ 2.
    pub fn new(xi: Grid1D, x: Grid1D, xi_cap: f64) -> Result<Arc<Self>> {
        const MARGIN: f64 = 2.0;
        if xi.max() < xi_cap + 1.0 + MARGIN || -xi.min() < xi_cap + 1.0 + MARGIN {
            return Err(Error::InvalidParameter(format!(
                "xi range [{}, {}] too small for cutoff plateau {} + 1 with margin {}",
                xi.min(),
                xi.max(),
                xi_cap,
                MARGIN
            )));
        }
        Ok(Arc::new(Self { xi, x }))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.xi.n() * self.x.n()
    }
}

/// Real field over a `Grid2D`, row-major: index = i_xi * x.n + j_x.
#[derive(Debug, Clone)]
pub struct GridFn2D {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl GridFn2D {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.xi.n() {
            let xi = grid.xi.node(i);
            for j in 0..grid.x.n() {
                values.push(f(xi, grid.x.node(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid function contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.x.n() + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let nx = self.grid.x.n();
        &mut self.values[i * nx + j]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let nx = self.grid.x.n();
        &self.values[i * nx..(i + 1) * nx]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_grid(other));
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn mul_pointwise(&self, other: &Self) -> Self {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// x-profile at ξ = `xi_value` by 4-point Lagrange interpolation along ξ;
    /// exact when `xi_value` hits a node.
    pub fn slice_at_xi(&self, xi_value: f64) -> Result<Vec<f64>> {
        let gxi = &self.grid.xi;
        if !gxi.contains(xi_value) {
            return Err(Error::OutOfRange(format!(
                "xi = {xi_value} outside grid range [{}, {}]",
                gxi.min(),
                gxi.max()
            )));
        }
        let (inear, dist) = gxi.nearest_node(xi_value);
        if dist <= 1e-13 * gxi.h() {
            return Ok(self.row(inear).to_vec());
        }
        let cell = (((xi_value - gxi.min()) / gxi.h()).floor() as isize)
            .clamp(0, gxi.n() as isize - 2) as usize;
        let start = cell.saturating_sub(1).min(gxi.n() - 4);
        let xs: [f64; 4] = std::array::from_fn(|k| gxi.node(start + k));
        let mut w = [0.0_f64; 4];
        for k in 0..4 {
            let mut lk = 1.0;
            for l in 0..4 {
                if l != k {
                    lk *= (xi_value - xs[l]) / (xs[k] - xs[l]);
                }
            }
            w[k] = lk;
        }
        let nx = self.grid.x.n();
        let mut out = vec![0.0; nx];
        for k in 0..4 {
            let row = self.row(start + k);
            for (o, r) in out.iter_mut().zip(row) {
                *o += w[k] * r;
            }
        }
        Ok(out)
    }
}

/// Real profile over a `Grid1D` (the ξ axis unless stated otherwise).
#[derive(Debug, Clone)]
pub struct GridFn1D {
    grid: Arc<Grid1D>,
    values: Vec<f64>,
}

impl GridFn1D {
    pub fn zeros(grid: Arc<Grid1D>) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid1D>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&v| f(v)).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Arc<Grid1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.n(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid function contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn mul_pointwise(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Cubic interpolation at `v`, exact at nodes.
    pub fn interp(&self, v: f64) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(v) {
            return Err(Error::OutOfRange(format!(
                "value {v} outside grid range [{}, {}]",
                g.min(),
                g.max()
            )));
        }
        let (inear, dist) = g.nearest_node(v);
        if dist <= 1e-13 * g.h() {
            return Ok(self.values[inear]);
        }
        let cell = (((v - g.min()) / g.h()).floor() as isize).clamp(0, g.n() as isize - 2) as usize;
        let start = cell.saturating_sub(1).min(g.n() - 4);
        let mut out = 0.0;
        for k in 0..4 {
            let xk = g.node(start + k);
            let mut lk = 1.0;
            for l in 0..4 {
                if l != k {
                    lk *= (v - g.node(start + l)) / (xk - g.node(start + l));
                }
            }
            out += lk * self.values[start + k];
        }
        Ok(out)
    }
}

/// Element of the unknown space: hat-fields (θ, ψ) plus the driver profile λ.
#[derive(Debug, Clone)]
pub struct TripleY {
    pub theta: GridFn2D,
    pub psi: GridFn2D,
    pub lambda: GridFn1D,
}

impl TripleY {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let xi = Arc::new(grid.xi.clone());
        Self {
            theta: GridFn2D::zeros(grid.clone()),
            psi: GridFn2D::zeros(grid),
            lambda: GridFn1D::zeros(xi),
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.theta.scale(a);
        self.psi.scale(a);
        self.lambda.scale(a);
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.theta.axpy(a, &other.theta);
        self.psi.axpy(a, &other.psi);
        self.lambda.axpy(a, &other.lambda);
    }

    pub fn max_abs(&self) -> f64 {
        self.theta
            .max_abs()
            .max(self.psi.max_abs())
            .max(self.lambda.max_abs())
    }
}

/// Element of the range space of the linearized operator.
#[derive(Debug, Clone)]
pub struct PairZ {
    pub v: GridFn2D,
    pub w: GridFn2D,
}

impl PairZ {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        Self {
            v: GridFn2D::zeros(grid.clone()),
            w: GridFn2D::zeros(grid),
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.v.scale(a);
        self.w.scale(a);
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.v.axpy(a, &other.v);
        self.w.axpy(a, &other.w);
    }

    pub fn max_abs(&self) -> f64 {
        self.v.max_abs().max(self.w.max_abs())
    }
}
