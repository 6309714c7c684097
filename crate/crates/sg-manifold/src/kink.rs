//! The sine-Gordon kink family and its closed-form derivatives.
//!
//! The kink θ_K(x) = 4 arctan(e^x) connects 0 to 2π and satisfies
//! θ_K'' = sin θ_K. Boosted and translated copies
//! θ0(ξ,u,x) = θ_K(γ(u)(x−ξ)), ψ0 = −uγθ_K'(γ(u)(x−ξ)) sweep out the
//! classical solitary manifold; everything here is analytic, no numerical
//! differentiation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D, GridFn2D};

/// θ_K(x) = 4 arctan(e^x); monotone, range (0, 2π).
#[inline]
pub fn kink_theta(x: f64) -> f64 {
    4.0 * x.exp().atan()
}

/// θ_K'(x) = 2 sech x.
#[inline]
pub fn kink_dtheta(x: f64) -> f64 {
    2.0 / x.cosh()
}

/// θ_K''(x) = −2 sech x tanh x  (equals sin θ_K).
#[inline]
pub fn kink_d2theta(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    -2.0 * s * x.tanh()
}

/// θ_K'''(x) = 2 sech x (tanh²x − sech²x).
#[inline]
pub fn kink_d3theta(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    let t = x.tanh();
    2.0 * s * (t * t - s * s)
}

/// cos θ_K(x) = 1 − 2 sech²x, the potential of the linearized operator.
#[inline]
pub fn kink_cos(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    1.0 - 2.0 * s * s
}

/// sin θ_K(x) = −2 sech x tanh x.
#[inline]
pub fn kink_sin(x: f64) -> f64 {
    kink_d2theta(x)
}

/// Lorentz factor γ(u) = 1/√(1−u²); rejects |u| ≥ 1.
pub fn gamma(u: f64) -> Result<f64> {
    if u.abs() >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "velocity |u| = {} must be < 1",
            u.abs()
        )));
    }
    Ok(1.0 / (1.0 - u * u).sqrt())
}

/// Boosted kink state (θ0, ψ0) sampled on an x-grid.
pub fn soliton_state(xi: f64, u: f64, xgrid: &Grid1D) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = gamma(u)?;
    let mut theta = Vec::with_capacity(xgrid.n());
    let mut psi = Vec::with_capacity(xgrid.n());
    for &x in xgrid.nodes() {
        let z = g * (x - xi);
        theta.push(kink_theta(z));
        psi.push(-u * g * kink_dtheta(z));
    }
    Ok((theta, psi))
}

/// Zero modes of the soliton family at one ξ:
/// t1 = (∂ξθ0, ∂ξψ0), t2 = (∂uθ0, ∂uψ0), sampled on the x-grid.
pub fn zero_modes(
    xi: f64,
    u: f64,
    xgrid: &Grid1D,
) -> Result<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    let g = gamma(u)?;
    let n = xgrid.n();
    let mut t1t = Vec::with_capacity(n);
    let mut t1p = Vec::with_capacity(n);
    let mut t2t = Vec::with_capacity(n);
    let mut t2p = Vec::with_capacity(n);
    for &x in xgrid.nodes() {
        let s = x - xi;
        let z = g * s;
        let d1 = kink_dtheta(z);
        let d2 = kink_d2theta(z);
        t1t.push(-g * d1);
        t1p.push(u * g * g * d2);
        t2t.push(u * g.powi(3) * s * d1);
        t2p.push(-(g + u * u * g.powi(3)) * d1 - u * u * g.powi(4) * s * d2);
    }
    Ok(((t1t, t1p), (t2t, t2p)))
}

/// Second u-derivatives (∂u²θ0, ∂u²ψ0) at one ξ, needed by the
/// mixed-derivative recursion cross-check.
pub fn second_u_derivatives(xi: f64, u: f64, xgrid: &Grid1D) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = gamma(u)?;
    let (g3, g4, g5, g6, g7) = (g.powi(3), g.powi(4), g.powi(5), g.powi(6), g.powi(7));
    let n = xgrid.n();
    let mut ddt = Vec::with_capacity(n);
    let mut ddp = Vec::with_capacity(n);
    for &x in xgrid.nodes() {
        let s = x - xi;
        let z = g * s;
        let d1 = kink_dtheta(z);
        let d2 = kink_d2theta(z);
        let d3 = kink_d3theta(z);
        ddt.push((g3 + 3.0 * u * u * g5) * s * d1 + u * u * g6 * s * s * d2);
        ddp.push(
            -3.0 * u * g5 * d1
                - (3.0 * u * g4 + 5.0 * u.powi(3) * g6) * s * d2
                - u.powi(3) * g7 * s * s * d3,
        );
    }
    Ok((ddt, ddp))
}

/// Field builders over a full (ξ, x) grid.
pub struct KinkFields {
    /// cos θ_K(γ(x−ξ)) — potential term of the linearization.
    pub v_pot: GridFn2D,
    /// sin θ_K(γ(x−ξ)) — base value of the sine composition.
    pub sin0: GridFn2D,
    /// θ0 over the grid.
    pub theta0: GridFn2D,
    /// t2 = (∂uθ0, ∂uψ0) over the grid.
    pub t2_theta: GridFn2D,
    pub t2_psi: GridFn2D,
    /// Constraint pairing profiles: a = θ_K'(γ(x−ξ)), b = −uγθ_K''(γ(x−ξ)).
    pub con_a: GridFn2D,
    pub con_b: GridFn2D,
}

impl KinkFields {
    pub fn new(grid: Arc<Grid2D>, u: f64) -> Result<Self> {
        let g = gamma(u)?;
        let g3 = g.powi(3);
        let g4 = g.powi(4);
        let mk = |f: &dyn Fn(f64, f64) -> f64| GridFn2D::from_fn(grid.clone(), f);
        let v_pot = mk(&|xi, x| kink_cos(g * (x - xi)));
        let sin0 = mk(&|xi, x| kink_sin(g * (x - xi)));
        let theta0 = mk(&|xi, x| kink_theta(g * (x - xi)));
        let t2_theta = mk(&|xi, x| u * g3 * (x - xi) * kink_dtheta(g * (x - xi)));
        let t2_psi = mk(&|xi, x| {
            let s = x - xi;
            let z = g * s;
            -(g + u * u * g3) * kink_dtheta(z) - u * u * g4 * s * kink_d2theta(z)
        });
        let con_a = mk(&|xi, x| kink_dtheta(g * (x - xi)));
        let con_b = mk(&|xi, x| -u * g * kink_d2theta(g * (x - xi)));
        Ok(Self {
            v_pot,
            sin0,
            theta0,
            t2_theta,
            t2_psi,
            con_a,
            con_b,
        })
    }
}
