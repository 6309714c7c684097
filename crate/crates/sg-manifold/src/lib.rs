//! Numerical construction of the invariant solitary manifold of the
//! perturbed sine-Gordon equation θ_tt − θ_xx + sin θ = F(ε, x).
//!
//! The crate builds, order by order in ε, the family of dressed kink states
//! (θ∞, ψ∞) together with the driver field λ∞ whose modulation ODEs
//! ξ̄' = ū, ū' = λ∞(ξ̄, ū) steer motion along the manifold, and verifies
//! invariance by evolving the full PDE against the manifold trajectory.

pub mod builder;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod forcing;
pub mod grid;
pub mod kink;
pub mod model_io;
pub mod norm;
pub mod operator;
pub mod report;
pub mod series;
pub mod ustencil;

pub use error::{Error, Result};
