//! The bare perturbed sine-Gordon solver on a traveling kink: second-order
//! convergence against the closed-form solution, long-window energy
//! behavior, and time reversibility of the Verlet flow.
//!
//!     cargo run --release --example kink_pde

use std::sync::Arc;

use sg_manifold::dynamics::{FieldState, PdeSolver};
use sg_manifold::grid::Grid1D;
use sg_manifold::kink;

fn main() -> sg_manifold::Result<()> {
    let u = 0.1;
    let t_end = 8.0;

    println!("traveling kink at u = {u}: max error vs closed form after t = {t_end}");
    let mut prev: Option<f64> = None;
    for n in [201usize, 401, 801] {
        let g = Arc::new(Grid1D::uniform(-20.0, 20.0, n)?);
        let (theta, psi) = kink::soliton_state(0.0, u, &g)?;
        let dt = 0.4 * g.h();
        let steps = (t_end / dt).round() as usize;
        let dt = t_end / steps as f64;
        let mut solver = PdeSolver::new(
            FieldState { theta, psi, t: 0.0 },
            g.clone(),
            vec![0.0; g.n()],
            dt,
        )?;
        solver.advance(steps)?;
        let st = solver.state();
        let (exact, _) = kink::soliton_state(u * st.t, u, &g)?;
        let err = st
            .theta
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        match prev {
            Some(p) => println!("  n = {n:4}: {err:.4e}  (ratio {:.2})", p / err),
            None => println!("  n = {n:4}: {err:.4e}"),
        }
        prev = Some(err);
    }

    let g = Arc::new(Grid1D::uniform(-20.0, 20.0, 321)?);
    let (theta, psi) = kink::soliton_state(0.0, u, &g)?;
    let dt = 0.2 * g.h();
    let mut solver = PdeSolver::new(
        FieldState { theta, psi, t: 0.0 },
        g.clone(),
        vec![0.0; g.n()],
        dt,
    )?;
    let e0 = solver.energy();
    let steps = (20.0 / dt).round() as usize;
    solver.advance(steps)?;
    println!(
        "energy over t = 20: E(0) = {e0:.8}, E(T) = {:.8}, relative drift {:.2e}",
        solver.energy(),
        (solver.energy() - e0).abs() / e0
    );

    solver.reverse();
    solver.advance(steps)?;
    solver.reverse();
    let back = solver.state();
    let (t0, p0) = kink::soliton_state(0.0, u, &g)?;
    let mut err: f64 = 0.0;
    for j in 0..g.n() {
        err = err.max((back.theta[j] - t0[j]).abs());
        err = err.max((back.psi[j] - p0[j]).abs());
    }
    println!("time-reversal roundtrip error: {err:.2e}");
    Ok(())
}
