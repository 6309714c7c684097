//! Factorial-envelope diagnostics: fit the smallest C with
//! N!‖∂u^K c_N‖_Y ≤ C^{2N+2K−3}(N−2)! (times (K−3)! for K ≥ 3)
//! across all computed orders and u-derivatives.
//!
//!     cargo run --release --example factorial_bounds

use sg_manifold::builder::{bounds_report, build_manifold, BuildInputs, BuildOptions};
use sg_manifold::forcing::{ForcingFamily, ForcingTerm, Profile};
use sg_manifold::grid::{Grid1D, Grid2D};

fn main() -> sg_manifold::Result<()> {
    let xi = Grid1D::uniform(-8.0, 8.0, 97)?;
    let x = Grid1D::uniform(-12.0, 12.0, 145)?;
    let grids = Grid2D::new(xi, x, 2.0)?;
    let forcing = ForcingFamily::Poly {
        terms: vec![
            ForcingTerm {
                order: 2,
                shape: Profile::Gaussian {
                    amplitude: 1.0,
                    x0: 0.0,
                    sigma: 1.5,
                },
            },
            ForcingTerm {
                order: 3,
                shape: Profile::Sech2 { amplitude: 0.8 },
            },
        ],
    };
    let opts = BuildOptions {
        order: 6,
        xi_cap: 2.0,
        nu: 9,
        ..BuildOptions::default()
    };
    let inputs = BuildInputs::new(grids, forcing, opts)?;
    let (model, _) = build_manifold(&inputs)?;

    let report = bounds_report(&model, 3)?;
    println!(
        "{:>3} {:>3} {:>14} {:>12} {:>12}",
        "N", "K", "N!·‖∂u^K c_N‖", "implied C", "ratio@fit"
    );
    for r in &report.rows {
        println!(
            "{:>3} {:>3} {:>14.4e} {:>12.4e} {:>12.4e}",
            r.n, r.k, r.norm, r.implied_c, r.ratio_at_fit
        );
    }
    println!("fitted envelope constant C = {:.4e}", report.fitted_c);

    let truncated = model.truncated(4);
    let r4 = bounds_report(&truncated, 3)?;
    println!(
        "stability under order growth: C(M=4) = {:.4e}, C(M=6) = {:.4e}, ratio {:.3}",
        r4.fitted_c,
        report.fitted_c,
        report.fitted_c / r4.fitted_c
    );
    Ok(())
}
