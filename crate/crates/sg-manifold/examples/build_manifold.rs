//! Build a manifold model order by order and inspect the series.
//!
//! Runs at a reduced resolution so it finishes in a few seconds; the
//! shipped configs under `configs/` hold the full desk-scale setup.
//!
//!     cargo run --release --example build_manifold

use sg_manifold::builder::{build_manifold, BuildInputs, BuildOptions};
use sg_manifold::forcing::{ForcingFamily, ForcingTerm, Profile};
use sg_manifold::grid::{Grid1D, Grid2D};
use sg_manifold::model_io::{load_model, save_model};
use sg_manifold::norm::y_norm;

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
        order: 4,
        xi_cap: 2.0,
        nu: 7,
        ..BuildOptions::default()
    };
    let inputs = BuildInputs::new(grids, forcing, opts)?;
    let (model, diag) = build_manifold(&inputs)?;

    println!(
        "built series order {} at {} velocity nodes",
        model.order,
        model.stencil.len()
    );
    println!(
        "validated eps range: |eps| <= {:.3}",
        model.validated_eps_max
    );
    println!(
        "forcing growth constant: {:.3}",
        diag.forcing_growth_constant
    );
    for (n, norm) in diag.coeff_norms.iter().enumerate() {
        println!("  order {n}: max-node Y-norm {norm:.4e}");
    }
    for (m, t) in diag.timings.iter().enumerate() {
        println!("  stage {m}: {} {:.2}s", t.stage, t.seconds);
    }

    // coefficients live in the constrained space: per-node orthogonality
    let m = model.stencil.center_index();
    let c2 = model.coeffs[m].coeff(2);
    println!(
        "order-2 coefficient at u = 0: Y-norm {:.4e}, sup |θ̂₂| {:.4e}",
        y_norm(c2, model.alpha),
        c2.theta.max_abs()
    );

    // serialization round-trips bit-exactly
    let dir = std::env::temp_dir().join("sg-manifold-example-model");
    let sha = save_model(&model, &dir, "example")?;
    let (loaded, sha2) = load_model(&dir)?;
    assert_eq!(sha, sha2);
    assert_eq!(loaded.coeffs[m].coeff(2).theta.values(), c2.theta.values());
    println!(
        "model round-tripped through {} (manifest sha {sha})",
        dir.display()
    );
    Ok(())
}
