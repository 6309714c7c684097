//! End-to-end acceptance suite at desk scale. Each numbered check prints one
//! PASS/FAIL line; the test fails if any check fails. Heavy artifacts
//! (operator factorizations, built models) are shared across checks.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sg_manifold::builder::{
    assemble_handles, bounds_report, build_manifold_with, literal_iteration_check, BuildInputs,
    BuildOptions, ManifoldModel,
};
use sg_manifold::config::Config;
use sg_manifold::dynamics::{
    integrate_modulation, rescaled_dynamics_check, verify_invariance, ExitReason, FieldState,
    PdeSolver, VerifyOptions,
};
use sg_manifold::eval::{eval_lambda, floor_subtract, loglog_slope, residual_corrected};
use sg_manifold::forcing::{factorial, ForcingFamily};
use sg_manifold::grid::{Grid1D, Grid2D, GridFn2D, PairZ, TripleY};
use sg_manifold::kink;
use sg_manifold::norm::z_norm_on_window;
use sg_manifold::operator::{apply_operator, OperatorHandle};
use sg_manifold::series::{cos_sin_series, EpsSeries};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
}

fn record(
    outcomes: &mut Vec<Outcome>,
    name: &'static str,
    t0: Instant,
    passed: bool,
    detail: String,
) {
    let seconds = t0.elapsed().as_secs_f64();
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} {name} ({seconds:.1}s): {detail}");
    outcomes.push(Outcome {
        name,
        passed,
        detail,
        seconds,
    });
}

/// Smooth random right-hand side, exactly zero on the boundary rows.
fn random_rhs(rng: &mut ChaCha8Rng, grids: &Arc<Grid2D>) -> PairZ {
    let gx = grids.clone();
    let mut bump = |amp_range: std::ops::Range<f64>| {
        let a = rng.gen_range(amp_range);
        let cx = rng.gen_range(-4.0..4.0);
        let cy = rng.gen_range(-6.0..6.0);
        let sx = rng.gen_range(0.8..2.0);
        let sy = rng.gen_range(0.8..2.5);
        move |xi: f64, x: f64| a * (-((xi - cx) / sx).powi(2) - ((x - cy) / sy).powi(2)).exp()
    };
    let b1 = bump(0.3..1.0);
    let b2 = bump(0.2..0.8);
    let mask = move |xi: f64, x: f64, g: &Grid2D| {
        let mxi = 1.0 - ((xi - g.xi.min()) / (g.xi.max() - g.xi.min()) * 2.0 - 1.0).powi(8);
        let mx = 1.0 - ((x - g.x.min()) / (g.x.max() - g.x.min()) * 2.0 - 1.0).powi(8);
        mxi.max(0.0) * mx.max(0.0)
    };
    let g2 = gx.clone();
    let v = GridFn2D::from_fn(gx.clone(), move |xi, x| mask(xi, x, &g2) * b1(xi, x));
    let g2 = gx.clone();
    let mask2 = move |xi: f64, x: f64| {
        let mxi = 1.0 - ((xi - g2.xi.min()) / (g2.xi.max() - g2.xi.min()) * 2.0 - 1.0).powi(8);
        let mx = 1.0 - ((x - g2.x.min()) / (g2.x.max() - g2.x.min()) * 2.0 - 1.0).powi(8);
        mxi.max(0.0) * mx.max(0.0)
    };
    let w = GridFn2D::from_fn(gx, move |xi, x| mask2(xi, x) * b2(xi, x));
    PairZ { v, w }
}

/// Normalized k-th ε-derivative by central differences with two Richardson
/// extrapolation levels (independent oracle for the series composition).
fn fd_taylor_coeff(f: &dyn Fn(f64) -> GridFn2D, k: usize, h: f64) -> GridFn2D {
    let stencil_at = |h: f64| -> GridFn2D {
        let comb = |pairs: &[(f64, f64)], scale: f64| {
            let mut acc = f(0.0);
            acc.scale(0.0);
            for &(e, w) in pairs {
                acc.axpy(w, &f(e * h));
            }
            acc.scale(scale);
            acc
        };
        match k {
            0 => f(0.0),
            1 => comb(&[(1.0, 1.0), (-1.0, -1.0)], 1.0 / (2.0 * h)),
            2 => comb(&[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)], 1.0 / (h * h)),
            3 => comb(
                &[(2.0, 1.0), (1.0, -2.0), (-1.0, 2.0), (-2.0, -1.0)],
                1.0 / (2.0 * h * h * h),
            ),
            4 => comb(
                &[
                    (2.0, 1.0),
                    (1.0, -4.0),
                    (0.0, 6.0),
                    (-1.0, -4.0),
                    (-2.0, 1.0),
                ],
                1.0 / (h * h * h * h),
            ),
            _ => unreachable!(),
        }
    };
    // O(h²) stencils: two Richardson levels give O(h⁶)
    let d1 = stencil_at(h);
    let d2 = stencil_at(h / 2.0);
    let d3 = stencil_at(h / 4.0);
    let mut r1 = d2.clone();
    r1.scale(4.0 / 3.0);
    r1.axpy(-1.0 / 3.0, &d1);
    let mut r2 = d3.clone();
    r2.scale(4.0 / 3.0);
    r2.axpy(-1.0 / 3.0, &d2);
    let mut out = r2.clone();
    out.scale(16.0 / 15.0);
    out.axpy(-1.0 / 15.0, &r1);
    out.scale(1.0 / factorial(k));
    out
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();
    let suite_t0 = Instant::now();

    // shared context: default desk-scale configuration
    let cfg = Config::from_toml("").expect("default config");
    let mut opts6 = cfg.build_options();
    opts6.order = 6;
    let grids = cfg.grids().expect("grids");
    let poly_forcing = cfg
        .forcing
        .resolve(Path::new("."))
        .expect("default forcing");
    let inputs6 =
        BuildInputs::new(grids.clone(), poly_forcing.clone(), opts6.clone()).expect("inputs");

    let t_assemble = Instant::now();
    let handles =
        assemble_handles(&inputs6.grids, &inputs6.stencil, &inputs6.opts.solver).expect("assemble");
    let assemble_secs = t_assemble.elapsed().as_secs_f64();
    eprintln!(
        "shared: assembled {} handles in {assemble_secs:.1}s",
        handles.len()
    );

    let (model6, _) = build_manifold_with(&inputs6, &handles).expect("build M=6");
    let model4 = model6.truncated(4);

    let gauss_inputs = BuildInputs::new(
        grids.clone(),
        ForcingFamily::Gaussian {
            amplitude: 1.0,
            x0: 0.0,
            sigma: 1.5,
        },
        BuildOptions {
            order: 4,
            ..opts6.clone()
        },
    )
    .expect("gauss inputs");
    let (gauss_model, _) = build_manifold_with(&gauss_inputs, &handles).expect("build gauss");

    let zero_inputs = BuildInputs::new(
        grids.clone(),
        ForcingFamily::Zero,
        BuildOptions {
            order: 3,
            ..opts6.clone()
        },
    )
    .expect("zero inputs");
    let (zero_model, _) = build_manifold_with(&zero_inputs, &handles).expect("build zero");

    criterion_1_roundtrip(&mut outcomes, &handles, &grids, assemble_secs);
    criterion_2_kernel(&mut outcomes);
    criterion_3_literal(&mut outcomes, &inputs6, &handles, &model6);
    criterion_4_composition(&mut outcomes, &model6, &handles);
    criterion_5_residual_order(&mut outcomes, &model6);
    criterion_6_degenerate(&mut outcomes, &zero_model);
    criterion_7_invariance(&mut outcomes, &model6);
    criterion_8_bounds(&mut outcomes, &model6, &model4);
    criterion_9_rescaled(&mut outcomes, &gauss_model);
    criterion_10_determinism(&mut outcomes);

    println!(
        "acceptance finished in {:.1}s: {}/{} passed",
        suite_t0.elapsed().as_secs_f64(),
        outcomes.iter().filter(|o| o.passed).count(),
        outcomes.len()
    );
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    assert!(
        failed.is_empty(),
        "failed criteria: {:?}",
        failed
            .iter()
            .map(|o| format!("{} ({})", o.name, o.detail))
            .collect::<Vec<_>>()
    );
    // budget sanity (generous umbrella over the per-criterion limits)
    assert!(
        outcomes.iter().map(|o| o.seconds).sum::<f64>() < 3600.0,
        "suite exceeded one hour"
    );
}

fn criterion_1_roundtrip(
    outcomes: &mut Vec<Outcome>,
    handles: &[OperatorHandle],
    grids: &Arc<Grid2D>,
    assemble_secs: f64,
) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    let mut worst: f64 = 0.0;
    for h in handles {
        for _ in 0..20 {
            let rhs = random_rhs(&mut rng, grids);
            let sol = h.solve(&rhs).expect("solve");
            let back = h.apply(&sol).expect("apply");
            let scale = rhs.v.max_abs() + rhs.w.max_abs();
            let mut err: f64 = 0.0;
            for idx in 0..grids.len() {
                err = err.max((back.v.values()[idx] - rhs.v.values()[idx]).abs());
                err = err.max((back.w.values()[idx] - rhs.w.values()[idx]).abs());
            }
            worst = worst.max(err / scale);
        }
    }
    let total = t0.elapsed().as_secs_f64() + assemble_secs;
    let passed = worst < 1e-8 && total < 120.0;
    record(
        outcomes,
        "criterion 01 operator-roundtrip",
        t0,
        passed,
        format!(
            "worst rel residual {worst:.2e} over {} solves; {total:.0}s incl. assembly",
            20 * handles.len()
        ),
    );
}

fn criterion_2_kernel(outcomes: &mut Vec<Outcome>) {
    let t0 = Instant::now();
    let u = 0.1;
    let mut norms = Vec::new();
    for k in 0..3 {
        let f = 1 << k;
        let xi = Grid1D::uniform(-12.0, 12.0, 48 * f + 1).unwrap();
        let x = Grid1D::uniform(-20.0, 20.0, 80 * f + 1).unwrap();
        let g = Grid2D::new(xi, x, 3.0).unwrap();
        let mut y = TripleY::zeros(g.clone());
        for i in 0..g.xi.n() {
            let ((t1t, t1p), _) = kink::zero_modes(g.xi.node(i), u, &g.x).unwrap();
            for j in 0..g.x.n() {
                *y.theta.at_mut(i, j) = t1t[j];
                *y.psi.at_mut(i, j) = t1p[j];
            }
        }
        let out = apply_operator(u, &y).unwrap();
        norms.push(z_norm_on_window(&out, 1, -3.0, 3.0));
    }
    let s1 = (norms[0] / norms[1]).log2();
    let s2 = (norms[1] / norms[2]).log2();
    let passed = (s1 - 2.0).abs() <= 0.3 && (s2 - 2.0).abs() <= 0.3;
    record(
        outcomes,
        "criterion 02 kernel-direction",
        t0,
        passed,
        format!("translation-mode residual slopes {s1:.2}, {s2:.2} (target 2.0 ± 0.3)"),
    );
}

fn criterion_3_literal(
    outcomes: &mut Vec<Outcome>,
    inputs: &BuildInputs,
    handles: &[OperatorHandle],
    model: &ManifoldModel,
) {
    let t0 = Instant::now();
    let rep = literal_iteration_check(inputs, handles, model, 4, 1e-9).expect("literal check");
    let passed = rep.passed && t0.elapsed().as_secs_f64() < 600.0;
    record(
        outcomes,
        "criterion 03 stabilization",
        t0,
        passed,
        format!(
            "literal vs diagonal max rel {:.2e} over {} stabilized pairs; du-oracle defects {:?}",
            rep.max_rel_difference,
            rep.comparisons.iter().filter(|c| c.stabilized).count(),
            rep.du_recursion_defects
                .iter()
                .map(|d| format!("{d:.1e}"))
                .collect::<Vec<_>>()
        ),
    );
}

fn criterion_4_composition(
    outcomes: &mut Vec<Outcome>,
    model: &ManifoldModel,
    handles: &[OperatorHandle],
) {
    let t0 = Instant::now();
    // off-center node: nonzero velocity exercises the boosted background
    let m = 1;
    let theta_series = EpsSeries::new(
        (0..=4)
            .map(|n| model.coeffs[m].coeff(n).theta.clone())
            .collect::<Vec<_>>(),
    );
    let base = handles[m].kink_fields().theta0.clone();
    let (cos_s, sin_s) = cos_sin_series(&theta_series, &base).expect("composition");
    let f = |eps: f64| {
        let mut full = base.clone();
        full.axpy(1.0, &theta_series.evaluate(eps));
        full.map(f64::cos)
    };
    // zero coefficients (the hat series has no ε¹ term) are compared
    // against the series scale instead of their own vanishing magnitude
    let scale_floor = 1e-3 * cos_s.coeff(0).max_abs();
    let mut worst: f64 = 0.0;
    for k in 0..=4 {
        let fd = fd_taylor_coeff(&f, k, 0.04);
        let ck = cos_s.coeff(k);
        let mut diff = fd.clone();
        diff.axpy(-1.0, ck);
        let denom = ck.max_abs().max(scale_floor);
        worst = worst.max(diff.max_abs() / denom);
    }
    // same for the sine companion at order 4 (sanity on both recurrences)
    let g = |eps: f64| {
        let mut full = base.clone();
        full.axpy(1.0, &theta_series.evaluate(eps));
        full.map(f64::sin)
    };
    let fd4 = fd_taylor_coeff(&g, 4, 0.04);
    let mut diff = fd4.clone();
    diff.axpy(-1.0, sin_s.coeff(4));
    worst = worst.max(diff.max_abs() / sin_s.coeff(4).max_abs().max(scale_floor));
    let passed = worst < 1e-6;
    record(
        outcomes,
        "criterion 04 series-composition",
        t0,
        passed,
        format!("worst rel deviation from Richardson ε-differences {worst:.2e} (orders ≤ 4)"),
    );
}

fn criterion_5_residual_order(outcomes: &mut Vec<Outcome>, model6: &ManifoldModel) {
    let t0 = Instant::now();
    let eps_list = [0.02, 0.03, 0.05, 0.08];
    // a stencil node: the defining relation is enforced exactly there, so
    // the corrected residual isolates the ε-truncation tail
    let u = model6.stencil.node(1);
    let mut slopes = Vec::new();
    let mut at_05 = Vec::new();
    for m in [2usize, 3, 4] {
        let tm = model6.truncated(m);
        let vals: Vec<f64> = eps_list
            .iter()
            .map(|&e| residual_corrected(&tm, u, e).expect("residual"))
            .collect();
        at_05.push(vals[2]);
        slopes.push(loglog_slope(&eps_list, &vals));
    }
    let monotone = at_05[0] > at_05[1] && at_05[1] > at_05[2];
    let passed = (slopes[0] - 3.0).abs() <= 0.4
        && (slopes[1] - 4.0).abs() <= 0.4
        && slopes[2] >= 4.5
        && monotone
        && t0.elapsed().as_secs_f64() < 900.0;
    record(
        outcomes,
        "criterion 05 residual-order",
        t0,
        passed,
        format!(
            "slopes M=2: {:.2} (3±0.4), M=3: {:.2} (4±0.4), M=4: {:.2} (≥4.5); monotone at ε=0.05: {monotone}",
            slopes[0], slopes[1], slopes[2]
        ),
    );
}

fn criterion_6_degenerate(outcomes: &mut Vec<Outcome>, zero_model: &ManifoldModel) {
    let t0 = Instant::now();
    // hat coefficients vanish
    let mut max_coeff: f64 = 0.0;
    for m in 0..zero_model.stencil.len() {
        for n in 0..=zero_model.order {
            max_coeff = max_coeff.max(zero_model.coeffs[m].coeff(n).max_abs());
        }
    }
    // driver vanishes
    let mut max_lambda: f64 = 0.0;
    for &xi in &[-2.0, 0.0, 1.5] {
        for &u in &[0.0, 0.05, -0.08] {
            max_lambda = max_lambda.max(eval_lambda(zero_model, xi, u, 0.1).unwrap().abs());
        }
    }
    // uniform motion is exact
    let traj = integrate_modulation(zero_model, 0.2, 0.05, 0.1, 20.0, 0.01).unwrap();
    let last = traj.last();
    let drift = ((last.xi_bar - (0.2 + 0.05 * last.t)).abs()).max((last.u_bar - 0.05).abs());
    // traveling-kink error refines at second order
    let u = 0.1;
    let t_end = 4.0;
    let err_at = |n: usize| {
        let g = Arc::new(Grid1D::uniform(-20.0, 20.0, n).unwrap());
        let (theta, psi) = kink::soliton_state(0.0, u, &g).unwrap();
        let dt = 0.4 * g.h();
        let steps = (t_end / dt).round() as usize;
        let dt = t_end / steps as f64;
        let mut solver = PdeSolver::new(
            FieldState { theta, psi, t: 0.0 },
            g.clone(),
            vec![0.0; g.n()],
            dt,
        )
        .unwrap();
        solver.advance(steps).unwrap();
        let st = solver.state();
        let (exact, _) = kink::soliton_state(u * st.t, u, &g).unwrap();
        st.theta
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
    };
    let e = [err_at(201), err_at(401), err_at(801)];
    let s1 = (e[0] / e[1]).log2();
    let s2 = (e[1] / e[2]).log2();
    let passed = max_coeff <= 1e-12
        && max_lambda == 0.0
        && drift < 1e-12
        && (s1 - 2.0).abs() <= 0.3
        && (s2 - 2.0).abs() <= 0.3
        && traj.exit_reason == ExitReason::Completed;
    record(
        outcomes,
        "criterion 06 degenerate-forcing",
        t0,
        passed,
        format!(
            "max hat {max_coeff:.1e}, max λ {max_lambda:.1e}, uniform-motion drift {drift:.1e}, kink slopes {s1:.2}/{s2:.2}"
        ),
    );
}

fn criterion_7_invariance(outcomes: &mut Vec<Outcome>, model6: &ManifoldModel) {
    let t0 = Instant::now();
    let vopts = VerifyOptions::default();
    let floor = verify_invariance(model6, 0.0, 0.0, 0.0, 20.0, &vopts)
        .expect("floor run")
        .sup_deviation;
    let mut sups = Vec::new();
    for m in [2usize, 3, 4] {
        let tm = model6.truncated(m);
        let out = verify_invariance(&tm, 0.0, 0.0, 0.05, 20.0, &vopts).expect("verify");
        sups.push(floor_subtract(out.sup_deviation, floor));
    }
    let monotone = sups[0] > sups[1] && sups[1] > sups[2];
    let t3 = model6.truncated(3);
    let eps_list = [0.03, 0.05, 0.08];
    let devs: Vec<f64> = eps_list
        .iter()
        .map(|&e| {
            let out = verify_invariance(&t3, 0.0, 0.0, e, 20.0, &vopts).expect("verify");
            floor_subtract(out.sup_deviation, floor)
        })
        .collect();
    let slope = loglog_slope(&eps_list, &devs);
    let passed = monotone && slope >= 3.5 && t0.elapsed().as_secs_f64() < 1200.0;
    record(
        outcomes,
        "criterion 07 invariance",
        t0,
        passed,
        format!(
            "corrected sup-deviation M=2,3,4: {:.2e} > {:.2e} > {:.2e}; ε-slope at M=3: {slope:.2} (≥3.5); floor {floor:.1e}",
            sups[0], sups[1], sups[2]
        ),
    );
}

fn criterion_8_bounds(outcomes: &mut Vec<Outcome>, model6: &ManifoldModel, model4: &ManifoldModel) {
    let t0 = Instant::now();
    let b6 = bounds_report(model6, 3).expect("bounds M=6");
    let b4 = bounds_report(model4, 3).expect("bounds M=4");
    let all_within = b6.rows.iter().all(|r| r.ratio_at_fit <= 1.0 + 1e-12);
    let ratio = b6.fitted_c / b4.fitted_c;
    let passed = all_within && ratio < 2.0 && ratio > 0.5;
    record(
        outcomes,
        "criterion 08 factorial-bounds",
        t0,
        passed,
        format!(
            "fitted C = {:.3e} (M=6) vs {:.3e} (M=4), ratio {ratio:.2}; all {} (N,K) ratios ≤ 1: {all_within}",
            b6.fitted_c,
            b4.fitted_c,
            b6.rows.len()
        ),
    );
}

fn criterion_9_rescaled(outcomes: &mut Vec<Outcome>, gauss_model: &ManifoldModel) {
    let t0 = Instant::now();
    let rep = rescaled_dynamics_check(gauss_model, &[0.08, 0.04, 0.02], 0.0, 0.0, 4.0, 0.005)
        .expect("rescaled");
    let decreasing = rep.pairwise_differences.windows(2).all(|w| w[1] < w[0]);
    // RK4 at ds = 0.005 resolves these smooth fields far below 1e-6
    let integrator_tol = 1e-6;
    let nontrivial = rep.limit_acceleration_sup > 10.0 * integrator_tol;
    let passed = decreasing && nontrivial && !rep.pairwise_differences.is_empty();
    record(
        outcomes,
        "criterion 09 rescaled-dynamics",
        t0,
        passed,
        format!(
            "pairwise sup-differences {:?} strictly decreasing: {decreasing}; limit |dû/ds| {:.2e}",
            rep.pairwise_differences
                .iter()
                .map(|d| format!("{d:.2e}"))
                .collect::<Vec<_>>(),
            rep.limit_acceleration_sup
        ),
    );
}

fn criterion_10_determinism(outcomes: &mut Vec<Outcome>) {
    let t0 = Instant::now();
    // fast desk-scale config: identical build + verify twice, byte-compare
    let cfg_text = r#"
[grids]
xi_min = -6.0
xi_max = 6.0
xi_n = 49
x_min = -9.0
x_max = 9.0
x_n = 73

[stencil]
u_star = 0.1
nu = 5

[cutoff]
xi_cap = 1.0

[series]
order = 3

[forcing]
family = "gaussian"
amplitude = 0.8
x0 = 0.0
sigma = 1.2

[dynamics]
pde_refine = 2
"#;
    let base = tempfile::tempdir().unwrap();
    let cfg_path = base.path().join("config.toml");
    std::fs::write(&cfg_path, cfg_text).unwrap();
    let run = |tag: &str| {
        let out = base.path().join(tag);
        sg_manifold::cli::run_build(&sg_manifold::cli::BuildArgs {
            config: cfg_path.clone(),
            out_dir: out.clone(),
        })
        .expect("build");
        sg_manifold::cli::run_verify(&sg_manifold::cli::VerifyArgs {
            model: out.join("model"),
            config: Some(cfg_path.clone()),
            xi0: 0.0,
            u0: 0.0,
            eps: 0.05,
            t_end: 5.0,
            orders: vec![],
            out_dir: out.clone(),
        })
        .expect("verify");
        out
    };
    let a = run("a");
    let b = run("b");
    let mut compared = 0;
    let mut identical = true;
    for rel in [
        "model/manifest.json",
        "build_report.json",
        "deviations.csv",
        "verify_verdict.json",
    ] {
        let ba = std::fs::read(a.join(rel)).unwrap();
        let bb = std::fs::read(b.join(rel)).unwrap();
        identical &= ba == bb;
        compared += 1;
    }
    for entry in std::fs::read_dir(a.join("model")).unwrap() {
        let name = entry.unwrap().file_name();
        let ba = std::fs::read(a.join("model").join(&name)).unwrap();
        let bb = std::fs::read(b.join("model").join(&name)).unwrap();
        identical &= ba == bb;
        compared += 1;
    }
    record(
        outcomes,
        "criterion 10 determinism",
        t0,
        identical,
        format!("{compared} output files byte-identical across repeated build+verify: {identical}"),
    );
}
