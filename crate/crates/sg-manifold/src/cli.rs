//! Batch experiment drivers behind the thin binary: build manifolds, sweep
//! residuals, simulate and verify dynamics, emit reports.
//!
//! All outputs are deterministic (no RNG, no wall-clock content); stage
//! timings go to stderr only.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::builder::{
    assemble_handles, bounds_report, build_manifold_with, BuildDiagnostics, ManifoldModel,
};
use crate::config::Config;
use crate::dynamics::{
    integrate_modulation, rescaled_dynamics_check, verify_invariance, ExitReason,
};
use crate::error::{Error, Result};
use crate::eval::{eval_state, floor_subtract, loglog_slope, residual, residual_corrected};
use crate::model_io::{load_model, save_model};
use crate::report::{svg_loglog, write_atomic, write_json, Csv, CsvField, PlotSeries};

pub struct BuildArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct BuildReport {
    validated_eps_max: f64,
    classical_manifold: bool,
    coefficient_norms: Vec<f64>,
    condition_estimates: Vec<f64>,
    forcing_growth_constant: f64,
    locality_outer_share: Vec<f64>,
    bounds: Option<crate::builder::BoundsReport>,
}

fn log_timings(diag: &BuildDiagnostics) {
    for t in &diag.timings {
        eprintln!("stage {:<18} {:.3}s", t.stage, t.seconds);
    }
}

pub fn run_build(args: &BuildArgs) -> Result<()> {
    let (cfg, config_sha) = Config::load(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let inputs = cfg.build_inputs(base)?;
    let t0 = Instant::now();
    let handles = assemble_handles(&inputs.grids, &inputs.stencil, &inputs.opts.solver)?;
    eprintln!(
        "stage assemble-handles   {:.3}s",
        t0.elapsed().as_secs_f64()
    );
    let (model, diag) = build_manifold_with(&inputs, &handles)?;
    log_timings(&diag);

    let model_sha = save_model(&model, &args.out_dir.join("model"), &config_sha)?;
    let bounds = if model.order >= 4 {
        Some(bounds_report(&model, 3)?)
    } else {
        None
    };
    let report = BuildReport {
        validated_eps_max: model.validated_eps_max,
        classical_manifold: diag.classical_manifold,
        coefficient_norms: diag.coeff_norms.clone(),
        condition_estimates: diag.condition_estimates.clone(),
        forcing_growth_constant: diag.forcing_growth_constant,
        locality_outer_share: crate::builder::locality_share(&model, 0.1),
        bounds,
    };
    write_json(
        &args.out_dir.join("build_report.json"),
        &report,
        &config_sha,
        Some(&model_sha),
    )?;
    if diag.classical_manifold {
        eprintln!("note: zero forcing — built the classical solitary manifold");
    }
    eprintln!(
        "model written to {} (manifest sha256 {})",
        args.out_dir.join("model").display(),
        model_sha
    );
    Ok(())
}

pub struct SweepArgs {
    pub model: PathBuf,
    pub eps: Vec<f64>,
    pub orders: Vec<usize>,
    pub u_node: usize,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct SweepSummary {
    u: f64,
    per_order_slopes: Vec<(usize, f64)>,
}

pub fn run_residual_sweep(args: &SweepArgs) -> Result<()> {
    if args.eps.is_empty() {
        return Err(Error::InvalidParameter("empty eps list".into()));
    }
    let (model, model_sha) = load_model(&args.model)?;
    let config_sha = manifest_config_sha(&args.model)?;
    let orders = effective_orders(&args.orders, &model)?;
    if args.u_node >= model.stencil.len() {
        return Err(Error::InvalidParameter(format!(
            "u-node {} out of range (stencil has {})",
            args.u_node,
            model.stencil.len()
        )));
    }
    let u = model.stencil.node(args.u_node);

    let mut csv = Csv::new(
        &config_sha,
        Some(&model_sha),
        &["order", "eps", "znorm", "floor", "corrected"],
    );
    let mut plots = Vec::new();
    let mut slopes = Vec::new();
    for &m in &orders {
        let tm = model.truncated(m);
        let floor = residual(&tm, u, 0.0)?.znorm;
        let mut pts = Vec::new();
        for &e in &args.eps {
            let z = residual(&tm, u, e)?.znorm;
            let corrected = residual_corrected(&tm, u, e)?;
            csv.row_mixed(&[
                CsvField::Int(m as i64),
                CsvField::Float(e),
                CsvField::Float(z),
                CsvField::Float(floor),
                CsvField::Float(corrected),
            ]);
            pts.push((e, corrected));
        }
        let slope = loglog_slope(
            &pts.iter().map(|p| p.0).collect::<Vec<_>>(),
            &pts.iter().map(|p| p.1).collect::<Vec<_>>(),
        );
        slopes.push((m, slope));
        plots.push(PlotSeries {
            label: format!("M={m} (slope {slope:.2})"),
            points: pts,
        });
    }
    csv.write(&args.out_dir.join("residual_sweep.csv"))?;
    let svg = svg_loglog(
        "Relation residual vs eps (floor-corrected)",
        "eps",
        "plateau Z-norm",
        &plots,
        &config_sha,
        Some(&model_sha),
    );
    write_atomic(&args.out_dir.join("residual_sweep.svg"), svg.as_bytes())?;
    write_json(
        &args.out_dir.join("residual_sweep.json"),
        &SweepSummary {
            u,
            per_order_slopes: slopes,
        },
        &config_sha,
        Some(&model_sha),
    )?;
    Ok(())
}

pub struct SimulateArgs {
    pub model: PathBuf,
    pub xi0: f64,
    pub u0: f64,
    pub eps: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub snapshots: usize,
    pub out_dir: PathBuf,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let (model, model_sha) = load_model(&args.model)?;
    let config_sha = manifest_config_sha(&args.model)?;
    let dt = args.dt.unwrap_or_else(|| (args.t_end / 1000.0).min(0.01));
    let traj = integrate_modulation(&model, args.xi0, args.u0, args.eps, args.t_end, dt)?;
    let mut csv = Csv::new(&config_sha, Some(&model_sha), &["t", "xi_bar", "u_bar"]);
    for s in &traj.states {
        csv.row(&[s.t, s.xi_bar, s.u_bar]);
    }
    csv.write(&args.out_dir.join("trajectory.csv"))?;
    if args.snapshots > 0 {
        let t_last = traj.last().t;
        for k in 0..args.snapshots {
            let t = t_last * k as f64 / (args.snapshots.max(2) - 1) as f64;
            let s = traj.state_at(t);
            let st = eval_state(&model, s.xi_bar, s.u_bar, args.eps)?;
            let mut snap = Csv::new(&config_sha, Some(&model_sha), &["x", "theta", "psi"]);
            for (j, &x) in model.grids.x.nodes().iter().enumerate() {
                snap.row(&[x, st.theta[j], st.psi[j]]);
            }
            snap.write(&args.out_dir.join(format!("snapshot{k}.csv")))?;
        }
    }
    let exit = serde_json::json!({ "exit_reason": traj.exit_reason, "t_end": traj.last().t });
    write_json(
        &args.out_dir.join("simulate.json"),
        &exit,
        &config_sha,
        Some(&model_sha),
    )?;
    Ok(())
}

pub struct VerifyArgs {
    pub model: PathBuf,
    pub config: Option<PathBuf>,
    pub xi0: f64,
    pub u0: f64,
    pub eps: f64,
    pub t_end: f64,
    pub orders: Vec<usize>,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct VerifyVerdict {
    eps: f64,
    t_end: f64,
    floor: f64,
    per_order: Vec<VerifyRow>,
    monotone_in_order: bool,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyRow {
    order: usize,
    sup_deviation: f64,
    corrected: f64,
    exit_reason: ExitReason,
    t_covered: f64,
}

pub fn run_verify(args: &VerifyArgs) -> Result<()> {
    let (model, model_sha) = load_model(&args.model)?;
    let config_sha = manifest_config_sha(&args.model)?;
    let vopts = match &args.config {
        Some(p) => Config::load(p)?.0.verify_options(),
        None => Default::default(),
    };
    if args.xi0.abs() > model.xi_cap {
        return Err(Error::OutOfRange(format!(
            "initial centre {} outside plateau |xi| <= {}",
            args.xi0, model.xi_cap
        )));
    }
    let orders = effective_orders(&args.orders, &model)?;

    let floor =
        verify_invariance(&model, args.xi0, args.u0, 0.0, args.t_end, &vopts)?.sup_deviation;
    let mut csv = Csv::new(&config_sha, Some(&model_sha), &["order", "t", "deviation"]);
    let mut rows = Vec::new();
    for &m in &orders {
        let tm = model.truncated(m);
        let out = verify_invariance(&tm, args.xi0, args.u0, args.eps, args.t_end, &vopts)?;
        for s in &out.samples {
            csv.row_mixed(&[
                CsvField::Int(m as i64),
                CsvField::Float(s.t),
                CsvField::Float(s.deviation),
            ]);
        }
        rows.push(VerifyRow {
            order: m,
            sup_deviation: out.sup_deviation,
            corrected: floor_subtract(out.sup_deviation, floor),
            exit_reason: out.exit_reason,
            t_covered: out.t_covered,
        });
    }
    csv.write(&args.out_dir.join("deviations.csv"))?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].corrected <= w[0].corrected + 1e-15);
    let pass = monotone && rows.iter().all(|r| r.exit_reason != ExitReason::Error);
    write_json(
        &args.out_dir.join("verify_verdict.json"),
        &VerifyVerdict {
            eps: args.eps,
            t_end: args.t_end,
            floor,
            per_order: rows,
            monotone_in_order: monotone,
            pass,
        },
        &config_sha,
        Some(&model_sha),
    )?;
    Ok(())
}

pub struct BoundsArgs {
    pub model: PathBuf,
    pub out_dir: PathBuf,
}

pub fn run_bounds_check(args: &BoundsArgs) -> Result<()> {
    let (model, model_sha) = load_model(&args.model)?;
    let config_sha = manifest_config_sha(&args.model)?;
    let report = bounds_report(&model, 3)?;
    write_json(
        &args.out_dir.join("bounds_report.json"),
        &report,
        &config_sha,
        Some(&model_sha),
    )?;
    Ok(())
}

pub struct RescaledArgs {
    pub model: PathBuf,
    pub eps: Vec<f64>,
    pub s_end: f64,
    pub out_dir: PathBuf,
}

pub fn run_rescaled_check(args: &RescaledArgs) -> Result<()> {
    if args.eps.is_empty() {
        return Err(Error::InvalidParameter("empty eps list".into()));
    }
    let (model, model_sha) = load_model(&args.model)?;
    let config_sha = manifest_config_sha(&args.model)?;
    let report = rescaled_dynamics_check(&model, &args.eps, 0.0, 0.0, args.s_end, 0.005)?;
    let mut csv = Csv::new(
        &config_sha,
        Some(&model_sha),
        &["eps", "s", "xi_hat", "u_hat"],
    );
    for t in &report.trajectories {
        for &(s, xi, u) in &t.samples {
            csv.row(&[t.eps, s, xi, u]);
        }
    }
    csv.write(&args.out_dir.join("rescaled_trajectories.csv"))?;
    write_json(
        &args.out_dir.join("rescaled_report.json"),
        &report,
        &config_sha,
        Some(&model_sha),
    )?;
    Ok(())
}

fn effective_orders(requested: &[usize], model: &ManifoldModel) -> Result<Vec<usize>> {
    if requested.is_empty() {
        return Ok((2..=model.order).collect());
    }
    for &m in requested {
        if m < 2 || m > model.order {
            return Err(Error::InvalidParameter(format!(
                "order {m} outside the model's range 2..={}",
                model.order
            )));
        }
    }
    Ok(requested.to_vec())
}

/// The config hash recorded inside a model manifest.
fn manifest_config_sha(model_dir: &Path) -> Result<String> {
    let bytes = std::fs::read(model_dir.join("manifest.json"))?;
    let manifest: crate::model_io::ModelManifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(manifest.config_sha256)
}
