use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lmpc_core::mpc::{relative_cost_gap, rolling_horizon_sim, Controller, ObjectiveFile, SimStatus, SimTrace};
use lmpc_core::numerics::Vector;

use super::{load_system, pattern_for};
use crate::args::{InitialStateArg, Locality, SimArgs};
use crate::manifest::{csv_writer, write_json, RunManifest};
use crate::Infeasible;

pub const TRACE_SCHEMA: &str = "lmpc-trace/1";

/// Stream of the seed's generator reserved for initial states.
const X0_STREAM: u64 = 4;

#[derive(Serialize)]
struct TraceSummary {
    realized_cost: f64,
    steps: usize,
    status: SimStatus,
    dynamics_residual: f64,
    total_iterations: usize,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Comparison {
    d: Locality,
    horizon: usize,
    steps: usize,
    x0: Vec<f64>,
    localized: TraceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    global: Option<TraceSummary>,
    /// `|cost_loc - cost_glob| / max(1, cost_glob)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_gap: Option<f64>,
}

fn initial_state(arg: &InitialStateArg, n_x: usize, seed: u64) -> Result<Vector> {
    Ok(match arg {
        InitialStateArg::Ones => Vector::from_element(n_x, 1.0),
        InitialStateArg::Zeros => Vector::zeros(n_x),
        InitialStateArg::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(X0_STREAM);
            Vector::from_fn(n_x, |_, _| rng.random_range(-2.0..=2.0))
        }
        InitialStateArg::Values(v) => {
            anyhow::ensure!(v.len() == n_x, "x0 has {} entries, system has {n_x} states", v.len());
            Vector::from_column_slice(v)
        }
    })
}

fn trace_path(output: &Path, tag: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.{tag}.csv"))
}

fn write_trace(path: &Path, trace: &SimTrace) -> Result<()> {
    let n_x = trace.states.first().map_or(0, Vec::len);
    let n_u = trace.inputs.first().map_or(0, Vec::len);
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["tau".to_string()];
    header.extend((0..n_x).map(|i| format!("x{i}")));
    header.extend((0..n_u).map(|j| format!("u{j}")));
    header.extend(["step_cost".to_string(), "cum_cost".to_string()]);
    w.write_record(&header)?;
    for t in 0..trace.steps() {
        let mut row = vec![t.to_string()];
        row.extend(trace.states[t].iter().map(f64::to_string));
        row.extend(trace.inputs[t].iter().map(f64::to_string));
        row.push(trace.stage_costs[t].to_string());
        row.push(trace.cumulative_costs[t].to_string());
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(args: &SimArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let sys = load_system(&args.system)?;
    let objective = match &args.objective {
        Some(p) => ObjectiveFile::read(p).with_context(|| format!("reading objective {}", p.display()))?,
        None => ObjectiveFile::random_swing(sys.n_x(), sys.n_u(), args.seed),
    };
    let mut spec = objective.to_spec(args.horizon);
    spec.solver.eps_abs = args.tol_qp;
    spec.solver.eps_rel = args.tol_qp;
    spec.solver.max_iters = args.max_iters;
    spec = spec.with_locality(pattern_for(&sys, args.d, args.horizon)?);
    let x0 = initial_state(&args.x0, sys.n_x(), args.seed)?;

    let run_one = |controller| -> Result<(SimTrace, TraceSummary)> {
        let t0 = Instant::now();
        let trace = rolling_horizon_sim(&sys, &spec, &x0, args.steps, controller)?;
        let summary = TraceSummary {
            realized_cost: trace.realized_cost(),
            steps: trace.steps(),
            status: trace.status,
            dynamics_residual: trace.dynamics_residual(&sys),
            total_iterations: trace.iterations.iter().sum(),
            wall_time_s: t0.elapsed().as_secs_f64(),
        };
        Ok((trace, summary))
    };
    let (loc_trace, loc) = run_one(Controller::Localized)?;
    let global = if args.no_global { None } else { Some(run_one(Controller::Global)?) };
    let complete = loc_trace.completed() && global.as_ref().is_none_or(|(t, _)| t.completed());
    let relative_gap = global
        .as_ref()
        .filter(|_| complete)
        .map(|(_, g)| relative_cost_gap(loc.realized_cost, g.realized_cost));

    let mut manifest = RunManifest::new("sim", argv, args, vec![args.seed])?;
    if let Some(out) = &args.output {
        let path = trace_path(out, "localized");
        write_trace(&path, &loc_trace)?;
        manifest.outputs.push(path);
        if let Some((trace, _)) = &global {
            let path = trace_path(out, "global");
            write_trace(&path, trace)?;
            manifest.outputs.push(path);
        }
        manifest.outputs.push(out.clone());
        manifest.schemas.insert("trace".into(), TRACE_SCHEMA.into());
    }
    eprintln!("localized: cost {:.10} ({:?})", loc.realized_cost, loc.status);
    if let Some((_, g)) = &global {
        eprintln!("global:    cost {:.10} ({:?})", g.realized_cost, g.status);
    }
    if let Some(gap) = relative_gap {
        eprintln!("relative gap {gap:.3e}");
    }
    let comparison = Comparison {
        d: args.d,
        horizon: args.horizon,
        steps: args.steps,
        x0: x0.iter().copied().collect(),
        localized: loc,
        global: global.map(|(_, g)| g),
        relative_gap,
    };
    write_json(args.output.as_deref(), &comparison)?;
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())?;
    if !complete {
        return Err(Infeasible("a closed-loop step had no optimal solution; traces are partial".into()).into());
    }
    Ok(())
}
