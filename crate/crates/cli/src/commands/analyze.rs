use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use lmpc_core::analysis::{global_performance_certificate, InitialState, PerformanceCertificate, Tolerances};

use super::{load_system, pattern_for};
use crate::args::{AnalyzeArgs, InitialStateArg, Locality};
use crate::manifest::{write_json, RunManifest};

#[derive(Serialize)]
struct AnalyzeReport {
    d: Locality,
    horizon: usize,
    x0: InitialStateArg,
    #[serde(flatten)]
    certificate: PerformanceCertificate,
}

pub fn run(args: &AnalyzeArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let sys = load_system(&args.system)?;
    let pattern = pattern_for(&sys, args.d, args.horizon)?;
    let x0 = match &args.x0 {
        InitialStateArg::Ones => InitialState::Ones,
        InitialStateArg::Zeros => InitialState::Explicit(vec![0.0; sys.n_x()]),
        InitialStateArg::Values(v) => InitialState::Explicit(v.clone()),
        InitialStateArg::Random => anyhow::bail!("analyze takes `ones` or an explicit initial state"),
    };
    let tol = Tolerances { feasibility: args.tol.feasibility, rank: args.tol.rank };
    let certificate = global_performance_certificate(&sys, &pattern, &x0, args.formulation.into(), &tol)?;
    eprintln!(
        "feasible={}  rank={}/{}  certified={}",
        certificate.feasible,
        certificate.rank_found.map_or_else(|| "-".to_string(), |r| r.to_string()),
        certificate.rank_target,
        certificate.certified_optimal
    );
    let report = AnalyzeReport { d: args.d, horizon: args.horizon, x0: args.x0.clone(), certificate };
    write_json(args.output.as_deref(), &report)?;
    let mut manifest = RunManifest::new("analyze", argv, args, Vec::new())?;
    manifest.outputs.extend(args.output.clone());
    manifest.timings.insert("construct".into(), report.certificate.wall_times.construct_s);
    manifest.timings.insert("rank".into(), report.certificate.wall_times.rank_s);
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())
}
