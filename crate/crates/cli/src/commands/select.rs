use std::time::Instant;

use anyhow::Result;

use lmpc_core::selection::{optimal_locality_size, SelectionConfig};

use super::load_system;
use crate::args::SelectArgs;
use crate::manifest::{write_json, RunManifest};

pub fn run(args: &SelectArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let sys = load_system(&args.system)?;
    let cfg = SelectionConfig {
        feasibility_tol: args.tol.feasibility,
        rank_tol: args.tol.rank,
        d_max: args.d_max,
        exhaustive: args.exhaustive,
    };
    let report = optimal_locality_size(&sys, args.horizon, &cfg)?;
    write_json(args.output.as_deref(), &report)?;
    for e in &report.per_d {
        let rank = e.rank.map_or_else(|| "-".to_string(), |r| r.to_string());
        eprintln!(
            "d={}  feasible={}  rank={}/{}  certified={}  construct={:.3}s (per subsystem {:.3}s)  rank={:.3}s",
            e.d, e.all_feasible, rank, e.target, e.certified, e.wall_time_construct, e.wall_time_construct_max, e.wall_time_rank
        );
    }
    match (report.d_optimal, &report.diagnostic) {
        (Some(d), _) => eprintln!("optimal locality size d = {d}"),
        (None, Some(msg)) => eprintln!("no certified locality: {msg}"),
        (None, None) => eprintln!("no certified locality"),
    }
    let mut manifest = RunManifest::new("select", argv, args, Vec::new())?;
    manifest.outputs.extend(args.output.clone());
    manifest.timings.insert("selection".into(), report.total_time());
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())
}
