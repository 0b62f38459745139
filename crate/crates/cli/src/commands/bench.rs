use std::time::Instant;

use anyhow::Result;

use lmpc_core::gridgen::{generate_mesh_system, GridGenConfig};
use lmpc_core::selection::{optimal_locality_size, SelectionConfig};

use crate::args::BenchArgs;
use crate::manifest::{csv_writer, RunManifest};

pub const BENCH_SCHEMA: &str = "lmpc-bench/1";

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn run(args: &BenchArgs, argv: &[String]) -> Result<()> {
    anyhow::ensure!(args.reps >= 1, "--reps must be at least 1");
    let start = Instant::now();
    let mut w = csv_writer(args.output.as_deref())?;
    w.write_record([
        "n",
        "states",
        "horizon",
        "reps",
        "d_optimal",
        "total_mean_s",
        "total_std_s",
        "construct_mean_s",
        "construct_std_s",
        "construct_per_subsystem_mean_s",
        "construct_per_subsystem_std_s",
        "rank_mean_s",
        "rank_std_s",
        "rank_dominates",
    ])?;
    let cfg = SelectionConfig { feasibility_tol: args.tol.feasibility, rank_tol: args.tol.rank, ..Default::default() };
    for &n in &args.sizes {
        let sys = generate_mesh_system(&GridGenConfig::with_size(n, args.actuation, args.seed))?.system;
        for &horizon in &args.horizons {
            let (mut total, mut construct, mut per_sub, mut rank) = (vec![], vec![], vec![], vec![]);
            let mut d_opt = None;
            for _ in 0..args.reps {
                let t0 = Instant::now();
                let report = optimal_locality_size(&sys, horizon, &cfg)?;
                total.push(t0.elapsed().as_secs_f64());
                construct.push(report.per_d.iter().map(|e| e.wall_time_construct).sum());
                per_sub.push(report.per_d.iter().map(|e| e.wall_time_construct_max).sum());
                rank.push(report.per_d.iter().map(|e| e.wall_time_rank).sum());
                d_opt = report.d_optimal;
            }
            let (tm, ts) = mean_std(&total);
            let (cm, cs) = mean_std(&construct);
            let (pm, ps) = mean_std(&per_sub);
            let (rm, rs) = mean_std(&rank);
            eprintln!(
                "n={n} T={horizon}: total {tm:.3}±{ts:.3}s  construct {cm:.3}±{cs:.3}s (per subsystem {pm:.4}±{ps:.4}s)  rank {rm:.3}±{rs:.3}s"
            );
            w.write_record([
                n.to_string(),
                sys.n_x().to_string(),
                horizon.to_string(),
                args.reps.to_string(),
                d_opt.map_or_else(String::new, |d| d.to_string()),
                tm.to_string(),
                ts.to_string(),
                cm.to_string(),
                cs.to_string(),
                pm.to_string(),
                ps.to_string(),
                rm.to_string(),
                rs.to_string(),
                (rm >= pm).to_string(),
            ])?;
        }
    }
    w.flush()?;
    drop(w);
    let mut manifest = RunManifest::new("bench", argv, args, vec![args.seed])?;
    manifest.outputs.extend(args.output.clone());
    manifest.schemas.insert("bench".into(), BENCH_SCHEMA.into());
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())
}
