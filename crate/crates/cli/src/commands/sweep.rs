use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lmpc_core::gridgen::{generate_mesh_system, GridGenConfig};
use lmpc_core::selection::{optimal_locality_size, DEvaluation, LocalitySelectionReport, SelectionConfig};

use crate::args::SweepArgs;
use crate::manifest::{csv_writer, RunManifest};

pub const SWEEP_SCHEMA: &str = "lmpc-sweep/1";

/// Stream of the base seed's generator reserved for random trial settings.
const TRIAL_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, Serialize)]
struct Trial {
    index: usize,
    n: usize,
    actuation: f64,
    spectral_radius: Option<f64>,
    horizon: usize,
    seed: u64,
}

fn grid_trials(args: &SweepArgs) -> Vec<Trial> {
    let radii: Vec<Option<f64>> =
        if args.spectral_radius.is_empty() { vec![None] } else { args.spectral_radius.iter().copied().map(Some).collect() };
    let mut trials = Vec::new();
    for &n in &args.sizes {
        for &actuation in &args.actuation {
            for &spectral_radius in &radii {
                for &horizon in &args.horizons {
                    for seed in args.seed..args.seed + args.seeds {
                        trials.push(Trial { index: trials.len(), n, actuation, spectral_radius, horizon, seed });
                    }
                }
            }
        }
    }
    trials
}

fn random_trials(count: usize, base_seed: u64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(TRIAL_STREAM);
    (0..count)
        .map(|index| Trial {
            index,
            n: rng.random_range(2..=4),
            actuation: rng.random_range(0.2..=1.0),
            spectral_radius: Some(rng.random_range(0.5..=2.5)),
            horizon: rng.random_range(3..=10),
            seed: base_seed + index as u64,
        })
        .collect()
}

fn outcome(e: &DEvaluation) -> &'static str {
    match (e.all_feasible, e.certified) {
        (false, _) => "infeasible",
        (true, false) => "feasible-rank-deficient",
        (true, true) => "certified",
    }
}

fn run_trial(t: &Trial, args: &SweepArgs) -> Result<(usize, LocalitySelectionReport)> {
    let cfg = GridGenConfig {
        n: t.n,
        edge_prob: args.edge_prob,
        actuation_density: t.actuation,
        seed: t.seed,
        target_spectral_radius: t.spectral_radius,
        ..GridGenConfig::default()
    };
    let sys = generate_mesh_system(&cfg)?.system;
    let sel = SelectionConfig {
        feasibility_tol: args.tol.feasibility,
        rank_tol: args.tol.rank,
        d_max: args.d_max,
        exhaustive: args.exhaustive,
    };
    Ok((sys.n_u(), optimal_locality_size(&sys, t.horizon, &sel)?))
}

pub fn run(args: &SweepArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let trials = match args.random {
        Some(count) => random_trials(count, args.seed),
        None => grid_trials(args),
    };
    let mut w = csv_writer(args.output.as_deref())?;
    w.write_record([
        "trial",
        "n",
        "subsystems",
        "inputs",
        "actuation",
        "spectral_radius",
        "horizon",
        "seed",
        "d_optimal",
        "d_evaluated",
        "outcomes",
        "feasible_rank_deficient",
        "construct_s",
        "construct_per_subsystem_s",
        "rank_s",
        "error",
    ])?;
    let (mut failures, mut deficient_trials, mut deficient_pairs) = (0usize, 0usize, 0usize);
    for t in &trials {
        let mut row = vec![
            t.index.to_string(),
            t.n.to_string(),
            (t.n * t.n).to_string(),
        ];
        match run_trial(t, args) {
            Ok((n_u, report)) => {
                let deficient = report.per_d.iter().filter(|e| outcome(e) == "feasible-rank-deficient").count();
                deficient_pairs += deficient;
                deficient_trials += usize::from(deficient > 0);
                let outcomes: Vec<String> = report.per_d.iter().map(|e| format!("{}:{}", e.d, outcome(e))).collect();
                row.extend([
                    n_u.to_string(),
                    t.actuation.to_string(),
                    t.spectral_radius.map_or_else(String::new, |r| r.to_string()),
                    t.horizon.to_string(),
                    t.seed.to_string(),
                    report.d_optimal.map_or_else(String::new, |d| d.to_string()),
                    report.per_d.len().to_string(),
                    outcomes.join(";"),
                    deficient.to_string(),
                    report.per_d.iter().map(|e| e.wall_time_construct).sum::<f64>().to_string(),
                    report.per_d.iter().map(|e| e.wall_time_construct_max).sum::<f64>().to_string(),
                    report.per_d.iter().map(|e| e.wall_time_rank).sum::<f64>().to_string(),
                    String::new(),
                ]);
            }
            Err(err) => {
                failures += 1;
                row.extend([
                    String::new(),
                    t.actuation.to_string(),
                    t.spectral_radius.map_or_else(String::new, |r| r.to_string()),
                    t.horizon.to_string(),
                    t.seed.to_string(),
                ]);
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(format!("{err:#}"));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    drop(w);
    eprintln!(
        "trials {}  failed {}  trials with a feasible but rank-deficient d {}  (feasible, rank-deficient) pairs {}",
        trials.len(),
        failures,
        deficient_trials,
        deficient_pairs
    );
    let seeds = trials.iter().map(|t| t.seed).collect();
    let mut manifest = RunManifest::new("sweep", argv, args, seeds)?;
    manifest.outputs.extend(args.output.clone());
    manifest.schemas.insert("sweep".into(), SWEEP_SCHEMA.into());
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())
}
