use std::time::Instant;

use anyhow::Result;
use serde_json::json;

use lmpc_core::gridgen::{generate_mesh_system, spectral_radius, GridGenConfig};
use lmpc_core::io::SystemFile;
use lmpc_core::mpc::ObjectiveFile;

use crate::args::GenArgs;
use crate::manifest::{write_json, RunManifest};

pub fn run(args: &GenArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let cfg = GridGenConfig {
        n: args.n,
        edge_prob: args.edge_prob,
        actuation_density: args.actuation,
        dt: args.dt,
        seed: args.seed,
        target_spectral_radius: args.spectral_radius,
        ..GridGenConfig::default()
    };
    let generated = generate_mesh_system(&cfg)?;
    let sys = &generated.system;
    let rho = spectral_radius(sys.a());
    let meta = json!({
        "generator": "swing-mesh",
        "config": cfg,
        "graph_attempts": generated.attempts,
        "edges": generated.graph.edges(),
        "actuated": generated.actuated,
        "params": generated.params,
    });
    write_json(args.output.as_deref(), &SystemFile::from_system(sys, Some(meta)))?;
    let mut manifest = RunManifest::new("gen", argv, args, vec![args.seed])?;
    manifest.outputs.extend(args.output.clone());
    if let Some(path) = &args.objective_out {
        ObjectiveFile::random_swing(sys.n_x(), sys.n_u(), args.seed).write(path)?;
        manifest.outputs.push(path.clone());
    }
    eprintln!(
        "subsystems {}  states {}  inputs {}  edges {}  spectral radius {:.6}",
        sys.n_subsystems(),
        sys.n_x(),
        sys.n_u(),
        generated.graph.edge_count(),
        rho
    );
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.finish(args.output.as_deref())
}
