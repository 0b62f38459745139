use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Serialize;

use lmpc_core::analysis::{Formulation, DEFAULT_FEASIBILITY_TOL};

#[derive(Debug, Clone, Args, Serialize)]
pub struct Tolerance {
    /// Max-norm residual bound for feasibility tests.
    #[arg(long = "tol-feas", default_value_t = DEFAULT_FEASIBILITY_TOL)]
    pub feasibility: f64,
    /// Singular value cutoff for rank decisions [default: max(m, n) * eps * sigma_max].
    #[arg(long = "tol-rank")]
    pub rank: Option<f64>,
}

/// A d-hop locality radius or the unconstrained pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Hops(usize),
    Full,
}

impl FromStr for Locality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(Locality::Full);
        }
        s.parse().map(Locality::Hops).map_err(|_| format!("expected a hop count or `full`, got `{s}`"))
    }
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locality::Hops(d) => write!(f, "{d}"),
            Locality::Full => f.write_str("full"),
        }
    }
}

impl Serialize for Locality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateArg {
    Ones,
    Zeros,
    /// Uniform on `[-2, 2]` from `--seed`.
    Random,
    Values(Vec<f64>),
}

impl FromStr for InitialStateArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ones" => Ok(InitialStateArg::Ones),
            "zeros" => Ok(InitialStateArg::Zeros),
            "random" => Ok(InitialStateArg::Random),
            list => list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(InitialStateArg::Values)
                .map_err(|_| format!("expected ones, zeros, random or a comma-separated list, got `{s}`")),
        }
    }
}

impl fmt::Display for InitialStateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialStateArg::Ones => f.write_str("ones"),
            InitialStateArg::Zeros => f.write_str("zeros"),
            InitialStateArg::Random => f.write_str("random"),
            InitialStateArg::Values(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl Serialize for InitialStateArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationArg {
    DynamicsFirst,
    LocalityFirst,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::DynamicsFirst => Formulation::DynamicsFirst,
            FormulationArg::LocalityFirst => Formulation::LocalityFirst,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    /// Mesh side length.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.4)]
    pub edge_prob: f64,
    /// Fraction of subsystems with an actuator.
    #[arg(long, default_value_t = 1.0)]
    pub actuation: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dt: f64,
    /// Rescale the discrete-time A to this spectral radius.
    #[arg(long)]
    pub spectral_radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write a random objective file drawn from `--seed`.
    #[arg(long)]
    pub objective_out: Option<PathBuf>,
    /// System file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Largest d tried [default: graph diameter].
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Evaluate every d up to d-max instead of stopping at the first certificate.
    #[arg(long)]
    pub exhaustive: bool,
    #[command(flatten)]
    pub tol: Tolerance,
    /// Report file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Hop radius or `full`.
    #[arg(long)]
    pub d: Locality,
    #[arg(long, value_enum, default_value_t = FormulationArg::LocalityFirst)]
    pub formulation: FormulationArg,
    /// `ones` or a comma-separated state.
    #[arg(long, default_value = "ones")]
    pub x0: InitialStateArg,
    #[command(flatten)]
    pub tol: Tolerance,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Objective file [default: random weights and swing bounds from --seed].
    #[arg(long)]
    pub objective: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    /// Hop radius or `full`.
    #[arg(long, default_value = "1")]
    pub d: Locality,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// `random`, `ones`, `zeros` or a comma-separated state.
    #[arg(long, default_value = "random")]
    pub x0: InitialStateArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the global reference simulation.
    #[arg(long)]
    pub no_global: bool,
    /// Absolute and relative QP termination tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_qp: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[command(flatten)]
    pub tol: Tolerance,
    /// Comparison JSON; traces go next to it as `<stem>.localized.csv` and
    /// `<stem>.global.csv` [default: JSON on stdout, no traces].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Mesh side lengths.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub sizes: Vec<usize>,
    /// Actuation densities.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub actuation: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub horizons: Vec<usize>,
    /// Spectral radii of A [default: as generated].
    #[arg(long, value_delimiter = ',')]
    pub spectral_radius: Vec<f64>,
    /// Seeds per grid point.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw this many random trials (side 2-4, actuation 0.2-1, spectral
    /// radius 0.5-2.5, horizon 3-10) instead of the grid.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    pub edge_prob: f64,
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long)]
    pub exhaustive: bool,
    #[command(flatten)]
    pub tol: Tolerance,
    /// CSV file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,5")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,15")]
    pub horizons: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub actuation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tol: Tolerance,
    /// CSV file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locality_parsing() {
        assert_eq!("full".parse::<Locality>().unwrap(), Locality::Full);
        assert_eq!("3".parse::<Locality>().unwrap(), Locality::Hops(3));
        assert!("-1".parse::<Locality>().is_err());
        assert_eq!(Locality::Hops(2).to_string(), "2");
    }

    #[test]
    fn initial_state_parsing() {
        assert_eq!("ones".parse::<InitialStateArg>().unwrap(), InitialStateArg::Ones);
        assert_eq!(
            "1, -2.5,0".parse::<InitialStateArg>().unwrap(),
            InitialStateArg::Values(vec![1.0, -2.5, 0.0])
        );
        assert!("1,a".parse::<InitialStateArg>().is_err());
        assert_eq!(InitialStateArg::Values(vec![1.0, -0.5]).to_string(), "1,-0.5");
    }
}
