//! Random benchmark networks: linearized, discretized swing equations on an
//! `n x n` mesh whose neighboring nodes are joined with a fixed probability.
//!
//! Node `(row, col)` is subsystem `row * n + col` and owns states
//! `2i` (phase angle) and `2i + 1` (frequency). Actuated subsystems receive
//! one input acting on their frequency state.
//!
//! Randomness comes from three independent ChaCha8 streams of the same
//! seed: stream 0 draws the graph, stream 1 the physical parameters and
//! stream 2 the actuator placement, each in a fixed order.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InterconnectionGraph, LtiNetworkSystem, SubsystemPartition};
use crate::numerics::Matrix;

const MAX_GRAPH_ATTEMPTS: usize = 10_000;

const GRAPH_STREAM: u64 = 0;
const PARAMETER_STREAM: u64 = 1;
const ACTUATION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGenConfig {
    /// Mesh side length.
    pub n: usize,
    pub edge_prob: f64,
    /// Fraction of subsystems with an actuator.
    pub actuation_density: f64,
    pub dt: f64,
    pub inv_inertia: Range,
    pub damping: Range,
    pub coupling: Range,
    pub seed: u64,
    /// Rescale the discrete-time `A` to this spectral radius.
    pub target_spectral_radius: Option<f64>,
}

impl Default for GridGenConfig {
    fn default() -> Self {
        GridGenConfig {
            n: 5,
            edge_prob: 0.4,
            actuation_density: 1.0,
            dt: 0.2,
            inv_inertia: Range::new(0.0, 2.0),
            damping: Range::new(1.0, 1.5),
            coupling: Range::new(0.5, 1.0),
            seed: 0,
            target_spectral_radius: None,
        }
    }
}

impl GridGenConfig {
    pub fn with_size(n: usize, actuation_density: f64, seed: u64) -> Self {
        GridGenConfig { n, actuation_density, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.n == 0 {
            return bad("mesh side must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return bad("edge probability must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.actuation_density) {
            return bad("actuation density must lie in [0, 1]");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        for (name, r) in [("inertia", self.inv_inertia), ("damping", self.damping), ("coupling", self.coupling)] {
            if !(r.lo <= r.hi && r.lo.is_finite() && r.hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} range is not well ordered")));
            }
        }
        if let Some(rho) = self.target_spectral_radius {
            if !(rho > 0.0 && rho.is_finite()) {
                return bad("target spectral radius must be positive");
            }
        }
        Ok(())
    }
}

/// Sampled physical parameters, indexed by subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingParameters {
    pub inv_inertia: Vec<f64>,
    pub damping: Vec<f64>,
    /// `(i, j, k_ij)` for each edge with `i < j`.
    pub coupling: Vec<(usize, usize, f64)>,
    /// `k_i`, the sum of incident couplings.
    pub self_coupling: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeneratedSystem {
    pub system: LtiNetworkSystem,
    pub graph: InterconnectionGraph,
    pub params: SwingParameters,
    /// Actuated subsystems, ascending; input `j` belongs to `actuated[j]`.
    pub actuated: Vec<usize>,
    /// Graph draws needed to obtain a connected mesh.
    pub attempts: usize,
    pub config: GridGenConfig,
}

/// Mesh-adjacent pairs in draw order: horizontal then vertical per node.
fn mesh_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let i = r * n + c;
            if c + 1 < n {
                pairs.push((i, i + 1));
            }
            if r + 1 < n {
                pairs.push((i, i + n));
            }
        }
    }
    pairs
}

fn draw_connected_graph(cfg: &GridGenConfig) -> Result<(InterconnectionGraph, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(GRAPH_STREAM);
    let pairs = mesh_pairs(cfg.n);
    for attempt in 1..=MAX_GRAPH_ATTEMPTS {
        let edges: Vec<(usize, usize)> = pairs.iter().copied().filter(|_| rng.random_bool(cfg.edge_prob)).collect();
        let g = InterconnectionGraph::from_edges(cfg.n * cfg.n, &edges);
        if g.is_connected() {
            return Ok((g, attempt));
        }
    }
    Err(Error::Disconnected { attempts: MAX_GRAPH_ATTEMPTS })
}

pub fn generate_mesh_system(cfg: &GridGenConfig) -> Result<GeneratedSystem> {
    cfg.validate()?;
    let (graph, attempts) = draw_connected_graph(cfg)?;
    let nodes = cfg.n * cfg.n;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PARAMETER_STREAM);
    let inv_inertia: Vec<f64> = (0..nodes).map(|_| cfg.inv_inertia.draw(&mut rng)).collect();
    let damping: Vec<f64> = (0..nodes).map(|_| cfg.damping.draw(&mut rng)).collect();
    let coupling: Vec<(usize, usize, f64)> =
        graph.edges().into_iter().map(|(i, j)| (i, j, cfg.coupling.draw(&mut rng))).collect();
    let mut self_coupling = vec![0.0; nodes];
    for &(i, j, k) in &coupling {
        self_coupling[i] += k;
        self_coupling[j] += k;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(ACTUATION_STREAM);
    let n_act = (cfg.actuation_density * nodes as f64).round() as usize;
    let mut actuated = sample(&mut rng, nodes, n_act).into_vec();
    actuated.sort_unstable();

    let dt = cfg.dt;
    let mut a = Matrix::zeros(2 * nodes, 2 * nodes);
    for i in 0..nodes {
        let (th, om) = (2 * i, 2 * i + 1);
        a[(th, th)] = 1.0;
        a[(th, om)] = dt;
        a[(om, th)] = -self_coupling[i] * inv_inertia[i] * dt;
        a[(om, om)] = 1.0 - damping[i] * inv_inertia[i] * dt;
    }
    for &(i, j, k) in &coupling {
        a[(2 * i + 1, 2 * j)] = k * inv_inertia[i] * dt;
        a[(2 * j + 1, 2 * i)] = k * inv_inertia[j] * dt;
    }
    let mut b = Matrix::zeros(2 * nodes, n_act);
    for (col, &i) in actuated.iter().enumerate() {
        b[(2 * i + 1, col)] = 1.0;
    }
    let state_owner: Vec<usize> = (0..2 * nodes).map(|s| s / 2).collect();
    let partition = SubsystemPartition::with_count(state_owner, actuated.clone(), nodes)?;
    let mut system = LtiNetworkSystem::new(a, b, partition)?;
    if let Some(rho) = cfg.target_spectral_radius {
        system = scale_spectral_radius(&system, rho)?;
    }
    Ok(GeneratedSystem {
        system,
        graph,
        params: SwingParameters { inv_inertia, damping, coupling, self_coupling },
        actuated,
        attempts,
        config: cfg.clone(),
    })
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `A * (target / rho(A))` with `B` and the partition unchanged.
pub fn scale_spectral_radius(sys: &LtiNetworkSystem, target: f64) -> Result<LtiNetworkSystem> {
    let rho = spectral_radius(sys.a());
    if rho == 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    sys.with_a(sys.a() * (target / rho))
}
