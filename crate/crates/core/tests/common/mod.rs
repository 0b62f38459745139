//! Random networked systems for property and acceptance tests.
#![allow(dead_code)]

use lmpc_core::model::{LtiNetworkSystem, SubsystemPartition};
use lmpc_core::numerics::{Matrix, Vector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct NetworkShape {
    pub max_subsystems: usize,
    pub max_states_per_subsystem: usize,
    /// Probability that a subsystem carries an actuator.
    pub actuation: f64,
    pub extra_edge_prob: f64,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape { max_subsystems: 6, max_states_per_subsystem: 2, actuation: 0.6, extra_edge_prob: 0.3 }
    }
}

fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.random_range(0.2..1.0);
    if rng.random_bool(0.5) { v } else { -v }
}

/// Connected random network: a random spanning tree plus extra edges, dense
/// blocks on every edge, and at least one actuated subsystem.
pub fn random_network(seed: u64, shape: &NetworkShape) -> LtiNetworkSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=shape.max_subsystems);
    let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=shape.max_states_per_subsystem)).collect();
    let state_owner: Vec<usize> = sizes.iter().enumerate().flat_map(|(i, &s)| std::iter::repeat_n(i, s)).collect();
    let n_x = state_owner.len();
    let states_of = |i: usize| -> Vec<usize> { (0..n_x).filter(|&s| state_owner[s] == i).collect() };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((order[rng.random_range(0..k)], order[k]));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)) && rng.random_bool(shape.extra_edge_prob) {
                edges.push((i, j));
            }
        }
    }
    let mut a = Matrix::zeros(n_x, n_x);
    for i in 0..n {
        for r in states_of(i) {
            for c in states_of(i) {
                a[(r, c)] = nonzero(&mut rng);
            }
        }
    }
    for &(i, j) in &edges {
        for (p, q) in [(i, j), (j, i)] {
            for r in states_of(p) {
                for c in states_of(q) {
                    if rng.random_bool(0.7) {
                        a[(r, c)] = nonzero(&mut rng);
                    }
                }
            }
            // Keep the coupling visible in both directions.
            let (r, c) = (states_of(p)[0], states_of(q)[0]);
            if a[(r, c)] == 0.0 {
                a[(r, c)] = nonzero(&mut rng);
            }
        }
    }
    let mut actuated: Vec<usize> = (0..n).filter(|_| rng.random_bool(shape.actuation)).collect();
    if actuated.is_empty() {
        actuated.push(rng.random_range(0..n));
    }
    let mut b = Matrix::zeros(n_x, actuated.len());
    for (col, &i) in actuated.iter().enumerate() {
        let owned = states_of(i);
        b[(owned[rng.random_range(0..owned.len())], col)] = nonzero(&mut rng);
    }
    let partition = SubsystemPartition::new(state_owner, actuated).expect("valid partition");
    LtiNetworkSystem::new(a, b, partition).expect("valid system")
}

/// Uniform entries in `[-2, 2]` with at least one nonzero; each entry is
/// zeroed with probability `zero_prob`.
pub fn random_x0(rng: &mut ChaCha8Rng, n_x: usize, zero_prob: f64) -> Vector {
    let mut x = Vector::from_fn(n_x, |_, _| if rng.random_bool(zero_prob) { 0.0 } else { nonzero(rng) * 2.0 });
    if x.iter().all(|v| *v == 0.0) {
        let i = rng.random_range(0..n_x);
        x[i] = nonzero(rng);
    }
    x
}

/// `|(I - P)(y - offset)|_inf` with `P` the projector onto `range(basis)`.
pub fn affine_distance(y: &Vector, offset: &Vector, range: &Matrix) -> f64 {
    let d = y - offset;
    (&d - range * range.tr_mul(&d)).amax()
}
