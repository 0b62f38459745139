//! Networked LTI systems: matrices, subsystem partition, interconnection
//! graph, locality patterns and their vectorization index sets.
//!
//! Subsystem, state and input ids are 0-based throughout.

mod graph;
mod pattern;

pub use graph::{build_interconnection_graph, d_local_neighborhood, InterconnectionGraph};
pub use pattern::{build_sparsity_pattern, index_sets, IndexSets, SparsityPattern};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, Matrix};

/// Assignment of every state and input to the subsystem that owns it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemPartition {
    state_owner: Vec<usize>,
    input_owner: Vec<usize>,
    count: usize,
}

impl SubsystemPartition {
    /// The subsystem count is inferred as one past the largest state owner.
    pub fn new(state_owner: Vec<usize>, input_owner: Vec<usize>) -> Result<Self> {
        let count = state_owner.iter().max().map_or(0, |m| m + 1);
        Self::with_count(state_owner, input_owner, count)
    }

    pub fn with_count(state_owner: Vec<usize>, input_owner: Vec<usize>, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Partition("at least one subsystem is required".into()));
        }
        if let Some(&bad) = state_owner.iter().chain(&input_owner).find(|&&o| o >= count) {
            return Err(Error::Partition(format!("owner {bad} out of range for {count} subsystems")));
        }
        let mut owns_state = vec![false; count];
        for &o in &state_owner {
            owns_state[o] = true;
        }
        if let Some(i) = owns_state.iter().position(|&b| !b) {
            return Err(Error::Partition(format!("subsystem {i} owns no state")));
        }
        Ok(SubsystemPartition { state_owner, input_owner, count })
    }

    /// One subsystem per state; input `j` owned by `input_owner[j]`.
    pub fn single_state(n_x: usize, input_owner: Vec<usize>) -> Result<Self> {
        Self::with_count((0..n_x).collect(), input_owner, n_x)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn state_owner(&self) -> &[usize] {
        &self.state_owner
    }

    pub fn input_owner(&self) -> &[usize] {
        &self.input_owner
    }

    pub fn states_of(&self, i: usize) -> Vec<usize> {
        (0..self.state_owner.len()).filter(|&s| self.state_owner[s] == i).collect()
    }

    pub fn inputs_of(&self, i: usize) -> Vec<usize> {
        (0..self.input_owner.len()).filter(|&s| self.input_owner[s] == i).collect()
    }
}

/// `x(t+1) = A x(t) + B u(t)` with a subsystem partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiNetworkSystem {
    a: Matrix,
    b: Matrix,
    partition: SubsystemPartition,
}

impl LtiNetworkSystem {
    pub fn new(a: Matrix, b: Matrix, partition: SubsystemPartition) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), a.nrows())));
        }
        if partition.state_owner.len() != a.nrows() {
            return Err(Error::Dimension(format!(
                "partition covers {} states, system has {}",
                partition.state_owner.len(),
                a.nrows()
            )));
        }
        if partition.input_owner.len() != b.ncols() {
            return Err(Error::Dimension(format!(
                "partition covers {} inputs, system has {}",
                partition.input_owner.len(),
                b.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        Ok(LtiNetworkSystem { a, b, partition })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_subsystems(&self) -> usize {
        self.partition.count
    }

    /// Number of rows of the stacked closed-loop map for horizon `t`.
    pub fn n_phi(&self, horizon: usize) -> usize {
        self.n_x() * (horizon + 1) + self.n_u() * horizon
    }

    /// Same partition and input map, new state matrix.
    pub fn with_a(&self, a: Matrix) -> Result<Self> {
        Self::new(a, self.b.clone(), self.partition.clone())
    }

    /// The three-node chain used as the worked example throughout the tests.
    pub fn three_node_chain() -> Self {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 3.0, 4.0, 5.0, 0.0, 6.0, 7.0]);
        let b = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let partition = SubsystemPartition::single_state(3, vec![0, 2]).expect("valid partition");
        LtiNetworkSystem::new(a, b, partition).expect("valid system")
    }
}
