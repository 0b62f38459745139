use serde::{Deserialize, Serialize};

use super::{build_interconnection_graph, d_local_neighborhood, LtiNetworkSystem, SubsystemPartition};
use crate::error::{Error, Result};

/// Boolean mask over the stacked closed-loop map `Phi = [Phi_x; Phi_u]`
/// (`n_phi` rows, `n_x` columns); `true` marks entries allowed to be nonzero.
///
/// Row layout: `x_0, ..., x_T` blocks of `n_x` rows, then `u_0, ..., u_{T-1}`
/// blocks of `n_u` rows. The diagonal of the leading identity block is always
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    n_x: usize,
    n_u: usize,
    horizon: usize,
    /// Column-major, `n_phi * n_x` entries.
    mask: Vec<bool>,
}

/// Owning subsystem of row `r` of `Phi`.
fn phi_row_owner(partition: &SubsystemPartition, n_x: usize, horizon: usize, r: usize) -> usize {
    let state_rows = n_x * (horizon + 1);
    if r < state_rows {
        partition.state_owner()[r % n_x]
    } else {
        partition.input_owner()[(r - state_rows) % partition.input_owner().len()]
    }
}

impl SparsityPattern {
    pub fn full(n_x: usize, n_u: usize, horizon: usize) -> Self {
        let n_phi = n_x * (horizon + 1) + n_u * horizon;
        SparsityPattern { n_x, n_u, horizon, mask: vec![true; n_phi * n_x] }
    }

    /// Pattern induced by arbitrary communication sets: column `c` may be
    /// nonzero in row `r` iff the owner of row `r` is in
    /// `neighbors[owner(c)]`. Time-invariant across blocks.
    pub fn from_neighbor_sets(sys: &LtiNetworkSystem, horizon: usize, neighbors: &[Vec<usize>]) -> Result<Self> {
        let p = sys.partition();
        if neighbors.len() != p.count() {
            return Err(Error::Dimension(format!(
                "{} neighbor sets for {} subsystems",
                neighbors.len(),
                p.count()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        let (n_x, n_u) = (sys.n_x(), sys.n_u());
        let n_phi = sys.n_phi(horizon);
        let mut member = vec![vec![false; p.count()]; p.count()];
        for (i, set) in neighbors.iter().enumerate() {
            member[i][i] = true;
            for &j in set {
                if j >= p.count() {
                    return Err(Error::InvalidArgument(format!("neighbor {j} out of range")));
                }
                member[i][j] = true;
            }
        }
        let row_owner: Vec<usize> = (0..n_phi).map(|r| phi_row_owner(p, n_x, horizon, r)).collect();
        let mut mask = Vec::with_capacity(n_phi * n_x);
        for c in 0..n_x {
            let allowed = &member[p.state_owner()[c]];
            mask.extend(row_owner.iter().map(|&o| allowed[o]));
        }
        Ok(SparsityPattern { n_x, n_u, horizon, mask })
    }

    /// Builds a pattern directly from a column-major mask; the diagonal of the
    /// identity block is forced on.
    pub fn from_mask(n_x: usize, n_u: usize, horizon: usize, mut mask: Vec<bool>) -> Result<Self> {
        let n_phi = n_x * (horizon + 1) + n_u * horizon;
        if mask.len() != n_phi * n_x {
            return Err(Error::Dimension(format!("mask has {} entries, expected {}", mask.len(), n_phi * n_x)));
        }
        for c in 0..n_x {
            mask[c * n_phi + c] = true;
        }
        Ok(SparsityPattern { n_x, n_u, horizon, mask })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_phi(&self) -> usize {
        self.n_x * (self.horizon + 1) + self.n_u * self.horizon
    }

    pub fn allowed(&self, row: usize, col: usize) -> bool {
        self.mask[col * self.n_phi() + row]
    }

    /// Column-major mask.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Rows of column `col` allowed to be nonzero, ascending.
    pub fn support_rows(&self, col: usize) -> Vec<usize> {
        let n_phi = self.n_phi();
        (0..n_phi).filter(|&r| self.mask[col * n_phi + r]).collect()
    }

    pub fn count_allowed(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Entrywise `self <= other`.
    pub fn is_subset_of(&self, other: &SparsityPattern) -> bool {
        self.mask.len() == other.mask.len() && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// d-local pattern: the owner of each row must lie in the d-hop neighborhood
/// of the owner of the column's state.
pub fn build_sparsity_pattern(sys: &LtiNetworkSystem, d: usize, horizon: usize) -> Result<SparsityPattern> {
    let g = build_interconnection_graph(sys);
    let neighbors: Vec<Vec<usize>> = (0..g.n()).map(|i| d_local_neighborhood(&g, i, d)).collect();
    SparsityPattern::from_neighbor_sets(sys, horizon, &neighbors)
}

/// Vectorization index sets of a pattern (0-based, column-major).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    /// Positions in `vec(Phi)` allowed to be nonzero.
    pub support: Vec<usize>,
    /// Positions in `vec(Phi_2)`, `Phi_2` = `Phi` without its first `n_x`
    /// rows, forced to zero.
    pub constrained: Vec<usize>,
    pub n_x: usize,
    pub n_phi: usize,
}

impl IndexSets {
    /// Number of identity-block entries excluded from the support. Together
    /// with the support and constrained sets this accounts for every entry
    /// of `Phi`.
    pub fn identity_block_excluded(&self) -> usize {
        let in_identity = self.support.iter().filter(|&&idx| idx % self.n_phi < self.n_x).count();
        self.n_x * self.n_x - in_identity
    }
}

pub fn index_sets(p: &SparsityPattern) -> IndexSets {
    let (n_x, n_phi) = (p.n_x, p.n_phi());
    let tail = n_phi - n_x;
    let mut support = Vec::with_capacity(p.count_allowed());
    let mut constrained = Vec::new();
    for c in 0..n_x {
        for r in 0..n_phi {
            let allowed = p.mask[c * n_phi + r];
            if allowed {
                support.push(c * n_phi + r);
            } else if r >= n_x {
                constrained.push(c * tail + (r - n_x));
            }
        }
    }
    IndexSets { support, constrained, n_x, n_phi }
}
