//! System-level-synthesis operators for the finite-horizon closed-loop map.
//!
//! `Phi = [Phi_x; Phi_u]` maps the initial state to the stacked trajectory
//! `x_0..x_T, u_0..u_{T-1}` and is feasible iff `Z_AB Phi = [I; 0]`. The
//! blocked operators (`blkdiag(Z, .., Z)` acting on `vec(Phi)`, column-major)
//! are kept as per-column blocks, materialized only on request.

use crate::model::{IndexSets, LtiNetworkSystem, SubsystemPartition};
use crate::numerics::{block_diag, Matrix, Svd, Vector};

/// `Z_AB = [I - Z A_hat, -Z B_hat]`, of size `n_x(T+1) x n_phi`.
pub fn build_zab(sys: &LtiNetworkSystem, horizon: usize) -> Matrix {
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    let rows = n_x * (horizon + 1);
    let mut zab = Matrix::zeros(rows, sys.n_phi(horizon));
    for t in 0..=horizon {
        for i in 0..n_x {
            zab[(t * n_x + i, t * n_x + i)] = 1.0;
        }
        if t > 0 {
            zab.view_mut((t * n_x, (t - 1) * n_x), (n_x, n_x)).copy_from(&(-sys.a()));
            zab.view_mut((t * n_x, rows + (t - 1) * n_u), (n_x, n_u)).copy_from(&(-sys.b()));
        }
    }
    zab
}

/// `Z_AB`, its pseudoinverse, and the trajectory-row operators
/// `Z_p = (Z_AB^+)_{n_x:, :} [I; 0]` and `Z_h = (I - Z_AB^+ Z_AB)_{n_x:, :}`,
/// all derived from one SVD of `Z_AB`.
#[derive(Debug, Clone)]
pub struct SlsOperators {
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub zab: Matrix,
    pub zab_pinv: Matrix,
    pub zp: Matrix,
    pub zh: Matrix,
}

impl SlsOperators {
    pub fn new(sys: &LtiNetworkSystem, horizon: usize) -> Self {
        let zab = build_zab(sys, horizon);
        let (zab_pinv, zp, zh) = build_zp_zh(&zab, sys.n_x());
        SlsOperators { horizon, n_x: sys.n_x(), n_u: sys.n_u(), zab, zab_pinv, zp, zh }
    }

    pub fn n_phi(&self) -> usize {
        self.zab.ncols()
    }

    /// Rows of a trajectory `y = [x_1..x_T; u]`.
    pub fn n_traj(&self) -> usize {
        self.n_phi() - self.n_x
    }
}

/// Returns `(Z_AB^+, Z_p, Z_h)`.
pub fn build_zp_zh(zab: &Matrix, n_x: usize) -> (Matrix, Matrix, Matrix) {
    let n_phi = zab.ncols();
    let svd = Svd::new(zab);
    let pinv = svd.pseudo_inverse(None);
    let zp = pinv.view((n_x, 0), (n_phi - n_x, n_x)).into_owned();
    let proj = svd.null_projector(None);
    let zh = proj.rows(n_x, n_phi - n_x).into_owned();
    (pinv, zp, zh)
}

/// `X(x0) = [(x0)_1 I, .., (x0)_{n_x} I]` with `I` of size `n_phi`, so that
/// `Lambda x0 = X vec(Lambda)`. With `drop_first_block` the first `n_x` rows
/// are removed, giving `X_2`.
pub fn build_augmented_state(x0: &Vector, n_phi: usize, drop_first_block: bool) -> Matrix {
    let n_x = x0.len();
    let skip = if drop_first_block { n_x } else { 0 };
    let mut x = Matrix::zeros(n_phi - skip, n_x * n_phi);
    for c in 0..n_x {
        for r in skip..n_phi {
            x[(r - skip, c * n_phi + r)] = x0[c];
        }
    }
    x
}

/// Rows of `F = (Z_h^blk)_{L, :}` belonging to one column of `Phi_2`.
#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub column: usize,
    /// Constrained rows of column `column` of `Phi_2`, ascending.
    pub rows: Vec<usize>,
    /// `Z_h` restricted to `rows`.
    pub f: Matrix,
    /// `-(Z_p)_{rows, column}`.
    pub g: Vector,
}

/// Locality constraints in the dynamics-first form `F vec(Lambda) = g`.
#[derive(Debug, Clone)]
pub struct ConstraintOperators {
    pub n_x: usize,
    pub n_phi: usize,
    pub blocks: Vec<ConstraintBlock>,
}

impl ConstraintOperators {
    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    /// Dense `F`, `n_L x (n_x n_phi)`.
    pub fn f_dense(&self) -> Matrix {
        let mut f = Matrix::zeros(self.n_rows(), self.n_x * self.n_phi);
        let mut r = 0;
        for b in &self.blocks {
            f.view_mut((r, b.column * self.n_phi), b.f.shape()).copy_from(&b.f);
            r += b.rows.len();
        }
        f
    }

    pub fn g(&self) -> Vector {
        Vector::from_iterator(self.n_rows(), self.blocks.iter().flat_map(|b| b.g.iter().copied()))
    }
}

pub fn build_f_g(ops: &SlsOperators, idx: &IndexSets) -> ConstraintOperators {
    let (n_x, n_phi) = (ops.n_x, ops.n_phi());
    let tail = n_phi - n_x;
    let mut per_col: Vec<Vec<usize>> = vec![Vec::new(); n_x];
    for &l in &idx.constrained {
        per_col[l / tail].push(l % tail);
    }
    let blocks = per_col
        .into_iter()
        .enumerate()
        .map(|(column, rows)| ConstraintBlock {
            column,
            f: ops.zh.select_rows(rows.iter()),
            g: Vector::from_iterator(rows.len(), rows.iter().map(|&r| -ops.zp[(r, column)])),
            rows,
        })
        .collect();
    ConstraintOperators { n_x, n_phi, blocks }
}

/// Columns of `H = (Z_AB^blk)_{:, M}` belonging to one column of `Phi`.
#[derive(Debug, Clone)]
pub struct SupportBlock {
    pub column: usize,
    /// Rows of column `column` of `Phi` in the support, ascending.
    pub rows: Vec<usize>,
    /// `Z_AB` restricted to the columns `rows`.
    pub h: Matrix,
    /// `e_column`, the matching slice of `vec([I; 0])`.
    pub k: Vector,
}

/// Locality-first constraint `H (vec Phi)_M = k`.
#[derive(Debug, Clone)]
pub struct SupportOperators {
    pub n_x: usize,
    pub n_phi: usize,
    pub blocks: Vec<SupportBlock>,
}

impl SupportOperators {
    pub fn block_rows(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.h.nrows())
    }

    pub fn n_support(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn h_dense(&self) -> Matrix {
        block_diag(&self.blocks.iter().map(|b| b.h.clone()).collect::<Vec<_>>())
    }

    pub fn k(&self) -> Vector {
        let n = self.blocks.iter().map(|b| b.k.len()).sum();
        Vector::from_iterator(n, self.blocks.iter().flat_map(|b| b.k.iter().copied()))
    }
}

pub fn build_h_k(zab: &Matrix, n_x: usize, idx: &IndexSets) -> SupportOperators {
    let n_phi = zab.ncols();
    let block_rows = zab.nrows();
    let mut per_col: Vec<Vec<usize>> = vec![Vec::new(); n_x];
    for &m in &idx.support {
        per_col[m / n_phi].push(m % n_phi);
    }
    let blocks = per_col
        .into_iter()
        .enumerate()
        .map(|(column, rows)| {
            let mut k = Vector::zeros(block_rows);
            k[column] = 1.0;
            SupportBlock { column, h: zab.select_columns(rows.iter()), k, rows }
        })
        .collect();
    SupportOperators { n_x, n_phi, blocks }
}

/// The part of `(H, k)` owned by one subsystem: the blocks of every `Phi`
/// column whose state the subsystem owns.
#[derive(Debug, Clone)]
pub struct SubsystemBlock {
    pub subsystem: usize,
    /// Owned columns of `Phi`.
    pub columns: Vec<usize>,
    /// Rows of `Phi` per support entry, aligned with `support`.
    pub phi_rows: Vec<usize>,
    /// Positions in `vec(Phi)` of the block's variables, in block order.
    pub support: Vec<usize>,
    /// Row of the monolithic `H` for each row of `h`.
    pub h_rows: Vec<usize>,
    /// Number of support entries of each owned column; `h` is block
    /// diagonal with one `(rows of Z_AB) x len` block per column.
    pub column_lengths: Vec<usize>,
    pub h: Matrix,
    pub k: Vector,
}

pub fn partition_h_k(ops: &SupportOperators, partition: &SubsystemPartition) -> Vec<SubsystemBlock> {
    let block_rows = ops.block_rows();
    (0..partition.count())
        .map(|i| {
            let columns = partition.states_of(i);
            let blocks: Vec<&SupportBlock> = columns.iter().map(|&c| &ops.blocks[c]).collect();
            let h = block_diag(&blocks.iter().map(|b| b.h.clone()).collect::<Vec<_>>());
            let k_len = blocks.len() * block_rows;
            let k = Vector::from_iterator(k_len, blocks.iter().flat_map(|b| b.k.iter().copied()));
            let phi_rows = blocks.iter().flat_map(|b| b.rows.iter().copied()).collect();
            let support = blocks
                .iter()
                .flat_map(|b| b.rows.iter().map(move |&r| b.column * ops.n_phi + r))
                .collect();
            let h_rows = columns
                .iter()
                .flat_map(|&c| (0..block_rows).map(move |r| c * block_rows + r))
                .collect();
            let column_lengths = blocks.iter().map(|b| b.rows.len()).collect();
            SubsystemBlock { subsystem: i, columns, phi_rows, support, h_rows, column_lengths, h, k }
        })
        .collect()
}
