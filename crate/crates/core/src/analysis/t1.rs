//! Closed forms and column structure for a one-step horizon.
//!
//! With `T = 1` the homogeneous map `Z_h` is available analytically and,
//! for `B = I` (or quasi-diagonal `B`), has a rigid two-nonzeros-per-row
//! structure. That structure reduces the localized-set rank test to a
//! combinatorial condition on which columns of `Z_h X` the locality
//! constraints zero out.
//!
//! Indices here are 0-based. Row `i` of the blocked map `blkdiag(Z_h, ..)`
//! is entry `i` of `vec(Phi_2)`; column `j` is entry `j` of `vec(Phi)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IndexSets, LtiNetworkSystem, SubsystemPartition};
use crate::numerics::{Matrix, Vector};
use crate::sls::SlsOperators;

use super::{localized_set_dynamics_first, trajectory_set, LocalizedSet, Tolerances};

const STRUCTURE_TOL: f64 = 1e-9;

/// `(Z_AB^+, Z_h)` from `C = (I + B B^T)^{-1}`.
pub fn t1_closed_forms(a: &Matrix, b: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::Dimension(format!("A is {}x{}, B is {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols())));
    }
    let m = b.ncols();
    let gram = Matrix::identity(n, n) + b * b.transpose();
    let c = gram
        .cholesky()
        .expect("I + B B^T is positive definite")
        .inverse();
    let ca = &c * a;
    let btc = b.transpose() * &c;
    let mut pinv = Matrix::zeros(2 * n + m, 2 * n);
    pinv.view_mut((0, 0), (n, n)).fill_with_identity();
    pinv.view_mut((n, 0), (n, n)).copy_from(&ca);
    pinv.view_mut((n, n), (n, n)).copy_from(&c);
    pinv.view_mut((2 * n, 0), (m, n)).copy_from(&(-&btc * a));
    pinv.view_mut((2 * n, n), (m, n)).copy_from(&(-&btc));

    let mut zh = Matrix::zeros(n + m, 2 * n + m);
    zh.view_mut((0, n), (n, n)).copy_from(&(Matrix::identity(n, n) - &c));
    zh.view_mut((0, 2 * n), (n, m)).copy_from(&(&c * b));
    zh.view_mut((n, n), (m, n)).copy_from(&btc);
    zh.view_mut((n, 2 * n), (m, m)).copy_from(&(Matrix::identity(m, m) - &btc * b));
    Ok((pinv, zh))
}

/// At most one nonzero per row and per column.
pub fn is_quasi_diagonal(b: &Matrix) -> bool {
    let rows_ok = b.row_iter().all(|r| r.iter().filter(|&&v| v != 0.0).count() <= 1);
    let cols_ok = b.column_iter().all(|c| c.iter().filter(|&&v| v != 0.0).count() <= 1);
    rows_ok && cols_ok
}

/// Nonzero column pair of row `i` of the blocked map for `B = I`.
pub fn two_nonzero_columns(i: usize, n_x: usize) -> (usize, usize) {
    // 1-based row, group index n with n N_x + 1 <= row <= (n + 1) N_x.
    let row = i + 1;
    let n = i / n_x;
    let (j1, j2) = if n % 2 == 0 {
        ((n / 2 + 1) * n_x + row, (n / 2 + 2) * n_x + row)
    } else {
        ((n - 1) / 2 * n_x + row, (n + 1) / 2 * n_x + row)
    };
    (j1 - 1, j2 - 1)
}

/// Columns of `Z_h X` that are multiples of one another for input `k`
/// (0-based, `k < n_x`), for `B = I`. Excludes replicas of the zero first
/// block column.
pub fn rank_preserving_columns(k: usize, n_x: usize) -> Vec<usize> {
    let n_phi = 3 * n_x;
    (0..n_phi).filter(|n| n % 3 != 0).map(|n| n * n_x + k).collect()
}

/// Columns of the blocked map with a nonzero in some constrained row, for `B = I`.
pub fn nonzero_constraint_columns(constrained: &[usize], n_x: usize) -> BTreeSet<usize> {
    constrained
        .iter()
        .flat_map(|&i| {
            let (a, b) = two_nonzero_columns(i, n_x);
            [a, b]
        })
        .collect()
}

/// Equality of the localized and unconstrained trajectory sets for `T = 1`,
/// `B = I`: every input keeps at least one rank-preserving column outside
/// the columns touched by the constrained rows.
///
/// "Touched" refers to the blocked homogeneous map `blkdiag(Z_h, ..)`, the
/// same matrix whose constrained rows form the dynamics-first constraint
/// operator.
pub fn t1_equality_condition(constrained: &[usize], n_x: usize, n_u: usize) -> Result<bool> {
    if n_u != n_x {
        return Err(Error::InvalidArgument(format!("closed-form condition needs B = I, got {n_x} states and {n_u} inputs")));
    }
    let rows = n_x * (n_x + n_u);
    if let Some(&bad) = constrained.iter().find(|&&i| i >= rows) {
        return Err(Error::InvalidArgument(format!("constrained index {bad} out of range {rows}")));
    }
    let touched = nonzero_constraint_columns(constrained, n_x);
    Ok((0..n_u).all(|k| rank_preserving_columns(k, n_x).iter().any(|j| !touched.contains(j))))
}

/// Largest entrywise gap between `Z_h X (I - F^+ F)` and `Z_h X` with the
/// columns touched by constrained rows zeroed; `None` if the constraints
/// are infeasible.
pub fn zeroed_column_deviation(sys: &LtiNetworkSystem, idx: &IndexSets, x0: &Vector) -> Option<f64> {
    let ops = SlsOperators::new(sys, 1);
    let n_phi = ops.n_phi();
    let localized = match localized_set_dynamics_first(&ops, idx, x0, &Tolerances::default()) {
        LocalizedSet::Feasible(d) => d.basis,
        LocalizedSet::Infeasible { .. } => return None,
    };
    let mut expected = trajectory_set(&ops, x0, None).basis;
    let tail = ops.n_traj();
    for &i in &idx.constrained {
        let (block, row) = (i / tail, i % tail);
        for q in 0..n_phi {
            if ops.zh[(row, q)].abs() > STRUCTURE_TOL {
                expected.column_mut(block * n_phi + q).fill(0.0);
            }
        }
    }
    Some((localized - expected).amax())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureItem {
    pub passed: bool,
    /// First offending index with a short description.
    pub witness: Option<String>,
}

impl StructureItem {
    fn from_failure(witness: Option<String>) -> Self {
        StructureItem { passed: witness.is_none(), witness }
    }
}

/// Structure checks of the blocked homogeneous map for `T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub n_x: usize,
    pub n_u: usize,
    pub identity_input: bool,
    /// Every nonzero row has exactly two nonzeros (both 1/2 when `B = I`).
    pub row_two_nonzeros: StructureItem,
    /// Every nonzero row has exactly one other row with the same support,
    /// and the two rows are proportional (equal when `B = I`).
    pub row_unique_partner: StructureItem,
    /// Every column that is not identically zero has exactly two nonzeros.
    pub column_two_nonzeros: StructureItem,
    /// For each row's pair `(j1, j2)`, columns `j1`, `j2` of `Z_h X` are
    /// proportional (equal when `B = I`).
    pub paired_columns: StructureItem,
    /// Closed-form `(j1, j2)` formulas agree with the scan; `B = I` only.
    pub index_formula: Option<StructureItem>,
    /// Identically zero rows (unactuated states).
    pub zero_rows: Vec<usize>,
    /// Identically zero columns.
    pub zero_columns: Vec<usize>,
}

impl StructureReport {
    pub fn all_passed(&self) -> bool {
        self.row_two_nonzeros.passed
            && self.row_unique_partner.passed
            && self.column_two_nonzeros.passed
            && self.paired_columns.passed
            && self.index_formula.as_ref().is_none_or(|i| i.passed)
    }
}

/// Structure report for `B = I` with `n_x` single-state subsystems on a chain.
pub fn t1_structure_report(n_x: usize) -> Result<StructureReport> {
    if n_x == 0 {
        return Err(Error::InvalidArgument("at least one state is required".into()));
    }
    let mut a = Matrix::from_diagonal_element(n_x, n_x, 0.5);
    for i in 1..n_x {
        a[(i - 1, i)] = 1.0;
        a[(i, i - 1)] = -0.7;
    }
    let partition = SubsystemPartition::single_state(n_x, (0..n_x).collect())?;
    let sys = LtiNetworkSystem::new(a, Matrix::identity(n_x, n_x), partition)?;
    t1_structure_report_for(&sys)
}

fn proportional(a: nalgebra::DVectorView<f64>, b: nalgebra::DVectorView<f64>, require_equal: bool) -> bool {
    if require_equal {
        return (a - b).amax() <= STRUCTURE_TOL;
    }
    let (na, nb) = (a.norm(), b.norm());
    (na * nb - a.dot(&b).abs()).abs() <= STRUCTURE_TOL * (1.0 + na * nb)
}

/// Structure report for an arbitrary quasi-diagonal `B`, scanning the
/// numerically computed `Z_h`.
pub fn t1_structure_report_for(sys: &LtiNetworkSystem) -> Result<StructureReport> {
    if !is_quasi_diagonal(sys.b()) {
        return Err(Error::InvalidArgument("structure report needs a quasi-diagonal B".into()));
    }
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    let identity_input = n_u == n_x && *sys.b() == Matrix::identity(n_x, n_x);
    let ops = SlsOperators::new(sys, 1);
    let zh = &ops.zh;
    let (tail, n_phi) = (ops.n_traj(), ops.n_phi());
    let n_rows = n_x * tail;
    let n_cols = n_x * n_phi;
    let nz = |r: usize, q: usize| zh[(r, q)].abs() > STRUCTURE_TOL;
    let local_support: Vec<Vec<usize>> = (0..tail).map(|r| (0..n_phi).filter(|&q| nz(r, q)).collect()).collect();
    let row_support = |i: usize| -> Vec<usize> {
        let (block, r) = (i / tail, i % tail);
        local_support[r].iter().map(|q| block * n_phi + q).collect()
    };

    let zero_rows: Vec<usize> = (0..n_rows).filter(|&i| local_support[i % tail].is_empty()).collect();
    let live_rows: Vec<usize> = (0..n_rows).filter(|&i| !local_support[i % tail].is_empty()).collect();

    let row_two_nonzeros = StructureItem::from_failure(
        (0..n_rows)
            .filter(|&i| identity_input || !local_support[i % tail].is_empty())
            .find_map(|i| {
                let r = i % tail;
                let s = &local_support[r];
                if s.len() != 2 {
                    return Some(format!("row {i} has {} nonzeros", s.len()));
                }
                if identity_input && s.iter().any(|&q| (zh[(r, q)] - 0.5).abs() > STRUCTURE_TOL) {
                    return Some(format!("row {i} has entries other than 1/2"));
                }
                None
            }),
    );

    let row_unique_partner = StructureItem::from_failure(live_rows.iter().find_map(|&i| {
        let s = row_support(i);
        let partners: Vec<usize> = live_rows.iter().copied().filter(|&k| k != i && row_support(k) == s).collect();
        if partners.len() != 1 {
            return Some(format!("row {i} has {} rows with the same support", partners.len()));
        }
        let (ri, rk) = (i % tail, partners[0] % tail);
        if !proportional(zh.row(ri).transpose().as_view(), zh.row(rk).transpose().as_view(), identity_input) {
            return Some(format!("rows {i} and {} are not {}", partners[0], if identity_input { "equal" } else { "proportional" }));
        }
        None
    }));

    let col_count = |j: usize| -> usize {
        let q = j % n_phi;
        (0..tail).filter(|&r| nz(r, q)).count()
    };
    let zero_columns: Vec<usize> = (0..n_cols).filter(|&j| col_count(j) == 0).collect();
    let column_two_nonzeros = StructureItem::from_failure((0..n_cols).find_map(|j| {
        let c = col_count(j);
        (c != 0 && c != 2).then(|| format!("column {j} has {c} nonzeros"))
    }));

    let ones = Vector::from_element(n_x, 1.0);
    let zhx = trajectory_set(&ops, &ones, None).basis;
    let paired_columns = StructureItem::from_failure(live_rows.iter().find_map(|&i| {
        let s = row_support(i);
        if s.len() != 2 {
            return Some(format!("row {i} has no column pair"));
        }
        (!proportional(zhx.column(s[0]), zhx.column(s[1]), identity_input))
            .then(|| format!("columns {} and {} of Z_h X differ", s[0], s[1]))
    }));

    let index_formula = identity_input.then(|| {
        StructureItem::from_failure((0..n_rows).find_map(|i| {
            let (a, b) = two_nonzero_columns(i, n_x);
            let expect = vec![a.min(b), a.max(b)];
            (row_support(i) != expect).then(|| format!("row {i}: formula gives {expect:?}, scan gives {:?}", row_support(i)))
        }))
    });

    Ok(StructureReport {
        n_x,
        n_u,
        identity_input,
        row_two_nonzeros,
        row_unique_partner,
        column_two_nonzeros,
        paired_columns,
        index_formula,
        zero_rows,
        zero_columns,
    })
}
