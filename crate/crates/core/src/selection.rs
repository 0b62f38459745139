//! Optimal locality size: the smallest d-hop communication pattern whose
//! localized MPC provably matches global MPC performance.
//!
//! For each candidate `d`, every subsystem independently checks that its
//! block of support constraints `H_i s = k_i` is solvable and, if so, emits
//! its nullspace projector embedded in trajectory rows (`J_i`). The pattern
//! is certified when `J = [J_1 .. J_N]` has rank `N_u T`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_FEASIBILITY_TOL;
use crate::error::{Error, Result};
use crate::model::{build_interconnection_graph, build_sparsity_pattern, index_sets, LtiNetworkSystem};
use crate::numerics::{default_rank_tolerance, inf_norm, numerical_rank, Matrix, RankResult, Svd, Vector};
use crate::sls::{build_h_k, build_zab, partition_h_k, SubsystemBlock};

#[derive(Debug, Clone)]
pub struct LocalSubmatrixResult {
    pub subsystem: usize,
    pub feasible: bool,
    /// `(N_phi - N_x) x |support_i|`; present iff feasible.
    pub j: Option<Matrix>,
    /// `E_i N_i` with `N_i` an orthonormal nullspace basis of `H_i`. Since
    /// `J_i = E_i N_i N_i^T`, concatenating these factors gives a matrix with
    /// exactly the singular values of `J` and far fewer columns.
    pub j_factor: Option<Matrix>,
    pub residual: f64,
    pub elapsed_s: f64,
}

pub(crate) struct ColumnSolve {
    pub residual: f64,
    /// Min-norm solution.
    pub particular: Vector,
    pub projector: Matrix,
    pub null_basis: Matrix,
}

/// Min-norm solve and nullspace of one column block, ignoring zero rows.
pub(crate) fn solve_column_block(h: nalgebra::DMatrixView<f64>, k: nalgebra::DVectorView<f64>) -> ColumnSolve {
    let m = h.ncols();
    let mut residual = 0.0f64;
    let live: Vec<usize> = (0..h.nrows())
        .filter(|&r| {
            let nonzero = h.row(r).iter().any(|&v| v != 0.0);
            if !nonzero {
                residual = residual.max(k[r].abs());
            }
            nonzero
        })
        .collect();
    if live.is_empty() {
        return ColumnSolve {
            residual,
            particular: Vector::zeros(m),
            projector: Matrix::identity(m, m),
            null_basis: Matrix::identity(m, m),
        };
    }
    // Pad to at least square so the thin right factor spans the nullspace.
    let rows = live.len().max(m);
    let mut reduced = Matrix::zeros(rows, m);
    let mut rhs = Vector::zeros(rows);
    for (i, &r) in live.iter().enumerate() {
        reduced.row_mut(i).copy_from(&h.row(r));
        rhs[i] = k[r];
    }
    let svd = Svd::new(&reduced);
    let w = svd.solve_min_norm(&rhs, None);
    residual = residual.max(inf_norm(&(&reduced * &w - &rhs)));
    ColumnSolve { residual, particular: w, projector: svd.null_projector(None), null_basis: svd.null_basis(None) }
}

/// Feasibility of `H_i s = k_i` and the embedded projector `E_i (I - H_i^+ H_i)`.
///
/// `H_i` is block diagonal over the subsystem's columns of `Phi`, so each
/// column block is solved on its own; identically zero rows only contribute
/// `|k|` to the residual.
pub fn local_submatrix(block: &SubsystemBlock, n_x: usize, n_traj: usize, eps: f64) -> LocalSubmatrixResult {
    let start = Instant::now();
    let n_blocks = block.column_lengths.len().max(1);
    let block_rows = block.h.nrows() / n_blocks;
    let mut solves = Vec::with_capacity(block.column_lengths.len());
    let mut c0 = 0;
    for (b, &len) in block.column_lengths.iter().enumerate() {
        let r0 = b * block_rows;
        solves.push(solve_column_block(block.h.view((r0, c0), (block_rows, len)), block.k.rows(r0, block_rows)));
        c0 += len;
    }
    let residual = solves.iter().map(|s| s.residual).fold(0.0, f64::max);
    let feasible = residual <= eps;
    let (j, j_factor) = if feasible {
        let m = block.h.ncols();
        let nullity: usize = solves.iter().map(|s| s.null_basis.ncols()).sum();
        let mut j = Matrix::zeros(n_traj, m);
        let mut factor = Matrix::zeros(n_traj, nullity);
        let (mut pos0, mut f0) = (0, 0);
        for s in &solves {
            let len = s.projector.nrows();
            for p in 0..len {
                let r = block.phi_rows[pos0 + p];
                if r >= n_x {
                    j.view_mut((r - n_x, pos0), (1, len)).copy_from(&s.projector.row(p));
                    factor.view_mut((r - n_x, f0), (1, s.null_basis.ncols())).copy_from(&s.null_basis.row(p));
                }
            }
            pos0 += len;
            f0 += s.null_basis.ncols();
        }
        (Some(j), Some(factor))
    } else {
        (None, None)
    };
    LocalSubmatrixResult {
        subsystem: block.subsystem,
        feasible,
        j,
        j_factor,
        residual,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub rank: RankResult,
    pub target: usize,
    pub certified: bool,
}

fn hcat(blocks: &[&Matrix], rows: usize) -> Matrix {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.columns_mut(c0, b.ncols()).copy_from(b);
        c0 += b.ncols();
    }
    out
}

/// `J = [J_1 .. J_N]`.
pub fn assemble_j(results: &[LocalSubmatrixResult]) -> Option<Matrix> {
    let blocks: Vec<&Matrix> = results.iter().map(|r| r.j.as_ref()).collect::<Option<_>>()?;
    Some(hcat(&blocks, blocks.first().map_or(0, |b| b.nrows())))
}

/// Compares `rank(J)` with `n_u * horizon`. The singular values are taken
/// from the concatenated nullspace factors, which share them with `J`.
pub fn assemble_and_certify(
    results: &[LocalSubmatrixResult],
    n_u: usize,
    horizon: usize,
    rank_tol: Option<f64>,
) -> Result<Certification> {
    let bad: Vec<usize> = results.iter().filter(|r| !r.feasible).map(|r| r.subsystem).collect();
    if !bad.is_empty() {
        return Err(Error::Infeasible { subsystems: bad });
    }
    let factors: Vec<&Matrix> = results.iter().filter_map(|r| r.j_factor.as_ref()).collect();
    let rows = factors.first().map_or(0, |b| b.nrows());
    let j_cols: usize = results.iter().filter_map(|r| r.j.as_ref()).map(|j| j.ncols()).sum();
    let compressed = hcat(&factors, rows);
    let mut rank = numerical_rank(&compressed, rank_tol);
    if rank_tol.is_none() {
        // Default threshold as if computed on J itself.
        let sigma_max = rank.singular_values.first().copied().unwrap_or(0.0);
        rank.tolerance_used = default_rank_tolerance(rows, j_cols, sigma_max);
        rank.rank = rank.singular_values.iter().filter(|&&s| s > rank.tolerance_used).count();
    }
    let target = n_u * horizon;
    Ok(Certification { certified: rank.rank == target, rank, target })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub feasibility_tol: f64,
    pub rank_tol: Option<f64>,
    /// Largest `d` tried; defaults to the graph diameter (at least 1).
    pub d_max: Option<usize>,
    /// Keep evaluating past the first certifying `d`.
    pub exhaustive: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { feasibility_tol: DEFAULT_FEASIBILITY_TOL, rank_tol: None, d_max: None, exhaustive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DEvaluation {
    pub d: usize,
    pub all_feasible: bool,
    pub infeasible_subsystems: Vec<usize>,
    pub max_residual: f64,
    /// Absent when some subsystem is infeasible.
    pub rank: Option<usize>,
    pub target: usize,
    pub certified: bool,
    /// Pattern, operators and all local submatrices, run as scheduled.
    pub wall_time_construct: f64,
    /// Slowest single subsystem: the construct time with one worker per subsystem.
    pub wall_time_construct_max: f64,
    pub wall_time_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalitySelectionReport {
    pub d_optimal: Option<usize>,
    pub per_d: Vec<DEvaluation>,
    pub x0_mode: String,
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub n_subsystems: usize,
    pub d_max: usize,
    pub feasibility_tol: f64,
    pub rank_tol: Option<f64>,
    pub diagnostic: Option<String>,
}

impl LocalitySelectionReport {
    pub fn total_time(&self) -> f64 {
        self.per_d.iter().map(|e| e.wall_time_construct + e.wall_time_rank).sum()
    }
}

/// Evaluates the `d`-local pattern: per-subsystem feasibility and, if all
/// pass, the rank certificate.
pub fn evaluate_locality(
    sys: &LtiNetworkSystem,
    zab: &Matrix,
    horizon: usize,
    d: usize,
    cfg: &SelectionConfig,
) -> Result<DEvaluation> {
    let n_x = sys.n_x();
    let n_traj = zab.ncols() - n_x;
    let start = Instant::now();
    let pattern = build_sparsity_pattern(sys, d, horizon)?;
    let idx = index_sets(&pattern);
    let ops = build_h_k(zab, n_x, &idx);
    let blocks = partition_h_k(&ops, sys.partition());
    let results: Vec<LocalSubmatrixResult> =
        blocks.par_iter().map(|b| local_submatrix(b, n_x, n_traj, cfg.feasibility_tol)).collect();
    let wall_time_construct = start.elapsed().as_secs_f64();
    let wall_time_construct_max = results.iter().map(|r| r.elapsed_s).fold(0.0, f64::max);
    let infeasible: Vec<usize> = results.iter().filter(|r| !r.feasible).map(|r| r.subsystem).collect();
    let max_residual = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    let target = sys.n_u() * horizon;
    let start = Instant::now();
    let (rank, certified) = if infeasible.is_empty() {
        let c = assemble_and_certify(&results, sys.n_u(), horizon, cfg.rank_tol)?;
        (Some(c.rank.rank), c.certified)
    } else {
        (None, false)
    };
    Ok(DEvaluation {
        d,
        all_feasible: infeasible.is_empty(),
        infeasible_subsystems: infeasible,
        max_residual,
        rank,
        target,
        certified,
        wall_time_construct,
        wall_time_construct_max,
        wall_time_rank: start.elapsed().as_secs_f64(),
    })
}

pub fn optimal_locality_size(sys: &LtiNetworkSystem, horizon: usize, cfg: &SelectionConfig) -> Result<LocalitySelectionReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let graph = build_interconnection_graph(sys);
    let d_max = cfg.d_max.unwrap_or_else(|| graph.diameter().max(1));
    let zab = build_zab(sys, horizon);
    let mut per_d = Vec::new();
    let mut d_optimal = None;
    for d in 1..=d_max {
        let eval = evaluate_locality(sys, &zab, horizon, d, cfg)?;
        let certified = eval.certified;
        per_d.push(eval);
        if certified && d_optimal.is_none() {
            d_optimal = Some(d);
            if !cfg.exhaustive {
                break;
            }
        }
    }
    let diagnostic = d_optimal.is_none().then(|| {
        if d_max == 0 {
            "empty search range: d_max is 0".to_string()
        } else if !graph.is_connected() {
            format!("no d <= {d_max} certifies; the interconnection graph is disconnected")
        } else {
            format!("no d <= {d_max} certifies")
        }
    });
    Ok(LocalitySelectionReport {
        d_optimal,
        per_d,
        x0_mode: "ones".into(),
        horizon,
        n_x: sys.n_x(),
        n_u: sys.n_u(),
        n_subsystems: sys.n_subsystems(),
        d_max,
        feasibility_tol: cfg.feasibility_tol,
        rank_tol: cfg.rank_tol,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{localized_set_locality_first, Tolerances};
    use crate::gridgen::{generate_mesh_system, GridGenConfig};
    use crate::model::{SparsityPattern, SubsystemPartition};

    #[test]
    fn chain_selects_one() {
        let sys = LtiNetworkSystem::three_node_chain();
        let rep = optimal_locality_size(&sys, 1, &SelectionConfig::default()).unwrap();
        assert_eq!(rep.d_optimal, Some(1));
        assert_eq!(rep.per_d.len(), 1);
        assert_eq!(rep.per_d[0].rank, Some(2));
        let empty = optimal_locality_size(&sys, 1, &SelectionConfig { d_max: Some(0), ..Default::default() }).unwrap();
        assert!(empty.d_optimal.is_none() && empty.diagnostic.is_some() && empty.per_d.is_empty());
    }

    #[test]
    fn chain_blocks_feasible_and_match_monolithic() {
        let sys = LtiNetworkSystem::three_node_chain();
        let zab = build_zab(&sys, 1);
        let idx = index_sets(&build_sparsity_pattern(&sys, 1, 1).unwrap());
        let blocks = partition_h_k(&build_h_k(&zab, 3, &idx), sys.partition());
        let results: Vec<_> = blocks.iter().map(|b| local_submatrix(b, 3, 5, 1e-8)).collect();
        assert!(results.iter().all(|r| r.feasible && r.j.is_some()));
        let mono = localized_set_locality_first(&zab, 3, &idx, &Vector::from_element(3, 1.0), &Tolerances::default());
        let mono = mono.descriptor().unwrap().basis.clone();
        // Single-state subsystems keep the column order of the monolithic matrix.
        let mut c0 = 0;
        for r in &results {
            let j = r.j.as_ref().unwrap();
            assert!((j - mono.columns(c0, j.ncols())).amax() < 1e-9);
            c0 += j.ncols();
        }
        let cert = assemble_and_certify(&results, 2, 1, None).unwrap();
        assert!(cert.certified && cert.rank.rank == 2);
        let j = assemble_j(&results).unwrap();
        let direct = numerical_rank(&j, None);
        for (a, b) in direct.singular_values.iter().zip(&cert.rank.singular_values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsingular_block_has_no_freedom() {
        let block = SubsystemBlock {
            subsystem: 0,
            columns: vec![0],
            phi_rows: vec![0, 1],
            support: vec![0, 1],
            h_rows: vec![0, 1],
            column_lengths: vec![2],
            h: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]),
            k: Vector::from_vec(vec![1.0, 0.0]),
        };
        let r = local_submatrix(&block, 1, 1, 1e-8);
        assert!(r.feasible);
        assert!(r.j.unwrap().amax() < 1e-12);
    }

    #[test]
    fn refusal_names_infeasible_subsystems() {
        let sys = LtiNetworkSystem::three_node_chain();
        let zab = build_zab(&sys, 2);
        let idx = index_sets(&build_sparsity_pattern(&sys, 0, 2).unwrap());
        let blocks = partition_h_k(&build_h_k(&zab, 3, &idx), sys.partition());
        let results: Vec<_> = blocks.iter().map(|b| local_submatrix(b, 3, zab.ncols() - 3, 1e-8)).collect();
        let bad: Vec<usize> = results.iter().filter(|r| !r.feasible).map(|r| r.subsystem).collect();
        assert!(!bad.is_empty());
        match assemble_and_certify(&results, 2, 2, None) {
            Err(Error::Infeasible { subsystems }) => assert_eq!(subsystems, bad),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn full_pattern_certifies() {
        let sys = LtiNetworkSystem::three_node_chain();
        let zab = build_zab(&sys, 3);
        let idx = index_sets(&SparsityPattern::full(3, 2, 3));
        let blocks = partition_h_k(&build_h_k(&zab, 3, &idx), sys.partition());
        let results: Vec<_> = blocks.iter().map(|b| local_submatrix(b, 3, zab.ncols() - 3, 1e-8)).collect();
        assert!(assemble_and_certify(&results, 2, 3, None).unwrap().certified);
    }

    #[test]
    fn fully_actuated_grid_selects_one() {
        let g = generate_mesh_system(&GridGenConfig::with_size(4, 1.0, 2)).unwrap();
        let rep = optimal_locality_size(&g.system, 5, &SelectionConfig::default()).unwrap();
        assert_eq!(rep.d_optimal, Some(1));
    }

    fn pendulum_chain() -> LtiNetworkSystem {
        // Six two-state pendula on a line, actuators on every other node.
        let n = 6;
        let mut a = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(2 * i, 2 * i)] = 1.0;
            a[(2 * i, 2 * i + 1)] = 0.2;
            a[(2 * i + 1, 2 * i)] = -0.3;
            a[(2 * i + 1, 2 * i + 1)] = 0.8;
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    a[(2 * i + 1, 2 * j)] = 0.15;
                }
            }
        }
        let actuated = [0, 2, 4];
        let mut b = Matrix::zeros(2 * n, 3);
        for (c, &i) in actuated.iter().enumerate() {
            b[(2 * i + 1, c)] = 1.0;
        }
        let part = SubsystemPartition::new((0..2 * n).map(|s| s / 2).collect(), actuated.to_vec()).unwrap();
        LtiNetworkSystem::new(a, b, part).unwrap()
    }

    #[test]
    fn half_actuated_chain_needs_wider_locality() {
        let sys = pendulum_chain();
        let horizon = 3;
        let rep = optimal_locality_size(&sys, horizon, &SelectionConfig { exhaustive: true, ..Default::default() }).unwrap();
        // Monolithic oracle over d = 1, 2, 3.
        let zab = build_zab(&sys, horizon);
        let ones = Vector::from_element(sys.n_x(), 1.0);
        let oracle: Vec<bool> = (1..=3)
            .map(|d| {
                let idx = index_sets(&build_sparsity_pattern(&sys, d, horizon).unwrap());
                localized_set_locality_first(&zab, sys.n_x(), &idx, &ones, &Tolerances::default())
                    .descriptor()
                    .is_some_and(|s| s.dimension.rank == sys.n_u() * horizon)
            })
            .collect();
        let first = oracle.iter().position(|&c| c).map(|p| p + 1);
        assert_eq!(rep.d_optimal, first);
        assert!(rep.d_optimal.unwrap() >= 2);
        for e in &rep.per_d {
            if e.d <= 3 {
                assert_eq!(e.certified, oracle[e.d - 1], "d = {}", e.d);
            }
        }
    }

    #[test]
    fn deterministic_reports() {
        let g = generate_mesh_system(&GridGenConfig::with_size(3, 0.6, 5)).unwrap();
        let cfg = SelectionConfig { exhaustive: true, ..Default::default() };
        let strip = |r: LocalitySelectionReport| -> Vec<(usize, bool, Option<usize>, bool)> {
            r.per_d.iter().map(|e| (e.d, e.all_feasible, e.rank, e.certified)).collect()
        };
        let a = strip(optimal_locality_size(&g.system, 4, &cfg).unwrap());
        let b = strip(optimal_locality_size(&g.system, 4, &cfg).unwrap());
        assert_eq!(a, b);
    }
}
