//! Global and localized finite-horizon MPC with diagonal quadratic costs and
//! box constraints.
//!
//! Both problems are solved over an affine description of their trajectory
//! sets, `y = offset + basis * z` with `y = (x_1..x_T, u_0..u_{T-1})`:
//!
//! * global: the condensed dynamics, `z = (u_0..u_{T-1})`;
//! * localized: `(vec Phi)_M = w + N gamma` parametrizes the solutions of the
//!   support constraints, so the induced trajectories are
//!   `offset(x0) + range([x0_c E_c N_c])`. The QP runs over an orthonormal
//!   basis of that range and the support values are recovered afterwards.

pub mod qp;
pub mod sim;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_FEASIBILITY_TOL;
use crate::error::{Error, Result};
use crate::model::{index_sets, LtiNetworkSystem, SparsityPattern};
use crate::numerics::{Matrix, Svd, Vector};
use crate::selection::solve_column_block;
use crate::sls::build_h_k;
use crate::sls::build_zab;

pub use qp::{solve_qp, QpProblem, QpResult, QpSettings, QpStatus};
pub use sim::{relative_cost_gap, rolling_horizon_sim, Controller, SimStatus, SimTrace};

/// Closed interval; infinite ends serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(Option<f64>, Option<f64>)", into = "(Option<f64>, Option<f64>)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Interval { lo: -half_width, hi: half_width }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() || self.hi.is_finite()
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

impl From<(Option<f64>, Option<f64>)> for Interval {
    fn from((lo, hi): (Option<f64>, Option<f64>)) -> Self {
        Interval { lo: lo.unwrap_or(f64::NEG_INFINITY), hi: hi.unwrap_or(f64::INFINITY) }
    }
}

impl From<Interval> for (Option<f64>, Option<f64>) {
    fn from(i: Interval) -> Self {
        (i.lo.is_finite().then_some(i.lo), i.hi.is_finite().then_some(i.hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    pub horizon: usize,
    /// Diagonal stage state weight.
    pub q: Vec<f64>,
    /// Diagonal stage input weight.
    pub r: Vec<f64>,
    pub q_terminal: Vec<f64>,
    /// Applied to `x_1..x_T`.
    pub state_bounds: Vec<Interval>,
    pub input_bounds: Vec<Interval>,
    pub locality: Option<SparsityPattern>,
    pub solver: QpSettings,
}

impl MpcSpec {
    /// Unconstrained LQR-type problem with `Q_T = Q`.
    pub fn lqr(horizon: usize, q: Vec<f64>, r: Vec<f64>) -> Self {
        let (n_x, n_u) = (q.len(), r.len());
        MpcSpec {
            horizon,
            q_terminal: q.clone(),
            q,
            r,
            state_bounds: vec![Interval::UNBOUNDED; n_x],
            input_bounds: vec![Interval::UNBOUNDED; n_u],
            locality: None,
            solver: QpSettings::default(),
        }
    }

    pub fn with_state_bounds(mut self, bounds: Vec<Interval>) -> Self {
        self.state_bounds = bounds;
        self
    }

    pub fn with_input_bounds(mut self, bounds: Vec<Interval>) -> Self {
        self.input_bounds = bounds;
        self
    }

    pub fn with_locality(mut self, pattern: SparsityPattern) -> Self {
        self.locality = Some(pattern);
        self
    }

    pub fn validate(&self, sys: &LtiNetworkSystem) -> Result<()> {
        let (n_x, n_u) = (sys.n_x(), sys.n_u());
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        for (name, len, want) in [
            ("q", self.q.len(), n_x),
            ("q_terminal", self.q_terminal.len(), n_x),
            ("r", self.r.len(), n_u),
            ("state_bounds", self.state_bounds.len(), n_x),
            ("input_bounds", self.input_bounds.len(), n_u),
        ] {
            if len != want {
                return Err(Error::Dimension(format!("{name} has {len} entries, expected {want}")));
            }
        }
        if let Some(w) = self.q.iter().chain(&self.r).chain(&self.q_terminal).find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("weight {w} is not a nonnegative number")));
        }
        if let Some(b) = self.state_bounds.iter().chain(&self.input_bounds).find(|b| !(b.lo <= 0.0 && 0.0 <= b.hi)) {
            return Err(Error::InvalidArgument(format!("bound [{}, {}] must contain the origin", b.lo, b.hi)));
        }
        if let Some(p) = &self.locality {
            if (p.n_x(), p.n_u(), p.horizon()) != (n_x, n_u, self.horizon) {
                return Err(Error::Dimension("locality pattern does not match system and horizon".into()));
            }
        }
        Ok(())
    }

    /// Diagonal weights on `y` and the matching bounds.
    fn stacked(&self) -> (Vector, Vec<Interval>) {
        let (n_x, n_u, t) = (self.q.len(), self.r.len(), self.horizon);
        let mut w = Vec::with_capacity(n_x * t + n_u * t);
        let mut b = Vec::with_capacity(w.capacity());
        for step in 1..=t {
            w.extend_from_slice(if step == t { &self.q_terminal } else { &self.q });
            b.extend_from_slice(&self.state_bounds);
        }
        for _ in 0..t {
            w.extend_from_slice(&self.r);
            b.extend_from_slice(&self.input_bounds);
        }
        (Vector::from_vec(w), b)
    }

    pub fn stage_cost(&self, x: &Vector, u: &Vector) -> f64 {
        quad(&self.q, x) + quad(&self.r, u)
    }
}

fn quad(w: &[f64], v: &Vector) -> f64 {
    w.iter().zip(v.iter()).map(|(w, v)| w * v * v).sum()
}

/// JSON objective file: diagonal weights and per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveFile {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    /// Defaults to `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_terminal: Option<Vec<f64>>,
    /// Defaults to unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bounds: Option<Vec<Interval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bounds: Option<Vec<Interval>>,
}

impl ObjectiveFile {
    /// Random weights from `U[0.5, 2]` and the swing-grid bounds: phase
    /// angles (even states) in `[-4, 4]`, frequencies (odd states) in
    /// `[-20, 20]`, inputs unbounded.
    pub fn random_swing(n_x: usize, n_u: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        let q: Vec<f64> = (0..n_x).map(|_| rng.random_range(0.5..=2.0)).collect();
        let r = (0..n_u).map(|_| rng.random_range(0.5..=2.0)).collect();
        let state_bounds = (0..n_x).map(|i| Interval::symmetric(if i % 2 == 0 { 4.0 } else { 20.0 })).collect();
        ObjectiveFile { q_terminal: Some(q.clone()), q, r, state_bounds: Some(state_bounds), input_bounds: None }
    }

    pub fn to_spec(&self, horizon: usize) -> MpcSpec {
        let mut spec = MpcSpec::lqr(horizon, self.q.clone(), self.r.clone());
        if let Some(qt) = &self.q_terminal {
            spec.q_terminal = qt.clone();
        }
        if let Some(b) = &self.state_bounds {
            spec.state_bounds = b.clone();
        }
        if let Some(b) = &self.input_bounds {
            spec.input_bounds = b.clone();
        }
        spec
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

impl From<QpStatus> for SolveStatus {
    fn from(s: QpStatus) -> Self {
        match s {
            QpStatus::Optimal => SolveStatus::Optimal,
            QpStatus::MaxIters => SolveStatus::MaxIters,
            QpStatus::PrimalInfeasible => SolveStatus::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcSolution {
    pub n_x: usize,
    pub n_u: usize,
    pub horizon: usize,
    /// `(x_1..x_T, u_0..u_{T-1})`.
    pub trajectory: Vec<f64>,
    /// `sum_{t<T} x_t'Q x_t + u_t'R u_t + x_T'Q_T x_T`, including `x_0`.
    pub cost: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Largest violation of `x_{t+1} = A x_t + B u_t` along the trajectory.
    pub dynamics_residual: f64,
    /// Localized solves only: the support values `(vec Phi)_M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_values: Option<Vec<f64>>,
}

impl MpcSolution {
    pub fn state(&self, t: usize) -> Option<Vector> {
        (1..=self.horizon).contains(&t).then(|| {
            Vector::from_column_slice(&self.trajectory[(t - 1) * self.n_x..t * self.n_x])
        })
    }

    pub fn input(&self, t: usize) -> Option<Vector> {
        (t < self.horizon).then(|| {
            let start = self.n_x * self.horizon + t * self.n_u;
            Vector::from_column_slice(&self.trajectory[start..start + self.n_u])
        })
    }

    fn infeasible(sys: &LtiNetworkSystem, horizon: usize, primal_residual: f64) -> Self {
        MpcSolution {
            n_x: sys.n_x(),
            n_u: sys.n_u(),
            horizon,
            trajectory: vec![0.0; (sys.n_x() + sys.n_u()) * horizon],
            cost: f64::INFINITY,
            status: SolveStatus::Infeasible,
            primal_residual,
            dual_residual: 0.0,
            iterations: 0,
            dynamics_residual: 0.0,
            support_values: None,
        }
    }
}

fn dynamics_residual(sys: &LtiNetworkSystem, horizon: usize, x0: &Vector, y: &Vector) -> f64 {
    let (n_x, n_u) = (sys.n_x(), sys.n_u());
    let mut prev = x0.clone();
    let mut worst = 0.0f64;
    for t in 0..horizon {
        let u = y.rows(n_x * horizon + t * n_u, n_u);
        let x = y.rows(t * n_x, n_x).into_owned();
        worst = worst.max((&x - (sys.a() * &prev + sys.b() * u)).amax());
        prev = x;
    }
    worst
}

/// Solves the MPC QP over `y = offset + basis * z`.
fn solve_affine(
    sys: &LtiNetworkSystem,
    spec: &MpcSpec,
    x0: &Vector,
    offset: &Vector,
    basis: &Matrix,
    warm: Option<(&Vector, &Vector)>,
) -> Result<(MpcSolution, Option<QpResult>)> {
    let (w, bounds) = spec.stacked();
    let constant = quad(&spec.q, x0);
    let bounded: Vec<usize> = (0..bounds.len()).filter(|&i| bounds[i].is_bounded()).collect();
    let finish = |y: Vector, status: SolveStatus, prim: f64, dual: f64, iterations: usize| MpcSolution {
        n_x: sys.n_x(),
        n_u: sys.n_u(),
        horizon: spec.horizon,
        cost: constant + y.iter().zip(w.iter()).map(|(y, w)| w * y * y).sum::<f64>(),
        dynamics_residual: dynamics_residual(sys, spec.horizon, x0, &y),
        trajectory: y.iter().copied().collect(),
        status,
        primal_residual: prim,
        dual_residual: dual,
        iterations,
        support_values: None,
    };
    let n = basis.ncols();
    if n == 0 {
        let violation = bounded
            .iter()
            .map(|&i| (bounds[i].lo - offset[i]).max(offset[i] - bounds[i].hi).max(0.0))
            .fold(0.0, f64::max);
        let feasible = violation <= spec.solver.eps_abs;
        let status = if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible };
        return Ok((finish(offset.clone(), status, violation, 0.0, 0), None));
    }
    let mut weighted = basis.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let p = basis.tr_mul(&weighted) * 2.0;
    let q = weighted.tr_mul(offset) * 2.0;
    let c = basis.select_rows(bounded.iter());
    let l = Vector::from_iterator(bounded.len(), bounded.iter().map(|&i| bounds[i].lo - offset[i]));
    let u = Vector::from_iterator(bounded.len(), bounded.iter().map(|&i| bounds[i].hi - offset[i]));
    let prob = QpProblem::new((&p + p.transpose()) * 0.5, q, c, l, u)?;
    let res = solve_qp(&prob, &spec.solver, warm)?;
    let y = offset + basis * &res.x;
    let sol = finish(y, res.status.into(), res.primal_residual, res.dual_residual, res.iterations);
    Ok((sol, Some(res)))
}

/// Condensed dynamics: `y = free(x0) + M u`.
pub fn condensed_dynamics(sys: &LtiNetworkSystem, horizon: usize, x0: &Vector) -> (Vector, Matrix) {
    let (n_x, n_u, t) = (sys.n_x(), sys.n_u(), horizon);
    let n_traj = (n_x + n_u) * t;
    let mut offset = Vector::zeros(n_traj);
    let mut basis = Matrix::zeros(n_traj, n_u * t);
    // Powers A^k B for k < T.
    let mut impulse = Vec::with_capacity(t);
    let mut ab = sys.b().clone();
    let mut x = x0.clone();
    for step in 0..t {
        x = sys.a() * x;
        offset.rows_mut(step * n_x, n_x).copy_from(&x);
        impulse.push(ab.clone());
        ab = sys.a() * ab;
    }
    for s in 0..t {
        for step in s + 1..=t {
            basis.view_mut(((step - 1) * n_x, s * n_u), (n_x, n_u)).copy_from(&impulse[step - 1 - s]);
        }
        basis.view_mut((n_x * t + s * n_u, s * n_u), (n_u, n_u)).fill_with_identity();
    }
    (offset, basis)
}

fn check_x0(sys: &LtiNetworkSystem, x0: &Vector) -> Result<()> {
    if x0.len() != sys.n_x() {
        return Err(Error::Dimension(format!("x0 has {} entries, expected {}", x0.len(), sys.n_x())));
    }
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "x0", row: i, col: 0 });
    }
    Ok(())
}

pub fn solve_global(sys: &LtiNetworkSystem, spec: &MpcSpec, x0: &Vector) -> Result<MpcSolution> {
    solve_global_warm(sys, spec, x0, None).map(|(s, _)| s)
}

pub(crate) fn solve_global_warm(
    sys: &LtiNetworkSystem,
    spec: &MpcSpec,
    x0: &Vector,
    warm: Option<(&Vector, &Vector)>,
) -> Result<(MpcSolution, Option<QpResult>)> {
    spec.validate(sys)?;
    check_x0(sys, x0)?;
    let (offset, basis) = condensed_dynamics(sys, spec.horizon, x0);
    solve_affine(sys, spec, x0, &offset, &basis, warm)
}

/// Solution data of one column of `Phi`: `(vec Phi)_c = w + N gamma`.
#[derive(Debug, Clone)]
struct ColumnParam {
    /// Rows of `Phi` in the support of this column.
    rows: Vec<usize>,
    particular: Vector,
    null_basis: Matrix,
}

/// Orthonormal basis of the trajectory directions reachable from initial
/// states with a given zero pattern, and the map back to `gamma`.
#[derive(Debug)]
struct RangeCache {
    basis: Matrix,
    /// `gamma' = coeff * z` (min-norm) over the active columns' null bases.
    coeff: Matrix,
}

/// Localized MPC over a fixed locality pattern. The support-constraint
/// solutions depend only on the pattern, so they are computed once; range
/// bases are cached per zero pattern of the initial state.
#[derive(Debug)]
pub struct LocalizedMpc {
    n_x: usize,
    n_u: usize,
    horizon: usize,
    columns: Vec<ColumnParam>,
    residual: f64,
    feasible: bool,
    cache: Mutex<HashMap<Vec<bool>, Arc<RangeCache>>>,
}

impl LocalizedMpc {
    pub fn new(sys: &LtiNetworkSystem, pattern: &SparsityPattern, feasibility_tol: f64) -> Result<Self> {
        let horizon = pattern.horizon();
        if (pattern.n_x(), pattern.n_u()) != (sys.n_x(), sys.n_u()) || horizon == 0 {
            return Err(Error::Dimension("locality pattern does not match system".into()));
        }
        let zab = build_zab(sys, horizon);
        let hk = build_h_k(&zab, sys.n_x(), &index_sets(pattern));
        let mut residual = 0.0f64;
        let columns = hk
            .blocks
            .iter()
            .map(|blk| {
                let s = solve_column_block(blk.h.as_view(), blk.k.as_view());
                residual = residual.max(s.residual);
                ColumnParam { rows: blk.rows.clone(), particular: s.particular, null_basis: s.null_basis }
            })
            .collect();
        Ok(LocalizedMpc {
            n_x: sys.n_x(),
            n_u: sys.n_u(),
            horizon,
            columns,
            residual,
            feasible: residual <= feasibility_tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    pub fn feasibility_residual(&self) -> f64 {
        self.residual
    }

    fn n_traj(&self) -> usize {
        (self.n_x + self.n_u) * self.horizon
    }

    /// `E_c v`: support entries of one column placed in trajectory rows.
    fn embed(&self, rows: &[usize], v: &Vector, out: &mut Vector, scale: f64) {
        for (p, &r) in rows.iter().enumerate() {
            if r >= self.n_x {
                out[r - self.n_x] += scale * v[p];
            }
        }
    }

    fn range(&self, active: &[bool]) -> Arc<RangeCache> {
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(active) {
            return Arc::clone(hit);
        }
        let cols: usize = self.columns.iter().zip(active).filter(|(_, a)| **a).map(|(c, _)| c.null_basis.ncols()).sum();
        let mut g = Matrix::zeros(self.n_traj(), cols);
        let mut c0 = 0;
        for (col, _) in self.columns.iter().zip(active).filter(|(_, a)| **a) {
            for (p, &r) in col.rows.iter().enumerate() {
                if r >= self.n_x {
                    g.view_mut((r - self.n_x, c0), (1, col.null_basis.ncols())).copy_from(&col.null_basis.row(p));
                }
            }
            c0 += col.null_basis.ncols();
        }
        let svd = Svd::new(&g);
        let basis = svd.range_basis(None);
        let mut coeff = svd.row_space_basis(None);
        for (k, mut c) in coeff.column_iter_mut().enumerate() {
            c /= svd.singular_values()[k];
        }
        let entry = Arc::new(RangeCache { basis, coeff });
        self.cache.lock().expect("cache poisoned").insert(active.to_vec(), Arc::clone(&entry));
        entry
    }

    /// Dimension of the localized trajectory set from `x0`.
    pub fn dimension(&self, x0: &Vector) -> usize {
        let active: Vec<bool> = x0.iter().map(|v| *v != 0.0).collect();
        self.range(&active).basis.ncols()
    }

    pub fn solve(&self, sys: &LtiNetworkSystem, spec: &MpcSpec, x0: &Vector) -> Result<MpcSolution> {
        self.solve_warm(sys, spec, x0, None).map(|(s, _)| s)
    }

    pub(crate) fn solve_warm(
        &self,
        sys: &LtiNetworkSystem,
        spec: &MpcSpec,
        x0: &Vector,
        warm: Option<(&Vector, &Vector)>,
    ) -> Result<(MpcSolution, Option<QpResult>)> {
        spec.validate(sys)?;
        check_x0(sys, x0)?;
        if spec.horizon != self.horizon {
            return Err(Error::Dimension(format!("spec horizon {} but pattern horizon {}", spec.horizon, self.horizon)));
        }
        if !self.feasible {
            return Ok((MpcSolution::infeasible(sys, spec.horizon, self.residual), None));
        }
        let mut offset = Vector::zeros(self.n_traj());
        for (c, col) in self.columns.iter().enumerate() {
            self.embed(&col.rows, &col.particular, &mut offset, x0[c]);
        }
        let active: Vec<bool> = x0.iter().map(|v| *v != 0.0).collect();
        let range = self.range(&active);
        let (mut sol, res) = solve_affine(sys, spec, x0, &offset, &range.basis, warm)?;
        let z = res.as_ref().map_or_else(|| Vector::zeros(0), |r| r.x.clone());
        let gamma = &range.coeff * z;
        let mut support = Vec::new();
        let mut g0 = 0;
        for (c, col) in self.columns.iter().enumerate() {
            let mut s = col.particular.clone();
            if active[c] {
                let k = col.null_basis.ncols();
                s += &col.null_basis * gamma.rows(g0, k) / x0[c];
                g0 += k;
            }
            support.extend(s.iter().copied());
        }
        sol.support_values = Some(support);
        Ok((sol, res))
    }
}

pub fn solve_localized(sys: &LtiNetworkSystem, spec: &MpcSpec, x0: &Vector) -> Result<MpcSolution> {
    let pattern = spec
        .locality
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("localized MPC needs a locality pattern".into()))?;
    LocalizedMpc::new(sys, pattern, DEFAULT_FEASIBILITY_TOL)?.solve(sys, spec, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sparsity_pattern, SubsystemPartition};
    use crate::sls::build_augmented_state;

    fn scalar(a: f64) -> LtiNetworkSystem {
        LtiNetworkSystem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, 1.0),
            SubsystemPartition::single_state(1, vec![0]).unwrap(),
        )
        .unwrap()
    }

    fn x0_of(v: &[f64]) -> Vector {
        Vector::from_column_slice(v)
    }

    #[test]
    fn zero_initial_state_gives_zero_cost() {
        let sys = LtiNetworkSystem::three_node_chain();
        let spec = MpcSpec::lqr(3, vec![1.0; 3], vec![1.0; 2]);
        let sol = solve_global(&sys, &spec, &Vector::zeros(3)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.cost.abs() < 1e-12);
        assert!(sol.trajectory.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn scalar_one_step_lqr() {
        // min x0^2 + u^2 + qT (a x0 + u)^2  =>  u = -qT a x0 / (1 + qT).
        for (a, qt, x0) in [(2.0, 1.0, 1.5), (0.5, 3.0, -2.0), (-1.2, 0.25, 4.0)] {
            let mut spec = MpcSpec::lqr(1, vec![1.0], vec![1.0]);
            spec.q_terminal = vec![qt];
            let sol = solve_global(&scalar(a), &spec, &x0_of(&[x0])).unwrap();
            let u = sol.input(0).unwrap()[0];
            assert!((u + qt * a * x0 / (1.0 + qt)).abs() < 1e-8, "u = {u}");
            let cost = x0 * x0 + qt * a * a * x0 * x0 / (1.0 + qt);
            assert!((sol.cost - cost).abs() < 1e-8);
        }
    }

    #[test]
    fn active_input_box() {
        let spec = MpcSpec::lqr(1, vec![1.0], vec![1.0]).with_input_bounds(vec![Interval::symmetric(1.0)]);
        let sol = solve_global(&scalar(1.0), &spec, &x0_of(&[10.0])).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.input(0).unwrap()[0] + 1.0).abs() < 1e-8);
        assert!((sol.state(1).unwrap()[0] - 9.0).abs() < 1e-8);
    }

    #[test]
    fn unreachable_state_box_is_infeasible() {
        let spec = MpcSpec::lqr(1, vec![1.0], vec![1.0])
            .with_input_bounds(vec![Interval::symmetric(1.0)])
            .with_state_bounds(vec![Interval::symmetric(2.0)]);
        let sol = solve_global(&scalar(1.0), &spec, &x0_of(&[10.0])).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn spec_validation() {
        let sys = LtiNetworkSystem::three_node_chain();
        let bad_weight = MpcSpec::lqr(2, vec![1.0, -1.0, 1.0], vec![1.0; 2]);
        assert!(bad_weight.validate(&sys).is_err());
        let no_origin = MpcSpec::lqr(2, vec![1.0; 3], vec![1.0; 2]).with_input_bounds(vec![Interval::new(0.5, 1.0); 2]);
        assert!(no_origin.validate(&sys).is_err());
        let wrong_len = MpcSpec::lqr(2, vec![1.0; 2], vec![1.0; 2]);
        assert!(matches!(wrong_len.validate(&sys), Err(Error::Dimension(_))));
        let pattern = build_sparsity_pattern(&sys, 1, 3).unwrap();
        let wrong_t = MpcSpec::lqr(2, vec![1.0; 3], vec![1.0; 2]).with_locality(pattern);
        assert!(wrong_t.validate(&sys).is_err());
    }

    #[test]
    fn chain_localized_matches_global() {
        let sys = LtiNetworkSystem::three_node_chain();
        let x0 = x0_of(&[1.0, -0.5, 2.0]);
        // d = 1 is certified at T = 1; d = 2 covers the whole chain.
        for (d, horizon) in [(1, 1), (2, 3)] {
            let pattern = build_sparsity_pattern(&sys, d, horizon).unwrap();
            let spec = MpcSpec::lqr(horizon, vec![1.0, 2.0, 0.5], vec![1.5, 0.7])
                .with_input_bounds(vec![Interval::symmetric(3.0); 2])
                .with_locality(pattern);
            let glob = solve_global(&sys, &spec, &x0).unwrap();
            let loc = solve_localized(&sys, &spec, &x0).unwrap();
            assert_eq!(loc.status, SolveStatus::Optimal);
            assert!((loc.cost - glob.cost).abs() <= 1e-6 * (1.0 + glob.cost), "T={horizon}: {} vs {}", loc.cost, glob.cost);
            assert!(loc.dynamics_residual < 1e-6);
        }
    }

    #[test]
    fn support_values_satisfy_constraints_and_induce_trajectory() {
        let sys = LtiNetworkSystem::three_node_chain();
        let horizon = 1;
        let pattern = build_sparsity_pattern(&sys, 1, horizon).unwrap();
        let idx = index_sets(&pattern);
        let spec = MpcSpec::lqr(horizon, vec![1.0; 3], vec![1.0; 2]).with_locality(pattern);
        let x0 = x0_of(&[0.3, 0.0, -1.0]);
        let sol = solve_localized(&sys, &spec, &x0).unwrap();
        let s = Vector::from_vec(sol.support_values.clone().unwrap());
        let zab = build_zab(&sys, horizon);
        let hk = build_h_k(&zab, 3, &idx);
        assert!((hk.h_dense() * &s - hk.k()).amax() < 1e-9);
        let x2 = build_augmented_state(&x0, zab.ncols(), true).select_columns(idx.support.iter());
        let y = x2 * &s;
        assert!((y - Vector::from_vec(sol.trajectory.clone())).amax() < 1e-9);
    }

    #[test]
    fn full_pattern_equals_global() {
        let sys = LtiNetworkSystem::three_node_chain();
        let spec = MpcSpec::lqr(3, vec![1.0; 3], vec![1.0; 2])
            .with_state_bounds(vec![Interval::symmetric(15.0); 3])
            .with_locality(SparsityPattern::full(3, 2, 3));
        let x0 = x0_of(&[1.0, 1.0, 1.0]);
        let glob = solve_global(&sys, &spec, &x0).unwrap();
        let loc = solve_localized(&sys, &spec, &x0).unwrap();
        assert_eq!((glob.status, loc.status), (SolveStatus::Optimal, SolveStatus::Optimal));
        assert!((loc.cost - glob.cost).abs() <= 1e-6 * (1.0 + glob.cost));
    }

    #[test]
    fn infeasible_pattern_reported() {
        // Decentralized control of the chain cannot satisfy the dynamics.
        let sys = LtiNetworkSystem::three_node_chain();
        let pattern = build_sparsity_pattern(&sys, 0, 1).unwrap();
        let spec = MpcSpec::lqr(1, vec![1.0; 3], vec![1.0; 2]).with_locality(pattern.clone());
        let ctl = LocalizedMpc::new(&sys, &pattern, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(!ctl.is_feasible());
        let sol = solve_localized(&sys, &spec, &x0_of(&[1.0; 3])).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.support_values.is_none());
    }

    #[test]
    fn missing_pattern_is_an_error() {
        let sys = LtiNetworkSystem::three_node_chain();
        let spec = MpcSpec::lqr(1, vec![1.0; 3], vec![1.0; 2]);
        assert!(solve_localized(&sys, &spec, &x0_of(&[1.0; 3])).is_err());
    }

    #[test]
    fn condensed_dynamics_reproduce_rollout() {
        let sys = LtiNetworkSystem::three_node_chain();
        let x0 = x0_of(&[0.5, -1.0, 0.25]);
        let (offset, basis) = condensed_dynamics(&sys, 3, &x0);
        let u = Vector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let y = offset + basis * &u;
        assert!(dynamics_residual(&sys, 3, &x0, &y) < 1e-12);
        assert_eq!(y.rows(9, 6).into_owned(), u);
    }

    #[test]
    fn objective_file_round_trip() {
        let obj = ObjectiveFile::random_swing(4, 2, 9);
        let text = serde_json::to_string(&obj).unwrap();
        assert!(text.contains("[-4.0,4.0]") && text.contains("[-20.0,20.0]"));
        let back: ObjectiveFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, obj);
        assert!(obj.q.iter().chain(&obj.r).all(|w| (0.5..=2.0).contains(w)));
        let spec = back.to_spec(5);
        assert_eq!(spec.input_bounds, vec![Interval::UNBOUNDED; 2]);
        let open: ObjectiveFile = serde_json::from_str(r#"{"q":[1],"r":[1],"state_bounds":[[null,3.0]]}"#).unwrap();
        assert_eq!(open.state_bounds.unwrap()[0], Interval::new(f64::NEG_INFINITY, 3.0));
    }
}
