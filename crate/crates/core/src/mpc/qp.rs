//! Dense convex QP solver by operator splitting (ADMM):
//!
//! ```text
//! minimize  1/2 x^T P x + q^T x   subject to  l <= C x <= u
//! ```
//!
//! Equality rows have `l = u`; infinite bounds are allowed. The iteration
//! follows the standard splitting with relaxation, Ruiz equilibration and
//! residual-balancing penalty updates. Once the iterates are accurate enough
//! to guess the active set, an equality-constrained KKT solve ("polishing")
//! is attempted and accepted only if it satisfies the KKT conditions to the
//! requested tolerance.

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inf_norm, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation in `(0, 2)`.
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Threshold of the primal infeasibility certificate.
    pub eps_prim_inf: f64,
    pub max_iters: usize,
    /// Iterations between penalty updates.
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    /// Iterations between termination checks.
    pub check_interval: usize,
    /// Iterations between early polishing attempts.
    pub polish_interval: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_prim_inf: 1e-7,
            max_iters: 50_000,
            adaptive_rho_interval: 100,
            scaling_iters: 10,
            check_interval: 10,
            polish_interval: 50,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: Matrix,
    pub q: Vector,
    pub c: Matrix,
    pub l: Vector,
    pub u: Vector,
}

impl QpProblem {
    /// Stacks equality rows `A_eq x = b_eq` above box rows `lo <= x <= hi`.
    pub fn from_parts(p: Matrix, q: Vector, a_eq: &Matrix, b_eq: &Vector, lo: &Vector, hi: &Vector) -> Result<Self> {
        let n = q.len();
        if a_eq.ncols() != n || b_eq.len() != a_eq.nrows() || lo.len() != n || hi.len() != n {
            return Err(Error::Dimension("inconsistent QP data".into()));
        }
        let me = a_eq.nrows();
        let mut c = Matrix::zeros(me + n, n);
        c.rows_mut(0, me).copy_from(a_eq);
        c.rows_mut(me, n).fill_with_identity();
        let l = Vector::from_iterator(me + n, b_eq.iter().chain(lo.iter()).copied());
        let u = Vector::from_iterator(me + n, b_eq.iter().chain(hi.iter()).copied());
        Self::new(p, q, c, l, u)
    }

    pub fn new(p: Matrix, q: Vector, c: Matrix, l: Vector, u: Vector) -> Result<Self> {
        let n = q.len();
        let m = l.len();
        if p.shape() != (n, n) || c.shape() != (m, n) || u.len() != m {
            return Err(Error::Dimension(format!(
                "P {:?}, q {}, C {:?}, l {}, u {}",
                p.shape(),
                n,
                c.shape(),
                m,
                u.len()
            )));
        }
        if let Some(i) = (0..m).find(|&i| l[i] > u[i] || l[i].is_nan() || u[i].is_nan()) {
            return Err(Error::InvalidArgument(format!("bound row {i} has l > u")));
        }
        Ok(QpProblem { p, q, c, l, u })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIters,
    PrimalInfeasible,
}

#[derive(Debug, Clone)]
pub struct QpResult {
    pub x: Vector,
    /// Multipliers of `C x`: positive on active upper bounds, negative on lower.
    pub y: Vector,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const EQ_RHO_FACTOR: f64 = 1e3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

/// Residuals of a candidate in the original problem data.
struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
}

impl Residuals {
    fn of(prob: &QpProblem, x: &Vector, z: &Vector, y: &Vector, s: &QpSettings) -> Self {
        let cx = &prob.c * x;
        let px = &prob.p * x;
        let cty = prob.c.tr_mul(y);
        let prim = inf_norm(&(&cx - z));
        let dual = inf_norm(&(&px + &prob.q + &cty));
        let eps_prim = s.eps_abs + s.eps_rel * inf_norm(&cx).max(inf_norm(z));
        let eps_dual = s.eps_abs + s.eps_rel * inf_norm(&px).max(inf_norm(&cty)).max(inf_norm(&prob.q));
        Residuals { prim, dual, eps_prim, eps_dual }
    }

    fn converged(&self) -> bool {
        self.prim <= self.eps_prim && self.dual <= self.eps_dual
    }
}

fn project(v: &Vector, l: &Vector, u: &Vector) -> Vector {
    Vector::from_fn(v.len(), |i, _| v[i].clamp(l[i], u[i]))
}

fn col_inf_norms(m: &Matrix) -> Vec<f64> {
    m.column_iter().map(|c| c.amax()).collect()
}

fn clamp_scale(v: f64) -> f64 {
    if v < SCALE_MIN {
        1.0
    } else {
        v.clamp(SCALE_MIN, SCALE_MAX)
    }
}

/// Ruiz-equilibrated data with the scalings `D` (variables), `E` (rows)
/// and the cost factor `c`.
struct Scaled {
    p: Matrix,
    q: Vector,
    c: Matrix,
    l: Vector,
    u: Vector,
    d: Vector,
    e: Vector,
    cost: f64,
}

fn scale_problem(prob: &QpProblem, iters: usize) -> Scaled {
    let (n, m) = (prob.n(), prob.m());
    let mut p = prob.p.clone();
    let mut q = prob.q.clone();
    let mut c = prob.c.clone();
    let mut d = Vector::from_element(n, 1.0);
    let mut e = Vector::from_element(m, 1.0);
    for _ in 0..iters {
        let pn = col_inf_norms(&p);
        let cn = col_inf_norms(&c);
        let dd = Vector::from_fn(n, |j, _| 1.0 / clamp_scale(pn[j].max(cn[j])).sqrt());
        let rn: Vec<f64> = c.row_iter().map(|r| r.amax()).collect();
        let de = Vector::from_fn(m, |i, _| 1.0 / clamp_scale(rn[i]).sqrt());
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..m {
                c[(i, j)] *= de[i] * dd[j];
            }
        }
        q.component_mul_assign(&dd);
        d.component_mul_assign(&dd);
        e.component_mul_assign(&de);
    }
    let mean_p = if n > 0 { col_inf_norms(&p).iter().sum::<f64>() / n as f64 } else { 0.0 };
    let cost = 1.0 / clamp_scale(mean_p.max(inf_norm(&q)));
    p *= cost;
    q *= cost;
    let l = prob.l.component_mul(&e);
    let u = prob.u.component_mul(&e);
    Scaled { p, q, c, l, u, d, e, cost }
}

fn row_rho(l: f64, u: f64, rho: f64) -> f64 {
    if l == u {
        EQ_RHO_FACTOR * rho
    } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
        RHO_MIN
    } else {
        rho
    }
}

fn factor(sc: &Scaled, rho_vec: &Vector, sigma: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = sc.q.len();
    let mut weighted = sc.c.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= rho_vec[i];
    }
    let mut k = &sc.p + sc.c.tr_mul(&weighted);
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    Cholesky::new(k).ok_or_else(|| Error::InvalidArgument("QP Hessian is not positive semidefinite".into()))
}

/// Certificate `C^T dy = 0`, `u^T dy+ + l^T dy- < 0`.
fn primal_infeasible(prob: &QpProblem, dy: &Vector, eps: f64) -> bool {
    let norm = inf_norm(dy);
    if norm <= 1e-30 {
        return false;
    }
    if inf_norm(&prob.c.tr_mul(dy)) > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let v = dy[i];
        if v > eps * norm {
            if prob.u[i] == f64::INFINITY {
                return false;
            }
            support += prob.u[i] * v;
        } else if v < -eps * norm {
            if prob.l[i] == f64::NEG_INFINITY {
                return false;
            }
            support += prob.l[i] * v;
        }
    }
    support < -eps * norm
}

/// Equality-constrained solve on the guessed active set, with iterative
/// refinement of the regularized KKT system.
fn polish(prob: &QpProblem, z: &Vector, y: &Vector, s: &QpSettings) -> Option<(Vector, Vector, Residuals)> {
    let (n, m) = (prob.n(), prob.m());
    let mut active = Vec::new();
    let mut targets = Vec::new();
    for i in 0..m {
        if prob.l[i] == prob.u[i] {
            active.push(i);
            targets.push(prob.l[i]);
        } else if prob.l[i].is_finite() && z[i] - prob.l[i] < -y[i] {
            active.push(i);
            targets.push(prob.l[i]);
        } else if prob.u[i].is_finite() && prob.u[i] - z[i] < y[i] {
            active.push(i);
            targets.push(prob.u[i]);
        }
    }
    let na = active.len();
    let delta = 1e-9;
    let mut kkt = Matrix::zeros(n + na, n + na);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    for (a, &i) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + a, j)] = prob.c[(i, j)];
            kkt[(j, n + a)] = prob.c[(i, j)];
        }
    }
    let exact = kkt.clone();
    for i in 0..n {
        kkt[(i, i)] += delta;
    }
    for a in 0..na {
        kkt[(n + a, n + a)] -= delta;
    }
    let lu = kkt.lu();
    let rhs = Vector::from_iterator(n + na, (-&prob.q).iter().copied().chain(targets.iter().copied()));
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &exact * &sol;
        if inf_norm(&r) <= 1e-14 * (1.0 + inf_norm(&rhs)) {
            break;
        }
        sol += lu.solve(&r)?;
    }
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, n).into_owned();
    let mut yp = Vector::zeros(m);
    for (a, &i) in active.iter().enumerate() {
        yp[i] = sol[n + a];
    }
    let cx = &prob.c * &x;
    let zp = project(&cx, &prob.l, &prob.u);
    let res = Residuals::of(prob, &x, &zp, &yp, s);
    // Multipliers must have the sign of the bound they hold.
    let sign_ok = active.iter().all(|&i| {
        let tol = res.eps_dual;
        if prob.l[i] == prob.u[i] {
            true
        } else if (cx[i] - prob.u[i]).abs() <= (cx[i] - prob.l[i]).abs() {
            yp[i] >= -tol
        } else {
            yp[i] <= tol
        }
    });
    (sign_ok && res.converged()).then_some((x, yp, res))
}

pub fn solve_qp(prob: &QpProblem, s: &QpSettings, warm: Option<(&Vector, &Vector)>) -> Result<QpResult> {
    let (n, m) = (prob.n(), prob.m());
    let sc = scale_problem(prob, s.scaling_iters);
    let mut rho = s.rho;
    let mut rho_vec = Vector::from_fn(m, |i, _| row_rho(sc.l[i], sc.u[i], rho));
    let mut chol = factor(&sc, &rho_vec, s.sigma)?;

    // Scaled iterates: x = D xs, z = E^-1 zs, y = E ys / c.
    let (mut xs, mut ys) = match warm {
        Some((x, y)) if x.len() == n && y.len() == m => {
            (x.component_div(&sc.d), y.component_div(&sc.e) * sc.cost)
        }
        _ => (Vector::zeros(n), Vector::zeros(m)),
    };
    let mut zs = project(&(&sc.c * &xs), &sc.l, &sc.u);
    let unscale = |xs: &Vector, zs: &Vector, ys: &Vector| {
        (xs.component_mul(&sc.d), zs.component_div(&sc.e), ys.component_mul(&sc.e) / sc.cost)
    };
    let mut y_prev_check = unscale(&xs, &zs, &ys).2;

    let finish = |x: Vector, y: Vector, status: QpStatus, it: usize, res: &Residuals, polished: bool| QpResult {
        objective: prob.objective(&x),
        x,
        y,
        status,
        iterations: it,
        primal_residual: res.prim,
        dual_residual: res.dual,
        polished,
    };

    let mut last = None;
    for it in 1..=s.max_iters {
        let rhs = &xs * s.sigma - &sc.q + sc.c.tr_mul(&(rho_vec.component_mul(&zs) - &ys));
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &sc.c * &x_tilde;
        let x_next = &x_tilde * s.alpha + &xs * (1.0 - s.alpha);
        let z_relaxed = &z_tilde * s.alpha + &zs * (1.0 - s.alpha);
        let z_next = project(&(&z_relaxed + ys.component_div(&rho_vec)), &sc.l, &sc.u);
        ys += rho_vec.component_mul(&(&z_relaxed - &z_next));
        xs = x_next;
        zs = z_next;

        let check = it % s.check_interval == 0 || it == s.max_iters;
        let rho_update = it % s.adaptive_rho_interval == 0;
        if !(check || rho_update) {
            continue;
        }
        let (x, z, y) = unscale(&xs, &zs, &ys);
        let res = Residuals::of(prob, &x, &z, &y, s);
        if check {
            let try_polish = s.polish && (res.converged() || it % s.polish_interval == 0);
            if try_polish {
                if let Some((xp, yp, rp)) = polish(prob, &z, &y, s) {
                    return Ok(finish(xp, yp, QpStatus::Optimal, it, &rp, true));
                }
            }
            if res.converged() {
                return Ok(finish(x, y, QpStatus::Optimal, it, &res, false));
            }
            let dy = &y - &y_prev_check;
            if primal_infeasible(prob, &dy, s.eps_prim_inf) {
                return Ok(finish(x, dy, QpStatus::PrimalInfeasible, it, &res, false));
            }
            y_prev_check = y.clone();
        }
        if rho_update {
            let cx = &prob.c * &x;
            let prim_scale = inf_norm(&cx).max(inf_norm(&z)).max(1e-30);
            let dual_scale = inf_norm(&(&prob.p * &x)).max(inf_norm(&prob.c.tr_mul(&y))).max(inf_norm(&prob.q)).max(1e-30);
            let ratio = ((res.prim / prim_scale) / (res.dual / dual_scale).max(1e-30)).sqrt();
            let new_rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
            if ratio.is_finite() && (new_rho > 5.0 * rho || new_rho < 0.2 * rho) {
                rho = new_rho;
                rho_vec = Vector::from_fn(m, |i, _| row_rho(sc.l[i], sc.u[i], rho));
                chol = factor(&sc, &rho_vec, s.sigma)?;
            }
        }
        last = Some((x, y, res));
    }
    let (x, y, res) = last.unwrap_or_else(|| {
        let (x, z, y) = unscale(&xs, &zs, &ys);
        let res = Residuals::of(prob, &x, &z, &y, s);
        (x, y, res)
    });
    Ok(finish(x, y, QpStatus::MaxIters, s.max_iters, &res, false))
}
