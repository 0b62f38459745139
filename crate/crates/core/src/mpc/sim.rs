//! Receding-horizon closed loop: solve, apply the first input, repeat.

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_FEASIBILITY_TOL;
use crate::error::{Error, Result};
use crate::model::LtiNetworkSystem;
use crate::numerics::Vector;

use super::{solve_global_warm, LocalizedMpc, MpcSpec, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Global,
    Localized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SimStatus {
    Completed,
    /// The solve at `step` did not return an optimal solution.
    Truncated { step: usize, status: SolveStatus },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTrace {
    pub controller: Controller,
    /// `x(0) .. x(k)` for `k` applied steps.
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// `x(t)'Q x(t) + u(t)'R u(t)`.
    pub stage_costs: Vec<f64>,
    pub cumulative_costs: Vec<f64>,
    /// Optimal value of each horizon problem.
    pub predicted_costs: Vec<f64>,
    pub iterations: Vec<usize>,
    pub status: SimStatus,
}

impl SimTrace {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn realized_cost(&self) -> f64 {
        self.cumulative_costs.last().copied().unwrap_or(0.0)
    }

    pub fn completed(&self) -> bool {
        self.status == SimStatus::Completed
    }

    /// Largest `|x(t+1) - A x(t) - B u(t)|` along the trace.
    pub fn dynamics_residual(&self, sys: &LtiNetworkSystem) -> f64 {
        (0..self.steps())
            .map(|t| {
                let x = Vector::from_column_slice(&self.states[t]);
                let u = Vector::from_column_slice(&self.inputs[t]);
                let next = Vector::from_column_slice(&self.states[t + 1]);
                (next - (sys.a() * x + sys.b() * u)).amax()
            })
            .fold(0.0, f64::max)
    }
}

/// `|loc - glob| / max(1, glob)`.
pub fn relative_cost_gap(localized: f64, global: f64) -> f64 {
    (localized - global).abs() / global.max(1.0)
}

pub fn rolling_horizon_sim(
    sys: &LtiNetworkSystem,
    spec: &MpcSpec,
    x0: &Vector,
    steps: usize,
    controller: Controller,
) -> Result<SimTrace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("simulation needs at least one step".into()));
    }
    spec.validate(sys)?;
    let localized = match controller {
        Controller::Global => None,
        Controller::Localized => {
            let pattern = spec
                .locality
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("localized controller needs a locality pattern".into()))?;
            Some(LocalizedMpc::new(sys, pattern, DEFAULT_FEASIBILITY_TOL)?)
        }
    };
    let mut trace = SimTrace {
        controller,
        states: vec![x0.iter().copied().collect()],
        inputs: Vec::new(),
        stage_costs: Vec::new(),
        cumulative_costs: Vec::new(),
        predicted_costs: Vec::new(),
        iterations: Vec::new(),
        status: SimStatus::Completed,
    };
    let mut x = x0.clone();
    let mut total = 0.0;
    let mut warm: Option<(Vector, Vector)> = None;
    for step in 0..steps {
        let warm_ref = warm.as_ref().map(|(a, b)| (a, b));
        let (sol, qp) = match &localized {
            None => solve_global_warm(sys, spec, &x, warm_ref)?,
            Some(ctl) => ctl.solve_warm(sys, spec, &x, warm_ref)?,
        };
        if sol.status != SolveStatus::Optimal {
            trace.status = SimStatus::Truncated { step, status: sol.status };
            break;
        }
        warm = qp.map(|r| (r.x, r.y));
        let u = sol.input(0).expect("horizon is at least 1");
        let stage = spec.stage_cost(&x, &u);
        total += stage;
        x = sys.a() * &x + sys.b() * &u;
        trace.inputs.push(u.iter().copied().collect());
        trace.states.push(x.iter().copied().collect());
        trace.stage_costs.push(stage);
        trace.cumulative_costs.push(total);
        trace.predicted_costs.push(sol.cost);
        trace.iterations.push(sol.iterations);
    }
    Ok(trace)
}
