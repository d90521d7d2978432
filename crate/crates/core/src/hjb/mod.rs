//! Mayer problems `v(t_0, x_0) = inf { h(x) : x ∈ X^F(t_0, x_0) }`: value grids
//! by dynamic programming, sampled values, and the numerical counterparts of
//! the dynamic programming principle, contingent epiderivatives and viscosity
//! inequalities.

mod derivatives;
mod grid;
mod viscosity;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use derivatives::{epiderivative, subsolution_residual, EpiEstimate, EpiOptions};
pub use grid::{Reduction, ValueGrid, ValueGridSpec};
pub use viscosity::{
    check_testfunction_identity, viscosity_residual_minus, viscosity_residual_plus, IdentityDefect, TestFunction,
    TestFunctionKind, ViscosityOptions,
};

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::gelfand::StateVector;
use crate::multifunctions::{Multifunction, SetValue};
use crate::operators::{Operator, OperatorKind};
use crate::report::{HypothesisReport, ReportBuilder, Witness};
use crate::sampling::SampleRng;
use crate::trajectories::{integrate, sample_xf, History, SamplingStrategy, TimeGrid, Trajectory};
use crate::viability::{PathFunctional, System};

pub type CostFn = Arc<dyn Fn(&Trajectory) -> ExtReal + Send + Sync>;

/// Terminal cost `h` on paths over `[0, T]`.
#[derive(Clone)]
pub enum TerminalCost {
    /// `h(x) = |x(T) - target|`
    NormTarget { target: StateVector },
    /// `h(x) = 0` if `|x(t)| ≤ radius` on all of `[0, T]`, `+∞` otherwise.
    IndicatorTube { radius: f64 },
    Zero,
    Custom { label: String, eval: CostFn },
}

/// Relative slack in tube membership tests.
const TUBE_SLACK: f64 = 1e-12;

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalCost::NormTarget { target } => f.debug_struct("NormTarget").field("target", target).finish(),
            TerminalCost::IndicatorTube { radius } => f.debug_struct("IndicatorTube").field("radius", radius).finish(),
            TerminalCost::Zero => f.write_str("Zero"),
            TerminalCost::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl TerminalCost {
    pub fn tube_radius(&self) -> Option<f64> {
        match self {
            TerminalCost::IndicatorTube { radius } => Some(*radius),
            _ => None,
        }
    }

    pub fn in_tube(radius: f64, x: &StateVector) -> bool {
        x.norm() <= radius * (1.0 + TUBE_SLACK) + TUBE_SLACK
    }

    /// `h` of a path that reaches the horizon.
    pub fn eval(&self, traj: &Trajectory) -> ExtReal {
        match self {
            TerminalCost::NormTarget { target } => ExtReal::Finite((traj.final_state() - target).norm()),
            TerminalCost::IndicatorTube { radius } => {
                if traj.states().iter().all(|x| Self::in_tube(*radius, x)) {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInf
                }
            }
            TerminalCost::Zero => ExtReal::ZERO,
            TerminalCost::Custom { eval, .. } => eval(traj),
        }
    }

    /// Point the sampled feedback strategy steers towards.
    pub fn steering_target(&self, dim: usize) -> StateVector {
        match self {
            TerminalCost::NormTarget { target } => target.clone(),
            _ => StateVector::zeros(dim),
        }
    }
}

/// Problem data: dynamics, right-hand side, cost and the trajectory grid.
#[derive(Debug, Clone)]
pub struct MayerProblem {
    pub op: Operator,
    pub mf: Multifunction,
    pub cost: TerminalCost,
    pub grid: TimeGrid,
}

impl MayerProblem {
    pub fn new(op: Operator, mf: Multifunction, cost: TerminalCost, grid: TimeGrid) -> Result<Self> {
        if (grid.horizon() - op.triple().horizon()).abs() > 1e-12 * op.triple().horizon() {
            return Err(Error::InvalidInput(format!(
                "trajectory grid horizon {} differs from the triple horizon {}",
                grid.horizon(),
                op.triple().horizon()
            )));
        }
        if let TerminalCost::NormTarget { target } = &cost {
            op.triple().check_dim(target)?;
        }
        if let TerminalCost::IndicatorTube { radius } = &cost {
            if !(radius.is_finite() && *radius >= 0.0) {
                return Err(Error::InvalidInput(format!("tube radius must be finite and nonnegative, found {radius}")));
            }
        }
        Ok(MayerProblem { op, mf, cost, grid })
    }

    pub fn system(&self) -> System<'_> {
        System::new(&self.op, &self.mf, self.grid)
    }

    /// Which grid axes the value function reduces to, if any.
    ///
    /// Radial reduction needs the heat operator, a constant centered ball
    /// and a cost depending on `|x|` only; for a norm target the eigenvalues
    /// must coincide so that `|x|` evolves autonomously. Tube indicators only
    /// depend on whether `|x|` ever exceeds the radius, which the unforced
    /// flow never increases, so any heat spectrum qualifies. Up to two modes
    /// are gridded coordinatewise.
    pub fn reduction(&self) -> Result<Reduction> {
        if self.op.kind() != OperatorKind::Heat {
            return Err(Error::NotReducible("value grids need the diagonal heat operator".into()));
        }
        if matches!(self.cost, TerminalCost::Custom { .. }) {
            return Err(Error::NotReducible("custom path costs are not gridded".into()));
        }
        let tr = self.op.triple();
        let lam = tr.eigenvalues();
        let equal = lam.iter().all(|l| (l - lam[0]).abs() <= 1e-14 * lam[0]);
        if let Some(radius) = self.mf.constant_centered_radius() {
            let radial = match &self.cost {
                TerminalCost::NormTarget { target } => target.norm() == 0.0 && equal,
                TerminalCost::IndicatorTube { .. } | TerminalCost::Zero => true,
                TerminalCost::Custom { .. } => false,
            };
            if radial {
                return Ok(Reduction::Radial { lambda: lam[0], control_radius: radius });
            }
        }
        if tr.dim() <= 2 {
            return Ok(Reduction::Modal);
        }
        Err(Error::NotReducible(format!(
            "{} modes without radial symmetry of operator, right-hand side and cost",
            tr.dim()
        )))
    }
}

/// Backward dynamic programming on the reduced axes.
pub fn value_dp(problem: &MayerProblem, spec: &ValueGridSpec) -> Result<ValueFunction> {
    let grid = ValueGrid::compute(problem, spec)?;
    Ok(ValueFunction {
        problem: problem.clone(),
        grid,
    })
}

/// A value grid bundled with its problem, usable as a path functional.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    problem: MayerProblem,
    grid: ValueGrid,
}

impl ValueFunction {
    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }

    pub fn problem(&self) -> &MayerProblem {
        &self.problem
    }

    /// `v(t, x)` for a path whose history never left the tube iff `!violated`.
    pub fn eval(&self, t: f64, x: &StateVector, violated: bool) -> ExtReal {
        self.grid.eval(t, x, violated)
    }

    /// Minimizer of the one-step lookahead over the grid control set.
    pub fn optimal_control(&self, t: f64, x: &StateVector) -> StateVector {
        self.grid.lookahead_control(&self.problem, t, x)
    }

    /// Path under the lookahead feedback from the end of `history` to `T`.
    pub fn optimal_trajectory(&self, history: &History) -> Result<Trajectory> {
        let sys = self.problem.system();
        integrate(sys.op, &sys.grid, history, sys.grid.n_steps(), &sys.solver, |i, t, xs| {
            self.optimal_control(t, &xs[i])
        })
    }

    fn violated_upto(&self, traj: &Trajectory, i: usize) -> bool {
        match self.problem.cost.tube_radius() {
            Some(c) => traj.states()[..=i].iter().any(|x| !TerminalCost::in_tube(c, x)),
            None => false,
        }
    }
}

impl PathFunctional for ValueFunction {
    fn value(&self, traj: &Trajectory, i: usize) -> ExtReal {
        let violated = self.violated_upto(traj, i);
        self.grid.eval(traj.grid().node(i), traj.state(i), violated)
    }

    fn suggested_controls(&self, t: f64, x: &StateVector, _value: &SetValue) -> Vec<StateVector> {
        vec![self.optimal_control(t, x)]
    }
}

/// Strategies used by [`value_sampled`] when none are given: feedback toward
/// the cost target, bang-bang with 0 to 3 switches, random interior.
pub fn default_strategies(problem: &MayerProblem) -> Vec<SamplingStrategy> {
    let target = problem.cost.steering_target(problem.op.triple().dim());
    vec![
        SamplingStrategy::Feedback { target },
        SamplingStrategy::BangBang { switches: 0 },
        SamplingStrategy::BangBang { switches: 1 },
        SamplingStrategy::BangBang { switches: 3 },
        SamplingStrategy::RandomInterior { hold: 16 },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledValue {
    pub value: ExtReal,
    pub samples: usize,
    /// Index into the strategy list of the best trajectory.
    pub best_strategy: Option<usize>,
}

/// `min h(x)` over trajectories drawn with `strategies`; an upper estimate of
/// the value since it ranges over a subset of `X^F(t_0, x_0)`.
pub fn value_sampled(
    problem: &MayerProblem,
    history: &History,
    strategies: &[SamplingStrategy],
    n_per_strategy: usize,
    rng: &mut SampleRng,
) -> Result<SampledValue> {
    if n_per_strategy == 0 || strategies.is_empty() {
        return Err(Error::InvalidInput("value_sampled needs at least one control sample".into()));
    }
    let sys = problem.system();
    let mut best = ExtReal::PosInf;
    let mut best_strategy = None;
    let mut samples = 0;
    for (k, s) in strategies.iter().enumerate() {
        let n = match s {
            SamplingStrategy::Feedback { .. } => 1,
            _ => n_per_strategy,
        };
        for tr in sample_xf(sys.op, sys.mf, &sys.grid, history, s, n, rng, &sys.solver)? {
            samples += 1;
            let h = problem.cost.eval(&tr);
            if h < best {
                best = h;
                best_strategy = Some(k);
            }
        }
    }
    Ok(SampledValue {
        value: best,
        samples,
        best_strategy,
    })
}

/// Sampled check of the dynamic programming principle.
///
/// `dpp_nondecreasing`: `v(t, x)` never drops more than `tol` below its
/// running maximum along trajectories sampled from each start.
/// `dpp_optimal`: along the lookahead-optimal trajectory `v(t, x)` stays
/// within `tol` of `v(t_0, x_0)`.
pub fn dpp_check(
    vf: &ValueFunction,
    starts: &[History],
    n_per_start: usize,
    rng: &mut SampleRng,
    tol: f64,
) -> Result<HypothesisReport> {
    let problem = vf.problem();
    let sys = problem.system();
    let strategies = default_strategies(problem);
    let mut b = ReportBuilder::new("dynamic_programming", 0.0);
    let witness = |check: &str, t: f64, x: &StateVector, lhs: f64, rhs: f64| Witness {
        check: check.into(),
        t,
        s: None,
        x: Some(x.as_slice().to_vec()),
        y: None,
        v: None,
        lhs,
        rhs,
    };
    for history in starts {
        let mut paths = Vec::new();
        for k in 0..n_per_start {
            let s = &strategies[1 + k % (strategies.len() - 1)];
            paths.extend(sample_xf(sys.op, sys.mf, &sys.grid, history, s, 1, rng, &sys.solver)?);
        }
        for tr in &paths {
            let mut running = ExtReal::Finite(f64::NEG_INFINITY);
            for i in tr.start_index()..=tr.end_index() {
                let v = vf.value(tr, i);
                let margin = v.gap(running);
                let margin = if margin.is_nan() { 0.0 } else { margin };
                b.record(witness("dpp_nondecreasing", tr.grid().node(i), tr.state(i), margin + tol, 0.0));
                running = running.max(v);
            }
        }
        let opt = vf.optimal_trajectory(history)?;
        let v0 = vf.value(&opt, opt.start_index());
        for i in opt.start_index()..=opt.end_index() {
            let v = vf.value(&opt, i);
            let diff = v.gap(v0).abs();
            let diff = if diff.is_nan() { 0.0 } else { diff };
            b.record(witness("dpp_optimal", opt.grid().node(i), opt.state(i), tol, diff));
        }
    }
    Ok(b.finish())
}

/// Checks `u_-(t, x) ≤ u_+(t, x) + tol` on probe points.
pub fn comparison_check<L, U>(u_minus: L, u_plus: U, probes: &[(f64, StateVector)], tol: f64) -> HypothesisReport
where
    L: Fn(f64, &StateVector) -> ExtReal,
    U: Fn(f64, &StateVector) -> ExtReal,
{
    let mut b = ReportBuilder::new("comparison", tol);
    for (t, x) in probes {
        let lo = u_minus(*t, x);
        let hi = u_plus(*t, x);
        let margin = hi.gap(lo);
        b.record(Witness {
            check: "comparison".into(),
            t: *t,
            s: None,
            x: Some(x.as_slice().to_vec()),
            y: None,
            v: None,
            lhs: if margin.is_nan() { 0.0 } else { margin },
            rhs: 0.0,
        });
    }
    b.finish()
}
