//! Quasi-tangency searches, ε-approximate solutions and viable trajectories.
//!
//! Tangency is existential over infinitely many selections, so a failed
//! search is reported as inconclusive; only analytic oracles can turn a
//! failure into a proof of non-viability.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::gelfand::StateVector;
use crate::multifunctions::{Multifunction, SetValue, TOL_F};
use crate::operators::Operator;
use crate::report::{HypothesisReport, ReportBuilder, Witness};
use crate::trajectories::{dinf_distance, solve_forced, History, SolverOptions, TimeGrid, Trajectory};

pub const TOL_K: f64 = 1e-6;
pub const TOL_U: f64 = 1e-8;

pub type DistanceFn = Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>;
pub type ProjectionFn = Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>;

/// A closed constraint set `K ⊂ H`.
#[derive(Clone)]
pub enum ConstraintSet {
    HBall { center: StateVector, radius: f64 },
    Whole,
    Custom {
        label: String,
        dist: DistanceFn,
        projection: Option<ProjectionFn>,
    },
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSet::HBall { center, radius } => f
                .debug_struct("HBall")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            ConstraintSet::Whole => f.write_str("Whole"),
            ConstraintSet::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl ConstraintSet {
    pub fn ball(center: StateVector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) || !center.is_finite() {
            return Err(Error::InvalidInput(format!("constraint ball needs finite data, radius {radius}")));
        }
        Ok(ConstraintSet::HBall { center, radius })
    }

    pub fn dist(&self, x: &StateVector) -> f64 {
        match self {
            ConstraintSet::HBall { center, radius } => ((x - center).norm() - radius).max(0.0),
            ConstraintSet::Whole => 0.0,
            ConstraintSet::Custom { dist, .. } => dist(x),
        }
    }

    /// Negative inside a ball; equals [`dist`](Self::dist) for other sets.
    pub fn signed_distance(&self, x: &StateVector) -> f64 {
        match self {
            ConstraintSet::HBall { center, radius } => (x - center).norm() - radius,
            _ => self.dist(x),
        }
    }

    pub fn contains(&self, x: &StateVector, tol: f64) -> bool {
        self.dist(x) <= tol
    }

    pub fn project(&self, x: &StateVector) -> Option<StateVector> {
        match self {
            ConstraintSet::HBall { center, radius } => {
                let d = x - center;
                let n = d.norm();
                Some(if n <= *radius { x.clone() } else { center + &d.scaled(radius / n) })
            }
            ConstraintSet::Whole => Some(x.clone()),
            ConstraintSet::Custom { projection, .. } => projection.as_ref().map(|p| p(x)),
        }
    }

    pub fn center(&self) -> Option<&StateVector> {
        match self {
            ConstraintSet::HBall { center, .. } => Some(center),
            _ => None,
        }
    }
}

/// A nonanticipating functional `u(t, x)` on paths, evaluated at grid nodes.
pub trait PathFunctional: Sync {
    /// `u(t_i, x)`; only `traj.states()[..=i]` may be used.
    fn value(&self, traj: &Trajectory, i: usize) -> ExtReal;

    /// Controls worth trying first from state `x` at time `t`, as points of `value`.
    fn suggested_controls(&self, _t: f64, _x: &StateVector, _value: &SetValue) -> Vec<StateVector> {
        Vec::new()
    }

    /// Constraint set whose indicator this functional encodes, if any.
    fn constraint(&self) -> Option<&ConstraintSet> {
        None
    }
}

/// `u(t, x) = -1` if `x(t) ∈ K` (within `tol`), `0` otherwise.
#[derive(Debug, Clone)]
pub struct IndicatorFunctional {
    pub set: ConstraintSet,
    pub tol: f64,
}

impl IndicatorFunctional {
    pub fn new(set: ConstraintSet) -> Self {
        IndicatorFunctional { set, tol: TOL_K }
    }
}

impl PathFunctional for IndicatorFunctional {
    fn value(&self, traj: &Trajectory, i: usize) -> ExtReal {
        if self.set.contains(traj.state(i), self.tol) {
            ExtReal::Finite(-1.0)
        } else {
            ExtReal::ZERO
        }
    }

    fn constraint(&self) -> Option<&ConstraintSet> {
        Some(&self.set)
    }
}

/// Functional given by a closure of `(t_i, path, i)`.
pub struct FnFunctional<F>(pub F);

impl<F> PathFunctional for FnFunctional<F>
where
    F: Fn(f64, &Trajectory, usize) -> ExtReal + Sync,
{
    fn value(&self, traj: &Trajectory, i: usize) -> ExtReal {
        (self.0)(traj.grid().node(i), traj, i)
    }
}

/// Operator, right-hand side, grid and solver settings of one inclusion.
#[derive(Debug, Clone, Copy)]
pub struct System<'a> {
    pub op: &'a Operator,
    pub mf: &'a Multifunction,
    pub grid: TimeGrid,
    pub solver: SolverOptions,
}

impl<'a> System<'a> {
    pub fn new(op: &'a Operator, mf: &'a Multifunction, grid: TimeGrid) -> Self {
        System {
            op,
            mf,
            grid,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchOptions {
    /// Maximum number of simulated candidate paths per search.
    pub budget: usize,
    pub tol_k: f64,
    pub tol_u: f64,
    /// Rounds of the terminal correction `p`.
    pub corrections: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: 96,
            tol_k: TOL_K,
            tol_u: TOL_U,
            corrections: 4,
        }
    }
}

/// `(δ, b, p, x)` with `b` constant in `E`, `|p| ≤ 1/n` and `x` landing in the
/// target after `δ`.
#[derive(Debug, Clone)]
pub struct TangencyWitness {
    pub n: usize,
    pub delta: f64,
    pub steps: usize,
    pub b: StateVector,
    pub p: StateVector,
    /// Path up to `t_0 + δ`.
    pub x: Trajectory,
    pub strategy: String,
    /// Terminal defect minus tolerance; nonpositive by construction.
    pub terminal_defect: f64,
}

impl TangencyWitness {
    /// Solves again with the recorded `(δ, b + p)` from `history`.
    pub fn resimulate(&self, sys: &System, history: &History) -> Result<Trajectory> {
        let f = &self.b + &self.p;
        solve_forced(sys.op, &sys.grid, history, &vec![f; self.steps], &sys.solver)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyFailure {
    pub n: usize,
    pub t0: f64,
    pub simulations: usize,
    /// Smallest terminal defect over all simulated candidates.
    pub best_defect: f64,
    /// Smallest `(d_K(x(t_0 + δ)) - d_K(x(t_0)))/δ` over candidates at the
    /// smallest step (signed distance to `K`); present when a constraint set is known.
    pub escape_rate: Option<f64>,
    pub smallest_delta: f64,
    pub tried: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum TangencyOutcome {
    Found(TangencyWitness),
    Inconclusive(TangencyFailure),
}

impl TangencyOutcome {
    pub fn witness(&self) -> Option<&TangencyWitness> {
        match self {
            TangencyOutcome::Found(w) => Some(w),
            TangencyOutcome::Inconclusive(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.witness().is_some()
    }
}

enum Terminal<'a> {
    Set(&'a ConstraintSet),
    Epi { u: &'a dyn PathFunctional, y0: f64 },
}

impl Terminal<'_> {
    fn constraint(&self) -> Option<&ConstraintSet> {
        match self {
            Terminal::Set(k) => Some(k),
            Terminal::Epi { u, .. } => u.constraint(),
        }
    }

    /// Defect above tolerance; accepted when `≤ 0`.
    fn defect(&self, traj: &Trajectory, end: usize, delta: f64, n: usize, opts: &SearchOptions) -> f64 {
        match self {
            Terminal::Set(k) => k.dist(traj.state(end)) - opts.tol_k,
            Terminal::Epi { u, y0 } => {
                let bound = y0 + delta / n as f64 + opts.tol_u;
                u.value(traj, end).gap(ExtReal::Finite(bound))
            }
        }
    }
}

/// Admissible step counts: `T/2^k` clipped to `(0, min(1/n, T - t_0)]`, at
/// least `min_steps`, largest first, plus the exact remainder to `T` when it
/// is short enough.
fn delta_ladder(grid: &TimeGrid, start: usize, n: usize, min_steps: usize) -> Vec<usize> {
    let dt = grid.dt();
    let remaining = grid.n_steps() - start;
    let cap = ((1.0 / n as f64) / dt + 1e-9).floor() as usize;
    let cap = cap.min(remaining);
    let mut out = Vec::new();
    if remaining <= cap {
        out.push(remaining);
    }
    let mut k = 1;
    loop {
        let delta = grid.horizon() / 2f64.powi(k);
        if delta < dt * (1.0 - 1e-9) {
            break;
        }
        let steps = ((delta / dt).round() as usize).max(1);
        if steps <= cap && steps >= min_steps.max(1) && !out.contains(&steps) {
            out.push(steps);
        }
        k += 1;
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn candidates(
    sys: &System,
    u: Option<&dyn PathFunctional>,
    constraint: Option<&ConstraintSet>,
    t0: f64,
    x0: &StateVector,
) -> Result<Vec<(String, StateVector)>> {
    let value = sys.mf.value(t0, x0);
    let mut out: Vec<(String, StateVector)> = Vec::new();
    let push = |label: String, b: StateVector, out: &mut Vec<(String, StateVector)>| {
        if b.is_finite() && !out.iter().any(|(_, c)| (c - &b).norm() <= 1e-14 * (1.0 + b.norm())) {
            out.push((label, b));
        }
    };
    if let Some(u) = u {
        for (k, b) in u.suggested_controls(t0, x0, &value).into_iter().enumerate() {
            push(format!("suggested_{k}"), value.project(&b), &mut out);
        }
    }
    // the control that holds the state still, projected onto E
    push("hold".into(), value.project(&sys.op.apply(t0, x0)?), &mut out);
    if let Some(k) = constraint {
        if let Some(target) = k.project(x0) {
            let d = &target - x0;
            if d.norm() > 0.0 {
                push("steer_projection".into(), value.support_point(&d), &mut out);
            }
        }
        if let Some(c) = k.center() {
            let d = c - x0;
            if d.norm() > 0.0 {
                push("steer_center".into(), value.support_point(&d), &mut out);
            }
        }
    }
    push("center".into(), value.center(), &mut out);
    push("origin".into(), value.project(&StateVector::zeros(x0.dim())), &mut out);
    for (k, b) in value.extreme_points().into_iter().enumerate() {
        push(format!("extreme_{k}"), b, &mut out);
    }
    Ok(out)
}

struct Attempt {
    defect: f64,
    witness: Option<TangencyWitness>,
}

#[allow(clippy::too_many_arguments)]
fn attempt(
    sys: &System,
    history: &History,
    terminal: &Terminal,
    n: usize,
    steps: usize,
    label: &str,
    b: &StateVector,
    opts: &SearchOptions,
) -> Result<Attempt> {
    let start = history.start_index();
    let end = start + steps;
    let delta = steps as f64 * sys.grid.dt();
    let mut p = StateVector::zeros(b.dim());
    let mut traj = solve_forced(sys.op, &sys.grid, history, &vec![b.clone(); steps], &sys.solver)?;
    let mut defect = terminal.defect(&traj, end, delta, n, opts);
    let p_max = 1.0 / n as f64;
    if defect > 0.0 && defect.is_finite() {
        if let Some(k) = terminal.constraint() {
            // p cancels the terminal gap to K; only gaps reachable with |p| ≤ 1/n qualify
            let gap = k.dist(traj.state(end));
            if gap <= delta * p_max {
                for _ in 0..opts.corrections {
                    let Some(target) = k.project(traj.state(end)) else { break };
                    let mut next = p.clone();
                    next.axpy(1.0 / delta, &(&target - traj.state(end)));
                    if next.norm() > p_max {
                        break;
                    }
                    p = next;
                    let f = b + &p;
                    traj = solve_forced(sys.op, &sys.grid, history, &vec![f; steps], &sys.solver)?;
                    defect = terminal.defect(&traj, end, delta, n, opts);
                    if defect <= 0.0 {
                        break;
                    }
                }
            }
        }
    }
    let witness = (defect <= 0.0).then(|| TangencyWitness {
        n,
        delta,
        steps,
        b: b.clone(),
        p,
        x: traj.truncated(end),
        strategy: label.to_string(),
        terminal_defect: defect,
    });
    Ok(Attempt { defect, witness })
}

fn search(
    sys: &System,
    history: &History,
    terminal: &Terminal,
    u: Option<&dyn PathFunctional>,
    n: usize,
    min_steps: usize,
    opts: &SearchOptions,
) -> Result<TangencyOutcome> {
    let start = history.start_index();
    let t0 = sys.grid.node(start);
    let x0 = history.current().clone();
    let constraint = terminal.constraint();
    let cands = candidates(sys, u, constraint, t0, &x0)?;
    let ladder = delta_ladder(&sys.grid, start, n, min_steps);
    let mut simulations = 0;
    let mut best = f64::INFINITY;
    for &steps in &ladder {
        let room = opts.budget.saturating_sub(simulations);
        if room == 0 {
            break;
        }
        let batch = &cands[..cands.len().min(room)];
        let attempts: Vec<Attempt> = batch
            .par_iter()
            .map(|(label, b)| attempt(sys, history, terminal, n, steps, label, b, opts))
            .collect::<Result<_>>()?;
        simulations += batch.len();
        for a in attempts {
            best = best.min(a.defect);
            if let Some(w) = a.witness {
                return Ok(TangencyOutcome::Found(w));
            }
        }
    }
    let smallest = ladder.last().copied().unwrap_or(1).max(1);
    let smallest_delta = smallest as f64 * sys.grid.dt();
    let escape_rate = match constraint {
        Some(k) if start + smallest <= sys.grid.n_steps() => {
            let sd0 = k.signed_distance(&x0);
            let rates: Vec<f64> = cands
                .par_iter()
                .map(|(_, b)| -> Result<f64> {
                    let tr = solve_forced(sys.op, &sys.grid, history, &vec![b.clone(); smallest], &sys.solver)?;
                    Ok((k.signed_distance(tr.final_state()) - sd0) / smallest_delta)
                })
                .collect::<Result<_>>()?;
            rates.into_iter().reduce(f64::min)
        }
        _ => None,
    };
    Ok(TangencyOutcome::Inconclusive(TangencyFailure {
        n,
        t0,
        simulations,
        best_defect: best,
        escape_rate,
        smallest_delta,
        tried: cands.into_iter().map(|(l, _)| l).collect(),
    }))
}

/// Searches for `(δ, b, p, x)` with `x(t_0 + δ) ∈ K`.
pub fn tangency_test_set(
    k: &ConstraintSet,
    sys: &System,
    history: &History,
    n: usize,
    opts: &SearchOptions,
) -> Result<TangencyOutcome> {
    if n == 0 {
        return Err(Error::InvalidInput("approximation index n must be positive".into()));
    }
    let d = k.dist(history.current());
    if d > opts.tol_k {
        return Err(Error::Precondition(format!("start state is at distance {d:e} from K")));
    }
    search(sys, history, &Terminal::Set(k), None, n, 1, opts)
}

/// A point `(t_0, x_0, y_0)` of the epigraph; `t_0` is the last history node.
#[derive(Debug, Clone)]
pub struct EpigraphPoint {
    pub history: History,
    pub y0: f64,
}

impl EpigraphPoint {
    /// `(t_0, x_0, u(t_0, x_0))`; fails when `u(t_0, x_0) = +∞`.
    pub fn on_graph(u: &dyn PathFunctional, grid: &TimeGrid, history: History) -> Result<Self> {
        let i = history.start_index();
        let tr = Trajectory::from_samples(*grid, i, history.states().to_vec())?;
        match u.value(&tr, i) {
            ExtReal::Finite(y0) => Ok(EpigraphPoint { history, y0 }),
            ExtReal::PosInf => Err(Error::Precondition("start point is outside the domain of u".into())),
        }
    }
}

fn check_epi_point(u: &dyn PathFunctional, grid: &TimeGrid, point: &EpigraphPoint, tol_u: f64) -> Result<()> {
    let i = point.history.start_index();
    let tr = Trajectory::from_samples(*grid, i, point.history.states().to_vec())?;
    let val = u.value(&tr, i);
    if !val.le_with_tol(ExtReal::Finite(point.y0), tol_u) {
        return Err(Error::Precondition(format!("point is not in the epigraph: u = {val}, y0 = {}", point.y0)));
    }
    Ok(())
}

/// Searches for `(δ, b, p, x)` with `u(t_0 + δ, x) ≤ y_0 + δ/n`.
pub fn tangency_test_epi(
    u: &dyn PathFunctional,
    sys: &System,
    point: &EpigraphPoint,
    n: usize,
    opts: &SearchOptions,
) -> Result<TangencyOutcome> {
    if n == 0 {
        return Err(Error::InvalidInput("approximation index n must be positive".into()));
    }
    check_epi_point(u, &sys.grid, point, opts.tol_u)?;
    search(sys, &point.history, &Terminal::Epi { u, y0: point.y0 }, Some(u), n, 1, opts)
}

/// Diagnostics of a construction that could not be extended.
#[derive(Debug, Clone, Serialize)]
pub struct StuckReport {
    pub t: f64,
    pub state: StateVector,
    pub rounds_completed: usize,
    pub failure: TangencyFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Round {
    pub t_start: f64,
    pub delta: f64,
    pub strategy: String,
}

/// `(τ, ϱ, f, g, x)` at grid resolution.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub eps: f64,
    pub n: usize,
    pub y0: f64,
    pub tau: f64,
    /// `ϱ(t_i)` for nodes `start..=τ`.
    pub rho: Vec<f64>,
    /// Selection on intervals `start..τ`, `f_i ∈ F(ϱ(t_i), x(ϱ(t_i)))`.
    pub f: Vec<StateVector>,
    /// Defect on intervals `start..τ`, `|g_i| ≤ ε`.
    pub g: Vec<StateVector>,
    pub x: Trajectory,
    pub rounds: Vec<Round>,
    initial: History,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxSummary {
    pub eps: f64,
    pub n: usize,
    pub tau: f64,
    pub rho_breakpoints: Vec<f64>,
    pub rounds: Vec<Round>,
    pub max_defect: f64,
}

impl ApproxSolution {
    pub fn summary(&self) -> ApproxSummary {
        ApproxSummary {
            eps: self.eps,
            n: self.n,
            tau: self.tau,
            rho_breakpoints: self.rounds.iter().map(|r| r.t_start).chain([self.tau]).collect(),
            rounds: self.rounds.clone(),
            max_defect: self.g.iter().map(|g| g.norm()).fold(0.0, f64::max),
        }
    }

    /// Re-checks every defining condition at grid resolution.
    pub fn check_invariants(&self, u: &dyn PathFunctional, sys: &System, tol_eq: f64, tol_u: f64) -> HypothesisReport {
        let grid = &sys.grid;
        let start = self.initial.start_index();
        let t0 = grid.node(start);
        let tau_idx = self.x.end_index();
        let mut b = ReportBuilder::new("approximate_solution", 0.0);
        let w = |check: &str, t: f64, lhs: f64, rhs: f64| Witness {
            check: check.into(),
            t,
            s: None,
            x: None,
            y: None,
            v: None,
            lhs,
            rhs,
        };
        b.record(w("tau", self.tau, self.tau - t0, 0.0));
        let hist_gap = self
            .initial
            .states()
            .iter()
            .zip(self.x.states())
            .map(|(a, c)| (a - c).norm())
            .fold(0.0, f64::max);
        b.record(w("history", t0, 0.0, hist_gap));
        let slack = 1e-12 * (1.0 + grid.horizon());
        for (k, &r) in self.rho.iter().enumerate() {
            let t = grid.node(start + k);
            b.record(w("lag", t, r - (t - self.eps) + slack, 0.0));
            b.record(w("lag", t, t - r + slack, 0.0));
            if k > 0 {
                b.record(w("lag", t, r - self.rho[k - 1] + slack, 0.0));
            }
        }
        b.record(w("lag", self.tau, slack, (self.rho[self.rho.len() - 1] - self.tau).abs()));
        for (k, (f, g)) in self.f.iter().zip(&self.g).enumerate() {
            let i = start + k;
            let t = grid.node(i);
            let lag_idx = grid.index_of(self.rho[k]).unwrap_or(i);
            let value = sys.mf.value(self.rho[k], self.x.state(lag_idx));
            b.record(w("selection", t, TOL_F, value.dist(f)));
            b.record(w("defect", t, self.eps + slack, g.norm()));
            let forcing_gap = (&(f + g) - self.x.forcing(i)).norm();
            b.record(w("equation", t, tol_eq, self.x.residuals()[k].max(forcing_gap)));
            let uval = u.value(&self.x, lag_idx);
            let bound = self.y0 + self.eps * (t - t0) + tol_u;
            b.record(w("epigraph", t, bound, uval.to_f64()));
        }
        debug_assert_eq!(start + self.f.len(), tau_idx);
        b.finish()
    }
}

/// Greedy extension loop: at each endpoint a tangency witness with
/// `n = ⌈1/ε⌉` and `δ ≥ delta_min` (or the exact remainder to `T`) extends
/// the solution, with the lag `ϱ` frozen at the round's left endpoint.
pub fn build_eps_approximate(
    u: &dyn PathFunctional,
    sys: &System,
    point: &EpigraphPoint,
    eps: f64,
    delta_min: f64,
    opts: &SearchOptions,
) -> Result<ApproxSolution> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1], found {eps}")));
    }
    if !(delta_min > 0.0) {
        return Err(Error::InvalidInput("delta_min must be positive".into()));
    }
    check_epi_point(u, &sys.grid, point, opts.tol_u)?;
    let grid = sys.grid;
    let n = (1.0 / eps - 1e-12).ceil().max(1.0) as usize;
    let min_steps = ((delta_min / grid.dt()) - 1e-9).ceil().max(1.0) as usize;
    let start = point.history.start_index();
    if start >= grid.n_steps() {
        return Err(Error::Precondition("start time must lie before the horizon".into()));
    }
    let mut history = point.history.clone();
    let mut y = point.y0;
    let mut rho = Vec::new();
    let mut f = Vec::new();
    let mut g = Vec::new();
    let mut rounds = Vec::new();
    let mut last: Option<Trajectory> = None;
    while history.start_index() < grid.n_steps() {
        let s = history.start_index();
        let t_s = grid.node(s);
        let outcome = search(sys, &history, &Terminal::Epi { u, y0: y }, Some(u), n, min_steps, opts)?;
        let w = match outcome {
            TangencyOutcome::Found(w) => w,
            TangencyOutcome::Inconclusive(failure) => {
                return Err(Error::ConstructionFailure {
                    stuck_at: t_s,
                    report: Box::new(StuckReport {
                        t: t_s,
                        state: history.current().clone(),
                        rounds_completed: rounds.len(),
                        failure,
                    }),
                })
            }
        };
        for _ in 0..w.steps {
            rho.push(t_s);
            f.push(w.b.clone());
            g.push(w.p.clone());
        }
        y += w.delta / n as f64;
        rounds.push(Round {
            t_start: t_s,
            delta: w.delta,
            strategy: w.strategy.clone(),
        });
        history = History::from_trajectory(&w.x, w.x.end_index());
        last = Some(w.x);
    }
    let x = last.expect("at least one round").with_start(start);
    let tau = x.t_end();
    rho.push(tau);
    Ok(ApproxSolution {
        eps,
        n,
        y0: point.y0,
        tau,
        rho,
        f,
        g,
        x,
        rounds,
        initial: point.history.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ViabilityReport {
    pub levels: Vec<usize>,
    /// `max_t dist(x(t), K)` (set case) or `max_t (u(t, x) - y_0)⁺` per level.
    pub max_dist: Vec<f64>,
    /// `d_∞(T, x^{(n)}; T, x^{(n+1)})` between consecutive levels.
    pub dinf_gaps: Vec<f64>,
    pub rounds: Vec<usize>,
}

/// What a viable trajectory must respect.
pub enum ViabilityTarget<'a> {
    Set(&'a ConstraintSet),
    Epigraph(&'a dyn PathFunctional),
}

/// Builds `1/n`-approximate solutions for `n = 1..=n_max` and returns the
/// finest path together with the refinement diagnostics.
pub fn viable_trajectory(
    target: ViabilityTarget,
    sys: &System,
    history: &History,
    n_max: usize,
    delta_min: f64,
    opts: &SearchOptions,
) -> Result<(Trajectory, ViabilityReport)> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be positive".into()));
    }
    let indicator;
    let (u, point): (&dyn PathFunctional, EpigraphPoint) = match target {
        ViabilityTarget::Set(k) => {
            let d = k.dist(history.current());
            if d > opts.tol_k {
                return Err(Error::Precondition(format!("start state is at distance {d:e} from K")));
            }
            indicator = IndicatorFunctional {
                set: k.clone(),
                tol: opts.tol_k,
            };
            (&indicator, EpigraphPoint { history: history.clone(), y0: -1.0 })
        }
        ViabilityTarget::Epigraph(u) => (u, EpigraphPoint::on_graph(u, &sys.grid, history.clone())?),
    };
    let mut report = ViabilityReport {
        levels: Vec::new(),
        max_dist: Vec::new(),
        dinf_gaps: Vec::new(),
        rounds: Vec::new(),
    };
    let mut prev: Option<Trajectory> = None;
    let horizon = sys.grid.horizon();
    for n in 1..=n_max {
        let sol = build_eps_approximate(u, sys, &point, 1.0 / n as f64, delta_min, opts)?;
        let x = sol.x;
        let s = x.start_index();
        let excess = match u.constraint() {
            Some(k) => (s..=x.end_index()).map(|i| k.dist(x.state(i))).fold(0.0, f64::max),
            None => (s..=x.end_index())
                .map(|i| u.value(&x, i).gap(ExtReal::Finite(point.y0)).max(0.0))
                .fold(0.0, f64::max),
        };
        report.levels.push(n);
        report.max_dist.push(excess);
        report.rounds.push(sol.rounds.len());
        if let Some(p) = &prev {
            report.dinf_gaps.push(dinf_distance(horizon, p, horizon, &x));
        }
        prev = Some(x);
    }
    Ok((prev.expect("n_max ≥ 1"), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gelfand::SpectralTriple;
    use crate::multifunctions::RadiusLaw;

    fn heat_ball(dim: usize, c_p: f64) -> (Operator, Multifunction, SpectralTriple) {
        let t = SpectralTriple::k_squared(dim, 2.0, 1.0).unwrap();
        let mf = Multifunction::centered_ball(RadiusLaw::Constant { radius: c_p }, c_p).unwrap();
        (Operator::heat(&t), mf, t)
    }

    #[test]
    fn ladder_respects_the_caps() {
        let g = TimeGrid::new(1.0, 512).unwrap();
        assert_eq!(delta_ladder(&g, 0, 4, 1), vec![128, 64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(delta_ladder(&g, 0, 4, 4), vec![128, 64, 32, 16, 8, 4]);
        assert_eq!(delta_ladder(&g, 510, 1, 4), vec![2]);
    }

    #[test]
    fn whole_space_accepts_the_first_candidate() {
        let (op, mf, _) = heat_ball(2, 1.0);
        let sys = System::new(&op, &mf, TimeGrid::new(1.0, 64).unwrap());
        let hist = History::constant(StateVector::new(vec![3.0, -1.0]), 0);
        let out = tangency_test_set(&ConstraintSet::Whole, &sys, &hist, 3, &SearchOptions::default()).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.strategy, "hold");
        assert!(w.delta <= 1.0 / 3.0);
    }

    #[test]
    fn start_outside_k_is_rejected() {
        let (op, mf, _) = heat_ball(1, 1.0);
        let sys = System::new(&op, &mf, TimeGrid::new(1.0, 64).unwrap());
        let k = ConstraintSet::ball(StateVector::zeros(1), 1.0).unwrap();
        let hist = History::constant(StateVector::new(vec![2.0]), 0);
        assert!(matches!(
            tangency_test_set(&k, &sys, &hist, 1, &SearchOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constant_functional_builds_up_to_the_horizon() {
        let (op, mf, _) = heat_ball(2, 1.0);
        let sys = System::new(&op, &mf, TimeGrid::new(1.0, 128).unwrap());
        let u = FnFunctional(|_, _: &Trajectory, _| ExtReal::ZERO);
        let point = EpigraphPoint {
            history: History::constant(StateVector::new(vec![1.0, 0.5]), 0),
            y0: 0.0,
        };
        let sol = build_eps_approximate(&u, &sys, &point, 0.25, 4.0 / 128.0, &SearchOptions::default()).unwrap();
        assert_eq!(sol.tau, 1.0);
        assert!(sol.check_invariants(&u, &sys, 1e-9, TOL_U).pass);
        assert_eq!(sol.rho.len(), 129);
    }
}
