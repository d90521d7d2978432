//! Time grids, the forced-equation solver and trajectory diagnostics.
//!
//! All trajectories live on one uniform grid over `[0, T]`. The segment up to
//! the start node is a frozen history; the solver only writes nodes after it.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gelfand::{SpectralTriple, StateVector};
use crate::multifunctions::Multifunction;
use crate::operators::{GrowthCoercivityCertificate, Operator};
use crate::report::{HypothesisReport, ReportBuilder, Witness};
use crate::sampling::SampleRng;

/// Residual tolerance for solves whose implicit part is exact.
pub const TOL_EQ_EXACT: f64 = 1e-9;
/// Residual tolerance for iterated implicit solves.
pub const TOL_EQ_NEWTON: f64 = 1e-6;
/// Default resolution.
pub const STEPS_PER_UNIT: usize = 512;

/// Uniform nodes `t_i = i T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || n_steps == 0 {
            return Err(Error::InvalidInput(format!(
                "time grid needs a positive horizon and at least one step, found T = {horizon}, n = {n_steps}"
            )));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    /// `ceil(T · steps_per_unit)` steps.
    pub fn with_resolution(horizon: f64, steps_per_unit: usize) -> Result<Self> {
        let n = (horizon * steps_per_unit as f64).ceil().max(1.0) as usize;
        Self::new(horizon, n)
    }

    pub fn for_triple(triple: &SpectralTriple) -> Self {
        Self::with_resolution(triple.horizon(), STEPS_PER_UNIT).expect("triple horizon is positive")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    /// Index of the node equal to `t` up to `1e-9 Δt`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let s = t / self.dt();
        let i = s.round();
        ((s - i).abs() <= 1e-9 && i >= 0.0 && i as usize <= self.n_steps).then_some(i as usize)
    }

    /// Largest node index with `t_i ≤ t`, clamped to the grid.
    pub fn floor_index(&self, t: f64) -> usize {
        if let Some(i) = self.index_of(t) {
            return i;
        }
        ((t / self.dt()).floor().max(0.0) as usize).min(self.n_steps)
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid {
            horizon: self.horizon,
            n_steps: self.n_steps * factor,
        }
    }
}

/// The path on `[0, t_0]`, with the forcing that produced it when known.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    states: Vec<StateVector>,
    forcing: Vec<StateVector>,
    residual: Vec<f64>,
}

impl History {
    /// `x ≡ x0` on `[0, t_{start}]`.
    pub fn constant(x0: StateVector, start: usize) -> Self {
        let zero = StateVector::zeros(x0.dim());
        History {
            states: vec![x0; start + 1],
            forcing: vec![zero; start],
            residual: vec![0.0; start],
        }
    }

    /// Arbitrary node values; forcing is recorded as zero.
    pub fn from_states(states: Vec<StateVector>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::InvalidInput("history needs at least one node".into()));
        };
        let zero = StateVector::zeros(first.dim());
        let m = states.len() - 1;
        Ok(History {
            states,
            forcing: vec![zero; m],
            residual: vec![0.0; m],
        })
    }

    /// Prefix of `traj` up to and including node `upto`.
    pub fn from_trajectory(traj: &Trajectory, upto: usize) -> Self {
        let upto = upto.min(traj.end_index());
        History {
            states: traj.states[..=upto].to_vec(),
            forcing: traj.forcing[..upto].to_vec(),
            residual: traj.residual[..upto].to_vec(),
        }
    }

    pub fn start_index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn current(&self) -> &StateVector {
        self.states.last().unwrap()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn sup_h_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// The bound `c (1 + sup_{t ≤ t_0} |x_0(t)|)` on forcing values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BcBound {
    pub c: f64,
}

impl BcBound {
    pub fn radius(&self, history: &History) -> f64 {
        self.c * (1.0 + history.sup_h_norm())
    }
}

/// A path on `[0, t_end]` with piecewise-constant forcing.
///
/// `forcing[i]` and `residual[i]` belong to the interval `(t_i, t_{i+1}]`.
/// For paths assembled from samples rather than solves the residual is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    start: usize,
    states: Vec<StateVector>,
    forcing: Vec<StateVector>,
    residual: Vec<f64>,
}

impl Trajectory {
    /// Path given by node values on `[0, t_{states.len()-1}]`, started at
    /// node `start`, with zero forcing.
    pub fn from_samples(grid: TimeGrid, start: usize, states: Vec<StateVector>) -> Result<Self> {
        if states.is_empty() || states.len() > grid.n_steps() + 1 || start >= states.len() {
            return Err(Error::InvalidInput("sample path does not fit the grid".into()));
        }
        let m = states.len() - 1;
        let zero = StateVector::zeros(states[0].dim());
        Ok(Trajectory {
            grid,
            start,
            states,
            forcing: vec![zero; m],
            residual: vec![f64::NAN; m],
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn end_index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.grid.node(self.start)
    }

    pub fn t_end(&self) -> f64 {
        self.grid.node(self.end_index())
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &StateVector {
        &self.states[i]
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.states[self.start]
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().unwrap()
    }

    /// Forcing on intervals `start..end`.
    pub fn selector(&self) -> &[StateVector] {
        &self.forcing[self.start..]
    }

    pub fn forcing(&self, interval: usize) -> &StateVector {
        &self.forcing[interval]
    }

    /// Residuals on intervals `start..end`.
    pub fn residuals(&self) -> &[f64] {
        &self.residual[self.start..]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().iter().copied().fold(0.0, f64::max)
    }

    /// Same path with a different start node (`≤ end`).
    pub fn with_start(mut self, start: usize) -> Self {
        assert!(start <= self.end_index(), "start node past the end of the path");
        self.start = start;
        self
    }

    /// Prefix ending at node `end`.
    pub fn truncated(&self, end: usize) -> Self {
        let end = end.min(self.end_index());
        Trajectory {
            grid: self.grid,
            start: self.start.min(end),
            states: self.states[..=end].to_vec(),
            forcing: self.forcing[..end].to_vec(),
            residual: self.residual[..end].to_vec(),
        }
    }

    /// Piecewise-linear interpolant, constant after `t_end` (the stopped path).
    pub fn eval(&self, t: f64) -> StateVector {
        if t >= self.t_end() {
            return self.final_state().clone();
        }
        if t <= 0.0 {
            return self.states[0].clone();
        }
        let i = self.grid.floor_index(t).min(self.end_index() - 1);
        let w = (t - self.grid.node(i)) / self.grid.dt();
        StateVector::lerp(&self.states[i], &self.states[i + 1], w.clamp(0.0, 1.0))
    }

    pub fn sup_h_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `sup_{s ≤ t_i} |x(s)|`.
    pub fn running_sup(&self, i: usize) -> f64 {
        self.states[..=i].iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x_1..x_N, f_1..f_N, residual`; the forcing on a row
    /// is the one applied on the interval starting at that node, the last row
    /// carries zeros.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::from("t");
        for k in 1..=n {
            write!(out, ",x_{k}").unwrap();
        }
        for k in 1..=n {
            write!(out, ",f_{k}").unwrap();
        }
        out.push_str(",residual\n");
        let zero = StateVector::zeros(n);
        for (i, x) in self.states.iter().enumerate() {
            write!(out, "{}", self.grid.node(i)).unwrap();
            for v in x.iter() {
                write!(out, ",{v}").unwrap();
            }
            let f = self.forcing.get(i).unwrap_or(&zero);
            for v in f.iter() {
                write!(out, ",{v}").unwrap();
            }
            let r = self.residual.get(i).copied().unwrap_or(0.0);
            writeln!(out, ",{r}").unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Semi-implicit for diagonal linear operators, fully implicit otherwise.
    Auto,
    /// Implicit in the stiff diagonal, explicit in the remainder.
    SemiImplicit,
    /// Implicit in all of `A`; fixed-point iteration with a Newton fallback.
    FullyImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Absolute V*-residual target of the implicit iteration, scaled by `1 + |x_i|`.
    pub implicit_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Auto,
            implicit_tol: 1e-10,
            max_iterations: 50,
        }
    }
}

impl SolverOptions {
    fn implicit(&self, op: &Operator) -> bool {
        match self.mode {
            SolverMode::Auto => !op.is_diagonal_linear(),
            SolverMode::SemiImplicit => false,
            SolverMode::FullyImplicit => true,
        }
    }

    /// Residual tolerance matching the mode used on `op`.
    pub fn tol_eq(&self, op: &Operator) -> f64 {
        if self.implicit(op) {
            TOL_EQ_NEWTON
        } else {
            TOL_EQ_EXACT
        }
    }
}

/// `|(x_{i+1} - x_i)/Δt + A(t_{i+1}, x_{i+1}) - f_i|_*`.
pub fn step_residual(op: &Operator, t_next: f64, dt: f64, x: &StateVector, x_next: &StateVector, f: &StateVector) -> Result<f64> {
    let mut r = op.apply(t_next, x_next)?;
    r -= f;
    r.axpy(1.0 / dt, &(x_next - x));
    Ok(op.triple().vstar_norm(&r))
}

fn diag_solve(stiff: &[f64], dt: f64, rhs: &StateVector) -> StateVector {
    StateVector::new(rhs.iter().zip(stiff).map(|(b, d)| b / (1.0 + dt * d)).collect())
}

/// One implicit Euler step from `x` at `t_i` with forcing `f`.
pub fn euler_step(
    op: &Operator,
    t_i: f64,
    dt: f64,
    x: &StateVector,
    f: &StateVector,
    opts: &SolverOptions,
    step: usize,
) -> Result<(StateVector, f64)> {
    let t_next = t_i + dt;
    let stiff = op.stiff_diagonal();
    let mut base = x.clone();
    base.axpy(dt, f);
    if op.is_diagonal_linear() {
        let next = diag_solve(stiff, dt, &base);
        let res = step_residual(op, t_next, dt, x, &next, f)?;
        return Ok((next, res));
    }
    let mut rhs = base.clone();
    rhs.axpy(-dt, &op.explicit_part(t_i, x)?);
    let mut next = diag_solve(stiff, dt, &rhs);
    let mut res = step_residual(op, t_next, dt, x, &next, f)?;
    if !opts.implicit(op) {
        return Ok((next, res));
    }
    let tol = opts.implicit_tol * (1.0 + x.norm());
    let mut iterations = 0;
    // fixed-point sweeps while they contract quickly
    while res > tol && iterations < opts.max_iterations.min(12) {
        let mut rhs = base.clone();
        rhs.axpy(-dt, &op.explicit_part(t_next, &next)?);
        let cand = diag_solve(stiff, dt, &rhs);
        let cres = step_residual(op, t_next, dt, x, &cand, f)?;
        iterations += 1;
        if !(cres < 0.5 * res) {
            if cres < res {
                next = cand;
                res = cres;
            }
            break;
        }
        next = cand;
        res = cres;
    }
    while res > tol && iterations < opts.max_iterations {
        next = newton_update(op, t_next, dt, x, f, &next)?;
        res = step_residual(op, t_next, dt, x, &next, f)?;
        iterations += 1;
    }
    if res > tol || !res.is_finite() {
        return Err(Error::SolverDivergence {
            step,
            iterations,
            residual: res,
        });
    }
    Ok((next, res))
}

/// Newton update for `G(y) = y - x + Δt (A(y) - f)` with a finite-difference
/// Jacobian of the explicit part.
fn newton_update(op: &Operator, t: f64, dt: f64, x: &StateVector, f: &StateVector, y: &StateVector) -> Result<StateVector> {
    let n = y.dim();
    let stiff = op.stiff_diagonal();
    let ny = op.explicit_part(t, y)?;
    let mut g = y - x;
    for k in 0..n {
        g[k] += dt * (stiff[k] * y[k] + ny[k] - f[k]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let h = 1e-7 * (1.0 + y[k].abs());
        let mut yp = y.clone();
        yp[k] += h;
        let np = op.explicit_part(t, &yp)?;
        for j in 0..n {
            jac[(j, k)] = dt * (np[j] - ny[j]) / h;
        }
        jac[(k, k)] += 1.0 + dt * stiff[k];
    }
    let rhs = DVector::from_column_slice(g.as_slice());
    let delta = jac.lu().solve(&rhs).ok_or(Error::OperatorEvaluation { t })?;
    Ok(StateVector::new(y.iter().zip(delta.iter()).map(|(a, b)| a - b).collect()))
}

/// Integrates from the end of `history` up to node `end`, asking `policy` for
/// the forcing on each interval. The policy receives the interval index, its
/// left node time and the path so far (nodes `0..=i`).
pub fn integrate<P>(
    op: &Operator,
    grid: &TimeGrid,
    history: &History,
    end: usize,
    opts: &SolverOptions,
    mut policy: P,
) -> Result<Trajectory>
where
    P: FnMut(usize, f64, &[StateVector]) -> StateVector,
{
    let start = history.start_index();
    if end > grid.n_steps() || end < start {
        return Err(Error::InvalidInput(format!(
            "cannot integrate from node {start} to node {end} on a grid with {} steps",
            grid.n_steps()
        )));
    }
    op.triple().check_dim(history.current())?;
    let dt = grid.dt();
    let mut states = history.states.clone();
    let mut forcing = history.forcing.clone();
    let mut residual = history.residual.clone();
    states.reserve(end - start);
    for i in start..end {
        let t_i = grid.node(i);
        let f = policy(i, t_i, &states);
        if !f.is_finite() || f.dim() != states[i].dim() {
            return Err(Error::InvalidInput(format!("forcing on interval {i} is not a finite state vector")));
        }
        let (next, res) = euler_step(op, t_i, dt, &states[i], &f, opts, i)?;
        states.push(next);
        forcing.push(f);
        residual.push(res);
    }
    Ok(Trajectory {
        grid: *grid,
        start,
        states,
        forcing,
        residual,
    })
}

/// Solves `x' + A(t, x) = f` for a piecewise-constant selector starting at the
/// end of `history`.
pub fn solve_forced(
    op: &Operator,
    grid: &TimeGrid,
    history: &History,
    selector: &[StateVector],
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let start = history.start_index();
    integrate(op, grid, history, start + selector.len(), opts, |i, _, _| selector[i - start].clone())
}

/// Repeats each selector value `factor` times, for solves on a refined grid.
pub fn refine_selector(selector: &[StateVector], factor: usize) -> Vec<StateVector> {
    selector
        .iter()
        .flat_map(|f| std::iter::repeat_n(f.clone(), factor))
        .collect()
}

/// How `sample_xf` picks forcing values in `F(t_i, x(t_i))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Extreme points, re-drawn at `switches` equally spaced switching times.
    BangBang { switches: usize },
    /// Random points of the set, re-drawn every `hold` intervals.
    RandomInterior { hold: usize },
    /// Projection onto `F` of the velocity that would reach `target` in one step.
    Feedback { target: StateVector },
}

/// The feedback forcing of [`SamplingStrategy::Feedback`] at `(t_i, x_i)`.
pub fn feedback_forcing(op: &Operator, mf: &Multifunction, t_i: f64, dt: f64, x: &StateVector, target: &StateVector) -> Result<StateVector> {
    let mut v = op.apply(t_i + dt, target)?;
    v.axpy(1.0 / dt, &(target - x));
    Ok(mf.project(t_i, x, &v))
}

/// Draws `n` trajectories of the inclusion from the end of `history` to the
/// grid end.
#[allow(clippy::too_many_arguments)]
pub fn sample_xf(
    op: &Operator,
    mf: &Multifunction,
    grid: &TimeGrid,
    history: &History,
    strategy: &SamplingStrategy,
    n: usize,
    rng: &mut SampleRng,
    opts: &SolverOptions,
) -> Result<Vec<Trajectory>> {
    let start = history.start_index();
    let end = grid.n_steps();
    let steps = end - start;
    // all randomness is drawn up front so the solves can run in parallel
    let plans: Vec<(u64, Vec<u64>)> = (0..n)
        .map(|_| {
            let seed: u64 = rng.random();
            let picks = match strategy {
                SamplingStrategy::BangBang { switches } => (0..=*switches).map(|_| rng.random()).collect(),
                _ => Vec::new(),
            };
            (seed, picks)
        })
        .collect();
    let dt = grid.dt();
    plans
        .into_par_iter()
        .map(|(seed, picks)| {
            let mut local = crate::sampling::seeded_rng(seed);
            let mut held: Option<StateVector> = None;
            match strategy {
                SamplingStrategy::BangBang { switches } => {
                    let segments = switches + 1;
                    integrate(op, grid, history, end, opts, |i, t, xs| {
                        let seg = ((i - start) * segments / steps.max(1)).min(segments - 1);
                        let ext = mf.value(t, &xs[i]).extreme_points();
                        ext[(picks[seg] % ext.len() as u64) as usize].clone()
                    })
                }
                SamplingStrategy::RandomInterior { hold } => {
                    let hold = (*hold).max(1);
                    integrate(op, grid, history, end, opts, |i, t, xs| {
                        let value = mf.value(t, &xs[i]);
                        let fresh = (i - start).is_multiple_of(hold);
                        let f = match held.take() {
                            Some(f) if !fresh => value.project(&f),
                            _ => value.sample_point(&mut local),
                        };
                        held = Some(f.clone());
                        f
                    })
                }
                SamplingStrategy::Feedback { target } => integrate(op, grid, history, end, opts, |i, t, xs| {
                    feedback_forcing(op, mf, t, dt, &xs[i], target).unwrap_or_else(|_| mf.value(t, &xs[i]).center())
                }),
            }
        })
        .collect()
}

/// Largest `dist(f_i, F(t_i, x(t_i)))` over the intervals after the start.
pub fn membership_defect(mf: &Multifunction, traj: &Trajectory) -> f64 {
    (traj.start_index()..traj.end_index())
        .map(|i| mf.dist(traj.grid().node(i), traj.state(i), traj.forcing(i)))
        .fold(0.0, f64::max)
}

/// Discrete `(‖x‖_{L^p(t_0, t_end; V)}, ‖x'‖_{L^q(t_0, t_end; V*)})`:
/// trapezoidal quadrature of `‖x(t_i)‖^p` and difference quotients.
pub fn wpq_seminorms(triple: &SpectralTriple, traj: &Trajectory) -> (f64, f64) {
    let (s, e) = (traj.start_index(), traj.end_index());
    if e == s {
        return (0.0, 0.0);
    }
    let dt = traj.grid().dt();
    let (p, q) = (triple.p(), triple.q());
    let mut lp = 0.0;
    for i in s..=e {
        let w = if i == s || i == e { 0.5 } else { 1.0 };
        lp += w * dt * triple.v_norm(traj.state(i)).powf(p);
    }
    let mut lq = 0.0;
    for i in s..e {
        let d = (traj.state(i + 1) - traj.state(i)).scaled(1.0 / dt);
        lq += dt * triple.vstar_norm(&d).powf(q);
    }
    (lp.powf(1.0 / p), lq.powf(1.0 / q))
}

/// `(Σ Δt |f_i|²)^{1/2}` over the intervals after the start.
pub fn selector_l2(traj: &Trajectory) -> f64 {
    let dt = traj.grid().dt();
    traj.selector().iter().map(|f| dt * f.dot(f)).sum::<f64>().sqrt()
}

/// `|t_2 - t_1| + sup_s |x_1(s ∧ t_1) - x_2(s ∧ t_2)|`, evaluated on the union
/// of both grids' nodes together with `t_1` and `t_2`.
pub fn dinf_distance(t1: f64, x1: &Trajectory, t2: f64, x2: &Trajectory) -> f64 {
    let t_max = t1.max(t2);
    let mut probes = vec![t1, t2];
    for g in [x1.grid(), x2.grid()] {
        let last = g.floor_index(t_max);
        probes.extend((0..=last).map(|i| g.node(i)));
    }
    let sup = probes
        .par_iter()
        .map(|&s| (&x1.eval(s.min(t1)) - &x2.eval(s.min(t2))).norm())
        .reduce(|| 0.0, f64::max);
    (t2 - t1).abs() + sup
}

/// The bound of a discrete a-priori estimate and its pieces.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriBound {
    /// Bound on `sup_i |x_i|²`.
    pub energy: f64,
    pub sup_norm: f64,
    pub lp_v: f64,
    pub lq_vstar: f64,
    pub selector_l2: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub report: HypothesisReport,
    pub bound: AprioriBound,
    /// Largest `used / allowed` over accepted trajectories.
    pub max_ratio: f64,
    /// Indices of trajectories failing the preconditions.
    pub rejected: Vec<usize>,
}

/// Checks `‖x‖_∞ + ‖x‖_{L^p(V)} + ‖x'‖_{L^q(V*)} + ‖f‖_{L²(H)} ≤ C(c, r)` for
/// trajectories whose forcing stays in `B_c` and whose history stays in the
/// H-ball of radius `r`.
///
/// The bound follows from pairing the Euler step with `x_{i+1}`:
/// `(1 - κΔt)|x_{i+1}|² + Δt c₂‖x_{i+1}‖^p ≤ |x_i|² + Δt(M² + 2f^A(t_{i+1}) + E)`
/// with `κ = 1 + 2c₃`, `M = c(1 + r)` and `E` absorbing the step residual
/// (Young's inequality against `c₂‖x‖^p`). Discrete Gronwall then bounds
/// `|x_i|²` by `G = (r² + S) exp(κ(T - t_0)/(1 - κΔt))`, summing bounds
/// `Σ Δt ‖x_i‖^p`, and the equation with the growth bound controls `x'`.
/// The trapezoid weight of the start node adds `Δt/2 ‖x(t_0)‖^p` to the
/// `L^p` bound of each path.
pub fn check_apriori(
    op: &Operator,
    cert: &GrowthCoercivityCertificate,
    c: f64,
    r: f64,
    trajectories: &[Trajectory],
    tol_eq: f64,
) -> Result<AprioriReport> {
    let triple = op.triple();
    let Some(first) = trajectories.first() else {
        return Err(Error::Precondition("no trajectories to check".into()));
    };
    let grid = *first.grid();
    let dt = grid.dt();
    let t0 = first.t0();
    let span = grid.horizon() - t0;
    let kappa = 1.0 + 2.0 * cert.c3;
    if kappa * dt >= 1.0 {
        return Err(Error::Precondition(format!(
            "time step {dt} too coarse for the discrete Gronwall argument (needs kappa * dt < 1, kappa = {kappa})"
        )));
    }
    if cert.c2 <= 0.0 {
        return Err(Error::Precondition("coercivity constant c2 must be positive".into()));
    }
    let (p, q) = (triple.p(), triple.q());
    let m = c * (1.0 + r);
    let residual_slack = (2.0 * tol_eq).powf(q) / (q * (p * cert.c2).powf(q / p));
    let n_steps = grid.n_steps() - first.start_index();
    let fa_sum: f64 = (1..=n_steps).map(|k| dt * cert.f_a.eval(t0 + k as f64 * dt)).sum();
    let s = span * (m * m + residual_slack) + 2.0 * fa_sum;
    let energy = (r * r + s) * (kappa * span / (1.0 - kappa * dt)).exp();
    let sup_norm = energy.sqrt();
    let power_sum = (r * r + s + kappa * span * energy) / cert.c2;
    let lp_v = power_sum.powf(1.0 / p);
    let amp = 1.0 + energy.powf(cert.alpha / 2.0);
    let lq_vstar = m * span.powf(1.0 / q) / triple.lambda_min().sqrt()
        + amp * (fa_sum.powf(1.0 / q) + cert.c1 * power_sum.powf(1.0 / q))
        + tol_eq * span.powf(1.0 / q);
    let l2_bound = m * span.sqrt();
    let total = sup_norm + lp_v + lq_vstar + l2_bound;
    let bound = AprioriBound {
        energy,
        sup_norm,
        lp_v,
        lq_vstar,
        selector_l2: l2_bound,
        total,
    };

    let mut rejected = Vec::new();
    let mut b = ReportBuilder::new("apriori", 0.0);
    let mut max_ratio = 0.0f64;
    for (idx, tr) in trajectories.iter().enumerate() {
        let hist_sup = tr.running_sup(tr.start_index());
        let radius = BcBound { c }.radius(&History::from_trajectory(tr, tr.start_index()));
        let ok = tr.grid() == &grid
            && tr.start_index() == first.start_index()
            && hist_sup <= r * (1.0 + 1e-12) + 1e-300
            && tr.selector().iter().all(|f| f.norm() <= radius * (1.0 + 1e-12))
            && tr.max_residual() <= tol_eq;
        if !ok {
            rejected.push(idx);
            continue;
        }
        let (lp, lq) = wpq_seminorms(triple, tr);
        let used = tr.sup_h_norm() + lp + lq + selector_l2(tr);
        let start_term = 0.5 * dt * triple.v_norm(tr.initial_state()).powf(p);
        let allowed = sup_norm + (power_sum + start_term).powf(1.0 / p) + lq_vstar + l2_bound;
        max_ratio = max_ratio.max(used / allowed);
        b.record(Witness {
            check: "apriori".into(),
            t: tr.t0(),
            s: None,
            x: Some(tr.initial_state().as_slice().to_vec()),
            y: None,
            v: None,
            lhs: allowed,
            rhs: used,
        });
    }
    Ok(AprioriReport {
        report: b.finish(),
        bound,
        max_ratio,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_mode() -> SpectralTriple {
        SpectralTriple::new(vec![1.0], 2.0, 1.0).unwrap()
    }

    #[test]
    fn grid_nodes_hit_the_horizon_exactly() {
        let g = TimeGrid::new(std::f64::consts::LN_2, 513).unwrap();
        assert_eq!(g.node(513), std::f64::consts::LN_2);
        assert_eq!(g.index_of(g.node(17)), Some(17));
        assert_eq!(g.index_of(g.node(17) + 0.3 * g.dt()), None);
        assert_eq!(g.floor_index(g.node(17) + 0.3 * g.dt()), 17);
        assert!(TimeGrid::new(0.0, 4).is_err());
    }

    #[test]
    fn equilibrium_forcing_keeps_the_state() {
        let t = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
        let op = Operator::heat(&t);
        let c = t.unit(1).scaled(0.7);
        let f = c.scaled(4.0);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let tr = solve_forced(&op, &grid, &History::constant(c.clone(), 0), &vec![f; 64], &SolverOptions::default()).unwrap();
        for x in tr.states() {
            assert!((x - &c).norm() < 1e-14);
        }
        assert!(tr.max_residual() < TOL_EQ_EXACT);
    }

    #[test]
    fn history_is_preserved() {
        let t = one_mode();
        let op = Operator::heat(&t);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let hist = History::from_states((0..4).map(|k| StateVector::new(vec![k as f64])).collect()).unwrap();
        let tr = solve_forced(&op, &grid, &hist, &vec![StateVector::zeros(1); 6], &SolverOptions::default()).unwrap();
        assert_eq!(tr.start_index(), 3);
        assert_eq!(&tr.states()[..4], hist.states());
        assert_eq!(tr.end_index(), 9);
    }

    #[test]
    fn eval_interpolates_and_stops() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let xs = (0..3).map(|k| StateVector::new(vec![k as f64])).collect();
        let tr = Trajectory::from_samples(grid, 0, xs).unwrap();
        assert_eq!(tr.eval(0.125)[0], 0.5);
        assert_eq!(tr.eval(0.9)[0], 2.0);
    }

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let t = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
        let op = Operator::heat(&t);
        let tr = solve_forced(&op, &grid, &History::constant(t.zeros(), 0), &[t.zeros(), t.zeros()], &SolverOptions::default()).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x_1,x_2,f_1,f_2,residual"));
        assert_eq!(lines.next(), Some("0,0,0,0,0,0"));
        assert_eq!(csv.lines().count(), 4);
    }
}
