//! Difference-quotient estimates of the contingent epiderivative and of the
//! backward subsolution inequality.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::gelfand::StateVector;
use crate::multifunctions::{InflatedSet, SetValue};
use crate::sampling::SampleRng;
use crate::trajectories::{solve_forced, History, Trajectory};
use crate::viability::{PathFunctional, System};

#[derive(Debug, Clone, Serialize)]
pub struct EpiOptions {
    /// Inflation radii; the estimate is the sup over these.
    pub eps: Vec<f64>,
    /// Candidate `δ` as multiples of the grid step; only `δ ≤ ε` are used.
    pub delta_steps: Vec<usize>,
    /// Random points of `E + B(0, ε)` added to the deterministic controls.
    pub random_controls: usize,
    /// Estimates at or below `tol` count as certified.
    pub tol: f64,
}

impl Default for EpiOptions {
    fn default() -> Self {
        EpiOptions {
            eps: vec![0.04, 0.02, 0.01],
            delta_steps: vec![1, 2, 4, 8, 16, 32],
            random_controls: 8,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpiEstimate {
    /// Sup over `ε` of the sampled minimal quotient. An upper estimate of the
    /// epiderivative: values `≤ tol` certify it at sample resolution, larger
    /// values are inconclusive.
    pub estimate: f64,
    pub per_eps: Vec<f64>,
    pub certified: bool,
    /// Constant control attaining the minimum at the last `ε`.
    pub best_control: Option<StateVector>,
    pub simulations: usize,
}

/// Upper estimate of `D↑u(t_0, x_0)(E)` over constant controls in `E + B(0, ε)`.
pub fn epiderivative(
    u: &dyn PathFunctional,
    sys: &System,
    history: &History,
    e: &SetValue,
    opts: &EpiOptions,
    rng: &mut SampleRng,
) -> Result<EpiEstimate> {
    let start = history.start_index();
    let grid = &sys.grid;
    if start >= grid.n_steps() {
        return Err(Error::Precondition("epiderivative needs t0 < T".into()));
    }
    if opts.eps.is_empty() || opts.delta_steps.is_empty() {
        return Err(Error::InvalidInput("epiderivative needs nonempty eps and delta ladders".into()));
    }
    let t0 = grid.node(start);
    let x0 = history.current();
    let base = Trajectory::from_samples(*grid, start, history.states().to_vec())?;
    let u0 = match u.value(&base, start) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Err(Error::Precondition("(t0, x0) is outside the domain of u".into())),
    };
    let dt = grid.dt();
    let room = grid.n_steps() - start;
    let mut per_eps = Vec::with_capacity(opts.eps.len());
    let mut best_control = None;
    let mut simulations = 0;
    for &eps in &opts.eps {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("inflation radius must be positive, found {eps}")));
        }
        let steps: Vec<usize> = opts
            .delta_steps
            .iter()
            .copied()
            .filter(|&m| m >= 1 && m <= room && m as f64 * dt <= eps * (1.0 + 1e-12))
            .collect();
        let Some(&m_max) = steps.iter().max() else {
            return Err(Error::InvalidInput(format!("no delta in the ladder fits below eps = {eps}")));
        };
        let inflated = InflatedSet::new(e.clone(), eps);
        let mut controls: Vec<StateVector> =
            u.suggested_controls(t0, x0, e).iter().map(|c| inflated.project(c)).collect();
        controls.extend(e.extreme_points());
        controls.push(e.center());
        for _ in 0..opts.random_controls {
            controls.push(inflated.project(&e.sample_point(rng)));
        }
        let results: Vec<(f64, usize)> = controls
            .par_iter()
            .enumerate()
            .map(|(k, c)| -> Result<(f64, usize)> {
                let tr = solve_forced(sys.op, grid, history, &vec![c.clone(); m_max], &sys.solver)?;
                let q = steps
                    .iter()
                    .map(|&m| {
                        let v = u.value(&tr, start + m);
                        v.gap(ExtReal::Finite(u0)) / (m as f64 * dt)
                    })
                    .fold(f64::INFINITY, f64::min);
                Ok((q, k))
            })
            .collect::<Result<_>>()?;
        simulations += results.len();
        let (q, k) = results
            .into_iter()
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        per_eps.push(q);
        best_control = Some(controls[k].clone());
    }
    let estimate = per_eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EpiEstimate {
        estimate,
        certified: estimate <= opts.tol,
        per_eps,
        best_control,
        simulations,
    })
}

/// `min_m (u(t_{i0-m}, x) - u(t_{i0}, x)) / (m Δt)` over the ladder, with the
/// path stopped at each earlier node; values `≤ tol` certify the backward
/// inequality at resolution.
pub fn subsolution_residual(u: &dyn PathFunctional, traj: &Trajectory, i0: usize, delta_steps: &[usize]) -> Result<f64> {
    if i0 > traj.end_index() {
        return Err(Error::InvalidInput(format!("node {i0} is past the trajectory end {}", traj.end_index())));
    }
    let u0 = match u.value(traj, i0) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Err(Error::Precondition("(t0, x0) is outside the domain of u".into())),
    };
    let dt = traj.grid().dt();
    let quotients: Vec<f64> = delta_steps
        .iter()
        .filter(|&&m| m >= 1 && m <= i0)
        .map(|&m| u.value(traj, i0 - m).gap(ExtReal::Finite(u0)) / (m as f64 * dt))
        .collect();
    if quotients.is_empty() {
        return Err(Error::InvalidInput(format!("no delta in the ladder fits before node {i0}")));
    }
    Ok(quotients.into_iter().fold(f64::INFINITY, f64::min))
}
