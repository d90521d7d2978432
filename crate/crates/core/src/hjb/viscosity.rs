//! Test functions with explicit path derivatives and the two viscosity
//! residuals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::gelfand::StateVector;
use crate::multifunctions::InflatedSet;
use crate::sampling::SampleRng;
use crate::trajectories::{solve_forced, History, Trajectory};
use crate::viability::{PathFunctional, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFunctionKind {
    Constant,
    Affine,
    QuadraticInState,
    TimePolynomial,
    Composite,
}

/// `φ(t, x) = c + Σ_k a_k (t - t_ref)^{k+1} + (b, x(t)) + κ |x(t) - m|²`.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    pub constant: f64,
    pub t_ref: f64,
    pub time_coeffs: Vec<f64>,
    pub linear: Option<StateVector>,
    /// `(κ, m)`
    pub quadratic: Option<(f64, StateVector)>,
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction {
            constant: c,
            t_ref: 0.0,
            time_coeffs: Vec::new(),
            linear: None,
            quadratic: None,
        }
    }

    /// `c + (b, x(t))`
    pub fn affine(c: f64, b: StateVector) -> Self {
        TestFunction {
            linear: Some(b),
            ..Self::constant(c)
        }
    }

    /// `κ |x(t) - m|²`
    pub fn quadratic(kappa: f64, center: StateVector) -> Self {
        TestFunction {
            quadratic: Some((kappa, center)),
            ..Self::constant(0.0)
        }
    }

    /// `c + Σ_k a_k (t - t_ref)^{k+1}`
    pub fn time_polynomial(c: f64, t_ref: f64, coeffs: Vec<f64>) -> Self {
        TestFunction {
            t_ref,
            time_coeffs: coeffs,
            ..Self::constant(c)
        }
    }

    /// `u_0 + (t_0 - t) c`
    pub fn linear_in_time(u0: f64, t0: f64, c: f64) -> Self {
        Self::time_polynomial(u0, t0, vec![-c])
    }

    pub fn with_time_polynomial(mut self, t_ref: f64, coeffs: Vec<f64>) -> Self {
        self.t_ref = t_ref;
        self.time_coeffs = coeffs;
        self
    }

    pub fn with_linear(mut self, b: StateVector) -> Self {
        self.linear = Some(b);
        self
    }

    pub fn with_quadratic(mut self, kappa: f64, center: StateVector) -> Self {
        self.quadratic = Some((kappa, center));
        self
    }

    pub fn kind(&self) -> TestFunctionKind {
        let time = self.time_coeffs.iter().any(|a| *a != 0.0);
        match (time, self.linear.is_some(), self.quadratic.is_some()) {
            (false, false, false) => TestFunctionKind::Constant,
            (false, true, false) => TestFunctionKind::Affine,
            (false, false, true) => TestFunctionKind::QuadraticInState,
            (true, false, false) => TestFunctionKind::TimePolynomial,
            _ => TestFunctionKind::Composite,
        }
    }

    pub fn value(&self, t: f64, x: &StateVector) -> f64 {
        let s = t - self.t_ref;
        let mut v = self.constant;
        let mut pow = s;
        for a in &self.time_coeffs {
            v += a * pow;
            pow *= s;
        }
        if let Some(b) = &self.linear {
            v += b.dot(x);
        }
        if let Some((k, m)) = &self.quadratic {
            v += k * (x - m).norm().powi(2);
        }
        v
    }

    pub fn dt(&self, t: f64, _x: &StateVector) -> f64 {
        let s = t - self.t_ref;
        let mut v = 0.0;
        let mut pow = 1.0;
        for (k, a) in self.time_coeffs.iter().enumerate() {
            v += (k + 1) as f64 * a * pow;
            pow *= s;
        }
        v
    }

    pub fn dx(&self, _t: f64, x: &StateVector) -> StateVector {
        let mut g = StateVector::zeros(x.dim());
        if let Some(b) = &self.linear {
            g += b;
        }
        if let Some((k, m)) = &self.quadratic {
            g.axpy(2.0 * k, &(x - m));
        }
        g
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ViscosityOptions {
    /// Inflation radius of `F` and length of the touching window.
    pub eps: f64,
    pub delta_steps: Vec<usize>,
    /// Random points of `F + B(0, ε)` added to its extreme points and center.
    pub n_samples: usize,
    pub touch_tol: f64,
}

impl Default for ViscosityOptions {
    fn default() -> Self {
        ViscosityOptions {
            eps: 0.01,
            delta_steps: vec![1, 2, 4, 8],
            n_samples: 8,
            touch_tol: 1e-9,
        }
    }
}

fn touch_at(u: &dyn PathFunctional, phi: &TestFunction, traj: &Trajectory, i: usize, tol: f64) -> Result<()> {
    let t = traj.grid().node(i);
    match u.value(traj, i) {
        ExtReal::Finite(v) if (phi.value(t, traj.state(i)) - v).abs() <= tol => Ok(()),
        v => Err(Error::TestFunctionRejected(format!(
            "φ = {} does not touch u = {v} at t = {t}",
            phi.value(t, traj.state(i))
        ))),
    }
}

fn below_at(u: &dyn PathFunctional, phi: &TestFunction, traj: &Trajectory, i: usize, tol: f64) -> Result<()> {
    let t = traj.grid().node(i);
    if let ExtReal::Finite(v) = u.value(traj, i) {
        let d = phi.value(t, traj.state(i)) - v;
        if d > tol {
            return Err(Error::TestFunctionRejected(format!("φ - u = {d:e} > 0 at t = {t}")));
        }
    }
    Ok(())
}

/// Left side of the supersolution inequality at the end of `history`:
/// `-∂_tφ + min_δ (1/δ) ∫ ⟨A(t, x), ∂_xφ⟩ - inf_{f ∈ F} (f, ∂_xφ)`, maximized
/// over paths driven by constant controls in `F(t_0, x_0) + B(0, ε)`. The
/// integral uses left-point quadrature, so the smallest `δ = Δt` gives the
/// integrand at `t_0`. With `u` supplied, touching from above on
/// `[t_0, t_0 + ε]` is spot-checked along the sampled paths.
pub fn viscosity_residual_plus(
    u: Option<&dyn PathFunctional>,
    phi: &TestFunction,
    sys: &System,
    history: &History,
    opts: &ViscosityOptions,
    rng: &mut SampleRng,
) -> Result<f64> {
    let grid = &sys.grid;
    let start = history.start_index();
    let room = grid.n_steps() - start;
    let steps: Vec<usize> = opts.delta_steps.iter().copied().filter(|&m| m >= 1 && m <= room).collect();
    let Some(&m_max) = steps.iter().max() else {
        return Err(Error::InvalidInput("no delta in the ladder fits before T".into()));
    };
    let t0 = grid.node(start);
    let x0 = history.current();
    let dt = grid.dt();
    let e = sys.mf.value(t0, x0);
    let inflated = InflatedSet::new(e.clone(), opts.eps);
    let mut controls = e.extreme_points();
    controls.push(e.center());
    for _ in 0..opts.n_samples {
        controls.push(inflated.project(&e.sample_point(rng)));
    }
    let window = ((opts.eps / dt).floor() as usize).min(room);
    let horizon = m_max.max(window);
    let g0 = phi.dx(t0, x0);
    let inf_f = -e.support(&-&g0);
    let base = -phi.dt(t0, x0) - inf_f;
    let values: Vec<f64> = controls
        .par_iter()
        .map(|c| -> Result<f64> {
            let tr = solve_forced(sys.op, grid, history, &vec![c.clone(); horizon], &sys.solver)?;
            if let Some(u) = u {
                touch_at(u, phi, &tr, start, opts.touch_tol)?;
                for i in start..=start + window {
                    below_at(u, phi, &tr, i, opts.touch_tol)?;
                }
            }
            let mut integrand = Vec::with_capacity(m_max);
            for i in start..start + m_max {
                let t = grid.node(i);
                let x = tr.state(i);
                integrand.push(sys.op.apply(t, x)?.dot(&phi.dx(t, x)));
            }
            let avg = steps
                .iter()
                .map(|&m| integrand[..m].iter().sum::<f64>() / m as f64)
                .fold(f64::INFINITY, f64::min);
            Ok(base + avg)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Left side of the backward inequality at node `i0` of a recorded path:
/// `∂_tφ + max_δ (1/δ) ∫_{t_0-δ}^{t_0} ⟨-A(t, x) + f(t), ∂_xφ⟩` with the
/// recorded forcing and right-point quadrature. With `u` supplied, touching
/// from below on `[t_0 - ε, t_0]` is spot-checked.
pub fn viscosity_residual_minus(
    u: Option<&dyn PathFunctional>,
    phi: &TestFunction,
    sys: &System,
    traj: &Trajectory,
    i0: usize,
    opts: &ViscosityOptions,
) -> Result<f64> {
    let start = traj.start_index();
    if i0 > traj.end_index() || i0 <= start {
        return Err(Error::InvalidInput(format!(
            "node {i0} must lie after the start {start} and within the trajectory"
        )));
    }
    let grid = traj.grid();
    let back = i0 - start;
    let steps: Vec<usize> = opts.delta_steps.iter().copied().filter(|&m| m >= 1 && m <= back).collect();
    let Some(&m_max) = steps.iter().max() else {
        return Err(Error::InvalidInput(format!("no delta in the ladder fits after the start of node {i0}")));
    };
    if let Some(u) = u {
        touch_at(u, phi, traj, i0, opts.touch_tol)?;
        let window = ((opts.eps / grid.dt()).floor() as usize).min(back);
        for i in i0 - window..=i0 {
            below_at(u, phi, traj, i, opts.touch_tol)?;
        }
    }
    let mut integrand = Vec::with_capacity(m_max);
    for j in (i0 + 1 - m_max..=i0).rev() {
        let t = grid.node(j);
        let x = traj.state(j);
        let drift = traj.forcing(j - 1) - &sys.op.apply(t, x)?;
        integrand.push(drift.dot(&phi.dx(t, x)));
    }
    let avg = steps
        .iter()
        .map(|&m| integrand[..m].iter().sum::<f64>() / m as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(phi.dt(grid.node(i0), traj.state(i0)) + avg)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityDefect {
    /// Largest `|φ(t_j) - φ(t_0) - ∫_{t_0}^{t_j} (∂_tφ + ⟨x', ∂_xφ⟩)|`.
    pub max_defect: f64,
    /// `(t_end - t_0) + max_j |x(t_j) - x(t_0)|`, the oscillation of the graph.
    pub oscillation: f64,
    /// `10 Δt · oscillation`
    pub bound: f64,
    pub pass: bool,
}

/// Trapezoidal check of `φ(t_2, x) - φ(t_1, x) = ∫ ∂_tφ + ⟨x', ∂_xφ⟩` from the
/// trajectory start to every later node, with `x'` the difference quotient.
pub fn check_testfunction_identity(phi: &TestFunction, traj: &Trajectory) -> IdentityDefect {
    let grid = traj.grid();
    let dt = grid.dt();
    let s = traj.start_index();
    let x_s = traj.state(s);
    let phi_s = phi.value(grid.node(s), x_s);
    let mut integral = 0.0;
    let mut max_defect: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for i in s..traj.end_index() {
        let (t_a, t_b) = (grid.node(i), grid.node(i + 1));
        let (x_a, x_b) = (traj.state(i), traj.state(i + 1));
        let dx = x_b - x_a;
        let g = &phi.dx(t_a, x_a) + &phi.dx(t_b, x_b);
        integral += 0.5 * (t_b - t_a) * (phi.dt(t_a, x_a) + phi.dt(t_b, x_b)) + 0.5 * dx.dot(&g);
        let defect = (phi.value(t_b, x_b) - phi_s - integral).abs();
        max_defect = max_defect.max(defect);
        spread = spread.max((x_b - x_s).norm());
    }
    let oscillation = (traj.t_end() - traj.t0()) + spread;
    let bound = 10.0 * dt * oscillation;
    IdentityDefect {
        max_defect,
        oscillation,
        bound,
        pass: max_defect <= bound,
    }
}
