//! Value grids for the heat operator, computed by backward dynamic
//! programming with the exact per-mode flow of constant controls.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{MayerProblem, TerminalCost};
use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::gelfand::StateVector;
use crate::multifunctions::Multifunction;
use crate::trajectories::TimeGrid;

/// Reduced coordinates of a gridded value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reduction {
    /// Value depends on `(t, |x|)`; controls are `w x/|x|` with `|w| ≤ control_radius`.
    Radial { lambda: f64, control_radius: f64 },
    /// Value gridded on every mode coordinate (at most two).
    Modal,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueGridSpec {
    pub r_nodes: usize,
    /// Nodes per axis on modal grids.
    pub modal_nodes: usize,
    /// Time nodes; `None` reuses the nodes of the problem's trajectory grid.
    pub t_nodes: Option<usize>,
    /// Outer radius of the state grid. Defaults to twice the tube radius for
    /// tube costs and `8 + |target|` otherwise.
    pub r_max: Option<f64>,
}

impl Default for ValueGridSpec {
    fn default() -> Self {
        ValueGridSpec {
            r_nodes: 257,
            modal_nodes: 65,
            t_nodes: None,
            r_max: None,
        }
    }
}

/// Fractions of the control radius tried on radial grids.
const RADIAL_CONTROLS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

#[derive(Debug, Clone)]
pub struct ValueGrid {
    reduction: Reduction,
    times: TimeGrid,
    axes: Vec<Vec<f64>>,
    /// One slice per time node, state nodes in row-major order of `axes`.
    values: Vec<Vec<ExtReal>>,
    tube: Option<f64>,
    target: Option<StateVector>,
    lambda: Vec<f64>,
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|j| if j == n - 1 { hi } else { lo + h * j as f64 }).collect()
}

/// Cell index and weight of `s` on a uniform axis; the weight leaves `[0, 1]`
/// outside the axis range, which extrapolates linearly.
fn locate(axis: &[f64], s: f64) -> (usize, f64) {
    let n = axis.len();
    let h = axis[1] - axis[0];
    let j = ((s - axis[0]) / h).floor();
    let j = if j.is_nan() { 0 } else { (j.max(0.0) as usize).min(n - 2) };
    (j, (s - axis[j]) / h)
}

/// Weighted sum over finite neighbours, renormalized; `+∞` if every
/// neighbour with positive weight is infinite.
fn blend(pairs: &[(f64, ExtReal)]) -> ExtReal {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for &(w, v) in pairs {
        if let ExtReal::Finite(v) = v {
            num += w * v;
            den += w;
            any = true;
        }
    }
    if !any {
        return ExtReal::PosInf;
    }
    if den.abs() < 1e-300 {
        // every finite neighbour carries zero weight: fall back to their mean
        let finite: Vec<f64> = pairs.iter().filter_map(|(_, v)| v.finite()).collect();
        return ExtReal::Finite(finite.iter().sum::<f64>() / finite.len() as f64);
    }
    ExtReal::Finite(num / den)
}

impl ValueGrid {
    pub(crate) fn compute(problem: &MayerProblem, spec: &ValueGridSpec) -> Result<Self> {
        let reduction = problem.reduction()?;
        let tr = problem.op.triple();
        let times = match spec.t_nodes {
            None => problem.grid,
            Some(n) if n >= 2 => TimeGrid::new(tr.horizon(), n - 1)?,
            Some(n) => return Err(Error::InvalidInput(format!("value grid needs at least 2 time nodes, found {n}"))),
        };
        let tube = problem.cost.tube_radius();
        let target = match &problem.cost {
            TerminalCost::NormTarget { target } => Some(target.clone()),
            _ => None,
        };
        let r_max = match spec.r_max {
            Some(r) if r.is_finite() && r > 0.0 => r,
            Some(r) => return Err(Error::InvalidInput(format!("value grid radius must be positive, found {r}"))),
            None => match (tube, &target) {
                (Some(c), _) if c > 0.0 => 2.0 * c,
                (_, Some(m)) => 8.0 + m.norm(),
                _ => 8.0,
            },
        };
        let axes = match reduction {
            Reduction::Radial { .. } => {
                if spec.r_nodes < 2 {
                    return Err(Error::InvalidInput("radial grid needs at least 2 nodes".into()));
                }
                vec![uniform_axis(0.0, r_max, spec.r_nodes)]
            }
            Reduction::Modal => {
                if spec.modal_nodes < 2 {
                    return Err(Error::InvalidInput("modal grid needs at least 2 nodes per axis".into()));
                }
                vec![uniform_axis(-r_max, r_max, spec.modal_nodes); tr.dim()]
            }
        };
        let mut grid = ValueGrid {
            reduction,
            times,
            axes,
            values: Vec::new(),
            tube,
            target,
            lambda: tr.eigenvalues().to_vec(),
        };
        let nodes = grid.node_states();
        let terminal: Vec<ExtReal> = nodes.iter().map(|s| grid.terminal_value(s)).collect();
        let controls: Vec<Vec<StateVector>> = match reduction {
            Reduction::Radial { .. } => Vec::new(),
            Reduction::Modal => nodes
                .iter()
                .map(|s| grid.modal_controls(&problem.mf, s))
                .collect(),
        };
        let n_t = times.n_steps() + 1;
        let mut values = vec![Vec::new(); n_t];
        values[n_t - 1] = terminal;
        for k in (0..n_t - 1).rev() {
            let h = times.node(k + 1) - times.node(k);
            let next = &values[k + 1];
            let slice: Vec<ExtReal> = (0..nodes.len())
                .into_par_iter()
                .map(|j| {
                    let s = &nodes[j];
                    if grid.outside_tube(s) {
                        return ExtReal::PosInf;
                    }
                    match reduction {
                        Reduction::Radial { control_radius, .. } => RADIAL_CONTROLS
                            .iter()
                            .map(|w| grid.eval_slice(next, &grid.flow(s, &StateVector::new(vec![w * control_radius]), h)))
                            .fold(ExtReal::PosInf, ExtReal::min),
                        Reduction::Modal => controls[j]
                            .iter()
                            .map(|c| grid.eval_slice(next, &grid.flow(s, c, h)))
                            .fold(ExtReal::PosInf, ExtReal::min),
                    }
                })
                .collect();
            values[k] = slice;
        }
        grid.values = values;
        Ok(grid)
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Values at time node `k`, state nodes in row-major order.
    pub fn slice(&self, k: usize) -> &[ExtReal] {
        &self.values[k]
    }

    /// Reduced coordinates of every state node.
    fn node_states(&self) -> Vec<StateVector> {
        match self.axes.len() {
            1 => self.axes[0].iter().map(|&s| StateVector::new(vec![s])).collect(),
            2 => {
                let mut out = Vec::with_capacity(self.axes[0].len() * self.axes[1].len());
                for &a in &self.axes[0] {
                    for &b in &self.axes[1] {
                        out.push(StateVector::new(vec![a, b]));
                    }
                }
                out
            }
            d => unreachable!("grids have one or two axes, found {d}"),
        }
    }

    /// Reduced coordinates of a full state.
    fn reduce(&self, x: &StateVector) -> StateVector {
        match self.reduction {
            Reduction::Radial { .. } => StateVector::new(vec![x.norm()]),
            Reduction::Modal => x.clone(),
        }
    }

    fn outside_tube(&self, s: &StateVector) -> bool {
        match self.tube {
            Some(c) => !TerminalCost::in_tube(c, s),
            None => false,
        }
    }

    fn terminal_value(&self, s: &StateVector) -> ExtReal {
        if self.outside_tube(s) {
            return ExtReal::PosInf;
        }
        match (&self.target, self.reduction) {
            (Some(_), Reduction::Radial { .. }) => ExtReal::Finite(s[0]),
            (Some(m), Reduction::Modal) => ExtReal::Finite((s - m).norm()),
            (None, _) => ExtReal::ZERO,
        }
    }

    /// Exact flow over `h` of the unforced-plus-constant dynamics, in reduced
    /// coordinates. Radial controls are signed magnitudes along `x/|x|`.
    fn flow(&self, s: &StateVector, c: &StateVector, h: f64) -> StateVector {
        match self.reduction {
            Reduction::Radial { lambda, .. } => {
                let e = (-lambda * h).exp();
                StateVector::new(vec![(s[0] * e + c[0] * (1.0 - e) / lambda).max(0.0)])
            }
            Reduction::Modal => StateVector::new(
                s.iter()
                    .zip(c.iter())
                    .zip(&self.lambda)
                    .map(|((x, f), l)| {
                        let e = (-l * h).exp();
                        x * e + f * (1.0 - e) / l
                    })
                    .collect(),
            ),
        }
    }

    /// Extreme points and center of `F(x)`, its support point towards the
    /// target, and the projection of `A x` (the control closest to holding).
    fn modal_controls(&self, mf: &Multifunction, x: &StateVector) -> Vec<StateVector> {
        let value = mf.value(0.0, x);
        let mut out = value.extreme_points();
        out.push(value.center());
        let goal = match &self.target {
            Some(m) => m - x,
            None => -x,
        };
        if goal.norm() > 0.0 {
            out.push(value.support_point(&goal));
        }
        let ax = StateVector::new(x.iter().zip(&self.lambda).map(|(v, l)| v * l).collect());
        out.push(value.project(&ax));
        out
    }

    fn eval_slice(&self, slice: &[ExtReal], s: &StateVector) -> ExtReal {
        if self.outside_tube(s) {
            return ExtReal::PosInf;
        }
        match self.axes.len() {
            1 => {
                let (j, w) = locate(&self.axes[0], s[0]);
                blend(&[(1.0 - w, slice[j]), (w, slice[j + 1])])
            }
            _ => {
                let n1 = self.axes[1].len();
                let lo = self.axes[0][0];
                let hi = *self.axes[0].last().unwrap();
                let (i, wa) = locate(&self.axes[0], s[0].clamp(lo, hi));
                let (j, wb) = locate(&self.axes[1], s[1].clamp(lo, hi));
                let at = |a: usize, b: usize| slice[a * n1 + b];
                blend(&[
                    ((1.0 - wa) * (1.0 - wb), at(i, j)),
                    ((1.0 - wa) * wb, at(i, j + 1)),
                    (wa * (1.0 - wb), at(i + 1, j)),
                    (wa * wb, at(i + 1, j + 1)),
                ])
            }
        }
    }

    /// `v(t, x)`; `violated` marks a history that already left the tube.
    pub fn eval(&self, t: f64, x: &StateVector, violated: bool) -> ExtReal {
        if violated && self.tube.is_some() {
            return ExtReal::PosInf;
        }
        let s = self.reduce(x);
        if let Some(k) = self.times.index_of(t) {
            return self.eval_slice(&self.values[k], &s);
        }
        let n = self.times.n_steps();
        let k = self.times.floor_index(t).min(n - 1);
        let w = ((t - self.times.node(k)) / self.times.dt()).clamp(0.0, 1.0);
        match (self.eval_slice(&self.values[k], &s), self.eval_slice(&self.values[k + 1], &s)) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + w * (b - a)),
            _ => ExtReal::PosInf,
        }
    }

    /// Minimizer over the grid control set of `v` one time node ahead.
    pub(crate) fn lookahead_control(&self, problem: &MayerProblem, t: f64, x: &StateVector) -> StateVector {
        let n = self.times.n_steps();
        let k = self.times.index_of(t).unwrap_or_else(|| self.times.floor_index(t)).min(n - 1);
        let h = (self.times.node(k + 1) - t).max(1e-3 * self.times.dt());
        let next = &self.values[k + 1];
        match self.reduction {
            Reduction::Radial { control_radius, .. } => {
                let r = x.norm();
                let s = StateVector::new(vec![r]);
                let mut best = (ExtReal::PosInf, 0.0);
                for w in RADIAL_CONTROLS {
                    let v = self.eval_slice(next, &self.flow(&s, &StateVector::new(vec![w * control_radius]), h));
                    if v < best.0 {
                        best = (v, w * control_radius);
                    }
                }
                if r > 0.0 {
                    x.scaled(best.1 / r)
                } else {
                    StateVector::zeros(x.dim())
                }
            }
            Reduction::Modal => {
                let controls = self.modal_controls(&problem.mf, x);
                let mut best = (ExtReal::PosInf, 0);
                for (i, c) in controls.iter().enumerate() {
                    let v = self.eval_slice(next, &self.flow(x, c, h));
                    if v < best.0 {
                        best = (v, i);
                    }
                }
                controls[best.1].clone()
            }
        }
    }

    /// CSV with header `t,r,violated,value` (radial) or
    /// `t,x_1[,x_2],violated,value` (modal), every `time_stride`-th time node
    /// plus the last. Tube costs add `violated = true` rows, all `inf`.
    pub fn to_csv(&self, time_stride: usize) -> String {
        let stride = time_stride.max(1);
        let mut out = String::from("t,");
        match self.reduction {
            Reduction::Radial { .. } => out.push_str("r,"),
            Reduction::Modal => {
                for k in 1..=self.axes.len() {
                    let _ = write!(out, "x_{k},");
                }
            }
        }
        out.push_str("violated,value\n");
        let nodes = self.node_states();
        let n_t = self.values.len();
        let mut ks: Vec<usize> = (0..n_t).step_by(stride).collect();
        if ks.last() != Some(&(n_t - 1)) {
            ks.push(n_t - 1);
        }
        let flags: &[bool] = if self.tube.is_some() { &[false, true] } else { &[false] };
        for k in ks {
            let t = self.times.node(k);
            for &violated in flags {
                for (s, v) in nodes.iter().zip(&self.values[k]) {
                    let _ = write!(out, "{t}");
                    for c in s.iter() {
                        let _ = write!(out, ",{c}");
                    }
                    let v = if violated { ExtReal::PosInf } else { *v };
                    let _ = writeln!(out, ",{violated},{v}");
                }
            }
        }
        out
    }
}
