//! Sampling verifiers for the operator hypotheses.
//!
//! Each verifier draws its whole sample cloud sequentially from the seeded
//! generator, evaluates the inequalities in parallel and records margins in
//! sampling order, so reports are independent of the worker count.

use rayon::prelude::*;

use super::certificates::{GrowthCoercivityCertificate, MonotonicityCertificate};
use super::Operator;
use crate::gelfand::StateVector;
use crate::report::{HypothesisReport, ReportBuilder, Witness};
use crate::sampling::{SampleRng, StateSampler};

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// A check passes when its minimum margin is at least `-tol`.
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { tol: 1e-12 }
    }
}

fn witness(check: &str, t: f64, x: &StateVector, y: Option<&StateVector>, lhs: f64, rhs: f64) -> Witness {
    Witness {
        check: check.to_string(),
        t,
        s: None,
        x: Some(x.as_slice().to_vec()),
        y: y.map(|y| y.as_slice().to_vec()),
        v: None,
        lhs,
        rhs,
    }
}

/// The local monotonicity inequality at `(t, x, y)` and the bound on
/// `ρ(x) + η(x)`, as `lhs ≥ rhs` witnesses.
pub fn monotonicity_witnesses(
    op: &Operator,
    cert: &MonotonicityCertificate,
    t: f64,
    x: &StateVector,
    y: &StateVector,
) -> [Witness; 2] {
    let tr = op.triple();
    let (lhs, rhs) = match (op.apply(t, x), op.apply(t, y)) {
        (Ok(ax), Ok(ay)) => {
            let d = x - y;
            let lhs = tr.pairing(&(&ax - &ay), &d);
            let penalty = cert.c0 + cert.rho.eval(tr, x) + cert.eta.eval(tr, y);
            (lhs, -penalty * tr.h_norm(&d).powi(2))
        }
        _ => (f64::NAN, 0.0),
    };
    let bound = cert.c0.abs() * (1.0 + tr.v_norm(x).powf(tr.p())) * (1.0 + tr.h_norm(x).powf(cert.beta));
    let sum = cert.rho.eval(tr, x) + cert.eta.eval(tr, x);
    [
        witness("local_monotonicity", t, x, Some(y), lhs, rhs),
        witness("rho_eta_bound", t, x, None, bound, sum),
    ]
}

pub fn growth_witness(op: &Operator, cert: &GrowthCoercivityCertificate, t: f64, x: &StateVector) -> Witness {
    let tr = op.triple();
    let rhs = match op.apply(t, x) {
        Ok(ax) => tr.vstar_norm(&ax),
        Err(_) => f64::NAN,
    };
    let fa = cert.f_a.eval(t).max(0.0);
    let lhs = (fa.powf(1.0 / tr.q()) + cert.c1 * tr.v_norm(x).powf(tr.p() - 1.0))
        * (1.0 + tr.h_norm(x).powf(cert.alpha));
    witness("growth", t, x, None, lhs, rhs)
}

pub fn coercivity_witness(op: &Operator, cert: &GrowthCoercivityCertificate, t: f64, x: &StateVector) -> Witness {
    let tr = op.triple();
    let lhs = match op.apply(t, x) {
        Ok(ax) => tr.pairing(&ax, x),
        Err(_) => f64::NAN,
    };
    let rhs = cert.c2 * tr.v_norm(x).powf(tr.p()) - cert.c3 * tr.h_norm(x).powi(2) - cert.f_a.eval(t);
    witness("coercivity", t, x, None, lhs, rhs)
}

fn draw(rng: &mut SampleRng, sampler: &StateSampler, op: &Operator, n: usize, pairs: bool) -> Vec<(f64, StateVector, StateVector)> {
    let tr = op.triple();
    (0..n)
        .map(|_| {
            let t = sampler.sample_time(rng, tr);
            let x = sampler.sample_state(rng, tr);
            let y = if pairs { sampler.sample_state(rng, tr) } else { tr.zeros() };
            (t, x, y)
        })
        .collect()
}

fn collect(name: &str, opts: CheckOptions, witnesses: Vec<Witness>) -> HypothesisReport {
    let mut b = ReportBuilder::new(name, opts.tol);
    for w in witnesses {
        b.record(w);
    }
    b.finish()
}

pub fn check_local_monotonicity(
    op: &Operator,
    cert: &MonotonicityCertificate,
    sampler: &StateSampler,
    rng: &mut SampleRng,
    n_samples: usize,
    opts: CheckOptions,
) -> HypothesisReport {
    let cloud = draw(rng, sampler, op, n_samples, true);
    let ws: Vec<Witness> = cloud
        .par_iter()
        .flat_map_iter(|(t, x, y)| monotonicity_witnesses(op, cert, *t, x, y))
        .collect();
    collect("local_monotonicity", opts, ws)
}

pub fn check_growth(
    op: &Operator,
    cert: &GrowthCoercivityCertificate,
    sampler: &StateSampler,
    rng: &mut SampleRng,
    n_samples: usize,
    opts: CheckOptions,
) -> HypothesisReport {
    let cloud = draw(rng, sampler, op, n_samples, false);
    let ws: Vec<Witness> = cloud.par_iter().map(|(t, x, _)| growth_witness(op, cert, *t, x)).collect();
    collect("growth", opts, ws)
}

pub fn check_coercivity(
    op: &Operator,
    cert: &GrowthCoercivityCertificate,
    sampler: &StateSampler,
    rng: &mut SampleRng,
    n_samples: usize,
    opts: CheckOptions,
) -> HypothesisReport {
    let cloud = draw(rng, sampler, op, n_samples, false);
    let ws: Vec<Witness> = cloud.par_iter().map(|(t, x, _)| coercivity_witness(op, cert, *t, x)).collect();
    collect("coercivity", opts, ws)
}

/// Smoke test of `s ↦ ⟨A(t, x + s y), v⟩` on `s_grid`.
///
/// Each increment is compared with the increment predicted by its neighbours
/// (linear extrapolation of the slopes). For polynomials of degree ≤ 2 the
/// deviation vanishes up to rounding; a jump shows up as a deviation of the
/// size of the jump. A point is flagged when the deviation exceeds
/// `tol · (1 + local oscillation)`.
pub fn check_hemicontinuity(
    op: &Operator,
    t: f64,
    x: &StateVector,
    y: &StateVector,
    v: &StateVector,
    s_grid: &[f64],
    tol: f64,
) -> HypothesisReport {
    let tr = op.triple();
    let mut b = ReportBuilder::new("hemicontinuity", 0.0);
    let g: Vec<f64> = s_grid
        .iter()
        .map(|s| match op.apply(t, &(x + &y.scaled(*s))) {
            Ok(a) => tr.pairing(&a, v),
            Err(_) => f64::NAN,
        })
        .collect();
    let m = g.len();
    if m < 4 {
        return b.finish();
    }
    let ds: Vec<f64> = s_grid.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..m - 1).map(|i| (g[i + 1] - g[i]) / ds[i]).collect();
    let k = slope.len();
    for i in 0..k {
        let predicted = if i == 0 {
            2.0 * slope[1] - slope[2]
        } else if i == k - 1 {
            2.0 * slope[k - 2] - slope[k - 3]
        } else {
            0.5 * (slope[i - 1] + slope[i + 1])
        };
        let deviation = (slope[i] - predicted).abs() * ds[i];
        let neighbours = [i.checked_sub(1), (i + 1 < k).then_some(i + 1)];
        let osc = neighbours
            .iter()
            .flatten()
            .map(|&j| (slope[j] * ds[j]).abs())
            .fold(0.0, f64::max);
        let deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
        b.record(Witness {
            check: "hemicontinuity".into(),
            t,
            s: Some(s_grid[i]),
            x: Some(x.as_slice().to_vec()),
            y: Some(y.as_slice().to_vec()),
            v: Some(v.as_slice().to_vec()),
            lhs: tol * (1.0 + osc),
            rhs: deviation,
        });
    }
    b.finish()
}
