//! Constant fitting for operators whose hypothesis constants are not known in
//! closed form.

use rayon::prelude::*;
use serde::Serialize;

use super::certificates::{GrowthCoercivityCertificate, MonotonicityCertificate, StateLaw, TimeLaw};
use super::Operator;
use crate::error::Result;
use crate::sampling::{SampleRng, StateSampler};

/// Safety factor applied to every fitted ratio.
const SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub samples: usize,
    /// Largest `⟨A x - A y, x - y⟩⁻ / (|x - y|² ‖y‖²)` over the cloud.
    pub monotonicity_ratio: f64,
    /// Largest `‖A x‖_* / (‖x‖^{p-1} (1 + |x|))`.
    pub growth_ratio: f64,
    /// Largest `(c2 ‖x‖^p - ⟨A x, x⟩)⁺ / |x|²`.
    pub coercivity_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FittedCertificates {
    pub monotonicity: MonotonicityCertificate,
    pub growth_coercivity: GrowthCoercivityCertificate,
    pub fit: FitReport,
}

/// Fits `η(y) = C ‖y‖²`, `c1` (with `α = 1`, `f^A = 0`) and `c3` for a given
/// coercivity constant `c2`, each as the worst sampled ratio times 2.
///
/// `c0` is set equal to the `η` coefficient so that the side bound
/// `ρ(x) + η(x) ≤ |c0| (1 + ‖x‖^p)(1 + |x|^β)` holds with `β = 1`, since
/// `‖x‖² ≤ 1 + ‖x‖^p` for `p ≥ 2`.
pub fn fit_certificates(
    op: &Operator,
    c2: f64,
    sampler: &StateSampler,
    rng: &mut SampleRng,
    n_samples: usize,
) -> Result<FittedCertificates> {
    let tr = op.triple();
    let cloud: Vec<_> = (0..n_samples)
        .map(|_| {
            let t = sampler.sample_time(rng, tr);
            (t, sampler.sample_state(rng, tr), sampler.sample_state(rng, tr))
        })
        .collect();
    let ratios: Vec<[f64; 3]> = cloud
        .par_iter()
        .map(|(t, x, y)| -> Result<[f64; 3]> {
            let ax = op.apply(*t, x)?;
            let ay = op.apply(*t, y)?;
            let d = x - y;
            let dd = tr.h_norm(&d).powi(2);
            let vy = tr.v_norm(y).powi(2);
            let neg = (-tr.pairing(&(&ax - &ay), &d)).max(0.0);
            let mono = if dd * vy > 0.0 { neg / (dd * vy) } else { 0.0 };
            let vx = tr.v_norm(x);
            let hx = tr.h_norm(x);
            let denom = vx.powf(tr.p() - 1.0) * (1.0 + hx);
            let growth = if denom > 0.0 { tr.vstar_norm(&ax) / denom } else { 0.0 };
            let deficit = (c2 * vx.powf(tr.p()) - tr.pairing(&ax, x)).max(0.0);
            let coer = if hx > 0.0 { deficit / (hx * hx) } else { 0.0 };
            Ok([mono, growth, coer])
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| ratios.iter().map(|r| r[k]).fold(0.0, f64::max);
    let fit = FitReport {
        samples: n_samples,
        monotonicity_ratio: worst(0),
        growth_ratio: worst(1),
        coercivity_ratio: worst(2),
    };
    let c = SAFETY * fit.monotonicity_ratio;
    Ok(FittedCertificates {
        monotonicity: MonotonicityCertificate {
            c0: c,
            rho: StateLaw::Zero,
            eta: StateLaw::VNormPower { coef: c, power: 2.0 },
            beta: 1.0,
        },
        growth_coercivity: GrowthCoercivityCertificate {
            c1: SAFETY * fit.growth_ratio,
            alpha: 1.0,
            c2,
            c3: SAFETY * fit.coercivity_ratio,
            f_a: TimeLaw::Zero,
        },
        fit,
    })
}
