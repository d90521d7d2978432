//! Seeded sample clouds used by the hypothesis verifiers and trajectory samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gelfand::{SpectralTriple, StateVector};

pub type SampleRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard Gaussian vector of length `dim`.
pub fn gaussian(rng: &mut SampleRng, dim: usize) -> StateVector {
    StateVector::new((0..dim).map(|_| StandardNormal.sample(rng)).collect())
}

/// Uniform direction on the unit sphere of `H`.
pub fn unit_direction(rng: &mut SampleRng, dim: usize) -> StateVector {
    loop {
        let g = gaussian(rng, dim);
        let n = g.norm();
        if n > 1e-12 {
            return g.scaled(1.0 / n);
        }
    }
}

/// Uniform point of the closed H-ball `B(0, radius)`.
pub fn uniform_in_h_ball(rng: &mut SampleRng, dim: usize, radius: f64) -> StateVector {
    let u: f64 = rng.random();
    unit_direction(rng, dim).scaled(radius * u.powf(1.0 / dim as f64))
}

/// Mixture of uniform and Gaussian clouds over scaled balls of `V`.
///
/// Half of the samples are uniform in a V-ball of a randomly chosen scale,
/// the other half are Gaussian with `E‖x‖² = scale²`.
#[derive(Debug, Clone)]
pub struct StateSampler {
    pub scales: Vec<f64>,
}

impl Default for StateSampler {
    fn default() -> Self {
        StateSampler {
            scales: vec![0.1, 1.0, 3.0],
        }
    }
}

impl StateSampler {
    pub fn new(scales: Vec<f64>) -> Self {
        assert!(!scales.is_empty(), "sampler needs at least one scale");
        StateSampler { scales }
    }

    pub fn sample_state(&self, rng: &mut SampleRng, triple: &SpectralTriple) -> StateVector {
        let n = triple.dim();
        let scale = self.scales[rng.random_range(0..self.scales.len())];
        let z = gaussian(rng, n);
        if rng.random_bool(0.5) {
            let vn = triple.v_norm(&z);
            let u: f64 = rng.random();
            if vn == 0.0 {
                return triple.zeros();
            }
            z.scaled(scale * u.powf(1.0 / n as f64) / vn)
        } else {
            let sigma = scale / (n as f64).sqrt();
            StateVector::new(
                z.iter()
                    .zip(triple.eigenvalues())
                    .map(|(zk, l)| sigma * zk / l.sqrt())
                    .collect(),
            )
        }
    }

    pub fn sample_time(&self, rng: &mut SampleRng, triple: &SpectralTriple) -> f64 {
        rng.random::<f64>() * triple.horizon()
    }
}
