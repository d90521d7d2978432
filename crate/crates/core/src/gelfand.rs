//! Spectral model of the Gelfand triple `V ⊂ H ⊂ V*`.
//!
//! Elements are stored as coefficients in an orthonormal eigenbasis of `H`
//! with eigenvalue weights `λ_k > 0`. In that basis
//!
//! * `|x|   = (Σ x_k²)^{1/2}`        (H norm)
//! * `‖x‖   = (Σ λ_k x_k²)^{1/2}`    (V norm)
//! * `‖x‖_* = (Σ x_k² / λ_k)^{1/2}`  (V* norm)
//! * `⟨g, v⟩ = Σ g_k v_k`            (duality pairing, equal to the H inner product)

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::Serialize;

use crate::error::{Error, Result};

/// Coefficients of an element of `V`, `H` or `V*` in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Self {
        StateVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim])
    }

    /// The `k`-th unit vector (zero based).
    pub fn unit(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean dot product of coefficient vectors.
    pub fn dot(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot product");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean length of the coefficient vector, i.e. the H norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> StateVector {
        StateVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &StateVector) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in axpy");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Linear interpolation `(1 - w) * a + w * b`.
    pub fn lerp(a: &StateVector, b: &StateVector, w: f64) -> StateVector {
        assert_eq!(a.dim(), b.dim(), "dimension mismatch in lerp");
        StateVector(a.0.iter().zip(&b.0).map(|(x, y)| (1.0 - w) * x + w * y).collect())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, rhs: StateVector) -> StateVector {
        &self + &rhs
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, rhs: StateVector) -> StateVector {
        &self - &rhs
    }
}

impl AddAssign<&StateVector> for StateVector {
    fn add_assign(&mut self, rhs: &StateVector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&StateVector> for StateVector {
    fn sub_assign(&mut self, rhs: &StateVector) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<&StateVector> for f64 {
    type Output = StateVector;
    fn mul(self, rhs: &StateVector) -> StateVector {
        rhs.scaled(self)
    }
}

impl Neg for &StateVector {
    type Output = StateVector;
    fn neg(self) -> StateVector {
        self.scaled(-1.0)
    }
}

/// Galerkin truncation of a Gelfand triple together with the exponent `p` and
/// the time horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralTriple {
    eigenvalues: Vec<f64>,
    p: f64,
    horizon: f64,
}

impl SpectralTriple {
    pub fn new(eigenvalues: Vec<f64>, p: f64, horizon: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidTriple("dimension must be positive".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidTriple(format!(
                "eigenvalues must be finite and strictly positive, found {bad}"
            )));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTriple("eigenvalues must be nondecreasing".into()));
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::InvalidTriple(format!("exponent p must be >= 2, found {p}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidTriple(format!(
                "horizon must be positive, found {horizon}"
            )));
        }
        Ok(SpectralTriple {
            eigenvalues,
            p,
            horizon,
        })
    }

    /// Dirichlet Laplacian on `(0, π)`: `λ_k = k²`.
    pub fn k_squared(dim: usize, p: f64, horizon: f64) -> Result<Self> {
        Self::new((1..=dim).map(|k| (k * k) as f64).collect(), p, horizon)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same triple with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.eigenvalues.clone(), self.p, horizon)
    }

    pub fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            })
        }
    }

    fn assert_dim(&self, x: &StateVector) {
        assert_eq!(
            x.dim(),
            self.dim(),
            "state vector length does not match the triple dimension"
        );
    }

    pub fn h_norm(&self, x: &StateVector) -> f64 {
        self.assert_dim(x);
        x.norm()
    }

    pub fn v_norm(&self, x: &StateVector) -> f64 {
        self.assert_dim(x);
        x.iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn vstar_norm(&self, x: &StateVector) -> f64 {
        self.assert_dim(x);
        x.iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| c * c / l)
            .sum::<f64>()
            .sqrt()
    }

    /// Duality pairing `⟨g, v⟩`; coincides with the H inner product.
    pub fn pairing(&self, g: &StateVector, v: &StateVector) -> f64 {
        self.assert_dim(g);
        self.assert_dim(v);
        g.dot(v)
    }

    pub fn zeros(&self) -> StateVector {
        StateVector::zeros(self.dim())
    }

    pub fn unit(&self, k: usize) -> StateVector {
        StateVector::unit(self.dim(), k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplace(dim: usize) -> SpectralTriple {
        SpectralTriple::k_squared(dim, 2.0, 1.0).unwrap()
    }

    #[test]
    fn h_norm_examples() {
        let t = laplace(4);
        assert_eq!(t.h_norm(&StateVector::new(vec![3.0, 4.0, 0.0, 0.0])), 5.0);
        assert_eq!(t.h_norm(&t.zeros()), 0.0);
        let t3 = laplace(3);
        let ones = StateVector::new(vec![1.0; 3]);
        assert!((t3.h_norm(&ones) - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn v_and_vstar_norm_examples() {
        let t = laplace(2);
        assert_eq!(t.v_norm(&t.unit(1)), 2.0);
        assert_eq!(t.vstar_norm(&t.unit(1)), 0.5);
        assert_eq!(t.v_norm(&t.unit(0)), 1.0);
        assert_eq!(t.vstar_norm(&t.unit(0)), 1.0);
        let x = StateVector::new(vec![1.0, 1.0]);
        assert!((t.v_norm(&x) - 5f64.sqrt()).abs() < 1e-15);
        assert!((t.vstar_norm(&x) - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pairing_examples() {
        let t = laplace(2);
        assert_eq!(t.pairing(&t.unit(0), &t.unit(0)), 1.0);
        assert_eq!(t.pairing(&t.unit(0), &t.unit(1)), 0.0);
        let g = StateVector::new(vec![2.0, -1.0]);
        let v = StateVector::new(vec![3.0, 5.0]);
        assert_eq!(t.pairing(&g, &v), 1.0);
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn dimension_mismatch_is_a_contract_violation() {
        laplace(3).h_norm(&StateVector::zeros(2));
    }

    #[test]
    fn invalid_triples_are_rejected() {
        assert!(SpectralTriple::new(vec![1.0, 0.0], 2.0, 1.0).is_err());
        assert!(SpectralTriple::new(vec![4.0, 1.0], 2.0, 1.0).is_err());
        assert!(SpectralTriple::new(vec![1.0], 1.5, 1.0).is_err());
        assert!(SpectralTriple::new(vec![1.0], 2.0, 0.0).is_err());
        assert!(SpectralTriple::new(vec![], 2.0, 1.0).is_err());
    }

    #[test]
    fn conjugate_exponent_is_derived() {
        let t = SpectralTriple::k_squared(2, 3.0, 1.0).unwrap();
        assert!((1.0 / t.p() + 1.0 / t.q() - 1.0).abs() < 1e-15);
    }

    fn triple_and_vectors() -> impl Strategy<Value = (SpectralTriple, StateVector, StateVector, f64)> {
        (1usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..50.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
                -5.0f64..5.0,
            )
                .prop_map(|(mut l, x, y, a)| {
                    l.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    (
                        SpectralTriple::new(l, 2.0, 1.0).unwrap(),
                        StateVector::new(x),
                        StateVector::new(y),
                        a,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_in_the_triple((t, x, _y, _a) in triple_and_vectors()) {
            let lhs = t.vstar_norm(&x) * t.v_norm(&x);
            let rhs = t.pairing(&x, &x);
            prop_assert!((rhs - t.h_norm(&x).powi(2)).abs() <= 1e-12 * (1.0 + rhs));
            prop_assert!(lhs >= rhs - 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn embedding_chain((t, x, _y, _a) in triple_and_vectors()) {
            let inv = 1.0 / t.lambda_min().sqrt();
            let h = t.h_norm(&x);
            prop_assert!(t.vstar_norm(&x) <= inv * h * (1.0 + 1e-12) + 1e-300);
            prop_assert!(h <= inv * t.v_norm(&x) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn norms_are_homogeneous_and_subadditive((t, x, y, a) in triple_and_vectors()) {
            let s = &x + &y;
            let ax = x.scaled(a);
            for norm in [SpectralTriple::h_norm, SpectralTriple::v_norm, SpectralTriple::vstar_norm] {
                let nx = norm(&t, &x);
                prop_assert!((norm(&t, &ax) - a.abs() * nx).abs() <= 1e-10 * (1.0 + a.abs() * nx));
                prop_assert!(norm(&t, &s) <= nx + norm(&t, &y) + 1e-10);
            }
        }
    }
}
