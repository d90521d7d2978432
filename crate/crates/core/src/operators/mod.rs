//! Evaluable operators `A: [0, T] × V → V*` in eigenbasis coordinates.
//!
//! Every operator is split as `A(t, x) = D x + N(t, x)` where `D` is a
//! nonnegative diagonal (the stiff part, treated implicitly by the solver) and
//! `N` is the remainder.

mod certificates;
mod checks;
mod fit;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use certificates::{GrowthCoercivityCertificate, MonotonicityCertificate, StateLaw, TimeLaw};
pub use checks::{
    check_coercivity, check_growth, check_hemicontinuity, check_local_monotonicity,
    coercivity_witness, growth_witness, monotonicity_witnesses, CheckOptions,
};
pub use fit::{fit_certificates, FitReport, FittedCertificates};

use crate::error::{Error, Result};
use crate::gelfand::{SpectralTriple, StateVector};

pub type OperatorFn = Arc<dyn Fn(f64, &StateVector) -> StateVector + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Heat,
    Burgers,
    ReactionDiffusion,
    Custom,
}

/// Interior nodes `ξ_j = j π / M`, `j = 1..M-1`, of a uniform grid on `(0, π)`
/// together with the discrete sine transform onto the orthonormal modes
/// `φ_k(ξ) = (2/π)^{1/2} sin(k ξ)`.
///
/// With the discrete inner product `(u, v)_h = h Σ u_j v_j` the sampled modes
/// are exactly orthonormal, so grid functions and coefficient vectors share
/// the same H inner product.
#[derive(Debug, Clone)]
pub struct SineGrid {
    n: usize,
    h: f64,
    // basis[j * n + k] = φ_{k+1}(ξ_{j+1})
    basis: Vec<f64>,
}

impl SineGrid {
    pub fn new(interior_nodes: usize) -> Self {
        let n = interior_nodes;
        let h = std::f64::consts::PI / (n + 1) as f64;
        let amp = (2.0 / std::f64::consts::PI).sqrt();
        let mut basis = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                basis[j * n + k] = amp * (((k + 1) * (j + 1)) as f64 * h).sin();
            }
        }
        SineGrid { n, h, basis }
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|j| j as f64 * self.h).collect()
    }

    /// Grid values `u_j = Σ_k c_k φ_k(ξ_j)`.
    pub fn to_grid(&self, c: &StateVector) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let row = &self.basis[j * n..(j + 1) * n];
                row.iter().zip(c.iter()).map(|(b, ck)| b * ck).sum()
            })
            .collect()
    }

    /// Coefficients `c_k = h Σ_j g_j φ_k(ξ_j)`.
    pub fn to_coeffs(&self, g: &[f64]) -> StateVector {
        let n = self.n;
        let mut c = vec![0.0; n];
        for (j, gj) in g.iter().enumerate() {
            let row = &self.basis[j * n..(j + 1) * n];
            for (ck, b) in c.iter_mut().zip(row) {
                *ck += gj * b;
            }
        }
        for ck in c.iter_mut() {
            *ck *= self.h;
        }
        StateVector::new(c)
    }
}

#[derive(Clone)]
enum Body {
    Heat,
    Burgers { nu: f64, grid: SineGrid },
    ReactionDiffusion { reaction: f64, grid: SineGrid },
    Custom { label: String, eval: OperatorFn },
}

/// An operator together with the triple it acts on.
#[derive(Clone)]
pub struct Operator {
    triple: SpectralTriple,
    kind: OperatorKind,
    stiff: Vec<f64>,
    body: Body,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Operator");
        d.field("kind", &self.kind).field("dim", &self.triple.dim());
        match &self.body {
            Body::Burgers { nu, .. } => {
                d.field("nu", nu);
            }
            Body::ReactionDiffusion { reaction, .. } => {
                d.field("reaction", reaction);
            }
            Body::Custom { label, .. } => {
                d.field("label", label);
            }
            Body::Heat => {}
        }
        d.finish()
    }
}

impl Operator {
    /// `A x = (λ_k x_k)_k`, the Dirichlet Laplacian in its eigenbasis.
    pub fn heat(triple: &SpectralTriple) -> Self {
        Operator {
            triple: triple.clone(),
            kind: OperatorKind::Heat,
            stiff: triple.eigenvalues().to_vec(),
            body: Body::Heat,
        }
    }

    /// Viscous Burgers operator `-ν u'' + u u'` on `(0, π)` with homogeneous
    /// Dirichlet data.
    ///
    /// Diffusion acts diagonally on the modes; convection uses the
    /// skew-symmetric central form `(1/3)[(u²)' + u u']` on the interior grid
    /// with `dim + 1` cells, so `⟨A(u), u⟩ = ν ‖u‖²` holds to rounding.
    pub fn burgers(triple: &SpectralTriple, nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidInput(format!("viscosity must be positive, found {nu}")));
        }
        Ok(Operator {
            triple: triple.clone(),
            kind: OperatorKind::Burgers,
            stiff: triple.eigenvalues().iter().map(|l| nu * l).collect(),
            body: Body::Burgers {
                nu,
                grid: SineGrid::new(triple.dim()),
            },
        })
    }

    /// `A(u) = d (-u'') + κ (u³ - u)`, the Allen–Cahn type reaction-diffusion
    /// operator; the cubic acts pointwise on the sine grid.
    pub fn reaction_diffusion(triple: &SpectralTriple, diffusion: f64, reaction: f64) -> Result<Self> {
        if !(diffusion.is_finite() && diffusion > 0.0) {
            return Err(Error::InvalidInput(format!(
                "diffusion must be positive, found {diffusion}"
            )));
        }
        if !(reaction.is_finite() && reaction >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "reaction coefficient must be nonnegative, found {reaction}"
            )));
        }
        Ok(Operator {
            triple: triple.clone(),
            kind: OperatorKind::ReactionDiffusion,
            stiff: triple.eigenvalues().iter().map(|l| diffusion * l).collect(),
            body: Body::ReactionDiffusion {
                reaction,
                grid: SineGrid::new(triple.dim()),
            },
        })
    }

    /// Arbitrary operator. `stiff` is the diagonal treated implicitly by the
    /// semi-implicit solver; it must be nonnegative.
    pub fn custom(
        triple: &SpectralTriple,
        label: impl Into<String>,
        stiff: Vec<f64>,
        eval: OperatorFn,
    ) -> Result<Self> {
        if stiff.len() != triple.dim() {
            return Err(Error::DimensionMismatch {
                expected: triple.dim(),
                actual: stiff.len(),
            });
        }
        if stiff.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidInput("stiff diagonal must be nonnegative".into()));
        }
        Ok(Operator {
            triple: triple.clone(),
            kind: OperatorKind::Custom,
            stiff,
            body: Body::Custom {
                label: label.into(),
                eval,
            },
        })
    }

    /// Linear operator given by a dense matrix in eigenbasis coordinates.
    pub fn linear_table(triple: &SpectralTriple, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = triple.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("custom table must be {n} x {n}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("custom table entries must be finite".into()));
        }
        let stiff = (0..n).map(|k| rows[k][k].max(0.0)).collect();
        let eval: OperatorFn = Arc::new(move |_t, x: &StateVector| {
            StateVector::new(rows.iter().map(|r| r.iter().zip(x.iter()).map(|(a, b)| a * b).sum()).collect())
        });
        Self::custom(triple, "table", stiff, eval)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn triple(&self) -> &SpectralTriple {
        &self.triple
    }

    pub fn label(&self) -> &str {
        match &self.body {
            Body::Heat => "heat",
            Body::Burgers { .. } => "burgers",
            Body::ReactionDiffusion { .. } => "reaction_diffusion",
            Body::Custom { label, .. } => label,
        }
    }

    /// Viscosity of a Burgers operator.
    pub fn viscosity(&self) -> Option<f64> {
        match &self.body {
            Body::Burgers { nu, .. } => Some(*nu),
            _ => None,
        }
    }

    pub fn sine_grid(&self) -> Option<&SineGrid> {
        match &self.body {
            Body::Burgers { grid, .. } | Body::ReactionDiffusion { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// True when `A` is exactly its stiff diagonal (no explicit remainder).
    pub fn is_diagonal_linear(&self) -> bool {
        matches!(self.body, Body::Heat)
    }

    pub fn stiff_diagonal(&self) -> &[f64] {
        &self.stiff
    }

    /// V*-coordinates of `A(t, x)`.
    pub fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.triple.check_dim(x)?;
        let mut out = self.explicit_unchecked(t, x);
        for ((o, d), xk) in out.as_mut_slice().iter_mut().zip(&self.stiff).zip(x.iter()) {
            *o += d * xk;
        }
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::OperatorEvaluation { t })
        }
    }

    /// The non-stiff remainder `N(t, x) = A(t, x) - D x`.
    pub fn explicit_part(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.triple.check_dim(x)?;
        let out = self.explicit_unchecked(t, x);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::OperatorEvaluation { t })
        }
    }

    fn explicit_unchecked(&self, t: f64, x: &StateVector) -> StateVector {
        match &self.body {
            Body::Heat => self.triple.zeros(),
            Body::Burgers { grid, .. } => {
                let u = grid.to_grid(x);
                grid.to_coeffs(&skew_convection(&u, grid.spacing()))
            }
            Body::ReactionDiffusion { reaction, grid } => {
                let u = grid.to_grid(x);
                let r: Vec<f64> = u.iter().map(|v| reaction * (v * v * v - v)).collect();
                grid.to_coeffs(&r)
            }
            Body::Custom { eval, .. } => {
                let mut full = eval(t, x);
                if full.dim() != x.dim() {
                    return StateVector::new(vec![f64::NAN; x.dim()]);
                }
                for ((o, d), xk) in full.as_mut_slice().iter_mut().zip(&self.stiff).zip(x.iter()) {
                    *o -= d * xk;
                }
                full
            }
        }
    }
}

/// `(1/3)[(u²)' + u u']` with central differences and zero boundary values.
fn skew_convection(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let at = |j: isize| -> f64 {
        if j < 0 || j as usize >= n {
            0.0
        } else {
            u[j as usize]
        }
    };
    (0..n as isize)
        .map(|j| {
            let (l, c, r) = (at(j - 1), at(j), at(j + 1));
            ((r * r - l * l) + c * (r - l)) / (6.0 * h)
        })
        .collect()
}
