//! Convex closed right-hand sides `F(t, x) ⊂ H` given as balls or polytopes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gelfand::{SpectralTriple, StateVector};
use crate::report::{HypothesisReport, ReportBuilder, Witness};
use crate::sampling::{uniform_in_h_ball, SampleRng, StateSampler};

/// Default absolute tolerance on `dist(f, F(t, x))` for membership checks.
pub const TOL_F: f64 = 1e-9;

/// A single value `F(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetValue {
    Ball { center: StateVector, radius: f64 },
    Polytope { vertices: Vec<StateVector> },
}

impl SetValue {
    pub fn ball(center: StateVector, radius: f64) -> Self {
        SetValue::Ball { center, radius }
    }

    pub fn point(p: StateVector) -> Self {
        SetValue::Ball { center: p, radius: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetValue::Ball { center, .. } => center.dim(),
            SetValue::Polytope { vertices } => vertices[0].dim(),
        }
    }

    /// `sup_{f ∈ E} (f, d)`.
    pub fn support(&self, d: &StateVector) -> f64 {
        match self {
            SetValue::Ball { center, radius } => center.dot(d) + radius * d.norm(),
            SetValue::Polytope { vertices } => {
                vertices.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// A maximizer of `(f, d)` over the set; the center for `d = 0`.
    pub fn support_point(&self, d: &StateVector) -> StateVector {
        match self {
            SetValue::Ball { center, radius } => {
                let n = d.norm();
                if n == 0.0 {
                    center.clone()
                } else {
                    center + &d.scaled(radius / n)
                }
            }
            SetValue::Polytope { vertices } => {
                let mut best = &vertices[0];
                let mut val = best.dot(d);
                for v in &vertices[1..] {
                    let s = v.dot(d);
                    if s > val {
                        best = v;
                        val = s;
                    }
                }
                best.clone()
            }
        }
    }

    /// Nearest point of the set to `y`.
    pub fn project(&self, y: &StateVector) -> StateVector {
        match self {
            SetValue::Ball { center, radius } => {
                let d = y - center;
                let n = d.norm();
                if n <= *radius {
                    y.clone()
                } else {
                    center + &d.scaled(radius / n)
                }
            }
            SetValue::Polytope { vertices } => {
                let shifted: Vec<StateVector> = vertices.iter().map(|v| v - y).collect();
                let (z, _) = min_norm_point(&shifted);
                &z + y
            }
        }
    }

    pub fn dist(&self, y: &StateVector) -> f64 {
        match self {
            SetValue::Ball { center, radius } => ((y - center).norm() - radius).max(0.0),
            SetValue::Polytope { .. } => (y - &self.project(y)).norm(),
        }
    }

    pub fn contains(&self, y: &StateVector, tol: f64) -> bool {
        self.dist(y) <= tol
    }

    /// `|E| = sup{|f| : f ∈ E}`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            SetValue::Ball { center, radius } => center.norm() + radius,
            SetValue::Polytope { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// Ball center, or the vertex barycenter of a polytope.
    pub fn center(&self) -> StateVector {
        match self {
            SetValue::Ball { center, .. } => center.clone(),
            SetValue::Polytope { vertices } => {
                let mut c = StateVector::zeros(vertices[0].dim());
                for v in vertices {
                    c += v;
                }
                c.scaled(1.0 / vertices.len() as f64)
            }
        }
    }

    /// Finite control set: the vertices of a polytope, `m ± r e_k` for a ball.
    pub fn extreme_points(&self) -> Vec<StateVector> {
        match self {
            SetValue::Ball { center, radius } => {
                if *radius == 0.0 {
                    return vec![center.clone()];
                }
                let n = center.dim();
                let mut out = Vec::with_capacity(2 * n);
                for k in 0..n {
                    let e = StateVector::unit(n, k).scaled(*radius);
                    out.push(center + &e);
                    out.push(center - &e);
                }
                out
            }
            SetValue::Polytope { vertices } => vertices.clone(),
        }
    }

    /// Random point of the set: uniform in a ball, Dirichlet-weighted vertex
    /// combination in a polytope.
    pub fn sample_point(&self, rng: &mut SampleRng) -> StateVector {
        match self {
            SetValue::Ball { center, radius } => center + &uniform_in_h_ball(rng, center.dim(), *radius),
            SetValue::Polytope { vertices } => {
                let w: Vec<f64> = vertices.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let total: f64 = w.iter().sum();
                let mut c = StateVector::zeros(vertices[0].dim());
                for (v, wi) in vertices.iter().zip(&w) {
                    c.axpy(wi / total, v);
                }
                c
            }
        }
    }

    /// Hausdorff excess `sup_{f ∈ self} dist(f, other)`.
    ///
    /// Exact for polytopes and for a ball over a ball; for a ball over a
    /// polytope the upper bound `dist(m, other) + r` is returned.
    pub fn excess_over(&self, other: &SetValue) -> f64 {
        match (self, other) {
            (SetValue::Ball { center: m1, radius: r1 }, SetValue::Ball { center: m2, radius: r2 }) => {
                ((m1 - m2).norm() + r1 - r2).max(0.0)
            }
            (SetValue::Ball { center, radius }, SetValue::Polytope { .. }) => other.dist(center) + radius,
            (SetValue::Polytope { vertices }, _) => {
                vertices.iter().map(|v| other.dist(v)).fold(0.0, f64::max)
            }
        }
    }
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
///
/// Returns the point and its convex weights over `points`.
fn min_norm_point(points: &[StateVector]) -> (StateVector, Vec<f64>) {
    let m = points.len();
    let scale = points.iter().map(|p| p.dot(p)).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-13;
    let start = (0..m)
        .min_by(|&a, &b| points[a].dot(&points[a]).total_cmp(&points[b].dot(&points[b])))
        .unwrap();
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let combine = |active: &[usize], w: &[f64]| {
        let mut x = StateVector::zeros(points[0].dim());
        for (&i, wi) in active.iter().zip(w) {
            x.axpy(*wi, &points[i]);
        }
        x
    };
    let mut x = points[start].clone();
    for _ in 0..(50 * m + 100) {
        let xx = x.dot(&x);
        let j = (0..m)
            .min_by(|&a, &b| x.dot(&points[a]).total_cmp(&x.dot(&points[b])))
            .unwrap();
        if xx - x.dot(&points[j]) <= eps * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let alpha = affine_min(points, &active);
            if alpha.iter().all(|a| *a > eps) {
                lambda = alpha;
                x = combine(&active, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= eps && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let keep: Vec<bool> = lambda.iter().map(|l| *l > eps).collect();
            let mut k = 0;
            active.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            lambda.retain(|l| *l > eps);
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combine(&active, &lambda);
            if active.len() == 1 {
                break;
            }
        }
    }
    let mut weights = vec![0.0; m];
    for (&i, l) in active.iter().zip(&lambda) {
        weights[i] = *l;
    }
    (x, weights)
}

/// Weights of the minimum-norm point of the affine hull of `points[active]`.
fn affine_min(points: &[StateVector], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            a[(r, c)] = points[i].dot(&points[j]);
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k + 1);
    b[k] = 1.0;
    let sol = a
        .clone()
        .lu()
        .solve(&b)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| a.svd(true, true).solve(&b, 1e-14).ok())
        .unwrap_or_else(|| {
            let mut s = DVector::zeros(k + 1);
            s[0] = 1.0;
            s
        });
    sol.iter().take(k).copied().collect()
}

/// Radius as a function of `|x|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RadiusLaw {
    Constant { radius: f64 },
    /// `base + slope · |x|`
    Affine { base: f64, slope: f64 },
    /// `base`, plus `jump` wherever `|x| > threshold`.
    Step { base: f64, jump: f64, threshold: f64 },
}

impl RadiusLaw {
    pub fn eval(&self, hx: f64) -> f64 {
        match self {
            RadiusLaw::Constant { radius } => *radius,
            RadiusLaw::Affine { base, slope } => base + slope * hx,
            RadiusLaw::Step { base, jump, threshold } => {
                if hx > *threshold {
                    base + jump
                } else {
                    *base
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RadiusLaw::Constant { radius } => radius.is_finite() && *radius >= 0.0,
            RadiusLaw::Affine { base, slope } => {
                base.is_finite() && slope.is_finite() && *base >= 0.0 && *slope >= 0.0
            }
            RadiusLaw::Step { base, jump, threshold } => {
                base.is_finite() && jump.is_finite() && threshold.is_finite() && *base >= 0.0 && base + jump >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("radius law {self:?} is not finite and nonnegative")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CenterLaw {
    Zero,
    Constant { center: StateVector },
    /// `m(t, x) = factor · x`
    Scaled { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultifunctionKind {
    CenteredBall,
    AffineBall,
    Polytope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
enum Shape {
    Ball { center: CenterLaw, radius: RadiusLaw },
    Polytope { vertices: Vec<StateVector> },
}

/// `F: [0, T] × H ⇝ H` with growth constant `c_F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multifunction {
    kind: MultifunctionKind,
    shape: Shape,
    c_f: f64,
}

impl Multifunction {
    /// `F(t, x) = B(0, r(|x|))`.
    pub fn centered_ball(radius: RadiusLaw, c_f: f64) -> Result<Self> {
        radius.validate()?;
        Self::checked(MultifunctionKind::CenteredBall, Shape::Ball { center: CenterLaw::Zero, radius }, c_f)
    }

    /// `F ≡ {0}`.
    pub fn zero() -> Self {
        Multifunction {
            kind: MultifunctionKind::CenteredBall,
            shape: Shape::Ball {
                center: CenterLaw::Zero,
                radius: RadiusLaw::Constant { radius: 0.0 },
            },
            c_f: 0.0,
        }
    }

    /// `F(t, x) = B(m(x), r(|x|))`.
    pub fn affine_ball(center: CenterLaw, radius: RadiusLaw, c_f: f64) -> Result<Self> {
        radius.validate()?;
        match &center {
            CenterLaw::Constant { center } if !center.is_finite() => {
                return Err(Error::InvalidInput("ball center must be finite".into()))
            }
            CenterLaw::Scaled { factor } if !factor.is_finite() => {
                return Err(Error::InvalidInput("center factor must be finite".into()))
            }
            _ => {}
        }
        Self::checked(MultifunctionKind::AffineBall, Shape::Ball { center, radius }, c_f)
    }

    /// Constant polytope `F(t, x) = conv(vertices)`.
    pub fn polytope(vertices: Vec<StateVector>, c_f: f64) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::InvalidInput("polytope needs at least one vertex".into()));
        };
        let n = first.dim();
        if let Some(v) = vertices.iter().find(|v| v.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: v.dim() });
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polytope vertices must be finite".into()));
        }
        Self::checked(MultifunctionKind::Polytope, Shape::Polytope { vertices }, c_f)
    }

    fn checked(kind: MultifunctionKind, shape: Shape, c_f: f64) -> Result<Self> {
        if !(c_f.is_finite() && c_f >= 0.0) {
            return Err(Error::InvalidInput(format!("c_F must be finite and nonnegative, found {c_f}")));
        }
        Ok(Multifunction { kind, shape, c_f })
    }

    pub fn kind(&self) -> MultifunctionKind {
        self.kind
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    /// Radius of a constant centered ball, the only shape admitting radial
    /// reductions.
    pub fn constant_centered_radius(&self) -> Option<f64> {
        match &self.shape {
            Shape::Ball {
                center: CenterLaw::Zero,
                radius: RadiusLaw::Constant { radius },
            } => Some(*radius),
            _ => None,
        }
    }

    pub fn value(&self, _t: f64, x: &StateVector) -> SetValue {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let m = match center {
                    CenterLaw::Zero => StateVector::zeros(x.dim()),
                    CenterLaw::Constant { center } => center.clone(),
                    CenterLaw::Scaled { factor } => x.scaled(*factor),
                };
                SetValue::Ball {
                    center: m,
                    radius: radius.eval(x.norm()).max(0.0),
                }
            }
            Shape::Polytope { vertices } => SetValue::Polytope {
                vertices: vertices.clone(),
            },
        }
    }

    pub fn support(&self, t: f64, x: &StateVector, d: &StateVector) -> f64 {
        self.value(t, x).support(d)
    }

    pub fn project(&self, t: f64, x: &StateVector, y: &StateVector) -> StateVector {
        self.value(t, x).project(y)
    }

    pub fn dist(&self, t: f64, x: &StateVector, y: &StateVector) -> f64 {
        self.value(t, x).dist(y)
    }

    pub fn sup_norm(&self, t: f64, x: &StateVector) -> f64 {
        self.value(t, x).sup_norm()
    }
}

/// `E + B(0, ε)` for a frozen value `E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InflatedSet {
    pub base: SetValue,
    pub epsilon: f64,
}

impl InflatedSet {
    pub fn new(base: SetValue, epsilon: f64) -> Self {
        assert!(epsilon >= 0.0, "inflation radius must be nonnegative");
        InflatedSet { base, epsilon }
    }

    pub fn dist(&self, y: &StateVector) -> f64 {
        (self.base.dist(y) - self.epsilon).max(0.0)
    }

    pub fn contains(&self, y: &StateVector, tol: f64) -> bool {
        self.base.dist(y) <= self.epsilon + tol
    }

    pub fn support(&self, d: &StateVector) -> f64 {
        self.base.support(d) + self.epsilon * d.norm()
    }

    pub fn project(&self, y: &StateVector) -> StateVector {
        let p = self.base.project(y);
        let gap = y - &p;
        let n = gap.norm();
        if n <= self.epsilon {
            y.clone()
        } else {
            &p + &gap.scaled(self.epsilon / n)
        }
    }
}

/// Checks `|F(t, x)| ≤ c_F (1 + |x|)` on sampled `(t, x)`.
pub fn check_linear_growth(
    mf: &Multifunction,
    triple: &SpectralTriple,
    sampler: &StateSampler,
    rng: &mut SampleRng,
    n_samples: usize,
    tol: f64,
) -> HypothesisReport {
    let mut b = ReportBuilder::new("linear_growth", tol);
    for _ in 0..n_samples {
        let t = sampler.sample_time(rng, triple);
        let x = sampler.sample_state(rng, triple);
        b.record(growth_witness(mf, t, &x));
    }
    b.finish()
}

pub fn growth_witness(mf: &Multifunction, t: f64, x: &StateVector) -> Witness {
    Witness {
        check: "linear_growth".into(),
        t,
        s: None,
        x: Some(x.as_slice().to_vec()),
        y: None,
        v: None,
        lhs: mf.c_f * (1.0 + x.norm()),
        rhs: mf.sup_norm(t, x),
    }
}

/// Excess profile of a sampled upper-semicontinuity probe.
#[derive(Debug, Clone, Serialize)]
pub struct UscProbe {
    pub report: HypothesisReport,
    pub radii: Vec<f64>,
    /// `max dist` excess of `F(s, y)` over `F(t, x)` per probe radius.
    pub excess: Vec<f64>,
}

/// Sampled Hausdorff excess of `F(s, y)` over `F(t, x)` for
/// `|s - t| ≤ ρ`, `|y - x| ≤ ρ` along decreasing probe radii `ρ`.
///
/// The probe is flagged when the excess at the smallest radius exceeds `tol`
/// and has not decreased relative to the largest radius. A sampled probe can
/// only falsify upper semicontinuity, never prove it.
#[allow(clippy::too_many_arguments)]
pub fn check_usc(
    mf: &Multifunction,
    triple: &SpectralTriple,
    t: f64,
    x: &StateVector,
    probe_radii: &[f64],
    samples_per_radius: usize,
    rng: &mut SampleRng,
    tol: f64,
) -> UscProbe {
    let base = mf.value(t, x);
    let horizon = triple.horizon();
    let mut excess = Vec::with_capacity(probe_radii.len());
    let mut worst_at = Vec::with_capacity(probe_radii.len());
    for &rho in probe_radii {
        let mut worst = 0.0f64;
        let mut arg = (t, x.clone());
        for _ in 0..samples_per_radius {
            let s = (t + rho * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, horizon);
            let y = x + &uniform_in_h_ball(rng, x.dim(), rho);
            let e = mf.value(s, &y).excess_over(&base);
            if e > worst {
                worst = e;
                arg = (s, y);
            }
        }
        excess.push(worst);
        worst_at.push(arg);
    }
    let mut b = ReportBuilder::new("usc", 0.0);
    if let (Some(first), Some(last)) = (excess.first(), excess.last()) {
        let decaying = probe_radii.len() > 1 && *last < 0.5 * first;
        let (s, y) = worst_at.last().unwrap();
        b.record(Witness {
            check: "usc".into(),
            t: *s,
            s: probe_radii.last().copied(),
            x: Some(x.as_slice().to_vec()),
            y: Some(y.as_slice().to_vec()),
            v: None,
            lhs: if decaying { first.max(tol) } else { tol },
            rhs: *last,
        });
    }
    UscProbe {
        report: b.finish(),
        radii: probe_radii.to_vec(),
        excess,
    }
}
