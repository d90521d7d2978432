use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::gelfand::{SpectralTriple, StateVector};

pub type StateLawFn = Arc<dyn Fn(&SpectralTriple, &StateVector) -> f64 + Send + Sync>;
pub type TimeLawFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonnegative function of the state, used for `ρ` and `η`.
#[derive(Clone)]
pub enum StateLaw {
    Zero,
    /// `coef · ‖x‖^power`
    VNormPower { coef: f64, power: f64 },
    Custom { label: String, eval: StateLawFn },
}

impl StateLaw {
    pub fn eval(&self, triple: &SpectralTriple, x: &StateVector) -> f64 {
        match self {
            StateLaw::Zero => 0.0,
            StateLaw::VNormPower { coef, power } => coef * triple.v_norm(x).powf(*power),
            StateLaw::Custom { eval, .. } => eval(triple, x),
        }
    }
}

impl fmt::Debug for StateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string())
    }
}

impl fmt::Display for StateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLaw::Zero => f.write_str("0"),
            StateLaw::VNormPower { coef, power } => write!(f, "{coef}*|x|_V^{power}"),
            StateLaw::Custom { label, .. } => f.write_str(label),
        }
    }
}

impl Serialize for StateLaw {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// A nonnegative integrable function of time, used for `f^A`.
#[derive(Clone)]
pub enum TimeLaw {
    Zero,
    Constant(f64),
    Custom { label: String, eval: TimeLawFn },
}

impl TimeLaw {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeLaw::Zero => 0.0,
            TimeLaw::Constant(c) => *c,
            TimeLaw::Custom { eval, .. } => eval(t),
        }
    }

    /// `∫_a^b f(t) dt`; composite Simpson with 1024 panels for custom laws.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            TimeLaw::Zero => 0.0,
            TimeLaw::Constant(c) => c * (b - a),
            TimeLaw::Custom { eval, .. } => {
                let n = 1024;
                let h = (b - a) / n as f64;
                let mut acc = eval(a) + eval(b);
                for i in 1..n {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * eval(a + i as f64 * h);
                }
                acc * h / 3.0
            }
        }
    }
}

impl fmt::Debug for TimeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeLaw::Zero => f.write_str("0"),
            TimeLaw::Constant(c) => write!(f, "{c}"),
            TimeLaw::Custom { label, .. } => f.write_str(label),
        }
    }
}

impl Serialize for TimeLaw {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeLaw::Zero => s.serialize_f64(0.0),
            TimeLaw::Constant(c) => s.serialize_f64(*c),
            TimeLaw::Custom { label, .. } => s.serialize_str(label),
        }
    }
}

/// Constants of the local monotonicity condition
/// `⟨A(t,x) - A(t,y), x - y⟩ ≥ -(c0 + ρ(x) + η(y)) |x - y|²`
/// together with the side bound `ρ(x) + η(x) ≤ |c0| (1 + ‖x‖^p)(1 + |x|^β)`.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCertificate {
    pub c0: f64,
    pub rho: StateLaw,
    pub eta: StateLaw,
    pub beta: f64,
}

impl MonotonicityCertificate {
    /// Monotone operators: `c0 = 0`, `ρ = η = 0`.
    pub fn monotone() -> Self {
        MonotonicityCertificate {
            c0: 0.0,
            rho: StateLaw::Zero,
            eta: StateLaw::Zero,
            beta: 1.0,
        }
    }
}

/// Constants of the growth bound
/// `‖A(t,x)‖_* ≤ (f^A(t)^{1/q} + c1 ‖x‖^{p-1})(1 + |x|^α)`
/// and the coercivity bound `⟨A(t,x), x⟩ ≥ c2 ‖x‖^p - c3 |x|² - f^A(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthCoercivityCertificate {
    pub c1: f64,
    pub alpha: f64,
    pub c2: f64,
    pub c3: f64,
    pub f_a: TimeLaw,
}

impl GrowthCoercivityCertificate {
    /// Certificate of the Dirichlet Laplacian with `p = 2`.
    pub fn heat() -> Self {
        GrowthCoercivityCertificate {
            c1: 1.0,
            alpha: 0.0,
            c2: 1.0,
            c3: 0.0,
            f_a: TimeLaw::Zero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_time_law_integrates_polynomials_exactly() {
        let law = TimeLaw::Custom {
            label: "t^2".into(),
            eval: Arc::new(|t| t * t),
        };
        assert!((law.integral(0.0, 3.0) - 9.0).abs() < 1e-12);
        assert_eq!(TimeLaw::Constant(2.0).integral(1.0, 2.5), 3.0);
    }

    #[test]
    fn v_norm_power_law() {
        let t = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
        let law = StateLaw::VNormPower { coef: 3.0, power: 2.0 };
        let x = StateVector::new(vec![1.0, 1.0]);
        assert!((law.eval(&t, &x) - 15.0).abs() < 1e-12);
        assert_eq!(law.to_string(), "3*|x|_V^2");
    }
}
