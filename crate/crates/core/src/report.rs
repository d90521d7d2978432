//! Pass/fail reports produced by the sampling verifiers.

use serde::Serialize;

/// Sample at which an inequality was tightest (or violated).
///
/// `lhs >= rhs` is the inequality being checked; the margin is `lhs - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub check: String,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Witness {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Outcome of one named sub-check inside a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckFlag {
    pub name: String,
    pub pass: bool,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub hypothesis: String,
    pub pass: bool,
    pub min_margin: f64,
    pub samples: usize,
    pub checks: Vec<CheckFlag>,
    /// Tightest sample; always present when the report failed.
    pub witness: Option<Witness>,
    /// Margin of every evaluated sample, in sampling order.
    #[serde(skip)]
    pub margins: Vec<f64>,
}

/// Accumulates margins for one or more named inequalities.
#[derive(Debug)]
pub struct ReportBuilder {
    hypothesis: String,
    tol: f64,
    checks: Vec<CheckFlag>,
    margins: Vec<f64>,
    worst: Option<Witness>,
}

impl ReportBuilder {
    pub fn new(hypothesis: impl Into<String>, tol: f64) -> Self {
        ReportBuilder {
            hypothesis: hypothesis.into(),
            tol,
            checks: Vec::new(),
            margins: Vec::new(),
            worst: None,
        }
    }

    pub fn record(&mut self, witness: Witness) {
        let margin = witness.margin();
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.margins.push(margin);
        match self.checks.iter_mut().find(|c| c.name == witness.check) {
            Some(flag) => {
                flag.min_margin = flag.min_margin.min(margin);
                flag.pass = flag.min_margin >= -self.tol;
            }
            None => self.checks.push(CheckFlag {
                name: witness.check.clone(),
                pass: margin >= -self.tol,
                min_margin: margin,
            }),
        }
        let replace = match &self.worst {
            None => true,
            Some(w) => margin < w.margin(),
        };
        if replace {
            self.worst = Some(witness);
        }
    }

    pub fn finish(self) -> HypothesisReport {
        let min_margin = self
            .checks
            .iter()
            .map(|c| c.min_margin)
            .fold(f64::INFINITY, f64::min);
        let pass = self.checks.iter().all(|c| c.pass);
        HypothesisReport {
            hypothesis: self.hypothesis,
            pass,
            min_margin: if self.checks.is_empty() { 0.0 } else { min_margin },
            samples: self.margins.len(),
            checks: self.checks,
            witness: self.worst,
            margins: self.margins,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(check: &str, lhs: f64, rhs: f64) -> Witness {
        Witness {
            check: check.into(),
            t: 0.0,
            s: None,
            x: None,
            y: None,
            v: None,
            lhs,
            rhs,
        }
    }

    #[test]
    fn keeps_the_tightest_sample() {
        let mut b = ReportBuilder::new("demo", 1e-12);
        b.record(w("a", 2.0, 1.0));
        b.record(w("b", 0.5, 1.0));
        b.record(w("a", 1.0, 0.9));
        let r = b.finish();
        assert!(!r.pass);
        assert_eq!(r.samples, 3);
        assert_eq!(r.min_margin, -0.5);
        assert_eq!(r.witness.unwrap().check, "b");
        assert!(r.checks.iter().find(|c| c.name == "a").unwrap().pass);
    }

    #[test]
    fn nan_margins_fail() {
        let mut b = ReportBuilder::new("demo", 1e-12);
        b.record(w("a", f64::NAN, 0.0));
        assert!(!b.finish().pass);
    }
}
