//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [triple]
//! dim = 8                # or lambda = [1.0, 4.0, ...]
//! lambda = "k_squared"
//! p = 2.0
//! horizon = 1.0
//!
//! [operator]
//! kind = "burgers"
//! nu = 0.1
//!
//! [multifunction]
//! kind = "centered_ball"
//! radius = 1.0
//! ```
//!
//! Every other section is optional and documented on its struct.

use std::path::PathBuf;

use inclusion_core::gelfand::SpectralTriple;
use inclusion_core::multifunctions::{CenterLaw, Multifunction, RadiusLaw};
use inclusion_core::operators::Operator;
use inclusion_core::trajectories::{History, SamplingStrategy, TimeGrid};
use inclusion_core::viability::ConstraintSet;
use inclusion_core::hjb::{TerminalCost, ValueGridSpec};
use inclusion_core::StateVector;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub triple: TripleSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub multifunction: MultifunctionSpec,
    #[serde(default)]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub viability: ViabilitySpec,
    #[serde(default)]
    pub hjb: HjbSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Named(String),
    List(Vec<f64>),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Named("k_squared".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Optional; must equal `p / (p - 1)` when given.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    #[default]
    Heat,
    Burgers { nu: f64 },
    ReactionDiffusion { diffusion: f64, reaction: f64 },
    /// Dense matrix in eigenbasis coordinates.
    Table { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultifunctionSpec {
    CenteredBall {
        radius: f64,
        #[serde(default)]
        c_f: Option<f64>,
    },
    /// `B(m(x), base + slope |x|)` with `m = center` or `m = center_factor · x`.
    AffineBall {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        center_factor: Option<f64>,
        radius_base: f64,
        #[serde(default)]
        radius_slope: f64,
        #[serde(default)]
        c_f: Option<f64>,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
        #[serde(default)]
        c_f: Option<f64>,
    },
    Zero,
}

impl Default for MultifunctionSpec {
    fn default() -> Self {
        MultifunctionSpec::CenteredBall { radius: 1.0, c_f: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Ball {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
    },
    Whole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    NormTarget {
        #[serde(default)]
        target: Option<Vec<f64>>,
    },
    IndicatorTube { radius: f64 },
    Zero,
}

/// Initial history: constant `x0` on `[0, t0]` (snapped to the grid), with
/// the first node replaced by `excursion` when given.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub excursion: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Trajectory steps on `[0, T]`; defaults to 512 per unit time.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_r_nodes")]
    pub r_nodes: usize,
    #[serde(default = "default_modal_nodes")]
    pub modal_nodes: usize,
    #[serde(default)]
    pub t_nodes: Option<usize>,
    #[serde(default)]
    pub r_max: Option<f64>,
    /// Time slices written to `value_grid.csv` (at least the first and last).
    #[serde(default = "default_csv_slices")]
    pub csv_time_slices: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            steps: None,
            r_nodes: default_r_nodes(),
            modal_nodes: default_modal_nodes(),
            t_nodes: None,
            r_max: None,
            csv_time_slices: default_csv_slices(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_k")]
    pub tol_k: f64,
    #[serde(default = "tol_u")]
    pub tol_u: f64,
    #[serde(default = "tol_dpp")]
    pub tol_dpp: f64,
    #[serde(default = "tol_check")]
    pub tol_check: f64,
    #[serde(default = "tol_dpp")]
    pub tol_epi: f64,
    #[serde(default = "tol_hemi")]
    pub tol_hemicontinuity: f64,
    /// Relative agreement of observed and predicted escape rates.
    #[serde(default = "tol_escape")]
    pub tol_escape: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_k: tol_k(),
            tol_u: tol_u(),
            tol_dpp: tol_dpp(),
            tol_check: tol_check(),
            tol_epi: tol_dpp(),
            tol_hemicontinuity: tol_hemi(),
            tol_escape: tol_escape(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Cloud size for constant fitting (non-heat operators).
    #[serde(default = "default_fit_samples")]
    pub fit_samples: usize,
    /// Coercivity constant used when fitting; defaults to the viscosity or
    /// diffusion coefficient.
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default = "default_usc_radii")]
    pub usc_radii: Vec<f64>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            samples: default_samples(),
            fit_samples: default_fit_samples(),
            c2: None,
            scales: None,
            usc_radii: default_usc_radii(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    BangBang { switches: usize },
    RandomInterior { hold: usize },
    Feedback {
        #[serde(default)]
        target: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_strategy")]
    pub strategy: StrategySpec,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            strategy: default_strategy(),
            count: default_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Viable,
    NotViable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViabilitySpec {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Defaults to one grid step.
    #[serde(default)]
    pub delta_min: Option<f64>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_expect")]
    pub expect: Expectation,
    /// Nodes along the viable path where the tangency test is repeated.
    #[serde(default = "default_probe_nodes")]
    pub probe_nodes: usize,
}

impl Default for ViabilitySpec {
    fn default() -> Self {
        ViabilitySpec {
            n_max: default_n_max(),
            delta_min: None,
            budget: default_budget(),
            expect: default_expect(),
            probe_nodes: default_probe_nodes(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbSpec {
    /// Trajectories per control strategy in `value_sampled`.
    #[serde(default = "default_hjb_samples")]
    pub samples: usize,
    #[serde(default = "default_dpp_trajectories")]
    pub dpp_trajectories: usize,
    #[serde(default = "default_points")]
    pub epi_points: usize,
    #[serde(default = "default_points")]
    pub sub_trajectories: usize,
}

impl Default for HjbSpec {
    fn default() -> Self {
        HjbSpec {
            samples: default_hjb_samples(),
            dpp_trajectories: default_dpp_trajectories(),
            epi_points: default_points(),
            sub_trajectories: default_points(),
        }
    }
}

fn default_p() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn default_r_nodes() -> usize {
    257
}
fn default_modal_nodes() -> usize {
    65
}
fn default_csv_slices() -> usize {
    33
}
fn tol_k() -> f64 {
    1e-6
}
fn tol_u() -> f64 {
    1e-8
}
fn tol_dpp() -> f64 {
    1e-3
}
fn tol_check() -> f64 {
    1e-12
}
fn tol_hemi() -> f64 {
    1e-6
}
fn tol_escape() -> f64 {
    0.05
}
fn default_samples() -> usize {
    1000
}
fn default_fit_samples() -> usize {
    2000
}
fn default_usc_radii() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}
fn default_strategy() -> StrategySpec {
    StrategySpec::RandomInterior { hold: 8 }
}
fn default_count() -> usize {
    4
}
fn default_n_max() -> usize {
    8
}
fn default_budget() -> usize {
    96
}
fn default_expect() -> Expectation {
    Expectation::Viable
}
fn default_probe_nodes() -> usize {
    8
}
fn default_hjb_samples() -> usize {
    4
}
fn default_dpp_trajectories() -> usize {
    50
}
fn default_points() -> usize {
    20
}

/// Parses and validates a configuration; errors name the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
        field: String::new(),
        message: e.to_string(),
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn core_invalid(field: &str) -> impl Fn(inclusion_core::Error) -> CliError + '_ {
    move |e| invalid(field, e.to_string())
}

/// Core objects assembled from a validated configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub triple: SpectralTriple,
    pub op: Operator,
    pub mf: Multifunction,
    pub grid: TimeGrid,
    pub constraint: Option<ConstraintSet>,
    pub cost: Option<TerminalCost>,
    pub history: History,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let tol = &self.tolerances;
        for (name, v) in [
            ("tolerances.tol_k", tol.tol_k),
            ("tolerances.tol_u", tol.tol_u),
            ("tolerances.tol_dpp", tol.tol_dpp),
            ("tolerances.tol_check", tol.tol_check),
            ("tolerances.tol_epi", tol.tol_epi),
            ("tolerances.tol_hemicontinuity", tol.tol_hemicontinuity),
            ("tolerances.tol_escape", tol.tol_escape),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("tolerance must be positive, found {v}")));
            }
        }
        if self.checks.samples == 0 || self.checks.fit_samples == 0 {
            return Err(invalid("checks.samples", "sample counts must be positive"));
        }
        if self.simulate.count == 0 {
            return Err(invalid("simulate.count", "must be positive"));
        }
        if self.viability.n_max == 0 || self.viability.budget == 0 {
            return Err(invalid("viability.n_max", "n_max and budget must be positive"));
        }
        if let Some(q) = self.triple.q {
            let derived = self.triple.p / (self.triple.p - 1.0);
            if (q - derived).abs() > 1e-12 * derived {
                return Err(invalid(
                    "triple.q",
                    format!("q = {q} is inconsistent with p = {}; q is derived as p/(p-1) = {derived}", self.triple.p),
                ));
            }
        }
        self.setup().map(|_| ())
    }

    pub fn triple(&self) -> Result<SpectralTriple, CliError> {
        let t = &self.triple;
        let triple = match &t.lambda {
            LambdaSpec::Named(name) if name == "k_squared" => {
                let dim = t.dim.ok_or_else(|| invalid("triple.dim", "required with lambda = \"k_squared\""))?;
                SpectralTriple::k_squared(dim, t.p, t.horizon)
            }
            LambdaSpec::Named(name) => {
                return Err(invalid("triple.lambda", format!("unknown eigenvalue family {name:?}")));
            }
            LambdaSpec::List(values) => {
                if let Some(dim) = t.dim {
                    if dim != values.len() {
                        return Err(invalid("triple.dim", format!("{dim} differs from the {} listed eigenvalues", values.len())));
                    }
                }
                SpectralTriple::new(values.clone(), t.p, t.horizon)
            }
        };
        triple.map_err(core_invalid("triple"))
    }

    fn vector(&self, field: &str, coords: &[f64], dim: usize) -> Result<StateVector, CliError> {
        if coords.len() != dim {
            return Err(invalid(field, format!("expected {dim} coordinates, found {}", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid(field, "coordinates must be finite"));
        }
        Ok(StateVector::new(coords.to_vec()))
    }

    pub fn setup(&self) -> Result<Setup, CliError> {
        let triple = self.triple()?;
        let dim = triple.dim();
        let op = match &self.operator {
            OperatorSpec::Heat => Operator::heat(&triple),
            OperatorSpec::Burgers { nu } => Operator::burgers(&triple, *nu).map_err(core_invalid("operator.nu"))?,
            OperatorSpec::ReactionDiffusion { diffusion, reaction } => {
                Operator::reaction_diffusion(&triple, *diffusion, *reaction).map_err(core_invalid("operator"))?
            }
            OperatorSpec::Table { rows } => {
                Operator::linear_table(&triple, rows.clone()).map_err(core_invalid("operator.rows"))?
            }
        };
        let mf = match &self.multifunction {
            MultifunctionSpec::CenteredBall { radius, c_f } => {
                Multifunction::centered_ball(RadiusLaw::Constant { radius: *radius }, c_f.unwrap_or(*radius))
                    .map_err(core_invalid("multifunction.radius"))?
            }
            MultifunctionSpec::AffineBall {
                center,
                center_factor,
                radius_base,
                radius_slope,
                c_f,
            } => {
                let (law, offset, factor) = match (center, center_factor) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("multifunction.center", "give either center or center_factor"));
                    }
                    (Some(c), None) => {
                        let c = self.vector("multifunction.center", c, dim)?;
                        let n = c.norm();
                        (CenterLaw::Constant { center: c }, n, 0.0)
                    }
                    (None, Some(f)) => (CenterLaw::Scaled { factor: *f }, 0.0, f.abs()),
                    (None, None) => (CenterLaw::Zero, 0.0, 0.0),
                };
                let c_f = c_f.unwrap_or((offset + radius_base).max(factor + radius_slope));
                let radius = RadiusLaw::Affine {
                    base: *radius_base,
                    slope: *radius_slope,
                };
                Multifunction::affine_ball(law, radius, c_f).map_err(core_invalid("multifunction"))?
            }
            MultifunctionSpec::Polytope { vertices, c_f } => {
                let vs = vertices
                    .iter()
                    .enumerate()
                    .map(|(k, v)| self.vector(&format!("multifunction.vertices[{k}]"), v, dim))
                    .collect::<Result<Vec<_>, _>>()?;
                let c_f = c_f.unwrap_or_else(|| vs.iter().map(|v| v.norm()).fold(0.0, f64::max));
                Multifunction::polytope(vs, c_f).map_err(core_invalid("multifunction.vertices"))?
            }
            MultifunctionSpec::Zero => Multifunction::zero(),
        };
        let grid = match self.grid.steps {
            Some(0) => return Err(invalid("grid.steps", "must be positive")),
            Some(n) => TimeGrid::new(triple.horizon(), n).map_err(core_invalid("grid.steps"))?,
            None => TimeGrid::for_triple(&triple),
        };
        let constraint = match &self.constraint {
            None => None,
            Some(ConstraintSpec::Whole) => Some(ConstraintSet::Whole),
            Some(ConstraintSpec::Ball { center, radius }) => {
                let c = match center {
                    Some(c) => self.vector("constraint.center", c, dim)?,
                    None => triple.zeros(),
                };
                Some(ConstraintSet::ball(c, *radius).map_err(core_invalid("constraint.radius"))?)
            }
        };
        let cost = match &self.cost {
            None => None,
            Some(CostSpec::Zero) => Some(TerminalCost::Zero),
            Some(CostSpec::IndicatorTube { radius }) => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(invalid("cost.radius", format!("tube radius must be nonnegative, found {radius}")));
                }
                Some(TerminalCost::IndicatorTube { radius: *radius })
            }
            Some(CostSpec::NormTarget { target }) => {
                let target = match target {
                    Some(t) => self.vector("cost.target", t, dim)?,
                    None => triple.zeros(),
                };
                Some(TerminalCost::NormTarget { target })
            }
        };
        let x0 = match &self.start.x0 {
            Some(x) => self.vector("start.x0", x, dim)?,
            None => triple.zeros(),
        };
        if !(self.start.t0 >= 0.0 && self.start.t0 < triple.horizon()) {
            return Err(invalid("start.t0", format!("must lie in [0, {})", triple.horizon())));
        }
        let start = (self.start.t0 / grid.dt()).round() as usize;
        let start = start.min(grid.n_steps() - 1);
        let history = match &self.start.excursion {
            None => History::constant(x0, start),
            Some(e) => {
                let e = self.vector("start.excursion", e, dim)?;
                if start == 0 {
                    return Err(invalid("start.excursion", "needs t0 > 0 so that the excursion lies in the past"));
                }
                let mut states = vec![x0; start + 1];
                states[0] = e;
                History::from_states(states).map_err(core_invalid("start"))?
            }
        };
        if let Some(r) = &self.checks.scales {
            if r.is_empty() || r.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(invalid("checks.scales", "scales must be positive"));
            }
        }
        Ok(Setup {
            triple,
            op,
            mf,
            grid,
            constraint,
            cost,
            history,
        })
    }

    pub fn strategy(&self, dim: usize) -> Result<SamplingStrategy, CliError> {
        Ok(match &self.simulate.strategy {
            StrategySpec::BangBang { switches } => SamplingStrategy::BangBang { switches: *switches },
            StrategySpec::RandomInterior { hold } => SamplingStrategy::RandomInterior { hold: (*hold).max(1) },
            StrategySpec::Feedback { target } => SamplingStrategy::Feedback {
                target: match target {
                    Some(t) => self.vector("simulate.strategy.target", t, dim)?,
                    None => StateVector::zeros(dim),
                },
            },
        })
    }

    pub fn value_grid_spec(&self) -> ValueGridSpec {
        ValueGridSpec {
            r_nodes: self.grid.r_nodes,
            modal_nodes: self.grid.modal_nodes,
            t_nodes: self.grid.t_nodes,
            r_max: self.grid.r_max,
        }
    }
}
