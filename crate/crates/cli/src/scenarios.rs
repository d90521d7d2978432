//! Scenario orchestration and artifact emission.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::ValueEnum;
use inclusion_core::hjb::{
    check_testfunction_identity, default_strategies, dpp_check, epiderivative, subsolution_residual, value_dp,
    value_sampled, viscosity_residual_minus, viscosity_residual_plus, EpiOptions, MayerProblem, TerminalCost,
    TestFunction, ValueFunction, ViscosityOptions,
};
use inclusion_core::multifunctions::{check_linear_growth, check_usc, TOL_F};
use inclusion_core::operators::{
    check_coercivity, check_growth, check_hemicontinuity, check_local_monotonicity, fit_certificates, CheckOptions,
    GrowthCoercivityCertificate, MonotonicityCertificate, OperatorKind,
};
use inclusion_core::report::HypothesisReport;
use inclusion_core::sampling::{seeded_rng, SampleRng, StateSampler};
use inclusion_core::trajectories::{
    check_apriori, membership_defect, sample_xf, selector_l2, wpq_seminorms, History, SamplingStrategy, Trajectory,
};
use inclusion_core::viability::{
    tangency_test_set, viable_trajectory, ConstraintSet, EpigraphPoint, PathFunctional, SearchOptions, System,
    ViabilityTarget,
};
use inclusion_core::{Error, ExtReal, StateVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Expectation, RunConfig, Setup};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CheckHypotheses,
    Simulate,
    Viability,
    Value,
    HjbSuite,
    #[value(name = "example-4-4")]
    #[serde(rename = "example-4-4")]
    Example44,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

/// Outcome of one scenario run, written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub seed: u64,
    pub pass: bool,
    pub error: Option<String>,
    pub criteria: Vec<Criterion>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub details: BTreeMap<String, Value>,
    /// Kept out of the report so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_clock: Duration,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ScenarioResult {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    setup: Setup,
    out: &'a Path,
    rng: SampleRng,
    criteria: Vec<Criterion>,
    artifacts: Vec<String>,
    details: BTreeMap<String, Value>,
}

fn to_json(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Ctx<'_> {
    fn criterion(&mut self, name: &str, pass: bool, detail: Value) {
        self.criteria.push(Criterion {
            name: name.into(),
            pass,
            detail,
        });
    }

    fn report_criterion(&mut self, name: &str, r: &HypothesisReport) {
        let detail = json!({
            "min_margin": r.min_margin,
            "samples": r.samples,
            "witness": if r.pass { Value::Null } else { to_json(&r.witness) },
        });
        self.criterion(name, r.pass, detail);
    }

    fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details.insert(key.into(), to_json(v));
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.into());
        }
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&v).expect("report values serialize");
        text.push('\n');
        self.write(name, &text)
    }

    fn system(&self) -> System<'_> {
        System::new(&self.setup.op, &self.setup.mf, self.setup.grid)
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            budget: self.cfg.viability.budget,
            tol_k: self.cfg.tolerances.tol_k,
            tol_u: self.cfg.tolerances.tol_u,
            ..SearchOptions::default()
        }
    }

    fn delta_min(&self) -> f64 {
        self.cfg.viability.delta_min.unwrap_or(self.setup.grid.dt())
    }

    fn start_path(&self) -> Result<Trajectory, CliError> {
        let h = &self.setup.history;
        Ok(Trajectory::from_samples(self.setup.grid, h.start_index(), h.states().to_vec())?)
    }

    fn problem(&self, scenario: &'static str) -> Result<MayerProblem, CliError> {
        let cost = self.setup.cost.clone().ok_or(CliError::Missing { scenario, what: "[cost]" })?;
        Ok(MayerProblem::new(self.setup.op.clone(), self.setup.mf.clone(), cost, self.setup.grid)?)
    }

    fn value_function(&mut self, scenario: &'static str) -> Result<ValueFunction, CliError> {
        let problem = self.problem(scenario)?;
        let vf = value_dp(&problem, &self.cfg.value_grid_spec())?;
        let n_t = vf.grid().times().n_steps();
        let slices = self.cfg.grid.csv_time_slices.max(2);
        let stride = (n_t / (slices - 1)).max(1);
        self.write("value_grid.csv", &vf.grid().to_csv(stride))?;
        self.detail("reduction", vf.grid().reduction());
        Ok(vf)
    }
}

/// Runs `scenario` and writes its artifacts and `report.json` into `out`.
///
/// Failures of the numerical core are recorded in the report; only
/// configuration and I/O problems surface as errors.
pub fn run(cfg: &RunConfig, scenario: Scenario, out: &Path) -> Result<ScenarioResult, CliError> {
    let started = Instant::now();
    let setup = cfg.setup()?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut ctx = Ctx {
        cfg,
        setup,
        out,
        rng: seeded_rng(cfg.seed),
        criteria: Vec::new(),
        artifacts: Vec::new(),
        details: BTreeMap::new(),
    };
    let outcome = match scenario {
        Scenario::CheckHypotheses => check_hypotheses(&mut ctx),
        Scenario::Simulate => simulate(&mut ctx),
        Scenario::Viability => viability(&mut ctx),
        Scenario::Value => value(&mut ctx),
        Scenario::HjbSuite => hjb_suite(&mut ctx),
        Scenario::Example44 => example(&mut ctx),
    };
    let error = match outcome {
        Ok(()) => None,
        Err(CliError::Core(e)) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    ctx.criteria.sort_by(|a, b| a.name.cmp(&b.name));
    ctx.artifacts.sort();
    let pass = error.is_none() && !ctx.criteria.is_empty() && ctx.criteria.iter().all(|c| c.pass);
    let mut result = ScenarioResult {
        scenario,
        seed: cfg.seed,
        pass,
        error,
        criteria: ctx.criteria,
        artifacts: ctx.artifacts,
        details: ctx.details,
        wall_clock: Duration::ZERO,
        out_dir: out.to_path_buf(),
    };
    result.artifacts.push("report.json".into());
    result.artifacts.sort();
    let mut text = serde_json::to_string_pretty(&result).expect("report values serialize");
    text.push('\n');
    let path = result.report_path();
    std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    result.wall_clock = started.elapsed();
    Ok(result)
}

fn check_hypotheses(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let sampler = cfg.checks.scales.clone().map(StateSampler::new).unwrap_or_default();
    let opts = CheckOptions {
        tol: cfg.tolerances.tol_check,
    };
    let op = ctx.setup.op.clone();
    let triple = ctx.setup.triple.clone();
    let exact = op.kind() == OperatorKind::Heat && triple.p() == 2.0;
    let (mono, gc, fit) = if exact {
        (MonotonicityCertificate::monotone(), GrowthCoercivityCertificate::heat(), None)
    } else {
        let c2 = cfg.checks.c2.or(op.viscosity()).ok_or(CliError::Config {
            field: "checks.c2".into(),
            message: "required for operators without a known coercivity constant".into(),
        })?;
        let f = fit_certificates(&op, c2, &sampler, &mut ctx.rng, cfg.checks.fit_samples)?;
        (f.monotonicity, f.growth_coercivity, Some(f.fit))
    };
    ctx.detail("certificates", json!({ "monotonicity": &mono, "growth_coercivity": &gc, "fitted": !exact, "fit": fit }));

    let n = cfg.checks.samples;
    let m = check_local_monotonicity(&op, &mono, &sampler, &mut ctx.rng, n, opts);
    let g = check_growth(&op, &gc, &sampler, &mut ctx.rng, n, opts);
    let c = check_coercivity(&op, &gc, &sampler, &mut ctx.rng, n, opts);
    for flag in &m.checks {
        let detail = json!({ "min_margin": flag.min_margin, "samples": n });
        let name = if flag.name == "local_monotonicity" { "local_monotonicity" } else { "rho_eta_bound" };
        ctx.criterion(name, flag.pass, detail);
    }
    if !m.pass {
        ctx.detail("monotonicity_witness", &m.witness);
    }
    ctx.report_criterion("growth", &g);
    ctx.report_criterion("coercivity", &c);

    let s_grid: Vec<f64> = (0..=40).map(|k| -1.0 + k as f64 / 20.0).collect();
    let mut hemi = Vec::new();
    for _ in 0..3 {
        let t = sampler.sample_time(&mut ctx.rng, &triple);
        let x = sampler.sample_state(&mut ctx.rng, &triple);
        let y = sampler.sample_state(&mut ctx.rng, &triple);
        let v = sampler.sample_state(&mut ctx.rng, &triple);
        hemi.push(check_hemicontinuity(&op, t, &x, &y, &v, &s_grid, cfg.tolerances.tol_hemicontinuity));
    }
    let hemi_pass = hemi.iter().all(|r| r.pass);
    let hemi_margin = hemi.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
    ctx.criterion("hemicontinuity", hemi_pass, json!({ "min_margin": hemi_margin, "probes": hemi.len() }));

    let mf = ctx.setup.mf.clone();
    let lg = check_linear_growth(&mf, &triple, &sampler, &mut ctx.rng, n, cfg.tolerances.tol_check);
    ctx.report_criterion("f_linear_growth", &lg);
    let x0 = ctx.setup.history.current().clone();
    let t_mid = 0.5 * triple.horizon();
    let usc = check_usc(&mf, &triple, t_mid, &x0, &cfg.checks.usc_radii, 64, &mut ctx.rng, TOL_F);
    ctx.criterion("f_usc", usc.report.pass, json!({ "radii": &usc.radii, "excess": &usc.excess }));

    let mut reports = vec![m, g, c];
    reports.extend(hemi);
    reports.push(lg);
    reports.push(usc.report);
    reports.sort_by(|a, b| a.hypothesis.cmp(&b.hypothesis));
    ctx.write_json("hypothesis_report.json", &reports)
}

fn simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    let strategy = ctx.cfg.strategy(ctx.setup.triple.dim())?;
    let (op, mf) = (ctx.setup.op.clone(), ctx.setup.mf.clone());
    let sys = System::new(&op, &mf, ctx.setup.grid);
    let trajs = sample_xf(
        sys.op,
        sys.mf,
        &sys.grid,
        &ctx.setup.history,
        &strategy,
        ctx.cfg.simulate.count,
        &mut ctx.rng,
        &sys.solver,
    )?;
    let tol_eq = sys.solver.tol_eq(sys.op);
    let mut membership = 0.0f64;
    let mut residual = 0.0f64;
    let mut per_path = Vec::new();
    for (k, tr) in trajs.iter().enumerate() {
        membership = membership.max(membership_defect(sys.mf, tr));
        residual = residual.max(tr.max_residual());
        let (lp, lq) = wpq_seminorms(&ctx.setup.triple, tr);
        per_path.push(json!({
            "file": format!("trajectory_{k:03}.csv"),
            "final_h_norm": tr.final_state().norm(),
            "sup_h_norm": tr.sup_h_norm(),
            "lp_v": lp,
            "lq_vstar": lq,
            "selector_l2": selector_l2(tr),
        }));
        ctx.write(&format!("trajectory_{k:03}.csv"), &tr.to_csv())?;
    }
    ctx.criterion("membership", membership <= TOL_F, json!({ "max_defect": membership, "tol": TOL_F }));
    ctx.criterion("equation", residual <= tol_eq, json!({ "max_residual": residual, "tol": tol_eq }));

    // the a-priori bound needs a constant ball and the exact heat certificate
    let heat = sys.op.kind() == OperatorKind::Heat && ctx.setup.triple.p() == 2.0;
    if let (true, Some(radius)) = (heat, sys.mf.constant_centered_radius()) {
        let r = ctx.setup.history.sup_h_norm();
        let c = radius / (1.0 + r);
        let rep = check_apriori(sys.op, &GrowthCoercivityCertificate::heat(), c, r, &trajs, tol_eq)?;
        let pass = rep.report.pass && rep.rejected.is_empty() && rep.max_ratio < 1.0;
        ctx.criterion("apriori", pass, json!({ "max_ratio": rep.max_ratio, "bound": &rep.bound }));
    }
    ctx.detail("strategy", &strategy);
    ctx.detail("trajectories", per_path);
    Ok(())
}

/// Predicted rate `min_f d/dt (|x - c| - r)` at `x` for a ball constraint.
fn escape_oracle(sys: &System, k: &ConstraintSet, t: f64, x: &StateVector) -> Result<Option<f64>, CliError> {
    let ConstraintSet::HBall { center, .. } = k else {
        return Ok(None);
    };
    let d = x - center;
    let nrm = d.norm();
    let normal = if nrm > 1e-12 { d.scaled(1.0 / nrm) } else { StateVector::unit(x.dim(), 0).scaled(-1.0) };
    let ax = sys.op.apply(t, x)?;
    Ok(Some(-ax.dot(&normal) - sys.mf.support(t, x, &normal.scaled(-1.0))))
}

fn viability(ctx: &mut Ctx) -> Result<(), CliError> {
    let k = ctx
        .setup
        .constraint
        .clone()
        .ok_or(CliError::Missing { scenario: "viability", what: "[constraint]" })?;
    let opts = ctx.search_options();
    let delta_min = ctx.delta_min();
    let n_max = ctx.cfg.viability.n_max;
    let expect = ctx.cfg.viability.expect;
    let history = ctx.setup.history.clone();
    let outcome = {
        let sys = ctx.system();
        viable_trajectory(ViabilityTarget::Set(&k), &sys, &history, n_max, delta_min, &opts)
    };
    match outcome {
        Ok((traj, rep)) => {
            ctx.write("trajectory_viable.csv", &traj.to_csv())?;
            let max_dist = rep.max_dist.iter().copied().fold(0.0, f64::max);
            ctx.detail("viability", &rep);
            let probes = ctx.cfg.viability.probe_nodes.max(1);
            let sys = ctx.system();
            let (s, e) = (traj.start_index(), traj.end_index());
            let stride = ((e - s) / probes).max(1);
            let mut found = 0;
            let mut missing = Vec::new();
            let mut replay_gap = 0.0f64;
            for i in (s..e).step_by(stride) {
                let h = History::from_trajectory(&traj, i);
                let out = tangency_test_set(&k, &sys, &h, n_max, &opts)?;
                match out.witness() {
                    Some(w) => {
                        found += 1;
                        let again = w.resimulate(&sys, &h)?;
                        replay_gap = replay_gap.max((again.final_state() - w.x.final_state()).norm());
                    }
                    None => missing.push(sys.grid.node(i)),
                }
            }
            match expect {
                Expectation::Viable => {
                    let tol_k = ctx.cfg.tolerances.tol_k;
                    ctx.criterion("viable", max_dist <= tol_k, json!({ "max_dist": max_dist, "tol": tol_k }));
                    ctx.criterion(
                        "tangency_witnesses",
                        missing.is_empty() && replay_gap == 0.0,
                        json!({ "found": found, "missing_at": missing, "replay_gap": replay_gap }),
                    );
                }
                Expectation::NotViable => {
                    ctx.criterion("construction_fails", false, json!({ "max_dist": max_dist }));
                }
            }
        }
        Err(Error::ConstructionFailure { stuck_at, report }) => {
            let oracle = {
                let sys = ctx.system();
                escape_oracle(&sys, &k, report.t, &report.state)?
            };
            let observed = report.failure.escape_rate;
            ctx.detail("stuck", &*report);
            match expect {
                Expectation::Viable => {
                    ctx.criterion("viable", false, json!({ "stuck_at": stuck_at }));
                }
                Expectation::NotViable => {
                    ctx.criterion("construction_fails", true, json!({ "stuck_at": stuck_at, "level": report.failure.n }));
                    let tol = ctx.cfg.tolerances.tol_escape;
                    let (pass, rel) = match (observed, oracle) {
                        (Some(o), Some(p)) if p != 0.0 => {
                            let rel = ((o - p) / p).abs();
                            (rel <= tol, Some(rel))
                        }
                        _ => (false, None),
                    };
                    ctx.criterion(
                        "escape_rate_oracle",
                        pass,
                        json!({ "observed": observed, "oracle": oracle, "relative_error": rel, "tol": tol }),
                    );
                }
            }
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn value(ctx: &mut Ctx) -> Result<(), CliError> {
    let vf = ctx.value_function("value")?;
    let path = ctx.start_path()?;
    let start = path.start_index();
    let v_dp = vf.value(&path, start);
    let problem = vf.problem().clone();
    let sampled = value_sampled(
        &problem,
        &ctx.setup.history,
        &default_strategies(&problem),
        ctx.cfg.hjb.samples.max(1),
        &mut ctx.rng,
    )?;
    let tol = ctx.cfg.tolerances.tol_dpp;
    ctx.criterion(
        "sampled_dominates_dp",
        v_dp.le_with_tol(sampled.value, tol),
        json!({ "v_dp": v_dp, "v_sampled": sampled.value, "tol": tol }),
    );
    ctx.criterion(
        "sampled_reaches_dp",
        sampled.value.le_with_tol(v_dp, tol),
        json!({ "gap": sampled.value.gap(v_dp), "best_strategy": sampled.best_strategy, "tol": tol }),
    );
    if v_dp.is_finite() {
        let opt = vf.optimal_trajectory(&ctx.setup.history)?;
        ctx.detail("optimal_cost", problem.cost.eval(&opt));
        ctx.write("trajectory_optimal.csv", &opt.to_csv())?;
    }
    ctx.detail("v_dp", v_dp);
    ctx.detail("sampled", &sampled);
    Ok(())
}

/// Affine-in-state, linear-in-time test function through `v(t_i, x)` with
/// difference-quotient derivatives of the value grid.
fn tangent_test_function(vf: &ValueFunction, traj: &Trajectory, i: usize) -> Option<TestFunction> {
    let grid = traj.grid();
    let t = grid.node(i);
    let x = traj.state(i);
    let v = vf.value(traj, i).finite()?;
    let eval = |t: f64, y: &StateVector| vf.eval(t, y, false).finite();
    let (ta, tb) = (grid.node(i.saturating_sub(1)), grid.node((i + 1).min(grid.n_steps())));
    let d_t = (eval(tb, x)? - eval(ta, x)?) / (tb - ta);
    let h = 1e-4 * (1.0 + x.norm());
    let mut g = vec![0.0; x.dim()];
    for (k, gk) in g.iter_mut().enumerate() {
        let mut up = x.clone();
        up.as_mut_slice()[k] += h;
        let mut down = x.clone();
        down.as_mut_slice()[k] -= h;
        *gk = (eval(t, &up)? - eval(t, &down)?) / (2.0 * h);
    }
    let g = StateVector::new(g);
    Some(TestFunction::affine(v - g.dot(x), g).with_time_polynomial(t, vec![d_t]))
}

fn hjb_suite(ctx: &mut Ctx) -> Result<(), CliError> {
    let vf = ctx.value_function("hjb-suite")?;
    let problem = vf.problem().clone();
    let sys = problem.system();
    let tol_dpp = ctx.cfg.tolerances.tol_dpp;
    let tol_epi = ctx.cfg.tolerances.tol_epi;
    let hjb = ctx.cfg.hjb.clone();
    let history = ctx.setup.history.clone();
    let start = history.start_index();
    let n_steps = sys.grid.n_steps();

    let dpp = dpp_check(&vf, std::slice::from_ref(&history), hjb.dpp_trajectories, &mut ctx.rng, tol_dpp)?;
    ctx.report_criterion("dpp", &dpp);
    ctx.write_json("hypothesis_report.json", [&dpp])?;

    // sampled feasible trajectories shared by the pointwise checks
    let strategies = default_strategies(&problem);
    let count = hjb.epi_points.max(hjb.sub_trajectories);
    let mut paths = Vec::with_capacity(count);
    for k in 0..count {
        let s = &strategies[1 + k % (strategies.len() - 1)];
        paths.extend(sample_xf(sys.op, sys.mf, &sys.grid, &history, s, 1, &mut ctx.rng, &sys.solver)?);
    }
    let feasible: Vec<&Trajectory> = paths
        .iter()
        .filter(|tr| vf.value(tr, tr.end_index()).is_finite())
        .collect();

    let epi_opts = EpiOptions {
        tol: tol_epi,
        ..EpiOptions::default()
    };
    let mut estimates = Vec::new();
    for (k, tr) in feasible.iter().take(hjb.epi_points).enumerate() {
        let i = start + (k + 1) * (n_steps - start) / (hjb.epi_points + 2);
        let h = History::from_trajectory(tr, i);
        let e = sys.mf.value(sys.grid.node(i), h.current());
        let est = epiderivative(&vf, &sys, &h, &e, &epi_opts, &mut ctx.rng)?;
        estimates.push(est.estimate);
    }
    let worst = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ctx.criterion(
        "epiderivative",
        !estimates.is_empty() && worst <= tol_epi,
        json!({ "points": estimates.len(), "max_estimate": worst, "tol": tol_epi }),
    );

    let ladder = [1, 2, 4, 8, 16, 32];
    let mut residuals = Vec::new();
    for tr in feasible.iter().take(hjb.sub_trajectories) {
        let mid = (tr.start_index() + tr.end_index()) / 2;
        for i0 in [mid, tr.end_index()] {
            if i0 > tr.start_index() {
                residuals.push(subsolution_residual(&vf, tr, i0, &ladder)?);
            }
        }
    }
    let worst = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ctx.criterion(
        "subsolution",
        !residuals.is_empty() && worst <= tol_epi,
        json!({ "trajectories": feasible.len().min(hjb.sub_trajectories), "max_residual": worst, "tol": tol_epi }),
    );

    // interior node of the optimal path: central time differences, short ladder
    let vopts = ViscosityOptions {
        delta_steps: vec![1, 2],
        ..ViscosityOptions::default()
    };
    let opt = vf.optimal_trajectory(&history)?;
    let i_mid = (opt.start_index() + opt.end_index()) / 2;
    match tangent_test_function(&vf, &opt, i_mid) {
        Some(phi) => {
            let h = History::from_trajectory(&opt, i_mid);
            let plus = viscosity_residual_plus(None, &phi, &sys, &h, &vopts, &mut ctx.rng)?;
            ctx.criterion("viscosity_plus", plus >= -tol_dpp, json!({ "residual": plus, "t": sys.grid.node(i_mid), "tol": tol_dpp }));
            let minus = viscosity_residual_minus(None, &phi, &sys, &opt, i_mid, &vopts)?;
            ctx.criterion("viscosity_minus", minus >= -tol_dpp, json!({ "residual": minus, "t": sys.grid.node(i_mid), "tol": tol_dpp }));
        }
        None => {
            let detail = json!({ "reason": "value undefined along the optimal path" });
            ctx.criterion("viscosity_plus", false, detail.clone());
            ctx.criterion("viscosity_minus", false, detail);
        }
    }
    let c = 1.0;
    let device = TestFunction::linear_in_time(0.0, sys.grid.node(i_mid), c);
    let r = viscosity_residual_minus(None, &device, &sys, &opt, i_mid, &vopts)?;
    ctx.criterion("viscosity_minus_device", r == -c, json!({ "residual": r, "expected": -c }));

    let dim = ctx.setup.triple.dim();
    let b = StateVector::new((0..dim).map(|k| 1.0 / (k + 1) as f64).collect());
    let phis = [
        TestFunction::constant(1.0),
        TestFunction::affine(0.5, b.clone()),
        TestFunction::quadratic(1.0, StateVector::zeros(dim)),
        TestFunction::time_polynomial(0.0, 0.0, vec![0.5, -2.0, 1.0]),
        TestFunction::quadratic(0.5, b.clone()).with_linear(b).with_time_polynomial(0.0, vec![1.0]),
    ];
    let defects: Vec<Value> = phis
        .iter()
        .map(|phi| {
            let d = check_testfunction_identity(phi, &opt);
            json!({ "kind": phi.kind(), "max_defect": d.max_defect, "bound": d.bound, "pass": d.pass })
        })
        .collect();
    let pass = defects.iter().all(|d| d["pass"] == Value::Bool(true));
    ctx.criterion("testfunction_identity", pass, Value::Array(defects));
    ctx.write("trajectory_optimal.csv", &opt.to_csv())?;
    Ok(())
}

fn example(ctx: &mut Ctx) -> Result<(), CliError> {
    let Some(TerminalCost::IndicatorTube { radius: c_k }) = ctx.setup.cost.clone() else {
        return Err(CliError::Missing {
            scenario: "example-4-4",
            what: "[cost] of kind indicator_tube",
        });
    };
    if ctx.setup.op.kind() != OperatorKind::Heat {
        return Err(CliError::Config {
            field: "operator.kind".into(),
            message: "example-4-4 runs the heat equation".into(),
        });
    }
    let vf = ctx.value_function("example-4-4")?;
    let sys = vf.problem().system();
    let history = ctx.setup.history.clone();
    let path = ctx.start_path()?;
    let v0 = vf.value(&path, path.start_index());
    // with f = 0 available the tube is invariant, so feasibility of the past decides
    let feasible = history.states().iter().all(|x| TerminalCost::in_tube(c_k, x));
    let expected = if feasible { ExtReal::ZERO } else { ExtReal::PosInf };
    ctx.criterion(
        "value_oracle",
        v0 == expected,
        json!({ "value": v0, "expected": expected, "feasible_history": feasible }),
    );
    ctx.detail("history_sup_h_norm", history.sup_h_norm());
    let opts = ctx.search_options();
    if feasible {
        let (traj, rep) = viable_trajectory(
            ViabilityTarget::Epigraph(&vf),
            &sys,
            &history,
            ctx.cfg.viability.n_max,
            ctx.delta_min(),
            &opts,
        )?;
        let excess = rep.max_dist.iter().copied().fold(0.0, f64::max);
        let in_tube = traj.states().iter().all(|x| TerminalCost::in_tube(c_k, x));
        let finite = (traj.start_index()..=traj.end_index()).all(|i| vf.value(&traj, i).is_finite());
        let tol_u = ctx.cfg.tolerances.tol_u;
        ctx.criterion(
            "viable_trajectory",
            excess <= tol_u && in_tube && finite && traj.end_index() == sys.grid.n_steps(),
            json!({ "max_excess": excess, "in_tube": in_tube, "sup_h_norm": traj.sup_h_norm(), "tol": tol_u }),
        );
        ctx.detail("viability", &rep);
        ctx.write("trajectory_viable.csv", &traj.to_csv())?;
    } else {
        let sampled = value_sampled(
            vf.problem(),
            &history,
            &default_strategies(vf.problem()),
            ctx.cfg.hjb.samples.max(1),
            &mut ctx.rng,
        )?;
        let paths = sample_xf(
            sys.op,
            sys.mf,
            &sys.grid,
            &history,
            &SamplingStrategy::RandomInterior { hold: 8 },
            ctx.cfg.hjb.samples.max(1),
            &mut ctx.rng,
            &sys.solver,
        )?;
        let along = paths
            .iter()
            .all(|tr| (tr.start_index()..=tr.end_index()).all(|i| vf.value(tr, i) == ExtReal::PosInf));
        let grid = vf.grid();
        let violated_rows = (0..=grid.times().n_steps()).all(|k| {
            let t = grid.times().node(k);
            [0.0, 0.5, 1.0].iter().all(|s| vf.eval(t, &path.initial_state().scaled(*s), true) == ExtReal::PosInf)
        });
        let rejected = matches!(
            EpigraphPoint::on_graph(&vf, &sys.grid, history.clone()),
            Err(Error::Precondition(_))
        );
        ctx.criterion(
            "no_finite_contamination",
            v0 == ExtReal::PosInf && sampled.value == ExtReal::PosInf && along && violated_rows && rejected,
            json!({
                "sampled_value": sampled.value,
                "infinite_along_paths": along,
                "violated_slices_infinite": violated_rows,
                "epigraph_rejects_start": rejected,
            }),
        );
    }
    Ok(())
}
