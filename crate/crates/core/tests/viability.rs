use inclusion_core::hjb::{value_dp, MayerProblem, TerminalCost, ValueGridSpec};
use inclusion_core::multifunctions::{Multifunction, RadiusLaw};
use inclusion_core::operators::Operator;
use inclusion_core::sampling::{seeded_rng, uniform_in_h_ball};
use inclusion_core::trajectories::{History, TimeGrid, Trajectory};
use inclusion_core::viability::{
    build_eps_approximate, tangency_test_epi, tangency_test_set, viable_trajectory, ConstraintSet, EpigraphPoint,
    FnFunctional, IndicatorFunctional, PathFunctional, SearchOptions, System, ViabilityTarget,
};
use inclusion_core::{Error, ExtReal, SpectralTriple, StateVector};

fn heat_ball(dim: usize, c_p: f64, horizon: f64) -> (Operator, Multifunction) {
    let tr = SpectralTriple::k_squared(dim, 2.0, horizon).unwrap();
    let mf = Multifunction::centered_ball(RadiusLaw::Constant { radius: c_p }, c_p).unwrap();
    (Operator::heat(&tr), mf)
}

#[test]
fn viable_ball_positive_case() {
    let (op, mf) = heat_ball(4, 1.0, 1.0);
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let sys = System::new(&op, &mf, grid);
    let k = ConstraintSet::ball(StateVector::zeros(4), 1.0).unwrap();
    let x0 = StateVector::new(vec![0.6, -0.5, 0.4, 0.3]);
    let h = History::constant(x0, 0);
    let opts = SearchOptions::default();
    let (traj, rep) = viable_trajectory(ViabilityTarget::Set(&k), &sys, &h, 8, grid.dt(), &opts).unwrap();
    assert_eq!(traj.end_index(), grid.n_steps());
    assert!(rep.max_dist.iter().all(|d| *d <= 1e-6), "{:?}", rep.max_dist);
    for i in (0..grid.n_steps()).step_by(64) {
        let hist = History::from_trajectory(&traj, i);
        let out = tangency_test_set(&k, &sys, &hist, 8, &opts).unwrap();
        assert!(out.is_found(), "no witness at node {i}");
        let w = out.witness().unwrap();
        // the witness replays to the same endpoint
        let again = w.resimulate(&sys, &hist).unwrap();
        assert_eq!(again.final_state(), w.x.final_state());
        assert!(k.dist(again.final_state()) <= opts.tol_k);
    }
}

#[test]
fn whole_space_accepts_any_control() {
    let (op, mf) = heat_ball(3, 2.0, 1.0);
    let sys = System::new(&op, &mf, TimeGrid::new(1.0, 128).unwrap());
    let h = History::constant(StateVector::new(vec![10.0, -3.0, 1.0]), 5);
    for n in [1, 4, 20] {
        let out = tangency_test_set(&ConstraintSet::Whole, &sys, &h, n, &SearchOptions::default()).unwrap();
        assert!(out.is_found());
    }
}

/// Off-center ball `|x - 5 e_1| ≤ 1/2` with `C_P = 1` and `λ_1 = 1`: on K,
/// `x_1' = -x_1 + f_1 ≤ -3.5`, so the set is not viable.
#[test]
fn offcenter_ball_negative_case() {
    let (op, mf) = heat_ball(2, 1.0, 1.0);
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let sys = System::new(&op, &mf, grid);
    let k = ConstraintSet::ball(StateVector::new(vec![5.0, 0.0]), 0.5).unwrap();
    let u = IndicatorFunctional::new(k.clone());
    let h = History::constant(StateVector::new(vec![5.0, 0.0]), 0);
    let point = EpigraphPoint { history: h, y0: -1.0 };
    let err = build_eps_approximate(&u, &sys, &point, 0.1, grid.dt(), &SearchOptions::default()).unwrap_err();
    let Error::ConstructionFailure { stuck_at, report } = err else {
        panic!("expected a construction failure");
    };
    assert!(stuck_at > 0.0 && stuck_at < 1.0);
    assert!(report.rounds_completed > 0);
    let x1 = report.state[0];
    assert!(x1 <= 4.5 + 0.05, "stuck at x1 = {x1}");
    // 1-mode oracle: the slowest exit moves x_1 at rate x_1 - C_P
    let oracle = x1 - 1.0;
    let observed = report.failure.escape_rate.unwrap();
    assert!(((observed - oracle) / oracle).abs() < 0.05, "{observed} vs {oracle}");
    assert!(observed >= 3.0);
}

#[test]
fn constant_functional_tangency_and_construction() {
    let (op, mf) = heat_ball(3, 1.0, 1.0);
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let sys = System::new(&op, &mf, grid);
    let u = FnFunctional(|_: f64, _: &Trajectory, _: usize| ExtReal::Finite(2.0));
    let h = History::constant(StateVector::new(vec![1.0, 2.0, 3.0]), 17);
    let point = EpigraphPoint { history: h, y0: 2.5 };
    let out = tangency_test_epi(&u, &sys, &point, 5, &SearchOptions::default()).unwrap();
    assert!(out.is_found());
    let sol = build_eps_approximate(&u, &sys, &point, 0.25, 4.0 * grid.dt(), &SearchOptions::default()).unwrap();
    assert_eq!(sol.tau, 1.0);
    assert!(sol.check_invariants(&u, &sys, 1e-9, 1e-8).pass);
    assert!(sol.rho.windows(2).all(|w| w[0] <= w[1]));
}

/// Set test and epigraph test of `-1_K` agree on random starts of a viable
/// ball and near the exit of a non-viable one.
#[test]
fn indicator_equivalence() {
    let (op, mf) = heat_ball(2, 1.0, 1.0);
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let sys = System::new(&op, &mf, grid);
    let opts = SearchOptions::default();
    let viable = ConstraintSet::ball(StateVector::zeros(2), 1.5).unwrap();
    let offcenter = ConstraintSet::ball(StateVector::new(vec![5.0, 0.0]), 0.5).unwrap();
    let mut rng = seeded_rng(12);
    let mut found = [0, 0];
    for k in 0..20 {
        let (set, x0) = if k % 2 == 0 {
            (&viable, uniform_in_h_ball(&mut rng, 2, 1.5))
        } else {
            // points of the inner boundary, where the drift points outwards
            let theta = 0.3 * (2.0 * uniform_in_h_ball(&mut rng, 1, 1.0)[0]);
            let x = StateVector::new(vec![5.0 - 0.5 * theta.cos(), 0.5 * theta.sin()]);
            (&offcenter, x)
        };
        let h = History::constant(x0, (k * 7) % 100);
        let set_out = tangency_test_set(set, &sys, &h, 4, &opts).unwrap();
        let u = IndicatorFunctional::new(set.clone());
        let point = EpigraphPoint::on_graph(&u, &grid, h.clone()).unwrap();
        assert_eq!(point.y0, -1.0);
        let epi_out = tangency_test_epi(&u, &sys, &point, 4, &opts).unwrap();
        assert_eq!(set_out.is_found(), epi_out.is_found(), "start {k}");
        found[usize::from(set_out.is_found())] += 1;
    }
    assert!(found[0] > 0 && found[1] > 0, "{found:?}");
}

fn tube_problem(c_k: f64, n_steps: usize) -> MayerProblem {
    let (op, mf) = heat_ball(3, 1.0, 1.0);
    MayerProblem::new(op, mf, TerminalCost::IndicatorTube { radius: c_k }, TimeGrid::new(1.0, n_steps).unwrap()).unwrap()
}

#[test]
fn value_function_epigraph_tangency_at_feasible_points() {
    let p = tube_problem(2.0, 256);
    let vf = value_dp(&p, &ValueGridSpec::default()).unwrap();
    let sys = p.system();
    let mut rng = seeded_rng(30);
    for k in 0..5 {
        let h = History::constant(uniform_in_h_ball(&mut rng, 3, 2.0), 20 * k);
        let point = EpigraphPoint::on_graph(&vf, &sys.grid, h).unwrap();
        assert_eq!(point.y0, 0.0);
        let out = tangency_test_epi(&vf, &sys, &point, 3, &SearchOptions::default()).unwrap();
        assert!(out.is_found());
    }
    let outside = History::constant(StateVector::new(vec![3.0, 0.0, 0.0]), 0);
    assert!(matches!(EpigraphPoint::on_graph(&vf, &sys.grid, outside), Err(Error::Precondition(_))));
}

#[test]
fn tube_construction_rounds_are_bounded() {
    let p = tube_problem(2.0, 256);
    let vf = value_dp(&p, &ValueGridSpec::default()).unwrap();
    let sys = p.system();
    let h = History::constant(StateVector::new(vec![1.0, 1.0, -1.0]), 32);
    let point = EpigraphPoint::on_graph(&vf, &sys.grid, h).unwrap();
    let delta_min = 8.0 * sys.grid.dt();
    let sol = build_eps_approximate(&vf, &sys, &point, 0.1, delta_min, &SearchOptions::default()).unwrap();
    assert_eq!(sol.tau, 1.0);
    let t0 = sys.grid.node(32);
    assert!(sol.rounds.len() as f64 <= (1.0 - t0) / delta_min + 1e-9);
    let rep = sol.check_invariants(&vf, &sys, 1e-9, 1e-8);
    assert!(rep.pass, "{:?}", rep.witness);
    for i in 32..=sys.grid.n_steps() {
        assert_eq!(vf.value(&sol.x, i), ExtReal::ZERO);
    }
}

#[test]
fn tight_tube_viable_trajectory() {
    let (op, mf) = heat_ball(3, 1.0, 1.0);
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let sys = System::new(&op, &mf, grid);
    let x0 = StateVector::new(vec![1.2, -0.4, 0.3]);
    let k = ConstraintSet::ball(StateVector::zeros(3), x0.norm()).unwrap();
    let (traj, rep) = viable_trajectory(ViabilityTarget::Set(&k), &sys, &History::constant(x0, 0), 32, grid.dt(), &SearchOptions::default())
        .unwrap();
    assert!(rep.max_dist.iter().all(|d| *d <= 1e-6));
    assert_eq!(rep.levels.len(), 32);
    assert_eq!(rep.dinf_gaps.len(), 31);
    assert!(rep.dinf_gaps.last().unwrap() <= rep.dinf_gaps.first().unwrap());
    assert!(traj.states().iter().all(|x| k.dist(x) <= 1e-6));
}
