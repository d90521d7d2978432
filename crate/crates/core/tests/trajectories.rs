use inclusion_core::multifunctions::{Multifunction, RadiusLaw};
use inclusion_core::operators::{GrowthCoercivityCertificate, Operator};
use inclusion_core::sampling::{seeded_rng, uniform_in_h_ball};
use inclusion_core::trajectories::{
    check_apriori, dinf_distance, membership_defect, refine_selector, sample_xf, solve_forced, wpq_seminorms,
    History, SamplingStrategy, SolverOptions, TimeGrid, Trajectory, TOL_EQ_NEWTON,
};
use inclusion_core::multifunctions::TOL_F;
use inclusion_core::{SpectralTriple, StateVector};

fn single_mode(horizon: f64) -> (SpectralTriple, Operator) {
    let tr = SpectralTriple::new(vec![1.0], 2.0, horizon).unwrap();
    let op = Operator::heat(&tr);
    (tr, op)
}

fn unforced_error(n: usize) -> f64 {
    let (_, op) = single_mode(1.0);
    let grid = TimeGrid::new(1.0, n).unwrap();
    let h = History::constant(StateVector::new(vec![1.0]), 0);
    let tr = solve_forced(&op, &grid, &h, &vec![StateVector::zeros(1); n], &SolverOptions::default()).unwrap();
    (tr.final_state()[0] - (-1.0f64).exp()).abs()
}

#[test]
fn heat_mode_converges_at_first_order() {
    let e = unforced_error(10_000);
    assert!(e < 5e-5, "{e}");
    let ratio = unforced_error(5_000) / e;
    assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
}

#[test]
fn forced_equilibrium_is_preserved() {
    let tr = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let c = 0.7;
    let x0 = tr.unit(1).scaled(c);
    let f = tr.unit(1).scaled(4.0 * c);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let traj = solve_forced(&op, &grid, &History::constant(x0.clone(), 0), &vec![f; 100], &SolverOptions::default()).unwrap();
    for x in traj.states() {
        assert!((x - &x0).norm() < 1e-14);
    }
    assert!(traj.max_residual() < 1e-12);
}

#[test]
fn unforced_burgers_dissipates_energy() {
    let tr = SpectralTriple::k_squared(31, 2.0, 1.0).unwrap();
    let op = Operator::burgers(&tr, 0.1).unwrap();
    let grid = op.sine_grid().unwrap();
    let profile: Vec<f64> = grid.nodes().iter().map(|s| 2.0 * s.sin() + (3.0 * s).sin()).collect();
    let x0 = grid.to_coeffs(&profile);
    let tgrid = TimeGrid::new(1.0, 400).unwrap();
    let traj = solve_forced(&op, &tgrid, &History::constant(x0, 0), &vec![tr.zeros(); 400], &SolverOptions::default()).unwrap();
    for w in traj.states().windows(2) {
        assert!(w[1].norm() < w[0].norm());
    }
    assert!(traj.max_residual() <= TOL_EQ_NEWTON);
}

#[test]
fn singleton_sampling_reproduces_the_unforced_path() {
    let tr = SpectralTriple::k_squared(4, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let h = History::constant(StateVector::new(vec![1.0, -1.0, 0.5, 0.2]), 0);
    let mut rng = seeded_rng(3);
    let opts = SolverOptions::default();
    let exact = solve_forced(&op, &grid, &h, &vec![tr.zeros(); 64], &opts).unwrap();
    let paths = sample_xf(&op, &Multifunction::zero(), &grid, &h, &SamplingStrategy::RandomInterior { hold: 4 }, 3, &mut rng, &opts)
        .unwrap();
    assert_eq!(paths.len(), 3);
    for p in paths {
        assert_eq!(p.states(), exact.states());
    }
}

#[test]
fn feedback_toward_origin_obeys_the_radial_comparison() {
    let tr = SpectralTriple::k_squared(5, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let cp = 1.0;
    let mf = Multifunction::centered_ball(RadiusLaw::Constant { radius: cp }, cp).unwrap();
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let x0 = StateVector::new(vec![2.0, 1.0, -1.0, 0.5, 0.0]);
    let h = History::constant(x0.clone(), 0);
    let mut rng = seeded_rng(1);
    let target = tr.zeros();
    let traj = sample_xf(&op, &mf, &grid, &h, &SamplingStrategy::Feedback { target }, 1, &mut rng, &SolverOptions::default())
        .unwrap()
        .remove(0);
    assert!(membership_defect(&mf, &traj) <= TOL_F);
    // r_{i+1} ≤ (r_i - Δt C_P)⁺ / (1 + λ_1 Δt) for implicit Euler with f = -C_P x/|x|
    let dt = grid.dt();
    let mut r = x0.norm();
    for x in &traj.states()[1..] {
        r = (r - dt * cp).max(0.0) / (1.0 + dt);
        assert!(x.norm() <= r + 1e-12, "{} > {r}", x.norm());
    }
}

#[test]
fn bang_bang_uses_vertices_only() {
    let tr = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let verts = vec![StateVector::new(vec![1.0, 0.0]), StateVector::new(vec![0.0, 1.0]), StateVector::new(vec![-1.0, -1.0])];
    let mf = Multifunction::polytope(verts.clone(), 2.0).unwrap();
    let grid = TimeGrid::new(1.0, 90).unwrap();
    let h = History::constant(tr.zeros(), 10);
    let mut rng = seeded_rng(2);
    let paths = sample_xf(&op, &mf, &grid, &h, &SamplingStrategy::BangBang { switches: 3 }, 5, &mut rng, &SolverOptions::default())
        .unwrap();
    for p in &paths {
        assert_eq!(p.start_index(), 10);
        assert_eq!(p.selector().len(), 80);
        for f in p.selector() {
            assert!(verts.iter().any(|v| v == f));
        }
    }
}

#[test]
fn wpq_seminorm_examples() {
    let tr = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let c = StateVector::new(vec![1.0, 2.0]);
    let constant = Trajectory::from_samples(grid, 0, vec![c.clone(); 101]).unwrap();
    let (lp, lq) = wpq_seminorms(&tr, &constant);
    assert!((lp - tr.v_norm(&c)).abs() < 1e-12);
    assert_eq!(lq, 0.0);
    let zero = Trajectory::from_samples(grid, 0, vec![tr.zeros(); 101]).unwrap();
    assert_eq!(wpq_seminorms(&tr, &zero), (0.0, 0.0));

    let (one, _) = single_mode(1.0);
    let fine = TimeGrid::new(1.0, 10_000).unwrap();
    let states = (0..=10_000).map(|i| StateVector::new(vec![(-fine.node(i)).exp()])).collect();
    let decay = Trajectory::from_samples(fine, 0, states).unwrap();
    let (lp, lq) = wpq_seminorms(&one, &decay);
    let exact = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
    assert!((lp - exact).abs() < 1e-6, "{lp} vs {exact}");
    // x' = -x has the same L² norm
    assert!((lq - exact).abs() < 1e-4, "{lq} vs {exact}");
}

#[test]
fn dinf_examples() {
    let (_, op) = single_mode(2.0);
    let grid = TimeGrid::new(2.0, 2000).unwrap();
    let opts = SolverOptions::default();
    let from = |x: f64| {
        solve_forced(&op, &grid, &History::constant(StateVector::new(vec![x]), 0), &vec![StateVector::zeros(1); 2000], &opts)
            .unwrap()
    };
    let a = from(1.0);
    let b = from(2.0);
    assert_eq!(dinf_distance(1.0, &a, 1.0, &a), 0.0);
    assert!((dinf_distance(1.0, &a, 1.0, &b) - 1.0).abs() < 1e-14);
    // a path constant after t_1 is at distance |t_2 - t_1| from its stopped self
    let frozen = {
        let mut states = a.states()[..=1000].to_vec();
        states.extend(vec![a.state(1000).clone(); 1000]);
        Trajectory::from_samples(grid, 0, states).unwrap()
    };
    assert!((dinf_distance(1.0, &frozen, 1.1, &frozen) - 0.1).abs() < 1e-12);
}

#[test]
fn apriori_bound_holds_for_random_forced_paths() {
    let tr = SpectralTriple::k_squared(8, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let (c, r) = (1.0, 1.0);
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let mut rng = seeded_rng(77);
    let opts = SolverOptions::default();
    let strategies = [SamplingStrategy::BangBang { switches: 4 }, SamplingStrategy::RandomInterior { hold: 5 }];
    let mut paths = Vec::new();
    for k in 0..100 {
        let x0 = uniform_in_h_ball(&mut rng, 8, r);
        // B_c(t_0, x_0) has radius c (1 + |x_0|) for a constant history
        let radius = c * (1.0 + x0.norm());
        let mf = Multifunction::centered_ball(RadiusLaw::Constant { radius }, radius).unwrap();
        let h = History::constant(x0, 0);
        paths.extend(sample_xf(&op, &mf, &grid, &h, &strategies[k % 2], 1, &mut rng, &opts).unwrap());
    }
    let rep = check_apriori(&op, &GrowthCoercivityCertificate::heat(), c, r, &paths, opts.tol_eq(&op)).unwrap();
    assert!(rep.rejected.is_empty());
    assert!(rep.report.pass);
    assert!(rep.max_ratio < 1.0 && rep.max_ratio > 0.0, "{}", rep.max_ratio);
}

#[test]
fn apriori_unforced_from_origin_is_zero() {
    let tr = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let traj = solve_forced(&op, &grid, &History::constant(tr.zeros(), 0), &vec![tr.zeros(); 50], &SolverOptions::default()).unwrap();
    assert_eq!(traj.sup_h_norm(), 0.0);
    assert_eq!(wpq_seminorms(&tr, &traj), (0.0, 0.0));
    let rep = check_apriori(&op, &GrowthCoercivityCertificate::heat(), 1.0, 0.0, &[traj], 1e-9).unwrap();
    assert!(rep.report.pass);
    assert_eq!(rep.max_ratio, 0.0);
}

#[test]
fn selector_refinement_is_consistent() {
    let tr = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let mf = Multifunction::centered_ball(RadiusLaw::Constant { radius: 1.0 }, 1.0).unwrap();
    let coarse = TimeGrid::new(1.0, 64).unwrap();
    let h = History::constant(StateVector::new(vec![1.0, 0.5, -0.5]), 0);
    let mut rng = seeded_rng(9);
    let opts = SolverOptions::default();
    let base = sample_xf(&op, &mf, &coarse, &h, &SamplingStrategy::BangBang { switches: 2 }, 1, &mut rng, &opts)
        .unwrap()
        .remove(0);
    let mut gaps = Vec::new();
    for factor in [2, 4, 8] {
        let fine = coarse.refined(factor);
        let sel = refine_selector(base.selector(), factor);
        let tr_f = solve_forced(&op, &fine, &History::constant(h.current().clone(), 0), &sel, &opts).unwrap();
        assert!((tr_f.t_end() - base.t_end()).abs() < 1e-12);
        gaps.push(dinf_distance(1.0, &base, 1.0, &tr_f));
    }
    assert!(gaps.windows(2).all(|w| w[1] > w[0]));
    // every refinement stays within the first-order error of the coarse path
    assert!(gaps[2] < 10.0 * coarse.dt());
}

#[test]
fn csv_layout() {
    let tr = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
    let op = Operator::heat(&tr);
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let traj = solve_forced(&op, &grid, &History::constant(tr.unit(0), 0), &vec![tr.unit(1); 4], &SolverOptions::default()).unwrap();
    let csv = traj.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x_1,x_2,f_1,f_2,residual");
    assert_eq!(lines.len(), 6);
}
