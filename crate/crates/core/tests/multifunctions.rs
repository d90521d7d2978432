use inclusion_core::multifunctions::{
    check_linear_growth, check_usc, growth_witness, CenterLaw, InflatedSet, Multifunction, RadiusLaw, SetValue,
};
use inclusion_core::sampling::{seeded_rng, StateSampler};
use inclusion_core::{SpectralTriple, StateVector};
use proptest::prelude::*;

fn v(c: &[f64]) -> StateVector {
    StateVector::new(c.to_vec())
}

#[test]
fn support_and_projection_examples() {
    let ball = SetValue::ball(v(&[0.0, 0.0]), 2.0);
    assert_eq!(ball.support(&v(&[3.0, 4.0])), 10.0);
    assert_eq!(ball.support(&v(&[0.0, 0.0])), 0.0);
    let p = ball.project(&v(&[3.0, 4.0]));
    assert!((&p - &v(&[1.2, 1.6])).norm() < 1e-15);
    assert_eq!(ball.project(&v(&[0.5, -1.0])), v(&[0.5, -1.0]));
    let poly = SetValue::Polytope { vertices: vec![v(&[1.0, 0.0]), v(&[0.0, -1.0])] };
    assert_eq!(poly.support(&v(&[1.0, 1.0])), 1.0);
    let seg = SetValue::Polytope { vertices: vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])] };
    assert!((&seg.project(&v(&[0.4, 1.0])) - &v(&[0.4, 0.0])).norm() < 1e-12);
}

#[test]
fn growth_examples() {
    let tr = SpectralTriple::k_squared(4, 2.0, 1.0).unwrap();
    let mut rng = seeded_rng(1);
    let sampler = StateSampler::default();
    let cp = 1.5;
    let constant = Multifunction::centered_ball(RadiusLaw::Constant { radius: cp }, cp).unwrap();
    let rep = check_linear_growth(&constant, &tr, &sampler, &mut rng, 300, 0.0);
    assert!(rep.pass);
    for _ in 0..50 {
        let x = sampler.sample_state(&mut rng, &tr);
        let w = growth_witness(&constant, 0.0, &x);
        assert!((w.margin() - cp * x.norm()).abs() < 1e-12);
    }
    assert_eq!(growth_witness(&constant, 0.0, &tr.zeros()).margin(), 0.0);
    let affine = Multifunction::centered_ball(RadiusLaw::Affine { base: 1.0, slope: 1.0 }, 1.0).unwrap();
    let rep = check_linear_growth(&affine, &tr, &sampler, &mut rng, 300, 1e-12);
    assert!(rep.pass);
    assert!(rep.margins.iter().all(|m| m.abs() < 1e-12));
    let too_small = Multifunction::centered_ball(RadiusLaw::Affine { base: 1.0, slope: 2.0 }, 1.0).unwrap();
    assert!(!check_linear_growth(&too_small, &tr, &sampler, &mut rng, 50, 1e-12).pass);
}

#[test]
fn usc_probes() {
    let tr = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
    let radii = [0.1, 0.01, 0.001];
    let mut rng = seeded_rng(5);
    let x = v(&[0.3, 0.4, 0.0]);
    let constant = Multifunction::centered_ball(RadiusLaw::Constant { radius: 1.0 }, 1.0).unwrap();
    let probe = check_usc(&constant, &tr, 0.5, &x, &radii, 50, &mut rng, 1e-12);
    assert!(probe.report.pass);
    assert!(probe.excess.iter().all(|e| *e == 0.0));
    let affine = Multifunction::centered_ball(RadiusLaw::Affine { base: 1.0, slope: 1.0 }, 1.0).unwrap();
    let probe = check_usc(&affine, &tr, 0.5, &x, &radii, 50, &mut rng, 1e-12);
    assert!(probe.report.pass);
    for (e, r) in probe.excess.iter().zip(&radii) {
        assert!(*e <= r + 1e-12);
    }
    let step = Multifunction::centered_ball(RadiusLaw::Step { base: 1.0, jump: 1.0, threshold: 1.0 }, 2.0).unwrap();
    let at_kink = v(&[1.0, 0.0, 0.0]);
    let probe = check_usc(&step, &tr, 0.5, &at_kink, &radii, 50, &mut rng, 1e-6);
    assert!(!probe.report.pass);
    assert!(probe.excess.iter().all(|e| (e - 1.0).abs() < 1e-12));
}

#[test]
fn invalid_multifunctions_are_rejected() {
    assert!(Multifunction::centered_ball(RadiusLaw::Constant { radius: -1.0 }, 1.0).is_err());
    assert!(Multifunction::centered_ball(RadiusLaw::Constant { radius: 1.0 }, f64::NAN).is_err());
    assert!(Multifunction::polytope(vec![], 1.0).is_err());
    assert!(Multifunction::polytope(vec![v(&[1.0]), v(&[1.0, 2.0])], 1.0).is_err());
    assert!(Multifunction::affine_ball(CenterLaw::Scaled { factor: f64::INFINITY }, RadiusLaw::Constant { radius: 1.0 }, 1.0)
        .is_err());
}

#[test]
fn inflated_set_distance() {
    let e = InflatedSet::new(SetValue::ball(v(&[0.0, 0.0]), 1.0), 0.5);
    assert!((e.dist(&v(&[3.0, 0.0])) - 1.5).abs() < 1e-15);
    assert!(e.contains(&v(&[1.4, 0.0]), 0.0));
    assert!((e.support(&v(&[0.0, 2.0])) - 3.0).abs() < 1e-15);
}

fn point(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-4.0f64..4.0, n).prop_map(StateVector::new)
}

fn polytope() -> impl Strategy<Value = SetValue> {
    prop::collection::vec(point(3), 1..7).prop_map(|vertices| SetValue::Polytope { vertices })
}

fn ball() -> impl Strategy<Value = SetValue> {
    (point(3), 0.0f64..3.0).prop_map(|(c, r)| SetValue::ball(c, r))
}

fn any_set() -> impl Strategy<Value = SetValue> {
    prop_oneof![polytope(), ball()]
}

fn members(set: &SetValue) -> Vec<StateVector> {
    let mut out = set.extreme_points();
    out.push(set.center());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_optimal(set in any_set(), y in point(3)) {
        let p = set.project(&y);
        prop_assert!(set.dist(&p) <= 1e-9);
        // variational inequality ⟨y - P y, z - P y⟩ ≤ 0 on members of the set
        let r = &y - &p;
        for z in members(&set) {
            prop_assert!(r.dot(&(&z - &p)) <= 1e-8 * (1.0 + r.norm() * (&z - &p).norm()));
        }
    }

    #[test]
    fn projection_is_nonexpansive(set in any_set(), y in point(3), z in point(3)) {
        let d = (&set.project(&y) - &set.project(&z)).norm();
        prop_assert!(d <= (&y - &z).norm() * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn support_is_positively_homogeneous_and_dominates(set in any_set(), d in point(3), a in 0.0f64..5.0) {
        let s = set.support(&d);
        prop_assert!((set.support(&d.scaled(a)) - a * s).abs() <= 1e-10 * (1.0 + a * s.abs()));
        for z in members(&set) {
            prop_assert!(z.dot(&d) <= s + 1e-10 * (1.0 + s.abs()));
        }
        let sp = set.support_point(&d);
        prop_assert!((sp.dot(&d) - s).abs() <= 1e-9 * (1.0 + s.abs()));
    }
}
