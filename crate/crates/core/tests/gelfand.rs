use inclusion_core::{Error, SpectralTriple, StateVector};
use proptest::prelude::*;

fn v(c: &[f64]) -> StateVector {
    StateVector::new(c.to_vec())
}

#[test]
fn norm_examples() {
    let tr = SpectralTriple::k_squared(4, 2.0, 1.0).unwrap();
    assert_eq!(tr.h_norm(&v(&[3.0, 4.0, 0.0, 0.0])), 5.0);
    assert_eq!(tr.h_norm(&tr.zeros()), 0.0);
    let tr3 = SpectralTriple::k_squared(3, 2.0, 1.0).unwrap();
    assert!((tr3.h_norm(&v(&[1.0, 1.0, 1.0])) - 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(tr.v_norm(&tr.unit(1)), 2.0);
    assert_eq!(tr.vstar_norm(&tr.unit(1)), 0.5);
    assert_eq!(tr.v_norm(&tr.unit(0)), 1.0);
    assert_eq!(tr.vstar_norm(&tr.unit(0)), 1.0);
    let tr2 = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
    assert!((tr2.v_norm(&v(&[1.0, 1.0])) - 5f64.sqrt()).abs() < 1e-15);
    assert!((tr2.vstar_norm(&v(&[1.0, 1.0])) - 1.25f64.sqrt()).abs() < 1e-15);
}

#[test]
fn pairing_examples() {
    let tr = SpectralTriple::k_squared(2, 2.0, 1.0).unwrap();
    assert_eq!(tr.pairing(&tr.unit(0), &tr.unit(0)), 1.0);
    assert_eq!(tr.pairing(&tr.unit(0), &tr.unit(1)), 0.0);
    assert_eq!(tr.pairing(&v(&[2.0, -1.0]), &v(&[3.0, 5.0])), 1.0);
}

#[test]
fn invalid_triples_are_rejected() {
    assert!(SpectralTriple::new(vec![1.0, 0.0], 2.0, 1.0).is_err());
    assert!(SpectralTriple::new(vec![1.0, -4.0], 2.0, 1.0).is_err());
    assert!(SpectralTriple::new(vec![1.0], 1.5, 1.0).is_err());
    assert!(SpectralTriple::new(vec![1.0], 2.0, 0.0).is_err());
    assert!(SpectralTriple::new(vec![], 2.0, 1.0).is_err());
    let tr = SpectralTriple::k_squared(3, 3.0, 1.0).unwrap();
    assert!((tr.q() - 1.5).abs() < 1e-15);
    assert!(matches!(tr.check_dim(&v(&[1.0])), Err(Error::DimensionMismatch { expected: 3, actual: 1 })));
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn duality_and_embedding(g in coords(6), x in coords(6)) {
        let tr = SpectralTriple::k_squared(6, 2.0, 1.0).unwrap();
        let (g, x) = (StateVector::new(g), StateVector::new(x));
        let lhs = tr.pairing(&g, &x).abs();
        prop_assert!(lhs <= tr.vstar_norm(&g) * tr.v_norm(&x) * (1.0 + 1e-12) + 1e-12);
        // λ_1 = 1: ‖x‖_* ≤ |x| ≤ ‖x‖
        prop_assert!(tr.vstar_norm(&x) <= tr.h_norm(&x) * (1.0 + 1e-12));
        prop_assert!(tr.h_norm(&x) <= tr.v_norm(&x) * (1.0 + 1e-12));
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(x in coords(5), y in coords(5), a in -5.0f64..5.0) {
        let tr = SpectralTriple::k_squared(5, 2.0, 1.0).unwrap();
        let (x, y) = (StateVector::new(x), StateVector::new(y));
        for norm in [SpectralTriple::h_norm, SpectralTriple::v_norm, SpectralTriple::vstar_norm] {
            let nx = norm(&tr, &x);
            prop_assert!((norm(&tr, &x.scaled(a)) - a.abs() * nx).abs() <= 1e-12 * (1.0 + a.abs() * nx));
            prop_assert!(norm(&tr, &(&x + &y)) <= (nx + norm(&tr, &y)) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
