use inclusion_lab::config::{ConstraintSpec, Expectation, MultifunctionSpec, OperatorSpec};
use inclusion_lab::{parse_config, presets, CliError};

fn field_of(text: &str) -> (String, String) {
    match parse_config(text) {
        Err(CliError::Config { field, message }) => (field, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_heat_config_gets_defaults() {
    let cfg = parse_config("[triple]\ndim = 4\n").unwrap();
    assert_eq!(cfg.seed, 0);
    assert!(matches!(cfg.operator, OperatorSpec::Heat));
    assert!(matches!(cfg.multifunction, MultifunctionSpec::CenteredBall { radius, c_f: None } if radius == 1.0));
    assert_eq!(cfg.tolerances.tol_k, 1e-6);
    assert_eq!(cfg.tolerances.tol_u, 1e-8);
    assert_eq!(cfg.tolerances.tol_dpp, 1e-3);
    assert_eq!(cfg.checks.samples, 1000);
    assert_eq!(cfg.viability.expect, Expectation::Viable);
    let setup = cfg.setup().unwrap();
    assert_eq!(setup.triple.eigenvalues(), &[1.0, 4.0, 9.0, 16.0]);
    assert_eq!(setup.triple.q(), 2.0);
    assert_eq!(setup.grid.n_steps(), 512);
    assert_eq!(setup.history.start_index(), 0);
    assert_eq!(setup.history.current().as_slice(), &[0.0; 4]);
    assert!(setup.constraint.is_none() && setup.cost.is_none());
}

#[test]
fn consistent_q_is_accepted_and_inconsistent_q_rejected() {
    assert!(parse_config("[triple]\ndim = 2\np = 3.0\nq = 1.5\n").is_ok());
    let (field, message) = field_of("[triple]\ndim = 2\np = 3.0\nq = 2.0\n");
    assert_eq!(field, "triple.q");
    assert!(message.contains("inconsistent"), "{message}");
}

#[test]
fn zero_eigenvalue_is_rejected() {
    let (field, message) = field_of("[triple]\nlambda = [1.0, 0.0, 4.0]\n");
    assert_eq!(field, "triple");
    assert!(message.contains("invalid spectral triple"), "{message}");
    let (field, _) = field_of("[triple]\ndim = 3\nlambda = [1.0, 2.0]\n");
    assert_eq!(field, "triple.dim");
    let (field, _) = field_of("[triple]\ndim = 3\nlambda = \"linear\"\n");
    assert_eq!(field, "triple.lambda");
}

#[test]
fn schema_violations_name_the_field() {
    let (field, message) = field_of("[triple]\ndim = 2\nhorizn = 1.0\n");
    assert_eq!(field, "triple.horizn");
    assert!(message.contains("horizn"), "{message}");
    let (field, _) = field_of("[triple]\ndim = \"two\"\n");
    assert_eq!(field, "triple.dim");
    let (field, message) = field_of("[triple]\ndim = 2\n[operator]\nkind = \"wave\"\n");
    assert_eq!(field, "operator.kind");
    assert!(message.contains("wave"), "{message}");
    let (field, _) = field_of("[triple]\ndim = 2\n[operator]\nkind = \"burgers\"\n");
    assert_eq!(field, "operator");
    let (field, _) = field_of("seed = 1\nbogus = 2\n[triple]\ndim = 2\n");
    assert_eq!(field, "bogus");
    let (field, _) = field_of("[triple]\ndim = 2\n[tolerances]\ntol_dpp = -1.0\n");
    assert_eq!(field, "tolerances.tol_dpp");
    let (field, _) = field_of("[triple]\ndim = 2\n[start]\nx0 = [1.0]\n");
    assert_eq!(field, "start.x0");
    let (field, _) = field_of("[triple]\ndim = 2\n[constraint]\nkind = \"ball\"\ncenter = [0.0, 0.0]\nradius = -1.0\n");
    assert_eq!(field, "constraint.radius");
    let (field, _) = field_of("[triple]\ndim = 2\n[start]\nx0 = [1.0, 0.0]\nexcursion = [3.0, 0.0]\n");
    assert_eq!(field, "start.excursion");
    let (field, message) = field_of("[triple\ndim = 2\n");
    assert_eq!(field, "");
    assert!(!message.is_empty());
}

#[test]
fn sections_build_core_objects() {
    let text = r#"
        seed = 9
        [triple]
        lambda = [1.0, 3.0]
        horizon = 2.0
        [operator]
        kind = "table"
        rows = [[1.0, 0.5], [-0.5, 3.0]]
        [multifunction]
        kind = "polytope"
        vertices = [[1.0, 0.0], [0.0, 2.0], [-1.0, -1.0]]
        [constraint]
        kind = "ball"
        center = [0.5, 0.0]
        radius = 2.0
        [cost]
        kind = "indicator_tube"
        radius = 1.5
        [start]
        x0 = [0.1, 0.2]
        t0 = 0.5
        excursion = [1.0, 1.0]
        [grid]
        steps = 64
    "#;
    let cfg = parse_config(text).unwrap();
    assert!(matches!(cfg.constraint, Some(ConstraintSpec::Ball { .. })));
    let s = cfg.setup().unwrap();
    assert_eq!(s.grid.n_steps(), 64);
    assert_eq!(s.history.start_index(), 16);
    assert_eq!(s.history.states()[0].as_slice(), &[1.0, 1.0]);
    assert_eq!(s.history.current().as_slice(), &[0.1, 0.2]);
    assert_eq!(s.mf.c_f(), 2.0);
    assert_eq!(s.cost.unwrap().tube_radius(), Some(1.5));
}

#[test]
fn every_preset_parses() {
    for name in presets::NAMES {
        let text = presets::preset(name).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.setup().unwrap();
    }
    assert!(presets::preset("nope").is_none());
}
