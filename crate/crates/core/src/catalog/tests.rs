use super::*;
use crate::expr::{evaluate, parse};
use crate::poisson::bracket;

fn defaults() -> ParameterSet {
    ParameterSet::default()
}

fn system(name: SystemName) -> SystemDefinition {
    get_system(name, &defaults()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_system_verifies_with_defaults() {
    for name in SystemName::ALL {
        let def = system(name);
        let outcomes = def.verify(None, &SampleSpec::default()).unwrap();
        assert!(outcomes.iter().all(|o| o.passed), "{name}");
        assert!(outcomes.iter().any(|o| o.kind == CheckKind::Jacobi));
    }
}

#[test]
fn names_round_trip() {
    for name in SystemName::ALL {
        assert_eq!(name.as_str().parse::<SystemName>().unwrap(), name);
    }
    assert!(matches!("su3".parse::<SystemName>(), Err(CatalogError::UnknownSystem(_))));
}

#[test]
fn parameter_set_rejects_bad_values() {
    let mut p = defaults();
    assert!(matches!(p.set("omega", 1.0), Err(CatalogError::UnknownParameter(_))));
    assert!(p.set("k_sites", 2.5).is_err());
    p.set("k", 0.0).unwrap();
    assert!(p.validate(SystemName::Su2).is_ok());
    let err = p.validate(SystemName::Sb2cDeformed).unwrap_err();
    assert!(err.to_string().contains("k must be non-zero"), "{err}");
    let p = defaults().with("r", -1.0).unwrap();
    assert!(p.validate(SystemName::Su2).is_err());
    let p = defaults().with("k_sites", 1.0).unwrap();
    assert!(p.validate(SystemName::Su2Chain).is_err());
}

#[test]
fn realization_needs_alpha_delta_squared_and_unit_beta() {
    let p = defaults().with("alpha", 2.0).unwrap();
    let err = get_system(SystemName::Sb2cRealization, &p).unwrap_err();
    assert!(err.to_string().contains("alpha = delta^2"), "{err}");
    let p = p.with("delta", 2f64.sqrt()).unwrap();
    assert!(get_system(SystemName::Sb2cRealization, &p).is_ok());
    let p = defaults().with("beta", 2.0).unwrap();
    assert!(get_system(SystemName::Sb2cRealization, &p).is_err());
    let p = defaults().with("a", 0.0).unwrap().with("gamma", 0.0).unwrap();
    assert!(get_system(SystemName::Sb2cRealization, &p).is_err());
}

#[test]
fn su2_exposes_the_spin_spin_inventory() {
    let def = system(SystemName::Su2);
    assert_eq!(def.casimir("c").unwrap().function.body.to_string(), "x^2 + y^2 + z^2");
    assert_eq!(def.map("add").unwrap().components()[2].to_string(), "z1 + z2");
    assert_eq!(def.hamiltonian("H").unwrap().body.to_string(), "x1*x2 + y1*y2 + z1*z2");
    let f2 = def.family("F2").unwrap();
    let printed: Vec<String> = f2.family.members().iter().map(|m| m.body.to_string()).collect();
    assert_eq!(
        printed,
        ["(x1 + x2)^2 + (y1 + y2)^2 + (z1 + z2)^2", "z1 + z2", "x1^2 + y1^2 + z1^2", "x2^2 + y2^2 + z2^2"]
    );
    assert!(def.map("leaf_chart^2").is_ok());
}

#[test]
fn chain_carries_pairwise_hamiltonian() {
    let p = defaults().with("k_sites", 3.0).unwrap();
    let def = get_system(SystemName::Su2Chain, &p).unwrap();
    let h = &def.hamiltonian("H").unwrap().body;
    let expected = parse("x1*x2 + y1*y2 + z1*z2 + x1*x3 + y1*y3 + z1*z3 + x2*x3 + y2*y3 + z2*z3").unwrap();
    let pt = Point::from_pairs([("x1", 0.3), ("y1", -1.2), ("z1", 0.7), ("x2", 1.1), ("y2", 0.4), ("z2", -0.5)])
        .merged(&Point::from_pairs([("x3", -0.9), ("y3", 0.2), ("z3", 1.6)]));
    assert!((evaluate(h, &pt).unwrap() - evaluate(&expected, &pt).unwrap()).abs() < 1e-14);
    assert_eq!(def.family("F3").unwrap().family.path(), ["add", "add×id"]);
    assert!(def.hamiltonian("H_canonical").is_ok());
    assert!(def.identity("H_canonical∘chart").is_ok());
}

#[test]
fn deformed_brackets_at_unit_parameters() {
    let def = system(SystemName::Sb2cDeformed);
    let s = def.primary();
    let pt = Point::from_pairs([("x", 0.4), ("y", -0.7), ("z", 1.3)]);
    let at = |a: &str, b: &str| {
        let e = bracket(&parse(a).unwrap(), &parse(b).unwrap(), &s.structure).unwrap();
        evaluate(&e, &pt.merged(&Point(s.structure.parameters().clone()))).unwrap()
    };
    assert!((at("z", "x") - -0.7).abs() < 1e-15);
    assert!((at("y", "z") - 0.4).abs() < 1e-15);
    assert!((at("x", "y") - 1.3f64.sinh()).abs() < 1e-15);
}

#[test]
fn canonical_hamiltonians_report_their_identities() {
    let list = canonical_hamiltonians(SystemName::Su2, &defaults()).unwrap();
    let names: Vec<&str> = list.iter().map(|(h, _)| h.name.as_str()).collect();
    assert_eq!(names, ["H_canonical", "H1_canonical"]);
    for (h, o) in &list {
        assert!(o.passed, "{}: {:e}", h.name, o.report.max_residual);
        assert_eq!(o.report.points_checked, 100);
    }
    assert!(list[0].1.report.max_residual < 1e-12);
    assert!(canonical_hamiltonians(SystemName::Triangular, &defaults()).is_err());
}

#[test]
fn deformed_h1_appears_in_the_special_case() {
    let p = ParameterSet { a: 0.0, gamma: -1.0, delta: 1.0, k: 0.5, ..defaults() };
    let list = canonical_hamiltonians(SystemName::Sb2cRealization, &p).unwrap();
    let h1 = list.iter().find(|(h, _)| h.name == "H1_canonical").expect("H1 present");
    assert!(h1.1.passed && h1.1.report.max_residual < 1e-10);
    let plain = canonical_hamiltonians(SystemName::Sb2cRealization, &defaults()).unwrap();
    assert!(plain.iter().all(|(h, _)| h.name != "H1_canonical"));
}

#[test]
fn classical_limit_matches_su2_at_unit_parameters() {
    let limit = classical_limit(SystemName::Sb2cDeformed, &defaults()).unwrap();
    let su2 = system(SystemName::Su2);
    let (a, b) = (&limit.primary().structure, &su2.primary().structure);
    let scope = a.scope();
    for pt in a.sample(&SampleSpec::default(), &[]).unwrap() {
        let values = Point(scope.params.clone()).merged(&pt);
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = (evaluate(&a.entry(i, j), &values).unwrap(), evaluate(&b.entry(i, j), &pt).unwrap());
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
    assert_eq!(limit.casimir("c0").unwrap().function.body.to_string(), "alpha*x^2 + beta*y^2 + gamma*z^2");
    assert!(classical_limit(SystemName::Su2, &defaults()).is_err());
}

#[test]
fn casimir_gap_shrinks_quadratically() {
    let p = defaults();
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&k| casimir_limit_gap(&p, k).unwrap()).collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((80.0..=120.0).contains(&ratio), "ratio {ratio}");
    }
    // γz⁴k²/12 at |z| = 2
    assert!((gaps[0] - 16.0 * 0.01 / 12.0).abs() < 1e-4);
    let flat = ParameterSet { gamma: 0.0, ..p };
    assert_eq!(casimir_limit_gap(&flat, 0.1).unwrap(), 0.0);
}

#[test]
fn restriction_closes_with_scaled_coefficients() {
    let p = ParameterSet { alpha: 1.5, beta: -0.5, gamma: 0.75, k: 0.8, ..defaults() };
    let fit = restriction_fit(&p, &SampleSpec::default()).unwrap();
    assert!(fit.residual < 1e-9, "{fit:?}");
    assert!((fit.alpha - 2.0 * 1.5 / 0.8).abs() < 1e-9);
    assert!((fit.beta - 2.0 * -0.5 / 0.8).abs() < 1e-9);
    assert!((fit.gamma - 2.0 * 0.75 * 0.8).abs() < 1e-9);
    assert_eq!(fit.points, 100);
}

#[test]
fn json_round_trip_reproduces_checks() {
    for name in SystemName::ALL {
        let def = system(name);
        let text = def.to_json();
        let back = SystemDefinition::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text, "{name}");
        let spec = SampleSpec::default().with_count(20);
        let before = def.verify(None, &spec).unwrap();
        let after = back.verify(None, &spec).unwrap();
        assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            assert_eq!((x.kind, &x.subject, x.passed), (y.kind, &y.subject, y.passed));
            assert!((x.report.max_residual - y.report.max_residual).abs() < 1e-12, "{name} {}", x.subject);
        }
    }
}

#[test]
fn bare_structure_json_loads() {
    let text = r#"{"chart":["x","y","z"],"bivector":{"x,y":"z","y,z":"x","z,x":"y"}}"#;
    let def = SystemDefinition::from_json(text).unwrap();
    assert_eq!(def.name(), "custom");
    let o = def.verify(Some(&[CheckKind::Jacobi]), &SampleSpec::default()).unwrap();
    assert!(o[0].passed);
    assert!(SystemDefinition::from_json("{").is_err());
}

#[test]
fn lookups_name_what_is_missing() {
    let def = system(SystemName::Su2);
    let err = def.map("nope").unwrap_err();
    assert_eq!(err.to_string(), "no map named `nope`");
    assert!(def.hamiltonian("H1").is_ok());
}

#[test]
fn jacobi_holds_across_the_parameter_grid() {
    for alpha in [1.0, -1.0] {
        for gamma in [1.0, -1.0] {
            for k in [0.5, 1.0, 2.0] {
                let p = ParameterSet { alpha, gamma, k, ..defaults() };
                for name in [SystemName::Sb2cDeformed, SystemName::Triangular] {
                    let def = get_system(name, &p).unwrap_or_else(|e| panic!("{name} {p:?}: {e}"));
                    let o = def.verify(Some(&[CheckKind::Jacobi]), &SampleSpec::default()).unwrap();
                    assert!(o.iter().all(|o| o.passed && o.report.max_residual < 1e-9));
                }
            }
        }
    }
}
