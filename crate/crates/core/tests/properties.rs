use std::collections::BTreeMap;
use std::sync::OnceLock;

use involute::catalog::{get_system, ParameterSet, SystemDefinition, SystemName};
use involute::construct::{build_chain, extend_family, pullback, ChainPattern, FunctionFamily, VerifyOptions};
use involute::dynamics::hamiltonian_field;
use involute::expr::{evaluate, parse, Expr, Point, UnaryOp};
use involute::poisson::{bracket, product, NamedFunction, PoissonStructure};
use proptest::prelude::*;

fn expr_in(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        proptest::sample::select(vars).prop_map(Expr::var),
        (-3.0..3.0f64).prop_map(Expr::num),
        (-5i32..=5).prop_map(|n| Expr::num(n as f64)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| -a),
            (inner.clone(), 2..=3i32).prop_map(|(a, n)| a.powi(n)),
            (inner.clone(), proptest::sample::select(vec![UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Tanh]))
                .prop_map(|(a, op)| a.apply(op)),
            (inner.clone(), inner).prop_map(|(a, b)| a / (Expr::num(2.0) + b.powi(2))),
        ]
    })
}

const XYZ: &[&str] = &["x", "y", "z"];

fn xyz_point() -> impl Strategy<Value = Point> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Point::from_pairs([("x", x), ("y", y), ("z", z)]))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn with_params(p: &Point, s: &PoissonStructure) -> Point {
    p.merged(&Point(s.parameters().clone()))
}

fn su2_system() -> &'static SystemDefinition {
    static DEF: OnceLock<SystemDefinition> = OnceLock::new();
    DEF.get_or_init(|| get_system(SystemName::Su2, &ParameterSet::default()).unwrap())
}

fn deformed_system() -> &'static SystemDefinition {
    static DEF: OnceLock<SystemDefinition> = OnceLock::new();
    DEF.get_or_init(|| get_system(SystemName::Sb2cDeformed, &ParameterSet::default()).unwrap())
}

fn su2() -> PoissonStructure {
    su2_system().primary().structure.clone()
}

fn sb2c() -> PoissonStructure {
    static S: OnceLock<PoissonStructure> = OnceLock::new();
    S.get_or_init(|| {
        let p = ParameterSet { alpha: 0.7, beta: -1.3, gamma: 0.4, k: 0.6, ..ParameterSet::default() };
        get_system(SystemName::Sb2cDeformed, &p).unwrap().primary().structure.clone()
    })
    .clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printed_form_reparses_to_identical_values(e in expr_in(XYZ), p in xyz_point()) {
        let back = parse(&e.to_string()).unwrap();
        let (a, b) = (evaluate(&e, &p), evaluate(&back, &p));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{}", e),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn simplify_preserves_values(e in expr_in(XYZ), p in xyz_point()) {
        let s = e.simplify();
        if let (Ok(a), Ok(b)) = (evaluate(&e, &p), evaluate(&s, &p)) {
            prop_assert!(close(a, b, 1e-9), "{} -> {}: {} vs {}", e, s, a, b);
        }
    }

    #[test]
    fn simplify_is_idempotent(e in expr_in(XYZ)) {
        let once = e.simplify();
        prop_assert_eq!(once.simplify(), once);
    }

    #[test]
    fn derivative_is_linear_and_matches_differences(f in expr_in(XYZ), g in expr_in(XYZ), p in xyz_point()) {
        let sum = (f.clone() + g.clone()).differentiate("x");
        let parts = f.differentiate("x") + g.differentiate("x");
        if let (Ok(a), Ok(b)) = (evaluate(&sum, &p), evaluate(&parts, &p)) {
            prop_assert!(close(a, b, 1e-9));
        }
        let h = 1e-6;
        let x = p.get("x").unwrap();
        let shifted = |dx: f64| {
            let mut q = p.clone();
            q.set("x", x + dx);
            evaluate(&f, &q)
        };
        if let (Ok(d), Ok(up), Ok(down)) = (evaluate(&f.differentiate("x"), &p), shifted(h), shifted(-h)) {
            let fd = (up - down) / (2.0 * h);
            let scale = 1.0 + up.abs().max(down.abs());
            prop_assume!(scale < 1e4);
            prop_assert!((d - fd).abs() / scale < 1e-6, "{}: {} vs {}", f, d, fd);
        }
    }

    #[test]
    fn bracket_is_antisymmetric(f in expr_in(XYZ), g in expr_in(XYZ)) {
        for s in [su2(), sb2c()] {
            let sum = bracket(&f, &g, &s).unwrap() + bracket(&g, &f, &s).unwrap();
            prop_assert_eq!(sum.simplify(), Expr::zero());
        }
    }

    #[test]
    fn bracket_obeys_leibniz(f in expr_in(XYZ), g in expr_in(XYZ), h in expr_in(XYZ), p in xyz_point()) {
        let s = sb2c();
        let lhs = bracket(&f, &(g.clone() * h.clone()), &s).unwrap();
        let rhs = g.clone() * bracket(&f, &h, &s).unwrap() + bracket(&f, &g, &s).unwrap() * h;
        let p = with_params(&p, &s);
        if let (Ok(a), Ok(b)) = (evaluate(&lhs, &p), evaluate(&rhs, &p)) {
            prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
        }
    }

    #[test]
    fn factors_of_a_product_commute(f in expr_in(XYZ), g in expr_in(XYZ)) {
        let s = su2();
        let pair = product(&s, &s).unwrap();
        let left = f.rename(&s.chart().factor_renaming(1));
        let right = g.rename(&s.chart().factor_renaming(2));
        prop_assert_eq!(bracket(&left, &right, &pair).unwrap(), Expr::zero());
    }

    #[test]
    fn pullback_is_an_algebra_morphism(
        f in expr_in(XYZ), g in expr_in(XYZ), h in expr_in(XYZ),
        a in xyz_point(), b in xyz_point(),
    ) {
        let def = deformed_system();
        let m = def.map("mult").unwrap();
        let whole = pullback(&(f.clone() * g.clone() + h.clone()), m).unwrap();
        let parts = pullback(&f, m).unwrap() * pullback(&g, m).unwrap() + pullback(&h, m).unwrap();
        let pt = factor_point(&a, 1).merged(&factor_point(&b, 2));
        let pt = with_params(&pt, m.source());
        if let (Ok(x), Ok(y)) = (evaluate(&whole, &pt), evaluate(&parts, &pt)) {
            prop_assert!(close(x, y, 1e-9));
        }
    }

    #[test]
    fn pullback_commutes_with_brackets(f in expr_in(XYZ), g in expr_in(XYZ), a in xyz_point(), b in xyz_point()) {
        let def = deformed_system();
        let m = def.map("mult").unwrap();
        let (src, tgt) = (m.source(), m.target());
        let upstairs = bracket(&pullback(&f, m).unwrap(), &pullback(&g, m).unwrap(), src).unwrap();
        let downstairs = pullback(&bracket(&f, &g, tgt).unwrap(), m).unwrap();
        let pt = with_params(&factor_point(&a, 1).merged(&factor_point(&b, 2)), src);
        if let (Ok(x), Ok(y)) = (evaluate(&upstairs, &pt), evaluate(&downstairs, &pt)) {
            prop_assume!(x.abs().max(y.abs()) < 1e6);
            prop_assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
    }

    #[test]
    fn extended_families_stay_in_involution(cx in -2.0..2.0f64, cy in -2.0..2.0f64, cz in -2.0..2.0f64) {
        let def = su2_system();
        let s = def.primary().structure.clone();
        let c = def.casimir("c").unwrap().function.clone();
        let f = NamedFunction::new("f", Expr::num(cx) * Expr::var("x") + Expr::num(cy) * Expr::var("y") + Expr::num(cz) * Expr::var("z"));
        let seed = FunctionFamily::seeded(s.clone(), &[c.clone(), f]).unwrap();
        let options = VerifyOptions::default();
        let add = def.map("add").unwrap();
        let copies: Vec<(usize, NamedFunction)> = (1..=2)
            .map(|i| (i, NamedFunction::new(format!("c[{i}]"), c.body.rename(&s.chart().factor_renaming(i)))))
            .collect();
        let extended = extend_family(&seed, add, &copies, &options).unwrap();
        prop_assert_eq!(extended.len(), 4);
        prop_assert!(extended.involution_report(&options).unwrap().passes(1e-9));
    }

    #[test]
    fn spin_field_is_the_cross_product(
        t1 in 0.0..std::f64::consts::PI, f1 in -3.2..3.2f64,
        t2 in 0.0..std::f64::consts::PI, f2 in -3.2..3.2f64,
    ) {
        let def = su2_system();
        let h = &def.hamiltonian("H").unwrap().body;
        let field = hamiltonian_field(h, def.structure("su2^2").unwrap()).unwrap();
        let j1 = [t1.sin() * f1.cos(), t1.sin() * f1.sin(), t1.cos()];
        let j2 = [t2.sin() * f2.cos(), t2.sin() * f2.sin(), t2.cos()];
        let pt = Point::from_pairs([
            ("x1", j1[0]), ("y1", j1[1]), ("z1", j1[2]), ("x2", j2[0]), ("y2", j2[1]), ("z2", j2[2]),
        ]);
        let v = field.at(&pt).unwrap();
        let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let expected: Vec<f64> = cross(j1, j2).into_iter().chain(cross(j2, j1)).collect();
        for (got, want) in v.iter().zip(&expected) {
            prop_assert!((got - want).abs() < 1e-12, "{:?} vs {:?}", v, expected);
        }
    }
}

fn factor_point(p: &Point, i: usize) -> Point {
    Point(p.0.iter().map(|(k, v)| (format!("{k}{i}"), *v)).collect::<BTreeMap<_, _>>())
}

#[test]
fn factor_casimirs_are_constant_on_leaves() {
    let def = su2_system();
    let chart = def.map("leaf_chart^2").unwrap();
    let leaf = def.space("leaf^2").unwrap();
    let spec = def.sample_spec("leaf^2", &Default::default()).unwrap();
    let points = leaf.structure.sample(&spec, &[]).unwrap();
    for i in 1..=2 {
        let ci = parse(&format!("x{i}^2 + y{i}^2 + z{i}^2")).unwrap();
        let on_leaf = pullback(&ci, chart).unwrap();
        for pt in &points {
            let pt = with_params(pt, &leaf.structure);
            let grad: f64 = ["q1", "p1", "q2", "p2"]
                .iter()
                .map(|v| evaluate(&on_leaf.differentiate(v), &pt).unwrap().powi(2))
                .sum();
            assert!(grad.sqrt() < 1e-9);
        }
    }
}

#[test]
fn depth_three_chain_reproduces_pairwise_energy() {
    let def = su2_system();
    let s = def.primary().structure.clone();
    let c = def.casimir("c").unwrap().function.clone();
    let seed = FunctionFamily::seeded(s, &[c.clone(), NamedFunction::new("f", Expr::var("z"))]).unwrap();
    let pattern = ChainPattern::Multiplication { map: def.map("add").unwrap().clone(), casimirs: vec![c] };
    let family = build_chain(&seed, &pattern, 3, &VerifyOptions::default()).unwrap();
    let pulled = &family.members()[0].body;
    let factors = parse("x1^2 + y1^2 + z1^2 + x2^2 + y2^2 + z2^2 + x3^2 + y3^2 + z3^2").unwrap();
    let h3 = parse("x1*x2 + y1*y2 + z1*z2 + x1*x3 + y1*y3 + z1*z3 + x2*x3 + y2*y3 + z2*z3").unwrap();
    let diff = (Expr::num(0.5) * (pulled.clone() - factors) - h3).simplify();
    for pt in family.structure().sample(&Default::default(), &[]).unwrap() {
        assert!(evaluate(&diff, &pt).unwrap().abs() < 1e-10);
    }
}
