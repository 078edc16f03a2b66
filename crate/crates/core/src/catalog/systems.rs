use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{Casimir, CatalogError, CatalogMap, Family, Hamiltonian, Identity, ParameterSet, Space, SystemDefinition};
use crate::construct::{self, build_chain, ChainPattern, FunctionFamily, PoissonMap, VerifyOptions};
use crate::expr::{parse, Compiled, Expr, Point};
use crate::poisson::{self, NamedFunction, PoissonStructure};
use crate::sample::SampleSpec;
use crate::tolerance;

fn ex(text: &str) -> Result<Expr, CatalogError> {
    Ok(parse(text)?)
}

fn named(name: &str, text: &str) -> Result<NamedFunction, CatalogError> {
    Ok(NamedFunction::new(name, ex(text)?))
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn structure(
    coords: &[&str],
    parameters: BTreeMap<String, f64>,
    entries: &[(&str, &str, &str)],
) -> Result<PoissonStructure, CatalogError> {
    let mut s = PoissonStructure::new(poisson::Chart::new(coords.iter().copied())?, parameters)?;
    for (a, b, text) in entries {
        s.set(a, b, ex(text)?)?;
    }
    Ok(s)
}

fn space(name: &str, structure: PoissonStructure, ranges: &[(&str, (f64, f64))]) -> Space {
    let ranges = ranges.iter().map(|(c, r)| (c.to_string(), *r)).collect();
    Space { name: name.to_string(), structure, ranges }
}

/// `n`-fold product of `base` with factor-suffixed coordinates and ranges.
fn power(base: &Space, n: usize) -> Result<Space, CatalogError> {
    let factors = vec![&base.structure; n];
    let structure = poisson::product_all(&factors)?;
    let mut ranges = BTreeMap::new();
    for i in 1..=n {
        for (c, r) in &base.ranges {
            ranges.insert(format!("{c}{i}"), *r);
        }
    }
    Ok(Space { name: format!("{}^{n}", base.name), structure, ranges })
}

fn options_for(source: &Space) -> VerifyOptions {
    let mut options = VerifyOptions::default();
    options.spec.ranges = source.ranges.clone();
    options
}

fn map(name: &str, source: &Space, target: &Space, components: &[&str]) -> Result<CatalogMap, CatalogError> {
    let components = components.iter().map(|c| ex(c)).collect::<Result<Vec<_>, _>>()?;
    let m = PoissonMap::deferred(name, source.structure.clone(), target.structure.clone(), components)?
        .verified(&options_for(source))?;
    Ok(CatalogMap { source: source.name.clone(), target: target.name.clone(), map: m })
}

/// `n`-fold product of a catalog map, optionally renaming source coordinates.
fn power_map(
    m: &CatalogMap,
    n: usize,
    source: &Space,
    target: &Space,
    renaming: Option<&BTreeMap<String, String>>,
) -> Result<CatalogMap, CatalogError> {
    let copies = vec![&m.map; n];
    let mut product = construct::product_map(&copies)?.renamed(format!("{}^{n}", m.map.name()));
    if let Some(r) = renaming {
        product = product.with_source_renamed(r)?;
    }
    let product = product.verified(&options_for(source))?;
    Ok(CatalogMap { source: source.name.clone(), target: target.name.clone(), map: product })
}

fn factor_copy(f: &NamedFunction, base: &PoissonStructure, i: usize) -> NamedFunction {
    NamedFunction::new(format!("{}[{i}]", f.name), f.body.rename(&base.chart().factor_renaming(i)))
}

fn point(pairs: &[(&str, f64)]) -> Point {
    Point::from_pairs(pairs.iter().map(|(k, v)| (k.to_string(), *v)))
}

pub(crate) fn canonical_identity_name(hamiltonian: &str) -> String {
    format!("{hamiltonian}∘chart")
}

fn canonical_identity(
    def: &SystemDefinition,
    canonical: &Hamiltonian,
    chart: &str,
    tolerance: f64,
    ranges: &[(&str, (f64, f64))],
) -> Result<Identity, CatalogError> {
    let ambient = def.hamiltonian(canonical.canonical_of.as_deref().unwrap_or_default())?;
    Ok(Identity {
        name: canonical_identity_name(&canonical.name),
        space: canonical.space.clone(),
        lhs: construct::pullback(&ambient.body, def.map(chart)?)?,
        rhs: canonical.body.clone(),
        tolerance,
        ranges: ranges.iter().map(|(c, r)| (c.to_string(), *r)).collect(),
    })
}

fn su2_space(r: f64) -> Result<Space, CatalogError> {
    let s = structure(&["x", "y", "z"], params(&[("r", r)]), &[("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")])?;
    Ok(space("su2", s, &[]))
}

/// Canonical `(q, p)` chart of the sphere `c = r²` with `{q, p} = 1`.
fn leaf_space(r: f64) -> Result<Space, CatalogError> {
    let s = PoissonStructure::canonical(&[("q", "p")])?.with_parameters(&params(&[("r", r)]))?;
    Ok(space("leaf", s, &[("q", (-PI, PI)), ("p", (-0.95 * r, 0.95 * r))]))
}

const LEAF_CHART: [&str; 3] = ["sqrt(r^2 - p^2)*cos(q)", "sqrt(r^2 - p^2)*sin(q)", "p"];

fn spin_initial(n: usize, r: f64) -> Point {
    let mut p = Point::new();
    for i in 1..=n {
        let lat = 0.9 * (1.7 * i as f64).sin();
        let lon = 2.3 * i as f64;
        p.set(format!("x{i}"), r * lat.cos() * lon.cos());
        p.set(format!("y{i}"), r * lat.cos() * lon.sin());
        p.set(format!("z{i}"), r * lat.sin());
    }
    p
}

fn canonical_initial(n: usize, p_scale: f64) -> Point {
    let mut p = Point::new();
    for i in 1..=n {
        p.set(format!("q{i}"), 1.3 * i as f64 - 1.0);
        p.set(format!("p{i}"), p_scale * 0.4 * (2.1 * i as f64).cos());
    }
    p
}

fn pair_sum(n: usize, term: impl Fn(usize, usize) -> String) -> String {
    let mut terms = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            terms.push(term(i, j));
        }
    }
    terms.join(" + ")
}

fn spin_chain(p: &ParameterSet, n: usize, name: &str) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new(name, p.clone());
    let su2 = su2_space(p.r)?;
    let su2n = power(&su2, n)?;
    let leaf = leaf_space(p.r)?;
    let leafn = power(&leaf, n)?;

    let c = named("c", "x^2 + y^2 + z^2")?;
    def.casimirs.push(Casimir { space: su2.name.clone(), function: c.clone() });
    let pair = power(&su2, 2)?;
    let add = map("add", &pair, &su2, &["x1 + x2", "y1 + y2", "z1 + z2"])?;
    let chart = map("leaf_chart", &leaf, &su2, &LEAF_CHART)?;
    let chart_n = power_map(&chart, n, &leafn, &su2n, None)?;

    let seed = FunctionFamily::seeded(su2.structure.clone(), &[c.clone(), named("f", "z")?])?;
    let pattern = ChainPattern::Multiplication { map: add.map.clone(), casimirs: vec![c.clone()] };
    let family = build_chain(&seed, &pattern, n, &VerifyOptions::default())?;

    let h = ex(&pair_sum(n, |i, j| format!("x{i}*x{j} + y{i}*y{j} + z{i}*z{j}")))?;
    let h_canonical =
        ex(&pair_sum(n, |i, j| format!("p{i}*p{j} + sqrt((r^2 - p{i}^2)*(r^2 - p{j}^2))*cos(q{i} - q{j})")))?;
    let casimir_sum =
        (1..=n).map(|i| factor_copy(&c, &su2.structure, i).body).reduce(|a, b| a + b).unwrap_or_else(Expr::zero);
    let pulled_c = family.members()[0].body.clone();
    def.identities.push(Identity {
        name: "H = ½(c∘chain) − ½Σc[i]".into(),
        space: su2n.name.clone(),
        lhs: h.clone(),
        rhs: (0.5 * (pulled_c - casimir_sum)).simplify(),
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });

    let mut integrals = family.named_functions();
    integrals.retain(|f| f.body != h);
    def.hamiltonians.push(Hamiltonian {
        name: "H".into(),
        space: su2n.name.clone(),
        body: h,
        initial: spin_initial(n, p.r),
        integrals,
        canonical_of: None,
    });
    let momentum = (1..=n).map(|i| format!("p{i}")).collect::<Vec<_>>().join(" + ");
    def.hamiltonians.push(Hamiltonian {
        name: "H_canonical".into(),
        space: leafn.name.clone(),
        body: h_canonical,
        initial: canonical_initial(n, p.r),
        integrals: vec![named("f∘add", &momentum)?],
        canonical_of: Some("H".into()),
    });
    def.families.push(Family {
        name: format!("F{n}"),
        space: su2n.name.clone(),
        family,
        involutive: true,
        expected_rank: None,
    });

    def.spaces = vec![su2, su2n, leaf, leafn];
    if n != 2 {
        def.spaces.insert(1, pair);
    }
    def.maps = vec![add, chart, chart_n];
    let canonical = def.hamiltonian("H_canonical")?.clone();
    let id = canonical_identity(&def, &canonical, &format!("leaf_chart^{n}"), tolerance::EXACT, &[])?;
    def.identities.push(id);
    Ok(def)
}

pub(crate) fn su2(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = spin_chain(p, 2, "su2")?;
    if let Some(f) = def.families.iter_mut().find(|f| f.name == "F2") {
        f.expected_rank = Some(4);
    }
    def.hamiltonians.push(Hamiltonian {
        name: "H1".into(),
        space: "su2^2".into(),
        body: ex("(z1 + z2)^2 - ((x1 + x2)^2 + (y1 + y2)^2 + (z1 + z2)^2) + 2*r^2")?.simplify(),
        initial: spin_initial(2, p.r),
        integrals: vec![named("Δ(z^2)", "(z1 + z2)^2")?, named("c[1]", "x1^2 + y1^2 + z1^2")?],
        canonical_of: None,
    });
    def.hamiltonians.push(Hamiltonian {
        name: "H1_canonical".into(),
        space: "leaf^2".into(),
        body: ex("p1^2 + p2^2 - 2*sqrt((r^2 - p1^2)*(r^2 - p2^2))*cos(q1 - q2)")?,
        initial: canonical_initial(2, p.r),
        integrals: vec![named("Δ(z^2)", "(p1 + p2)^2")?],
        canonical_of: Some("H1".into()),
    });
    let h1 = def.hamiltonian("H1_canonical")?.clone();
    let id = canonical_identity(&def, &h1, "leaf_chart^2", tolerance::IDENTITY, &[])?;
    def.identities.push(id);
    let half = ex("(x1 + x2)^2/2 + (y1 + y2)^2/2 + (z1 + z2)^2/2 - r^2")?;
    def.identities.push(Identity {
        name: "H = ½(c∘add) − r² on leaves".into(),
        space: "leaf^2".into(),
        lhs: construct::pullback(&half, def.map("leaf_chart^2")?)?,
        rhs: construct::pullback(&def.hamiltonian("H")?.body, def.map("leaf_chart^2")?)?,
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });
    Ok(def)
}

pub(crate) fn su2_chain(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    spin_chain(p, p.k_sites, "su2_chain")
}

pub(crate) fn jordan_schwinger(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new("jordan_schwinger", p.clone());
    let tr2 = space(
        "T*R2",
        structure(&["q1", "q2", "p1", "p2"], BTreeMap::new(), &[("p1", "q1", "1"), ("p2", "q2", "1")])?,
        &[],
    );
    let renaming: BTreeMap<String, String> = [
        ("q11", "q1"),
        ("q21", "q2"),
        ("p11", "p1"),
        ("p21", "p2"),
        ("q12", "Q1"),
        ("q22", "Q2"),
        ("p12", "P1"),
        ("p22", "P2"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let tr4 = Space {
        name: "T*R4".into(),
        structure: power(&tr2, 2)?.structure.renamed(&renaming)?,
        ranges: BTreeMap::new(),
    };
    let su2 = space(
        "su2",
        structure(&["x", "y", "z"], BTreeMap::new(), &[("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")])?,
        &[],
    );
    let su2_2 = power(&su2, 2)?;

    let c = named("c", "x^2 + y^2 + z^2")?;
    def.casimirs.push(Casimir { space: su2.name.clone(), function: c.clone() });
    let psi = map("psi", &tr2, &su2, &["(q1*q2 + p1*p2)/2", "(p1*q2 - q1*p2)/2", "(p1^2 + q1^2 - p2^2 - q2^2)/4"])?;
    let psi2 = power_map(&psi, 2, &tr4, &su2_2, Some(&renaming))?;
    let add = map("add", &su2_2, &su2, &["x1 + x2", "y1 + y2", "z1 + z2"])?;

    let f = ex("(p1^2 + p2^2 + q1^2 + q2^2)^2/16")?;
    let f1 = named("F1", "(p1^2 + p2^2 + q1^2 + q2^2)^2/16")?;
    let f2 = named("F2", "(P1^2 + P2^2 + Q1^2 + Q2^2)^2/16")?;
    let h = named(
        "H",
        "((q1*q2 + p1*p2)*(Q1*Q2 + P1*P2) + (p1*q2 - q1*p2)*(P1*Q2 - Q1*P2))/2 \
         + (p1^2 + q1^2 - p2^2 - q2^2)*(P1^2 + Q1^2 - P2^2 - Q2^2)/8",
    )?;
    let g1 = named("G1", "(q1*q2 + p1*p2 + Q1*Q2 + P1*P2)/2")?;
    let g2 = named("G2", "(p1*q2 - q1*p2 + P1*Q2 - Q1*P2)/2")?;
    let g3 = named("G3", "(p1^2 + q1^2 - p2^2 - q2^2 + P1^2 + Q1^2 - P2^2 - Q2^2)/4")?;
    let sum = f1.body.clone() + f2.body.clone() + h.body.clone();

    let delta_c = construct::pullback(&c.body, &add.map)?;
    let id = |name: &str, space: &Space, lhs: Expr, rhs: Expr| Identity {
        name: name.into(),
        space: space.name.clone(),
        lhs,
        rhs,
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    };
    def.identities.push(id("c∘psi = F", &tr2, construct::pullback(&c.body, &psi.map)?, f));
    def.identities.push(id("(Δc)∘psi^2 = F1 + F2 + H", &tr4, construct::pullback(&delta_c, &psi2.map)?, sum.clone()));
    let squares = g1.body.clone().powi(2) + g2.body.clone().powi(2) + g3.body.clone().powi(2);
    def.identities.push(id("G1² + G2² + G3² = F1 + F2 + H", &tr4, squares, sum));
    for (g, coord) in [(&g1, "x"), (&g2, "y"), (&g3, "z")] {
        let delta = ex(&format!("{coord}1 + {coord}2"))?;
        let name = format!("{} = (Δ{coord})∘psi^2", g.name);
        def.identities.push(id(&name, &tr4, construct::pullback(&delta, &psi2.map)?, g.body.clone()));
    }

    let family = |members: &[&NamedFunction]| {
        let fns: Vec<NamedFunction> = members.iter().map(|m| (*m).clone()).collect();
        FunctionFamily::seeded(tr4.structure.clone(), &fns)
    };
    def.families.push(Family {
        name: "F1,F2,H,G1".into(),
        space: tr4.name.clone(),
        family: family(&[&f1, &f2, &h, &g1])?,
        involutive: true,
        expected_rank: Some(4),
    });
    def.families.push(Family {
        name: "F1,F2,H,G1,G2,G3".into(),
        space: tr4.name.clone(),
        family: family(&[&f1, &f2, &h, &g1, &g2, &g3])?,
        involutive: false,
        expected_rank: Some(5),
    });
    def.hamiltonians.push(Hamiltonian {
        name: "H".into(),
        space: tr4.name.clone(),
        body: h.body.clone(),
        initial: point(&[
            ("q1", 0.3),
            ("q2", -0.5),
            ("p1", 0.7),
            ("p2", 0.2),
            ("Q1", -0.4),
            ("Q2", 0.6),
            ("P1", 0.1),
            ("P2", -0.8),
        ]),
        integrals: vec![f1, f2, g1, g2, g3],
        canonical_of: None,
    });
    def.spaces = vec![tr2, tr4, su2, su2_2];
    def.maps = vec![psi, psi2, add];
    Ok(def)
}

fn deformation_params(p: &ParameterSet) -> BTreeMap<String, f64> {
    params(&[("alpha", p.alpha), ("beta", p.beta), ("gamma", p.gamma), ("k", p.k)])
}

/// Brackets `{z,x} = β y`, `{y,z} = α x`, `{x,y} = γ sinh(kz)/k` with the
/// coefficients given as expressions.
fn sb2c_structure(
    alpha: &str,
    beta: &str,
    gamma: &str,
    parameters: BTreeMap<String, f64>,
) -> Result<PoissonStructure, CatalogError> {
    structure(
        &["x", "y", "z"],
        parameters,
        &[
            ("z", "x", &format!("{beta}*y")),
            ("y", "z", &format!("{alpha}*x")),
            ("x", "y", &format!("{gamma}*sinh(k*z)/k")),
        ],
    )
}

const DEFORMED_CASIMIR: &str = "alpha*x^2 + beta*y^2 + 4*gamma/k^2*sinh(k*z/2)^2";
const COPRODUCT: [&str; 3] = ["x1*exp(k*z2/2) + exp(-k*z1/2)*x2", "y1*exp(k*z2/2) + exp(-k*z1/2)*y2", "z1 + z2"];
const DEFORMED_H: &str = "(alpha*x1^2 + beta*y1^2 + 4*gamma/k^2*sinh(k*z1/2)^2)*exp(k*z2)/2 \
     + (alpha*x2^2 + beta*y2^2 + 4*gamma/k^2*sinh(k*z2/2)^2)*exp(-k*z1)/2 \
     + (alpha*x1*x2 + beta*y1*y2 + 4*gamma/k^2*sinh(k*z1/2)*sinh(k*z2/2))*exp(k*(z2 - z1)/2)";

struct Deformed {
    sb2c: Space,
    pair: Space,
    c: NamedFunction,
    mult: CatalogMap,
    h: Expr,
}

fn deformed_core(p: &ParameterSet) -> Result<Deformed, CatalogError> {
    let sb2c = space("sb2c", sb2c_structure("alpha", "beta", "gamma", deformation_params(p))?, &[]);
    let pair = power(&sb2c, 2)?;
    let c = named("c", DEFORMED_CASIMIR)?;
    let mult = map("mult", &pair, &sb2c, &COPRODUCT)?;
    let h = (0.5 * construct::pullback(&c.body, &mult.map)?).simplify();
    Ok(Deformed { sb2c, pair, c, mult, h })
}

fn deformed_initial() -> Point {
    point(&[("x1", 0.3), ("y1", -0.2), ("z1", 0.4), ("x2", -0.5), ("y2", 0.1), ("z2", -0.3)])
}

pub(crate) fn sb2c_deformed(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new("sb2c_deformed", p.clone());
    let Deformed { sb2c, pair, c, mult, h } = deformed_core(p)?;
    def.casimirs.push(Casimir { space: sb2c.name.clone(), function: c.clone() });
    def.identities.push(Identity {
        name: "½Δ(c) = explicit H".into(),
        space: pair.name.clone(),
        lhs: h.clone(),
        rhs: ex(DEFORMED_H)?,
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });
    let seed = FunctionFamily::seeded(sb2c.structure.clone(), &[c.clone(), named("f", "z")?])?;
    let pattern = ChainPattern::Multiplication { map: mult.map.clone(), casimirs: vec![c.clone()] };
    let family = build_chain(&seed, &pattern, 2, &VerifyOptions::default())?;
    def.families.push(Family {
        name: "F2".into(),
        space: pair.name.clone(),
        family,
        involutive: true,
        expected_rank: Some(4),
    });
    def.hamiltonians.push(Hamiltonian {
        name: "H".into(),
        space: pair.name.clone(),
        body: h,
        initial: deformed_initial(),
        integrals: vec![
            factor_copy(&c, &sb2c.structure, 1),
            factor_copy(&c, &sb2c.structure, 2),
            named("Δz", "z1 + z2")?,
        ],
        canonical_of: None,
    });
    def.spaces = vec![sb2c, pair];
    def.maps = vec![mult];
    Ok(def)
}

/// Largest `|p|` inside the realization domain `a² ≥ (4γ/k²) sinh²(kp/2)`.
fn realization_p_max(p: &ParameterSet) -> Option<f64> {
    (p.gamma > 0.0).then(|| 2.0 / p.k.abs() * (p.a * p.k.abs() / (2.0 * p.gamma.sqrt())).asinh())
}

const REALIZATION_W: &str = "a^2 - 4*gamma/k^2*sinh(k*p/2)^2";

pub(crate) fn sb2c_realization(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new("sb2c_realization", p.clone());
    let Deformed { sb2c, pair, c, mult, h } = deformed_core(p)?;
    let limit = realization_p_max(p).map_or(2.0, |m| 0.95 * m.min(2.0));
    let mut canonical_params = deformation_params(p);
    canonical_params.extend(params(&[("a", p.a), ("delta", p.delta)]));
    let trr = space("T*R", structure(&["q", "p"], canonical_params, &[("p", "q", "1")])?, &[("p", (-limit, limit))]);
    let trr2 = power(&trr, 2)?;
    let w = REALIZATION_W;
    let realization = map(
        "realization",
        &trr,
        &sb2c,
        &[&format!("sqrt({w})*sin(delta*q)/delta"), &format!("sqrt({w})*cos(delta*q)"), "p"],
    )?;
    let realization2 = power_map(&realization, 2, &trr2, &pair, None)?;
    def.casimirs.push(Casimir { space: sb2c.name.clone(), function: c.clone() });
    def.identities.push(Identity {
        name: "c∘realization = a²".into(),
        space: trr.name.clone(),
        lhs: construct::pullback(&c.body, &realization.map)?,
        rhs: ex("a^2")?,
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });

    let w1 = w.replace('p', "p1");
    let w2 = w.replace('p', "p2");
    let h_canonical = ex(&format!(
        "exp(k*(p2 - p1)/2)*(sqrt(({w1})*({w2}))*cos(delta*(q1 - q2)) + a^2*cosh(k*(p1 + p2)/2) \
         + 4*gamma/k^2*sinh(k*p1/2)*sinh(k*p2/2))"
    ))?;
    let scale = realization_p_max(p).map_or(1.0, |m| m.min(1.0));
    def.hamiltonians.push(Hamiltonian {
        name: "H".into(),
        space: pair.name.clone(),
        body: h,
        initial: deformed_initial(),
        integrals: vec![named("Δz", "z1 + z2")?],
        canonical_of: None,
    });
    def.hamiltonians.push(Hamiltonian {
        name: "H_canonical".into(),
        space: trr2.name.clone(),
        body: h_canonical,
        initial: canonical_initial(2, scale),
        integrals: vec![named("Δz", "p1 + p2")?],
        canonical_of: Some("H".into()),
    });
    let special = p.a == 0.0 && p.gamma == -1.0 && p.delta == 1.0;
    if special {
        def.hamiltonians.push(Hamiltonian {
            name: "H1_canonical".into(),
            space: trr2.name.clone(),
            body: ex("4*exp(k*(p2 - p1)/2)/k^2*sinh(k*p1/2)*sinh(k*p2/2)*(cos(q1 - q2) - 1)")?,
            initial: canonical_initial(2, 1.0),
            integrals: vec![named("Δz", "p1 + p2")?],
            canonical_of: Some("H".into()),
        });
    }
    def.spaces = vec![sb2c, pair, trr, trr2];
    def.maps = vec![mult, realization, realization2];
    let hc = def.hamiltonian("H_canonical")?.clone();
    let id = canonical_identity(&def, &hc, "realization^2", tolerance::IDENTITY, &[])?;
    def.identities.push(id);
    if special {
        // The square root in the general form is |sinh(kp₁/2) sinh(kp₂/2)|.
        let h1 = def.hamiltonian("H1_canonical")?.clone();
        let positive = [("p1", (0.05, 2.0)), ("p2", (0.05, 2.0))];
        let id = canonical_identity(&def, &h1, "realization^2", tolerance::IDENTITY, &positive)?;
        def.identities.push(id);
    }
    Ok(def)
}

pub(crate) fn triangular(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new("triangular", p.clone());
    let tri_params = params(&[("alpha", p.alpha), ("beta", p.beta), ("gamma", p.gamma)]);
    let tri = space(
        "tri",
        structure(
            &["a", "b", "x", "y"],
            tri_params,
            &[
                ("x", "a", "beta*y*a"),
                ("x", "b", "-beta*y*b"),
                ("x", "y", "gamma*(b^2 - a^2)"),
                ("y", "a", "-alpha*x*a"),
                ("y", "b", "alpha*x*b"),
            ],
        )?,
        &[],
    );
    let pair = power(&tri, 2)?;
    let sb2c = space("sb2c", sb2c_structure("(2*alpha/k)", "(2*beta/k)", "(2*gamma*k)", deformation_params(p))?, &[]);

    let c1 = named("c1", "a*b")?;
    let c2 = named("c2", "alpha*x^2 + beta*y^2 + gamma*(a^2 + b^2)")?;
    let c_restricted = named("c", "2*alpha/k*x^2 + 2*beta/k*y^2 + 8*gamma/k*sinh(k*z/2)^2")?;
    for f in [&c1, &c2] {
        def.casimirs.push(Casimir { space: tri.name.clone(), function: f.clone() });
    }
    def.casimirs.push(Casimir { space: sb2c.name.clone(), function: c_restricted.clone() });

    let mult = map("mult", &pair, &tri, &["a1*a2", "b1*b2", "a1*x2 + x1*b2", "a1*y2 + y1*b2"])?;
    let restriction = map("restriction", &sb2c, &tri, &["exp(-k*z/2)", "exp(k*z/2)", "x", "y"])?;

    let h = ex("a1^2*(alpha*x2^2 + beta*y2^2 + gamma*(a2^2 + b2^2))/2 \
                + b2^2*(alpha*x1^2 + beta*y1^2 + gamma*(a1^2 + b1^2))/2 \
                + a1*b2*(alpha*x1*x2 + beta*y1*y2 - gamma*a1*b2)")?;
    def.identities.push(Identity {
        name: "H = ½Δ(c2)".into(),
        space: pair.name.clone(),
        lhs: h.clone(),
        rhs: (0.5 * construct::pullback(&c2.body, &mult.map)?).simplify(),
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });
    def.identities.push(Identity {
        name: "c2∘restriction = (k/2)c + 2γ".into(),
        space: sb2c.name.clone(),
        lhs: construct::pullback(&c2.body, &restriction.map)?,
        rhs: (ex("k/2")? * c_restricted.body.clone() + ex("2*gamma")?).simplify(),
        tolerance: tolerance::IDENTITY,
        ranges: BTreeMap::new(),
    });

    let seed = FunctionFamily::seeded(tri.structure.clone(), std::slice::from_ref(&c2))?;
    let pattern = ChainPattern::Multiplication { map: mult.map.clone(), casimirs: vec![c1.clone(), c2.clone()] };
    let family = build_chain(&seed, &pattern, 2, &VerifyOptions::default())?;
    def.families.push(Family {
        name: "F2".into(),
        space: pair.name.clone(),
        family,
        involutive: true,
        expected_rank: Some(5),
    });
    def.hamiltonians.push(Hamiltonian {
        name: "H".into(),
        space: pair.name.clone(),
        body: h,
        initial: point(&[
            ("a1", 1.2),
            ("b1", 0.8),
            ("x1", 0.3),
            ("y1", -0.4),
            ("a2", 0.9),
            ("b2", 1.1),
            ("x2", -0.2),
            ("y2", 0.5),
        ]),
        integrals: vec![
            factor_copy(&c1, &tri.structure, 1),
            factor_copy(&c2, &tri.structure, 1),
            factor_copy(&c1, &tri.structure, 2),
            factor_copy(&c2, &tri.structure, 2),
            named("Δc1", "a1*a2*b1*b2")?,
        ],
        canonical_of: None,
    });
    def.spaces = vec![tri, pair, sb2c];
    def.maps = vec![mult, restriction];
    Ok(def)
}

pub(crate) fn sb2c_limit(p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    let mut def = SystemDefinition::new("sb2c_limit", p.clone());
    let linear = structure(
        &["x", "y", "z"],
        params(&[("alpha", p.alpha), ("beta", p.beta), ("gamma", p.gamma)]),
        &[("z", "x", "beta*y"), ("y", "z", "alpha*x"), ("x", "y", "gamma*z")],
    )?;
    let sb2c = space("sb2c0", linear, &[]);
    let pair = power(&sb2c, 2)?;
    let c0 = named("c0", "alpha*x^2 + beta*y^2 + gamma*z^2")?;
    def.casimirs.push(Casimir { space: sb2c.name.clone(), function: c0.clone() });
    let add = map("add", &pair, &sb2c, &["x1 + x2", "y1 + y2", "z1 + z2"])?;
    def.hamiltonians.push(Hamiltonian {
        name: "H0".into(),
        space: pair.name.clone(),
        body: ex("alpha*x1^2 + beta*y1^2 + gamma*z1^2 + alpha*x2^2 + beta*y2^2 + gamma*z2^2 \
                  + (alpha*x1*x2 + beta*y1*y2 + gamma*z1*z2)")?,
        initial: deformed_initial(),
        integrals: vec![
            factor_copy(&c0, &sb2c.structure, 1),
            factor_copy(&c0, &sb2c.structure, 2),
            named("Δz", "z1 + z2")?,
        ],
        canonical_of: None,
    });
    def.spaces = vec![sb2c, pair];
    def.maps = vec![add];
    Ok(def)
}

/// `max |c_k − c₀|` over a grid with `|x|, |y|, |z| ≤ 2`, where `c_k` is the
/// deformed Casimir at deformation `k` and `c₀` its limit.
pub fn casimir_limit_gap(p: &ParameterSet, k: f64) -> Result<f64, CatalogError> {
    let slots: Vec<String> = ["x", "y", "z", "alpha", "beta", "gamma", "k"].iter().map(|s| s.to_string()).collect();
    let ck = Compiled::new(&ex(DEFORMED_CASIMIR)?, &slots)?;
    let c0 = Compiled::new(&ex("alpha*x^2 + beta*y^2 + gamma*z^2")?, &slots)?;
    let mut gap: f64 = 0.0;
    for i in 0..=8 {
        for j in 0..=8 {
            for l in 0..=400 {
                let (x, y, z) = (-2.0 + 0.5 * i as f64, -2.0 + 0.5 * j as f64, -2.0 + 0.01 * l as f64);
                let v = [x, y, z, p.alpha, p.beta, p.gamma, k];
                gap = gap.max((ck.eval(&v)? - c0.eval(&v)?).abs());
            }
        }
    }
    Ok(gap)
}

/// Coefficients of the deformed brackets induced on `a = e^{−kz/2}`,
/// `b = e^{kz/2}` by the triangular brackets, fitted by least squares.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RestrictionFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Largest pointwise deviation of an induced bracket from its fit.
    pub residual: f64,
    pub points: usize,
}

pub fn restriction_fit(p: &ParameterSet, spec: &SampleSpec) -> Result<RestrictionFit, CatalogError> {
    let def = triangular(p)?;
    let tri = def.structure("tri")?.clone().with_parameters(&params(&[("k", p.k)]))?;
    let z_of = ex("2/k*log(b)")?;
    let (x, y) = (Expr::var("x"), Expr::var("y"));
    let induced = [
        (poisson::bracket(&z_of, &x, &tri)?, ex("y")?),
        (poisson::bracket(&y, &z_of, &tri)?, ex("x")?),
        (poisson::bracket(&x, &y, &tri)?, ex("sinh(k*z)/k")?),
    ];
    let sb2c = def.structure("sb2c")?;
    let points = sb2c.sample(spec, &[])?;
    let embed =
        PoissonMap::deferred("restriction", sb2c.clone(), tri.clone(), def.map("restriction")?.components().to_vec())?;
    let sb_scope = sb2c.scope();
    let mut coefficients = [0.0; 3];
    let mut fitted = Vec::new();
    for (idx, (bracket, basis)) in induced.iter().enumerate() {
        let on_image = construct::pullback(bracket, &embed)?;
        let v = sb_scope.compile(&on_image)?;
        let s = sb_scope.compile(basis)?;
        let mut pairs = Vec::with_capacity(points.len());
        for pt in &points {
            let vals = sb_scope.values(pt).unwrap_or_default();
            pairs.push((v.eval(&vals)?, s.eval(&vals)?));
        }
        let num: f64 = pairs.iter().map(|(v, s)| v * s).sum();
        let den: f64 = pairs.iter().map(|(_, s)| s * s).sum();
        coefficients[idx] = if den > 0.0 { num / den } else { 0.0 };
        fitted.push(pairs);
    }
    let residual = fitted
        .iter()
        .zip(coefficients)
        .flat_map(|(pairs, c)| pairs.iter().map(move |(v, s)| (v - c * s).abs()))
        .fold(0.0, f64::max);
    Ok(RestrictionFit {
        beta: coefficients[0],
        alpha: coefficients[1],
        gamma: coefficients[2],
        residual,
        points: points.len(),
    })
}
