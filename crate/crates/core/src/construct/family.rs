use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{pullback, ConstructError, PoissonMap, VerifyOptions};
use crate::expr::{Expr, Point};
use crate::poisson::{self, bracket_unchecked, NamedFunction, PoissonStructure};
use crate::report::VerificationReport;

/// Where a family member came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    PulledBack { map: String },
    CasimirFactor { factor: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub name: String,
    #[serde(rename = "expr", with = "crate::expr::serde_printed")]
    pub body: Expr,
    pub provenance: Provenance,
}

/// Named functions over one Poisson structure, expected to Poisson-commute.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    structure: PoissonStructure,
    members: Vec<FamilyMember>,
    path: Vec<String>,
}

#[derive(Serialize)]
struct FamilyJson<'a> {
    chart: &'a [String],
    path: &'a [String],
    members: &'a [FamilyMember],
}

impl FunctionFamily {
    pub fn new(structure: PoissonStructure) -> Self {
        FunctionFamily { structure, members: Vec::new(), path: Vec::new() }
    }

    /// Seed family from named functions on `structure`.
    pub fn seeded(structure: PoissonStructure, functions: &[NamedFunction]) -> Result<Self, ConstructError> {
        let mut family = FunctionFamily::new(structure);
        for f in functions {
            family.structure.check_free_vars(&f.body, &format!("family member `{}`", f.name))?;
            family.push(f.name.clone(), f.body.clone(), Provenance::Seed);
        }
        Ok(family)
    }

    /// Family with the given members and path, checked against `structure`.
    pub fn from_members(
        structure: PoissonStructure,
        members: Vec<FamilyMember>,
        path: Vec<String>,
    ) -> Result<Self, ConstructError> {
        for m in &members {
            structure.check_free_vars(&m.body, &format!("family member `{}`", m.name))?;
        }
        Ok(FunctionFamily { structure, members, path })
    }

    /// Adds a member unless one with the same printed form exists. Returns
    /// whether it was added.
    pub fn push(&mut self, name: impl Into<String>, body: Expr, provenance: Provenance) -> bool {
        let body = body.simplify();
        let printed = body.to_string();
        if self.members.iter().any(|m| m.body.to_string() == printed) {
            return false;
        }
        self.members.push(FamilyMember { name: name.into(), body, provenance });
        true
    }

    pub fn structure(&self) -> &PoissonStructure {
        &self.structure
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn member(&self, name: &str) -> Option<&FamilyMember> {
        self.members.iter().find(|m| m.name == name)
    }

    pub fn functions(&self) -> Vec<Expr> {
        self.members.iter().map(|m| m.body.clone()).collect()
    }

    pub fn named_functions(&self) -> Vec<NamedFunction> {
        self.members.iter().map(|m| NamedFunction::new(m.name.clone(), m.body.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Names of the maps this family was pulled back through, first to last.
    pub fn path(&self) -> &[String] {
        &self.path
    }

    /// Keeps only the named members, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FunctionFamily, ConstructError> {
        let mut out =
            FunctionFamily { structure: self.structure.clone(), members: Vec::new(), path: self.path.clone() };
        for name in names {
            let m = self.member(name).ok_or_else(|| ConstructError::Invalid(format!("no family member `{name}`")))?;
            out.members.push(m.clone());
        }
        Ok(out)
    }

    /// Labelled pairwise brackets `{f_i, f_j}`, `i < j`.
    pub fn involution_residuals(&self) -> Vec<(String, Expr)> {
        let mut out = Vec::new();
        for (i, a) in self.members.iter().enumerate() {
            for b in &self.members[i + 1..] {
                out.push((format!("{{{},{}}}", a.name, b.name), bracket_unchecked(&a.body, &b.body, &self.structure)));
            }
        }
        out
    }

    /// Involution check at points sampled with `options.spec`.
    pub fn involution_report(&self, options: &VerifyOptions) -> Result<VerificationReport, ConstructError> {
        let checks = self.involution_residuals();
        let guards: Vec<Expr> = checks.iter().map(|(_, e)| e.clone()).collect();
        let points = self.structure.sample(&options.spec, &guards)?;
        Ok(VerificationReport::evaluate(&checks, &self.structure.scope(), &points)
            .map_err(poisson::PoissonError::from)?)
    }

    pub fn to_json(&self) -> String {
        let doc = FamilyJson { chart: self.structure.chart().names(), path: &self.path, members: &self.members };
        serde_json::to_string_pretty(&doc).unwrap_or_default()
    }
}

/// Maximum of `|{f_i, f_j}|` over member pairs and `points`, evaluated with
/// the brackets of `structure`.
pub fn check_involution(
    f: &FunctionFamily,
    structure: &PoissonStructure,
    points: &[Point],
) -> Result<VerificationReport, ConstructError> {
    let mut scoped = f.clone();
    scoped.structure = structure.clone().with_parameters(f.structure.parameters())?;
    for m in &scoped.members {
        scoped.structure.check_free_vars(&m.body, &format!("family member `{}`", m.name))?;
    }
    let checks = scoped.involution_residuals();
    let mut report = VerificationReport::evaluate(&checks, &scoped.structure.scope(), points)
        .map_err(poisson::PoissonError::from)?;
    if checks.is_empty() {
        report.points_checked = points.len();
    }
    Ok(report)
}

/// One recursion step: pull `f` back through `m` and adjoin the given
/// Casimir functions of `m.source`, each tagged with its factor index.
pub fn extend_family(
    f: &FunctionFamily,
    m: &PoissonMap,
    casimirs: &[(usize, NamedFunction)],
    options: &VerifyOptions,
) -> Result<FunctionFamily, ConstructError> {
    if f.structure.chart() != m.target().chart() {
        return Err(ConstructError::ChartMismatch {
            expected: m.target().chart().names().to_vec(),
            found: f.structure.chart().names().to_vec(),
        });
    }
    let structure =
        m.source().clone().with_parameters(m.target().parameters())?.with_parameters(f.structure.parameters())?;

    for (_, c) in casimirs {
        structure.check_free_vars(&c.body, &format!("Casimir `{}`", c.name))?;
        let checks = poisson::casimir_residuals(&c.body, &structure)?;
        let guards: Vec<Expr> = checks.iter().map(|(_, e)| e.clone()).collect();
        let points = structure.sample(&options.spec, &guards)?;
        let report =
            VerificationReport::evaluate(&checks, &structure.scope(), &points).map_err(poisson::PoissonError::from)?;
        if !report.passes(options.tolerance) {
            return Err(ConstructError::NotCasimir { name: c.name.clone(), residual: report.max_residual });
        }
    }

    let mut out = FunctionFamily::new(structure);
    out.path = f.path.clone();
    out.path.push(m.name().to_string());
    for member in &f.members {
        let body = pullback(&member.body, m)?;
        out.push(format!("{}∘{}", member.name, m.name()), body, Provenance::PulledBack { map: m.name().to_string() });
    }
    for (factor, c) in casimirs {
        out.push(c.name.clone(), c.body.clone(), Provenance::CasimirFactor { factor: *factor });
    }

    if out.len() > 1 {
        let report = out.involution_report(options)?;
        if !report.passes(options.tolerance) {
            return Err(ConstructError::NotInInvolution {
                residual: report.max_residual,
                pair: report.worst_label.unwrap_or_default(),
            });
        }
    }
    Ok(out)
}

/// Shape of a Poisson-map chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainPattern {
    /// `Φ: M×M → M`; the chain is `M ← M×M ← (M×M)×M ← …`.
    Multiplication { map: PoissonMap, casimirs: Vec<NamedFunction> },
    /// `Φ: M×N → N`; the chain is `N ← M×N ← M×(M×N) ← …`.
    Action {
        map: PoissonMap,
        acting: PoissonStructure,
        acting_casimirs: Vec<NamedFunction>,
        space_casimirs: Vec<NamedFunction>,
    },
}

impl ChainPattern {
    fn map(&self) -> &PoissonMap {
        match self {
            ChainPattern::Multiplication { map, .. } | ChainPattern::Action { map, .. } => map,
        }
    }

    fn base(&self) -> &PoissonStructure {
        self.map().target()
    }

    fn check(&self) -> Result<(), ConstructError> {
        let (expected, what) = match self {
            ChainPattern::Multiplication { map, .. } => (2 * map.target().dim(), "M×M"),
            ChainPattern::Action { map, acting, .. } => (acting.dim() + map.target().dim(), "M×N"),
        };
        if self.map().source().dim() != expected {
            return Err(ConstructError::Invalid(format!(
                "chain map `{}` has a {}-dimensional source, expected {what} of dimension {expected}",
                self.map().name(),
                self.map().source().dim()
            )));
        }
        Ok(())
    }

    /// Factors of the `count`-fold space, left to right.
    fn factors(&self, count: usize) -> Vec<&PoissonStructure> {
        match self {
            ChainPattern::Multiplication { map, .. } => vec![map.target(); count],
            ChainPattern::Action { map, acting, .. } => {
                let mut v = vec![acting; count - 1];
                v.push(map.target());
                v
            }
        }
    }

    fn casimirs_of_factor(&self, factor: usize, count: usize) -> &[NamedFunction] {
        match self {
            ChainPattern::Multiplication { casimirs, .. } => casimirs,
            ChainPattern::Action { acting_casimirs, space_casimirs, .. } => {
                if factor == count {
                    space_casimirs
                } else {
                    acting_casimirs
                }
            }
        }
    }

    /// The map from the `(t+1)`-fold to the `t`-fold space.
    fn stage_map(&self, t: usize) -> Result<PoissonMap, ConstructError> {
        let phi = self.map();
        let source = poisson::product_all(&self.factors(t + 1))?;
        let target = if t == 1 { self.base().clone() } else { poisson::product_all(&self.factors(t))? };
        let s_names = source.chart().names();
        let positional = |offset: usize| -> BTreeMap<String, String> {
            phi.source()
                .chart()
                .names()
                .iter()
                .enumerate()
                .map(|(k, n)| (n.clone(), s_names[offset + k].clone()))
                .collect()
        };
        let var = |i: usize| Expr::var(s_names[i].clone());
        let mut components = Vec::with_capacity(target.dim());
        match self {
            ChainPattern::Multiplication { .. } => {
                let d = self.base().dim();
                let renaming = positional(0);
                components.extend(phi.components().iter().map(|c| c.rename(&renaming)));
                components.extend((2 * d..(t + 1) * d).map(var));
            }
            ChainPattern::Action { acting, .. } => {
                let d = acting.dim();
                components.extend((0..(t - 1) * d).map(var));
                let renaming = positional((t - 1) * d);
                components.extend(phi.components().iter().map(|c| c.rename(&renaming)));
            }
        }
        let name = match self {
            ChainPattern::Multiplication { .. } => format!("{}{}", phi.name(), "×id".repeat(t - 1)),
            ChainPattern::Action { .. } => format!("{}{}", "id×".repeat(t - 1), phi.name()),
        };
        PoissonMap::deferred(name, source, target, components)
    }

    fn stage_casimirs(&self, count: usize) -> Vec<(usize, NamedFunction)> {
        let factors = self.factors(count);
        let mut out = Vec::new();
        for (idx, factor) in factors.iter().enumerate() {
            let renaming = factor.chart().factor_renaming(idx + 1);
            for c in self.casimirs_of_factor(idx + 1, count) {
                out.push((idx + 1, NamedFunction::new(format!("{}[{}]", c.name, idx + 1), c.body.rename(&renaming))));
            }
        }
        out
    }
}

/// Repeated [`extend_family`] along the chain until the family lives on the
/// `depth`-fold space. Depth 1 returns the seed. Each stage map is verified
/// before use and failures name the stage.
pub fn build_chain(
    seed: &FunctionFamily,
    pattern: &ChainPattern,
    depth: usize,
    options: &VerifyOptions,
) -> Result<FunctionFamily, ConstructError> {
    if depth == 0 {
        return Err(ConstructError::Invalid("chain depth must be at least 1".into()));
    }
    pattern.check()?;
    let mut family = seed.clone();
    for t in 1..depth {
        let wrap = |map: &str, e: ConstructError| ConstructError::ChainStage {
            stage: t + 1,
            map: map.to_string(),
            source: Box::new(e),
        };
        let stage = pattern.stage_map(t).map_err(|e| wrap(pattern.map().name(), e))?;
        let name = stage.name().to_string();
        let stage = stage.verified(options).map_err(|e| wrap(&name, e))?;
        let casimirs = pattern.stage_casimirs(t + 1);
        family = extend_family(&family, &stage, &casimirs, options).map_err(|e| wrap(&name, e))?;
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse};
    use crate::poisson::{product, product_all, Chart};
    use crate::sample::SampleSpec;
    use crate::tolerance;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn su2() -> PoissonStructure {
        PoissonStructure::new(Chart::new(["x", "y", "z"]).unwrap(), BTreeMap::new())
            .unwrap()
            .with("x", "y", e("z"))
            .unwrap()
            .with("y", "z", e("x"))
            .unwrap()
            .with("z", "x", e("y"))
            .unwrap()
    }

    fn addition() -> PoissonMap {
        let m = su2();
        PoissonMap::new("add", product(&m, &m).unwrap(), m, vec![e("x1+x2"), e("y1+y2"), e("z1+z2")]).unwrap()
    }

    fn pattern() -> ChainPattern {
        ChainPattern::Multiplication { map: addition(), casimirs: vec![NamedFunction::new("c", e("x^2+y^2+z^2"))] }
    }

    fn seed() -> FunctionFamily {
        FunctionFamily::seeded(su2(), &[NamedFunction::new("c", e("x^2+y^2+z^2")), NamedFunction::new("f", e("z"))])
            .unwrap()
    }

    #[test]
    fn depth_one_is_the_seed() {
        assert_eq!(build_chain(&seed(), &pattern(), 1, &VerifyOptions::default()).unwrap(), seed());
    }

    #[test]
    fn depth_two_is_the_four_function_family() {
        let f2 = build_chain(&seed(), &pattern(), 2, &VerifyOptions::default()).unwrap();
        let printed: Vec<String> = f2.members().iter().map(|m| m.body.to_string()).collect();
        assert_eq!(
            printed,
            ["(x1 + x2)^2 + (y1 + y2)^2 + (z1 + z2)^2", "z1 + z2", "x1^2 + y1^2 + z1^2", "x2^2 + y2^2 + z2^2",]
        );
        assert_eq!(f2.members()[2].provenance, Provenance::CasimirFactor { factor: 1 });
        assert_eq!(f2.path(), ["add"]);
        let names: std::collections::BTreeSet<&str> = f2.members().iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names.len(), 4);
    }

    #[test]
    fn empty_seed_gives_casimirs_only() {
        let f2 = build_chain(&FunctionFamily::new(su2()), &pattern(), 2, &VerifyOptions::default()).unwrap();
        assert_eq!(f2.len(), 2);
        assert!(f2.members().iter().all(|m| matches!(m.provenance, Provenance::CasimirFactor { .. })));
    }

    #[test]
    fn depth_three_contains_the_spin_chain_hamiltonian() {
        let f3 = build_chain(&seed(), &pattern(), 3, &VerifyOptions::default()).unwrap();
        assert_eq!(f3.path(), ["add", "add×id"]);
        let report = f3.involution_report(&VerifyOptions::default()).unwrap();
        assert!(report.passes(tolerance::RESIDUAL), "{report:?}");

        let pulled = &f3.member("c∘add∘add×id").unwrap().body;
        let casimirs: Vec<Expr> = (1..=3).map(|i| e(&format!("x{i}^2 + y{i}^2 + z{i}^2"))).collect();
        for c in &casimirs {
            assert!(f3.members().iter().any(|m| m.body == *c), "{c} missing");
        }
        assert_eq!(f3.len(), 6);
        let h3 = e("x1*x2 + y1*y2 + z1*z2 + x1*x3 + y1*y3 + z1*z3 + x2*x3 + y2*y3 + z2*z3");
        for p in f3.structure().sample(&SampleSpec::default(), &[]).unwrap() {
            let lhs =
                0.5 * (evaluate(pulled, &p).unwrap() - casimirs.iter().map(|c| evaluate(c, &p).unwrap()).sum::<f64>());
            assert!((lhs - evaluate(&h3, &p).unwrap()).abs() < tolerance::IDENTITY);
        }
    }

    #[test]
    fn action_chain_with_the_coadjoint_action() {
        let m = su2();
        let pattern = ChainPattern::Action {
            map: addition(),
            acting: m.clone(),
            acting_casimirs: vec![NamedFunction::new("c", e("x^2+y^2+z^2"))],
            space_casimirs: vec![NamedFunction::new("c", e("x^2+y^2+z^2"))],
        };
        let f3 = build_chain(&seed(), &pattern, 3, &VerifyOptions::default()).unwrap();
        assert_eq!(f3.path(), ["add", "id×add"]);
        assert_eq!(f3.structure().chart(), product_all(&[&m, &m, &m]).unwrap().chart());
        let pulled = &f3.member("f∘add∘id×add").unwrap().body;
        assert_eq!(pulled.to_string(), "z1 + z2 + z3");
    }

    #[test]
    fn non_casimir_is_refused_by_name() {
        let bogus = vec![(1, NamedFunction::new("bad", e("x1")))];
        let err = extend_family(&seed(), &addition(), &bogus, &VerifyOptions::default()).unwrap_err();
        assert!(matches!(err, ConstructError::NotCasimir { ref name, .. } if name == "bad"));
    }

    #[test]
    fn broken_chain_map_names_the_stage() {
        let m = su2();
        let bad =
            PoissonMap::deferred("twice", product(&m, &m).unwrap(), m, vec![e("x1+x2"), e("y1+y2"), e("2*(z1+z2)")])
                .unwrap();
        let pattern = ChainPattern::Multiplication { map: bad, casimirs: vec![] };
        let err = build_chain(&seed(), &pattern, 2, &VerifyOptions::default()).unwrap_err();
        assert!(matches!(err, ConstructError::ChainStage { stage: 2, ref map, .. } if map == "twice"), "{err}");
    }

    #[test]
    fn single_member_family_has_zero_residual() {
        let f = FunctionFamily::seeded(su2(), &[NamedFunction::new("f", e("x*y"))]).unwrap();
        let points = su2().sample(&SampleSpec::default(), &[]).unwrap();
        let r = check_involution(&f, &su2(), &points).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.points_checked, points.len());
    }

    #[test]
    fn members_are_deduplicated_by_printed_form() {
        let mut f = FunctionFamily::new(su2());
        assert!(f.push("a", e("x + y"), Provenance::Seed));
        assert!(!f.push("b", e("y + x"), Provenance::Seed));
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn family_json_lists_provenance() {
        let f2 = build_chain(&seed(), &pattern(), 2, &VerifyOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&f2.to_json()).unwrap();
        assert_eq!(v["members"][1]["provenance"]["kind"], "pulled_back");
        assert_eq!(v["members"][3]["provenance"]["factor"], 2);
        assert_eq!(v["members"][0]["expr"], "(x1 + x2)^2 + (y1 + y2)^2 + (z1 + z2)^2");
    }
}
