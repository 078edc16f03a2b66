//! Poisson maps, pullbacks and the involutive-family recursion.

mod family;
mod rank;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{Expr, Point};
use crate::poisson::{self, bracket_unchecked, merge_parameters, PoissonError, PoissonStructure};
use crate::report::VerificationReport;
use crate::sample::{SampleSpec, Scope};
use crate::tolerance;

pub use family::{
    build_chain, check_involution, extend_family, ChainPattern, FamilyMember, FunctionFamily, Provenance,
};
pub use rank::{independence_rank, numeric_rank};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error("map `{map}` has {found} components but its target has dimension {expected}")]
    ComponentCount { map: String, expected: usize, found: usize },
    #[error("`{0}` is not a target coordinate")]
    UnknownTarget(String),
    #[error("map `{map}` is not Poisson: residual {residual:e} at {label}")]
    NotPoisson { map: String, residual: f64, label: String },
    #[error("`{name}` is not a Casimir of the source structure (residual {residual:e})")]
    NotCasimir { name: String, residual: f64 },
    #[error("family is not in involution: residual {residual:e} for pair {pair}")]
    NotInInvolution { residual: f64, pair: String },
    #[error("family lives on chart {found:?}, expected {expected:?}")]
    ChartMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("chain stage {stage} ({map}) failed: {source}")]
    ChainStage { stage: usize, map: String, source: Box<ConstructError> },
    #[error("{0}")]
    Invalid(String),
}

/// Sample points and pass threshold used by the automatic checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub spec: SampleSpec,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { spec: SampleSpec::default(), tolerance: tolerance::RESIDUAL }
    }
}

/// A smooth map between two Poisson charts, given by one component per
/// target coordinate written in source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonMap {
    name: String,
    source: PoissonStructure,
    target: PoissonStructure,
    components: Vec<Expr>,
    parameters: BTreeMap<String, f64>,
}

impl PoissonMap {
    /// Build a map and verify the Poisson property at default sample points.
    pub fn new(
        name: impl Into<String>,
        source: PoissonStructure,
        target: PoissonStructure,
        components: Vec<Expr>,
    ) -> Result<Self, ConstructError> {
        PoissonMap::deferred(name, source, target, components)?.verified(&VerifyOptions::default())
    }

    /// Build a map without verifying it.
    pub fn deferred(
        name: impl Into<String>,
        source: PoissonStructure,
        target: PoissonStructure,
        components: Vec<Expr>,
    ) -> Result<Self, ConstructError> {
        let name = name.into();
        if components.len() != target.dim() {
            return Err(ConstructError::ComponentCount { map: name, expected: target.dim(), found: components.len() });
        }
        let parameters = merge_parameters(source.parameters(), target.parameters())?;
        let scope = PoissonStructure::new(source.chart().clone(), parameters.clone())?;
        for (coord, c) in target.chart().names().iter().zip(&components) {
            scope.check_free_vars(c, &format!("component `{coord}` of map `{name}`"))?;
        }
        Ok(PoissonMap { name, source, target, components, parameters })
    }

    /// Components given as `(target coordinate, expression)` pairs in any order.
    pub fn from_assignments(
        name: impl Into<String>,
        source: PoissonStructure,
        target: PoissonStructure,
        assignments: &[(&str, Expr)],
    ) -> Result<Self, ConstructError> {
        let components = component_vector(&target, assignments)?;
        PoissonMap::new(name, source, target, components)
    }

    pub fn identity(structure: &PoissonStructure) -> Self {
        let components = structure.chart().names().iter().map(|n| Expr::var(n.clone())).collect();
        PoissonMap {
            name: "id".into(),
            source: structure.clone(),
            target: structure.clone(),
            components,
            parameters: structure.parameters().clone(),
        }
    }

    /// Fails with [`ConstructError::NotPoisson`] unless the residual is below
    /// the tolerance.
    pub fn verified(self, options: &VerifyOptions) -> Result<Self, ConstructError> {
        let report = verify_sampled(&self, &options.spec)?;
        if report.passes(options.tolerance) {
            Ok(self)
        } else {
            Err(ConstructError::NotPoisson {
                map: self.name.clone(),
                residual: report.max_residual,
                label: report.worst_label.unwrap_or_default(),
            })
        }
    }

    /// Same map with source coordinates renamed.
    pub fn with_source_renamed(self, renaming: &BTreeMap<String, String>) -> Result<Self, ConstructError> {
        let source = self.source.renamed(renaming)?;
        let components = self.components.iter().map(|c| c.rename(renaming)).collect();
        PoissonMap::deferred(self.name, source, self.target, components)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn source(&self) -> &PoissonStructure {
        &self.source
    }

    pub fn target(&self) -> &PoissonStructure {
        &self.target
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, target_coord: &str) -> Option<&Expr> {
        self.target.chart().index(target_coord).map(|i| &self.components[i])
    }

    /// Source coordinates plus the parameters of both ends.
    pub fn scope(&self) -> Scope {
        Scope::new(self.source.chart().names().to_vec(), self.parameters.clone())
    }

    fn substitution(&self) -> BTreeMap<String, Expr> {
        self.target.chart().names().iter().cloned().zip(self.components.iter().cloned()).collect()
    }

    /// Residual expressions `{φ_i, φ_j}_source − Λ_target^{ij} ∘ φ` for all
    /// target pairs `i < j`.
    pub fn poisson_residuals(&self) -> Vec<(String, Expr)> {
        let names = self.target.chart().names();
        let subst = self.substitution();
        let mut out = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let lhs = bracket_unchecked(&self.components[i], &self.components[j], &self.source);
                let rhs = self.target.entry(i, j).substitute(&subst);
                out.push((format!("{},{}", names[i], names[j]), (lhs - rhs).simplify()));
            }
        }
        out
    }
}

fn component_vector(target: &PoissonStructure, assignments: &[(&str, Expr)]) -> Result<Vec<Expr>, ConstructError> {
    let mut slots: Vec<Option<Expr>> = vec![None; target.dim()];
    for (coord, e) in assignments {
        let i = target.chart().index(coord).ok_or_else(|| ConstructError::UnknownTarget(coord.to_string()))?;
        slots[i] = Some(e.clone());
    }
    slots
        .into_iter()
        .zip(target.chart().names())
        .map(|(s, n)| s.ok_or_else(|| ConstructError::Invalid(format!("no component given for `{n}`"))))
        .collect()
}

/// `f ∘ m`: substitute the map components for the target coordinates.
pub fn pullback(f: &Expr, m: &PoissonMap) -> Result<Expr, ConstructError> {
    m.target.check_free_vars(f, &format!("function pulled back through `{}`", m.name))?;
    Ok(f.substitute(&m.substitution()).simplify())
}

/// Poisson-map residuals at `points` (source coordinates).
pub fn verify_poisson_map(m: &PoissonMap, points: &[Point]) -> Result<VerificationReport, ConstructError> {
    Ok(VerificationReport::evaluate(&m.poisson_residuals(), &m.scope(), points).map_err(PoissonError::from)?)
}

/// Poisson-map residuals at points sampled from `spec` with rejection on
/// any residual that fails to evaluate.
pub fn verify_sampled(m: &PoissonMap, spec: &SampleSpec) -> Result<VerificationReport, ConstructError> {
    let checks = m.poisson_residuals();
    let guards: Vec<Expr> = checks.iter().map(|(_, e)| e.clone()).collect();
    let points = m.scope().sample(spec, &guards).map_err(PoissonError::from)?;
    Ok(VerificationReport::evaluate(&checks, &m.scope(), &points).map_err(PoissonError::from)?)
}

/// Cartesian product `φ₁ × … × φₙ` between product structures, with factor
/// coordinates suffixed by their 1-based position.
pub fn product_map(maps: &[&PoissonMap]) -> Result<PoissonMap, ConstructError> {
    match maps {
        [] => Err(ConstructError::Invalid("product of zero maps".into())),
        [single] => Ok((*single).clone()),
        _ => {
            let sources: Vec<&PoissonStructure> = maps.iter().map(|m| &m.source).collect();
            let targets: Vec<&PoissonStructure> = maps.iter().map(|m| &m.target).collect();
            let source = poisson::product_all(&sources)?;
            let target = poisson::product_all(&targets)?;
            let mut components = Vec::with_capacity(target.dim());
            for (idx, m) in maps.iter().enumerate() {
                let renaming = m.source.chart().factor_renaming(idx + 1);
                components.extend(m.components.iter().map(|c| c.rename(&renaming)));
            }
            let name = maps.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join("×");
            PoissonMap::deferred(name, source, target, components)
        }
    }
}

/// Map product that is also verified at default sample points.
pub fn product_map_verified(maps: &[&PoissonMap], options: &VerifyOptions) -> Result<PoissonMap, ConstructError> {
    product_map(maps)?.verified(options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse};
    use crate::poisson::{product, Chart};

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

    #[test]
    fn addition_is_poisson_and_pulls_back_the_casimir() {
        let add = addition();
        let c = pullback(&e("x^2+y^2+z^2"), &add).unwrap();
        assert_eq!(c.to_string(), "(x1 + x2)^2 + (y1 + y2)^2 + (z1 + z2)^2");
    }

    #[test]
    fn identity_pullback() {
        let id = PoissonMap::identity(&su2());
        assert_eq!(pullback(&e("x"), &id).unwrap(), e("x"));
    }

    #[test]
    fn scaled_map_is_rejected() {
        let m = su2();
        let scaled = PoissonMap::deferred("scale", m.clone(), m.clone(), vec![e("x"), e("y"), e("2*z")]).unwrap();
        let report = verify_sampled(&scaled, &SampleSpec::default()).unwrap();
        assert!(report.max_residual >= 1.0);
        assert!(matches!(scaled.verified(&VerifyOptions::default()), Err(ConstructError::NotPoisson { .. })));
    }

    #[test]
    fn pullback_rejects_foreign_variables() {
        assert!(pullback(&e("w*x"), &addition()).is_err());
    }

    #[test]
    fn component_count_is_checked() {
        let m = su2();
        assert!(matches!(
            PoissonMap::deferred("bad", m.clone(), m, vec![e("x")]),
            Err(ConstructError::ComponentCount { .. })
        ));
    }

    #[test]
    fn product_of_one_map_is_itself() {
        let add = addition();
        assert_eq!(product_map(&[&add]).unwrap(), add);
    }

    #[test]
    fn product_map_of_additions_is_poisson() {
        let add = addition();
        let pair = product_map_verified(&[&add, &add], &VerifyOptions::default()).unwrap();
        assert_eq!(pair.source().dim(), 12);
        assert_eq!(pair.component("x2").unwrap().to_string(), "x12 + x22");
    }

    #[test]
    fn pullback_commutes_with_brackets() {
        let add = addition();
        let (f, g) = (e("x*y + z^2"), e("sin(x) - y*z"));
        let lhs = poisson::bracket(&pullback(&f, &add).unwrap(), &pullback(&g, &add).unwrap(), add.source()).unwrap();
        let rhs = pullback(&poisson::bracket(&f, &g, add.target()).unwrap(), &add).unwrap();
        for p in add.source().sample(&SampleSpec::default(), &[]).unwrap() {
            let d = evaluate(&lhs, &p).unwrap() - evaluate(&rhs, &p).unwrap();
            assert!(d.abs() < tolerance::PULLBACK_COMMUTATION);
        }
    }
}
