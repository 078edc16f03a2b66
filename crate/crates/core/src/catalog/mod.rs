//! Ready-made systems: su(2)* and its chains, the Jordan–Schwinger
//! realization, the deformed SB(2,C) brackets with their canonical
//! realization, and upper triangular matrices.

mod json;
mod systems;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{self, ConstructError, FunctionFamily, PoissonMap};
use crate::expr::{Expr, ExprError, Point};
use crate::poisson::{self, NamedFunction, PoissonError, PoissonStructure};
use crate::report::VerificationReport;
use crate::sample::SampleSpec;
use crate::tolerance;

pub use json::{CatalogJson, HamiltonianJson, MapJson};
pub use systems::{casimir_limit_gap, restriction_fit, RestrictionFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no {kind} named `{name}`")]
    NotFound { kind: &'static str, name: String },
    #[error("{kind} check `{subject}` failed: residual {residual:e}")]
    Verification { kind: CheckKind, subject: String, residual: f64 },
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error("{0}")]
    Json(String),
}

impl From<ExprError> for CatalogError {
    fn from(e: ExprError) -> Self {
        CatalogError::Poisson(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Su2,
    Su2Chain,
    JordanSchwinger,
    Sb2cDeformed,
    Sb2cRealization,
    Triangular,
}

impl SystemName {
    pub const ALL: [SystemName; 6] = [
        SystemName::Su2,
        SystemName::Su2Chain,
        SystemName::JordanSchwinger,
        SystemName::Sb2cDeformed,
        SystemName::Sb2cRealization,
        SystemName::Triangular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemName::Su2 => "su2",
            SystemName::Su2Chain => "su2_chain",
            SystemName::JordanSchwinger => "jordan_schwinger",
            SystemName::Sb2cDeformed => "sb2c_deformed",
            SystemName::Sb2cRealization => "sb2c_realization",
            SystemName::Triangular => "triangular",
        }
    }

    /// Systems whose brackets depend on a deformation parameter `k`.
    pub fn is_deformed(self) -> bool {
        matches!(self, SystemName::Sb2cDeformed | SystemName::Sb2cRealization)
    }
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemName {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemName::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| CatalogError::UnknownSystem(s.to_string()))
    }
}

/// Numeric parameters shared by all catalog systems. Each system reads the
/// ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
    pub delta: f64,
    pub a: f64,
    pub r: f64,
    pub k_sites: usize,
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet { alpha: 1.0, beta: 1.0, gamma: 1.0, k: 1.0, delta: 1.0, a: 1.0, r: 1.0, k_sites: 2 }
    }
}

impl ParameterSet {
    pub const NAMES: [&'static str; 8] = ["alpha", "beta", "gamma", "k", "delta", "a", "r", "k_sites"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), CatalogError> {
        let slot = match name {
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "k" => &mut self.k,
            "delta" => &mut self.delta,
            "a" => &mut self.a,
            "r" => &mut self.r,
            "k_sites" => {
                if value.fract() != 0.0 || value < 0.0 || !value.is_finite() {
                    return Err(CatalogError::InvalidParameters(format!("k_sites must be an integer, got {value}")));
                }
                self.k_sites = value as usize;
                return Ok(());
            }
            other => return Err(CatalogError::UnknownParameter(other.to_string())),
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "alpha" => self.alpha,
            "beta" => self.beta,
            "gamma" => self.gamma,
            "k" => self.k,
            "delta" => self.delta,
            "a" => self.a,
            "r" => self.r,
            "k_sites" => self.k_sites as f64,
            _ => return None,
        })
    }

    /// Builder form of [`ParameterSet::set`] for known-valid names.
    pub fn with(mut self, name: &str, value: f64) -> Result<Self, CatalogError> {
        self.set(name, value)?;
        Ok(self)
    }

    /// Check the invariants that `system` relies on.
    pub fn validate(&self, system: SystemName) -> Result<(), CatalogError> {
        let bad = |msg: String| Err(CatalogError::InvalidParameters(msg));
        for name in ["alpha", "beta", "gamma", "k", "delta", "a", "r"] {
            if !self.get(name).is_some_and(f64::is_finite) {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.r <= 0.0 {
            return bad(format!("leaf radius r must be positive, got {}", self.r));
        }
        if self.delta <= 0.0 {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.a < 0.0 {
            return bad(format!("a must be non-negative, got {}", self.a));
        }
        if self.k_sites < 2 {
            return bad(format!("k_sites must be at least 2, got {}", self.k_sites));
        }
        if matches!(system, SystemName::Sb2cDeformed | SystemName::Sb2cRealization | SystemName::Triangular)
            && self.k == 0.0
        {
            return bad("k must be non-zero for the deformed brackets".into());
        }
        if system == SystemName::Sb2cRealization {
            let alpha_ok = (self.alpha - self.delta * self.delta).abs() <= 1e-12 * self.alpha.abs().max(1.0);
            if !alpha_ok {
                return bad(format!(
                    "realization needs alpha = delta^2 > 0 (alpha = {}, delta = {})",
                    self.alpha, self.delta
                ));
            }
            if self.beta != 1.0 {
                return bad(format!("realization needs beta = 1, got {}", self.beta));
            }
            if self.gamma >= 0.0 && self.a == 0.0 {
                return bad("realization needs a > 0 unless gamma < 0".into());
            }
        }
        Ok(())
    }
}

/// A named Poisson structure and the sampling box for its checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub name: String,
    pub structure: PoissonStructure,
    /// Per-coordinate sampling ranges keeping points inside the chart domain.
    pub ranges: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Casimir {
    pub space: String,
    pub function: NamedFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogMap {
    pub source: String,
    pub target: String,
    pub map: PoissonMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub name: String,
    pub space: String,
    pub body: Expr,
    /// Default initial state for simulations.
    pub initial: Point,
    /// Functions expected to be conserved along the flow.
    pub integrals: Vec<NamedFunction>,
    /// Name of the ambient Hamiltonian this one is the chart form of.
    pub canonical_of: Option<String>,
}

impl Hamiltonian {
    pub fn named(&self) -> NamedFunction {
        NamedFunction::new(self.name.clone(), self.body.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub name: String,
    pub space: String,
    pub family: FunctionFamily,
    /// Whether pairwise involution is claimed (some families only carry
    /// independence information).
    pub involutive: bool,
    pub expected_rank: Option<usize>,
}

/// A pointwise identity `lhs = rhs` on a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Identity {
    pub name: String,
    pub space: String,
    pub lhs: Expr,
    pub rhs: Expr,
    pub tolerance: f64,
    /// Extra sampling restrictions on top of the space's ranges.
    pub ranges: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Jacobi,
    Casimir,
    Map,
    Involution,
    Identity,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Jacobi => "jacobi",
            CheckKind::Casimir => "casimir",
            CheckKind::Map => "map",
            CheckKind::Involution => "involution",
            CheckKind::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    pub subject: String,
    pub passed: bool,
    pub tolerance: f64,
    pub report: VerificationReport,
}

/// Everything the catalog knows about one system, verified at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub(crate) name: String,
    pub(crate) parameters: ParameterSet,
    pub(crate) spaces: Vec<Space>,
    pub(crate) casimirs: Vec<Casimir>,
    pub(crate) maps: Vec<CatalogMap>,
    pub(crate) hamiltonians: Vec<Hamiltonian>,
    pub(crate) families: Vec<Family>,
    pub(crate) identities: Vec<Identity>,
}

impl SystemDefinition {
    pub(crate) fn new(name: impl Into<String>, parameters: ParameterSet) -> Self {
        SystemDefinition {
            name: name.into(),
            parameters,
            spaces: Vec::new(),
            casimirs: Vec::new(),
            maps: Vec::new(),
            hamiltonians: Vec::new(),
            families: Vec::new(),
            identities: Vec::new(),
        }
    }

    /// A bare system holding one structure, e.g. loaded from JSON.
    pub fn from_structure(name: impl Into<String>, structure: PoissonStructure) -> Self {
        let name = name.into();
        let mut def = SystemDefinition::new(name.clone(), ParameterSet::default());
        def.spaces.push(Space { name, structure, ranges: BTreeMap::new() });
        def
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parameters(&self) -> &ParameterSet {
        &self.parameters
    }

    pub fn spaces(&self) -> &[Space] {
        &self.spaces
    }

    pub fn casimirs(&self) -> &[Casimir] {
        &self.casimirs
    }

    pub fn maps(&self) -> &[CatalogMap] {
        &self.maps
    }

    pub fn hamiltonians(&self) -> &[Hamiltonian] {
        &self.hamiltonians
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    /// The primary space (the first one defined).
    pub fn primary(&self) -> &Space {
        &self.spaces[0]
    }

    pub fn space(&self, name: &str) -> Result<&Space, CatalogError> {
        self.spaces.iter().find(|s| s.name == name).ok_or_else(|| not_found("space", name))
    }

    pub fn structure(&self, space: &str) -> Result<&PoissonStructure, CatalogError> {
        Ok(&self.space(space)?.structure)
    }

    pub fn map(&self, name: &str) -> Result<&PoissonMap, CatalogError> {
        self.maps.iter().find(|m| m.map.name() == name).map(|m| &m.map).ok_or_else(|| not_found("map", name))
    }

    pub fn casimir(&self, name: &str) -> Result<&Casimir, CatalogError> {
        self.casimirs.iter().find(|c| c.function.name == name).ok_or_else(|| not_found("Casimir", name))
    }

    pub fn hamiltonian(&self, name: &str) -> Result<&Hamiltonian, CatalogError> {
        self.hamiltonians.iter().find(|h| h.name == name).ok_or_else(|| not_found("Hamiltonian", name))
    }

    pub fn family(&self, name: &str) -> Result<&Family, CatalogError> {
        self.families.iter().find(|f| f.name == name).ok_or_else(|| not_found("family", name))
    }

    pub fn identity(&self, name: &str) -> Result<&Identity, CatalogError> {
        self.identities.iter().find(|i| i.name == name).ok_or_else(|| not_found("identity", name))
    }

    /// `base` with the space's domain ranges applied.
    pub fn sample_spec(&self, space: &str, base: &SampleSpec) -> Result<SampleSpec, CatalogError> {
        let mut spec = base.clone();
        for (coord, range) in &self.space(space)?.ranges {
            spec.ranges.entry(coord.clone()).or_insert(*range);
        }
        Ok(spec)
    }

    /// Space whose chart contains exactly the free coordinates of `e`, the
    /// primary space first.
    pub fn space_for(&self, e: &Expr) -> Option<&Space> {
        self.spaces.iter().find(|s| s.structure.admits(e))
    }

    /// Run every check of the given kinds; `None` runs all.
    pub fn verify(&self, kinds: Option<&[CheckKind]>, base: &SampleSpec) -> Result<Vec<CheckOutcome>, CatalogError> {
        let wanted = |k: CheckKind| kinds.is_none_or(|ks| ks.contains(&k));
        let mut out = Vec::new();
        if wanted(CheckKind::Jacobi) {
            for s in &self.spaces {
                let checks = poisson::jacobiators(&s.structure);
                out.push(self.run(CheckKind::Jacobi, &s.name, &s.name, &checks, tolerance::RESIDUAL, base, None)?);
            }
        }
        if wanted(CheckKind::Casimir) {
            for c in &self.casimirs {
                let s = self.structure(&c.space)?;
                let checks = poisson::casimir_residuals(&c.function.body, s)?;
                out.push(self.run(
                    CheckKind::Casimir,
                    &c.function.name,
                    &c.space,
                    &checks,
                    tolerance::RESIDUAL,
                    base,
                    None,
                )?);
            }
        }
        if wanted(CheckKind::Map) {
            for m in &self.maps {
                let spec = self.sample_spec(&m.source, base)?;
                let report = construct::verify_sampled(&m.map, &spec)?;
                out.push(outcome(CheckKind::Map, m.map.name(), tolerance::RESIDUAL, report));
            }
        }
        if wanted(CheckKind::Involution) {
            for f in self.families.iter().filter(|f| f.involutive) {
                let checks = f.family.involution_residuals();
                out.push(self.run(
                    CheckKind::Involution,
                    &f.name,
                    &f.space,
                    &checks,
                    tolerance::RESIDUAL,
                    base,
                    None,
                )?);
            }
            for h in &self.hamiltonians {
                let s = self.structure(&h.space)?;
                let checks: Vec<(String, Expr)> = h
                    .integrals
                    .iter()
                    .map(|i| (format!("{{{},{}}}", h.name, i.name), poisson::bracket(&h.body, &i.body, s)))
                    .map(|(l, r)| r.map(|e| (l, e)))
                    .collect::<Result<_, _>>()?;
                if !checks.is_empty() {
                    let subject = format!("{} integrals", h.name);
                    out.push(self.run(
                        CheckKind::Involution,
                        &subject,
                        &h.space,
                        &checks,
                        tolerance::RESIDUAL,
                        base,
                        None,
                    )?);
                }
            }
        }
        if wanted(CheckKind::Identity) {
            for id in &self.identities {
                let checks = vec![(id.name.clone(), (id.lhs.clone() - id.rhs.clone()).simplify())];
                out.push(self.run(
                    CheckKind::Identity,
                    &id.name,
                    &id.space,
                    &checks,
                    id.tolerance,
                    base,
                    Some(&id.ranges),
                )?);
            }
        }
        Ok(out)
    }

    /// Evaluate caller-supplied residuals on `space`, with its domain ranges.
    pub fn check_residuals(
        &self,
        kind: CheckKind,
        subject: &str,
        space: &str,
        checks: &[(String, Expr)],
        tol: f64,
        base: &SampleSpec,
    ) -> Result<CheckOutcome, CatalogError> {
        self.run(kind, subject, space, checks, tol, base, None)
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        kind: CheckKind,
        subject: &str,
        space: &str,
        checks: &[(String, Expr)],
        tol: f64,
        base: &SampleSpec,
        extra: Option<&BTreeMap<String, (f64, f64)>>,
    ) -> Result<CheckOutcome, CatalogError> {
        let structure = self.structure(space)?;
        let mut spec = self.sample_spec(space, base)?;
        if let Some(extra) = extra {
            spec.ranges.extend(extra.iter().map(|(k, v)| (k.clone(), *v)));
        }
        let guards: Vec<Expr> = checks.iter().map(|(_, e)| e.clone()).collect();
        let points = structure.sample(&spec, &guards)?;
        let report = VerificationReport::evaluate(checks, &structure.scope(), &points)?;
        Ok(outcome(kind, subject, tol, report))
    }

    /// Verify everything and fail on the first check that does not pass.
    pub(crate) fn verified(self) -> Result<Self, CatalogError> {
        for o in self.verify(None, &SampleSpec::default())? {
            if !o.passed {
                return Err(CatalogError::Verification {
                    kind: o.kind,
                    subject: o.subject,
                    residual: o.report.max_residual,
                });
            }
        }
        Ok(self)
    }
}

fn outcome(kind: CheckKind, subject: &str, tol: f64, report: VerificationReport) -> CheckOutcome {
    CheckOutcome { kind, subject: subject.to_string(), passed: report.passes(tol), tolerance: tol, report }
}

fn not_found(kind: &'static str, name: &str) -> CatalogError {
    CatalogError::NotFound { kind, name: name.to_string() }
}

/// Build and verify a catalog system.
pub fn get_system(name: SystemName, p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    p.validate(name)?;
    let def = match name {
        SystemName::Su2 => systems::su2(p)?,
        SystemName::Su2Chain => systems::su2_chain(p)?,
        SystemName::JordanSchwinger => systems::jordan_schwinger(p)?,
        SystemName::Sb2cDeformed => systems::sb2c_deformed(p)?,
        SystemName::Sb2cRealization => systems::sb2c_realization(p)?,
        SystemName::Triangular => systems::triangular(p)?,
    };
    def.verified()
}

/// Chart-form Hamiltonians of `name`, each with the outcome of its identity
/// check against the pulled-back ambient Hamiltonian.
pub fn canonical_hamiltonians(
    name: SystemName,
    p: &ParameterSet,
) -> Result<Vec<(Hamiltonian, CheckOutcome)>, CatalogError> {
    let def = get_system(name, p)?;
    let canonical: Vec<&Hamiltonian> = def.hamiltonians.iter().filter(|h| h.canonical_of.is_some()).collect();
    if canonical.is_empty() {
        return Err(CatalogError::NotFound { kind: "canonical chart for system", name: name.to_string() });
    }
    let outcomes = def.verify(Some(&[CheckKind::Identity]), &SampleSpec::default())?;
    canonical
        .into_iter()
        .map(|h| {
            let id = systems::canonical_identity_name(&h.name);
            let o = outcomes.iter().find(|o| o.subject == id).cloned().ok_or_else(|| not_found("identity", &id))?;
            Ok((h.clone(), o))
        })
        .collect()
}

/// The `k → 0` limit of the deformed SB(2,C) system: linear brackets,
/// `c₀ = αx² + βy² + γz²` and `H₀ = c₀⊗1 + 1⊗c₀ + (αx₁x₂ + βy₁y₂ + γz₁z₂)`.
pub fn classical_limit(name: SystemName, p: &ParameterSet) -> Result<SystemDefinition, CatalogError> {
    if !name.is_deformed() {
        return Err(CatalogError::InvalidParameters(format!("`{name}` is not a deformed family")));
    }
    systems::sb2c_limit(p)?.verified()
}

#[cfg(test)]
mod tests;
