//! Poisson structures on a single coordinate chart.
//!
//! A structure is stored as the strict upper triangle of its bivector matrix
//! `Λ^{ij} = {x_i, x_j}`; the lower triangle is the negation, so
//! antisymmetry holds by construction. Brackets are computed symbolically as
//! `{f, g} = Σ_{i<j} Λ^{ij} (∂_i f ∂_j g − ∂_j f ∂_i g)`.

mod json;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Point};
use crate::report::VerificationReport;
use crate::sample::{SampleError, SampleSpec, Scope};

pub use json::SystemDefinitionJson;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("`{0}` is not a coordinate of the chart")]
    UnknownCoordinate(String),
    #[error("free variable `{name}` in {context} is neither a coordinate nor a parameter")]
    FreeVariable { name: String, context: String },
    #[error("parameter `{name}` bound to both {left} and {right}")]
    ParameterConflict { name: String, left: f64, right: f64 },
    #[error("diagonal bivector entry ({0}, {0}) must be zero")]
    Diagonal(String),
    #[error("malformed system definition: {0}")]
    Json(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Ordered list of distinct coordinate names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Chart(Vec<String>);

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Chart, PoissonError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(PoissonError::Chart("a chart needs at least one coordinate".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !is_identifier(n) {
                return Err(PoissonError::Chart(format!("`{n}` is not an identifier")));
            }
            if !seen.insert(n) {
                return Err(PoissonError::Chart(format!("duplicate coordinate `{n}`")));
            }
        }
        Ok(Chart(names))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index(name).is_some()
    }

    /// Renaming used for factor `index` (1-based) of a product: `x → x{index}`.
    pub fn factor_renaming(&self, index: usize) -> BTreeMap<String, String> {
        self.0.iter().map(|n| (n.clone(), format!("{n}{index}"))).collect()
    }
}

impl TryFrom<Vec<String>> for Chart {
    type Error = PoissonError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Chart::new(v)
    }
}

impl From<Chart> for Vec<String> {
    fn from(c: Chart) -> Self {
        c.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A function with a display name, e.g. a Casimir or a Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFunction {
    pub name: String,
    #[serde(with = "crate::expr::serde_printed")]
    pub body: Expr,
}

impl NamedFunction {
    pub fn new(name: impl Into<String>, body: Expr) -> Self {
        NamedFunction { name: name.into(), body }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStructure {
    chart: Chart,
    parameters: BTreeMap<String, f64>,
    /// Non-zero strict upper-triangle entries keyed by (i, j), i < j.
    upper: BTreeMap<(usize, usize), Expr>,
}

impl PoissonStructure {
    /// The zero structure on `chart`.
    pub fn new(chart: Chart, parameters: BTreeMap<String, f64>) -> Result<Self, PoissonError> {
        for name in parameters.keys() {
            if chart.contains(name) {
                return Err(PoissonError::Chart(format!("`{name}` is both a coordinate and a parameter")));
            }
        }
        Ok(PoissonStructure { chart, parameters, upper: BTreeMap::new() })
    }

    /// Canonical structure with `{q, p} = 1` for each `(q, p)` pair, in chart
    /// order `q1, p1, q2, p2, …`.
    pub fn canonical(pairs: &[(&str, &str)]) -> Result<Self, PoissonError> {
        let chart = Chart::new(pairs.iter().flat_map(|(q, p)| [*q, *p]))?;
        let mut s = PoissonStructure::new(chart, BTreeMap::new())?;
        for (q, p) in pairs {
            s.set(q, p, Expr::one())?;
        }
        Ok(s)
    }

    /// Set `{a, b} = value` (and hence `{b, a} = −value`).
    pub fn set(&mut self, a: &str, b: &str, value: Expr) -> Result<(), PoissonError> {
        let i = self.chart.index(a).ok_or_else(|| PoissonError::UnknownCoordinate(a.into()))?;
        let j = self.chart.index(b).ok_or_else(|| PoissonError::UnknownCoordinate(b.into()))?;
        if i == j {
            return Err(PoissonError::Diagonal(a.into()));
        }
        let context = format!("bivector entry ({a}, {b})");
        self.check_free_vars(&value, &context)?;
        let (key, value) = if i < j { ((i, j), value.simplify()) } else { ((j, i), (-value).simplify()) };
        if value.is_zero() {
            self.upper.remove(&key);
        } else {
            self.upper.insert(key, value);
        }
        Ok(())
    }

    pub fn with(mut self, a: &str, b: &str, value: Expr) -> Result<Self, PoissonError> {
        self.set(a, b, value)?;
        Ok(self)
    }

    /// Adds parameters, rejecting clashes with coordinates or differing values.
    pub fn with_parameters(mut self, extra: &BTreeMap<String, f64>) -> Result<Self, PoissonError> {
        for name in extra.keys() {
            if self.chart.contains(name) {
                return Err(PoissonError::Chart(format!("`{name}` is both a coordinate and a parameter")));
            }
        }
        self.parameters = merge_parameters(&self.parameters, extra)?;
        Ok(self)
    }

    /// Same structure with coordinates renamed; unmapped names are kept.
    pub fn renamed(&self, renaming: &BTreeMap<String, String>) -> Result<Self, PoissonError> {
        let names = self.chart.names().iter().map(|n| renaming.get(n).unwrap_or(n).clone());
        let mut out = PoissonStructure::new(Chart::new(names)?, self.parameters.clone())?;
        for (&key, e) in &self.upper {
            out.upper.insert(key, e.rename(renaming));
        }
        Ok(out)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn scope(&self) -> Scope {
        Scope::new(self.chart.names().to_vec(), self.parameters.clone())
    }

    /// `Λ^{ij}` for any index pair.
    pub fn entry(&self, i: usize, j: usize) -> Expr {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => Expr::zero(),
            Less => self.upper.get(&(i, j)).cloned().unwrap_or_else(Expr::zero),
            Greater => self.upper.get(&(j, i)).map(|e| (-e.clone()).simplify()).unwrap_or_else(Expr::zero),
        }
    }

    /// Non-zero upper-triangle entries `(i, j, Λ^{ij})`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Expr)> {
        self.upper.iter().map(|(&(i, j), e)| (i, j, e))
    }

    pub fn check_free_vars(&self, e: &Expr, context: &str) -> Result<(), PoissonError> {
        for name in e.free_vars() {
            if !self.chart.contains(&name) && !self.parameters.contains_key(&name) {
                return Err(PoissonError::FreeVariable { name, context: context.to_string() });
            }
        }
        Ok(())
    }

    pub fn sample(&self, spec: &SampleSpec, guards: &[Expr]) -> Result<Vec<Point>, PoissonError> {
        Ok(self.scope().sample(spec, guards)?)
    }

    /// Free variables of `e` that must be bound at evaluation: chart ∪ parameters.
    pub fn admits(&self, e: &Expr) -> bool {
        self.check_free_vars(e, "").is_ok()
    }
}

/// Symbolic Poisson bracket `{f, g}`, simplified once.
pub fn bracket(f: &Expr, g: &Expr, structure: &PoissonStructure) -> Result<Expr, PoissonError> {
    structure.check_free_vars(f, "bracket argument")?;
    structure.check_free_vars(g, "bracket argument")?;
    Ok(bracket_unchecked(f, g, structure))
}

pub(crate) fn bracket_unchecked(f: &Expr, g: &Expr, structure: &PoissonStructure) -> Expr {
    let names = structure.chart.names();
    let df: Vec<Expr> = names.iter().map(|v| f.differentiate(v)).collect();
    let dg: Vec<Expr> = names.iter().map(|v| g.differentiate(v)).collect();
    let mut terms: Vec<Expr> = Vec::new();
    for (i, j, lambda) in structure.entries() {
        let forward = df[i].clone() * dg[j].clone();
        let backward = df[j].clone() * dg[i].clone();
        if df[i].is_zero() && df[j].is_zero() || dg[i].is_zero() && dg[j].is_zero() {
            continue;
        }
        terms.push(lambda.clone() * (forward - backward));
    }
    terms.into_iter().reduce(|a, b| a + b).map(|e| e.simplify()).unwrap_or_else(Expr::zero)
}

/// Symbolic Jacobiator `{{x_i,x_j},x_k} + {{x_j,x_k},x_i} + {{x_k,x_i},x_j}`
/// for every `i < j < k`.
pub fn jacobiators(structure: &PoissonStructure) -> Vec<(String, Expr)> {
    let names = structure.chart.names();
    let n = names.len();
    let coord = |i: usize| Expr::var(names[i].clone());
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let cyclic = bracket_unchecked(&structure.entry(i, j), &coord(k), structure)
                    + bracket_unchecked(&structure.entry(j, k), &coord(i), structure)
                    + bracket_unchecked(&structure.entry(k, i), &coord(j), structure);
                out.push((format!("{},{},{}", names[i], names[j], names[k]), cyclic.simplify()));
            }
        }
    }
    out
}

/// Jacobi identity check at `points`; points where evaluation fails are
/// skipped and listed in the report.
pub fn jacobi_report(structure: &PoissonStructure, points: &[Point]) -> Result<VerificationReport, PoissonError> {
    Ok(VerificationReport::evaluate(&jacobiators(structure), &structure.scope(), points)?)
}

pub fn jacobi_residual(structure: &PoissonStructure, points: &[Point]) -> Result<f64, PoissonError> {
    Ok(jacobi_report(structure, points)?.max_residual)
}

/// Brackets `{c, x_i}` for every coordinate.
pub fn casimir_residuals(c: &Expr, structure: &PoissonStructure) -> Result<Vec<(String, Expr)>, PoissonError> {
    structure.check_free_vars(c, "Casimir candidate")?;
    Ok(structure
        .chart
        .names()
        .iter()
        .map(|x| (format!("{{c,{x}}}"), bracket_unchecked(c, &Expr::var(x.clone()), structure)))
        .collect())
}

/// `max_i |{c, x_i}|` over `points`.
pub fn is_casimir(
    c: &Expr,
    structure: &PoissonStructure,
    points: &[Point],
) -> Result<VerificationReport, PoissonError> {
    Ok(VerificationReport::evaluate(&casimir_residuals(c, structure)?, &structure.scope(), points)?)
}

/// Product structure on the disjoint union chart; factor `i` (1-based) has
/// every coordinate suffixed with `i`.
pub fn product(left: &PoissonStructure, right: &PoissonStructure) -> Result<PoissonStructure, PoissonError> {
    product_all(&[left, right])
}

pub fn product_all(factors: &[&PoissonStructure]) -> Result<PoissonStructure, PoissonError> {
    if factors.is_empty() {
        return Err(PoissonError::Chart("product of zero factors".into()));
    }
    let mut names = Vec::new();
    let mut parameters = BTreeMap::new();
    for (idx, f) in factors.iter().enumerate() {
        let renaming = f.chart.factor_renaming(idx + 1);
        names.extend(f.chart.names().iter().map(|n| renaming[n].clone()));
        parameters = merge_parameters(&parameters, &f.parameters)?;
    }
    let chart = Chart::new(names)?;
    let mut out = PoissonStructure::new(chart, parameters)?;
    let mut offset = 0;
    for (idx, f) in factors.iter().enumerate() {
        let renaming = f.chart.factor_renaming(idx + 1);
        for (i, j, e) in f.entries() {
            out.upper.insert((offset + i, offset + j), e.rename(&renaming));
        }
        offset += f.dim();
    }
    Ok(out)
}

pub(crate) fn merge_parameters(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, PoissonError> {
    let mut out = a.clone();
    for (name, value) in b {
        match out.get(name) {
            Some(existing) if existing.to_bits() != value.to_bits() => {
                return Err(PoissonError::ParameterConflict { name: name.clone(), left: *existing, right: *value })
            }
            _ => {
                out.insert(name.clone(), *value);
            }
        }
    }
    Ok(out)
}
