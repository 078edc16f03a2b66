//! Hamiltonian vector fields, time integration and conservation monitoring.

mod integrate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::FunctionFamily;
use crate::expr::{Compiled, Expr, ExprError, Point};
use crate::poisson::{Chart, NamedFunction, PoissonError, PoissonStructure};

pub use integrate::{integrate, IntegrateOptions, IntegrationFailure, Method, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("initial point does not bind coordinate `{0}`")]
    Unbound(String),
    #[error("{0}")]
    Invalid(String),
}

/// Components `Γ^j` of a vector field, one per chart coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    chart: Chart,
    parameters: BTreeMap<String, f64>,
    components: Vec<Expr>,
}

impl VectorFieldSpec {
    pub fn new(chart: Chart, parameters: BTreeMap<String, f64>, components: Vec<Expr>) -> Result<Self, DynamicsError> {
        if components.len() != chart.dim() {
            return Err(DynamicsError::Invalid(format!(
                "{} components for a {}-dimensional chart",
                components.len(),
                chart.dim()
            )));
        }
        let scope = PoissonStructure::new(chart.clone(), parameters.clone())?;
        for (name, c) in chart.names().iter().zip(&components) {
            scope.check_free_vars(c, &format!("vector field component `{name}`"))?;
        }
        Ok(VectorFieldSpec { chart, parameters, components })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, coord: &str) -> Option<&Expr> {
        self.chart.index(coord).map(|i| &self.components[i])
    }

    pub fn compile(&self) -> Result<CompiledField, DynamicsError> {
        let mut slots = self.chart.names().to_vec();
        slots.extend(self.parameters.keys().cloned());
        let components = self.components.iter().map(|c| Compiled::new(c, &slots)).collect::<Result<_, _>>()?;
        Ok(CompiledField { components, params: self.parameters.values().copied().collect(), scratch: Vec::new() })
    }

    /// Field value at a point binding every chart coordinate.
    pub fn at(&self, p: &Point) -> Result<Vec<f64>, DynamicsError> {
        let state = state_of(&self.chart, p)?;
        let mut out = vec![0.0; state.len()];
        self.compile()?.eval(&state, &mut out)?;
        Ok(out)
    }
}

/// Vector field compiled for repeated evaluation on state vectors.
#[derive(Debug, Clone)]
pub struct CompiledField {
    components: Vec<Compiled>,
    params: Vec<f64>,
    scratch: Vec<f64>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&mut self, state: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        self.scratch.clear();
        self.scratch.extend_from_slice(state);
        self.scratch.extend_from_slice(&self.params);
        for (c, slot) in self.components.iter().zip(out.iter_mut()) {
            *slot = c.eval(&self.scratch)?;
        }
        Ok(())
    }
}

pub(crate) fn state_of(chart: &Chart, p: &Point) -> Result<Vec<f64>, DynamicsError> {
    chart.names().iter().map(|n| p.get(n).ok_or_else(|| DynamicsError::Unbound(n.clone()))).collect()
}

/// `Γ^j = Σ_i Λ^{ij} ∂_i H`, so that `Γ^j = {H, x_j}`.
pub fn hamiltonian_field(h: &Expr, structure: &PoissonStructure) -> Result<VectorFieldSpec, DynamicsError> {
    structure.check_free_vars(h, "Hamiltonian")?;
    let names = structure.chart().names();
    let grad: Vec<Expr> = names.iter().map(|n| h.differentiate(n)).collect();
    let components = (0..names.len())
        .map(|j| {
            (0..names.len())
                .filter(|&i| i != j && !grad[i].is_zero())
                .map(|i| structure.entry(i, j) * grad[i].clone())
                .reduce(|a, b| a + b)
                .map(|e| e.simplify())
                .unwrap_or_else(Expr::zero)
        })
        .collect();
    Ok(VectorFieldSpec { chart: structure.chart().clone(), parameters: structure.parameters().clone(), components })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub name: String,
    /// `None` when the function failed to evaluate somewhere on the trajectory.
    pub drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-function maximum relative drift `|F(x_t) − F(x_0)| / (1 + |F(x_0)|)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservationReport {
    pub entries: Vec<DriftEntry>,
}

impl ConservationReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.drift)
    }

    /// Largest drift; infinite if any function failed to evaluate.
    pub fn max_drift(&self) -> f64 {
        self.entries.iter().map(|e| e.drift.unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    /// `{name: drift}` with `null` for failed entries, in input order.
    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for e in &self.entries {
            map.insert(e.name.clone(), e.drift.map_or(serde_json::Value::Null, serde_json::Value::from));
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).unwrap_or_default()
    }
}

/// Drift of each function along `tr`.
pub fn conservation_report(tr: &Trajectory, fns: &[NamedFunction]) -> Result<ConservationReport, DynamicsError> {
    let mut slots = tr.coords().to_vec();
    slots.extend(tr.parameters().keys().cloned());
    let params: Vec<f64> = tr.parameters().values().copied().collect();
    let scope = PoissonStructure::new(Chart::new(tr.coords().to_vec())?, tr.parameters().clone())?;
    let mut entries = Vec::with_capacity(fns.len());
    let mut values = Vec::with_capacity(slots.len());
    for f in fns {
        scope.check_free_vars(&f.body, &format!("monitored function `{}`", f.name))?;
        let compiled = Compiled::new(&f.body, &slots)?;
        let mut eval = |state: &[f64]| {
            values.clear();
            values.extend_from_slice(state);
            values.extend_from_slice(&params);
            compiled.eval(&values)
        };
        let outcome = (|| {
            let mut states = tr.states().iter();
            let Some(first) = states.next() else { return Ok(0.0) };
            let f0 = eval(first)?;
            let mut drift: f64 = 0.0;
            for s in states {
                drift = drift.max((eval(s)? - f0).abs() / (1.0 + f0.abs()));
            }
            Ok::<f64, ExprError>(drift)
        })();
        entries.push(match outcome {
            Ok(d) => DriftEntry { name: f.name.clone(), drift: Some(d), error: None },
            Err(e) => DriftEntry { name: f.name.clone(), drift: None, error: Some(e.to_string()) },
        });
    }
    Ok(ConservationReport { entries })
}

pub fn family_conservation(tr: &Trajectory, family: &FunctionFamily) -> Result<ConservationReport, DynamicsError> {
    conservation_report(tr, &family.named_functions())
}
