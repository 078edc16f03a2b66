use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Casimir, CatalogError, CatalogMap, Family, Hamiltonian, Identity, ParameterSet, Space, SystemDefinition};
use crate::construct::{FamilyMember, FunctionFamily, PoissonMap};
use crate::expr::{parse, Expr, Point};
use crate::poisson::NamedFunction;
use crate::poisson::SystemDefinitionJson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceJson {
    pub name: String,
    pub structure: SystemDefinitionJson,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ranges: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirJson {
    pub space: String,
    pub name: String,
    pub expr: String,
}

/// A map as `{ name, source, target, components: { target coord: expr } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapJson {
    pub name: String,
    pub source: String,
    pub target: String,
    pub components: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianJson {
    pub name: String,
    pub space: String,
    pub expr: String,
    pub initial: Point,
    #[serde(default)]
    pub integrals: Vec<NamedFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub name: String,
    pub space: String,
    pub involutive: bool,
    #[serde(default)]
    pub expected_rank: Option<usize>,
    #[serde(default)]
    pub path: Vec<String>,
    pub members: Vec<FamilyMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityJson {
    pub name: String,
    pub space: String,
    pub lhs: String,
    pub rhs: String,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ranges: BTreeMap<String, (f64, f64)>,
}

/// Interchange form of a whole catalog system. Everything a check needs is
/// present, so a round trip reproduces the same verification results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogJson {
    pub name: String,
    pub parameters: ParameterSet,
    pub spaces: Vec<SpaceJson>,
    #[serde(default)]
    pub casimirs: Vec<CasimirJson>,
    #[serde(default)]
    pub maps: Vec<MapJson>,
    #[serde(default)]
    pub hamiltonians: Vec<HamiltonianJson>,
    #[serde(default)]
    pub families: Vec<FamilyJson>,
    #[serde(default)]
    pub identities: Vec<IdentityJson>,
}

fn parsed(text: &str) -> Result<Expr, CatalogError> {
    Ok(parse(text)?)
}

impl CatalogJson {
    pub fn from_system(def: &SystemDefinition) -> Self {
        CatalogJson {
            name: def.name.clone(),
            parameters: def.parameters.clone(),
            spaces: def
                .spaces
                .iter()
                .map(|s| SpaceJson {
                    name: s.name.clone(),
                    structure: SystemDefinitionJson::from_structure(&s.structure),
                    ranges: s.ranges.clone(),
                })
                .collect(),
            casimirs: def
                .casimirs
                .iter()
                .map(|c| CasimirJson {
                    space: c.space.clone(),
                    name: c.function.name.clone(),
                    expr: c.function.body.to_string(),
                })
                .collect(),
            maps: def
                .maps
                .iter()
                .map(|m| MapJson {
                    name: m.map.name().to_string(),
                    source: m.source.clone(),
                    target: m.target.clone(),
                    components: m
                        .map
                        .target()
                        .chart()
                        .names()
                        .iter()
                        .zip(m.map.components())
                        .map(|(n, e)| (n.clone(), e.to_string()))
                        .collect(),
                })
                .collect(),
            hamiltonians: def
                .hamiltonians
                .iter()
                .map(|h| HamiltonianJson {
                    name: h.name.clone(),
                    space: h.space.clone(),
                    expr: h.body.to_string(),
                    initial: h.initial.clone(),
                    integrals: h.integrals.clone(),
                    canonical_of: h.canonical_of.clone(),
                })
                .collect(),
            families: def
                .families
                .iter()
                .map(|f| FamilyJson {
                    name: f.name.clone(),
                    space: f.space.clone(),
                    involutive: f.involutive,
                    expected_rank: f.expected_rank,
                    path: f.family.path().to_vec(),
                    members: f.family.members().to_vec(),
                })
                .collect(),
            identities: def
                .identities
                .iter()
                .map(|i| IdentityJson {
                    name: i.name.clone(),
                    space: i.space.clone(),
                    lhs: i.lhs.to_string(),
                    rhs: i.rhs.to_string(),
                    tolerance: i.tolerance,
                    ranges: i.ranges.clone(),
                })
                .collect(),
        }
    }

    /// Rebuild the system. Structural claims are not re-verified here; run
    /// [`SystemDefinition::verify`] on the result.
    pub fn to_system(&self) -> Result<SystemDefinition, CatalogError> {
        if self.spaces.is_empty() {
            return Err(CatalogError::Json("a system needs at least one space".into()));
        }
        let mut def = SystemDefinition::new(self.name.clone(), self.parameters.clone());
        for s in &self.spaces {
            if def.space(&s.name).is_ok() {
                return Err(CatalogError::Json(format!("duplicate space `{}`", s.name)));
            }
            def.spaces.push(Space {
                name: s.name.clone(),
                structure: s.structure.to_structure()?,
                ranges: s.ranges.clone(),
            });
        }
        for c in &self.casimirs {
            let structure = def.structure(&c.space)?;
            let body = parsed(&c.expr)?;
            structure.check_free_vars(&body, &format!("Casimir `{}`", c.name))?;
            def.casimirs.push(Casimir { space: c.space.clone(), function: NamedFunction::new(c.name.clone(), body) });
        }
        for m in &self.maps {
            let source = def.structure(&m.source)?.clone();
            let target = def.structure(&m.target)?.clone();
            let mut components = Vec::with_capacity(target.dim());
            for coord in target.chart().names() {
                let text = m
                    .components
                    .get(coord)
                    .ok_or_else(|| CatalogError::Json(format!("map `{}` has no component for `{coord}`", m.name)))?;
                components.push(parsed(text)?);
            }
            if m.components.len() != target.dim() {
                return Err(CatalogError::Json(format!("map `{}` has components for unknown coordinates", m.name)));
            }
            let map = PoissonMap::deferred(m.name.clone(), source, target, components)?;
            def.maps.push(CatalogMap { source: m.source.clone(), target: m.target.clone(), map });
        }
        for h in &self.hamiltonians {
            let structure = def.structure(&h.space)?;
            let body = parsed(&h.expr)?;
            structure.check_free_vars(&body, &format!("Hamiltonian `{}`", h.name))?;
            for i in &h.integrals {
                structure.check_free_vars(&i.body, &format!("integral `{}`", i.name))?;
            }
            def.hamiltonians.push(Hamiltonian {
                name: h.name.clone(),
                space: h.space.clone(),
                body,
                initial: h.initial.clone(),
                integrals: h.integrals.clone(),
                canonical_of: h.canonical_of.clone(),
            });
        }
        for f in &self.families {
            let structure = def.structure(&f.space)?.clone();
            let family = FunctionFamily::from_members(structure, f.members.clone(), f.path.clone())?;
            def.families.push(Family {
                name: f.name.clone(),
                space: f.space.clone(),
                family,
                involutive: f.involutive,
                expected_rank: f.expected_rank,
            });
        }
        for i in &self.identities {
            let structure = def.structure(&i.space)?;
            let (lhs, rhs) = (parsed(&i.lhs)?, parsed(&i.rhs)?);
            for e in [&lhs, &rhs] {
                structure.check_free_vars(e, &format!("identity `{}`", i.name))?;
            }
            def.identities.push(Identity {
                name: i.name.clone(),
                space: i.space.clone(),
                lhs,
                rhs,
                tolerance: i.tolerance,
                ranges: i.ranges.clone(),
            });
        }
        Ok(def)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        serde_json::from_str(text).map_err(|e| CatalogError::Json(e.to_string()))
    }
}

impl SystemDefinition {
    pub fn to_json(&self) -> String {
        CatalogJson::from_system(self).to_json()
    }

    /// Load either a full catalog export or a bare structure definition
    /// (`{chart, parameters, bivector}`).
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CatalogError::Json(e.to_string()))?;
        if value.get("spaces").is_some() {
            let doc: CatalogJson = serde_json::from_value(value).map_err(|e| CatalogError::Json(e.to_string()))?;
            doc.to_system()
        } else {
            let doc: SystemDefinitionJson =
                serde_json::from_value(value).map_err(|e| CatalogError::Json(e.to_string()))?;
            Ok(SystemDefinition::from_structure("custom", doc.to_structure()?))
        }
    }
}
