use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Chart, PoissonError, PoissonStructure};
use crate::expr::parse;

/// Interchange form of a Poisson structure:
///
/// ```json
/// { "chart": ["x", "y", "z"],
///   "parameters": { "k": 0.5 },
///   "bivector": { "x,y": "z", "y,z": "x", "z,x": "y" } }
/// ```
///
/// Bivector keys name two coordinates (or give two 0-based indices); entries
/// are expressions in printed form and omitted entries are zero. Keys are
/// written as `i,j` with `i` before `j` in chart order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDefinitionJson {
    pub chart: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub bivector: BTreeMap<String, String>,
}

impl SystemDefinitionJson {
    pub fn from_structure(s: &PoissonStructure) -> Self {
        let names = s.chart().names();
        SystemDefinitionJson {
            chart: names.to_vec(),
            parameters: s.parameters().clone(),
            bivector: s.entries().map(|(i, j, e)| (format!("{},{}", names[i], names[j]), e.to_string())).collect(),
        }
    }

    pub fn to_structure(&self) -> Result<PoissonStructure, PoissonError> {
        let chart = Chart::new(self.chart.clone())?;
        let mut s = PoissonStructure::new(chart.clone(), self.parameters.clone())?;
        for (key, text) in &self.bivector {
            let (a, b) = key
                .split_once(',')
                .ok_or_else(|| PoissonError::Json(format!("bivector key `{key}` is not of the form `i,j`")))?;
            let resolve = |token: &str| -> Result<String, PoissonError> {
                let token = token.trim();
                if let Ok(idx) = token.parse::<usize>() {
                    return chart
                        .names()
                        .get(idx)
                        .cloned()
                        .ok_or_else(|| PoissonError::Json(format!("index {idx} out of range in `{key}`")));
                }
                if chart.contains(token) {
                    Ok(token.to_string())
                } else {
                    Err(PoissonError::UnknownCoordinate(token.to_string()))
                }
            };
            let (a, b) = (resolve(a)?, resolve(b)?);
            s.set(&a, &b, parse(text)?)?;
        }
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<PoissonStructure, PoissonError> {
        let def: SystemDefinitionJson = serde_json::from_str(text).map_err(|e| PoissonError::Json(e.to_string()))?;
        def.to_structure()
    }

    pub fn to_json(s: &PoissonStructure) -> String {
        serde_json::to_string_pretty(&SystemDefinitionJson::from_structure(s)).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn reads_named_and_indexed_keys() {
        let text = r#"{ "chart": ["x","y","z"], "parameters": {"k": 0.5},
                        "bivector": { "x,y": "sinh(k*z)/k", "1,2": "x", "z,x": "y" } }"#;
        let s = SystemDefinitionJson::from_json(text).unwrap();
        assert_eq!(s.entry(0, 1).to_string(), "sinh(k*z)/k");
        assert_eq!(s.entry(1, 2).to_string(), "x");
        assert_eq!(s.entry(0, 2).to_string(), "-y");
        assert_eq!(s.parameters()["k"], 0.5);
    }

    #[test]
    fn round_trips_through_json() {
        let s = PoissonStructure::canonical(&[("q", "p")]).unwrap().with("q", "p", parse("-1").unwrap()).unwrap();
        let back = SystemDefinitionJson::from_json(&SystemDefinitionJson::to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_definitions_fail() {
        for text in [
            r#"{ "chart": ["x","x"] }"#,
            r#"{ "chart": ["x","y"], "bivector": { "x": "1" } }"#,
            r#"{ "chart": ["x","y"], "bivector": { "x,w": "1" } }"#,
            r#"{ "chart": ["x","y"], "bivector": { "x,y": "1+" } }"#,
            r#"{ "chart": ["x","y"], "bivector": { "x,y": "w" } }"#,
            r#"{ "chart": ["x","y"], "extra": 1 }"#,
        ] {
            assert!(SystemDefinitionJson::from_json(text).is_err(), "{text}");
        }
    }
}
