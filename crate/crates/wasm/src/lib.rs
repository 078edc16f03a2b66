//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; the plain `*_json` functions hold the
//! logic so they can be tested natively.

use involute::catalog::{classical_limit, get_system, ParameterSet, SystemDefinition, SystemName};
use involute::dynamics::{conservation_report, hamiltonian_field, integrate, IntegrateOptions, Trajectory};
use involute::expr::{evaluate, parse, Point};
use involute::poisson::{bracket, NamedFunction};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Series {
    coords: Vec<String>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    completed: bool,
    drift: Vec<(String, Option<f64>)>,
}

fn series(tr: &Trajectory, monitors: &[NamedFunction]) -> Result<Series, String> {
    let report = conservation_report(tr, monitors).map_err(|e| e.to_string())?;
    Ok(Series {
        coords: tr.coords().to_vec(),
        times: tr.times().to_vec(),
        states: tr.states().to_vec(),
        completed: tr.completed(),
        drift: report.entries.into_iter().map(|e| (e.name, e.drift)).collect(),
    })
}

fn run_hamiltonian(def: &SystemDefinition, x0: &Point, t_end: f64, step: f64, thin: usize) -> Result<Series, String> {
    let h = def.hamiltonian(def.hamiltonians().first().map_or("H", |h| h.name.as_str())).map_err(|e| e.to_string())?;
    let structure = def.structure(&h.space).map_err(|e| e.to_string())?;
    let field = hamiltonian_field(&h.body, structure).map_err(|e| e.to_string())?;
    let options = IntegrateOptions::rk4(t_end, step).with_thinning(thin.max(1));
    let tr = integrate(&field, x0, &options).map_err(|e| e.to_string())?;
    let mut monitors = vec![h.named()];
    monitors.extend(h.integrals.iter().cloned());
    series(&tr, &monitors)
}

fn checked_run(t_end: f64, step: f64) -> Result<(), String> {
    if !(step > 0.0 && t_end >= 0.0 && t_end / step <= 1e6) {
        return Err("need step > 0, t_end ≥ 0 and at most 10⁶ steps".into());
    }
    Ok(())
}

/// Spin-spin flow from two directions on the unit sphere (normalized here).
pub fn spin_spin_json(j1: [f64; 3], j2: [f64; 3], t_end: f64, step: f64, thin: usize) -> Result<String, String> {
    checked_run(t_end, step)?;
    let unit = |v: [f64; 3]| -> Result<[f64; 3], String> {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err("spin vectors must be non-zero".into());
        }
        Ok(v.map(|a| a / n))
    };
    let (a, b) = (unit(j1)?, unit(j2)?);
    let def = get_system(SystemName::Su2, &ParameterSet::default()).map_err(|e| e.to_string())?;
    let x0 = Point::from_pairs([("x1", a[0]), ("y1", a[1]), ("z1", a[2]), ("x2", b[0]), ("y2", b[1]), ("z2", b[2])]);
    let s = run_hamiltonian(&def, &x0, t_end, step, thin)?;
    serde_json::to_string(&s).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Comparison {
    k: f64,
    deformed: Series,
    limit: Series,
}

/// The deformed SB(2,C) flow at `k` next to its `k → 0` limit, both started
/// from the catalog's default state.
pub fn deformed_vs_limit_json(k: f64, t_end: f64, step: f64, thin: usize) -> Result<String, String> {
    checked_run(t_end, step)?;
    let p = ParameterSet::default().with("k", k).map_err(|e| e.to_string())?;
    let deformed = get_system(SystemName::Sb2cDeformed, &p).map_err(|e| e.to_string())?;
    let limit = classical_limit(SystemName::Sb2cDeformed, &p).map_err(|e| e.to_string())?;
    let x0 = deformed.hamiltonian("H").map_err(|e| e.to_string())?.initial.clone();
    let out = Comparison {
        k,
        deformed: run_hamiltonian(&deformed, &x0, t_end, step, thin)?,
        limit: run_hamiltonian(&limit, &x0, t_end, step, thin)?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BracketResult {
    space: String,
    coords: Vec<String>,
    bracket: String,
    value: Option<f64>,
}

/// Symbolic `{f, g}` on the first space of `system` containing both, and its
/// value at `point` (`name=value` pairs, comma separated) when one is given.
pub fn bracket_json(system: &str, f: &str, g: &str, point: &str) -> Result<String, String> {
    let name: SystemName = system.parse().map_err(|e: involute::catalog::CatalogError| e.to_string())?;
    let def = get_system(name, &ParameterSet::default()).map_err(|e| e.to_string())?;
    let (f, g) = (parse(f).map_err(|e| e.to_string())?, parse(g).map_err(|e| e.to_string())?);
    let space = def
        .spaces()
        .iter()
        .find(|s| s.structure.admits(&f) && s.structure.admits(&g))
        .ok_or("no space of this system contains both functions")?;
    let b = bracket(&f, &g, &space.structure).map_err(|e| e.to_string())?;
    let value = if point.trim().is_empty() {
        None
    } else {
        let mut pt = Point(space.structure.parameters().clone());
        for part in point.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected name=value, got `{part}`"))?;
            pt.set(k.trim(), v.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", v.trim()))?);
        }
        Some(evaluate(&b, &pt).map_err(|e| e.to_string())?)
    };
    let out = BracketResult {
        space: space.name.clone(),
        coords: space.structure.chart().names().to_vec(),
        bracket: b.to_string(),
        value,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn spin_spin(j1: Vec<f64>, j2: Vec<f64>, t_end: f64, step: f64, thin: usize) -> Result<String, JsError> {
    let arr = |v: Vec<f64>| <[f64; 3]>::try_from(v).map_err(|_| JsError::new("spin vectors need three components"));
    spin_spin_json(arr(j1)?, arr(j2)?, t_end, step, thin).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn deformed_vs_limit(k: f64, t_end: f64, step: f64, thin: usize) -> Result<String, JsError> {
    deformed_vs_limit_json(k, t_end, step, thin).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn poisson_bracket(system: &str, f: &str, g: &str, point: &str) -> Result<String, JsError> {
    bracket_json(system, f, g, point).map_err(|e| JsError::new(&e))
}
