//! Seeded sample points for numeric checks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Compiled, Expr, ExprError, Point};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("no admissible point after {retries} retries (last failure: {last})")]
    Exhausted { retries: usize, last: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Uniform sampling box with rejection on evaluation failures.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub low: f64,
    pub high: f64,
    /// Per-coordinate overrides of `(low, high)`.
    pub ranges: BTreeMap<String, (f64, f64)>,
    pub max_retries: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { count: 100, seed: DEFAULT_SEED, low: -2.0, high: 2.0, ranges: BTreeMap::new(), max_retries: 1000 }
    }
}

impl SampleSpec {
    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_range(mut self, coord: &str, low: f64, high: f64) -> Self {
        self.ranges.insert(coord.to_string(), (low, high));
        self
    }
}

/// Coordinates plus fixed parameter values: the slot layout used to compile
/// and evaluate expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub coords: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

impl Scope {
    pub fn new(coords: Vec<String>, params: BTreeMap<String, f64>) -> Self {
        Scope { coords, params }
    }

    pub fn slots(&self) -> Vec<String> {
        self.coords.iter().cloned().chain(self.params.keys().cloned()).collect()
    }

    pub fn compile(&self, e: &Expr) -> Result<Compiled, ExprError> {
        Compiled::new(e, &self.slots())
    }

    /// Slot values for a point over `coords`; `None` if a coordinate is unbound.
    pub fn values(&self, p: &Point) -> Option<Vec<f64>> {
        let mut v = p.values(&self.coords)?;
        v.extend(self.params.values().copied());
        Some(v)
    }

    pub fn point(&self, coords: &[f64]) -> Point {
        Point::from_pairs(self.coords.iter().cloned().zip(coords.iter().copied()))
    }

    /// Draw `spec.count` points; a candidate is rejected (and redrawn) when
    /// any guard fails to evaluate.
    pub fn sample(&self, spec: &SampleSpec, guards: &[Expr]) -> Result<Vec<Point>, SampleError> {
        let compiled: Vec<Compiled> = guards.iter().map(|g| self.compile(g)).collect::<Result<_, _>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let params: Vec<f64> = self.params.values().copied().collect();
        let mut out = Vec::with_capacity(spec.count);
        let mut values = vec![0.0; self.coords.len() + params.len()];
        values[self.coords.len()..].copy_from_slice(&params);
        for _ in 0..spec.count {
            let mut last = String::new();
            let mut accepted = false;
            for _ in 0..=spec.max_retries {
                for (slot, name) in self.coords.iter().enumerate() {
                    let (lo, hi) = spec.ranges.get(name).copied().unwrap_or((spec.low, spec.high));
                    values[slot] = rng.gen_range(lo..hi);
                }
                match compiled.iter().try_for_each(|c| c.eval(&values).map(|_| ())) {
                    Ok(()) => {
                        accepted = true;
                        break;
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            if !accepted {
                return Err(SampleError::Exhausted { retries: spec.max_retries, last });
            }
            out.push(self.point(&values[..self.coords.len()]));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn scope(names: &[&str]) -> Scope {
        Scope::new(names.iter().map(|s| s.to_string()).collect(), BTreeMap::new())
    }

    #[test]
    fn same_seed_same_points() {
        let s = scope(&["x", "y"]);
        let a = s.sample(&SampleSpec::default(), &[]).unwrap();
        let b = s.sample(&SampleSpec::default(), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|p| p.0.values().all(|v| (-2.0..2.0).contains(v))));
        let c = s.sample(&SampleSpec::default().with_seed(7), &[]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn guards_reject_out_of_domain_points() {
        let s = scope(&["p"]);
        let pts = s.sample(&SampleSpec::default(), &[parse("sqrt(1 - p^2)").unwrap()]).unwrap();
        assert!(pts.iter().all(|pt| pt.get("p").unwrap().abs() <= 1.0));
    }

    #[test]
    fn impossible_guard_exhausts() {
        let s = scope(&["p"]);
        let spec = SampleSpec { max_retries: 10, ..SampleSpec::default() };
        let err = s.sample(&spec, &[parse("sqrt(-1 - p^2)").unwrap()]).unwrap_err();
        assert!(matches!(err, SampleError::Exhausted { retries: 10, .. }));
    }

    #[test]
    fn per_coordinate_ranges() {
        let s = scope(&["p", "q"]);
        let spec = SampleSpec::default().with_range("p", 0.1, 0.9);
        for pt in s.sample(&spec, &[]).unwrap() {
            assert!((0.1..0.9).contains(&pt.get("p").unwrap()));
        }
    }
}
