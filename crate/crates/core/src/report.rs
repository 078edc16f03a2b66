use serde::{Deserialize, Serialize};

use crate::expr::{Expr, ExprError, Point};
use crate::sample::Scope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub label: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub point: Point,
    pub error: String,
}

/// Outcome of evaluating a set of residual expressions at sample points.
/// `entries` holds the per-check maximum over points, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub worst_point: Option<Point>,
    pub worst_label: Option<String>,
    pub entries: Vec<ResidualEntry>,
    pub points_checked: usize,
    pub skipped: Vec<SkippedPoint>,
}

impl VerificationReport {
    pub fn empty() -> Self {
        VerificationReport {
            max_residual: 0.0,
            worst_point: None,
            worst_label: None,
            entries: Vec::new(),
            points_checked: 0,
            skipped: Vec::new(),
        }
    }

    /// Evaluate `|check|` for every labelled check at every point. A point at
    /// which any check fails to evaluate is skipped and recorded.
    pub fn evaluate(checks: &[(String, Expr)], scope: &Scope, points: &[Point]) -> Result<Self, ExprError> {
        let compiled = checks.iter().map(|(_, e)| scope.compile(e)).collect::<Result<Vec<_>, _>>()?;
        let mut report = VerificationReport::empty();
        report.entries =
            checks.iter().map(|(label, _)| ResidualEntry { label: label.clone(), residual: 0.0 }).collect();
        let mut row = vec![0.0; checks.len()];
        for point in points {
            let Some(values) = scope.values(point) else {
                let missing = scope.coords.iter().find(|c| point.get(c).is_none()).cloned().unwrap_or_default();
                return Err(ExprError::Unbound(missing));
            };
            let outcome: Result<(), ExprError> = compiled.iter().zip(row.iter_mut()).try_for_each(|(c, slot)| {
                *slot = c.eval(&values)?.abs();
                Ok(())
            });
            if let Err(e) = outcome {
                report.skipped.push(SkippedPoint { point: point.clone(), error: e.to_string() });
                continue;
            }
            report.points_checked += 1;
            for (i, r) in row.iter().enumerate() {
                if *r > report.entries[i].residual {
                    report.entries[i].residual = *r;
                }
                if *r > report.max_residual || report.worst_point.is_none() {
                    report.max_residual = report.max_residual.max(*r);
                    report.worst_point = Some(point.clone());
                    report.worst_label = Some(checks[i].0.clone());
                }
            }
        }
        Ok(report)
    }

    /// At least one point checked and every residual strictly below `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.points_checked > 0 && self.max_residual < tol
    }

    pub fn merge(mut self, other: VerificationReport) -> Self {
        if other.max_residual > self.max_residual || self.worst_point.is_none() {
            self.max_residual = self.max_residual.max(other.max_residual);
            if other.worst_point.is_some() {
                self.worst_point = other.worst_point;
                self.worst_label = other.worst_label;
            }
        }
        self.entries.extend(other.entries);
        self.points_checked = self.points_checked.max(other.points_checked);
        self.skipped.extend(other.skipped);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::collections::BTreeMap;

    #[test]
    fn tracks_worst_point_and_skips_failures() {
        let scope = Scope::new(vec!["x".into()], BTreeMap::new());
        let checks = vec![("lin".to_string(), parse("x").unwrap()), ("inv".to_string(), parse("1/x").unwrap())];
        let pts: Vec<Point> = [0.5, -3.0, 0.0].iter().map(|v| Point::from_pairs([("x", *v)])).collect();
        let r = VerificationReport::evaluate(&checks, &scope, &pts).unwrap();
        assert_eq!(r.points_checked, 2);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.max_residual, 3.0);
        assert_eq!(r.worst_point.as_ref().unwrap().get("x"), Some(-3.0));
        assert_eq!(r.entries[1].residual, 2.0);
        assert!(!r.passes(1.0));
        assert!(r.passes(3.5));
    }

    #[test]
    fn no_points_never_passes() {
        assert!(!VerificationReport::empty().passes(1.0));
    }
}
