use super::{ConstructError, FunctionFamily};
use crate::expr::{Compiled, Point};
use crate::poisson::PoissonError;
use crate::tolerance;

/// Rank of a dense matrix by Gaussian elimination with full pivoting. Pivots
/// below `RANK_RELATIVE` times the first (largest) pivot count as zero.
pub fn numeric_rank(rows: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let mut threshold = None;
    let mut rank = 0;
    while rank < m.min(n) {
        let mut best = (0.0, rank, rank);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, v) in row.iter().enumerate().skip(rank) {
                if v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        let (pivot, pi, pj) = best;
        let limit = *threshold.get_or_insert(pivot * tolerance::RANK_RELATIVE);
        if pivot == 0.0 || pivot <= limit || !pivot.is_finite() {
            break;
        }
        a.swap(rank, pi);
        for row in a.iter_mut() {
            row.swap(rank, pj);
        }
        let (done, below) = a.split_at_mut(rank + 1);
        let pivot_row = &done[rank];
        for row in below {
            let factor = row[rank] / pivot_row[rank];
            if factor != 0.0 {
                for (v, p) in row[rank..n].iter_mut().zip(&pivot_row[rank..n]) {
                    *v -= factor * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Maximum over `points` of the numeric rank of the family's Jacobian with
/// respect to its chart coordinates. Points where any derivative fails to
/// evaluate are skipped.
pub fn independence_rank(f: &FunctionFamily, points: &[Point]) -> Result<usize, ConstructError> {
    let structure = f.structure();
    let scope = structure.scope();
    let coords = structure.chart().names();
    let gradients: Vec<Vec<Compiled>> = f
        .members()
        .iter()
        .map(|m| coords.iter().map(|c| scope.compile(&m.body.differentiate(c))).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()
        .map_err(PoissonError::from)?;
    let mut best = 0;
    for p in points {
        let values =
            scope.values(p).ok_or_else(|| ConstructError::Invalid("sample point misses a coordinate".into()))?;
        let jac: Result<Vec<Vec<f64>>, _> =
            gradients.iter().map(|row| row.iter().map(|g| g.eval(&values)).collect()).collect();
        if let Ok(jac) = jac {
            best = best.max(numeric_rank(&jac));
        }
    }
    Ok(best)
}
