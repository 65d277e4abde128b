//! Dense linear-algebra helpers shared by the filters: ordered symmetric
//! eigendecompositions, SPD solves and CSV matrix serialization.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues non-decreasing and the
/// eigenvectors stored as matching columns.
#[derive(Debug, Clone)]
pub struct OrderedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn dominant_index(col: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    best
}

/// Symmetric eigendecomposition with a deterministic convention: ascending
/// eigenvalues; each eigenvector's largest-magnitude component positive;
/// exact eigenvalue ties ordered by descending index of that component.
pub fn ordered_symmetric_eigen(a: &DMatrix<f64>) -> Result<OrderedEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("QR iteration did not converge".into()))?;

    let mut cols: Vec<(f64, usize, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let d = dominant_index(&v);
            if v[d] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[i], d, v)
        })
        .collect();
    cols.sort_by(|a, b| match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Equal => b.1.cmp(&a.1),
        other => other,
    });

    let values = cols.iter().map(|c| c.0).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        vectors.column_mut(j).copy_from_slice(&c.2);
    }
    Ok(OrderedEigen { values, vectors })
}

/// Number of eigenvalues above `rel_threshold · λ_max`.
pub fn numerical_rank(eigenvalues: &[f64], rel_threshold: f64) -> usize {
    let max = eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eigenvalues
        .iter()
        .filter(|&&l| l > rel_threshold * max)
        .count()
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularInnovation)?;
    Ok(chol.solve(b))
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-major CSV, one matrix row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_order_and_signs() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = ordered_symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vectors.column(0)[1], 1.0);
        assert_eq!(e.vectors.column(2)[0], 1.0);
    }

    #[test]
    fn ties_break_by_descending_dominant_index() {
        let e = ordered_symmetric_eigen(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.vectors.column(0)[2], 1.0);
        assert_eq!(e.vectors.column(2)[0], 1.0);
    }

    #[test]
    fn rank_counts() {
        assert_eq!(numerical_rank(&[0.0; 4], 1e-6), 0);
        assert_eq!(numerical_rank(&[1.0, 1e-9, 0.5], 1e-6), 2);
    }

    #[test]
    fn csv_preserves_values_exactly() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e-300, 7.0]);
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(m, back);
    }
}
