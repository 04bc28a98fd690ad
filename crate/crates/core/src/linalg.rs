//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Spectral norm (largest singular value) from the top eigenvalue of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// Frobenius norm; an upper bound on the spectral norm.
pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent route: plain power iteration on MᵀM.
    fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
        let g = m.transpose() * m;
        let mut v = nalgebra::DVector::from_fn(m.ncols(), |i, _| 1.0 + i as f64 * 0.01);
        let mut est = 0.0;
        for _ in 0..5000 {
            let w = &g * &v;
            let n = w.norm();
            if n == 0.0 {
                return 0.0;
            }
            est = n;
            v = w / n;
        }
        est.sqrt()
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 0.0, 1.0, 3.0, 1.0, 1.0, -2.0]);
        let a = spectral_norm(&m);
        let b = power_iteration_norm(&m);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        assert!(a <= frobenius_norm(&m));
    }

    #[test]
    fn diagonal_norm() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -4.0]));
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-12);
    }
}
