use super::{check_dims, finish, norm, project, residual, ReconResult, SolverKind, SolverOptions};
use crate::error::{CstError, Result};
use crate::sensing::{dot, SensingMatrix};

/// Relaxed Kaczmarz iteration
/// `k <- k + lambda (b_i - A_i k) / ||A_i||^2 A_i^T`, visiting beams in index
/// order from `k = 0`. All-zero rows are skipped. With `nonneg`, `k` is
/// clipped to be non-negative after each full sweep. Stops when a sweep
/// changes `k` by less than the relative tolerance.
pub fn solve_art(a: &SensingMatrix, b: &[f64], lambda: f64, opts: &SolverOptions) -> Result<ReconResult> {
    check_dims(a, b)?;
    opts.validate()?;
    if !(lambda > 0.0 && lambda <= 2.0) {
        return Err(CstError::param(format!("relaxation must lie in (0, 2], got {lambda}")));
    }
    let m = &a.matrix;
    let row_norms: Vec<f64> = (0..m.rows()).map(|i| dot(m.row(i), m.row(i))).collect();
    if row_norms.iter().all(|&v| v == 0.0) {
        return Err(CstError::param("sensing matrix has no non-zero row"));
    }
    let mut k = vec![0.0; m.cols()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let before = k.clone();
        for (i, &nrm) in row_norms.iter().enumerate() {
            if nrm == 0.0 {
                continue;
            }
            let row = m.row(i);
            let c = lambda * (b[i] - dot(row, &k)) / nrm;
            for (kj, &aij) in k.iter_mut().zip(row) {
                *kj += c * aij;
            }
        }
        project(&mut k, opts.nonneg);
        history.push(norm(&residual(m, &k, b)));
        let change: f64 = k.iter().zip(&before).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let size = norm(&k);
        if change <= opts.relative_tolerance * size || (size == 0.0 && change == 0.0) {
            converged = true;
            break;
        }
    }
    finish(a, b, k, SolverKind::Art, lambda, sweeps, converged, history, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::DenseMatrix;

    #[test]
    fn identity_is_solved_in_one_sweep() {
        let a = SensingMatrix::from_matrix(
            DenseMatrix::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
        );
        let b = [0.5, 2.0, 0.0];
        let opts = SolverOptions { max_iterations: 1, ..SolverOptions::art_default() };
        let r = solve_art(&a, &b, 1.0, &opts).unwrap();
        assert_eq!(r.k, b.to_vec());
    }

    #[test]
    fn single_projection() {
        let a = SensingMatrix::from_matrix(DenseMatrix::from_rows(vec![vec![3.0, 4.0]]).unwrap());
        let opts = SolverOptions { max_iterations: 1, ..SolverOptions::art_default() };
        let r = solve_art(&a, &[10.0], 1.0, &opts).unwrap();
        assert!((r.k[0] - 1.2).abs() < 1e-15 && (r.k[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_skipped_and_invalid_rejected() {
        let a = SensingMatrix::from_matrix(DenseMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap());
        let r = solve_art(&a, &[5.0, 2.0], 1.0, &SolverOptions::art_default()).unwrap();
        assert!((r.k[0] - 1.0).abs() < 1e-12);
        assert!(solve_art(&a, &[5.0, 2.0], 0.0, &SolverOptions::art_default()).is_err());
        assert!(solve_art(&a, &[5.0, 2.0], 2.5, &SolverOptions::art_default()).is_err());
        let z = SensingMatrix::from_matrix(DenseMatrix::zeros(2, 2));
        assert!(solve_art(&z, &[0.0, 0.0], 1.0, &SolverOptions::art_default()).is_err());
    }
}
