use super::{
    check_dims, constant_start, finish, largest_eigenvalue, project, residual, DifferenceOperator, ReconResult,
    SolverKind, SolverOptions,
};
use crate::error::{CstError, Result};
use crate::sensing::{dot, SensingMatrix};

const ARMIJO: f64 = 1e-4;

/// Smoothing of the edge-wise absolute differences: `1e-8 max(1, ||b||_inf)`.
pub fn tv_epsilon(b: &[f64]) -> f64 {
    1e-8 * b.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// `||A k - b||^2 + beta sum_edges sqrt((k_a - k_b)^2 + eps^2)`
pub fn tv_objective(a: &SensingMatrix, b: &[f64], beta: f64, f: &DifferenceOperator, eps: f64, k: &[f64]) -> f64 {
    let r = residual(&a.matrix, k, b);
    let tv: f64 = f.apply(k).iter().map(|d| (d * d + eps * eps).sqrt()).sum();
    dot(&r, &r) + beta * tv
}

pub fn tv_gradient(a: &SensingMatrix, b: &[f64], beta: f64, f: &DifferenceOperator, eps: f64, k: &[f64]) -> Vec<f64> {
    let r = residual(&a.matrix, k, b);
    let mut g = a.matrix.tr_mul_vec(&r);
    g.iter_mut().for_each(|v| *v *= 2.0);
    if beta != 0.0 {
        let w: Vec<f64> = f.apply(k).iter().map(|d| d / (d * d + eps * eps).sqrt()).collect();
        for (gi, v) in g.iter_mut().zip(f.apply_transpose(&w)) {
            *gi += beta * v;
        }
    }
    g
}

/// Total-variation reconstruction in penalized form, by projected gradient
/// with Armijo backtracking. The trial step doubles after every accepted
/// iteration and halves until sufficient decrease holds.
pub fn solve_tv(
    a: &SensingMatrix,
    b: &[f64],
    beta: f64,
    f: &DifferenceOperator,
    opts: &SolverOptions,
) -> Result<ReconResult> {
    check_dims(a, b)?;
    opts.validate()?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(CstError::param(format!("beta must be non-negative, got {beta}")));
    }
    if f.cols() != a.cols() {
        return Err(CstError::Dimension(format!(
            "difference operator on {} pixels for a {}-column matrix",
            f.cols(),
            a.cols()
        )));
    }
    let m = &a.matrix;
    let eps = tv_epsilon(b);
    let lambda = largest_eigenvalue(m, |v| m.tr_mul_vec(&m.mul_vec(v)), 50);
    let mut step = if lambda > 0.0 { 1.0 / (2.0 * lambda) } else { 1.0 };
    let mut k = constant_start(m, b);
    project(&mut k, opts.nonneg);
    let mut obj = tv_objective(a, b, beta, f, eps, &k);
    let mut history = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let g = tv_gradient(a, b, beta, f, eps, &k);
        let mut accepted = None;
        while step > 1e-300 {
            let mut next: Vec<f64> = k.iter().zip(&g).map(|(ki, gi)| ki - step * gi).collect();
            project(&mut next, opts.nonneg);
            let dir: f64 = g.iter().zip(next.iter().zip(&k)).map(|(gi, (n, ki))| gi * (n - ki)).sum();
            let next_obj = tv_objective(a, b, beta, f, eps, &next);
            if next_obj <= obj + ARMIJO * dir {
                accepted = Some((next, next_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_obj)) = accepted else {
            converged = true;
            break;
        };
        let decrease = obj - next_obj;
        k = next;
        obj = next_obj;
        history.push(obj);
        step *= 2.0;
        if decrease <= opts.relative_tolerance * obj.abs() {
            converged = true;
            break;
        }
    }
    finish(a, b, k, SolverKind::Tv, beta, iterations, converged, history, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::DenseMatrix;

    #[test]
    fn constant_field_has_minimal_variation() {
        let a = SensingMatrix::from_matrix(DenseMatrix::from_rows(vec![vec![1.0, 1.0, 1.0]]).unwrap());
        let f = DifferenceOperator::empty(3);
        assert_eq!(tv_objective(&a, &[3.0], 1.0, &f, 0.1, &[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(tv_epsilon(&[0.5]), 1e-8);
        assert_eq!(tv_epsilon(&[-4.0, 2.0]), 4e-8);
    }

    #[test]
    fn descent_is_monotone_and_feasible() {
        let a =
            SensingMatrix::from_matrix(DenseMatrix::from_rows(vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap());
        let f = DifferenceOperator::empty(3);
        let r = solve_tv(&a, &[1.0, -0.5], 0.0, &f, &SolverOptions::default()).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.k.iter().all(|&v| v >= 0.0));
        assert!(solve_tv(&a, &[1.0, -0.5], -1.0, &f, &SolverOptions::default()).is_err());
    }
}
