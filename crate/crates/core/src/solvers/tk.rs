use super::{
    check_dims, constant_start, finish, largest_eigenvalue, project, residual, DifferenceOperator, ReconResult,
    SolverKind, SolverOptions,
};
use crate::error::{CstError, Result};
use crate::sensing::{dot, SensingMatrix};

const POWER_ITERATIONS: usize = 50;

/// `||A k - b||^2 + gamma ||F k||^2`
pub fn tk_objective(a: &SensingMatrix, b: &[f64], gamma: f64, f: &DifferenceOperator, k: &[f64]) -> f64 {
    let r = residual(&a.matrix, k, b);
    dot(&r, &r) + gamma * f.norm_sq(k)
}

/// `2 A^T (A k - b) + 2 gamma F^T F k`
pub fn tk_gradient(a: &SensingMatrix, b: &[f64], gamma: f64, f: &DifferenceOperator, k: &[f64]) -> Vec<f64> {
    let r = residual(&a.matrix, k, b);
    let mut g = a.matrix.tr_mul_vec(&r);
    if gamma != 0.0 {
        let ff = f.apply_transpose(&f.apply(k));
        for (gi, v) in g.iter_mut().zip(ff) {
            *gi += gamma * v;
        }
    }
    g.iter_mut().for_each(|v| *v *= 2.0);
    g
}

/// First-order Tikhonov reconstruction by projected gradient descent.
///
/// The fixed step is `1 / (2.02 lambda)` where `lambda` estimates the top
/// eigenvalue of `A^T A + gamma F^T F`; the objective's Hessian is twice that
/// operator. Iteration starts from the best non-negative constant field and
/// stops once the relative objective decrease drops below the tolerance.
pub fn solve_tk(
    a: &SensingMatrix,
    b: &[f64],
    gamma: f64,
    f: &DifferenceOperator,
    opts: &SolverOptions,
) -> Result<ReconResult> {
    check_dims(a, b)?;
    opts.validate()?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(CstError::param(format!("gamma must be non-negative, got {gamma}")));
    }
    if f.cols() != a.cols() {
        return Err(CstError::Dimension(format!(
            "difference operator on {} pixels for a {}-column matrix",
            f.cols(),
            a.cols()
        )));
    }
    let m = &a.matrix;
    let lambda = largest_eigenvalue(
        m,
        |v| {
            let mut w = m.tr_mul_vec(&m.mul_vec(v));
            if gamma != 0.0 {
                for (wi, fi) in w.iter_mut().zip(f.apply_transpose(&f.apply(v))) {
                    *wi += gamma * fi;
                }
            }
            w
        },
        POWER_ITERATIONS,
    );
    let mut k = constant_start(m, b);
    project(&mut k, opts.nonneg);
    let mut obj = tk_objective(a, b, gamma, f, &k);
    let mut history = vec![obj];
    if lambda <= 0.0 {
        return finish(a, b, k, SolverKind::Tk, gamma, 0, true, history, opts);
    }
    let scale = dot(b, b).max(f64::MIN_POSITIVE);
    let mut step = 1.0 / (2.02 * lambda);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let g = tk_gradient(a, b, gamma, f, &k);
        let mut next: Vec<f64> = k.iter().zip(&g).map(|(ki, gi)| ki - step * gi).collect();
        project(&mut next, opts.nonneg);
        let mut next_obj = tk_objective(a, b, gamma, f, &next);
        // the power estimate is a lower bound; guard against overshoot
        while next_obj > obj && step > 1e-30 {
            step *= 0.5;
            next = k.iter().zip(&g).map(|(ki, gi)| ki - step * gi).collect();
            project(&mut next, opts.nonneg);
            next_obj = tk_objective(a, b, gamma, f, &next);
        }
        if next_obj > obj {
            converged = true;
            break;
        }
        let decrease = obj - next_obj;
        k = next;
        obj = next_obj;
        history.push(obj);
        if decrease <= opts.relative_tolerance * obj || obj <= 1e-30 * scale {
            converged = true;
            break;
        }
    }
    finish(a, b, k, SolverKind::Tk, gamma, iterations, converged, history, opts)
}
