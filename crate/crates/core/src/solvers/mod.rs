//! Non-negative reconstruction of per-pixel absorption densities.
//!
//! Three solvers share one result type: first-order Tikhonov ([`solve_tk`]),
//! relaxed Kaczmarz row action ([`solve_art`]) and smoothed edge-wise total
//! variation ([`solve_tv`]). Regularizers act on pixel adjacency, so they
//! work unchanged on hybrid meshes.

mod art;
mod difference;
mod tk;
mod tv;

use serde::{Deserialize, Serialize};

pub use art::solve_art;
pub use difference::{difference_operator, DifferenceOperator};
pub use tk::{solve_tk, tk_gradient, tk_objective};
pub use tv::{solve_tv, tv_epsilon, tv_gradient, tv_objective};

use crate::error::{CstError, Result};
use crate::phantom::GasState;
use crate::sensing::{dot, DenseMatrix, SensingMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Tk,
    Art,
    Tv,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Tk, SolverKind::Art, SolverKind::Tv];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Tk => "tk",
            SolverKind::Art => "art",
            SolverKind::Tv => "tv",
        }
    }

    /// Symbol of the solver's regularization parameter.
    pub fn parameter(self) -> &'static str {
        match self {
            SolverKind::Tk => "gamma",
            SolverKind::Art => "lambda",
            SolverKind::Tv => "beta",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Iterations for TK/TV, full sweeps for ART.
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    #[serde(default = "yes")]
    pub nonneg: bool,
    /// Used to convert densities back to mole fractions.
    #[serde(default)]
    pub gas: GasState,
}

fn yes() -> bool {
    true
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 2000, relative_tolerance: 1e-8, nonneg: true, gas: GasState::default() }
    }
}

impl SolverOptions {
    /// 200 sweeps, tolerance 1e-6.
    pub fn art_default() -> Self {
        SolverOptions { max_iterations: 200, relative_tolerance: 1e-6, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(CstError::param("max_iterations must be at least 1"));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(CstError::param(format!(
                "relative_tolerance must be positive, got {}",
                self.relative_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconResult {
    /// Absorption densities per pixel.
    pub k: Vec<f64>,
    /// Mole fractions, `k / (P S)`.
    pub x: Vec<f64>,
    pub solver: SolverKind,
    /// gamma, lambda or beta.
    pub parameter: f64,
    pub iterations: usize,
    pub relative_tolerance: f64,
    pub converged: bool,
    /// `||A k - b||`
    pub residual_norm: f64,
    /// Objective after each iteration (TK/TV) or residual norm after each
    /// sweep (ART).
    pub history: Vec<f64>,
    pub gas: GasState,
}

/// `x_j = k_j / (P S)`.
pub fn concentration_from_k(k: &[f64], pressure: f64, linestrength: f64) -> Result<Vec<f64>> {
    if !(pressure > 0.0) || !(linestrength > 0.0) {
        return Err(CstError::param(format!(
            "pressure and linestrength must be positive, got {pressure} and {linestrength}"
        )));
    }
    let scale = pressure * linestrength;
    Ok(k.iter().map(|v| v / scale).collect())
}

fn check_dims(a: &SensingMatrix, b: &[f64]) -> Result<()> {
    if a.rows() != b.len() {
        return Err(CstError::Dimension(format!(
            "{} measurements for a {}x{} sensing matrix",
            b.len(),
            a.rows(),
            a.cols()
        )));
    }
    if a.cols() == 0 || a.rows() == 0 {
        return Err(CstError::Dimension("empty sensing matrix".into()));
    }
    Ok(())
}

fn residual(a: &DenseMatrix, k: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(k).iter().zip(b).map(|(ak, bi)| ak - bi).collect()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn project(k: &mut [f64], nonneg: bool) {
    if nonneg {
        for v in k.iter_mut() {
            *v = v.max(0.0);
        }
    }
}

/// Best non-negative constant field `c 1` in the least-squares sense.
fn constant_start(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let a1 = a.mul_vec(&vec![1.0; a.cols()]);
    let den = dot(&a1, &a1);
    let c = if den > 0.0 { (dot(&a1, b) / den).max(0.0) } else { 0.0 };
    vec![c; a.cols()]
}

/// Power-iteration estimate of the largest eigenvalue of the symmetric
/// positive semi-definite operator `op`, started from the column sums of `a`
/// so the estimate is covariant under column permutation.
fn largest_eigenvalue(a: &DenseMatrix, op: impl Fn(&[f64]) -> Vec<f64>, iterations: usize) -> f64 {
    let mut v = a.tr_mul_vec(&vec![1.0; a.rows()]);
    for (j, x) in v.iter_mut().enumerate() {
        // break any accidental orthogonality to the top eigenvector
        *x += 1.0 + 1e-3 * ((j % 7) as f64);
    }
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = op(&v);
        lambda = dot(&v, &w);
        v = w;
    }
    lambda
}

fn finish(
    a: &SensingMatrix,
    b: &[f64],
    k: Vec<f64>,
    solver: SolverKind,
    parameter: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    opts: &SolverOptions,
) -> Result<ReconResult> {
    let x = concentration_from_k(&k, opts.gas.pressure, opts.gas.linestrength)?;
    let residual_norm = norm(&residual(&a.matrix, &k, b));
    Ok(ReconResult {
        k,
        x,
        solver,
        parameter,
        iterations,
        relative_tolerance: opts.relative_tolerance,
        converged,
        residual_norm,
        history,
        gas: opts.gas,
    })
}

/// Runs `kind` with regularization `value`. `f` is required for TK and TV.
pub fn solve(
    kind: SolverKind,
    a: &SensingMatrix,
    b: &[f64],
    value: f64,
    f: &DifferenceOperator,
    opts: &SolverOptions,
) -> Result<ReconResult> {
    match kind {
        SolverKind::Tk => solve_tk(a, b, value, f, opts),
        SolverKind::Art => solve_art(a, b, value, opts),
        SolverKind::Tv => solve_tv(a, b, value, f, opts),
    }
}
