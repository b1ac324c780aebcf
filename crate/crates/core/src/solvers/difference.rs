use crate::error::{CstError, Result};
use crate::meshing::AdjacencyGraph;

/// First-order difference operator on a pixel graph: one row per edge with
/// `+1` at `a` and `-1` at `b`. Stored as its edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceOperator {
    pairs: Vec<(usize, usize)>,
    n: usize,
}

impl DifferenceOperator {
    /// The operator with no rows, i.e. no regularization.
    pub fn empty(n: usize) -> Self {
        DifferenceOperator { pairs: Vec::new(), n }
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `F k`
    pub fn apply(&self, k: &[f64]) -> Vec<f64> {
        self.pairs.iter().map(|&(a, b)| k[a] - k[b]).collect()
    }

    /// `F^T y`
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&(a, b), &v) in self.pairs.iter().zip(y) {
            out[a] += v;
            out[b] -= v;
        }
        out
    }

    /// `||F k||^2`
    pub fn norm_sq(&self, k: &[f64]) -> f64 {
        self.pairs.iter().map(|&(a, b)| (k[a] - k[b]).powi(2)).sum()
    }

    /// Same operator on pixels relabelled by `order[new] = old`.
    pub fn permuted(&self, order: &[usize]) -> DifferenceOperator {
        let mut inverse = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let pairs = self.pairs.iter().map(|&(a, b)| (inverse[a], inverse[b])).collect();
        DifferenceOperator { pairs, n: self.n }
    }
}

/// Rows in edge order.
pub fn difference_operator(adj: &AdjacencyGraph, n: usize) -> Result<DifferenceOperator> {
    let mut pairs = Vec::with_capacity(adj.len());
    for e in &adj.edges {
        if e.a >= n || e.b >= n {
            return Err(CstError::Dimension(format!("edge ({}, {}) references a pixel outside 0..{n}", e.a, e.b)));
        }
        pairs.push((e.a, e.b));
    }
    Ok(DifferenceOperator { pairs, n })
}
