//! Chord-length sensing matrices and their singular value spectra.

use nalgebra::DMatrix;

use crate::error::{CstError, Result};
use crate::exec::Exec;
use crate::geometry::{segment_rect_chord, BeamLayout};
use crate::meshing::Mesh;

/// Relative threshold on singular values used for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(CstError::Dimension("ragged rows".into()));
        }
        Ok(DenseMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CstError::Dimension(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * yi;
                }
            }
        }
        out
    }

    /// Columns reordered so that new column `j` is old column `order[j]`.
    pub fn permute_columns(&self, order: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, order.len());
        for i in 0..self.rows {
            for (j, &old) in order.iter().enumerate() {
                out.set(i, j, self.get(i, old));
            }
        }
        out
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `M x N` chord-length matrix; columns `[0, n_in)` are region-of-interest
/// pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix {
    pub matrix: DenseMatrix,
    pub n_in: usize,
    pub layout_id: String,
    pub mesh_id: String,
}

impl SensingMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Wraps a bare matrix, e.g. for solver tests.
    pub fn from_matrix(matrix: DenseMatrix) -> Self {
        SensingMatrix { n_in: matrix.cols(), matrix, layout_id: "-".into(), mesh_id: "-".into() }
    }
}

/// `A[i][j]` = chord of beam `i` through pixel `j`. Rows are computed
/// independently, in parallel under [`Exec::Parallel`].
pub fn assemble_sensing_matrix(layout: &BeamLayout, mesh: &Mesh, exec: Exec) -> SensingMatrix {
    let n = mesh.len();
    let rows: Vec<Vec<f64>> = exec.map_slice(&layout.beams, |beam| {
        mesh.pixels.iter().map(|p| segment_rect_chord(beam.start, beam.end, &p.rect)).collect()
    });
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    SensingMatrix {
        matrix: DenseMatrix { rows: layout.len(), cols: n, data },
        n_in: mesh.n_in,
        layout_id: layout.label(),
        mesh_id: mesh.label(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixStats {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub nnz_fraction: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub rows_all_zero: Vec<usize>,
    pub cols_all_zero: Vec<usize>,
}

pub fn matrix_stats(a: &SensingMatrix) -> MatrixStats {
    let m = &a.matrix;
    let nnz = m.as_slice().iter().filter(|&&v| v > 0.0).count();
    let total = m.rows() * m.cols();
    let rows_all_zero = (0..m.rows()).filter(|&i| m.row(i).iter().all(|&v| v == 0.0)).collect();
    let cols_all_zero = (0..m.cols()).filter(|&j| (0..m.rows()).all(|i| m.get(i, j) == 0.0)).collect();
    MatrixStats {
        rows: m.rows(),
        cols: m.cols(),
        nnz,
        nnz_fraction: if total == 0 { 0.0 } else { nnz as f64 / total as f64 },
        n_in: a.n_in,
        n_out: m.cols() - a.n_in,
        rows_all_zero,
        cols_all_zero,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdSpectrum {
    /// Descending, length N.
    pub singular_values: Vec<f64>,
    pub extension_note: String,
}

impl SvdSpectrum {
    /// Count of singular values above `rel_tol * sigma_1`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s1 = self.singular_values.first().copied().unwrap_or(0.0);
        if s1 <= 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > rel_tol * s1).count()
    }
}

fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values of `A`, padded with zeros to length N. With `extend`, the
/// last row holding any non-zero entry is repeated until the matrix is N x N
/// before decomposing.
pub fn svd_spectrum(a: &SensingMatrix, extend: bool) -> Result<SvdSpectrum> {
    let m = &a.matrix;
    let (rows, n) = (m.rows(), m.cols());
    if rows == 0 || n == 0 {
        return Err(CstError::Dimension("empty sensing matrix".into()));
    }
    let (target, note) = if extend {
        if rows > n {
            return Err(CstError::Dimension(format!("cannot extend a {rows}x{n} matrix to square by row duplication")));
        }
        let last = (0..rows).rev().find(|&i| m.row(i).iter().any(|&v| v != 0.0));
        match last {
            Some(r) => {
                let mut data = m.as_slice().to_vec();
                for _ in rows..n {
                    data.extend_from_slice(m.row(r));
                }
                (
                    DenseMatrix { rows: n, cols: n, data },
                    format!("row {r} (last non-zero row) duplicated {} times to reach {n}x{n}", n - rows),
                )
            }
            None => (m.clone(), "all rows zero; no extension".to_string()),
        }
    } else {
        (m.clone(), "none".to_string())
    };
    let mut s = singular_values(&target);
    s.resize(n, 0.0);
    Ok(SvdSpectrum { singular_values: s, extension_note: note })
}

/// Dimension of the numerical null space: `N - rank(A)`, rank counted as
/// singular values above `1e-10 * sigma_1`.
pub fn nullspace_dimension(a: &SensingMatrix) -> Result<usize> {
    let spec = svd_spectrum(a, false)?;
    Ok(a.cols() - spec.rank(RANK_TOL))
}
