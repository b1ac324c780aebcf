#![allow(dead_code)]

use hybrid_cst::experiment::{log_grid, SolverPlan};
use hybrid_cst::geometry::{
    build_beam_layout, build_clipped_layout, ros_polygon, BeamLayout, ConvexPolygon, Point, Rect,
};
use hybrid_cst::meshing::{adjacency, build_hybrid_mesh, build_uniform_mesh, centered_block, Mesh};
use hybrid_cst::phantom::{Field, GasState, PhantomSequence, PlumeSpec, PlumeTrack};
use hybrid_cst::solvers::{difference_operator, DifferenceOperator, SolverKind, SolverOptions};
use hybrid_cst::{DenseMatrix, SensingMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Unit square, 4 projections of 8 beams spaced L/14.
pub fn demo_layout() -> (BeamLayout, ConvexPolygon) {
    let sq = ConvexPolygon::square(1.0).unwrap();
    (build_clipped_layout(&sq, 4, 8, 1.0 / 14.0).unwrap(), sq)
}

pub fn demo_hybrid(ros: &ConvexPolygon) -> Mesh {
    build_hybrid_mesh(ros, 0.2, 0.1, centered_block(ros, 0.2, 3)).unwrap()
}

pub fn demo_uniform(ros: &ConvexPolygon) -> Mesh {
    build_uniform_mesh(ros, 1.0 / 7.0, Rect::centered(Point::default(), 5.0 / 7.0)).unwrap()
}

/// 4 x 8 beams, 1.8 cm spacing, 36.8 cm emitter-detector distance.
pub fn octagon_layout() -> (BeamLayout, ConvexPolygon) {
    let layout = build_beam_layout(4, 8, 1.8, 36.8).unwrap();
    let ros = ros_polygon(&layout).unwrap();
    (layout, ros)
}

pub fn octagon_hybrid(ros: &ConvexPolygon) -> Mesh {
    build_hybrid_mesh(ros, 3.68, 1.84, centered_block(ros, 3.68, 6)).unwrap()
}

pub fn octagon_uniform(ros: &ConvexPolygon) -> Mesh {
    build_uniform_mesh(ros, 2.63, centered_block(ros, 3.68, 6)).unwrap()
}

/// Frames used by the simulated comparison.
pub const SIM_FRAMES: [usize; 3] = [10, 12, 14];

/// Two single-jet scenarios, a central plume of radius 5 cm and an offset one
/// of radius 4 cm at (3, -3), as Gaussians of width r/2 over a weak
/// background. Frames are taken from each 50-frame sequence in turn.
pub fn jet_frames(ros: &ConvexPolygon, cell: f64, frames: &[usize]) -> Vec<Field> {
    let scenarios = [(Point::new(0.0, 0.0), 5.0), (Point::new(3.0, -3.0), 4.0)];
    let mut out = Vec::new();
    for (c, r) in scenarios {
        let seq = PhantomSequence {
            background: 0.005,
            n_frames: 50,
            plumes: vec![PlumeTrack { spec: PlumeSpec::gaussian(c, 0.5 * r, 0.05), growth: 0.5 }],
        };
        for &f in frames {
            out.push(seq.field(ros, cell, f, GasState::default()).unwrap());
        }
    }
    out
}

pub fn sim_solver_plans() -> Vec<SolverPlan> {
    let iterative = SolverOptions { max_iterations: 3000, relative_tolerance: 1e-8, ..Default::default() };
    vec![
        SolverPlan { solver: SolverKind::Tk, grid: log_grid(1e-6, 10.0, 12).unwrap(), opts: iterative },
        SolverPlan {
            solver: SolverKind::Art,
            grid: log_grid(1e-3, 2.0, 12).unwrap(),
            opts: SolverOptions::art_default(),
        },
        SolverPlan { solver: SolverKind::Tv, grid: log_grid(1e-6, 10.0, 12).unwrap(), opts: iterative },
    ]
}

pub fn random_segment_rect<R: Rng>(rng: &mut R) -> (Point, Point, Rect) {
    let x0 = rng.random_range(-2.0..1.0);
    let y0 = rng.random_range(-2.0..1.0);
    let r = Rect::new(x0, y0, x0 + rng.random_range(0.05..2.0), y0 + rng.random_range(0.05..2.0));
    let p = || Point::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let mut p = p;
    (p(), p(), r)
}

/// Chord length by midpoint sampling of `n` equal sub-segments.
pub fn sampled_chord(a: Point, b: Point, r: &Rect, n: usize) -> f64 {
    let mut inside = 0usize;
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        if p.x >= r.xmin && p.x <= r.xmax && p.y >= r.ymin && p.y <= r.ymax {
            inside += 1;
        }
    }
    inside as f64 / n as f64 * a.distance(b)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> SensingMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
    SensingMatrix::from_matrix(DenseMatrix::from_row_major(rows, cols, data).unwrap())
}

/// Square, strictly diagonally dominant.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> SensingMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v: f64 = rng.random_range(0.0..1.0);
            m.set(i, j, if i == j { v + n as f64 } else { v });
        }
    }
    SensingMatrix::from_matrix(m)
}

/// Least-squares solution via `A^T A x = A^T b` with a Cholesky factorization.
pub fn normal_equations(a: &SensingMatrix, b: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(a.rows(), a.cols(), a.matrix.as_slice());
    let ata = m.transpose() * &m;
    let atb = m.transpose() * DVector::from_column_slice(b);
    ata.cholesky().expect("full column rank").solve(&atb).iter().copied().collect()
}

/// Difference operator of an `n x n` grid of unit pixels.
pub fn grid_difference(n: usize) -> DifferenceOperator {
    let ros = ConvexPolygon::square(n as f64).unwrap();
    let mesh = build_uniform_mesh(&ros, 1.0, centered_block(&ros, 1.0, 1)).unwrap();
    difference_operator(&adjacency(&mesh), mesh.len()).unwrap()
}

/// `||g - g_fd|| / ||g||` with central differences.
pub fn fd_relative_error(x: &[f64], g: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        num += (fd - g[i]).powi(2);
        den += g[i].powi(2);
    }
    (num / den).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max)
}
