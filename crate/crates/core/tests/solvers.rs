mod common;

use common::*;
use hybrid_cst::meshing::adjacency;
use hybrid_cst::sensing::assemble_sensing_matrix;
use hybrid_cst::solvers::{
    difference_operator, solve, solve_art, solve_tk, solve_tv, tv_epsilon, tv_objective, DifferenceOperator,
    SolverKind, SolverOptions,
};
use hybrid_cst::{DenseMatrix, Exec, SensingMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free() -> SolverOptions {
    SolverOptions { max_iterations: 100_000, relative_tolerance: 1e-15, nonneg: false, ..Default::default() }
}

/// `(A^T A + gamma F^T F) k = A^T b` solved directly.
fn tikhonov_oracle(a: &SensingMatrix, b: &[f64], gamma: f64, f: &DifferenceOperator) -> Vec<f64> {
    let n = a.cols();
    let m = DMatrix::from_row_slice(a.rows(), n, a.matrix.as_slice());
    let mut ftf = DMatrix::<f64>::zeros(n, n);
    for &(p, q) in f.pairs() {
        ftf[(p, p)] += 1.0;
        ftf[(q, q)] += 1.0;
        ftf[(p, q)] -= 1.0;
        ftf[(q, p)] -= 1.0;
    }
    let lhs = m.transpose() * &m + ftf * gamma;
    let rhs = m.transpose() * DVector::from_column_slice(b);
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

fn demo_problem() -> (SensingMatrix, DifferenceOperator, Vec<f64>) {
    let (layout, sq) = demo_layout();
    let mesh = demo_hybrid(&sq);
    let a = assemble_sensing_matrix(&layout, &mesh, Exec::Sequential);
    let f = difference_operator(&adjacency(&mesh), mesh.len()).unwrap();
    let truth: Vec<f64> = mesh
        .pixels
        .iter()
        .map(|p| {
            let c = p.center();
            0.01 + 0.1 * (-(c.x * c.x + c.y * c.y) / 0.05).exp()
        })
        .collect();
    let b = a.matrix.mul_vec(&truth);
    (a, f, b)
}

#[test]
fn tikhonov_matches_regularized_normal_equations() {
    let (a, f, b) = demo_problem();
    for gamma in [1e-3, 1e-1, 10.0] {
        let r = solve_tk(&a, &b, gamma, &f, &free()).unwrap();
        let want = tikhonov_oracle(&a, &b, gamma, &f);
        let scale = want.iter().cloned().fold(0.0, f64::max);
        assert!(max_abs_diff(&r.k, &want) <= 1e-4 * scale, "gamma {gamma}");
    }
}

#[test]
fn large_gamma_gives_best_constant_field() {
    let (a, f, b) = demo_problem();
    let r = solve_tk(&a, &b, 1e6, &f, &SolverOptions { max_iterations: 20_000, ..free() }).unwrap();
    let a1 = a.matrix.mul_vec(&vec![1.0; a.cols()]);
    let c = a1.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a1.iter().map(|x| x * x).sum::<f64>();
    assert!(r.k.iter().all(|v| (v - c).abs() <= 1e-3 * c), "constant {c}");
}

#[test]
fn tv_without_penalty_agrees_with_unregularized_tikhonov() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut m = random_matrix(&mut rng, 14, 9).matrix;
        for j in 0..9 {
            m.set(j, j, m.get(j, j) + 3.0);
        }
        let a = SensingMatrix::from_matrix(m);
        let b: Vec<f64> = (0..14).map(|_| rng.random_range(0.5..2.0)).collect();
        let f = grid_difference(3);
        let ls = normal_equations(&a, &b);
        let tk = solve_tk(&a, &b, 0.0, &f, &free()).unwrap();
        let tv = solve_tv(&a, &b, 0.0, &f, &free()).unwrap();
        assert!(max_abs_diff(&tk.k, &ls) <= 1e-6);
        assert!(max_abs_diff(&tv.k, &ls) <= 1e-6);
    }
}

#[test]
fn tv_of_constant_field_is_edge_count_times_epsilon() {
    let (a, f, _) = demo_problem();
    let k = vec![0.3; a.cols()];
    let b = a.matrix.mul_vec(&k);
    let eps = tv_epsilon(&b);
    let beta = 2.5;
    let got = tv_objective(&a, &b, beta, &f, eps, &k);
    let want = beta * f.rows() as f64 * eps;
    assert!((got - want).abs() <= 1e-12 * want + 1e-24, "{got} vs {want}");
}

#[test]
fn objective_histories_never_increase() {
    let (a, f, b) = demo_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noisy: Vec<f64> = b.iter().map(|v| v * (1.0 + 0.05 * rng.random_range(-1.0..1.0))).collect();
    let opts = SolverOptions { max_iterations: 500, ..Default::default() };
    for kind in [SolverKind::Tk, SolverKind::Tv] {
        let r = solve(kind, &a, &noisy, 0.01, &f, &opts).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]), "{kind}");
    }
}

#[test]
fn art_solves_consistent_underdetermined_systems() {
    let (a, _, b) = demo_problem();
    let r = solve_art(&a, &b, 1.0, &free()).unwrap();
    assert!(r.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(r.residual_norm <= 1e-6 * scale, "residual {}", r.residual_norm);
    assert!(r.converged);
}

#[test]
fn art_limit_is_minimum_norm_solution() {
    // from k = 0 the iterates stay in the row space of A
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let a = random_matrix(&mut rng, 5, 9);
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        let m = DMatrix::from_row_slice(5, 9, a.matrix.as_slice());
        let aat = &m * m.transpose();
        let y = aat.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let want: Vec<f64> = (m.transpose() * y).iter().copied().collect();
        let r = solve_art(&a, &b, 1.0, &free()).unwrap();
        assert!(max_abs_diff(&r.k, &want) <= 1e-8);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let (a, f, b) = demo_problem();
    let opts = SolverOptions::default();
    assert!(solve_tk(&a, &b[1..], 1.0, &f, &opts).is_err());
    assert!(solve_tk(&a, &b, -1.0, &f, &opts).is_err());
    assert!(solve_tv(&a, &b, f64::NAN, &f, &opts).is_err());
    assert!(solve_tv(&a, &b, 1.0, &DifferenceOperator::empty(3), &opts).is_err());
    assert!(solve_art(&a, &b, 0.0, &opts).is_err());
    let zero = SensingMatrix::from_matrix(DenseMatrix::zeros(2, 2));
    assert!(solve_art(&zero, &[1.0, 1.0], 1.0, &opts).is_err());
}

#[test]
fn densities_convert_with_gas_state() {
    let (a, f, b) = demo_problem();
    let mut opts = SolverOptions::default();
    opts.gas.pressure = 2.0;
    opts.gas.linestrength = 0.25;
    let r = solve_tk(&a, &b, 0.1, &f, &opts).unwrap();
    for (x, k) in r.x.iter().zip(&r.k) {
        assert!((x * 0.5 - k).abs() <= 1e-15 * k.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_are_non_negative(seed in any::<u64>(), kind_idx in 0..3usize, value in 1e-4..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, f, _) = demo_problem();
        // inconsistent data with negative entries push unconstrained solutions below zero
        let b: Vec<f64> = (0..a.rows()).map(|_| rng.random_range(-0.05..0.3)).collect();
        let kind = SolverKind::ALL[kind_idx];
        let opts = if kind == SolverKind::Art { SolverOptions::art_default() } else { SolverOptions { max_iterations: 300, ..Default::default() } };
        let v = if kind == SolverKind::Art { value.min(1.0) } else { value };
        let r = solve(kind, &a, &b, v, &f, &opts).unwrap();
        prop_assert!(r.k.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn permuting_columns_permutes_solutions(seed in any::<u64>(), kind_idx in 0..3usize) {
        let (a, f, b) = demo_problem();
        let mut order: Vec<usize> = (0..a.cols()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ap = SensingMatrix::from_matrix(a.matrix.permute_columns(&order));
        let fp = f.permuted(&order);
        let kind = SolverKind::ALL[kind_idx];
        let (value, opts) = match kind {
            SolverKind::Art => (0.2, SolverOptions::art_default()),
            _ => (0.01, SolverOptions { max_iterations: 400, ..Default::default() }),
        };
        let r = solve(kind, &a, &b, value, &f, &opts).unwrap();
        let rp = solve(kind, &ap, &b, value, &fp, &opts).unwrap();
        let scale = r.k.iter().cloned().fold(0.0, f64::max);
        for (new, &old) in order.iter().enumerate() {
            prop_assert!((rp.k[new] - r.k[old]).abs() <= 1e-6 * scale);
        }
    }
}
