//! Random instances and independent oracles shared by the integration tests.
//!
//! The oracles here go straight to nalgebra or plain loops so they do not
//! share code paths with the library routines they check.
#![allow(dead_code)]

use kronruin_core::{build_dual, build_game, preset_r_of_d, BirthDeathSpec, GameSpec, Matrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sink {
    Yes,
    No,
    Either,
}

/// A birth-death spec with `2 <= N <= n_max` and rates in `(0, scale]`.
pub fn random_spec(rng: &mut ChaCha8Rng, n_max: usize, sink: Sink, scale: f64) -> BirthDeathSpec {
    let n = rng.random_range(2..=n_max);
    let p: Vec<f64> = (0..n - 1).map(|_| scale * rng.random_range(0.1..1.0)).collect();
    let mut q: Vec<f64> = (0..n - 1).map(|_| scale * rng.random_range(0.1..1.0)).collect();
    let no_sink = match sink {
        Sink::Yes => false,
        Sink::No => true,
        Sink::Either => rng.random_bool(0.3),
    };
    if no_sink {
        q[0] = 0.0;
    }
    BirthDeathSpec::new(n, p, q).expect("rates are valid")
}

/// An r-of-d preset game with `d <= d_max`, `N_j <= n_max` whose mixture
/// is stochastic, found by rejection.
pub fn random_game(rng: &mut ChaCha8Rng, d_max: usize, n_max: usize, sink: Sink, scale: f64) -> GameSpec {
    loop {
        let d = rng.random_range(1..=d_max);
        let r = rng.random_range(1..=d);
        let dims = (0..d).map(|_| random_spec(rng, n_max, sink, scale)).collect();
        let game = preset_r_of_d(dims, r).expect("preset is valid");
        if build_game(&game).is_ok() {
            return game;
        }
    }
}

/// A random game whose pure-birth dual exists (monotone factors with
/// nonnegative spectra and a nonnegative dual), found by rejection.
pub fn random_dual_game(rng: &mut ChaCha8Rng, d_max: usize, n_max: usize, sink: Sink) -> GameSpec {
    loop {
        let scale = [0.05, 0.15, 0.3, 0.5][rng.random_range(0..4)];
        let g = random_game(rng, d_max, n_max, sink, scale);
        if build_dual(&g).is_ok() {
            return g;
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        rows.push(row.into_iter().map(|x| x / s).collect());
    }
    Matrix::from_rows(&rows).unwrap()
}

fn dense(p: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(p.rows(), p.cols(), p.as_slice())
}

/// Absorption probabilities into `target` from every state, via `(I - Q) h = r`
/// on the states that are not absorbing.
pub fn absorption_oracle(p: &Matrix, target: usize) -> Vec<f64> {
    let n = p.rows();
    let absorbing: Vec<bool> = (0..n).map(|i| (p[(i, i)] - 1.0).abs() < 1e-14).collect();
    let transient: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
    let m = transient.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut r = DVector::<f64>::zeros(m);
    for (a_i, &i) in transient.iter().enumerate() {
        for (a_j, &j) in transient.iter().enumerate() {
            a[(a_i, a_j)] -= p[(i, j)];
        }
        r[a_i] = p[(i, target)];
    }
    let h = a.lu().solve(&r).expect("nonsingular");
    let mut out = vec![0.0; n];
    out[target] = 1.0;
    for (a_i, &i) in transient.iter().enumerate() {
        out[i] = h[a_i];
    }
    out
}

/// Expected absorption times `(I - Q)^{-1} 1`, zero on absorbing states.
pub fn expected_time_oracle(p: &Matrix) -> Vec<f64> {
    let n = p.rows();
    let transient: Vec<usize> = (0..n).filter(|&i| (p[(i, i)] - 1.0).abs() >= 1e-14).collect();
    let m = transient.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (a_i, &i) in transient.iter().enumerate() {
        for (a_j, &j) in transient.iter().enumerate() {
            a[(a_i, a_j)] -= p[(i, j)];
        }
    }
    let t = a.lu().solve(&DVector::from_element(m, 1.0)).expect("nonsingular");
    let mut out = vec![0.0; n];
    for (a_i, &i) in transient.iter().enumerate() {
        out[i] = t[a_i];
    }
    out
}

/// `pmf[t] = (nu P^t)(target) - (nu P^{t-1})(target)` for `t <= horizon`.
pub fn pmf_oracle(p: &Matrix, nu: &[f64], target: usize, horizon: usize) -> Vec<f64> {
    let pt = dense(p).transpose();
    let mut x = DVector::from_column_slice(nu);
    let mut prev = x[target];
    let mut out = vec![prev];
    for _ in 0..horizon {
        x = &pt * x;
        out.push(x[target] - prev);
        prev = x[target];
    }
    out
}

/// Stationary law of an irreducible stochastic matrix from the null space
/// of `(P^T - I)` with one equation replaced by normalisation.
pub fn stationary_oracle(p: &Matrix) -> Vec<f64> {
    let n = p.rows();
    let mut a = dense(p).transpose() - DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).expect("irreducible");
    x.iter().copied().collect()
}

/// `C(i, j) = 1{i <= j}`.
pub fn upper_ones(n: usize) -> Matrix {
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            c[(i, j)] = 1.0;
        }
    }
    c
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Eigenvalues of a general real matrix via nalgebra's Schur form; panics
/// if any is complex beyond `1e-9`.
pub fn real_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = dense(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-9, "complex eigenvalue {z}");
            z.re
        })
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}
