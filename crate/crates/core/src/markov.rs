//! Generic finite-chain computations shared by the pipelines and their
//! oracles: fundamental-matrix solves, stationary laws, sparse stepping and
//! characteristic-polynomial comparisons.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{is_absorbing, Matrix, DEFAULT_TOL};

pub fn absorbing_states(p: &Matrix) -> Vec<usize> {
    (0..p.rows()).filter(|&i| is_absorbing(p, i, DEFAULT_TOL)).collect()
}

/// Probability of ever hitting the absorbing state `target`, from every state.
///
/// Solves `(I - Q) h = r` on the non-absorbing states, where `r` is the
/// one-step probability of entering `target`.
pub fn hitting_probabilities(p: &Matrix, target: usize) -> Result<Vec<f64>> {
    if target >= p.rows() {
        return Err(Error::Index {
            index: target,
            size: p.rows(),
        });
    }
    if !is_absorbing(p, target, DEFAULT_TOL) {
        return Err(Error::NotAbsorbing { index: target });
    }
    let absorbing = absorbing_states(p);
    let transient: Vec<usize> = (0..p.rows()).filter(|i| !absorbing.contains(i)).collect();
    let mut h = vec![0.0; p.rows()];
    h[target] = 1.0;
    if transient.is_empty() {
        return Ok(h);
    }
    let n = transient.len();
    let mut a = Matrix::identity(n);
    let mut r = vec![0.0; n];
    for (a_i, &i) in transient.iter().enumerate() {
        for (b_i, &j) in transient.iter().enumerate() {
            a[(a_i, b_i)] -= p[(i, j)];
        }
        r[a_i] = p[(i, target)];
    }
    let x = a.solve(&r)?;
    for (k, &i) in transient.iter().enumerate() {
        h[i] = x[k];
    }
    Ok(h)
}

/// Partial expectations `E[T; X_T = target]` from every state, i.e. the
/// derivative at 1 of the defective generating function of the hitting time.
pub fn partial_expected_times(p: &Matrix, target: usize) -> Result<Vec<f64>> {
    let h = hitting_probabilities(p, target)?;
    let absorbing = absorbing_states(p);
    let transient: Vec<usize> = (0..p.rows()).filter(|i| !absorbing.contains(i)).collect();
    let mut m = vec![0.0; p.rows()];
    if transient.is_empty() {
        return Ok(m);
    }
    // g_i(s) = s sum_j P(i,j) g_j(s) differentiated at s = 1:
    // g'_i = h_i + sum_{j transient} P(i,j) g'_j.
    let n = transient.len();
    let mut a = Matrix::identity(n);
    let mut rhs = vec![0.0; n];
    for (a_i, &i) in transient.iter().enumerate() {
        for (b_i, &j) in transient.iter().enumerate() {
            a[(a_i, b_i)] -= p[(i, j)];
        }
        rhs[a_i] = h[i];
    }
    let x = a.solve(&rhs)?;
    for (k, &i) in transient.iter().enumerate() {
        m[i] = x[k];
    }
    Ok(m)
}

/// Defective generating function `E[s^T; X_T = target]` from every state,
/// by solving `(I - sQ) g = s r` directly.
pub fn hitting_pgf(p: &Matrix, target: usize, s: f64) -> Result<Vec<f64>> {
    if !is_absorbing(p, target, DEFAULT_TOL) {
        return Err(Error::NotAbsorbing { index: target });
    }
    let absorbing = absorbing_states(p);
    let transient: Vec<usize> = (0..p.rows()).filter(|i| !absorbing.contains(i)).collect();
    let mut g = vec![0.0; p.rows()];
    g[target] = 1.0;
    if transient.is_empty() {
        return Ok(g);
    }
    let n = transient.len();
    let mut a = Matrix::identity(n);
    let mut rhs = vec![0.0; n];
    for (a_i, &i) in transient.iter().enumerate() {
        for (b_i, &j) in transient.iter().enumerate() {
            a[(a_i, b_i)] -= s * p[(i, j)];
        }
        rhs[a_i] = s * p[(i, target)];
    }
    let x = a.solve(&rhs)?;
    for (k, &i) in transient.iter().enumerate() {
        g[i] = x[k];
    }
    Ok(g)
}

/// Solves `pi P = pi`, `sum(pi) = 1`, assuming eigenvalue 1 is simple.
/// Entries are not required to be nonnegative.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    if !p.is_square() {
        return Err(Error::Shape("stationary law of a non-square matrix".into()));
    }
    let n = p.rows();
    let mut a = p.transpose().sub(&Matrix::identity(n))?;
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    a.solve(&b).map_err(|_| Error::Singular("stationary distribution"))
}

/// Row-compressed copy of a transition matrix for repeated `x P` products.
#[derive(Debug, Clone)]
pub struct SparseRows {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(p: &Matrix) -> Self {
        let rows = (0..p.rows())
            .map(|i| {
                p.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        Self { n: p.cols(), rows }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `out = x P`.
    pub fn step(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for &(j, v) in &self.rows[i] {
                out[j] += xi * v;
            }
        }
    }
}

/// Compares the characteristic polynomial of `m` with `prod_i (r_i - z)` on
/// `n + 1` points of the circle `|z - 0.5| = 1.5`, which stays at distance of
/// at least 0.5 from any spectrum inside `[-1, 1]`.
///
/// Two monic degree-`n` polynomials that agree on `n` points are equal, so a
/// small relative residual certifies that `roots` is the spectrum of `m`
/// counted with multiplicity.
pub fn charpoly_identity_residual(m: &Matrix, roots: &[f64]) -> Result<f64> {
    if !m.is_square() || roots.len() != m.rows() {
        return Err(Error::Shape(format!(
            "{} roots for a {}x{} matrix",
            roots.len(),
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let base: DMatrix<Complex64> = m.to_nalgebra().map(|v| Complex64::new(v, 0.0));
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / (n as f64 + 1.0);
        let z = Complex64::new(0.5, 0.0) + Complex64::from_polar(1.5, theta);
        let mut shifted = base.clone();
        for i in 0..n {
            shifted[(i, i)] -= z;
        }
        let det = shifted.lu().determinant();
        let expected = roots
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, r| acc * (Complex64::new(*r, 0.0) - z));
        worst = worst.max((det - expected).norm() / expected.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_probabilities_of_fair_walk() {
        // states 0..3, 0 and 3 absorbing, fair steps
        let p = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let h = hitting_probabilities(&p, 3).unwrap();
        for (got, want) in h.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_two_state() {
        let p = Matrix::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 0.6).abs() < 1e-14 && (pi[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn charpoly_detects_wrong_roots() {
        let p = Matrix::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        assert!(charpoly_identity_residual(&p, &[1.0, 0.5]).unwrap() < 1e-14);
        assert!(charpoly_identity_residual(&p, &[1.0, 0.4]).unwrap() > 1e-3);
        assert!(charpoly_identity_residual(&p, &[1.0]).is_err());
    }

    #[test]
    fn expected_time_of_geometric() {
        let p = Matrix::from_rows(&[vec![0.75, 0.25], vec![0.0, 1.0]]).unwrap();
        let m = partial_expected_times(&p, 1).unwrap();
        assert!((m[0] - 4.0).abs() < 1e-13);
    }
}
