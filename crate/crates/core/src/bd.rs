//! One-dimensional birth-and-death gambler chains.
//!
//! A [`BirthDeathSpec`] describes the chain on `{0, 1, .., N}` where `N`
//! (win) and `0` (ruin) absorb. When `q(1) = 0` the sink is unreachable and
//! the chain is effectively a birth-death chain on `{1, .., N}`.
//!
//! Winning probabilities use
//! `rho(i) = sum_{n=1}^{i} prod_{r=1}^{n-1} q(r)/p(r) / sum_{n=1}^{N} prod_{r=1}^{n-1} q(r)/p(r)`,
//! the variant with inner upper index `n - 1`; it is the one that agrees with
//! the fundamental-matrix solve.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathSpec {
    n: usize,
    /// `p[i - 1] = p(i)` for `i = 1..N-1`.
    p: Vec<f64>,
    /// `q[i - 1] = q(i)` for `i = 1..N-1`.
    q: Vec<f64>,
}

impl BirthDeathSpec {
    pub fn new(n: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("N must be at least 1".into()));
        }
        if p.len() != n - 1 || q.len() != n - 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} birth and death probabilities, got {} and {}",
                n - 1,
                p.len(),
                q.len()
            )));
        }
        for i in 1..n {
            let (pi, qi) = (p[i - 1], q[i - 1]);
            if !pi.is_finite() || !qi.is_finite() {
                return Err(Error::InvalidSpec(format!("non-finite probability at state {i}")));
            }
            if pi <= 0.0 {
                return Err(Error::InvalidSpec(format!("p({i}) = {pi} must be positive")));
            }
            if i >= 2 && qi <= 0.0 {
                return Err(Error::InvalidSpec(format!("q({i}) = {qi} must be positive")));
            }
            if qi < 0.0 {
                return Err(Error::InvalidSpec(format!("q({i}) = {qi} is negative")));
            }
            if pi + qi > 1.0 + DEFAULT_TOL {
                return Err(Error::InvalidSpec(format!(
                    "p({i}) + q({i}) = {} exceeds 1",
                    pi + qi
                )));
            }
        }
        Ok(Self { n, p, q })
    }

    /// Constant birth probability `p` and death probability `q` on all
    /// interior states.
    pub fn constant(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(n, vec![p; n.saturating_sub(1)], vec![q; n.saturating_sub(1)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p(i)`, zero at the absorbing top.
    pub fn p(&self, i: usize) -> f64 {
        if (1..self.n).contains(&i) {
            self.p[i - 1]
        } else {
            0.0
        }
    }

    /// `q(i)`, zero at the absorbing top.
    pub fn q(&self, i: usize) -> f64 {
        if (1..self.n).contains(&i) {
            self.q[i - 1]
        } else {
            0.0
        }
    }

    pub fn births(&self) -> &[f64] {
        &self.p
    }

    pub fn deaths(&self) -> &[f64] {
        &self.q
    }

    /// Whether ruin is reachable, i.e. `q(1) > 0`.
    pub fn has_sink(&self) -> bool {
        self.q(1) > 0.0
    }

    /// The same chain on `{0, .., n}` with `n` made absorbing.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n {
            return Err(Error::InvalidSpec(format!(
                "cannot truncate a chain with N = {} to {n}",
                self.n
            )));
        }
        Self::new(n, self.p[..n - 1].to_vec(), self.q[..n - 1].to_vec())
    }

    /// The `(N+1) x (N+1)` stochastic matrix on `{0, .., N}`.
    pub fn transition_matrix(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n + 1, n + 1);
        m[(0, 0)] = 1.0;
        m[(n, n)] = 1.0;
        for i in 1..n {
            m[(i, i + 1)] = self.p(i);
            m[(i, i - 1)] = self.q(i);
            m[(i, i)] = 1.0 - self.p(i) - self.q(i);
        }
        m
    }

    /// The `N x N` substochastic block on `{1, .., N}` (sink removed).
    pub fn interior_matrix(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        m[(n - 1, n - 1)] = 1.0;
        for i in 1..n {
            m[(i - 1, i)] = self.p(i);
            if i >= 2 {
                m[(i - 1, i - 2)] = self.q(i);
            }
            m[(i - 1, i - 1)] = 1.0 - self.p(i) - self.q(i);
        }
        m
    }

    /// Eigenvalues of [`interior_matrix`](Self::interior_matrix), ascending;
    /// the last one is the unit eigenvalue of the absorbing top.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = self.block_eigenvalues(1, self.n - 1);
        ev.push(1.0);
        ev
    }

    /// Eigenvalues of the tridiagonal block on states `first..=last`,
    /// ascending. Empty when `first > last`.
    pub fn block_eigenvalues(&self, first: usize, last: usize) -> Vec<f64> {
        if first > last || first == 0 || last >= self.n {
            return Vec::new();
        }
        let diag: Vec<f64> = (first..=last).map(|i| 1.0 - self.p(i) - self.q(i)).collect();
        let off: Vec<f64> = (first..last).map(|i| (self.p(i) * self.q(i + 1)).sqrt()).collect();
        symmetric_tridiagonal_eigenvalues(&diag, &off)
    }

    /// Eigenvalues of the leading block on `{1, .., k}`.
    pub fn leading_block_eigenvalues(&self, k: usize) -> Vec<f64> {
        self.block_eigenvalues(1, k)
    }

    /// Eigenvalues of the trailing block on `{start + 1, .., N - 1}`.
    pub fn trailing_block_eigenvalues(&self, start: usize) -> Vec<f64> {
        self.block_eigenvalues(start + 1, self.n - 1)
    }

    /// `rho(i)` for `i = 1..N`, the probability of reaching `N` before `0`.
    pub fn win_probabilities(&self) -> Vec<f64> {
        // terms[n-1] = prod_{r=1}^{n-1} q(r)/p(r)
        let mut terms = Vec::with_capacity(self.n);
        let mut prod = 1.0;
        terms.push(prod);
        for r in 1..self.n {
            prod *= self.q(r) / self.p(r);
            terms.push(prod);
        }
        let total: f64 = terms.iter().sum();
        let mut acc = 0.0;
        terms
            .iter()
            .map(|t| {
                acc += t;
                acc / total
            })
            .collect()
    }

    /// Stochastic monotonicity: `p(i-1) + q(i) <= 1` for every pair of
    /// neighbouring states.
    pub fn is_monotone(&self) -> bool {
        (2..self.n).all(|i| self.p(i - 1) + self.q(i) <= 1.0 + DEFAULT_TOL)
    }

    /// Whether every eigenvalue of the interior block is `>= -tol`.
    ///
    /// This implies monotonicity, but a monotone chain can still have a
    /// negative eigenvalue.
    pub fn has_nonnegative_spectrum(&self, tol: f64) -> bool {
        self.eigenvalues().first().is_none_or(|l| *l >= -tol)
    }

    /// The ergodic chain whose Siegmund dual this chain is. Requires a
    /// reachable sink and monotonicity.
    pub fn siegmund_primal(&self) -> Result<ErgodicBDSpec> {
        if !self.has_sink() {
            return Err(Error::WrongCase(
                "a chain with q(1) = 0 is not the Siegmund dual of an ergodic chain".into(),
            ));
        }
        if !self.is_monotone() {
            return Err(Error::Monotonicity("p(i-1) + q(i) exceeds 1".into()));
        }
        // up'(i) = q(i) for i = 1..N-1, down'(i + 1) = p(i)
        ErgodicBDSpec::new(self.n, self.q.clone(), self.p.clone())
    }
}

/// Ergodic birth-death chain on `{1, .., M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicBDSpec {
    m: usize,
    /// `up[i - 1] = p'(i)` for `i = 1..M-1`.
    up: Vec<f64>,
    /// `down[i - 2] = q'(i)` for `i = 2..M`.
    down: Vec<f64>,
}

impl ErgodicBDSpec {
    pub fn new(m: usize, up: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpec("M must be at least 1".into()));
        }
        if up.len() != m - 1 || down.len() != m - 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} up and down probabilities, got {} and {}",
                m - 1,
                up.len(),
                down.len()
            )));
        }
        if let Some(v) = up.iter().chain(&down).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "ergodic rates must be positive, found {v}"
            )));
        }
        let spec = Self { m, up, down };
        for i in 1..=m {
            if spec.up(i) + spec.down(i) > 1.0 + DEFAULT_TOL {
                return Err(Error::InvalidSpec(format!(
                    "p'({i}) + q'({i}) exceeds 1"
                )));
            }
        }
        Ok(spec)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `p'(i)`, zero at `i = M`.
    pub fn up(&self, i: usize) -> f64 {
        if (1..self.m).contains(&i) {
            self.up[i - 1]
        } else {
            0.0
        }
    }

    /// `q'(i)`, zero at `i = 1`.
    pub fn down(&self, i: usize) -> f64 {
        if (2..=self.m).contains(&i) {
            self.down[i - 2]
        } else {
            0.0
        }
    }

    pub fn transition_matrix(&self) -> Matrix {
        let m = self.m;
        let mut out = Matrix::zeros(m, m);
        for i in 1..=m {
            if i < m {
                out[(i - 1, i)] = self.up(i);
            }
            if i > 1 {
                out[(i - 1, i - 2)] = self.down(i);
            }
            out[(i - 1, i - 1)] = 1.0 - self.up(i) - self.down(i);
        }
        out
    }

    /// Stationary law from detailed balance `pi(i+1)/pi(i) = p'(i)/q'(i+1)`.
    pub fn stationary(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.m);
        w.push(1.0);
        for i in 1..self.m {
            let last = w[i - 1];
            w.push(last * self.up(i) / self.down(i + 1));
        }
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    pub fn is_monotone(&self) -> bool {
        (2..=self.m).all(|i| self.up(i - 1) + self.down(i) <= 1.0 + DEFAULT_TOL)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let diag: Vec<f64> = (1..=self.m).map(|i| 1.0 - self.up(i) - self.down(i)).collect();
        let off: Vec<f64> = (1..self.m).map(|i| (self.up(i) * self.down(i + 1)).sqrt()).collect();
        symmetric_tridiagonal_eigenvalues(&diag, &off)
    }

    /// Siegmund dual with respect to the natural order on `{1, .., M}`:
    /// the gambler chain with `p(i) = q'(i+1)` and `q(i) = p'(i)`.
    pub fn siegmund_dual(&self) -> Result<BirthDeathSpec> {
        if !self.is_monotone() {
            return Err(Error::Monotonicity("p'(i-1) + q'(i) exceeds 1".into()));
        }
        let p = (1..self.m).map(|i| self.down(i + 1)).collect();
        let q = (1..self.m).map(|i| self.up(i)).collect();
        BirthDeathSpec::new(self.m, p, q)
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal
/// and off-diagonal, ascending.
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert_eq!(off.len(), n - 1);
    let mut t = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = diag[i];
        if i + 1 < n {
            t[(i, i + 1)] = off[i];
            t[(i + 1, i)] = off[i];
        }
    }
    let mut ev: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
