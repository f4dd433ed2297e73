//! Spectral intertwinings between a game and its pure-birth dual.
//!
//! For a monotone birth-death factor with ascending eigenvalues
//! `λ_1 <= .. <= λ_N = 1` the link rows are the first rows of
//! `Q_k = prod_{r<k} (P' - λ_r I) / (1 - λ_r)`, and `Λ P' = P̂ Λ` for the
//! pure-birth chain that holds with probability `λ_i` and otherwise steps up.
//! Products of such links intertwine the Kronecker mixtures.

use std::collections::BTreeSet;

use crate::absorption::PgfExpr;
use crate::bd::{BirthDeathSpec, ErgodicBDSpec};
use crate::error::{Error, Result, StateLabel};
use crate::game::{build_game, AbsorbingChain, GameSpec, StateSpace};
use crate::matrix::{kron_all, Matrix, DEFAULT_TOL};

/// Eigenvalues above `-EIGEN_TOL` count as nonnegative.
pub const EIGEN_TOL: f64 = 1e-12;

/// Checks monotonicity and the spectrum of one factor, returning its
/// ascending eigenvalues with rounding noise below zero removed.
pub fn checked_spectrum(spec: &BirthDeathSpec, dim: usize) -> Result<Vec<f64>> {
    if !spec.is_monotone() {
        return Err(Error::Monotonicity(format!("dimension {}", dim + 1)));
    }
    let mut ev = spec.eigenvalues();
    if let Some(&low) = ev.first() {
        if low < -EIGEN_TOL {
            return Err(Error::NegativeSpectrum { dim: dim + 1, value: low });
        }
    }
    for v in ev.iter_mut() {
        *v = v.max(0.0);
    }
    if let Some(&v) = ev[..ev.len() - 1].iter().find(|v| 1.0 - **v < DEFAULT_TOL) {
        return Err(Error::DegenerateSpectrum { dim: dim + 1, value: v });
    }
    Ok(ev)
}

/// `Q_1, .., Q_N` for one factor.
pub fn spectral_polynomials(spec: &BirthDeathSpec) -> Result<Vec<Matrix>> {
    let ev = checked_spectrum(spec, 0)?;
    let p = spec.interior_matrix();
    let n = spec.n();
    let mut out = Vec::with_capacity(n);
    let mut q = Matrix::identity(n);
    out.push(q.clone());
    for &lambda in &ev[..n - 1] {
        let mut shifted = p.clone();
        for i in 0..n {
            shifted[(i, i)] -= lambda;
        }
        q = q.matmul(&shifted)?.scale(1.0 / (1.0 - lambda));
        out.push(q.clone());
    }
    Ok(out)
}

fn link_from_spectrum(spec: &BirthDeathSpec, ev: &[f64]) -> Matrix {
    let p = spec.interior_matrix();
    let n = spec.n();
    let mut link = Matrix::zeros(n, n);
    let mut row = vec![0.0; n];
    row[0] = 1.0;
    for k in 0..n {
        if k > 0 {
            let lambda = ev[k - 1];
            let moved = p.left_mul(&row);
            row = moved
                .iter()
                .zip(&row)
                .map(|(m, r)| (m - lambda * r) / (1.0 - lambda))
                .collect();
        }
        for (j, v) in row.iter().enumerate() {
            link[(k, j)] = *v;
        }
    }
    link
}

/// The link of one factor: row `k` is the first row of `Q_k`.
pub fn spectral_link_1d(spec: &BirthDeathSpec) -> Result<Matrix> {
    let ev = checked_spectrum(spec, 0)?;
    Ok(link_from_spectrum(spec, &ev))
}

/// One-dimensional pure-birth chain holding with probability `ev[i]`.
pub fn pure_birth_1d(ev: &[f64]) -> Matrix {
    let n = ev.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = ev[i];
        if i + 1 < n {
            m[(i, i + 1)] = 1.0 - ev[i];
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct SpectralLink {
    matrix: Matrix,
    per_dim: Vec<Matrix>,
    eigen: Vec<Vec<f64>>,
    iso_value: f64,
    space: StateSpace,
}

impl SpectralLink {
    pub fn new(game_dims: &[BirthDeathSpec]) -> Result<Self> {
        let mut per_dim = Vec::with_capacity(game_dims.len());
        let mut eigen = Vec::with_capacity(game_dims.len());
        for (j, spec) in game_dims.iter().enumerate() {
            let ev = checked_spectrum(spec, j)?;
            per_dim.push(link_from_spectrum(spec, &ev));
            eigen.push(ev);
        }
        let matrix = kron_all(per_dim.iter())?;
        let iso_value = game_dims.iter().map(|s| s.win_probabilities()[0]).product();
        let space = StateSpace::new(game_dims.iter().map(BirthDeathSpec::n).collect());
        Ok(Self {
            matrix,
            per_dim,
            eigen,
            iso_value,
            space,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn per_dim(&self) -> &[Matrix] {
        &self.per_dim
    }

    /// Ascending eigenvalues of each factor.
    pub fn eigen(&self) -> &[Vec<f64>] {
        &self.eigen
    }

    /// `prod_j rho_j(1)`, the expected value of the link's corner entry.
    pub fn iso_value(&self) -> f64 {
        self.iso_value
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Largest deviation of the last column from `iso_value · e_N`.
    pub fn isolation_residual(&self) -> f64 {
        let n = self.matrix.rows();
        (0..n)
            .map(|i| {
                let want = if i + 1 == n { self.iso_value } else { 0.0 };
                (self.matrix[(i, n - 1)] - want).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Solves `x Λ = y` factor by factor.
    pub fn solve_left(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.matrix.rows() {
            return Err(Error::Shape(format!(
                "vector of length {} for a link on {} states",
                y.len(),
                self.matrix.rows()
            )));
        }
        let sizes = self.space.sizes();
        let mut x = y.to_vec();
        let mut inner = x.len();
        for (j, link) in self.per_dim.iter().enumerate() {
            let n = sizes[j];
            inner /= n;
            let outer = x.len() / (n * inner);
            let mut fiber = vec![0.0; n];
            for o in 0..outer {
                for r in 0..inner {
                    let at = |i: usize| o * n * inner + i * inner + r;
                    for i in 0..n {
                        fiber[i] = x[at(i)];
                    }
                    // Λ_j lower triangular: back substitution on x Λ_j = fiber
                    for i in (0..n).rev() {
                        let mut acc = fiber[i];
                        for k in i + 1..n {
                            acc -= x[at(k)] * link[(k, i)];
                        }
                        let d = link[(i, i)];
                        if d == 0.0 {
                            return Err(Error::Singular("spectral link"));
                        }
                        x[at(i)] = acc / d;
                    }
                }
            }
        }
        Ok(x)
    }
}

/// Pure-birth chain on the cells.
#[derive(Debug, Clone)]
pub struct PureBirthChain {
    matrix: Matrix,
    space: StateSpace,
}

impl PureBirthChain {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.matrix.rows()).map(|i| self.matrix[(i, i)]).collect()
    }

    pub fn win_index(&self) -> usize {
        self.space.cells() - 1
    }

    /// Whether every positive entry points to a coordinatewise larger cell.
    pub fn is_pure_birth(&self) -> bool {
        let n = self.matrix.rows();
        (0..n).all(|i| (0..n).all(|j| self.matrix[(i, j)] == 0.0 || self.space.below(i, j)))
    }
}

/// Move probabilities of the pure-birth dual, straight from the factor
/// spectra: stepping up exactly the coordinates in `B` from cell `i` has
/// probability `prod_{j∈B}(1-λ_{i_j}) · sum_{k: B⊆A_k} b_k prod_{j∈A_k\B} λ_{i_j}`.
fn pure_birth_matrix(space: &StateSpace, subsets: &[Vec<usize>], b: &[f64], eigen: &[Vec<f64>]) -> Result<Matrix> {
    let d = space.d();
    let masks: Vec<u64> = subsets.iter().map(|a| a.iter().fold(0u64, |m, j| m | 1 << j)).collect();
    let mut moves = BTreeSet::new();
    for &a in &masks {
        // every nonempty subset of a
        let mut s = a;
        while s != 0 {
            moves.insert(s);
            s = (s - 1) & a;
        }
    }
    let n = space.cells();
    let sizes = space.sizes();
    let mut m = Matrix::zeros(n, n);
    for c in 0..n {
        let cell = space.cell(c);
        let lam: Vec<f64> = (0..d).map(|j| eigen[j][cell[j] - 1]).collect();
        let hold: f64 = masks
            .iter()
            .zip(b)
            .map(|(&a, bk)| bk * (0..d).filter(|j| a >> j & 1 == 1).map(|j| lam[j]).product::<f64>())
            .sum();
        m[(c, c)] = hold;
        for &mv in &moves {
            let dims_b: Vec<usize> = (0..d).filter(|j| mv >> j & 1 == 1).collect();
            let up: f64 = dims_b.iter().map(|&j| 1.0 - lam[j]).product();
            let mix: f64 = masks
                .iter()
                .zip(b)
                .filter(|(a, _)| **a & mv == mv)
                .map(|(&a, bk)| {
                    bk * (0..d)
                        .filter(|j| a >> j & 1 == 1 && mv >> j & 1 == 0)
                        .map(|j| lam[j])
                        .product::<f64>()
                })
                .sum();
            let value = up * mix;
            let blocked = dims_b.iter().any(|&j| cell[j] == sizes[j]);
            if blocked {
                if value.abs() > DEFAULT_TOL {
                    return Err(Error::Internal(format!(
                        "move out of the state space with probability {value:e}"
                    )));
                }
                continue;
            }
            if value < -DEFAULT_TOL {
                return Err(Error::Nonnegativity {
                    state: StateLabel(cell),
                    moves: dims_b.iter().map(|j| j + 1).collect(),
                    value,
                });
            }
            let mut target = cell.clone();
            for &j in &dims_b {
                target[j] += 1;
            }
            m[(c, space.index(&target)?)] = value.max(0.0);
        }
        if hold < -DEFAULT_TOL {
            return Err(Error::Nonnegativity {
                state: StateLabel(cell),
                moves: Vec::new(),
                value: hold,
            });
        }
        m[(c, c)] = hold.max(0.0);
    }
    Ok(m)
}

/// `sum_k b_k ⊗_j R̂_j^(k)`, the Kronecker form of the pure-birth dual.
pub fn pure_birth_mixture(game: &GameSpec, eigen: &[Vec<f64>]) -> Result<Matrix> {
    let b = game.scalar_coeffs("the pure-birth dual")?;
    let hats: Vec<Matrix> = eigen.iter().map(|ev| pure_birth_1d(ev)).collect();
    let ids: Vec<Matrix> = eigen.iter().map(|ev| Matrix::identity(ev.len())).collect();
    let n = game.space().cells();
    let mut total = Matrix::zeros(n, n);
    for (a, bk) in game.subsets().iter().zip(b) {
        let term = kron_all((0..game.d()).map(|j| if a.contains(&j) { &hats[j] } else { &ids[j] }))?;
        total.add_scaled(*bk, &term)?;
    }
    Ok(total)
}

/// A game, its spectral link and its pure-birth dual.
#[derive(Debug, Clone)]
pub struct Dual {
    pub chain: AbsorbingChain,
    pub link: SpectralLink,
    pub pure_birth: PureBirthChain,
    /// `max |Λ P' - P̂ Λ|`.
    pub intertwining_residual: f64,
    /// `max |P̂ - sum_k b_k ⊗ R̂|`.
    pub mixture_residual: f64,
}

pub fn build_dual(game: &GameSpec) -> Result<Dual> {
    let b = game.scalar_coeffs("the absorption-time pipeline")?;
    let chain = build_game(game)?;
    let link = SpectralLink::new(game.dims())?;
    let space = game.space();
    let hat = pure_birth_matrix(&space, game.subsets(), b, link.eigen())?;
    let mixture_residual = hat.max_abs_diff(&pure_birth_mixture(game, link.eigen())?);
    let lhs = link.matrix().matmul(chain.interior())?;
    let rhs = hat.matmul(link.matrix())?;
    let intertwining_residual = lhs.max_abs_diff(&rhs);
    Ok(Dual {
        chain,
        link,
        pure_birth: PureBirthChain { matrix: hat, space },
        intertwining_residual,
        mixture_residual,
    })
}

/// `ν̂ = ν* Λ⁻¹`, possibly signed.
#[derive(Debug, Clone, PartialEq)]
pub struct DualInitial {
    pub values: Vec<f64>,
    pub is_distribution: bool,
}

pub fn dual_initial(link: &SpectralLink, nu_star: &[f64]) -> Result<DualInitial> {
    let values = link.solve_left(nu_star)?;
    let is_distribution = values.iter().all(|v| *v >= -DEFAULT_TOL);
    Ok(DualInitial { values, is_distribution })
}

/// Every cell charged by `nu_star` has some cell above it where `nu_hat`
/// is positive.
pub fn support_property(space: &StateSpace, nu_star: &[f64], nu_hat: &[f64]) -> bool {
    (0..nu_star.len())
        .filter(|&e| nu_star[e] != 0.0)
        .all(|e| (0..nu_hat.len()).any(|f| space.below(e, f) && nu_hat[f] > DEFAULT_TOL))
}

/// Sharp strong stationary dual of a monotone ergodic chain.
///
/// Returns `(P*, Λ*)` with `Λ*(i, j) = π(j)/H(i)` for `j <= i`, where `H` is
/// the cumulative stationary law, so that `Λ* P_X = P* Λ*`.
pub fn classical_ssd_1d(x: &ErgodicBDSpec) -> Result<(Matrix, Matrix)> {
    if !x.is_monotone() {
        return Err(Error::Monotonicity("p'(i-1) + q'(i) exceeds 1".into()));
    }
    let m = x.m();
    let pi = x.stationary();
    let h: Vec<f64> = pi
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    // 1-based accessors
    let hh = |i: usize| if i == 0 { 0.0 } else { h[i - 1] };
    let mut p = Matrix::zeros(m, m);
    let mut link = Matrix::zeros(m, m);
    for i in 1..=m {
        if i > 1 {
            p[(i - 1, i - 2)] = hh(i - 1) / hh(i) * x.up(i);
        }
        if i < m {
            p[(i - 1, i)] = hh(i + 1) / hh(i) * x.down(i + 1);
        }
        p[(i - 1, i - 1)] = 1.0 - x.up(i) - x.down(i + 1);
        for j in 1..=i {
            link[(i - 1, j - 1)] = pi[j - 1] / hh(i);
        }
    }
    Ok((p, link))
}

/// The strong stationary dual as a gambler chain without a sink.
pub fn classical_ssd_spec(x: &ErgodicBDSpec) -> Result<BirthDeathSpec> {
    let (p, _) = classical_ssd_1d(x)?;
    let m = x.m();
    let births = (1..m).map(|i| p[(i - 1, i)]).collect();
    let deaths = (1..m).map(|i| if i > 1 { p[(i - 1, i - 2)] } else { 0.0 }).collect();
    BirthDeathSpec::new(m, births, deaths)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lazy Ehrenfest chain of `N - 1` particles on `{1, .., N}`:
/// `p'(i) = (N-i)/(2(N-1))`, `q'(i) = (i-1)/(2(N-1))`.
pub fn ehrenfest_chain(n: usize) -> Result<ErgodicBDSpec> {
    if n < 2 {
        return Err(Error::InvalidSpec("the Ehrenfest chain needs N >= 2".into()));
    }
    let scale = 2.0 * (n - 1) as f64;
    let up = (1..n).map(|i| (n - i) as f64 / scale).collect();
    let down = (2..=n).map(|i| (i - 1) as f64 / scale).collect();
    ErgodicBDSpec::new(n, up, down)
}

/// `Λ̂(i, j) = C(i-1, j-1) / 2^(i-1)`, linking the Ehrenfest chain to its
/// pure-birth spectral dual.
pub fn ehrenfest_dual_link(n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 1..=n {
        for j in 1..=i {
            m[(i - 1, j - 1)] = binom(i - 1, j - 1) / 2f64.powi(i as i32 - 1);
        }
    }
    m
}

/// `Λ̂⁻¹(i, j) = (-1)^(j-i) 2^(j-1) C(i-1, j-1)`: row `i` holds the
/// coefficients of `(2x - 1)^(i-1)`.
pub fn ehrenfest_dual_link_inverse(n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 1..=n {
        for j in 1..=i {
            let sign = if (i - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            m[(i - 1, j - 1)] = sign * 2f64.powi(j as i32 - 1) * binom(i - 1, j - 1);
        }
    }
    m
}

/// Closed forms for the absorption time of the Ehrenfest strong stationary
/// dual started at `m`.
#[derive(Debug, Clone)]
pub struct EhrenfestForms {
    pub nu_hat: Vec<f64>,
    pub pgf: PgfExpr,
    pub expected: f64,
}

pub fn ehrenfest_closed_forms(n: usize, m: usize) -> Result<EhrenfestForms> {
    if n < 2 {
        return Err(Error::InvalidSpec("the Ehrenfest chain needs N >= 2".into()));
    }
    if m == 0 || m > n {
        return Err(Error::StartOutOfRange(format!("{m} (N = {n})")));
    }
    let mut nu_hat = vec![0.0; n];
    if m == n {
        nu_hat[n - 1] = 1.0;
    } else {
        let denom_sum: f64 = (0..m).map(|k| binom(n - 1, k)).sum();
        for j in 1..=m {
            let sign = if (m + j).is_multiple_of(2) { 1.0 } else { -1.0 };
            nu_hat[j - 1] = 2f64.powi(j as i32 - 1) * sign * (m - j + 1) as f64 * binom(n - 1, m) * binom(m, j - 1)
                / ((n - j) as f64 * denom_sum);
        }
    }
    let lambda = |k: usize| (k - 1) as f64 / (n - 1) as f64;
    let terms = (1..=n)
        .filter(|j| nu_hat[j - 1] != 0.0)
        .map(|j| {
            let factors = (j..n).map(lambda).collect();
            (nu_hat[j - 1], PgfExpr::factors(1.0, factors, Vec::new()))
        })
        .collect();
    let expected = (n - 1) as f64
        * (1..=n)
            .map(|j| nu_hat[j - 1] * (j..n).map(|k| 1.0 / (n - k) as f64).sum::<f64>())
            .sum::<f64>();
    Ok(EhrenfestForms {
        nu_hat,
        pgf: PgfExpr::mixture(1.0, terms),
        expected,
    })
}
