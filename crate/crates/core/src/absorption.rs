//! Generating functions and laws of absorption times.
//!
//! A geometric factor with eigenvalue `λ` is `(1-λ)s / (1-λs)`, the pgf of a
//! geometric time with success probability `1-λ`.

use std::sync::Arc;

use crate::bd::BirthDeathSpec;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::intertwine::{build_dual, dual_initial};
use crate::markov::{hitting_pgf, hitting_probabilities, partial_expected_times, SparseRows};
use crate::matrix::{is_absorbing, Matrix, DEFAULT_TOL};

/// Default residual mass at which power iteration stops.
pub const DEFAULT_EPS: f64 = 1e-12;
/// Largest number of steps taken when no horizon is given.
pub const STEP_CAP: usize = 1_000_000;

/// A (possibly defective) pgf kept in factored form.
#[derive(Debug, Clone)]
pub enum PgfExpr {
    /// `scale · prod_num g_λ(s) / prod_den g_λ(s)`.
    Factors { scale: f64, num: Vec<f64>, den: Vec<f64> },
    /// `scale · sum_i w_i f_i(s)`; weights may be negative.
    Mixture { scale: f64, terms: Vec<(f64, PgfExpr)> },
    /// `scale · sum_e w_e E_e[s^T]` where `T` hits `target` in `chain`.
    Chain {
        scale: f64,
        chain: Arc<Matrix>,
        weights: Vec<f64>,
        target: usize,
    },
}

impl PgfExpr {
    pub fn factors(scale: f64, num: Vec<f64>, den: Vec<f64>) -> Self {
        PgfExpr::Factors { scale, num, den }
    }

    pub fn mixture(scale: f64, terms: Vec<(f64, PgfExpr)>) -> Self {
        PgfExpr::Mixture { scale, terms }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match self {
            PgfExpr::Factors { scale, num, den } => {
                // powers of s are collected so that s = 0 is not 0/0
                let power = num.len() as i32 - den.len() as i32;
                let g = |l: &f64| (1.0 - l) / (1.0 - l * s);
                let top: f64 = num.iter().map(g).product();
                let bottom: f64 = den.iter().map(g).product();
                Ok(scale * top / bottom * s.powi(power))
            }
            PgfExpr::Mixture { scale, terms } => {
                let mut acc = 0.0;
                for (w, f) in terms {
                    acc += w * f.eval(s)?;
                }
                Ok(scale * acc)
            }
            PgfExpr::Chain {
                scale,
                chain,
                weights,
                target,
            } => {
                let g = hitting_pgf(chain, *target, s)?;
                Ok(scale * weights.iter().zip(&g).map(|(w, v)| w * v).sum::<f64>())
            }
        }
    }

    /// Total mass, `pgf(1)`.
    pub fn at_one(&self) -> Result<f64> {
        match self {
            PgfExpr::Factors { scale, .. } => Ok(*scale),
            PgfExpr::Mixture { scale, terms } => {
                let mut acc = 0.0;
                for (w, f) in terms {
                    acc += w * f.at_one()?;
                }
                Ok(scale * acc)
            }
            PgfExpr::Chain {
                scale,
                chain,
                weights,
                target,
            } => {
                let h = hitting_probabilities(chain, *target)?;
                Ok(scale * weights.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
            }
        }
    }

    /// Partial expectation `pgf'(1) = E[T; absorbed at the target]`.
    pub fn mean(&self) -> Result<f64> {
        match self {
            PgfExpr::Factors { scale, num, den } => {
                let inv = |l: &f64| 1.0 / (1.0 - l);
                Ok(scale * (num.iter().map(inv).sum::<f64>() - den.iter().map(inv).sum::<f64>()))
            }
            PgfExpr::Mixture { scale, terms } => {
                let mut acc = 0.0;
                for (w, f) in terms {
                    acc += w * f.mean()?;
                }
                Ok(scale * acc)
            }
            PgfExpr::Chain {
                scale,
                chain,
                weights,
                target,
            } => {
                let m = partial_expected_times(chain, *target)?;
                Ok(scale * weights.iter().zip(&m).map(|(w, v)| w * v).sum::<f64>())
            }
        }
    }
}

/// Eigenvalues of the block on `{1, .., N-1}`.
fn transient_spectrum(spec: &BirthDeathSpec) -> Vec<f64> {
    spec.block_eigenvalues(1, spec.n() - 1)
}

/// Hitting time of `N` from 1 when ruin is impossible: a sum of independent
/// geometric times, one per transient eigenvalue.
pub fn pgf_keilson(spec: &BirthDeathSpec) -> Result<PgfExpr> {
    if spec.has_sink() {
        return Err(Error::WrongCase("q(1) > 0; use the two-sided pgf".into()));
    }
    Ok(PgfExpr::factors(1.0, transient_spectrum(spec), Vec::new()))
}

/// Hitting time of `N` from `start` when ruin is impossible: the full
/// product divided by the one over the leading block `{1, .., start-1}`.
pub fn pgf_interior(spec: &BirthDeathSpec, start: usize) -> Result<PgfExpr> {
    if spec.has_sink() {
        return Err(Error::WrongCase("q(1) > 0; use the two-sided pgf".into()));
    }
    if start == 0 || start > spec.n() {
        return Err(Error::StartOutOfRange(format!("{start} (N = {})", spec.n())));
    }
    let den = if start == 1 {
        Vec::new()
    } else {
        spec.leading_block_eigenvalues(start - 1)
    };
    Ok(PgfExpr::factors(1.0, transient_spectrum(spec), den))
}

/// Defective pgfs of the time to win and the time to lose from `start`.
pub fn pgf_two_sided(spec: &BirthDeathSpec, start: usize) -> Result<(PgfExpr, PgfExpr)> {
    if !spec.has_sink() {
        return Err(Error::WrongCase("q(1) = 0; ruin is impossible".into()));
    }
    let n = spec.n();
    if start == 0 || start >= n {
        return Err(Error::StartOutOfRange(format!("{start} is not transient (N = {n})")));
    }
    let rho = spec.win_probabilities()[start - 1];
    let full = transient_spectrum(spec);
    let win = PgfExpr::factors(rho, full.clone(), spec.leading_block_eigenvalues(start - 1));
    let lose = PgfExpr::factors(1.0 - rho, full, spec.trailing_block_eigenvalues(start));
    Ok((win, lose))
}

/// Defective pgf of the time to win in a game started from `nu_star` (a law
/// on the cells): `prod_j rho_j(1) · sum_ê ν̂(ê) E_ê[s^T̂]`.
pub fn pgf_multidim(game: &GameSpec, nu_star: &[f64]) -> Result<PgfExpr> {
    if matches!(game.coeffs(), crate::game::Coefficients::Matrices(_)) {
        return Err(Error::MatrixCoefficients("the absorption-time pipeline"));
    }
    let dual = build_dual(game)?;
    let nu_hat = dual_initial(&dual.link, nu_star)?;
    let target = dual.pure_birth.win_index();
    Ok(PgfExpr::Chain {
        scale: dual.link.iso_value(),
        chain: Arc::new(dual.pure_birth.matrix().clone()),
        weights: nu_hat.values,
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonOpts {
    /// Fixed number of steps; when `None` the iteration runs until the
    /// residual drops below `eps`, up to [`STEP_CAP`].
    pub horizon: Option<usize>,
    pub eps: f64,
}

impl Default for HorizonOpts {
    fn default() -> Self {
        Self {
            horizon: None,
            eps: DEFAULT_EPS,
        }
    }
}

/// Law of the hitting time of one absorbing target, `pmf[t] = P(T = t,
/// absorbed at target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionDist {
    pub pmf: Vec<f64>,
    /// Mass absorbed at the target after the last step.
    pub tail: f64,
    /// Total probability of absorption at the target.
    pub absorbed: f64,
    pub target: usize,
    pub eps: f64,
}

impl AbsorptionDist {
    pub fn cdf(&self) -> Vec<f64> {
        self.pmf
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    /// The law given absorption at the target.
    pub fn conditioned(&self) -> Vec<f64> {
        self.pmf.iter().map(|v| v / self.absorbed).collect()
    }

    /// `E[T; absorbed at target]`, refusing laws with a tail above `eps`.
    pub fn expected_time(&self) -> Result<f64> {
        if self.tail.abs() > self.eps {
            return Err(Error::Horizon {
                steps: self.pmf.len().saturating_sub(1),
                residual: self.tail,
            });
        }
        Ok(self.pmf.iter().enumerate().map(|(t, v)| t as f64 * v).sum())
    }

    /// `value · pmf`, for mixtures scaled by a winning probability.
    pub fn scaled(&self, value: f64) -> Self {
        Self {
            pmf: self.pmf.iter().map(|v| v * value).collect(),
            tail: self.tail * value,
            absorbed: self.absorbed * value,
            ..self.clone()
        }
    }
}

/// Power iteration `x_t = ν P^t`, recording `x_t(target) - x_{t-1}(target)`.
///
/// `nu` may be signed. The iteration stops once the mass still headed for
/// the target is below `eps`, or at the horizon.
pub fn absorb_dist(p: &Matrix, nu: &[f64], target: usize, opts: HorizonOpts) -> Result<AbsorptionDist> {
    if nu.len() != p.rows() {
        return Err(Error::Shape(format!("initial law of length {} for {} states", nu.len(), p.rows())));
    }
    if target >= p.rows() {
        return Err(Error::Index {
            index: target,
            size: p.rows(),
        });
    }
    if !is_absorbing(p, target, DEFAULT_TOL) {
        return Err(Error::NotAbsorbing { index: target });
    }
    let h = hitting_probabilities(p, target)?;
    let absorbed: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
    let sparse = SparseRows::new(p);
    let mut x = nu.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut pmf = vec![x[target]];
    let mut seen = x[target];
    let limit = opts.horizon.unwrap_or(STEP_CAP);
    // mass still heading to the target, measured without sign cancellation
    let pending = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&h)
            .enumerate()
            .filter(|(i, _)| *i != target)
            .map(|(_, (a, b))| (a * b).abs())
            .sum()
    };
    let mut t = 0;
    while t < limit && pending(&x) >= opts.eps {
        sparse.step(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        t += 1;
        let mut v = x[target] - seen;
        seen = x[target];
        if v < 0.0 {
            if v < -DEFAULT_TOL {
                return Err(Error::NegativeMass { t, value: v });
            }
            v = 0.0;
        }
        pmf.push(v);
    }
    let tail: f64 = x
        .iter()
        .zip(&h)
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, (a, b))| a * b)
        .sum();
    if opts.horizon.is_none() && pending(&x) >= opts.eps {
        return Err(Error::Horizon {
            steps: t,
            residual: tail,
        });
    }
    Ok(AbsorptionDist {
        pmf,
        tail,
        absorbed,
        target,
        eps: opts.eps,
    })
}

/// Convolution of two sequences, truncated to `len`.
pub fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// The first `len` terms of the law of a sum of independent geometric
/// times with success probabilities `1 - λ_k`.
pub fn geometric_convolution(lambdas: &[f64], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    if len > 0 {
        acc[0] = 1.0;
    }
    for &l in lambdas {
        let geo: Vec<f64> = (0..len)
            .map(|t| if t == 0 { 0.0 } else { (1.0 - l) * l.powi(t as i32 - 1) })
            .collect();
        acc = convolve(&acc, &geo, len);
    }
    acc
}
