//! Every applicable identity check for one game, as a flat report.

use serde::{Deserialize, Serialize};

use crate::absorption::{absorb_dist, geometric_convolution, pgf_multidim, pgf_two_sided, HorizonOpts};
use crate::error::Error;
use crate::game::{build_game, check_communication, Coefficients, GameSpec};
use crate::intertwine::{build_dual, dual_initial, support_property};
use crate::markov::{charpoly_identity_residual, hitting_pgf};
use crate::siegmund::{
    duality_residual, product_order, siegmund_dual, siegmund_primal, win_prob_fundamental, win_prob_product,
    win_prob_via_stationary, OrderMatrix,
};

pub const WIN_PROB_TOL: f64 = 1e-9;
pub const DUALITY_TOL: f64 = 1e-10;
pub const INTERTWINING_TOL: f64 = 1e-10;
pub const MIXTURE_TOL: f64 = 1e-12;
pub const CHARPOLY_TOL: f64 = 1e-7;
pub const DISTRIBUTION_TOL: f64 = 1e-9;
pub const PGF_TOL: f64 = 1e-10;
/// Eigenvalue gaps below this are flagged as near-degenerate.
pub const GAP_WARNING: f64 = 1e-9;

const PGF_POINTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    fn residual(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            pass: residual <= tol,
            residual: Some(residual),
            detail: None,
        }
    }

    fn failed(name: impl Into<String>, err: impl ToString) -> Self {
        Self {
            name: name.into(),
            pass: false,
            residual: None,
            detail: Some(err.to_string()),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Checks that do not apply to this game, with the reason.
    pub skipped: Vec<String>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Runs the suite for `game` started at the cell `start` (1-based).
pub fn verify(game: &GameSpec, start: &[usize]) -> VerifyReport {
    let mut checks = Vec::new();
    let mut skipped = Vec::new();

    let chain = match build_game(game) {
        Ok(c) => {
            checks.push(Check::residual("stochastic_mixture", 0.0, 0.0));
            checks.push(Check {
                name: "communication_class".into(),
                pass: check_communication(&c),
                residual: None,
                detail: None,
            });
            c
        }
        Err(e @ Error::Communication(_)) => {
            checks.push(Check::failed("communication_class", e));
            return VerifyReport { checks, skipped };
        }
        Err(e) => {
            checks.push(Check::failed("stochastic_mixture", e));
            return VerifyReport { checks, skipped };
        }
    };
    let space = chain.space().clone();
    let nu_star = match space.delta(start) {
        Ok(v) => v,
        Err(e) => {
            checks.push(Check::failed("start_state", e));
            return VerifyReport { checks, skipped };
        }
    };
    let start_index = space.index(start).unwrap_or(0);

    // winning probabilities by three routes
    let product = win_prob_product(game);
    match (win_prob_fundamental(&chain), win_prob_via_stationary(&chain)) {
        (Ok(solve), Ok(stat)) => {
            let r = sup_diff(&product, &solve).max(sup_diff(&product, &stat));
            checks.push(Check::residual("win_prob_agreement", r, WIN_PROB_TOL));
        }
        (Err(e), _) | (_, Err(e)) => checks.push(Check::failed("win_prob_agreement", e)),
    }

    // Siegmund duality of the interior kernel with its ergodic primal
    match product_order(space.sizes()).and_then(|order| {
        let primal = siegmund_primal(chain.interior(), &order)?;
        let mut r: f64 = 0.0;
        for n in 1..=4 {
            r = r.max(duality_residual(&primal, chain.interior(), &order, n)?);
        }
        Ok((primal.min_entry(), r))
    }) {
        Ok((min_entry, r)) => {
            let mut c = Check::residual("siegmund_identity", r, DUALITY_TOL);
            if min_entry < -DUALITY_TOL {
                c.pass = false;
                c.detail = Some(format!("ergodic primal has negative entry {min_entry:e}"));
            }
            checks.push(c);
        }
        Err(e) => checks.push(Check::failed("siegmund_identity", e)),
    }
    for (j, spec) in game.dims().iter().enumerate() {
        if !spec.has_sink() {
            continue;
        }
        let name = format!("siegmund_bd_dual[{}]", j + 1);
        match spec.siegmund_primal().and_then(|x| {
            let dual = siegmund_dual(&x.transition_matrix(), &OrderMatrix::total(spec.n()))?;
            Ok(dual.max_abs_diff(&spec.interior_matrix()))
        }) {
            Ok(r) => checks.push(Check::residual(name, r, DUALITY_TOL)),
            Err(e) => checks.push(Check::failed(name, e)),
        }
    }

    // one-dimensional closed forms
    if game.d() == 1 && matches!(game.coeffs(), Coefficients::Scalars(b) if b.len() == 1 && game.subsets()[0] == [0]) {
        let spec = &game.dims()[0];
        if !spec.has_sink() {
            let n = spec.n();
            let p = spec.transition_matrix();
            let mut nu = vec![0.0; n + 1];
            nu[1] = 1.0;
            match absorb_dist(&p, &nu, n, HorizonOpts::default()) {
                Ok(dist) => {
                    let conv = geometric_convolution(&spec.block_eigenvalues(1, n - 1), dist.pmf.len());
                    checks.push(Check::residual("keilson_factorization", sup_diff(&dist.pmf, &conv), DISTRIBUTION_TOL));
                }
                Err(e) => checks.push(Check::failed("keilson_factorization", e)),
            }
        } else if start[0] < spec.n() {
            let res = pgf_two_sided(spec, start[0]).and_then(|(win, lose)| {
                let p = spec.transition_matrix();
                let mut r: f64 = 0.0;
                for s in PGF_POINTS {
                    r = r.max((win.eval(s)? - hitting_pgf(&p, spec.n(), s)?[start[0]]).abs());
                    r = r.max((lose.eval(s)? - hitting_pgf(&p, 0, s)?[start[0]]).abs());
                }
                Ok(r)
            });
            match res {
                Ok(r) => checks.push(Check::residual("two_sided_pgf", r, PGF_TOL)),
                Err(e) => checks.push(Check::failed("two_sided_pgf", e)),
            }
        }
    }

    if matches!(game.coeffs(), Coefficients::Matrices(_)) {
        skipped.push("absorption-time checks: matrix-valued mixing coefficients".into());
        return VerifyReport { checks, skipped };
    }

    let dual = match build_dual(game) {
        Ok(d) => {
            checks.push(Check::residual("pure_birth_nonnegativity", 0.0, 0.0));
            d
        }
        Err(e @ Error::Nonnegativity { .. }) => {
            checks.push(Check::failed("pure_birth_nonnegativity", e));
            return VerifyReport { checks, skipped };
        }
        Err(e) => {
            checks.push(Check::failed("spectral_link", e));
            return VerifyReport { checks, skipped };
        }
    };
    checks.push(Check::residual("pure_birth_mixture_form", dual.mixture_residual, MIXTURE_TOL));
    checks.push(Check::residual("intertwining", dual.intertwining_residual, INTERTWINING_TOL));
    checks.push(Check::residual("isolation", dual.link.isolation_residual(), INTERTWINING_TOL));
    checks.push(Check {
        name: "pure_birth_structure".into(),
        pass: dual.pure_birth.is_pure_birth(),
        residual: None,
        detail: None,
    });

    let diag = dual.pure_birth.diag();
    match charpoly_identity_residual(chain.interior(), &diag) {
        Ok(r) => {
            let mut c = Check::residual("diagonal_eigenvalues", r, CHARPOLY_TOL);
            let mut sorted = diag.clone();
            sorted.sort_by(f64::total_cmp);
            let gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .filter(|g| *g > 0.0)
                .fold(f64::INFINITY, f64::min);
            if gap < GAP_WARNING {
                c = c.with_detail(format!("warning: near-degenerate spectrum, minimum gap {gap:e}"));
            }
            checks.push(c);
        }
        Err(e) => checks.push(Check::failed("diagonal_eigenvalues", e)),
    }

    // law of the winning time: primal vs ν̂-mixture of the dual
    let res = dual_initial(&dual.link, &nu_star).and_then(|nu_hat| {
        let support = support_property(&space, &nu_star, &nu_hat.values);
        let primal = absorb_dist(chain.matrix(), &chain.lift(&nu_star), chain.win_index(), HorizonOpts::default())?;
        let mixed = absorb_dist(dual.pure_birth.matrix(), &nu_hat.values, dual.pure_birth.win_index(), HorizonOpts::default())?
            .scaled(dual.link.iso_value());
        Ok((support, sup_diff(&primal.pmf, &mixed.pmf)))
    });
    match res {
        Ok((support, r)) => {
            checks.push(Check {
                name: "dual_initial_support".into(),
                pass: support,
                residual: None,
                detail: None,
            });
            checks.push(Check::residual("distribution_equality", r, DISTRIBUTION_TOL));
        }
        Err(e) => checks.push(Check::failed("distribution_equality", e)),
    }

    let res = pgf_multidim(game, &nu_star).and_then(|pgf| {
        let mut r = (pgf.eval(1.0)? - product[start_index]).abs();
        for s in PGF_POINTS {
            let direct = hitting_pgf(chain.matrix(), chain.win_index(), s)?[start_index + 1];
            r = r.max((pgf.eval(s)? - direct).abs());
        }
        Ok(r)
    });
    match res {
        Ok(r) => checks.push(Check::residual("pgf_agreement", r, PGF_TOL)),
        Err(e) => checks.push(Check::failed("pgf_agreement", e)),
    }

    VerifyReport { checks, skipped }
}
