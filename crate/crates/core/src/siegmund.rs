//! Siegmund duality with respect to coordinatewise product orders, and the
//! three routes to winning probabilities: the product formula, the
//! fundamental-matrix solve and the stationary law of the ergodic primal.

use crate::error::{Error, Result};
use crate::game::{AbsorbingChain, GameSpec};
use crate::markov::{hitting_probabilities, stationary_distribution};
use crate::matrix::{kron_all, Matrix};

/// Indicator `C(e, e') = 1{e ⪯ e'}` of a product of total orders together
/// with its Möbius inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderMatrix {
    pub c: Matrix,
    pub mobius: Matrix,
}

impl OrderMatrix {
    /// Total order on `{1, .., n}`.
    pub fn total(n: usize) -> Self {
        let mut c = Matrix::zeros(n, n);
        let mut mobius = Matrix::identity(n);
        for i in 0..n {
            for j in i..n {
                c[(i, j)] = 1.0;
            }
            if i + 1 < n {
                mobius[(i, i + 1)] = -1.0;
            }
        }
        Self { c, mobius }
    }

    pub fn len(&self) -> usize {
        self.c.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `C = ⊗_j C_j` with inverse `⊗_j C_j⁻¹`.
pub fn product_order(sizes: &[usize]) -> Result<OrderMatrix> {
    let factors: Vec<OrderMatrix> = sizes.iter().map(|&n| OrderMatrix::total(n)).collect();
    Ok(OrderMatrix {
        c: kron_all(factors.iter().map(|f| &f.c))?,
        mobius: kron_all(factors.iter().map(|f| &f.mobius))?,
    })
}

/// `(C⁻¹ P_X C)ᵀ`. Nonnegative exactly when `P_X` is Möbius monotone.
pub fn siegmund_dual(p_x: &Matrix, order: &OrderMatrix) -> Result<Matrix> {
    Ok(order.mobius.matmul(p_x)?.matmul(&order.c)?.transpose())
}

/// `C Pᵀ C⁻¹`, the chain whose Siegmund dual is `p_dual`.
pub fn siegmund_primal(p_dual: &Matrix, order: &OrderMatrix) -> Result<Matrix> {
    order.c.matmul(&p_dual.transpose())?.matmul(&order.mobius)
}

/// `max |P_Xⁿ C - C (P_Zⁿ)ᵀ|`.
pub fn duality_residual(p_x: &Matrix, p_dual: &Matrix, order: &OrderMatrix, n: u32) -> Result<f64> {
    let lhs = p_x.pow(n)?.matmul(&order.c)?;
    let rhs = order.c.matmul(&p_dual.pow(n)?.transpose())?;
    Ok(lhs.max_abs_diff(&rhs))
}

pub fn is_mobius_monotone(p_x: &Matrix, order: &OrderMatrix, tol: f64) -> Result<bool> {
    Ok(order.mobius.matmul(p_x)?.matmul(&order.c)?.min_entry() >= -tol)
}

/// `rho(i_1, .., i_d) = prod_j rho_j(i_j)` over the cells in linear order.
pub fn win_prob_product(game: &GameSpec) -> Vec<f64> {
    let per_dim: Vec<Vec<f64>> = game.dims().iter().map(|s| s.win_probabilities()).collect();
    let space = game.space();
    (0..space.cells())
        .map(|c| {
            space
                .cell(c)
                .iter()
                .zip(&per_dim)
                .map(|(i, rho)| rho[i - 1])
                .product()
        })
        .collect()
}

/// Absorption probabilities at the win state from every cell by the
/// fundamental-matrix solve.
pub fn win_prob_fundamental(chain: &AbsorbingChain) -> Result<Vec<f64>> {
    let h = hitting_probabilities(chain.matrix(), chain.win_index())?;
    Ok(h[1..].to_vec())
}

/// `rho = pi C` where `pi` is the stationary law of the primal
/// `C P_Zᵀ C⁻¹` of the interior kernel.
pub fn win_prob_via_stationary(chain: &AbsorbingChain) -> Result<Vec<f64>> {
    let order = product_order(chain.space().sizes())?;
    let primal = siegmund_primal(chain.interior(), &order)?;
    if primal.min_entry() < -1e-10 {
        return Err(Error::Monotonicity(format!(
            "the ergodic primal has a negative entry {:e}",
            primal.min_entry()
        )));
    }
    let pi = stationary_distribution(&primal)?;
    Ok(order.c.left_mul(&pi))
}
