//! Multidimensional games assembled as Kronecker mixtures of birth-death
//! components.
//!
//! For subsets `A_k` of the dimensions and coefficients `b_k` the interior
//! kernel is `sum_k b_k (R_1^(k) ⊗ .. ⊗ R_d^(k))` with `R_j^(k)` the interior
//! block of dimension `j` when `j ∈ A_k` and the identity otherwise. A single
//! sink at index 0 then collects the missing mass.

use std::collections::VecDeque;

use crate::bd::BirthDeathSpec;
use crate::error::{Error, Result, StateLabel};
use crate::matrix::{augment_sink, is_absorbing, kron_all, Matrix, DEFAULT_ENTRY_CAP, DEFAULT_TOL};

/// Mixing coefficients: scalars `b_k` or square matrices `B_k` of the full
/// interior size.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Scalars(Vec<f64>),
    Matrices(Vec<Matrix>),
}

impl Coefficients {
    pub fn len(&self) -> usize {
        match self {
            Coefficients::Scalars(b) => b.len(),
            Coefficients::Matrices(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    dims: Vec<BirthDeathSpec>,
    /// 0-based, sorted, duplicate free.
    subsets: Vec<Vec<usize>>,
    coeffs: Coefficients,
}

impl GameSpec {
    /// `subsets` use 0-based dimension indices.
    pub fn new(dims: Vec<BirthDeathSpec>, subsets: Vec<Vec<usize>>, coeffs: Coefficients) -> Result<Self> {
        let d = dims.len();
        if d == 0 {
            return Err(Error::InvalidGame("at least one dimension is required".into()));
        }
        if subsets.is_empty() {
            return Err(Error::InvalidGame("at least one subset is required".into()));
        }
        if subsets.len() != coeffs.len() {
            return Err(Error::InvalidGame(format!(
                "{} subsets but {} coefficients",
                subsets.len(),
                coeffs.len()
            )));
        }
        let mut sorted = Vec::with_capacity(subsets.len());
        for (k, a) in subsets.into_iter().enumerate() {
            let mut a = a;
            a.sort_unstable();
            if let Some(j) = a.iter().find(|j| **j >= d) {
                return Err(Error::InvalidGame(format!(
                    "subset {k} contains dimension {} but d = {d}",
                    j + 1
                )));
            }
            if a.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGame(format!("subset {k} repeats a dimension")));
            }
            sorted.push(a);
        }
        let cells: usize = dims.iter().map(BirthDeathSpec::n).product();
        match &coeffs {
            Coefficients::Scalars(b) => {
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidGame("non-finite coefficient".into()));
                }
                let total: f64 = b.iter().sum();
                if (total - 1.0).abs() > DEFAULT_TOL {
                    return Err(Error::InvalidGame(format!("coefficients sum to {total}, not 1")));
                }
            }
            Coefficients::Matrices(bs) => {
                let mut total = Matrix::zeros(cells, cells);
                for (k, b) in bs.iter().enumerate() {
                    if b.rows() != cells || b.cols() != cells {
                        return Err(Error::InvalidGame(format!(
                            "coefficient matrix {k} is {}x{}, expected {cells}x{cells}",
                            b.rows(),
                            b.cols()
                        )));
                    }
                    total.add_scaled(1.0, b)?;
                }
                let err = total.max_abs_diff(&Matrix::identity(cells));
                if err > DEFAULT_TOL {
                    return Err(Error::InvalidGame(format!(
                        "coefficient matrices sum to the identity only up to {err:e}"
                    )));
                }
            }
        }
        Ok(Self {
            dims,
            subsets: sorted,
            coeffs,
        })
    }

    pub fn dims(&self) -> &[BirthDeathSpec] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.dims.iter().map(BirthDeathSpec::n).collect()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.sizes())
    }

    /// The scalar coefficients, or an error naming `consumer` when they are
    /// matrices.
    pub fn scalar_coeffs(&self, consumer: &'static str) -> Result<&[f64]> {
        match &self.coeffs {
            Coefficients::Scalars(b) => Ok(b),
            Coefficients::Matrices(_) => Err(Error::MatrixCoefficients(consumer)),
        }
    }

    /// Interior kernel on the cells, before clamping.
    pub fn interior_mixture(&self) -> Result<Matrix> {
        let cells = self.space().cells();
        let entries = cells as u128 * cells as u128;
        if entries > DEFAULT_ENTRY_CAP as u128 {
            return Err(Error::Size {
                entries,
                cap: DEFAULT_ENTRY_CAP,
            });
        }
        let interiors: Vec<Matrix> = self.dims.iter().map(BirthDeathSpec::interior_matrix).collect();
        let identities: Vec<Matrix> = self.dims.iter().map(|s| Matrix::identity(s.n())).collect();
        let mut total = Matrix::zeros(cells, cells);
        for (k, a) in self.subsets.iter().enumerate() {
            let factors = (0..self.d()).map(|j| if a.contains(&j) { &interiors[j] } else { &identities[j] });
            let term = kron_all(factors)?;
            match &self.coeffs {
                Coefficients::Scalars(b) => total.add_scaled(b[k], &term)?,
                Coefficients::Matrices(b) => total.add_scaled(1.0, &b[k].matmul(&term)?)?,
            }
        }
        Ok(total)
    }

    /// `sum_k b_k prod_{j ∈ A_k} λ^(j)_{i_j}` for every cell, in linear
    /// order. These are the eigenvalues of the interior kernel.
    pub fn mixture_spectrum(&self) -> Result<Vec<f64>> {
        let b = self.scalar_coeffs("the mixture spectrum")?;
        let eigen: Vec<Vec<f64>> = self.dims.iter().map(BirthDeathSpec::eigenvalues).collect();
        let space = self.space();
        Ok((0..space.cells())
            .map(|c| {
                let cell = space.cell(c);
                self.subsets
                    .iter()
                    .zip(b)
                    .map(|(a, bk)| bk * a.iter().map(|&j| eigen[j][cell[j] - 1]).product::<f64>())
                    .sum()
            })
            .collect())
    }
}

/// The `C(d, r)` subsets of size `r` in lexicographic order plus the empty
/// set with coefficient `1 - C(d, r)`; the empty set is dropped when its
/// coefficient is zero.
pub fn preset_r_of_d(dims: Vec<BirthDeathSpec>, r: usize) -> Result<GameSpec> {
    let d = dims.len();
    if r == 0 || r > d {
        return Err(Error::InvalidGame(format!("r = {r} must lie in 1..={d}")));
    }
    let mut subsets = combinations(d, r);
    let mut coeffs = vec![1.0; subsets.len()];
    let rest = 1.0 - subsets.len() as f64;
    if rest != 0.0 {
        subsets.push(Vec::new());
        coeffs.push(rest);
    }
    GameSpec::new(dims, subsets, Coefficients::Scalars(coeffs))
}

/// `r`-element subsets of `0..d` in lexicographic order.
pub fn combinations(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > d {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..r).rev().find(|&i| idx[i] != i + d - r) else {
            return out;
        };
        idx[pos] += 1;
        for i in pos + 1..r {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

/// Cells `prod_j {1, .., N_j}` linearized with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
}

impl StateSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for j in (0..sizes.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * sizes[j + 1];
        }
        Self { sizes, strides }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn d(&self) -> usize {
        self.sizes.len()
    }

    pub fn cells(&self) -> usize {
        self.sizes.iter().product()
    }

    /// 0-based position of a 1-based cell.
    pub fn index(&self, cell: &[usize]) -> Result<usize> {
        if cell.len() != self.d() || cell.iter().zip(&self.sizes).any(|(c, n)| *c == 0 || c > n) {
            return Err(Error::StartOutOfRange(StateLabel(cell.to_vec()).to_string()));
        }
        Ok(cell.iter().zip(&self.strides).map(|(c, s)| (c - 1) * s).sum())
    }

    /// 1-based cell at a 0-based position.
    pub fn cell(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.sizes)
            .map(|(s, n)| index / s % n + 1)
            .collect()
    }

    pub fn win_cell(&self) -> Vec<usize> {
        self.sizes.clone()
    }

    pub fn origin(&self) -> Vec<usize> {
        vec![1; self.d()]
    }

    /// Point mass on a cell.
    pub fn delta(&self, cell: &[usize]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.cells()];
        v[self.index(cell)?] = 1.0;
        Ok(v)
    }

    /// Whether `a ⪯ b` coordinatewise, for 0-based positions.
    pub fn below(&self, a: usize, b: usize) -> bool {
        self.strides
            .iter()
            .zip(&self.sizes)
            .all(|(s, n)| a / s % n <= b / s % n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainState {
    Sink,
    /// 1-based coordinates.
    Cell(Vec<usize>),
}

/// Game chain on `{sink} ∪ cells`, with the sink at index 0 and cell `c` at
/// index `c + 1`.
#[derive(Debug, Clone)]
pub struct AbsorbingChain {
    matrix: Matrix,
    interior: Matrix,
    space: StateSpace,
}

impl AbsorbingChain {
    pub const SINK: usize = 0;

    /// Wraps an already stochastic matrix whose index 0 is the sink.
    pub fn from_parts(matrix: Matrix, space: StateSpace) -> Result<Self> {
        if matrix.rows() != space.cells() + 1 || !matrix.is_square() {
            return Err(Error::Shape(format!(
                "chain matrix is {}x{}, expected {} states",
                matrix.rows(),
                matrix.cols(),
                space.cells() + 1
            )));
        }
        let interior = crate::matrix::restrict_sink(&matrix, Self::SINK)?;
        Ok(Self {
            matrix,
            interior,
            space,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// The kernel with the sink removed.
    pub fn interior(&self) -> &Matrix {
        &self.interior
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sink_index(&self) -> usize {
        Self::SINK
    }

    pub fn win_index(&self) -> usize {
        self.space.cells()
    }

    pub fn multi_index(&self, linear: usize) -> Result<ChainState> {
        match linear {
            0 => Ok(ChainState::Sink),
            i if i < self.len() => Ok(ChainState::Cell(self.space.cell(i - 1))),
            i => Err(Error::Index {
                index: i,
                size: self.len(),
            }),
        }
    }

    pub fn linear_index(&self, state: &ChainState) -> Result<usize> {
        match state {
            ChainState::Sink => Ok(Self::SINK),
            ChainState::Cell(c) => Ok(self.space.index(c)? + 1),
        }
    }

    /// Distribution on the full chain from one on the cells.
    pub fn lift(&self, nu_cells: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(0.0);
        v.extend_from_slice(nu_cells);
        v
    }
}

pub fn build_game(spec: &GameSpec) -> Result<AbsorbingChain> {
    let mut interior = spec.interior_mixture()?;
    if let Some((row, col, value)) = interior.clamp_small_negatives(DEFAULT_TOL) {
        return Err(Error::NotStochastic { row, col, value });
    }
    let matrix = augment_sink(&interior, DEFAULT_TOL)?;
    let chain = AbsorbingChain {
        matrix,
        interior,
        space: spec.space(),
    };
    if !is_absorbing(&chain.matrix, chain.win_index(), DEFAULT_TOL) {
        return Err(Error::InvalidGame(format!(
            "win state {} is not absorbing",
            StateLabel(chain.space.win_cell())
        )));
    }
    communication_report(&chain).map_err(Error::Communication)?;
    Ok(chain)
}

/// Whether the non-absorbing states behave as one transient class: all of
/// them are reachable from `(1, .., 1)` without leaving the class, each of
/// them can reach absorption, and the only absorbing states are the sink
/// and the win state.
pub fn check_communication(chain: &AbsorbingChain) -> bool {
    communication_report(chain).is_ok()
}

fn communication_report(chain: &AbsorbingChain) -> std::result::Result<(), String> {
    let p = &chain.matrix;
    let n = chain.len();
    let absorbing: Vec<bool> = (0..n).map(|i| is_absorbing(p, i, DEFAULT_TOL)).collect();
    let label = |i: usize| match chain.multi_index(i) {
        Ok(ChainState::Cell(c)) => StateLabel(c).to_string(),
        _ => "sink".to_string(),
    };
    if let Some(i) = (1..n).find(|&i| absorbing[i] && i != chain.win_index()) {
        return Err(format!("state {} is absorbing", label(i)));
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
    if transient.is_empty() {
        return Ok(());
    }
    let start = chain.space.index(&chain.space.origin()).map_err(|e| e.to_string())? + 1;
    if absorbing[start] {
        return Err(format!("start state {} is absorbing", label(start)));
    }

    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && !absorbing[j] && p[(i, j)] > 0.0 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(&i) = transient.iter().find(|&&i| !seen[i]) {
        return Err(format!("state {} is unreachable from {}", label(i), label(start)));
    }

    let mut escapes = absorbing.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| absorbing[i]).collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !escapes[i] && p[(i, j)] > 0.0 {
                escapes[i] = true;
                queue.push_back(i);
            }
        }
    }
    if let Some(&i) = transient.iter().find(|&&i| !escapes[i]) {
        return Err(format!("state {} never reaches absorption", label(i)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(n: usize, p: f64, q: f64) -> BirthDeathSpec {
        BirthDeathSpec::constant(n, p, q).unwrap()
    }

    #[test]
    fn single_dimension_reproduces_the_chain() {
        let s = walk(4, 0.3, 0.2);
        let g = GameSpec::new(vec![s.clone()], vec![vec![0]], Coefficients::Scalars(vec![1.0])).unwrap();
        let chain = build_game(&g).unwrap();
        assert!(chain.matrix().max_abs_diff(&s.transition_matrix()) < 1e-15);
        assert_eq!(chain.win_index(), 4);
    }

    #[test]
    fn presets() {
        let dims = vec![walk(3, 0.2, 0.1), walk(3, 0.2, 0.1)];
        let g = preset_r_of_d(dims.clone(), 1).unwrap();
        assert_eq!(g.subsets(), &[vec![0], vec![1], vec![]]);
        assert_eq!(g.coeffs(), &Coefficients::Scalars(vec![1.0, 1.0, -1.0]));

        let g = preset_r_of_d(vec![walk(2, 0.2, 0.1); 3], 2).unwrap();
        assert_eq!(g.subsets(), &[vec![0, 1], vec![0, 2], vec![1, 2], vec![]]);
        assert_eq!(g.coeffs(), &Coefficients::Scalars(vec![1.0, 1.0, 1.0, -2.0]));

        let g = preset_r_of_d(vec![walk(3, 0.2, 0.1)], 1).unwrap();
        assert_eq!(g.subsets(), &[vec![0]]);
        assert_eq!(g.coeffs(), &Coefficients::Scalars(vec![1.0]));

        assert!(preset_r_of_d(dims, 3).is_err());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn one_coordinate_game_moves() {
        let (p, q) = (0.3, 0.1);
        let g = preset_r_of_d(vec![walk(3, p, q), walk(3, p, q)], 1).unwrap();
        let chain = build_game(&g).unwrap();
        let at = |c: &[usize]| chain.linear_index(&ChainState::Cell(c.to_vec())).unwrap();
        let m = chain.matrix();
        // (1,1): up in either coordinate, down into the sink from either
        assert!((m[(at(&[1, 1]), at(&[2, 1]))] - p).abs() < 1e-15);
        assert!((m[(at(&[1, 1]), at(&[1, 2]))] - p).abs() < 1e-15);
        assert!((m[(at(&[1, 1]), 0)] - 2.0 * q).abs() < 1e-15);
        assert!((m[(at(&[1, 1]), at(&[1, 1]))] - (1.0 - 2.0 * p - 2.0 * q)).abs() < 1e-15);
        // (3,2): only the second coordinate moves
        assert!((m[(at(&[3, 2]), at(&[3, 3]))] - p).abs() < 1e-15);
        assert!((m[(at(&[3, 2]), at(&[3, 1]))] - q).abs() < 1e-15);
        assert_eq!(m[(at(&[3, 2]), 0)], 0.0);
    }

    #[test]
    fn independent_game_is_a_product() {
        let dims = vec![walk(3, 0.3, 0.1), walk(2, 0.4, 0.2)];
        let g = preset_r_of_d(dims.clone(), 2).unwrap();
        let chain = build_game(&g).unwrap();
        let product = kron_all([&dims[0].interior_matrix(), &dims[1].interior_matrix()]).unwrap();
        assert!(chain.interior().max_abs_diff(&product) < 1e-15);
    }

    #[test]
    fn negative_mixture_is_rejected() {
        let dims = vec![walk(3, 0.45, 0.45), walk(3, 0.45, 0.45)];
        let g = preset_r_of_d(dims, 1).unwrap();
        assert!(matches!(build_game(&g), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn isolated_state_fails_communication() {
        let dims = vec![walk(3, 0.3, 0.1)];
        let mut m = dims[0].transition_matrix();
        // state 1 can no longer step up, so state 2 is unreachable from it
        m[(1, 2)] = 0.0;
        m[(1, 1)] = 0.9;
        let chain = AbsorbingChain::from_parts(m, StateSpace::new(vec![3])).unwrap();
        assert!(!check_communication(&chain));
        assert!(check_communication(&build_game(&preset_r_of_d(dims, 1).unwrap()).unwrap()));
    }

    #[test]
    fn index_map() {
        let space = StateSpace::new(vec![2, 3]);
        let chain = AbsorbingChain::from_parts(Matrix::identity(7), space).unwrap();
        assert_eq!(chain.multi_index(0).unwrap(), ChainState::Sink);
        assert_eq!(chain.linear_index(&ChainState::Cell(vec![2, 3])).unwrap(), chain.win_index());
        assert_eq!(chain.linear_index(&ChainState::Cell(vec![2, 1])).unwrap(), 4);
        for i in 0..7 {
            let s = chain.multi_index(i).unwrap();
            assert_eq!(chain.linear_index(&s).unwrap(), i);
        }
        assert!(chain.multi_index(7).is_err());
        assert!(chain.linear_index(&ChainState::Cell(vec![3, 1])).is_err());
    }

    #[test]
    fn matrix_coefficients() {
        let dims = vec![walk(2, 0.3, 0.1), walk(2, 0.3, 0.1)];
        let half = Matrix::identity(4).scale(0.5);
        let g = GameSpec::new(
            dims.clone(),
            vec![vec![0], vec![1]],
            Coefficients::Matrices(vec![half.clone(), half]),
        )
        .unwrap();
        let scalar = GameSpec::new(dims, vec![vec![0], vec![1]], Coefficients::Scalars(vec![0.5, 0.5])).unwrap();
        let a = build_game(&g).unwrap();
        let b = build_game(&scalar).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
        assert!(matches!(g.mixture_spectrum(), Err(Error::MatrixCoefficients(_))));
    }

    #[test]
    fn invalid_specs() {
        let dims = vec![walk(2, 0.3, 0.1)];
        assert!(GameSpec::new(dims.clone(), vec![vec![1]], Coefficients::Scalars(vec![1.0])).is_err());
        assert!(GameSpec::new(dims.clone(), vec![vec![0]], Coefficients::Scalars(vec![0.9])).is_err());
        assert!(GameSpec::new(dims.clone(), vec![vec![0, 0]], Coefficients::Scalars(vec![1.0])).is_err());
        assert!(GameSpec::new(dims, vec![], Coefficients::Scalars(vec![])).is_err());
    }
}
