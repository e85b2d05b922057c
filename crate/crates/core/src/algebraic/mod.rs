//! Randomized constraint-matrix rank test and the certification workflow.
//!
//! For a generic `d × r` basis `U`, every column support `ω` with `r + 1`
//! rows yields a kernel vector of `U_ωᵀ`; scattering those vectors into
//! `d`-space gives the constraint matrix `A`. Almost surely, the columns
//! contain a `d × (d − r)` block satisfying condition (ii) iff
//! `dim ker Aᵀ = r`.

mod certify;
pub mod field;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use certify::{certify, Certificate, CertifyOptions, Verdict};
pub use field::Fp;

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use field::{kernel_vector, Scalar};

/// Arithmetic used for the rank decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// Exact arithmetic over `GF(2^61 − 1)` with a uniformly drawn basis.
    #[default]
    Exact,
    /// `f64` arithmetic with a Gaussian basis and SVD-based numerical rank.
    Float,
}

impl std::str::FromStr for Arithmetic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Arithmetic::Exact),
            "float" | "floating" => Ok(Arithmetic::Float),
            other => Err(Error::Validation(format!("unknown mode {other:?}"))),
        }
    }
}

/// Sparse `d × N̆` matrix whose column `i` is supported exactly on `ω_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix<T> {
    rows: usize,
    columns: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> ConstraintMatrix<T> {
    /// Builds a matrix from sparse columns; every entry row must be below `rows`.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, T)>>) -> Result<Self> {
        if columns.iter().flatten().any(|&(row, _)| row >= rows) {
            return Err(Error::Validation("constraint entry outside the row range".into()));
        }
        Ok(Self { rows, columns })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[(usize, T)] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<(usize, T)>] {
        &self.columns
    }

    fn dense_column(&self, i: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.rows];
        for &(row, x) in &self.columns[i] {
            v[row] = x;
        }
        v
    }
}

impl ConstraintMatrix<f64> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, x) in col {
                m[(i, j)] = x;
            }
        }
        m
    }
}

/// Scalars usable for the generic basis and the rank decision.
pub trait ConstraintScalar: Scalar + Send + Sync {
    /// One entry of a generic basis.
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `rows − rank(A)`, i.e. `dim ker Aᵀ`. `known_min` is a lower bound on
    /// the nullity that exact backends may use to stop early.
    fn left_nullity(matrix: &ConstraintMatrix<Self>, tol: Option<f64>, known_min: usize) -> Result<usize>;
}

impl ConstraintScalar for Fp {
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp::random(rng)
    }

    fn left_nullity(matrix: &ConstraintMatrix<Self>, _tol: Option<f64>, known_min: usize) -> Result<usize> {
        let d = matrix.rows();
        Ok(d - rank_exact(matrix, Some(d.saturating_sub(known_min))))
    }
}

impl ConstraintScalar for f64 {
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn left_nullity(matrix: &ConstraintMatrix<Self>, tol: Option<f64>, _known_min: usize) -> Result<usize> {
        Ok(matrix.rows() - rank_float(matrix, tol)?)
    }
}

/// Draws a generic `d × r` basis, stored row-major.
pub fn draw_basis<T: ConstraintScalar, R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> Vec<Vec<T>> {
    (0..d).map(|_| (0..r).map(|_| T::draw(rng)).collect()).collect()
}

/// Builds `A` for a mask whose columns all have exactly `r + 1` entries.
///
/// `basis` is `d × r`, row-major. Fails with [`Error::RedrawRequired`] when a
/// restriction `U_ω` does not have a one-dimensional left kernel.
pub fn build_constraint_matrix<T: ConstraintScalar>(
    mask: &ObservationMask,
    r: usize,
    basis: &[Vec<T>],
) -> Result<ConstraintMatrix<T>> {
    let d = mask.rows();
    if basis.len() != d || basis.iter().any(|row| row.len() != r) {
        return Err(Error::Validation(format!("basis must be {d}×{r}")));
    }
    require_r_plus_1(mask, r)?;
    let mut columns = Vec::with_capacity(mask.cols());
    for (col, support) in mask.supports().iter().enumerate() {
        // U_ωᵀ is r × (r+1): row k holds basis column k restricted to ω.
        let restricted_t: Vec<Vec<T>> =
            (0..r).map(|k| support.iter().map(|&row| basis[row][k]).collect()).collect();
        let kernel = kernel_vector(&restricted_t, r + 1).ok_or(Error::RedrawRequired { column: col })?;
        columns.push(support.iter().copied().zip(kernel).collect());
    }
    Ok(ConstraintMatrix { rows: d, columns })
}

fn require_r_plus_1(mask: &ObservationMask, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::Precondition("rank must be at least 1".into()));
    }
    match mask.supports().iter().position(|s| s.len() != r + 1) {
        Some(col) => Err(Error::Precondition(format!(
            "column {col} has {} entries, expected exactly r+1={}; reduce the mask first",
            mask.support(col).len(),
            r + 1
        ))),
        None => Ok(()),
    }
}

/// Rank over `GF(2^61 − 1)` by incremental echelon insertion.
///
/// Stops early once `limit` independent columns have been found.
pub fn rank_exact(matrix: &ConstraintMatrix<Fp>, limit: Option<usize>) -> usize {
    let d = matrix.rows();
    let limit = limit.unwrap_or(d).min(d);
    // pivots[i] holds an echelon vector with zeros before i and a one at i.
    let mut pivots: Vec<Option<Vec<Fp>>> = vec![None; d];
    let mut rank = 0;
    for i in 0..matrix.cols() {
        if rank == limit {
            break;
        }
        let mut v = matrix.dense_column(i);
        for lead in 0..d {
            let coeff = v[lead];
            if coeff.is_zero() {
                continue;
            }
            match &pivots[lead] {
                Some(p) => {
                    for k in lead..d {
                        if !p[k].is_zero() {
                            v[k] = v[k] - coeff * p[k];
                        }
                    }
                }
                None => {
                    let inv = coeff.inv().expect("nonzero");
                    for x in v[lead..].iter_mut() {
                        *x = *x * inv;
                    }
                    pivots[lead] = Some(v);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Default relative tolerance factor for floating rank: `tol = 1e-9 · max(d, N̆)`.
pub const FLOAT_TOL_FACTOR: f64 = 1e-9;
/// Minimum ratio between the smallest retained and largest discarded singular value.
pub const FLOAT_MIN_GAP: f64 = 1e3;

/// Numerical rank `#{σ_k > tol · σ_max}`; refuses when the spectrum has no
/// clear gap around the threshold.
pub fn rank_float(matrix: &ConstraintMatrix<f64>, tol: Option<f64>) -> Result<usize> {
    let (d, n) = (matrix.rows(), matrix.cols());
    if d == 0 || n == 0 {
        return Ok(0);
    }
    let tol = tol.unwrap_or(FLOAT_TOL_FACTOR * d.max(n) as f64);
    let dense = matrix.to_dense();
    let sigma = crate::linalg::singular_values(&dense)?;
    let sigma_max = sigma[0];
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let threshold = tol * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    let kept = sigma[rank - 1];
    let dropped = sigma.get(rank).copied().unwrap_or(0.0);
    if dropped > 0.0 && kept < FLOAT_MIN_GAP * dropped {
        return Err(Error::Indeterminate { gap: kept / dropped });
    }
    Ok(rank)
}

/// `dim ker Aᵀ` of a constraint matrix under the chosen arithmetic.
pub fn nullspace_dim<T: ConstraintScalar>(matrix: &ConstraintMatrix<T>, tol: Option<f64>) -> Result<usize> {
    if matrix.cols() == 0 {
        return Err(Error::Precondition("empty constraint matrix".into()));
    }
    T::left_nullity(matrix, tol, 0)
}

const MAX_REDRAWS: usize = 8;

/// Decides whether the mask contains a `d × (d − r)` block satisfying
/// condition (ii) by testing `dim ker Aᵀ = r` for a freshly drawn generic basis.
pub fn algorithm1_check<R: Rng + ?Sized>(
    mask: &ObservationMask,
    r: usize,
    rng: &mut R,
    mode: Arithmetic,
) -> Result<bool> {
    match mode {
        Arithmetic::Exact => algorithm1_with::<Fp, R>(mask, r, rng),
        Arithmetic::Float => algorithm1_with::<f64, R>(mask, r, rng),
    }
}

fn algorithm1_with<T: ConstraintScalar, R: Rng + ?Sized>(
    mask: &ObservationMask,
    r: usize,
    rng: &mut R,
) -> Result<bool> {
    let d = mask.rows();
    if r == 0 || r >= d {
        return Err(Error::Precondition(format!("rank must lie in [1, d), got r={r}, d={d}")));
    }
    if mask.cols() < d - r {
        return Err(Error::Structural(format!(
            "{} columns is fewer than d-r={}",
            mask.cols(),
            d - r
        )));
    }
    require_r_plus_1(mask, r)?;
    for _ in 0..MAX_REDRAWS {
        let basis = draw_basis::<T, R>(d, r, rng);
        match build_constraint_matrix(mask, r, &basis) {
            Ok(a) => {
                // The span of the basis always lies in ker Aᵀ, so the nullity is at least r.
                return Ok(T::left_nullity(&a, None, r)? == r);
            }
            Err(Error::RedrawRequired { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Indeterminate { gap: 0.0 })
}
