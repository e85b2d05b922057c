//! Ground-truth low-rank data: subspaces in echelon coordinates, random
//! factorizations, coherence, observation and completion from a known basis.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mask::ObservationMask;

/// Relative singular-value floor below which a restriction counts as singular.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// An `r`-dimensional subspace of `ℝ^d` with basis `U = Π·[I; V]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    d: usize,
    r: usize,
    v: DMatrix<f64>,
    /// `row_permutation[i]` is the row of `U` holding row `i` of `[I; V]`.
    row_permutation: Option<Vec<usize>>,
}

impl Subspace {
    pub fn new(d: usize, r: usize, v: DMatrix<f64>, row_permutation: Option<Vec<usize>>) -> Result<Self> {
        if r == 0 || r > d || v.nrows() != d - r || v.ncols() != r {
            return Err(Error::Validation(format!(
                "echelon block must be {}×{r}, got {}×{}",
                d.saturating_sub(r),
                v.nrows(),
                v.ncols()
            )));
        }
        if let Some(p) = &row_permutation {
            let mut seen = vec![false; d];
            if p.len() != d || p.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::Validation("row permutation is not a permutation of [0, d)".into()));
            }
        }
        Ok(Self { d, r, v, row_permutation })
    }

    /// Echelon coordinates of `span(U)`, keeping the identity permutation when
    /// the top `r × r` block is invertible and pivoting rows otherwise.
    pub fn from_basis(u: &DMatrix<f64>) -> Result<Self> {
        let (d, r) = u.shape();
        if r == 0 || r > d {
            return Err(Error::Validation(format!("basis shape {d}×{r} is not a subspace basis")));
        }
        let top = u.rows(0, r).into_owned();
        if well_conditioned(&top) {
            let v = u.rows(r, d - r) * top.try_inverse().expect("checked conditioning");
            return Self::new(d, r, v, None);
        }
        let pivots = pivot_rows(u)?;
        let mut order = pivots.clone();
        order.extend((0..d).filter(|i| !pivots.contains(i)));
        let top = u.select_rows(&pivots);
        let bottom = u.select_rows(&order[r..]);
        let v = bottom * top.try_inverse().expect("pivot rows are independent");
        Self::new(d, r, v, Some(order))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn row_permutation(&self) -> Option<&[usize]> {
        self.row_permutation.as_deref()
    }

    /// The basis `Π·[I; V]`.
    pub fn basis(&self) -> DMatrix<f64> {
        let mut stacked = DMatrix::zeros(self.d, self.r);
        stacked.view_mut((0, 0), (self.r, self.r)).fill_with_identity();
        stacked.view_mut((self.r, 0), (self.d - self.r, self.r)).copy_from(&self.v);
        match &self.row_permutation {
            None => stacked,
            Some(p) => {
                let mut u = DMatrix::zeros(self.d, self.r);
                for (i, &row) in p.iter().enumerate() {
                    u.set_row(row, &stacked.row(i));
                }
                u
            }
        }
    }

    /// Rows `ω` with `|ω| = r` on which the basis loses rank, if any.
    ///
    /// Every smaller degenerate restriction extends to one of size `r`, so
    /// checking the `r`-subsets suffices. Fails when there are more than
    /// `max_subsets` subsets to inspect.
    pub fn degenerate_restriction(&self, max_subsets: u64) -> Result<Option<Vec<usize>>> {
        let count = binomial(self.d as u64, self.r as u64);
        if count > max_subsets {
            return Err(Error::CapExceeded {
                columns: self.d,
                cap: max_subsets as usize,
                suggestion: "random instances are non-degenerate with probability one",
            });
        }
        let u = self.basis();
        let mut omega: Vec<usize> = (0..self.r).collect();
        loop {
            if !well_conditioned(&u.select_rows(&omega)) {
                return Ok(Some(omega));
            }
            if !next_combination(&mut omega, self.d) {
                return Ok(None);
            }
        }
    }
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    match linalg::singular_values(m) {
        Ok(sv) if !sv.is_empty() => sv[0] > 0.0 && sv[sv.len() - 1] > DEGENERACY_TOL * sv[0],
        _ => false,
    }
}

/// Greedy choice of `r` linearly independent rows by elimination with pivoting.
fn pivot_rows(u: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (d, r) = u.shape();
    let mut work = u.clone();
    let scale = u.amax();
    let mut chosen = Vec::with_capacity(r);
    for col in 0..r {
        let (best, mag) = (0..d)
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, work[(i, col)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        if mag <= DEGENERACY_TOL * scale {
            return Err(Error::DegenerateSubspace("basis is rank deficient".into()));
        }
        for i in 0..d {
            if i != best {
                let factor = work[(i, col)] / work[(best, col)];
                for k in col..r {
                    work[(i, k)] -= factor * work[(best, k)];
                }
            }
        }
        chosen.push(best);
    }
    Ok(chosen)
}

pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// `X = U*·Θ*` with i.i.d. standard normal factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactorization {
    pub ustar: DMatrix<f64>,
    pub theta: DMatrix<f64>,
}

impl LowRankFactorization {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.ustar * &self.theta
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(rows, cols, data)
}

pub fn random_factorization<R: Rng + ?Sized>(d: usize, n: usize, r: usize, rng: &mut R) -> Result<LowRankFactorization> {
    if r == 0 || r > d.min(n) {
        return Err(Error::Validation(format!("need 1 ≤ r ≤ min(d, N), got r={r}, d={d}, N={n}")));
    }
    let ustar = gaussian_matrix(d, r, rng);
    let theta = gaussian_matrix(r, n, rng);
    Ok(LowRankFactorization { ustar, theta })
}

/// Squared row norms of the orthogonal projection onto `span(U)`.
pub fn leverage_scores(u: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (d, r) = u.shape();
    if r == 0 || r > d {
        return Err(Error::Validation(format!("basis shape {d}×{r} is not a subspace basis")));
    }
    let qr = u.clone().qr();
    let diag = qr.r().diagonal().abs();
    if diag.min() <= DEGENERACY_TOL * diag.max().max(f64::MIN_POSITIVE) {
        return Err(Error::Validation("basis is rank deficient".into()));
    }
    let q = qr.q();
    Ok(q.row_iter().map(|row| row.norm_squared()).collect())
}

/// `μ = (d/r)·max_j ‖P e_j‖²`, in `[1, d/r]`.
pub fn coherence(u: &DMatrix<f64>) -> Result<f64> {
    let (d, r) = u.shape();
    let lev = leverage_scores(u)?;
    Ok(d as f64 / r as f64 * lev.iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentBasis {
    pub basis: DMatrix<f64>,
    pub mu: f64,
    pub iterations: usize,
    /// Whether `mu` is within 5% of the target.
    pub reached: bool,
}

const COHERENCE_REL_TOL: f64 = 0.05;

/// Rescales the highest-leverage row until the coherence is within 5% of
/// `target_mu`, returning the best basis found if the budget runs out.
///
/// The row is scaled by `1.2` to raise coherence and by `1/1.2` to lower it;
/// the factor shrinks whenever the search overshoots and reverses.
pub fn make_coherent<R: Rng + ?Sized>(
    u: &DMatrix<f64>,
    target_mu: f64,
    rng: &mut R,
    max_iter: usize,
) -> Result<CoherentBasis> {
    let (d, r) = u.shape();
    let ceiling = d as f64 / r as f64;
    if !(1.0..=ceiling).contains(&target_mu) {
        return Err(Error::Validation(format!("target coherence must lie in [1, {ceiling}], got {target_mu}")));
    }
    let mut basis = u.clone();
    let mut factor = 1.2_f64;
    let mut last_up: Option<bool> = None;
    let mut best: Option<CoherentBasis> = None;
    for iterations in 0..=max_iter {
        let lev = leverage_scores(&basis)?;
        let max = lev.iter().copied().fold(0.0, f64::max);
        let mu = ceiling * max;
        let gap = (mu - target_mu).abs();
        if best.as_ref().is_none_or(|b| gap < (b.mu - target_mu).abs()) {
            best = Some(CoherentBasis { basis: basis.clone(), mu, iterations, reached: false });
        }
        if gap <= COHERENCE_REL_TOL * target_mu {
            return Ok(CoherentBasis { basis, mu, iterations, reached: true });
        }
        if iterations == max_iter {
            break;
        }
        let ties: Vec<usize> = (0..d).filter(|&j| lev[j] >= max - 1e-9).collect();
        let row = ties[rng.random_range(0..ties.len())];
        let up = mu < target_mu;
        if last_up.is_some_and(|prev| prev != up) {
            factor = factor.sqrt();
        }
        last_up = Some(up);
        let s = if up { factor } else { factor.recip() };
        basis.row_mut(row).scale_mut(s);
    }
    Ok(best.expect("at least one evaluation"))
}

/// Observed entries of a matrix, aligned with the mask supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialMatrix {
    mask: ObservationMask,
    values: Vec<Vec<f64>>,
}

impl PartialMatrix {
    pub fn new(mask: ObservationMask, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != mask.cols() {
            return Err(Error::Validation(format!("{} value columns for {} mask columns", values.len(), mask.cols())));
        }
        if let Some(col) = (0..mask.cols()).find(|&i| values[i].len() != mask.support(i).len()) {
            return Err(Error::Validation(format!(
                "column {col} has {} values for {} observed entries",
                values[col].len(),
                mask.support(col).len()
            )));
        }
        Ok(Self { mask, values })
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column(&self, i: usize) -> (&[usize], &[f64]) {
        (self.mask.support(i), &self.values[i])
    }

    pub fn rows(&self) -> usize {
        self.mask.rows()
    }

    pub fn cols(&self) -> usize {
        self.mask.cols()
    }

    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        let mask = self.mask.select(cols)?;
        let values = cols.iter().map(|&c| self.values[c].clone()).collect();
        Ok(Self { mask, values })
    }

    /// Dense `d × N` matrix with zeros in unobserved positions.
    pub fn zero_filled(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        self.write_into(&mut m);
        m
    }

    /// Overwrites the observed positions of `m` with the observed values.
    pub fn write_into(&self, m: &mut DMatrix<f64>) {
        for (j, (support, vals)) in self.mask.supports().iter().zip(&self.values).enumerate() {
            for (&i, &x) in support.iter().zip(vals) {
                m[(i, j)] = x;
            }
        }
    }

    /// Values file: one line per column, whitespace-separated, in support order.
    pub fn values_to_text(&self) -> String {
        let mut out = String::new();
        for vals in &self.values {
            let line: Vec<String> = vals.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_values(mask: ObservationMask, text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(mask.cols());
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() && values.len() == mask.cols() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse { line: lineno + 1, message: format!("{tok:?}: {e}") })
                })
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }
        Self::new(mask, values)
    }
}

pub fn observe(x: &DMatrix<f64>, mask: &ObservationMask) -> Result<PartialMatrix> {
    if x.shape() != (mask.rows(), mask.cols()) {
        return Err(Error::Validation(format!(
            "matrix is {}×{}, mask is {}×{}",
            x.nrows(),
            x.ncols(),
            mask.rows(),
            mask.cols()
        )));
    }
    let values = mask
        .supports()
        .iter()
        .enumerate()
        .map(|(j, s)| s.iter().map(|&i| x[(i, j)]).collect())
        .collect();
    PartialMatrix::new(mask.clone(), values)
}

/// `U·θ` with `θ` the least-squares coefficients of `x_υ` in `U_υ`.
///
/// For `|υ| = r` this interpolates `x_υ` exactly. Solved through the SVD of
/// `U_υ`, which gives the same `θ` as the normal equations without squaring
/// the condition number.
pub fn complete_column_given_subspace(u: &DMatrix<f64>, x_upsilon: &[f64], upsilon: &[usize]) -> Result<DVector<f64>> {
    let (d, r) = u.shape();
    if upsilon.len() != x_upsilon.len() || upsilon.len() < r {
        return Err(Error::Validation(format!(
            "need at least r={r} observed rows with matching values, got {} rows and {} values",
            upsilon.len(),
            x_upsilon.len()
        )));
    }
    if let Some(&row) = upsilon.iter().find(|&&i| i >= d) {
        return Err(Error::Validation(format!("row {row} outside [0, {d})")));
    }
    let svd = linalg::svd(&u.select_rows(upsilon))?;
    if svd.rank(DEGENERACY_TOL) < r {
        return Err(Error::DegenerateSubspace(format!("restriction to rows {upsilon:?} is singular")));
    }
    let theta = svd.solve(&DVector::from_column_slice(x_upsilon), DEGENERACY_TOL);
    Ok(u * theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCompletion {
    pub estimate: DMatrix<f64>,
    /// Columns left as NaN, with the reason.
    pub incomplete: Vec<(usize, String)>,
}

/// Completes every column from its first `r` observed entries.
pub fn complete_given_subspace(u: &DMatrix<f64>, pm: &PartialMatrix) -> Result<SubspaceCompletion> {
    let (d, r) = u.shape();
    if d != pm.rows() {
        return Err(Error::Validation(format!("basis has {d} rows, data has {}", pm.rows())));
    }
    let mut estimate = DMatrix::from_element(d, pm.cols(), f64::NAN);
    let mut incomplete = Vec::new();
    for j in 0..pm.cols() {
        let (support, vals) = pm.column(j);
        if support.len() < r {
            incomplete.push((j, format!("{} observed entries, need {r}", support.len())));
            continue;
        }
        match complete_column_given_subspace(u, &vals[..r], &support[..r]) {
            Ok(col) => estimate.set_column(j, &col),
            Err(e) => incomplete.push((j, e.to_string())),
        }
    }
    Ok(SubspaceCompletion { estimate, incomplete })
}

/// Writes a dense matrix as headerless row-major CSV in scientific notation.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::Parse { line: lineno + 1, message: format!("{tok:?}: {e}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
