//! Polynomial constraints on the echelon coordinates `V` of a candidate
//! subspace, one per column observed on exactly `r + 1` rows.
//!
//! With `U = [I; V]` and a split of `ω` into `△` (r rows) and `▽` (one row),
//! the constraint is
//!
//! ```text
//! f = det(U_△)·x_▽ − U_▽·adj(U_△)·x_△,
//! ```
//!
//! which is the determinant of the bordered matrix `[U_ω | x_ω]` with the `▽`
//! row placed last. Changing the split permutes rows, so it only flips the sign.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{gaussian_matrix, PartialMatrix, Subspace};
use crate::seeding::rng_from_seed;

/// Default relative tolerance for accepting solutions and for [`fits`].
pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_GN_ITERS: usize = 200;
const MAX_HALVINGS: usize = 40;
/// Relative singular-value floor for a restriction `U_ω` to count as full rank.
const RESTRICTION_RANK_TOL: f64 = 1e-8;
/// Relative singular-value floor for the rank-1 linear system.
const RANK1_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnConstraint {
    omega: Vec<usize>,
    values: Vec<f64>,
    down_pos: usize,
}

impl ColumnConstraint {
    /// `omega` sorted, `values` aligned; `▽` defaults to the largest row.
    pub fn new(omega: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 || omega.len() != values.len() {
            return Err(Error::Validation("constraint needs r+1 ≥ 2 rows with aligned values".into()));
        }
        let down_pos = omega.len() - 1;
        Ok(Self { omega, values, down_pos })
    }

    /// The same constraint with `▽ = ω[pos]`.
    pub fn with_split(&self, pos: usize) -> Result<Self> {
        if pos >= self.omega.len() {
            return Err(Error::Validation(format!("split position {pos} outside ω")));
        }
        Ok(Self { down_pos: pos, ..self.clone() })
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row index of `▽`.
    pub fn down(&self) -> usize {
        self.omega[self.down_pos]
    }

    /// Rows of `△`, in increasing order.
    pub fn up(&self) -> Vec<usize> {
        self.ordered().into_iter().take(self.omega.len() - 1).map(|k| self.omega[k]).collect()
    }

    /// Positions within `ω` in bordered-matrix order: `△` ascending, then `▽`.
    fn ordered(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.omega.len()).filter(|&k| k != self.down_pos).collect();
        order.push(self.down_pos);
        order
    }

    /// Bordered matrix `[U_ω | x_ω]`, rows in `△, ▽` order.
    fn bordered(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let r = u.ncols();
        let order = self.ordered();
        DMatrix::from_fn(r + 1, r + 1, |i, k| {
            let p = order[i];
            if k < r {
                u[(self.omega[p], k)]
            } else {
                self.values[p]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    d: usize,
    r: usize,
    constraints: Vec<ColumnConstraint>,
}

impl ConstraintSystem {
    pub fn new(d: usize, r: usize, constraints: Vec<ColumnConstraint>) -> Result<Self> {
        if r == 0 || r >= d {
            return Err(Error::Validation(format!("need 1 ≤ r < d, got r={r}, d={d}")));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.omega.len() != r + 1 || c.omega.iter().any(|&row| row >= d) {
                return Err(Error::Validation(format!("constraint {i} is not an (r+1)-subset of [0, {d})")));
            }
        }
        Ok(Self { d, r, constraints })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn constraints(&self) -> &[ColumnConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Replaces the split of constraint `i`.
    pub fn with_split(&self, i: usize, pos: usize) -> Result<Self> {
        let mut out = self.clone();
        out.constraints[i] = self.constraints[i].with_split(pos)?;
        Ok(out)
    }

    fn check_v(&self, v: &DMatrix<f64>) -> Result<()> {
        if v.shape() != (self.d - self.r, self.r) {
            return Err(Error::Validation(format!(
                "V must be {}×{}, got {}×{}",
                self.d - self.r,
                self.r,
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(())
    }
}

/// One constraint per column; every column must have exactly `r + 1` entries.
pub fn build_system(pm: &PartialMatrix, r: usize) -> Result<ConstraintSystem> {
    if let Some(col) = (0..pm.cols()).find(|&i| pm.mask().support(i).len() != r + 1) {
        return Err(Error::Precondition(format!(
            "column {col} has {} entries, expected exactly r+1={}; reduce the mask first",
            pm.mask().support(col).len(),
            r + 1
        )));
    }
    let constraints = (0..pm.cols())
        .map(|i| {
            let (omega, vals) = pm.column(i);
            ColumnConstraint::new(omega.to_vec(), vals.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    ConstraintSystem::new(pm.rows(), r, constraints)
}

/// `[I; V]`.
pub fn echelon_basis(v: &DMatrix<f64>) -> DMatrix<f64> {
    let r = v.ncols();
    let mut u = DMatrix::zeros(v.nrows() + r, r);
    u.view_mut((0, 0), (r, r)).fill_with_identity();
    u.view_mut((r, 0), (v.nrows(), r)).copy_from(v);
    u
}

fn constraint_value(c: &ColumnConstraint, u: &DMatrix<f64>) -> f64 {
    let r = u.ncols();
    let up = c.up();
    let u_up = u.select_rows(&up);
    let x_up = DVector::from_iterator(r, c.ordered().into_iter().take(r).map(|p| c.values[p]));
    let det = u_up.determinant();
    let x_down = c.values[c.down_pos];
    let u_down = u.row(c.down());
    match u_up.clone().lu().solve(&x_up) {
        // adj(U_△)·x_△ = det(U_△)·U_△⁻¹x_△
        Some(sol) if det != 0.0 && sol.iter().all(|x| x.is_finite()) => det * x_down - det * (u_down * sol)[0],
        _ => c.bordered(u).determinant(),
    }
}

/// `f_i(V)` for every constraint.
pub fn residual(v: &DMatrix<f64>, cs: &ConstraintSystem) -> Result<Vec<f64>> {
    cs.check_v(v)?;
    let u = echelon_basis(v);
    Ok(cs.constraints.iter().map(|c| constraint_value(c, &u)).collect())
}

/// `f_i(V)` divided by the product of the bordered matrix's row norms, which
/// bounds `|f_i|` (Hadamard). Scale-free, in `[−1, 1]`.
pub fn relative_residual(v: &DMatrix<f64>, cs: &ConstraintSystem) -> Result<Vec<f64>> {
    cs.check_v(v)?;
    let u = echelon_basis(v);
    Ok(cs
        .constraints
        .iter()
        .map(|c| {
            let bound: f64 = c.bordered(&u).row_iter().map(|row| row.norm()).product();
            if bound == 0.0 {
                0.0
            } else {
                constraint_value(c, &u) / bound
            }
        })
        .collect())
}

/// Matrix of cofactors `C[i][k] = (−1)^{i+k} det(M without row i, column k)`.
fn cofactors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, k| {
        let minor = m.clone().remove_row(i).remove_column(k);
        let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Jacobian of `residual` with respect to `V`, flattened column-major.
pub fn jacobian(v: &DMatrix<f64>, cs: &ConstraintSystem) -> Result<DMatrix<f64>> {
    cs.check_v(v)?;
    let (d, r) = (cs.d, cs.r);
    let rows_v = d - r;
    let u = echelon_basis(v);
    let mut jac = DMatrix::zeros(cs.len(), rows_v * r);
    for (i, c) in cs.constraints.iter().enumerate() {
        let cof = cofactors(&c.bordered(&u));
        for (bi, p) in c.ordered().into_iter().enumerate() {
            let row = c.omega[p];
            if row < r {
                continue;
            }
            for k in 0..r {
                jac[(i, k * rows_v + (row - r))] = cof[(bi, k)];
            }
        }
    }
    Ok(jac)
}

/// The unique rank-1 subspace fitting the data, found by solving the linear
/// system `u_△·x_▽ − u_▽·x_△ = 0` in the unknowns `v_1, …, v_{d−1}`.
pub fn solve_rank1(pm: &PartialMatrix) -> Result<Subspace> {
    let cs = build_system(pm, 1)?;
    let (a, b) = rank1_system(&cs);
    let unknowns = cs.d - 1;
    let svd = linalg::svd(&a)?;
    let rank = svd.rank(RANK1_TOL);
    if rank < unknowns {
        return Err(Error::Underdetermined { rank, unknowns });
    }
    let v = svd.solve(&b, RANK1_TOL);
    Subspace::new(cs.d, 1, DMatrix::from_column_slice(unknowns, 1, v.as_slice()), None)
}

/// Row-normalized linear system `A v = b` of a rank-1 constraint system.
pub fn rank1_system(cs: &ConstraintSystem) -> (DMatrix<f64>, DVector<f64>) {
    let unknowns = cs.d - 1;
    let mut a = DMatrix::zeros(cs.len(), unknowns);
    let mut b = DVector::zeros(cs.len());
    for (i, c) in cs.constraints.iter().enumerate() {
        let (lo, hi) = (c.omega[0], c.omega[1]);
        let (x_lo, x_hi) = (c.values[0], c.values[1]);
        // u_lo·x_hi − u_hi·x_lo = 0 with u_0 = 1, u_k = v_{k−1}.
        if lo == 0 {
            a[(i, hi - 1)] = x_lo;
            b[i] = x_hi;
        } else {
            a[(i, lo - 1)] = x_hi;
            a[(i, hi - 1)] = -x_lo;
        }
        let norm = (a.row(i).norm_squared() + b[i] * b[i]).sqrt();
        if norm > 0.0 {
            a.row_mut(i).scale_mut(norm.recip());
            b[i] /= norm;
        }
    }
    (a, b)
}

/// Whether every `U_ω` has full column rank at `V`.
fn restrictions_full_rank(v: &DMatrix<f64>, cs: &ConstraintSystem) -> bool {
    let u = echelon_basis(v);
    cs.constraints.iter().all(|c| {
        linalg::svd(&u.select_rows(&c.omega)).is_ok_and(|svd| svd.rank(RESTRICTION_RANK_TOL) == cs.r)
    })
}

fn norm2(f: &[f64]) -> f64 {
    f.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Gauss–Newton on `‖F(V)‖²` from `v0`.
pub fn gauss_newton(cs: &ConstraintSystem, v0: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut v = v0;
    let mut f = residual(&v, cs)?;
    let mut fnorm = norm2(&f);
    for _ in 0..MAX_GN_ITERS {
        if fnorm == 0.0 || !fnorm.is_finite() {
            break;
        }
        let jac = jacobian(&v, cs)?;
        let rhs = -DVector::from_vec(f.clone());
        let svd = linalg::svd(&jac)?;
        if svd.max() == 0.0 {
            break;
        }
        let step = svd.solve(&rhs, 1e-14);
        let step = DMatrix::from_column_slice(v.nrows(), v.ncols(), step.as_slice());
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &v + &step * alpha;
            let ft = residual(&trial, cs)?;
            let nt = norm2(&ft);
            if nt < fnorm {
                let moved = (&step * alpha).norm();
                v = trial;
                f = ft;
                fnorm = nt;
                improved = true;
                if moved <= 1e-15 * (1.0 + v.norm()) {
                    return Ok(v);
                }
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(v)
}

/// Multi-start Gauss–Newton search for subspaces satisfying every constraint.
///
/// Converged points with max relative residual `≤ tol` and full-rank
/// restrictions are clustered (Frobenius distance between echelon blocks
/// `≤ 100·tol`); one representative per cluster is returned, in discovery
/// order. An empty result is not a proof that no solution exists.
pub fn search_solutions<R: Rng + ?Sized>(
    cs: &ConstraintSystem,
    restarts: usize,
    rng: &mut R,
    tol: f64,
) -> Result<Vec<Subspace>> {
    let (d, r) = (cs.d, cs.r);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let found: Vec<Option<DMatrix<f64>>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Option<DMatrix<f64>>> {
            let mut local = rng_from_seed(seed);
            // Solutions may sit far out in the echelon chart, so start scales
            // are spread log-uniformly over [1e-1, 1e3].
            let scale = 10f64.powf(local.random_range(-1.0..3.0));
            let v = gauss_newton(cs, gaussian_matrix(d - r, r, &mut local) * scale)?;
            let rel = relative_residual(&v, cs)?;
            let ok = v.iter().all(|x| x.is_finite())
                && rel.iter().all(|x| x.abs() <= tol)
                && restrictions_full_rank(&v, cs);
            Ok(ok.then_some(v))
        })
        .collect::<Result<_>>()?;
    let mut reps: Vec<DMatrix<f64>> = Vec::new();
    for v in found.into_iter().flatten() {
        if !reps.iter().any(|rep| (rep - &v).norm() <= 1e2 * tol * (1.0 + rep.norm())) {
            reps.push(v);
        }
    }
    reps.into_iter().map(|v| Subspace::new(d, r, v, None)).collect()
}

/// Whether every observed column lies (relatively) within `tol` of the
/// subspace restricted to its rows.
pub fn fits(s: &Subspace, pm: &PartialMatrix, tol: f64) -> bool {
    if s.d() != pm.rows() {
        return false;
    }
    let u = s.basis();
    (0..pm.cols()).all(|j| {
        let (omega, vals) = pm.column(j);
        let x = DVector::from_column_slice(vals);
        let xnorm = x.norm();
        if xnorm == 0.0 {
            return true;
        }
        let restricted = u.select_rows(omega);
        match linalg::svd(&restricted) {
            Ok(svd) => (&restricted * svd.solve(&x, 1e-12) - &x).norm() <= tol * xnorm,
            Err(_) => false,
        }
    })
}
