//! Iterative hard-thresholded SVD completion.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::PartialMatrix;

pub const DEFAULT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub estimate: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖X_t − X_{t−1}‖_F / ‖X_{t−1}‖_F` at the last iteration.
    pub final_change: f64,
    pub changes: Vec<f64>,
}

/// Summary written next to a completed matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionMeta {
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub seed: Option<u64>,
}

impl CompletionResult {
    pub fn meta(&self, seed: Option<u64>) -> CompletionMeta {
        CompletionMeta {
            iterations: self.iterations,
            converged: self.converged,
            final_change: self.final_change,
            seed,
        }
    }
}

/// Best rank-`r` approximation. Each retained left singular vector is
/// signed so its largest-magnitude entry is positive.
pub fn truncate_svd_rank_r(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let (d, n) = x.shape();
    if r > d.min(n) {
        return Err(Error::Validation(format!("rank {r} exceeds min({d}, {n})")));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(d, n));
    }
    let svd = linalg::svd(x)?;
    let mut out = DMatrix::zeros(d, n);
    for k in 0..r {
        let mut left = svd.u.column(k).clone_owned();
        let mut right = svd.v_t.row(k).clone_owned();
        let anchor = left.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if anchor < 0.0 {
            left.neg_mut();
            right.neg_mut();
        }
        out += left * right * svd.s[k];
    }
    Ok(out)
}

/// Alternates rank-`r` truncation with reimposing the observed entries,
/// starting from zeros in the unobserved positions.
///
/// `max_iters` defaults to `d`, `tol` to `1e-13`. The estimate always agrees
/// with the observations exactly.
pub fn ihtsvd(pm: &PartialMatrix, r: usize, max_iters: Option<usize>, tol: Option<f64>) -> Result<CompletionResult> {
    ihtsvd_from(pm, r, pm.zero_filled(), max_iters, tol)
}

/// [`ihtsvd`] from a caller-supplied starting matrix.
pub fn ihtsvd_from(
    pm: &PartialMatrix,
    r: usize,
    start: DMatrix<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> Result<CompletionResult> {
    let (d, n) = (pm.rows(), pm.cols());
    if start.shape() != (d, n) {
        return Err(Error::Validation("starting matrix shape differs from the data".into()));
    }
    if r > d.min(n) {
        return Err(Error::Validation(format!("rank {r} exceeds min({d}, {n})")));
    }
    let max_iters = max_iters.unwrap_or(d);
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let mut current = start;
    pm.write_into(&mut current);
    let mut changes = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let mut next = truncate_svd_rank_r(&current, r)?;
        pm.write_into(&mut next);
        let denom = current.norm();
        let diff = (&next - &current).norm();
        let change = if denom > 0.0 { diff / denom } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        changes.push(change);
        current = next;
        if change <= tol {
            converged = true;
            break;
        }
    }
    Ok(CompletionResult {
        estimate: current,
        iterations: changes.len(),
        converged,
        final_change: changes.last().copied().unwrap_or(0.0),
        changes,
    })
}

/// `‖estimate − truth‖_F / ‖truth‖_F`.
pub fn normalized_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Validation("shape mismatch".into()));
    }
    let scale = truth.norm();
    if scale == 0.0 {
        return Err(Error::Validation("normalized error is undefined for a zero truth".into()));
    }
    Ok((estimate - truth).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ObservationMask;
    use crate::model::{gaussian_matrix, observe, random_factorization};
    use crate::patterns::gen_uniform_random;
    use crate::seeding::rng_from_seed;

    #[test]
    fn truncation_properties() {
        let mut rng = rng_from_seed(1);
        let x = random_factorization(12, 9, 3, &mut rng).unwrap().matrix();
        let t = truncate_svd_rank_r(&x, 3).unwrap();
        assert!((&t - &x).norm() <= 1e-10 * x.norm());
        let g = gaussian_matrix(6, 4, &mut rng);
        assert!((truncate_svd_rank_r(&g, 4).unwrap() - &g).norm() <= 1e-12 * g.norm());
        let low = truncate_svd_rank_r(&g, 2).unwrap();
        let sv = linalg::singular_values(&low).unwrap();
        assert!(sv[2] <= 1e-10 * sv[0]);
        assert!(truncate_svd_rank_r(&g, 5).is_err());
    }

    #[test]
    fn fully_observed_converges_immediately() {
        let x = random_factorization(8, 6, 2, &mut rng_from_seed(2)).unwrap().matrix();
        let full = ObservationMask::new(8, vec![(0..8).collect(); 6]).unwrap();
        let res = ihtsvd(&observe(&x, &full).unwrap(), 2, None, None).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.estimate, x);
    }

    #[test]
    fn observed_entries_are_exact_and_run_is_deterministic() {
        let mut rng = rng_from_seed(3);
        let x = random_factorization(30, 30, 2, &mut rng).unwrap().matrix();
        let mask = gen_uniform_random(30, 30, 15, &mut rng).unwrap();
        let pm = observe(&x, &mask).unwrap();
        let a = ihtsvd(&pm, 2, Some(50), None).unwrap();
        let b = ihtsvd(&pm, 2, Some(50), None).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(observe(&a.estimate, &mask).unwrap(), pm);
        assert!(a.iterations <= 50);
        assert!(a.changes.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn recovers_easy_instance() {
        let mut rng = rng_from_seed(4);
        let x = random_factorization(40, 40, 2, &mut rng).unwrap().matrix();
        let mask = gen_uniform_random(40, 40, 24, &mut rng).unwrap();
        let res = ihtsvd(&observe(&x, &mask).unwrap(), 2, Some(300), None).unwrap();
        assert!(normalized_error(&res.estimate, &x).unwrap() < 1e-10);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let mut rng = rng_from_seed(5);
        let x = random_factorization(10, 10, 2, &mut rng).unwrap().matrix();
        let mask = gen_uniform_random(10, 10, 6, &mut rng).unwrap();
        let res = ihtsvd_from(&observe(&x, &mask).unwrap(), 2, x.clone(), Some(5), None).unwrap();
        assert!(res.converged, "{:?}", res.changes);
        assert!((&res.estimate - &x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn error_metric() {
        let x = gaussian_matrix(4, 3, &mut rng_from_seed(6));
        let y = gaussian_matrix(4, 3, &mut rng_from_seed(7));
        assert_eq!(normalized_error(&x, &x).unwrap(), 0.0);
        assert!((normalized_error(&(&x * 2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        let lhs = normalized_error(&x, &y).unwrap() * y.norm();
        let rhs = normalized_error(&y, &x).unwrap() * x.norm();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(normalized_error(&x, &DMatrix::zeros(4, 3)).is_err());
    }
}
