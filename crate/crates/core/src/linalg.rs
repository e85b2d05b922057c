//! Dense SVD helpers on nalgebra matrices.
//!
//! nalgebra's own SVD returns inaccurate singular vectors for some
//! rank-deficient inputs, which is exactly the regime this crate lives in,
//! so decompositions go through faer.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD `M = U·diag(s)·Vᵀ` with `s` in nonincreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd { u: DMatrix::zeros(rows, 0), s: Vec::new(), v_t: DMatrix::zeros(0, cols) });
    }
    let dec = to_faer(m).thin_svd().map_err(|e| Error::Validation(format!("SVD failed: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
    let u = DMatrix::from_fn(rows, k, |i, j| fu[(i, order[j])]);
    let v_t = DMatrix::from_fn(k, cols, |i, j| fv[(j, order[i])]);
    let s = order.iter().map(|&j| fs[j]).collect();
    Ok(Svd { u, s, v_t })
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows().min(m.ncols()) == 0 {
        return Ok(Vec::new());
    }
    let mut s = to_faer(m).singular_values().map_err(|e| Error::Validation(format!("SVD failed: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

impl Svd {
    pub fn max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.max();
        self.s.iter().filter(|&&x| x > cut).count()
    }

    /// Minimum-norm least-squares solution, discarding singular values at
    /// or below `rel_tol · σ_max`.
    pub fn solve(&self, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
        let cut = rel_tol * self.max();
        let mut coeffs = self.u.transpose() * b;
        for (c, &s) in coeffs.iter_mut().zip(&self.s) {
            *c = if s > cut { *c / s } else { 0.0 };
        }
        self.v_t.transpose() * coeffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian_matrix;
    use crate::seeding::rng_from_seed;

    #[test]
    fn rank_deficient_recomposition() {
        let mut rng = rng_from_seed(104);
        for (d, n, r) in [(10, 10, 2), (30, 20, 3), (7, 12, 1)] {
            let x = gaussian_matrix(d, r, &mut rng) * gaussian_matrix(r, n, &mut rng);
            let dec = svd(&x).unwrap();
            let rec = &dec.u * DMatrix::from_diagonal(&DVector::from_vec(dec.s.clone())) * &dec.v_t;
            assert!((rec - &x).norm() <= 1e-13 * x.norm());
            assert!(dec.s.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(dec.rank(1e-10), r);
        }
    }

    #[test]
    fn least_squares_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = svd(&a).unwrap().solve(&b, 1e-12);
        assert!((x - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-12);
    }
}
