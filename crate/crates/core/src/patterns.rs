//! Generators for structured and random sampling patterns, and the
//! uniform-sampling bound on entries per column.

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::ObservationMask;

fn check_rank(d: usize, r: usize) -> Result<()> {
    if r == 0 || r >= d {
        return Err(Error::Validation(format!("need 1 ≤ r < d, got r={r}, d={d}")));
    }
    Ok(())
}

/// `r + 1` copies of the block `[1; I]`: column `j` observes the first `r`
/// rows plus row `r + (j mod (d − r))`.
pub fn gen_example1(d: usize, r: usize) -> Result<ObservationMask> {
    check_rank(d, r)?;
    let block = d - r;
    let supports = (0..(r + 1) * block)
        .map(|j| (0..r).chain(std::iter::once(r + j % block)).collect())
        .collect();
    ObservationMask::new(d, supports)
}

/// `r + 1` banded blocks; column `i` of each block observes rows `i..=i + r`.
pub fn gen_example5_staircase(d: usize, r: usize) -> Result<ObservationMask> {
    check_rank(d, r)?;
    let block = d - r;
    let supports = (0..(r + 1) * block)
        .map(|j| {
            let i = j % block;
            (i..=i + r).collect()
        })
        .collect();
    ObservationMask::new(d, supports)
}

/// `n` columns, each observing a uniformly random `ell`-subset of the rows.
pub fn gen_uniform_random<R: Rng + ?Sized>(d: usize, n: usize, ell: usize, rng: &mut R) -> Result<ObservationMask> {
    if ell == 0 || ell > d {
        return Err(Error::Validation(format!("need 1 ≤ ℓ ≤ d, got ℓ={ell}, d={d}")));
    }
    let supports = (0..n).map(|_| index::sample(rng, d, ell).into_vec()).collect();
    ObservationMask::new(d, supports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleBound {
    pub ell: usize,
    /// False when `r > d/6`, where the bound carries no guarantee.
    pub hypothesis_holds: bool,
}

/// Entries per column that make uniform sampling finitely completable with
/// probability at least `1 − ε`: `⌈max{12(ln(d/ε) + 1), 2r}⌉`.
pub fn theorem3_min_ell(d: usize, r: usize, eps: f64) -> Result<SampleBound> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Validation(format!("ε must lie in (0, 1], got {eps}")));
    }
    if d == 0 {
        return Err(Error::Validation("d must be positive".into()));
    }
    let log_term = 12.0 * ((d as f64 / eps).ln() + 1.0);
    let ell = log_term.max(2.0 * r as f64).ceil() as usize;
    Ok(SampleBound { ell, hypothesis_holds: 6 * r <= d })
}

/// Four columns on four rows, each missing a different row. With `r = 2`
/// it is finitely but not uniquely completable.
pub fn gen_example6() -> ObservationMask {
    ObservationMask::new(4, vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]])
        .expect("fixture is valid")
}

/// A 5×5 pattern whose third column has `r + 2 = 4` entries, and its 5×6
/// expansion splitting that column into two `r + 1` columns.
pub fn gen_example8() -> (ObservationMask, ObservationMask) {
    let omega = ObservationMask::new(
        5,
        vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 3, 4], vec![2, 3, 4], vec![2, 3, 4]],
    )
    .expect("fixture is valid");
    let expanded = ObservationMask::new(
        5,
        vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4], vec![2, 3, 4], vec![2, 3, 4]],
    )
    .expect("fixture is valid");
    (omega, expanded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::check_cond_ii_exact;
    use crate::seeding::rng_from_seed;

    #[test]
    fn example1_small_case() {
        let m = gen_example1(4, 1).unwrap();
        let expect: Vec<Vec<usize>> =
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![0, 1], vec![0, 2], vec![0, 3]];
        assert_eq!(m.supports(), expect.as_slice());
        assert!(gen_example1(3, 3).is_err());
    }

    #[test]
    fn staircase_blocks_pass_condition_ii() {
        let m = gen_example5_staircase(5, 2).unwrap();
        assert_eq!(m.cols(), 9);
        assert_eq!(m.support(1), &[1, 2, 3]);
        for k in 0..3 {
            let block = m.select(&[3 * k, 3 * k + 1, 3 * k + 2]).unwrap();
            assert!(check_cond_ii_exact(&block, 2).unwrap().holds);
        }
    }

    #[test]
    fn uniform_is_seed_deterministic_and_saturates() {
        let a = gen_uniform_random(10, 5, 4, &mut rng_from_seed(3)).unwrap();
        let b = gen_uniform_random(10, 5, 4, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.supports().iter().all(|s| s.len() == 4));
        let full = gen_uniform_random(6, 3, 6, &mut rng_from_seed(0)).unwrap();
        assert!(full.supports().iter().all(|s| s == &vec![0, 1, 2, 3, 4, 5]));
        assert!(gen_uniform_random(6, 3, 7, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn uniform_row_coverage_concentrates() {
        let (d, n, ell) = (20, 1000, 5);
        let m = gen_uniform_random(d, n, ell, &mut rng_from_seed(8)).unwrap();
        let mut counts = vec![0usize; d];
        for s in m.supports() {
            for &i in s {
                counts[i] += 1;
            }
        }
        let p = ell as f64 / d as f64;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - mean).abs() < 5.0 * sigma), "{counts:?}");
    }

    #[test]
    fn sample_bound_values() {
        assert_eq!(theorem3_min_ell(100, 2, 1.0).unwrap(), SampleBound { ell: 68, hypothesis_holds: true });
        assert_eq!(theorem3_min_ell(100, 40, 1.0).unwrap(), SampleBound { ell: 80, hypothesis_holds: false });
        assert!(theorem3_min_ell(100, 2, 0.01).unwrap().ell >= 68);
        assert!(theorem3_min_ell(100, 2, 0.0).is_err());
    }

    #[test]
    fn example8_shapes() {
        let (omega, expanded) = gen_example8();
        assert_eq!(omega.support(2).len(), 4);
        assert_eq!(expanded.cols(), 6);
        let (reduced, _) = omega.reduce_to_r_plus_1(2, &mut rng_from_seed(1)).unwrap();
        assert_eq!(reduced.cols(), 5);
        assert!(reduced.supports().iter().all(|s| s.len() == 3));
    }
}
