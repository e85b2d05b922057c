//! Random-partition certification of finite or unique completability.

use serde::{Deserialize, Serialize};

use super::{algorithm1_check, Arithmetic};
use crate::error::Result;
use crate::mask::ObservationMask;
use crate::seeding::{derived_rng, rng_from_seed, derive_seed};
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// `r + 1` disjoint groups each contain a condition-(ii) block.
    Unique,
    /// At least `r` disjoint groups each contain a condition-(ii) block.
    Finite,
    /// No attempt produced enough passing groups.
    Inconclusive,
    /// Too few informative columns (or `r ≥ d`) for any certificate.
    Fail,
}

impl Verdict {
    /// Process exit code used by the CLI.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Unique => 0,
            Verdict::Finite => 2,
            Verdict::Inconclusive => 3,
            Verdict::Fail => 4,
        }
    }
}

/// Evidence for a verdict. Column indices refer to the input mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub r: usize,
    pub seed: u64,
    pub partition: Vec<Vec<usize>>,
    pub per_group: Vec<bool>,
    pub attempts: usize,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertifyOptions {
    pub attempts: usize,
    pub mode: Arithmetic,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { attempts: 10, mode: Arithmetic::Exact }
    }
}

const REDUCE_STREAM: u64 = 0x5245_4455_4345;
const PARTITION_STREAM: u64 = 0x5041_5254;

/// Splits `order` into `groups` contiguous chunks whose sizes differ by at most one.
fn chunk(order: &[usize], groups: usize) -> Vec<Vec<usize>> {
    let base = order.len() / groups;
    let extra = order.len() % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let len = base + usize::from(g < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Certifies a mask by partitioning its informative columns into disjoint
/// groups and running the rank test on each.
///
/// The first attempt keeps the column order (so block-structured designs are
/// tested block by block); later attempts shuffle. The result depends only
/// on the inputs and `seed`.
pub fn certify(mask: &ObservationMask, r: usize, seed: u64, options: CertifyOptions) -> Result<Certificate> {
    let d = mask.rows();
    let fail = Certificate {
        verdict: Verdict::Fail,
        r,
        seed,
        partition: Vec::new(),
        per_group: Vec::new(),
        attempts: 0,
    };
    if r == 0 || r >= d {
        return Ok(fail);
    }
    let (reduced, report) = mask.reduce_to_r_plus_1(r, &mut derived_rng(seed, &[REDUCE_STREAM]))?;
    let informative = reduced.cols();
    let block = d - r;
    if informative < r * block {
        return Ok(fail);
    }
    let groups = if informative >= (r + 1) * block { r + 1 } else { r };

    let mut order: Vec<usize> = (0..informative).collect();
    let mut shuffle_rng = rng_from_seed(derive_seed(seed, &[PARTITION_STREAM]));
    let mut finite: Option<(Vec<Vec<usize>>, Vec<bool>)> = None;
    let mut last = (Vec::new(), Vec::new());
    let attempts = options.attempts.max(1);

    for attempt in 0..attempts {
        if attempt > 0 {
            order.shuffle(&mut shuffle_rng);
        }
        let parts = chunk(&order, groups);
        let per_group = parts
            .iter()
            .enumerate()
            .map(|(g, part)| {
                let mut rng = derived_rng(seed, &[attempt as u64, g as u64]);
                let sub = reduced.select(part)?;
                // An indeterminate floating decision counts as a failed group.
                Ok(algorithm1_check(&sub, r, &mut rng, options.mode).unwrap_or(false))
            })
            .collect::<Result<Vec<bool>>>()?;
        let passed = per_group.iter().filter(|&&p| p).count();
        let partition: Vec<Vec<usize>> = parts
            .iter()
            .map(|part| part.iter().map(|&k| report.retained[k]).collect())
            .collect();

        if groups == r + 1 && passed == groups {
            return Ok(Certificate {
                verdict: Verdict::Unique,
                r,
                seed,
                partition,
                per_group,
                attempts: attempt + 1,
            });
        }
        if passed >= r && finite.is_none() {
            if groups == r {
                return Ok(Certificate {
                    verdict: Verdict::Finite,
                    r,
                    seed,
                    partition,
                    per_group,
                    attempts: attempt + 1,
                });
            }
            finite = Some((partition.clone(), per_group.clone()));
        }
        last = (partition, per_group);
    }

    let (verdict, (partition, per_group)) = match finite {
        Some(evidence) => (Verdict::Finite, evidence),
        None => (Verdict::Inconclusive, last),
    };
    Ok(Certificate { verdict, r, seed, partition, per_group, attempts })
}
