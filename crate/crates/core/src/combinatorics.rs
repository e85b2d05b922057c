//! Exhaustive checkers for the two column-subset coverage conditions.
//!
//! * condition (i):  every nonempty column subset covers `m ≥ n/r + r` rows,
//!   compared exactly as `r·m ≥ n + r²`;
//! * condition (ii): every nonempty column subset covers `m ≥ n + r` rows.
//!
//! These are exponential in the column count and serve as the ground truth
//! for the randomized check in [`crate::algebraic`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ColumnSubsetStats, ObservationMask};

/// Default column cap for exhaustive condition (i) checks.
pub const COND_I_CAP: usize = 20;
/// Default column cap for exhaustive condition (ii) and surplus checks.
pub const COND_II_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `m ≥ n/r + r`
    I,
    /// `m ≥ n + r`
    II,
}

impl Condition {
    /// True when a subset with `n` columns covering `m` rows violates the condition.
    pub fn violated_by(self, r: usize, n: usize, m: usize) -> bool {
        match self {
            Condition::I => r * m < n + r * r,
            Condition::II => m < n + r,
        }
    }
}

/// A column subset that violates a condition, with its stats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Column indices into the checked mask.
    pub columns: Vec<usize>,
    pub stats: ColumnSubsetStats,
}

/// Outcome of a condition check; `violation` is present iff `holds` is false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub holds: bool,
    /// The inequality the witness violates.
    pub condition: Condition,
    pub violation: Option<Violation>,
}

impl ConditionWitness {
    fn holding(condition: Condition) -> Self {
        Self { holds: true, condition, violation: None }
    }

    fn violated(condition: Condition, violation: Violation) -> Self {
        Self { holds: false, condition, violation: Some(violation) }
    }
}

/// Row-coverage bitsets for every column of a mask.
struct Coverage {
    words: usize,
    columns: Vec<Vec<u64>>,
}

impl Coverage {
    fn new(mask: &ObservationMask) -> Self {
        let words = mask.rows().div_ceil(64);
        let columns = mask
            .supports()
            .iter()
            .map(|support| {
                let mut bits = vec![0u64; words];
                for &row in support {
                    bits[row / 64] |= 1 << (row % 64);
                }
                bits
            })
            .collect();
        Self { words, columns }
    }

    fn union_into(&self, base: &[u64], col: usize, out: &mut [u64]) -> usize {
        let mut count = 0;
        for ((o, b), c) in out.iter_mut().zip(base).zip(&self.columns[col]) {
            *o = b | c;
            count += o.count_ones() as usize;
        }
        count
    }
}

/// Searches subsets in increasing cardinality for one violating `cond`.
///
/// Since `m` can only grow as columns are added, a partial subset whose
/// coverage already satisfies the inequality at the target size is pruned.
fn smallest_violation(mask: &ObservationMask, r: usize, cond: Condition) -> Option<Violation> {
    let cov = Coverage::new(mask);
    let total = mask.cols();
    let mut unions = vec![vec![0u64; cov.words]; total + 1];
    let mut chosen = Vec::with_capacity(total);

    #[allow(clippy::too_many_arguments)]
    fn descend(
        cov: &Coverage,
        r: usize,
        cond: Condition,
        size: usize,
        start: usize,
        total: usize,
        unions: &mut [Vec<u64>],
        chosen: &mut Vec<usize>,
    ) -> Option<usize> {
        let depth = chosen.len();
        for col in start..=total - (size - depth) {
            let (head, tail) = unions.split_at_mut(depth + 1);
            let m = cov.union_into(&head[depth], col, &mut tail[0]);
            if !cond.violated_by(r, size, m) {
                continue;
            }
            chosen.push(col);
            if depth + 1 == size {
                return Some(m);
            }
            if let Some(m) = descend(cov, r, cond, size, col + 1, total, unions, chosen) {
                return Some(m);
            }
            chosen.pop();
        }
        None
    }

    for size in 1..=total {
        chosen.clear();
        if let Some(m) = descend(&cov, r, cond, size, 0, total, &mut unions, &mut chosen) {
            return Some(Violation {
                columns: chosen,
                stats: ColumnSubsetStats { n: size, m },
            });
        }
    }
    None
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

/// Exhaustive condition (ii) check with the default cap.
pub fn check_cond_ii_exact(mask: &ObservationMask, r: usize) -> Result<ConditionWitness> {
    check_cond_ii_exact_capped(mask, r, COND_II_CAP)
}

/// Exhaustive condition (ii) check. A failing result carries a
/// minimum-cardinality violating subset.
pub fn check_cond_ii_exact_capped(
    mask: &ObservationMask,
    r: usize,
    cap: usize,
) -> Result<ConditionWitness> {
    require_r_plus_1(mask, r)?;
    if mask.cols() > cap {
        return Err(Error::CapExceeded {
            columns: mask.cols(),
            cap,
            suggestion: "algorithm1_check",
        });
    }
    Ok(match smallest_violation(mask, r, Condition::II) {
        Some(v) => ConditionWitness::violated(Condition::II, v),
        None => ConditionWitness::holding(Condition::II),
    })
}

/// Exhaustive condition (i) check with the default cap.
pub fn check_cond_i_exact(mask: &ObservationMask, r: usize) -> Result<ConditionWitness> {
    check_cond_i_exact_capped(mask, r, COND_I_CAP)
}

/// Exhaustive condition (i) check on a mask with exactly `r(d − r)` columns.
pub fn check_cond_i_exact_capped(
    mask: &ObservationMask,
    r: usize,
    cap: usize,
) -> Result<ConditionWitness> {
    require_r_plus_1(mask, r)?;
    let d = mask.rows();
    if r >= d || mask.cols() != r * (d - r) {
        return Err(Error::Precondition(format!(
            "condition (i) needs exactly r(d-r) columns; have {} for d={d}, r={r}",
            mask.cols()
        )));
    }
    if mask.cols() > cap {
        return Err(Error::CapExceeded {
            columns: mask.cols(),
            cap,
            suggestion: "check_cond_i_via_partition",
        });
    }
    Ok(match smallest_violation(mask, r, Condition::I) {
        Some(v) => ConditionWitness::violated(Condition::I, v),
        None => ConditionWitness::holding(Condition::I),
    })
}

/// Minimum of `m − n` over all nonempty column subsets (default cap).
pub fn min_surplus(mask: &ObservationMask) -> Result<i64> {
    min_surplus_capped(mask, COND_II_CAP)
}

pub fn min_surplus_capped(mask: &ObservationMask, cap: usize) -> Result<i64> {
    let total = mask.cols();
    if total > cap {
        return Err(Error::CapExceeded { columns: total, cap, suggestion: "algorithm1_check" });
    }
    if total == 0 {
        return Err(Error::Precondition("surplus of a mask without columns".into()));
    }
    let cov = Coverage::new(mask);
    let mut unions = vec![vec![0u64; cov.words]; total + 1];

    // Depth-first over all subsets: each stack frame extends the subset with a later column.
    fn walk(
        cov: &Coverage,
        start: usize,
        depth: usize,
        total: usize,
        unions: &mut [Vec<u64>],
        best: &mut i64,
    ) {
        for col in start..total {
            let (head, tail) = unions.split_at_mut(depth + 1);
            let m = cov.union_into(&head[depth], col, &mut tail[0]) as i64;
            let surplus = m - (depth as i64 + 1);
            *best = (*best).min(surplus);
            // Each further column lowers the surplus by at most one.
            if surplus - ((total - col - 1) as i64) < *best {
                walk(cov, col + 1, depth + 1, total, unions, best);
            }
        }
    }

    let mut best = i64::MAX;
    walk(&cov, 0, 0, total, &mut unions, &mut best);
    Ok(best)
}

/// Sufficient check for condition (i): every group of an `r`-way partition
/// into blocks of `d − r` columns satisfies condition (ii).
///
/// A failing group only shows this partition does not certify (i); it says
/// nothing about (i) itself. The returned violation is the failing group's
/// condition (ii) witness, with indices into `mask`.
pub fn check_cond_i_via_partition(
    mask: &ObservationMask,
    r: usize,
    partition: &[Vec<usize>],
) -> Result<ConditionWitness> {
    require_r_plus_1(mask, r)?;
    let d = mask.rows();
    if r >= d {
        return Err(Error::Validation(format!("rank {r} must be below d={d}")));
    }
    if partition.len() != r {
        return Err(Error::Validation(format!(
            "partition has {} groups, expected r={r}",
            partition.len()
        )));
    }
    if mask.cols() != r * (d - r) {
        return Err(Error::Validation(format!(
            "mask has {} columns, expected r(d-r)={}",
            mask.cols(),
            r * (d - r)
        )));
    }
    let mut seen = vec![false; mask.cols()];
    for (g, group) in partition.iter().enumerate() {
        if group.len() != d - r {
            return Err(Error::Validation(format!(
                "group {g} has {} columns, expected d-r={}",
                group.len(),
                d - r
            )));
        }
        for &col in group {
            if col >= mask.cols() || std::mem::replace(&mut seen[col], true) {
                return Err(Error::Validation(format!(
                    "group {g}: column {col} is out of range or repeated"
                )));
            }
        }
    }

    for group in partition {
        let witness = check_cond_ii_exact(&mask.select(group)?, r)?;
        if let Some(v) = witness.violation {
            let columns = v.columns.iter().map(|&k| group[k]).collect();
            return Ok(ConditionWitness::violated(
                Condition::II,
                Violation { columns, stats: v.stats },
            ));
        }
    }
    Ok(ConditionWitness::holding(Condition::I))
}

/// Searches for a `d − r` column block satisfying condition (ii).
///
/// Exhaustive over all blocks; intended as an oracle for small masks.
pub fn find_cond_ii_block(mask: &ObservationMask, r: usize) -> Result<Option<Vec<usize>>> {
    require_r_plus_1(mask, r)?;
    let d = mask.rows();
    if r >= d {
        return Err(Error::Validation(format!("rank {r} must be below d={d}")));
    }
    let size = d - r;
    let total = mask.cols();
    if total < size {
        return Ok(None);
    }
    if total > COND_II_CAP {
        return Err(Error::CapExceeded { columns: total, cap: COND_II_CAP, suggestion: "algorithm1_check" });
    }
    let mut block: Vec<usize> = (0..size).collect();
    loop {
        if smallest_violation(&mask.select(&block)?, r, Condition::II).is_none() {
            return Ok(Some(block));
        }
        // Next combination in lexicographic order.
        let mut i = size;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if block[i] < total - size + i {
                break;
            }
        }
        block[i] += 1;
        for j in i + 1..size {
            block[j] = block[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns;

    fn mask(d: usize, supports: &[&[usize]]) -> ObservationMask {
        ObservationMask::new(d, supports.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn duplicate_columns_fail_ii() {
        let m = mask(5, &[&[0, 1, 2], &[0, 1, 2]]);
        let w = check_cond_ii_exact(&m, 2).unwrap();
        assert!(!w.holds);
        let v = w.violation.unwrap();
        assert_eq!(v.columns, vec![0, 1]);
        assert_eq!(v.stats, ColumnSubsetStats { n: 2, m: 3 });
    }

    #[test]
    fn example1_block_satisfies_ii() {
        for (d, r) in [(4, 1), (6, 2), (9, 3)] {
            let full = patterns::gen_example1(d, r).unwrap();
            let block: Vec<usize> = (0..d - r).collect();
            assert!(check_cond_ii_exact(&full.select(&block).unwrap(), r).unwrap().holds);
        }
    }

    #[test]
    fn example6_pairs_satisfy_ii() {
        let m = patterns::gen_example6();
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(check_cond_ii_exact(&m.select(&[a, b]).unwrap(), 2).unwrap().holds);
            }
        }
    }

    #[test]
    fn cond_i_examples() {
        assert!(check_cond_i_exact(&patterns::gen_example6(), 2).unwrap().holds);
        let bad = mask(4, &[&[0, 1, 2], &[0, 1, 2], &[0, 1, 2], &[0, 1, 2]]);
        let w = check_cond_i_exact(&bad, 2).unwrap();
        assert!(!w.holds);
        let v = w.violation.unwrap();
        // r·m ≥ n + r² first fails at n = 3 (6 < 7).
        assert_eq!(v.stats, ColumnSubsetStats { n: 3, m: 3 });
        for (d, r) in [(6, 2), (5, 1), (7, 2)] {
            let full = patterns::gen_example1(d, r).unwrap();
            let tilde: Vec<usize> = (0..r * (d - r)).collect();
            assert!(check_cond_i_exact(&full.select(&tilde).unwrap(), r).unwrap().holds);
        }
    }

    #[test]
    fn cond_i_rejects_wrong_shape() {
        let m = mask(6, &[&[0, 1, 2]]);
        assert!(matches!(check_cond_i_exact(&m, 2), Err(Error::Precondition(_))));
        let wrong_size = mask(4, &[&[0, 1], &[0, 1, 2], &[0, 1, 3], &[1, 2, 3]]);
        assert!(matches!(check_cond_i_exact(&wrong_size, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn caps_are_enforced() {
        let big = patterns::gen_example1(30, 1).unwrap();
        assert!(matches!(
            check_cond_ii_exact(&big, 1),
            Err(Error::CapExceeded { suggestion: "algorithm1_check", .. })
        ));
        let tilde = big.select(&(0..29).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            check_cond_i_exact(&tilde, 1),
            Err(Error::CapExceeded { suggestion: "check_cond_i_via_partition", .. })
        ));
    }

    #[test]
    fn min_surplus_examples() {
        assert_eq!(min_surplus(&mask(5, &[&[0, 1, 2]])).unwrap(), 2);
        assert_eq!(min_surplus(&mask(5, &[&[0, 1, 2], &[0, 1, 2]])).unwrap(), 1);
        assert_eq!(min_surplus(&patterns::gen_example6()).unwrap(), 0);
    }

    #[test]
    fn partition_check_on_example1() {
        for (d, r) in [(6, 2), (8, 3)] {
            let full = patterns::gen_example1(d, r).unwrap();
            let tilde = full.select(&(0..r * (d - r)).collect::<Vec<_>>()).unwrap();
            let blocks: Vec<Vec<usize>> =
                (0..r).map(|k| (k * (d - r)..(k + 1) * (d - r)).collect()).collect();
            assert!(check_cond_i_via_partition(&tilde, r, &blocks).unwrap().holds);
        }
    }

    #[test]
    fn partition_check_reports_failing_group() {
        // d=4, r=2: first group duplicates a column, second is fine.
        let m = mask(4, &[&[0, 1, 2], &[0, 1, 2], &[0, 1, 3], &[1, 2, 3]]);
        let w = check_cond_i_via_partition(&m, 2, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(!w.holds);
        assert_eq!(w.condition, Condition::II);
        assert_eq!(w.violation.unwrap().columns, vec![0, 1]);
        assert!(check_cond_i_via_partition(&m, 2, &[vec![0, 1], vec![1, 3]]).is_err());
        assert!(check_cond_i_via_partition(&m, 2, &[vec![0, 1, 2], vec![3]]).is_err());
    }

    #[test]
    fn block_search_finds_example1_block() {
        let full = patterns::gen_example1(5, 1).unwrap();
        let block = find_cond_ii_block(&full, 1).unwrap().unwrap();
        assert_eq!(block.len(), 4);
        let dup = mask(4, &[&[0, 1], &[0, 1], &[0, 1], &[2, 3]]);
        assert_eq!(find_cond_ii_block(&dup, 1).unwrap(), None);
    }
}
