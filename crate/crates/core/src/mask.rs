//! Observation masks: which entries of a `d × N` matrix are observed.
//!
//! A mask is stored column-wise as sorted lists of row indices. All indices
//! are 0-based, including in the text format:
//!
//! ```text
//! d N
//! <sorted row indices of column 0>
//! ...
//! <sorted row indices of column N-1>
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse binary observation pattern with `rows` rows and one support per column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMask {
    rows: usize,
    supports: Vec<Vec<usize>>,
}

/// Column count `n` and covered-row count `m` of a column subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSubsetStats {
    pub n: usize,
    pub m: usize,
}

impl ObservationMask {
    /// Builds a mask, sorting each support. Rejects out-of-range rows,
    /// duplicate rows within a column and empty supports.
    pub fn new(rows: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Validation("row count must be positive".into()));
        }
        let mut supports = supports;
        for (col, support) in supports.iter_mut().enumerate() {
            if support.is_empty() {
                return Err(Error::Validation(format!("column {col} has an empty support")));
            }
            support.sort_unstable();
            if let Some(&bad) = support.iter().find(|&&row| row >= rows) {
                return Err(Error::Validation(format!(
                    "column {col}: row index {bad} out of range for d={rows}"
                )));
            }
            if support.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!("column {col} repeats a row index")));
            }
        }
        Ok(Self { rows, supports })
    }

    /// Number of rows `d`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns `N`.
    pub fn cols(&self) -> usize {
        self.supports.len()
    }

    pub fn support(&self, col: usize) -> &[usize] {
        &self.supports[col]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// Smallest support size over all columns (0 for a mask without columns).
    pub fn min_support(&self) -> usize {
        self.supports.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Total number of observed entries.
    pub fn nnz(&self) -> usize {
        self.supports.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.supports[col].binary_search(&row).is_ok()
    }

    /// Column-subset view, in the order given by `cols`.
    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        self.check_columns(cols)?;
        Ok(Self {
            rows: self.rows,
            supports: cols.iter().map(|&c| self.supports[c].clone()).collect(),
        })
    }

    /// `n` and `m` for the columns in `cols`.
    pub fn subset_stats(&self, cols: &[usize]) -> Result<ColumnSubsetStats> {
        self.check_columns(cols)?;
        let distinct: BTreeSet<usize> = cols.iter().copied().collect();
        let covered: BTreeSet<usize> = distinct
            .iter()
            .flat_map(|&c| self.supports[c].iter().copied())
            .collect();
        Ok(ColumnSubsetStats { n: distinct.len(), m: covered.len() })
    }

    fn check_columns(&self, cols: &[usize]) -> Result<()> {
        match cols.iter().find(|&&c| c >= self.cols()) {
            Some(&bad) => Err(Error::Validation(format!(
                "column index {bad} out of range for N={}",
                self.cols()
            ))),
            None => Ok(()),
        }
    }

    /// Reduces the mask to exactly `r + 1` observations per column.
    ///
    /// Larger supports are subsampled uniformly without replacement; columns
    /// with fewer than `r + 1` entries are dropped and reported.
    pub fn reduce_to_r_plus_1<R: Rng + ?Sized>(
        &self,
        r: usize,
        rng: &mut R,
    ) -> Result<(ObservationMask, ReductionReport)> {
        if r == 0 {
            return Err(Error::Precondition("rank must be at least 1".into()));
        }
        let target = r + 1;
        let mut supports = Vec::with_capacity(self.cols());
        let mut report = ReductionReport::default();
        for (col, support) in self.supports.iter().enumerate() {
            let size = support.len();
            if size < target {
                let reason = if size == r {
                    DropReason::NonInformative
                } else {
                    DropReason::NonRecoverable
                };
                report.dropped.push(DroppedColumn { column: col, support_size: size, reason });
                continue;
            }
            let reduced = if size == target {
                support.clone()
            } else {
                report.trimmed.push(col);
                let mut picked: Vec<usize> =
                    index::sample(rng, size, target).into_iter().map(|k| support[k]).collect();
                picked.sort_unstable();
                picked
            };
            report.retained.push(col);
            supports.push(reduced);
        }
        Ok((ObservationMask { rows: self.rows, supports }, report))
    }

    /// Parses the mask text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (header_no, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: header_no + 1,
                message: format!("expected \"d N\", found {header:?}"),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: header_no + 1,
                message: format!("bad dimension {s:?}: {e}"),
            })
        };
        let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);

        let mut supports = Vec::with_capacity(cols);
        for (idx, line) in lines {
            if supports.len() == cols {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("more than the declared {cols} columns"),
                });
            }
            let support = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        message: format!("bad row index {tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if support.is_empty() {
                return Err(Error::Parse { line: idx + 1, message: "blank support".into() });
            }
            if support.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "row indices must be strictly increasing".into(),
                });
            }
            supports.push(support);
        }
        if supports.len() != cols {
            return Err(Error::Parse {
                line: supports.len() + 2,
                message: format!("expected {cols} columns, found {}", supports.len()),
            });
        }
        Self::new(rows, supports)
    }

    /// Renders the mask text format (LF line endings, trailing newline).
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols());
        for support in &self.supports {
            let line: Vec<String> = support.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Why a column was removed by [`ObservationMask::reduce_to_r_plus_1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Exactly `r` entries: completable once the subspace is known, but no constraint on it.
    NonInformative,
    /// Fewer than `r` entries: the column cannot be completed at all.
    NonRecoverable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: usize,
    pub support_size: usize,
    pub reason: DropReason,
}

/// Bookkeeping for a reduction; indices refer to the input mask.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Original index of each retained column, in output order.
    pub retained: Vec<usize>,
    /// Retained columns whose support was subsampled.
    pub trimmed: Vec<usize>,
    pub dropped: Vec<DroppedColumn>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_small_file() {
        let mask = ObservationMask::parse("3 2\n0 1\n1 2\n").unwrap();
        assert_eq!(mask.rows(), 3);
        assert_eq!(mask.cols(), 2);
        assert_eq!(mask.supports(), &[vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = ObservationMask::parse("2 1\n0 5\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        match ObservationMask::parse("3 2\n0 1\n1 x\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        match ObservationMask::parse("3 2\n0 1\n\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            ObservationMask::parse("3 1\n2 1\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(ObservationMask::parse("3 3\n0 1\n").is_err());
    }

    #[test]
    fn subset_stats_counts_union() {
        let mask = ObservationMask::new(4, vec![vec![0, 1, 2], vec![0, 1, 3], vec![1]]).unwrap();
        assert_eq!(mask.subset_stats(&[0, 1]).unwrap(), ColumnSubsetStats { n: 2, m: 4 });
        assert_eq!(mask.subset_stats(&[]).unwrap(), ColumnSubsetStats { n: 0, m: 0 });
        assert_eq!(mask.subset_stats(&[2]).unwrap(), ColumnSubsetStats { n: 1, m: 1 });
        assert!(mask.subset_stats(&[3]).is_err());
    }

    #[test]
    fn reduction_trims_and_drops() {
        let r = 2;
        let mask = ObservationMask::new(
            8,
            vec![vec![0, 1, 2], vec![0, 1, 2, 3, 4], vec![5, 6], vec![7]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (reduced, report) = mask.reduce_to_r_plus_1(r, &mut rng).unwrap();
        assert_eq!(reduced.cols(), 2);
        assert_eq!(reduced.support(0), &[0, 1, 2]);
        assert_eq!(reduced.support(1).len(), r + 1);
        assert!(reduced.support(1).iter().all(|row| mask.support(1).contains(row)));
        assert_eq!(report.retained, vec![0, 1]);
        assert_eq!(report.trimmed, vec![1]);
        assert_eq!(
            report.dropped,
            vec![
                DroppedColumn { column: 2, support_size: 2, reason: DropReason::NonInformative },
                DroppedColumn { column: 3, support_size: 1, reason: DropReason::NonRecoverable },
            ]
        );
    }

    #[test]
    fn text_round_trip() {
        let mask = ObservationMask::new(5, vec![vec![4, 0], vec![1, 2, 3]]).unwrap();
        assert_eq!(mask.to_text(), "5 2\n0 4\n1 2 3\n");
        assert_eq!(ObservationMask::parse(&mask.to_text()).unwrap(), mask);
    }
}
