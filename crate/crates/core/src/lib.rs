//! Deterministic and randomized checks of whether an observation pattern
//! admits finitely many or exactly one rank-`r` completion, together with
//! an iterative SVD completion engine and a seeded experiment harness.
//!
//! The main entry points:
//!
//! - [`combinatorics`] — exhaustive subset checks of the coverage conditions.
//! - [`algebraic`] — the randomized constraint-matrix rank test and certificates.
//! - [`polysys`] — the per-column polynomial constraints on a candidate subspace.
//! - [`completion`] — IHTSVD.

pub mod algebraic;
pub mod combinatorics;
pub mod completion;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mask;
pub mod model;
pub mod patterns;
pub mod polysys;
pub mod seeding;

pub use algebraic::{algorithm1_check, certify, Arithmetic, Certificate, CertifyOptions, Verdict};
pub use combinatorics::{check_cond_i_exact, check_cond_ii_exact, ConditionWitness};
pub use completion::{ihtsvd, CompletionResult};
pub use error::{Error, Result};
pub use experiment::{ExperimentKind, ExperimentSpec};
pub use mask::ObservationMask;
pub use model::{LowRankFactorization, PartialMatrix, Subspace};
pub use polysys::{ColumnConstraint, ConstraintSystem};
