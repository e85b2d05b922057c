//! Seeded Monte-Carlo sweeps that emit one CSV row per configuration.
//!
//! Every trial draws from its own RNG seeded by `(master seed, configuration
//! index, trial index)`, so results do not depend on scheduling and rows
//! come out in configuration order.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::{algorithm1_check, certify, Arithmetic, CertifyOptions, Verdict};
use crate::completion::{ihtsvd, normalized_error};
use crate::error::{Error, Result};
use crate::model::{gaussian_matrix, make_coherent, observe};
use crate::patterns::gen_uniform_random;
use crate::seeding::{derive_seed, rng_from_seed};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Rank test on uniform masks with `r + 1` entries per column, over `n`.
    Figure9,
    /// Completion success over `(d, ℓ)` at fixed `r`.
    PhaseDiagram,
    /// Completion success over `(μ, p)`.
    CoherenceSweep,
    /// Iterations to complete over `p`.
    IterationCount,
    /// Certificate verdicts for uniform masks.
    CertifyBatch,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Validation(format!("unknown experiment kind {s:?}")))
    }
}

fn default_d() -> Vec<usize> {
    vec![100]
}
fn default_r() -> Vec<usize> {
    vec![5]
}
fn default_trials() -> usize {
    100
}
fn default_success_tol() -> f64 {
    1e-12
}
fn default_attempts() -> usize {
    10
}

/// Sweep description, read from JSON. Lists are swept as a Cartesian
/// product; which lists matter depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_d")]
    pub d: Vec<usize>,
    #[serde(default = "default_r")]
    pub r: Vec<usize>,
    /// Entries per column. Defaults to `r + 1` for the rank-test kinds.
    #[serde(default)]
    pub ell: Vec<usize>,
    /// Sampling rates `ℓ/d`; used instead of `ell` when nonempty.
    #[serde(default)]
    pub p: Vec<f64>,
    /// Column counts. Completion kinds default to `N = d`.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Target coherences (coherence-sweep only).
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Arithmetic,
    /// IHTSVD iteration cap; defaults to `d`.
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// IHTSVD stopping tolerance on the relative change between iterates.
    #[serde(default)]
    pub tol: Option<f64>,
    /// A completion succeeds when its normalized error is at most this.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default = "default_attempts")]
    pub attempts: usize,
    /// Reuse each trial's seed across configurations (common random
    /// numbers). Masks then grow by appending columns as `n` increases, so
    /// differences between configurations are not swamped by sampling noise.
    #[serde(default)]
    pub common_seeds: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if self.d.is_empty() || self.r.is_empty() {
            return Err(Error::Validation("d and r ranges must be nonempty".into()));
        }
        let needs = |name: &str, empty: bool| {
            if empty {
                Err(Error::Validation(format!("{:?} needs a nonempty {name} range", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::Figure9 | ExperimentKind::CertifyBatch => needs("n", self.n.is_empty())?,
            ExperimentKind::PhaseDiagram => needs("ell or p", self.ell.is_empty() && self.p.is_empty())?,
            ExperimentKind::IterationCount => needs("ell or p", self.ell.is_empty() && self.p.is_empty())?,
            ExperimentKind::CoherenceSweep => {
                needs("ell or p", self.ell.is_empty() && self.p.is_empty())?;
                needs("mu", self.mu.is_empty())?;
            }
        }
        if self.p.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Validation("p values must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// The configurations in output order.
    pub fn configs(&self) -> Vec<Config> {
        let mut out = Vec::new();
        let completion = !matches!(self.kind, ExperimentKind::Figure9 | ExperimentKind::CertifyBatch);
        for &d in &self.d {
            for &r in &self.r {
                // ℓ either explicit, from p, or r+1 for the rank-test kinds.
                let ells: Vec<(usize, Option<f64>)> = if !self.p.is_empty() {
                    self.p.iter().map(|&p| (((p * d as f64).round() as usize).clamp(1, d), Some(p))).collect()
                } else if !self.ell.is_empty() {
                    self.ell.iter().map(|&l| (l, None)).collect()
                } else {
                    vec![(r + 1, None)]
                };
                let ns: Vec<usize> = if self.n.is_empty() && completion { vec![d] } else { self.n.clone() };
                let mus: Vec<Option<f64>> =
                    if self.kind == ExperimentKind::CoherenceSweep { self.mu.iter().copied().map(Some).collect() } else { vec![None] };
                for &(ell, p) in &ells {
                    for &n in &ns {
                        for &mu in &mus {
                            out.push(Config { d, r, ell, p, n, mu });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub d: usize,
    pub r: usize,
    pub ell: usize,
    pub p: Option<f64>,
    pub n: usize,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub iterations: Option<usize>,
    pub error: Option<f64>,
    pub achieved_mu: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl TrialOutcome {
    fn flag(success: bool) -> Self {
        Self { success, iterations: None, error: None, achieved_mu: None, verdict: None }
    }
}

/// Aggregated results for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub config_index: usize,
    pub config: Config,
    pub trials: usize,
    pub successes: usize,
    /// Mean iterations over successful trials.
    pub mean_iterations: Option<f64>,
    pub mean_error: Option<f64>,
    pub mean_mu: Option<f64>,
    /// Counts of unique / finite / inconclusive / fail verdicts.
    pub verdicts: Option<[usize; 4]>,
}

impl Row {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

pub const CSV_HEADER: [&str; 19] = [
    "config", "kind", "d", "r", "ell", "p", "n", "mu", "trials", "successes", "success_rate", "mean_iterations",
    "mean_error", "mean_mu", "unique", "finite", "inconclusive", "fail", "master_seed",
];

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn kind_name(kind: ExperimentKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn record(row: &Row, spec: &ExperimentSpec) -> Vec<String> {
    let c = &row.config;
    let count = |k: usize| row.verdicts.map(|v| v[k].to_string()).unwrap_or_default();
    vec![
        row.config_index.to_string(),
        kind_name(spec.kind),
        c.d.to_string(),
        c.r.to_string(),
        c.ell.to_string(),
        sci(c.p),
        c.n.to_string(),
        sci(c.mu),
        row.trials.to_string(),
        row.successes.to_string(),
        sci(Some(row.success_rate())),
        sci(row.mean_iterations),
        sci(row.mean_error),
        sci(row.mean_mu),
        count(0),
        count(1),
        count(2),
        count(3),
        spec.seed.to_string(),
    ]
}

/// Runs one trial of `config` with its own seed.
pub fn run_trial(spec: &ExperimentSpec, config: &Config, seed: u64) -> Result<TrialOutcome> {
    let Config { d, r, ell, n, mu, .. } = *config;
    let mut rng = rng_from_seed(seed);
    match spec.kind {
        ExperimentKind::Figure9 => {
            let mask = gen_uniform_random(d, n, ell, &mut rng)?;
            let mask = if ell > r + 1 { mask.reduce_to_r_plus_1(r, &mut rng)?.0 } else { mask };
            if mask.cols() < d - r {
                return Ok(TrialOutcome::flag(false));
            }
            match algorithm1_check(&mask, r, &mut rng, spec.mode) {
                Ok(pass) => Ok(TrialOutcome::flag(pass)),
                Err(Error::Indeterminate { .. }) => Ok(TrialOutcome::flag(false)),
                Err(e) => Err(e),
            }
        }
        ExperimentKind::CertifyBatch => {
            let mask = gen_uniform_random(d, n, ell, &mut rng)?;
            let cert = certify(&mask, r, seed, CertifyOptions { attempts: spec.attempts, mode: spec.mode })?;
            Ok(TrialOutcome {
                verdict: Some(cert.verdict),
                ..TrialOutcome::flag(matches!(cert.verdict, Verdict::Unique | Verdict::Finite))
            })
        }
        ExperimentKind::PhaseDiagram | ExperimentKind::IterationCount | ExperimentKind::CoherenceSweep => {
            let mut ustar = gaussian_matrix(d, r, &mut rng);
            let mut achieved_mu = None;
            if let Some(target) = mu {
                let coherent = make_coherent(&ustar, target, &mut rng, 10_000)?;
                achieved_mu = Some(coherent.mu);
                ustar = coherent.basis;
            }
            let theta = gaussian_matrix(r, n, &mut rng);
            let x = &ustar * theta;
            let mask = gen_uniform_random(d, n, ell, &mut rng)?;
            let pm = observe(&x, &mask)?;
            let res = ihtsvd(&pm, r, Some(spec.max_iters.unwrap_or(d)), spec.tol)?;
            let error = normalized_error(&res.estimate, &x)?;
            Ok(TrialOutcome {
                success: error <= spec.success_tol,
                iterations: Some(res.iterations),
                error: Some(error),
                achieved_mu,
                verdict: None,
            })
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn aggregate(config_index: usize, config: Config, outcomes: &[TrialOutcome]) -> Row {
    let successes = outcomes.iter().filter(|o| o.success).count();
    let verdicts = outcomes.iter().any(|o| o.verdict.is_some()).then(|| {
        let mut counts = [0usize; 4];
        for v in outcomes.iter().filter_map(|o| o.verdict) {
            counts[match v {
                Verdict::Unique => 0,
                Verdict::Finite => 1,
                Verdict::Inconclusive => 2,
                Verdict::Fail => 3,
            }] += 1;
        }
        counts
    });
    Row {
        config_index,
        config,
        trials: outcomes.len(),
        successes,
        mean_iterations: mean(outcomes.iter().filter(|o| o.success).filter_map(|o| o.iterations.map(|i| i as f64))),
        mean_error: mean(outcomes.iter().filter_map(|o| o.error)),
        mean_mu: mean(outcomes.iter().filter_map(|o| o.achieved_mu)),
        verdicts,
    }
}

/// Seed of trial `trial` in configuration `config`.
pub fn trial_seed(spec: &ExperimentSpec, config: usize, trial: usize) -> u64 {
    if spec.common_seeds {
        derive_seed(spec.seed, &[trial as u64])
    } else {
        derive_seed(spec.seed, &[config as u64, trial as u64])
    }
}

/// Runs the sweep, writing the CSV (header, then one row per configuration,
/// flushed as each completes) to `out`.
pub fn run_experiment<W: Write>(spec: &ExperimentSpec, out: W) -> Result<Vec<Row>> {
    spec.validate()?;
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.push("version");
    writer.write_record(&header)?;
    writer.flush()?;
    let mut rows = Vec::new();
    for (index, config) in spec.configs().into_iter().enumerate() {
        let outcomes = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &config, trial_seed(spec, index, t)))
            .collect::<Result<Vec<_>>>()?;
        let row = aggregate(index, config, &outcomes);
        let mut rec = record(&row, spec);
        rec.push(VERSION.to_string());
        writer.write_record(&rec)?;
        writer.flush()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Same as [`run_experiment`] but writing to `spec.output` (or a file path).
pub fn run_experiment_to_path(spec: &ExperimentSpec, path: impl AsRef<Path>) -> Result<Vec<Row>> {
    let file = std::fs::File::create(path)?;
    run_experiment(spec, std::io::BufWriter::new(file))
}
