use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use completability::algebraic::{algorithm1_check, certify, Arithmetic, CertifyOptions, Verdict};
use completability::combinatorics::{check_cond_i_exact, check_cond_ii_exact, ConditionWitness, COND_II_CAP, COND_I_CAP};
use completability::completion::ihtsvd;
use completability::experiment::{run_experiment, ExperimentSpec};
use completability::model::{complete_given_subspace, read_matrix_csv, write_matrix_csv, PartialMatrix};
use completability::patterns;
use completability::seeding::{derived_rng, rng_from_seed};
use completability::{Error, ObservationMask};

/// Seed stream for the pre-check reduction to `r + 1` entries per column.
const CHECK_REDUCE_STREAM: u64 = 0xC4EC;

#[derive(Parser)]
#[command(name = "completability", version, about = "Finite and unique low-rank completability of sampling patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

impl From<Mode> for Arithmetic {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => Arithmetic::Exact,
            Mode::Float => Arithmetic::Float,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Example1,
    Staircase,
    Uniform,
    Example6,
    Example8,
}

#[derive(Subcommand)]
enum Command {
    /// Report conditions (i) and (ii) for a mask, with violating column sets.
    ///
    /// Columns are split into consecutive blocks of d − r. Condition (ii) is
    /// checked per block; condition (i) on the first r blocks together.
    Check {
        mask: PathBuf,
        #[arg(short, long)]
        r: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        /// Enumerate column subsets instead of running the randomized rank test
        /// (falls back to the rank test above the size caps).
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Certify unique or finite completability; exit 0 unique, 2 finite,
    /// 3 inconclusive, 4 fail.
    Certify {
        mask: PathBuf,
        #[arg(short, long)]
        r: usize,
        #[arg(long, default_value_t = 10)]
        attempts: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Certificate JSON path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a sampling pattern in the mask text format.
    Generate {
        #[arg(value_enum)]
        pattern: Pattern,
        #[arg(short, long, default_value_t = 0)]
        d: usize,
        #[arg(short, long, default_value_t = 1)]
        r: usize,
        /// Columns (uniform only).
        #[arg(short, long)]
        n: Option<usize>,
        /// Entries per column (uniform only); defaults to the sample-size bound for `--eps`.
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted. For example8 the reduced mask goes to `<out>.reduced`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complete a partially observed matrix with IHTSVD, or exactly from a known basis.
    Complete {
        mask: PathBuf,
        values: PathBuf,
        #[arg(short, long)]
        r: usize,
        /// d × r basis CSV; completes column by column from the first r observations.
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Recorded in the metadata; the algorithms here are deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Estimate CSV; metadata goes to the same path with `.meta.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment sweep described by a JSON spec; flags override its fields.
    Experiment {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        tol: Option<f64>,
        /// CSV path; overrides the spec's `output`, stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Check { mask, r, mode, exhaustive, seed } => cmd_check(&mask, r, mode.into(), exhaustive, seed),
        Command::Certify { mask, r, attempts, mode, seed, out } => {
            let mask = load_mask(&mask)?;
            let cert = certify(&mask, r, seed, CertifyOptions { attempts, mode: mode.into() })?;
            let json = cert.to_json();
            match out {
                Some(path) => {
                    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
                    println!("verdict: {}", verdict_name(cert.verdict));
                }
                None => println!("{json}"),
            }
            Ok(cert.verdict.exit_code() as u8)
        }
        Command::Generate { pattern, d, r, n, ell, eps, seed, out } => cmd_generate(pattern, d, r, n, ell, eps, seed, out),
        Command::Complete { mask, values, r, basis, max_iters, tol, seed, out } => {
            cmd_complete(&mask, &values, r, basis.as_deref(), max_iters, tol, seed, &out)
        }
        Command::Experiment { spec, seed, trials, mode, tol, out } => {
            let mut spec = ExperimentSpec::load(&spec).with_context(|| format!("reading {}", spec.display()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(m) = mode {
                spec.mode = m.into();
            }
            if tol.is_some() {
                spec.tol = tol;
            }
            if out.is_some() {
                spec.output = out;
            }
            spec.validate()?;
            match &spec.output {
                Some(path) => {
                    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    let rows = run_experiment(&spec, std::io::BufWriter::new(file))?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => {
                    run_experiment(&spec, std::io::stdout().lock())?;
                }
            }
            Ok(0)
        }
    }
}

fn load_mask(path: &Path) -> Result<ObservationMask> {
    ObservationMask::load(path).with_context(|| format!("reading mask {}", path.display()))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Unique => "unique",
        Verdict::Finite => "finite",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Fail => "fail",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Holds,
    Fails,
    Indeterminate,
    NotApplicable,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Holds => "holds",
            Outcome::Fails => "fails",
            Outcome::Indeterminate => "indeterminate",
            Outcome::NotApplicable => "not applicable",
        }
    }
}

/// Witness text, with column indices mapped through `to_file`.
fn describe(w: &ConditionWitness, to_file: impl Fn(usize) -> usize, r: usize) -> Option<String> {
    let v = w.violation.as_ref()?;
    let cols: Vec<usize> = v.columns.iter().map(|&c| to_file(c)).collect();
    let need = match w.condition {
        completability::combinatorics::Condition::I => format!("r·m ≥ n + r² needs m ≥ {}", (v.stats.n + r * r).div_ceil(r)),
        completability::combinatorics::Condition::II => format!("m ≥ n + r needs m ≥ {}", v.stats.n + r),
    };
    Some(format!("columns {cols:?}: n = {}, m = {} ({need})", v.stats.n, v.stats.m))
}

/// Condition (ii) on one block: exhaustive when asked and small enough,
/// otherwise the rank test. A failing block under the cap always gets a witness.
#[allow(clippy::too_many_arguments)]
fn block_ii(
    mask: &ObservationMask,
    cols: &[usize],
    retained: &[usize],
    r: usize,
    mode: Arithmetic,
    exhaustive: bool,
    seed: u64,
    index: usize,
) -> Result<(Outcome, Option<String>)> {
    let block = mask.select(cols)?;
    let small = cols.len() <= COND_II_CAP;
    let outcome = if exhaustive && small {
        if check_cond_ii_exact(&block, r)?.holds { Outcome::Holds } else { Outcome::Fails }
    } else {
        match algorithm1_check(&block, r, &mut derived_rng(seed, &[index as u64]), mode) {
            Ok(true) => Outcome::Holds,
            Ok(false) => Outcome::Fails,
            Err(Error::Indeterminate { .. }) => Outcome::Indeterminate,
            Err(e) => return Err(e.into()),
        }
    };
    let witness = if outcome == Outcome::Fails && small {
        describe(&check_cond_ii_exact(&block, r)?, |k| retained[cols[k]], r)
    } else {
        None
    };
    Ok((outcome, witness))
}

fn cmd_check(path: &Path, r: usize, mode: Arithmetic, exhaustive: bool, seed: u64) -> Result<u8> {
    let original = load_mask(path)?;
    let d = original.rows();
    if r == 0 || r >= d {
        bail!("rank must lie in [1, d), got r={r}, d={d}");
    }
    let (mask, report) = original.reduce_to_r_plus_1(r, &mut derived_rng(seed, &[CHECK_REDUCE_STREAM]))?;
    if !report.dropped.is_empty() || !report.trimmed.is_empty() {
        println!(
            "reduced to r+1 = {} entries per column: {} trimmed, {} dropped",
            r + 1,
            report.trimmed.len(),
            report.dropped.len()
        );
    }
    let width = d - r;
    if mask.cols() < width {
        println!("condition (i): fails; condition (ii) per block: fails");
        println!("structural: {} informative columns, a block needs d - r = {width}", mask.cols());
        return Ok(4);
    }
    // Blocks index the reduced mask; `report.retained` maps back to file columns.
    let blocks: Vec<Vec<usize>> = (0..mask.cols() / width).map(|b| (b * width..(b + 1) * width).collect()).collect();
    let leftover = mask.cols() % width;

    let mut per_block = Vec::with_capacity(blocks.len());
    for (b, cols) in blocks.iter().enumerate() {
        per_block.push(block_ii(&mask, cols, &report.retained, r, mode, exhaustive, seed, b)?);
    }
    let ii = combine(per_block.iter().map(|(o, _)| *o));

    let mut i_witness = None;
    let cond_i = if blocks.len() < r {
        Outcome::NotApplicable
    } else {
        let first: Vec<usize> = (0..r * width).collect();
        if exhaustive && first.len() <= COND_I_CAP {
            let w = check_cond_i_exact(&mask.select(&first)?, r)?;
            i_witness = describe(&w, |k| report.retained[k], r);
            if w.holds { Outcome::Holds } else { Outcome::Fails }
        } else {
            // r disjoint blocks satisfying (ii) imply (i) for their union.
            match combine(per_block[..r].iter().map(|(o, _)| *o)) {
                Outcome::Holds => Outcome::Holds,
                Outcome::Indeterminate => Outcome::Indeterminate,
                _ => Outcome::NotApplicable,
            }
        }
    };

    let cond_i_label = match (cond_i, blocks.len() < r) {
        (Outcome::NotApplicable, true) => format!("not applicable (needs r(d-r) = {} columns)", r * width),
        (Outcome::NotApplicable, false) => "not certified (a block fails (ii); rerun with --exhaustive)".to_string(),
        (o, _) => o.label().to_string(),
    };
    println!("condition (i): {cond_i_label}; condition (ii) per block: {}", ii.label());
    if let Some(w) = i_witness {
        println!("  condition (i) witness: {w}");
    }
    for (b, (outcome, witness)) in per_block.iter().enumerate() {
        let cols = &blocks[b];
        let span = format!("{}..{}", report.retained[cols[0]], report.retained[cols[cols.len() - 1]]);
        match witness {
            Some(w) => println!("  block {b} (columns {span}): {}; witness {w}", outcome.label()),
            None => println!("  block {b} (columns {span}): {}", outcome.label()),
        }
    }
    if leftover > 0 {
        println!("  {leftover} trailing column(s) not in any block");
    }
    let all = [cond_i, ii];
    Ok(if all.contains(&Outcome::Fails) || cond_i == Outcome::NotApplicable {
        4
    } else if all.contains(&Outcome::Indeterminate) {
        3
    } else {
        0
    })
}

fn combine(outcomes: impl Iterator<Item = Outcome>) -> Outcome {
    let mut acc = Outcome::Holds;
    for o in outcomes {
        acc = match (acc, o) {
            (Outcome::Fails, _) | (_, Outcome::Fails) => Outcome::Fails,
            (Outcome::Indeterminate, _) | (_, Outcome::Indeterminate) => Outcome::Indeterminate,
            _ => Outcome::Holds,
        };
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    pattern: Pattern,
    d: usize,
    r: usize,
    n: Option<usize>,
    ell: Option<usize>,
    eps: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<u8> {
    let mask = match pattern {
        Pattern::Example1 => patterns::gen_example1(d, r)?,
        Pattern::Staircase => patterns::gen_example5_staircase(d, r)?,
        Pattern::Uniform => {
            let Some(n) = n else { bail!("uniform needs --n") };
            let ell = match ell {
                Some(l) => l,
                None => {
                    let bound = patterns::theorem3_min_ell(d, r, eps)?;
                    if bound.ell > d {
                        bail!("the bound asks for {} entries per column but d = {d}; pass --ell", bound.ell);
                    }
                    bound.ell
                }
            };
            patterns::gen_uniform_random(d, n, ell, &mut rng_from_seed(seed))?
        }
        Pattern::Example6 => patterns::gen_example6(),
        Pattern::Example8 => {
            let (full, reduced) = patterns::gen_example8();
            if let Some(path) = &out {
                let mut side = path.clone().into_os_string();
                side.push(".reduced");
                reduced.save(PathBuf::from(side))?;
            }
            full
        }
    };
    emit(out.as_deref(), &mask.to_text())?;
    Ok(0)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_complete(
    mask: &Path,
    values: &Path,
    r: usize,
    basis: Option<&Path>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: &Path,
) -> Result<u8> {
    let mask = load_mask(mask)?;
    let text = std::fs::read_to_string(values).with_context(|| format!("reading {}", values.display()))?;
    let pm = PartialMatrix::parse_values(mask, &text)?;
    let (estimate, meta) = match basis {
        Some(path) => {
            let u = read_matrix_csv(path)?;
            if u.ncols() != r {
                bail!("basis has {} columns, expected r = {r}", u.ncols());
            }
            let done = complete_given_subspace(&u, &pm)?;
            let incomplete: Vec<_> = done
                .incomplete
                .iter()
                .map(|(c, why)| serde_json::json!({ "column": c, "reason": why }))
                .collect();
            let meta = serde_json::json!({ "method": "given-subspace", "incomplete": incomplete, "seed": seed });
            (done.estimate, meta)
        }
        None => {
            let res = ihtsvd(&pm, r, max_iters, tol)?;
            let mut meta = serde_json::to_value(res.meta(seed))?;
            meta["method"] = "ihtsvd".into();
            (res.estimate, meta)
        }
    };
    write_matrix_csv(out, &estimate)?;
    let mut side = out.to_path_buf().into_os_string();
    side.push(".meta.json");
    std::fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n")?;
    println!("{}", serde_json::to_string(&meta)?);
    Ok(0)
}
