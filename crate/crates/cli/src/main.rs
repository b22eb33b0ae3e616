//! `gwcp`: group-weighted conformal calibration, coverage bounds and the
//! figure experiments from the command line.

mod parse;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gwcp_core::bounds::{
    corollary_closed_bound, corollary_empirical_bound, lei_bound_empirical, thm1_bound,
    thm2_closed_bound, tight_example_coverage, BoundEstimate, BoundForm,
};
use gwcp_core::conformal::{
    corrected_gwcp_thresholds, gwcp_threshold, gwcp_unobserved_threshold, split_cp_threshold,
    ThresholdRule,
};
use gwcp_core::quantile::ExtendedScore;
use gwcp_core::report::{to_csv, to_json};
use gwcp_core::simulate::Figure;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "gwcp", version, about = "Group-weighted conformal prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a threshold on a `group,score` calibration file.
    Calibrate(CalibrateArgs),
    /// Evaluate a coverage lower bound.
    Bound(BoundArgs),
    /// Run a figure experiment and write its table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CalibrationMethod {
    Gwcp,
    Unobserved,
    Corrected,
    Split,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThresholdFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct CalibrateArgs {
    /// Calibration file with header `group,score` and labels 1..K.
    #[arg(long)]
    input: PathBuf,
    /// Target group probabilities: `uniform`, `0.2,0.8`, or `@file`.
    #[arg(long, default_value = "uniform")]
    q: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = CalibrationMethod::Gwcp)]
    method: CalibrationMethod,
    /// Number of groups; defaults to the largest label in the file.
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, value_enum, default_value_t = ThresholdFormat::Text)]
    format: ThresholdFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundName {
    /// 1 - alpha - max q_k / n_k for fixed group sizes.
    Thm1,
    /// 1 - alpha - (4/n) max q_k / p_k under i.i.d. sampling.
    Thm2,
    /// 1 - alpha - 4 / (K n min p_k) for the unobserved-groups variant.
    Corollary,
    /// Monte Carlo expectation form of the unobserved-groups bound.
    CorollaryMc,
    /// Monte Carlo weight-error bound with estimated probabilities.
    Lei,
    /// Exact coverage of the tight construction.
    Tight,
}

#[derive(Debug, clap::Args)]
struct BoundArgs {
    #[arg(value_enum)]
    name: BoundName,
    #[arg(long)]
    alpha: f64,
    /// Number of groups.
    #[arg(long = "K")]
    groups: Option<usize>,
    /// Target probabilities: `uniform`, a list, or `@file`.
    #[arg(long)]
    q: Option<String>,
    /// Training probabilities: `uniform`, a list, or `@file`.
    #[arg(long)]
    p: Option<String>,
    /// Group sizes, e.g. `1x10` or `100x4,1`.
    #[arg(long)]
    counts: Option<String>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Size of the smallest group (tight construction).
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct ExperimentArgs {
    /// fig1 .. fig5
    figure: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per grid point; defaults to 100 for bound curves and 2000 for
    /// coverage figures.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

fn threshold_json(t: ExtendedScore) -> Value {
    match t.finite_value() {
        Some(v) => json!(v),
        None => json!("inf"),
    }
}

fn render_rule(rule: &ThresholdRule, method: &str, alpha: f64, format: ThresholdFormat) -> String {
    match (format, rule) {
        (ThresholdFormat::Text, ThresholdRule::Global(t)) => format!("{t}\n"),
        (ThresholdFormat::Text, ThresholdRule::PerGroup(ts)) => ts
            .iter()
            .enumerate()
            .map(|(k, t)| format!("{} {t}\n", k + 1))
            .collect(),
        (ThresholdFormat::Csv, ThresholdRule::Global(t)) => format!("group,threshold\nall,{t}\n"),
        (ThresholdFormat::Csv, ThresholdRule::PerGroup(ts)) => {
            let mut out = String::from("group,threshold\n");
            for (k, t) in ts.iter().enumerate() {
                out.push_str(&format!("{},{t}\n", k + 1));
            }
            out
        }
        (ThresholdFormat::Json, ThresholdRule::Global(t)) => {
            let v = json!({ "method": method, "alpha": alpha, "threshold": threshold_json(*t) });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        (ThresholdFormat::Json, ThresholdRule::PerGroup(ts)) => {
            let v = json!({
                "method": method,
                "alpha": alpha,
                "thresholds": ts.iter().map(|t| threshold_json(*t)).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
    }
}

fn calibrate(args: CalibrateArgs) -> Result<String> {
    let grouped = parse::read_calibration(&args.input, args.groups)?;
    let k = Some(grouped.num_groups());
    let (rule, label) = match args.method {
        CalibrationMethod::Gwcp => (
            gwcp_threshold(&grouped, &parse::parse_simplex(&args.q, k)?, args.alpha)?,
            "gwcp",
        ),
        CalibrationMethod::Unobserved => (gwcp_unobserved_threshold(&grouped, args.alpha)?, "unobserved"),
        CalibrationMethod::Corrected => (
            corrected_gwcp_thresholds(&grouped, &parse::parse_simplex(&args.q, k)?, args.alpha)?,
            "corrected",
        ),
        CalibrationMethod::Split => {
            let scores: Vec<f64> = grouped.groups().concat();
            (ThresholdRule::Global(split_cp_threshold(&scores, args.alpha)?), "split")
        }
    };
    Ok(render_rule(&rule, label, args.alpha, args.format))
}

/// Bound values are printed to 12 decimals with trailing zeros removed, so
/// `0.7000000000000001` reads `0.7`.
fn format_bound(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

fn render_bound(b: &BoundEstimate) -> String {
    match b.form {
        BoundForm::Closed => format!("{}\n", format_bound(b.value)),
        BoundForm::MonteCarlo => format!(
            "{}\nstd_error {}\ntrials {}\n",
            format_bound(b.value),
            format_bound(b.std_error),
            b.trials
        ),
    }
}

fn bound(args: BoundArgs) -> Result<String> {
    let counts = args.counts.as_deref().map(parse::parse_counts).transpose()?;
    let groups = match (args.groups, &counts) {
        (Some(k), Some(c)) if c.len() != k => bail!("--counts has {} entries but --K is {k}", c.len()),
        (Some(k), _) => Some(k),
        (None, Some(c)) => Some(c.len()),
        (None, None) => None,
    };
    let simplex = |spec: &Option<String>, flag: &str| -> Result<_> {
        let spec = spec.as_deref().with_context(|| format!("--{flag} is required"))?;
        parse::parse_simplex(spec, groups)
    };
    let need_n = || args.n.context("--n is required");
    let estimate = match args.name {
        BoundName::Thm1 => {
            let counts = counts.context("--counts is required")?;
            thm1_bound(&simplex(&args.q, "q")?, &counts, args.alpha)?
        }
        BoundName::Thm2 => {
            let p = simplex(&args.p, "p")?;
            let q = match &args.q {
                Some(_) => simplex(&args.q, "q")?,
                None => p.clone(),
            };
            thm2_closed_bound(&q, &p, need_n()?, args.alpha)?
        }
        BoundName::Corollary => corollary_closed_bound(&simplex(&args.p, "p")?, need_n()?, args.alpha)?,
        BoundName::CorollaryMc => corollary_empirical_bound(
            &simplex(&args.p, "p")?,
            need_n()?,
            args.alpha,
            args.trials,
            args.seed,
        )?,
        BoundName::Lei => {
            let p = simplex(&args.p, "p")?;
            let q = match &args.q {
                Some(_) => simplex(&args.q, "q")?,
                None => p.clone(),
            };
            lei_bound_empirical(&p, &q, need_n()?, args.alpha, args.trials, args.seed)?
        }
        BoundName::Tight => {
            let k = groups.context("--K is required")?;
            let n1 = args.n1.context("--n1 is required")?;
            BoundEstimate::closed(tight_example_coverage(k, n1, args.alpha)?)
        }
    };
    Ok(render_bound(&estimate))
}

fn experiment(args: ExperimentArgs) -> Result<Option<String>> {
    let figure = Figure::parse(&args.figure)
        .with_context(|| format!("unknown figure `{}` (expected fig1..fig5)", args.figure))?;
    let table = figure.run(args.seed, args.trials)?;
    let body = match args.format {
        TableFormat::Csv => to_csv(&table),
        TableFormat::Json => to_json(&table)? + "\n",
    };
    match args.out {
        Some(path) => {
            std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(None)
        }
        None => Ok(Some(body)),
    }
}

fn run(cli: Cli) -> Result<Option<String>> {
    match cli.command {
        Command::Calibrate(args) => calibrate(args).map(Some),
        Command::Bound(args) => bound(args).map(Some),
        Command::Experiment(args) => experiment(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(output) => {
            if let Some(text) = output {
                let mut stdout = std::io::stdout().lock();
                if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
