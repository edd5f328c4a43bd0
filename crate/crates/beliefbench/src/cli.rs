//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error (unknown model or
//! round, bad flags, missing input).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::belief::{
    kl_matrix, point_to_distribution, Bandwidth, DistributionConfig, Kernel,
};
use crate::data::{ingest_path, synthesize, write_path, SyntheticConfig};
use crate::error::{Error, Result};
use crate::eval::{
    build_report, evaluate_round, EvalOptions, EvaluationReport, MaeMode, ModelScore,
    RoundEvaluation,
};
use crate::models::{parse_model, parse_models, MarginalSource, SiConditioning, SpecDefaults};

#[derive(Parser, Debug)]
#[command(
    name = "beliefbench",
    version,
    about = "Benchmark belief-update models on rounds of peer-influenced predictions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compare update models on a data file and write the MAE table
    Compare(CompareArgs),
    /// Generate a synthetic data file from a ground-truth update rule
    Simulate(SimulateArgs),
    /// Pairwise KL-divergence matrix between users' prior beliefs in a round
    Kl(KlArgs),
    /// Recompute best-baseline and improvement rows from a precomputed MAE table
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Delta,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaeModeArg {
    RelativePercent,
    Absolute,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SiModeArg {
    FullHistogram,
    MeanKernel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MarginalArg {
    RoundEmpirical,
    Uniform,
}

fn parse_bandwidth(s: &str) -> std::result::Result<Bandwidth, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Bandwidth::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

/// Distribution-construction flags shared by the commands.
#[derive(Args, Debug, Clone)]
pub struct DistArgs {
    /// Number of grid bins
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Kernel for turning point estimates into distributions
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    /// Kernel bandwidth: `auto` (one bin width) or a positive number
    #[arg(long, value_parser = parse_bandwidth, default_value = "auto")]
    pub bandwidth: Bandwidth,
    /// Laplace smoothing constant for histograms
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
}

impl DistArgs {
    fn to_config(&self) -> DistributionConfig {
        DistributionConfig {
            bin_count: self.bins,
            padding_fraction: 0.05,
            kernel: match self.kernel {
                KernelArg::Delta => Kernel::Delta,
                KernelArg::Gaussian => Kernel::Gaussian,
            },
            bandwidth: self.bandwidth,
            smoothing: self.smoothing,
        }
    }
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Input data file (.csv, or .jsonl for line-structured records)
    #[arg(long)]
    pub input: PathBuf,
    /// Output path for the table; prints to stdout when absent. A
    /// `<stem>.series.csv` file with the per-round two-series data is written
    /// next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Comma-separated model list, or `all`
    #[arg(long, default_value = "all")]
    pub models: String,
    /// MAE unit
    #[arg(long, value_enum, default_value_t = MaeModeArg::RelativePercent)]
    pub mae_mode: MaeModeArg,
    /// Social-information conditioning for the distribution models
    #[arg(long, value_enum, default_value_t = SiModeArg::FullHistogram)]
    pub si_mode: SiModeArg,
    /// Marginal for the social Bayesian denominator
    #[arg(long, value_enum, default_value_t = MarginalArg::RoundEmpirical)]
    pub marginal: MarginalArg,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output data file (.csv, or .jsonl for line-structured records)
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth update rule, e.g. `degroot:w=0.3` or
    /// `social_bayesian:extraction=mode`
    #[arg(long, default_value = "degroot:w=0.3")]
    pub generator: String,
    /// Agents per round
    #[arg(long, default_value_t = 100)]
    pub agents: usize,
    /// Number of rounds
    #[arg(long, default_value_t = 7)]
    pub rounds: usize,
    /// RNG seed; fixed seeds give byte-identical output
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// True value of the predicted quantity (shared by all rounds)
    #[arg(long, default_value_t = 100.0)]
    pub true_value: f64,
    /// Standard deviation of pre-social estimates around the true value
    #[arg(long, default_value_t = 5.0)]
    pub prior_noise_sd: f64,
    /// Standard deviation of observation noise added to post-social responses
    #[arg(long, default_value_t = 0.5)]
    pub obs_noise_sd: f64,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Social-information conditioning for the generator
    #[arg(long, value_enum, default_value_t = SiModeArg::FullHistogram)]
    pub si_mode: SiModeArg,
    /// Marginal source for a social Bayesian generator
    #[arg(long, value_enum, default_value_t = MarginalArg::RoundEmpirical)]
    pub marginal: MarginalArg,
}

#[derive(Args, Debug)]
pub struct KlArgs {
    /// Input data file
    #[arg(long)]
    pub input: PathBuf,
    /// Output path for the matrix; stdout when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Round to analyze; may be omitted when the file holds a single round
    #[arg(long)]
    pub round: Option<String>,
    #[command(flatten)]
    pub dist: DistArgs,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Precomputed MAE table: header `model,<round>,...`, one row per model
    #[arg(long)]
    pub input: PathBuf,
    /// Output path; stdout when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn spec_defaults(si_mode: SiModeArg, marginal: MarginalArg, smoothing: f64) -> SpecDefaults {
    SpecDefaults {
        si_conditioning: match si_mode {
            SiModeArg::FullHistogram => SiConditioning::FullHistogram,
            SiModeArg::MeanKernel => SiConditioning::MeanKernel,
        },
        marginal_source: match marginal {
            MarginalArg::RoundEmpirical => MarginalSource::RoundEmpirical,
            MarginalArg::Uniform => MarginalSource::Uniform,
        },
        smoothing,
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Compare(args) => cmd_compare(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Kl(args) => cmd_kl(&args),
        Command::Table(args) => cmd_table(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::UnknownModel { .. }
        | Error::InvalidConfig(_)
        | Error::RoundNotFound(_)
        | Error::WeightOutOfRange(_) => 2,
        _ => 1,
    }
}

/// Ingests the input and evaluates the requested models; the shared core of
/// `compare` used directly by the test suites.
pub fn compare_report(args: &CompareArgs) -> Result<EvaluationReport> {
    let cfg = args.dist.to_config();
    let defaults = spec_defaults(args.si_mode, args.marginal, args.dist.smoothing);
    let specs = parse_models(&args.models, &defaults)?;
    let outcome = ingest_path(&args.input, &cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if outcome.rejected_rows > 0 {
        eprintln!(
            "warning: rejected {} row(s) with non-positive prices",
            outcome.rejected_rows
        );
    }
    if outcome.rounds.is_empty() {
        return Err(Error::NoRecords);
    }
    let opts = EvalOptions {
        dist: cfg,
        mae_mode: match args.mae_mode {
            MaeModeArg::RelativePercent => MaeMode::RelativePercent,
            MaeModeArg::Absolute => MaeMode::Absolute,
        },
    };
    let slices = outcome
        .rounds
        .iter()
        .map(|round| evaluate_round(round, &specs, &opts))
        .collect::<Result<Vec<_>>>()?;
    build_report(slices)
}

/// Runs the model comparison and writes the report table plus the two-series
/// plot data.
pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let report = compare_report(args)?;
    match &args.output {
        Some(path) => {
            let text = if is_jsonl(path) {
                report.to_jsonl()
            } else {
                report.to_table()
            };
            fs::write(path, text)?;
            if let Some(series) = report.figure_series() {
                fs::write(series_path(path), series)?;
            }
        }
        None => print!("{}", report.to_table()),
    }
    Ok(())
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

/// `report.csv` -> `report.series.csv`
fn series_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    output.with_file_name(format!("{stem}.series.csv"))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let defaults = spec_defaults(args.si_mode, args.marginal, args.dist.smoothing);
    let generator = parse_model(&args.generator, &defaults)?;
    let config = SyntheticConfig {
        agent_count: args.agents,
        round_count: args.rounds,
        true_values: vec![args.true_value],
        prior_noise_sd: args.prior_noise_sd,
        generator,
        observation_noise_sd: args.obs_noise_sd,
        seed: args.seed,
        dist: args.dist.to_config(),
    };
    let rounds = synthesize(&config)?;
    write_path(&args.output, &rounds)?;
    Ok(())
}

pub fn cmd_kl(args: &KlArgs) -> Result<()> {
    let cfg = args.dist.to_config();
    let outcome = ingest_path(&args.input, &cfg)?;
    if outcome.rounds.is_empty() {
        return Err(Error::NoRecords);
    }
    let round = match &args.round {
        Some(id) => outcome
            .rounds
            .iter()
            .find(|r| &r.round_id == id)
            .ok_or_else(|| Error::RoundNotFound(id.clone()))?,
        None => {
            if outcome.rounds.len() == 1 {
                &outcome.rounds[0]
            } else {
                return Err(Error::InvalidConfig(format!(
                    "file holds {} rounds; pass --round",
                    outcome.rounds.len()
                )));
            }
        }
    };

    // Users in first-appearance order; a tiny uniform floor keeps every
    // divergence finite whatever the kernel.
    let dists = round
        .records
        .iter()
        .map(|r| {
            point_to_distribution(r.pre_social, round.grid, cfg.kernel, cfg.bandwidth)?
                .with_floor(1e-12)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = kl_matrix(&dists)?;

    let mut text = String::from("user_id");
    for r in &round.records {
        text.push(',');
        text.push_str(&r.user_id);
    }
    text.push('\n');
    for (i, r) in round.records.iter().enumerate() {
        text.push_str(&r.user_id);
        for v in &matrix[i] {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_table(args: &TableArgs) -> Result<()> {
    let mut raw = String::new();
    fs::File::open(&args.input)?.read_to_string(&mut raw)?;
    let mut lines = raw.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedRow {
            line: 1,
            message: "empty table".to_string(),
        })?;
    let mut cols = header.split(',');
    let first = cols.next().unwrap_or("");
    if first != "model" {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header starting with `model`, got `{first}`"),
        });
    }
    let rounds: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if rounds.is_empty() {
        return Err(Error::MalformedRow {
            line: 1,
            message: "no round columns".to_string(),
        });
    }

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or("").trim().to_string();
        if name == "best_baseline" || name == "improvement" {
            continue; // derived rows are recomputed
        }
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                    line: line_no,
                    message: format!("bad value `{f}`"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != rounds.len() {
            return Err(Error::MalformedRow {
                line: line_no,
                message: format!("expected {} values, got {}", rounds.len(), values.len()),
            });
        }
        rows.push((name, values));
    }
    if rows.is_empty() {
        return Err(Error::NoRecords);
    }

    let slices = rounds
        .iter()
        .enumerate()
        .map(|(r, round_id)| {
            let scores = rows
                .iter()
                .map(|(name, values)| ModelScore {
                    name: name.clone(),
                    mae: values[r],
                    is_social_bayesian: name == "social_bayesian"
                        || name.starts_with("social_bayesian:"),
                })
                .collect();
            RoundEvaluation::from_scores(round_id.clone(), scores)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(slices)?;
    let text = report.to_table();
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

impl CompareArgs {
    /// Default comparison over a file with everything else left at the flag
    /// defaults.
    pub fn over_file(input: &Path, models: &str) -> Self {
        CompareArgs {
            input: input.to_path_buf(),
            output: None,
            dist: DistArgs {
                bins: 50,
                kernel: KernelArg::Gaussian,
                bandwidth: Bandwidth::Auto,
                smoothing: 1.0,
            },
            models: models.to_string(),
            mae_mode: MaeModeArg::RelativePercent,
            si_mode: SiModeArg::FullHistogram,
            marginal: MarginalArg::RoundEmpirical,
        }
    }
}
