//! Prediction-record schema, file ingestion and the seeded synthetic round
//! generator.
//!
//! Two file formats are supported, carrying the same fields:
//! a delimited table with header
//! `round_id,user_id,asset_id,pre_social,post_social,si_edges,si_counts,confidence`
//! (the list fields are bracketed, comma-joined and quoted), and a
//! line-structured format with one JSON object per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::{
    histogram_to_distribution, BeliefDistribution, BinGrid, DistributionConfig, SocialHistogram,
};
use crate::error::{Error, Result};
use crate::models::{
    apply_model, social_bayesian_update, DegrootWeight, MarginalSource,
    ModelKind, ModelSpec, RoundContext,
};

/// One participant's observation: pre-social estimate, the peer histogram
/// they saw, their post-social estimate and an optional confidence rating.
/// Confidence is carried through ingestion but consumed by no model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub round_id: String,
    pub user_id: String,
    pub asset_id: String,
    pub pre_social: f64,
    pub post_social: f64,
    pub si: SocialHistogram,
    pub confidence: Option<u8>,
}

/// All records of one round, sharing a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundData {
    pub round_id: String,
    pub grid: BinGrid,
    pub records: Vec<PredictionRecord>,
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub agent_count: usize,
    pub round_count: usize,
    /// True value per round; a single entry is reused for every round.
    pub true_values: Vec<f64>,
    pub prior_noise_sd: f64,
    /// Ground-truth update rule applied to (pre-social, SI).
    pub generator: ModelSpec,
    pub observation_noise_sd: f64,
    pub seed: u64,
    pub dist: DistributionConfig,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.agent_count < 2 {
            return Err(Error::InvalidConfig(
                "agent_count must be at least 2 (a histogram needs peers)".to_string(),
            ));
        }
        if self.round_count == 0 {
            return Err(Error::InvalidConfig("round_count must be positive".to_string()));
        }
        if self.true_values.len() != 1 && self.true_values.len() != self.round_count {
            return Err(Error::InvalidConfig(format!(
                "expected 1 or {} true values, got {}",
                self.round_count,
                self.true_values.len()
            )));
        }
        if !self.prior_noise_sd.is_finite() || self.prior_noise_sd <= 0.0 {
            return Err(Error::InvalidConfig(
                "prior_noise_sd must be positive".to_string(),
            ));
        }
        if !self.observation_noise_sd.is_finite() || self.observation_noise_sd < 0.0 {
            return Err(Error::InvalidConfig(
                "observation_noise_sd must be non-negative".to_string(),
            ));
        }
        if self.generator.kind == ModelKind::Degroot
            && self.generator.degroot_weight == DegrootWeight::Fit
        {
            return Err(Error::InvalidConfig(
                "generator requires a fixed weight, e.g. degroot:w=0.3".to_string(),
            ));
        }
        Ok(())
    }

    fn true_value(&self, round: usize) -> f64 {
        if self.true_values.len() == 1 {
            self.true_values[0]
        } else {
            self.true_values[round]
        }
    }
}

/// Generates rounds of records: each agent draws a pre-social estimate around
/// the true value, sees a leave-one-out histogram of the other agents'
/// estimates, and responds with the generator's update plus observation
/// noise. Deterministic for a fixed seed; round `r` uses sub-seed `seed + r`.
pub fn synthesize(config: &SyntheticConfig) -> Result<Vec<RoundData>> {
    config.validate()?;
    let mut rounds = Vec::with_capacity(config.round_count);
    for round_idx in 0..config.round_count {
        rounds.push(synthesize_round(config, round_idx)?);
    }
    Ok(rounds)
}

fn synthesize_round(config: &SyntheticConfig, round_idx: usize) -> Result<RoundData> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(round_idx as u64));
    let true_value = config.true_value(round_idx);
    let n = config.agent_count;

    // Draw order is fixed: pre-social values, then observation noise, then
    // confidence ratings.
    let prior_dist = Normal::new(true_value, config.prior_noise_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let raw: Vec<f64> = (0..n).map(|_| prior_dist.sample(&mut rng)).collect();

    let provisional = BinGrid::from_points(&raw, config.dist.bin_count, config.dist.padding_fraction)?;
    let floor = 0.1 * provisional.width();
    let pre: Vec<f64> = raw.iter().map(|&x| x.max(floor)).collect();
    let grid = if pre == raw {
        provisional
    } else {
        BinGrid::from_points(&pre, config.dist.bin_count, config.dist.padding_fraction)?
    };

    // Leave-one-out histograms: total counts minus the agent's own bin.
    let mut total = vec![0u64; grid.bin_count()];
    let bin_of: Vec<usize> = pre.iter().map(|&x| grid.bin_index(x)).collect();
    for &b in &bin_of {
        total[b] += 1;
    }
    let histograms: Vec<SocialHistogram> = bin_of
        .iter()
        .map(|&b| {
            let mut counts = total.clone();
            counts[b] -= 1;
            SocialHistogram::new(grid, counts)
        })
        .collect::<Result<_>>()?;

    let clean = generate_clean_points(&pre, &histograms, config, grid)?;

    let noise_dist = Normal::new(0.0, config.observation_noise_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let post: Vec<f64> = clean
        .iter()
        .map(|&c| (c + noise_dist.sample(&mut rng)).max(0.1 * grid.width()))
        .collect();

    let confidence: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=5)).collect();

    let round_id = (round_idx + 1).to_string();
    let records = (0..n)
        .map(|i| PredictionRecord {
            round_id: round_id.clone(),
            user_id: format!("u{:04}", i),
            asset_id: "synthetic".to_string(),
            pre_social: pre[i],
            post_social: post[i],
            si: histograms[i].clone(),
            confidence: Some(confidence[i]),
        })
        .collect();
    Ok(RoundData {
        round_id,
        grid,
        records,
    })
}

/// Applies the generator rule to every agent. A social Bayesian generator
/// with a round-empirical marginal has no post-social population to condition
/// on yet, so the marginal is bootstrapped by damped fixed-point iteration:
/// start from the uniform-marginal points, then repeatedly rebuild the
/// smoothed marginal from the current points and recompute them, damping the
/// marginal by 0.3 per step, until the points and marginal stop moving (at
/// most 100 sweeps).
fn generate_clean_points(
    pre: &[f64],
    histograms: &[SocialHistogram],
    config: &SyntheticConfig,
    grid: BinGrid,
) -> Result<Vec<f64>> {
    let spec = &config.generator;
    let bootstrap = spec.kind == ModelKind::SocialBayesian
        && spec.marginal_source == MarginalSource::RoundEmpirical;
    if !bootstrap {
        let ctx = RoundContext::with_uniform_marginal(grid, &config.dist);
        return pre
            .iter()
            .zip(histograms)
            .map(|(&p, h)| Ok(apply_model(p, h, spec, &ctx)?.point_prediction))
            .collect();
    }

    let ctx = RoundContext::with_uniform_marginal(grid, &config.dist);
    let prior_dists: Vec<BeliefDistribution> = pre
        .iter()
        .map(|&p| crate::models::prior_distribution(p, &ctx))
        .collect::<Result<_>>()?;
    let si_dists: Vec<BeliefDistribution> = histograms
        .iter()
        .map(|h| crate::models::si_distribution(h, spec, &ctx))
        .collect::<Result<_>>()?;

    let points_for = |marginal: &BeliefDistribution| -> Result<Vec<f64>> {
        prior_dists
            .iter()
            .zip(&si_dists)
            .map(|(p, s)| {
                Ok(social_bayesian_update(p, s, marginal, spec.extraction)?.point_prediction)
            })
            .collect()
    };
    let marginal_of = |points: &[f64]| -> Result<BeliefDistribution> {
        let hist = SocialHistogram::from_values(grid, points)?;
        histogram_to_distribution(&hist, config.dist.smoothing)
    };

    let mut points = points_for(&BeliefDistribution::uniform(grid))?;
    let mut marginal = marginal_of(&points)?;
    let span = grid.upper() - grid.lower();
    for _ in 0..100 {
        let new_points = points_for(&marginal)?;
        let rebuilt = marginal_of(&new_points)?;
        let moved = points
            .iter()
            .zip(&new_points)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let residual = marginal
            .mass()
            .iter()
            .zip(rebuilt.mass())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        points = new_points;
        if moved <= 1e-9 * span && residual <= 1e-13 {
            break;
        }
        let damped: Vec<f64> = marginal
            .mass()
            .iter()
            .zip(rebuilt.mass())
            .map(|(m, h)| m + 0.3 * (h - m))
            .collect();
        marginal = BeliefDistribution::from_unnormalized(grid, damped)?;
    }
    Ok(points)
}

/// Data file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Header + one comma-separated row per record.
    Delimited,
    /// One self-describing JSON object per line.
    LineStructured,
}

/// Picks the format from a path extension: `.jsonl`/`.ndjson` are
/// line-structured, anything else is delimited.
pub fn detect_format(path: &Path) -> DataFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => DataFormat::LineStructured,
        _ => DataFormat::Delimited,
    }
}

pub const DELIMITED_HEADER: [&str; 8] = [
    "round_id",
    "user_id",
    "asset_id",
    "pre_social",
    "post_social",
    "si_edges",
    "si_counts",
    "confidence",
];

/// Wire-level record shared by both formats.
#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    round_id: String,
    user_id: String,
    asset_id: String,
    pre_social: f64,
    post_social: f64,
    si_edges: Vec<f64>,
    si_counts: Vec<u64>,
    confidence: Option<u8>,
}

impl RecordLine {
    fn from_record(r: &PredictionRecord) -> Self {
        RecordLine {
            round_id: r.round_id.clone(),
            user_id: r.user_id.clone(),
            asset_id: r.asset_id.clone(),
            pre_social: r.pre_social,
            post_social: r.post_social,
            si_edges: r.si.grid().edges(),
            si_counts: r.si.counts().to_vec(),
            confidence: r.confidence,
        }
    }
}

/// Result of an ingestion pass: validated rounds plus the count of rows
/// rejected for non-positive prices and any warnings.
#[derive(Debug)]
pub struct IngestOutcome {
    pub rounds: Vec<RoundData>,
    pub rejected_rows: usize,
    pub warnings: Vec<String>,
}

pub fn ingest_path(path: &Path, cfg: &DistributionConfig) -> Result<IngestOutcome> {
    let format = detect_format(path);
    let file = File::open(path)?;
    ingest_reader(file, format, cfg)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    format: DataFormat,
    cfg: &DistributionConfig,
) -> Result<IngestOutcome> {
    let mut rejected = 0usize;
    let mut lines: Vec<(usize, RecordLine)> = Vec::new();

    match format {
        DataFormat::Delimited => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(reader);
            let headers = csv_reader.headers().map_err(csv_error)?.clone();
            if !headers.is_empty() {
                let got: Vec<&str> = headers.iter().collect();
                if got != DELIMITED_HEADER {
                    return Err(Error::MalformedRow {
                        line: 1,
                        message: format!(
                            "unexpected header `{}`, expected `{}`",
                            got.join(","),
                            DELIMITED_HEADER.join(",")
                        ),
                    });
                }
            }
            for row in csv_reader.records() {
                let row = row.map_err(csv_error)?;
                let line = row
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(lines.len() + 2);
                let parsed = parse_delimited_row(line, &row)?;
                lines.push((line, parsed));
            }
        }
        DataFormat::LineStructured => {
            for (idx, raw) in BufReader::new(reader).lines().enumerate() {
                let line = idx + 1;
                let raw = raw?;
                if raw.trim().is_empty() {
                    continue;
                }
                let parsed: RecordLine =
                    serde_json::from_str(&raw).map_err(|e| Error::MalformedRow {
                        line,
                        message: e.to_string(),
                    })?;
                lines.push((line, parsed));
            }
        }
    }

    // Structural validation is a hard error; non-positive prices are counted
    // and dropped.
    let mut kept: Vec<RecordLine> = Vec::new();
    for (line, rec) in lines {
        validate_line(line, &rec)?;
        if rec.pre_social <= 0.0 || rec.post_social <= 0.0 {
            rejected += 1;
            continue;
        }
        kept.push(rec);
    }

    let mut warnings = Vec::new();
    if kept.is_empty() {
        warnings.push("no records found".to_string());
    }

    // Group by round in first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RecordLine>> = HashMap::new();
    for rec in kept {
        if !groups.contains_key(&rec.round_id) {
            order.push(rec.round_id.clone());
        }
        groups.entry(rec.round_id.clone()).or_default().push(rec);
    }

    let mut rounds = Vec::with_capacity(order.len());
    for round_id in order {
        let group = groups.remove(&round_id).unwrap();
        rounds.push(build_round(round_id, group, cfg)?);
    }
    Ok(IngestOutcome {
        rounds,
        rejected_rows: rejected,
        warnings,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::MalformedRow {
        line,
        message: e.to_string(),
    }
}

fn parse_delimited_row(line: usize, row: &csv::StringRecord) -> Result<RecordLine> {
    let malformed = |message: String| Error::MalformedRow { line, message };
    if row.len() != DELIMITED_HEADER.len() {
        return Err(malformed(format!(
            "expected {} fields, got {}",
            DELIMITED_HEADER.len(),
            row.len()
        )));
    }
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let parse_f64 = |i: usize, name: &str| -> Result<f64> {
        field(i)
            .parse::<f64>()
            .map_err(|_| malformed(format!("bad {name} `{}`", field(i))))
    };
    let pre_social = parse_f64(3, "pre_social")?;
    let post_social = parse_f64(4, "post_social")?;
    let si_edges = parse_bracketed(field(5))
        .ok_or_else(|| malformed(format!("bad si_edges `{}`", field(5))))?;
    let si_counts: Vec<u64> = parse_bracketed_ints(field(6))
        .ok_or_else(|| malformed(format!("bad si_counts `{}`", field(6))))?;
    let confidence = if field(7).is_empty() {
        None
    } else {
        Some(
            field(7)
                .parse::<u8>()
                .map_err(|_| malformed(format!("bad confidence `{}`", field(7))))?,
        )
    };
    Ok(RecordLine {
        round_id: field(0).to_string(),
        user_id: field(1).to_string(),
        asset_id: field(2).to_string(),
        pre_social,
        post_social,
        si_edges,
        si_counts,
        confidence,
    })
}

fn parse_bracketed(s: &str) -> Option<Vec<f64>> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok())
        .collect()
}

fn parse_bracketed_ints(s: &str) -> Option<Vec<u64>> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|t| t.trim().parse::<u64>().ok())
        .collect()
}

fn validate_line(line: usize, rec: &RecordLine) -> Result<()> {
    let malformed = |message: String| Error::MalformedRow { line, message };
    if !rec.pre_social.is_finite() || !rec.post_social.is_finite() {
        return Err(malformed("non-finite price".to_string()));
    }
    if rec.si_counts.len() < 2 {
        return Err(malformed(format!(
            "histogram needs at least 2 bins, got {}",
            rec.si_counts.len()
        )));
    }
    if rec.si_edges.len() != rec.si_counts.len() + 1 {
        return Err(malformed(format!(
            "si_edges has {} entries, expected {}",
            rec.si_edges.len(),
            rec.si_counts.len() + 1
        )));
    }
    if rec.si_edges.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan()) {
        return Err(malformed("si_edges must be strictly increasing".to_string()));
    }
    if rec.si_counts.iter().sum::<u64>() == 0 {
        return Err(malformed("histogram total count must be positive".to_string()));
    }
    if let Some(c) = rec.confidence {
        if !(1..=5).contains(&c) {
            return Err(malformed(format!("confidence {c} outside 1..5")));
        }
    }
    Ok(())
}

/// Normalizes one round onto a shared grid. When every record carries the
/// same uniform bin edges that grid is adopted as-is (which makes
/// `ingest(serialize(x)) == x` hold); otherwise a fresh grid is built over the
/// union of prices and edges and the histograms are re-binned by assigning
/// each source bin's count to the target bin containing its center.
fn build_round(round_id: String, group: Vec<RecordLine>, cfg: &DistributionConfig) -> Result<RoundData> {
    let first_edges = group[0].si_edges.clone();
    let shared = group.iter().all(|r| r.si_edges == first_edges);
    let grid = if shared {
        uniform_grid_from_edges(&first_edges)
    } else {
        None
    };
    let grid = match grid {
        Some(g) => g,
        None => {
            let mut points: Vec<f64> = Vec::new();
            for rec in &group {
                points.push(rec.pre_social);
                points.push(rec.post_social);
                points.extend_from_slice(&rec.si_edges);
            }
            BinGrid::from_points(&points, cfg.bin_count, cfg.padding_fraction)?
        }
    };

    let records = group
        .into_iter()
        .map(|rec| {
            let si = if shared {
                SocialHistogram::new(grid, rec.si_counts)?
            } else {
                let positions: Vec<(f64, u64)> = rec
                    .si_edges
                    .windows(2)
                    .zip(&rec.si_counts)
                    .map(|(w, &c)| ((w[0] + w[1]) / 2.0, c))
                    .collect();
                SocialHistogram::from_weighted_positions(grid, &positions)?
            };
            Ok(PredictionRecord {
                round_id: rec.round_id,
                user_id: rec.user_id,
                asset_id: rec.asset_id,
                pre_social: rec.pre_social,
                post_social: rec.post_social,
                si,
                confidence: rec.confidence,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundData {
        round_id,
        grid,
        records,
    })
}

/// Reconstructs a `BinGrid` from edges when they are uniform (within a 1e-9
/// relative tolerance).
fn uniform_grid_from_edges(edges: &[f64]) -> Option<BinGrid> {
    let n = edges.len().checked_sub(1)?;
    if n < 2 {
        return None;
    }
    let lower = edges[0];
    let upper = edges[n];
    let grid = BinGrid::new(lower, upper, n).ok()?;
    let span = upper - lower;
    let w = grid.width();
    for (i, &e) in edges.iter().enumerate() {
        let expected = if i == n { upper } else { lower + i as f64 * w };
        if (e - expected).abs() > 1e-9 * span {
            return None;
        }
    }
    Some(grid)
}

pub fn write_path(path: &Path, rounds: &[RoundData]) -> Result<()> {
    let format = detect_format(path);
    let mut file = File::create(path)?;
    match format {
        DataFormat::Delimited => write_delimited(&mut file, rounds),
        DataFormat::LineStructured => write_line_structured(&mut file, rounds),
    }
}

pub fn write_delimited<W: Write>(writer: &mut W, rounds: &[RoundData]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DELIMITED_HEADER)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for round in rounds {
        for record in &round.records {
            let line = RecordLine::from_record(record);
            let edges = format_list(&line.si_edges);
            let counts = format_int_list(&line.si_counts);
            let confidence = line.confidence.map(|c| c.to_string()).unwrap_or_default();
            w.write_record([
                line.round_id.as_str(),
                line.user_id.as_str(),
                line.asset_id.as_str(),
                &line.pre_social.to_string(),
                &line.post_social.to_string(),
                &edges,
                &counts,
                &confidence,
            ])
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_line_structured<W: Write>(writer: &mut W, rounds: &[RoundData]) -> Result<()> {
    for round in rounds {
        for record in &round.records {
            let line = RecordLine::from_record(record);
            let json = serde_json::to_string(&line)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            writeln!(writer, "{json}")?;
        }
    }
    Ok(())
}

fn format_list(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(","))
}

fn format_int_list(values: &[u64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(","))
}
