//! Per-round model evaluation: MAE against actual post-social predictions,
//! best-baseline selection and the improvement metric, assembled into a
//! comparison-table report plus a two-series file for plotting.

use std::collections::BTreeMap;

use crate::belief::DistributionConfig;
use crate::data::RoundData;
use crate::error::{Error, Result};
use crate::models::{run_model, ModelSpec, RoundContext};

/// Error unit for [`mae`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaeMode {
    /// `100 * mean(|predicted - actual| / |actual|)`.
    RelativePercent,
    /// `mean(|predicted - actual|)`.
    Absolute,
}

/// Mean absolute error between predictions and actual values.
pub fn mae(predicted: &[f64], actual: &[f64], mode: MaeMode) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(Error::NoRecords);
    }
    let n = predicted.len() as f64;
    let mut sum = 0.0;
    for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
        match mode {
            MaeMode::RelativePercent => {
                if a == 0.0 {
                    return Err(Error::ZeroActual(i));
                }
                sum += (p - a).abs() / a.abs();
            }
            MaeMode::Absolute => sum += (p - a).abs(),
        }
    }
    match mode {
        MaeMode::RelativePercent => Ok(100.0 * sum / n),
        MaeMode::Absolute => Ok(sum / n),
    }
}

/// Improvement of a model over a baseline, both errors given in percent:
/// the gain in percentage points divided by `(1 - baseline/100)`, scaled to
/// percent. Requires `0 <= error_baseline < 100`.
pub fn improvement(error_new: f64, error_baseline: f64) -> Result<f64> {
    if !(0.0..100.0).contains(&error_baseline) {
        return Err(Error::UndefinedDenominator(error_baseline));
    }
    Ok((error_baseline - error_new) / (1.0 - error_baseline / 100.0) * 100.0)
}

/// Rounds to the two decimals used in the emitted tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Evaluation settings for a comparison run.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub dist: DistributionConfig,
    pub mae_mode: MaeMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            dist: DistributionConfig::default(),
            mae_mode: MaeMode::RelativePercent,
        }
    }
}

/// One model's MAE in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub name: String,
    pub mae: f64,
    pub is_social_bayesian: bool,
}

/// Per-round slice of the final report.
///
/// The best baseline is the non-social-Bayesian model with the minimum MAE
/// (ties to the lexicographically first name). The improvement row is
/// computed from table-resolution (two-decimal) MAE values so the emitted
/// report is self-consistent, and exists only when a social Bayesian row is
/// present alongside at least one baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEvaluation {
    pub round_id: String,
    pub scores: Vec<ModelScore>,
    pub best_baseline: Option<String>,
    pub improvement: Option<f64>,
}

impl RoundEvaluation {
    pub fn from_scores(round_id: String, scores: Vec<ModelScore>) -> Result<Self> {
        for (i, s) in scores.iter().enumerate() {
            if scores[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate model name `{}`",
                    s.name
                )));
            }
            if !s.mae.is_finite() || s.mae < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "negative MAE {} for model `{}`",
                    s.mae, s.name
                )));
            }
        }
        let best_baseline = scores
            .iter()
            .filter(|s| !s.is_social_bayesian)
            .min_by(|a, b| {
                a.mae
                    .partial_cmp(&b.mae)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.name.cmp(&b.name))
            })
            .map(|s| s.name.clone());
        let social = scores.iter().find(|s| s.is_social_bayesian);
        let improvement = match (&best_baseline, social) {
            (Some(base_name), Some(sb)) => {
                let base = scores.iter().find(|s| &s.name == base_name).unwrap();
                Some(improvement(round2(sb.mae), round2(base.mae))?)
            }
            _ => None,
        };
        Ok(RoundEvaluation {
            round_id,
            scores,
            best_baseline,
            improvement,
        })
    }

    pub fn mae_of(&self, model: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.name == model).map(|s| s.mae)
    }
}

/// Runs every spec over every record of a round and scores the point
/// predictions against the actual post-social values.
pub fn evaluate_round(
    round: &RoundData,
    specs: &[ModelSpec],
    opts: &EvalOptions,
) -> Result<RoundEvaluation> {
    if round.records.is_empty() {
        return Err(Error::NoRecords);
    }
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no models to evaluate".to_string()));
    }
    let ctx = RoundContext::from_records(&round.records, &opts.dist)?;
    let actual: Vec<f64> = round.records.iter().map(|r| r.post_social).collect();
    let mut scores = Vec::with_capacity(specs.len());
    for spec in specs {
        let predicted: Vec<f64> = round
            .records
            .iter()
            .map(|r| Ok(run_model(r, spec, &ctx)?.point_prediction))
            .collect::<Result<_>>()?;
        scores.push(ModelScore {
            name: spec.name(),
            mae: mae(&predicted, &actual, opts.mae_mode)?,
            is_social_bayesian: spec.is_social_bayesian(),
        });
    }
    RoundEvaluation::from_scores(round.round_id.clone(), scores)
}

/// Comparison-table report: model rows by round columns, plus the
/// best-baseline and improvement rows.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub rounds: Vec<String>,
    pub models: Vec<String>,
    mae: BTreeMap<(String, String), f64>,
    pub best_baseline: BTreeMap<String, String>,
    pub improvement: BTreeMap<String, f64>,
    social_bayesian_model: Option<String>,
}

impl EvaluationReport {
    pub fn mae_for(&self, model: &str, round: &str) -> Option<f64> {
        self.mae
            .get(&(model.to_string(), round.to_string()))
            .copied()
    }

    /// Comma-separated table: one row per model with two-decimal MAE values,
    /// then the best-baseline and improvement rows when defined.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("model");
        for round in &self.rounds {
            out.push(',');
            out.push_str(round);
        }
        out.push('\n');
        for model in &self.models {
            out.push_str(model);
            for round in &self.rounds {
                out.push(',');
                if let Some(v) = self.mae_for(model, round) {
                    out.push_str(&format!("{v:.2}"));
                }
            }
            out.push('\n');
        }
        if !self.best_baseline.is_empty() {
            out.push_str("best_baseline");
            for round in &self.rounds {
                out.push(',');
                if let Some(name) = self.best_baseline.get(round) {
                    out.push_str(name);
                }
            }
            out.push('\n');
        }
        if !self.improvement.is_empty() {
            out.push_str("improvement");
            for round in &self.rounds {
                out.push(',');
                if let Some(v) = self.improvement.get(round) {
                    out.push_str(&format!("{v:.2}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// One self-describing JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for model in &self.models {
            for round in &self.rounds {
                if let Some(v) = self.mae_for(model, round) {
                    out.push_str(
                        &serde_json::json!({
                            "row": "mae", "model": model, "round": round, "value": v
                        })
                        .to_string(),
                    );
                    out.push('\n');
                }
            }
        }
        for round in &self.rounds {
            if let Some(name) = self.best_baseline.get(round) {
                out.push_str(
                    &serde_json::json!({
                        "row": "best_baseline", "round": round, "model": name
                    })
                    .to_string(),
                );
                out.push('\n');
            }
        }
        for round in &self.rounds {
            if let Some(v) = self.improvement.get(round) {
                out.push_str(
                    &serde_json::json!({
                        "row": "improvement", "round": round, "value": v
                    })
                    .to_string(),
                );
                out.push('\n');
            }
        }
        out
    }

    /// Two-series per-round table (social Bayesian MAE against the best
    /// baseline's MAE) for external plotting; None when either side is
    /// missing.
    pub fn figure_series(&self) -> Option<String> {
        let sb_model = self.social_bayesian_model.as_ref()?;
        if self.best_baseline.is_empty() {
            return None;
        }
        let mut out = String::from("round,social_bayesian_mae,best_baseline_mae\n");
        for round in &self.rounds {
            let sb = self.mae_for(sb_model, round)?;
            let base_name = self.best_baseline.get(round)?;
            let base = self.mae_for(base_name, round)?;
            out.push_str(&format!("{round},{sb},{base}\n"));
        }
        Some(out)
    }
}

/// Assembles per-round slices into the final report; column order follows the
/// input order.
pub fn build_report(slices: Vec<RoundEvaluation>) -> Result<EvaluationReport> {
    if slices.is_empty() {
        return Err(Error::NoRecords);
    }
    let models: Vec<String> = slices[0].scores.iter().map(|s| s.name.clone()).collect();
    let mut rounds = Vec::with_capacity(slices.len());
    let mut mae = BTreeMap::new();
    let mut best_baseline = BTreeMap::new();
    let mut improvement = BTreeMap::new();
    let mut social_bayesian_model = slices[0]
        .scores
        .iter()
        .find(|s| s.is_social_bayesian)
        .map(|s| s.name.clone());
    for slice in &slices {
        if rounds.contains(&slice.round_id) {
            return Err(Error::DuplicateRound(slice.round_id.clone()));
        }
        let names: Vec<String> = slice.scores.iter().map(|s| s.name.clone()).collect();
        if names != models {
            return Err(Error::InvalidConfig(format!(
                "round {} scores different models than round {}",
                slice.round_id, slices[0].round_id
            )));
        }
        rounds.push(slice.round_id.clone());
        for score in &slice.scores {
            mae.insert(
                (score.name.clone(), slice.round_id.clone()),
                score.mae,
            );
        }
        if let Some(name) = &slice.best_baseline {
            best_baseline.insert(slice.round_id.clone(), name.clone());
        }
        if let Some(v) = slice.improvement {
            improvement.insert(slice.round_id.clone(), v);
        }
        if social_bayesian_model.is_none() {
            social_bayesian_model = slice
                .scores
                .iter()
                .find(|s| s.is_social_bayesian)
                .map(|s| s.name.clone());
        }
    }
    Ok(EvaluationReport {
        rounds,
        models,
        mae,
        best_baseline,
        improvement,
        social_bayesian_model,
    })
}
