//! Belief-update models: social Bayesian, DeGroot, probabilistic learning and
//! the naive-Bayes variant family.
//!
//! Each model maps a participant's pre-social point estimate plus the peer
//! histogram they saw to a predicted post-social distribution and point.

use crate::belief::{
    histogram_to_distribution, point_to_distribution, Bandwidth, BeliefDistribution, BinGrid,
    DistributionConfig, Kernel, SocialHistogram,
};
use crate::data::PredictionRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SocialBayesian,
    Degroot,
    ProbLearning,
    NaiveBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodFamily {
    Empirical,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    Normal,
    Uniform,
}

/// How a point prediction is read off the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    Mean,
    Mode,
}

impl Extraction {
    pub fn extract(&self, d: &BeliefDistribution) -> f64 {
        match self {
            Extraction::Mean => d.mean(),
            Extraction::Mode => d.mode(),
        }
    }
}

/// How the social-information factor is conditioned: on the full peer
/// histogram, or on a Gaussian kernel placed at the histogram mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiConditioning {
    FullHistogram,
    MeanKernel,
}

/// Source of the marginal in the social Bayesian denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalSource {
    /// Smoothed empirical distribution of the round's post-social predictions.
    RoundEmpirical,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegrootWeight {
    /// Least-squares fit per round.
    Fit,
    Fixed(f64),
}

/// Full configuration of one update model. Fields irrelevant to `kind` are
/// carried but ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub likelihood: LikelihoodFamily,
    pub prior: PriorFamily,
    pub extraction: Extraction,
    pub degroot_weight: DegrootWeight,
    pub si_conditioning: SiConditioning,
    pub smoothing: f64,
    pub marginal_source: MarginalSource,
}

impl ModelSpec {
    fn base(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            likelihood: LikelihoodFamily::Empirical,
            prior: PriorFamily::Uniform,
            extraction: Extraction::Mean,
            degroot_weight: DegrootWeight::Fit,
            si_conditioning: SiConditioning::FullHistogram,
            smoothing: 1.0,
            marginal_source: MarginalSource::RoundEmpirical,
        }
    }

    pub fn social_bayesian() -> Self {
        Self::base(ModelKind::SocialBayesian)
    }

    pub fn degroot() -> Self {
        Self::base(ModelKind::Degroot)
    }

    pub fn degroot_with_weight(w: f64) -> Self {
        ModelSpec {
            degroot_weight: DegrootWeight::Fixed(w),
            ..Self::base(ModelKind::Degroot)
        }
    }

    pub fn prob_learning() -> Self {
        Self::base(ModelKind::ProbLearning)
    }

    pub fn naive_bayes(
        likelihood: LikelihoodFamily,
        prior: PriorFamily,
        extraction: Extraction,
    ) -> Self {
        ModelSpec {
            likelihood,
            prior,
            extraction,
            ..Self::base(ModelKind::NaiveBayes)
        }
    }

    /// The Normal Approx. configuration: normal likelihood, normal prior,
    /// mean extraction.
    pub fn normal_approx() -> Self {
        Self::naive_bayes(LikelihoodFamily::Normal, PriorFamily::Normal, Extraction::Mean)
    }

    pub fn is_social_bayesian(&self) -> bool {
        self.kind == ModelKind::SocialBayesian
    }

    /// Canonical report/CLI name derived from the configuration.
    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::SocialBayesian => {
                with_extraction_suffix("social_bayesian", self.extraction)
            }
            ModelKind::ProbLearning => with_extraction_suffix("prob_learning", self.extraction),
            ModelKind::Degroot => match self.degroot_weight {
                DegrootWeight::Fit => "degroot".to_string(),
                DegrootWeight::Fixed(w) => format!("degroot:w={w}"),
            },
            ModelKind::NaiveBayes => match (self.likelihood, self.prior, self.extraction) {
                (LikelihoodFamily::Empirical, PriorFamily::Uniform, Extraction::Mean) => {
                    "em_mean_uni".to_string()
                }
                (LikelihoodFamily::Empirical, PriorFamily::Uniform, Extraction::Mode) => {
                    "em_mode_uni".to_string()
                }
                (LikelihoodFamily::Empirical, PriorFamily::Normal, Extraction::Mean) => {
                    "em_mean_norm".to_string()
                }
                (LikelihoodFamily::Empirical, PriorFamily::Normal, Extraction::Mode) => {
                    "em_mode_norm".to_string()
                }
                (LikelihoodFamily::Normal, prior, extraction) => {
                    let mut name = "normal_approx".to_string();
                    if prior == PriorFamily::Uniform {
                        name.push_str(":prior=uniform");
                    }
                    if extraction == Extraction::Mode {
                        name.push_str(":extraction=mode");
                    }
                    name
                }
            },
        }
    }
}

fn with_extraction_suffix(base: &str, extraction: Extraction) -> String {
    match extraction {
        Extraction::Mean => base.to_string(),
        Extraction::Mode => format!("{base}:extraction=mode"),
    }
}

/// Flag-level defaults applied to every parsed model spec before its own
/// `key=value` parameters take effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecDefaults {
    pub si_conditioning: SiConditioning,
    pub marginal_source: MarginalSource,
    pub smoothing: f64,
}

impl Default for SpecDefaults {
    fn default() -> Self {
        SpecDefaults {
            si_conditioning: SiConditioning::FullHistogram,
            marginal_source: MarginalSource::RoundEmpirical,
            smoothing: 1.0,
        }
    }
}

pub const VALID_MODEL_NAMES: &str = "social_bayesian, degroot, prob_learning, normal_approx, \
     em_mean_norm, em_mean_uni, em_mode_norm, em_mode_uni, all";

/// Parses one model name of the form `name[:key=value]...`, e.g.
/// `degroot:w=0.3` or `social_bayesian:extraction=mode`.
pub fn parse_model(input: &str, defaults: &SpecDefaults) -> Result<ModelSpec> {
    let mut parts = input.split(':');
    let base = parts.next().unwrap_or("").trim().to_ascii_lowercase();
    let mut spec = match base.as_str() {
        "social_bayesian" => ModelSpec::social_bayesian(),
        "degroot" => ModelSpec::degroot(),
        "prob_learning" => ModelSpec::prob_learning(),
        "normal_approx" => ModelSpec::normal_approx(),
        "em_mean_norm" => {
            ModelSpec::naive_bayes(LikelihoodFamily::Empirical, PriorFamily::Normal, Extraction::Mean)
        }
        "em_mean_uni" => {
            ModelSpec::naive_bayes(LikelihoodFamily::Empirical, PriorFamily::Uniform, Extraction::Mean)
        }
        "em_mode_norm" => {
            ModelSpec::naive_bayes(LikelihoodFamily::Empirical, PriorFamily::Normal, Extraction::Mode)
        }
        "em_mode_uni" => {
            ModelSpec::naive_bayes(LikelihoodFamily::Empirical, PriorFamily::Uniform, Extraction::Mode)
        }
        _ => {
            return Err(Error::UnknownModel {
                name: input.to_string(),
                valid: VALID_MODEL_NAMES.to_string(),
            })
        }
    };
    spec.si_conditioning = defaults.si_conditioning;
    spec.marginal_source = defaults.marginal_source;
    spec.smoothing = defaults.smoothing;

    for param in parts {
        let (key, value) = param
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("malformed model parameter `{param}`")))?;
        match key.trim() {
            "w" => {
                let w: f64 = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad weight `{value}`")))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::WeightOutOfRange(w));
                }
                spec.degroot_weight = DegrootWeight::Fixed(w);
            }
            "extraction" => {
                spec.extraction = match value {
                    "mean" => Extraction::Mean,
                    "mode" => Extraction::Mode,
                    _ => {
                        return Err(Error::InvalidConfig(format!("bad extraction `{value}`")))
                    }
                }
            }
            "si" => {
                spec.si_conditioning = match value {
                    "full_histogram" => SiConditioning::FullHistogram,
                    "mean_kernel" => SiConditioning::MeanKernel,
                    _ => return Err(Error::InvalidConfig(format!("bad si mode `{value}`"))),
                }
            }
            "marginal" => {
                spec.marginal_source = match value {
                    "round_empirical" => MarginalSource::RoundEmpirical,
                    "uniform" => MarginalSource::Uniform,
                    _ => return Err(Error::InvalidConfig(format!("bad marginal `{value}`"))),
                }
            }
            "smoothing" => {
                let s: f64 = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad smoothing `{value}`")))?;
                if !s.is_finite() || s < 0.0 {
                    return Err(Error::InvalidConfig(format!("bad smoothing `{value}`")));
                }
                spec.smoothing = s;
            }
            "likelihood" => {
                spec.likelihood = match value {
                    "empirical" => LikelihoodFamily::Empirical,
                    "normal" => LikelihoodFamily::Normal,
                    _ => return Err(Error::InvalidConfig(format!("bad likelihood `{value}`"))),
                }
            }
            "prior" => {
                spec.prior = match value {
                    "normal" => PriorFamily::Normal,
                    "uniform" => PriorFamily::Uniform,
                    _ => return Err(Error::InvalidConfig(format!("bad prior `{value}`"))),
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown model parameter `{other}`"
                )))
            }
        }
    }
    Ok(spec)
}

/// Parses a comma-separated model list; `all` expands to the eight standard
/// models in comparison-table row order.
pub fn parse_models(input: &str, defaults: &SpecDefaults) -> Result<Vec<ModelSpec>> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidConfig("empty model list".to_string()));
    }
    if trimmed.eq_ignore_ascii_case("all") {
        return [
            "normal_approx",
            "em_mean_norm",
            "em_mean_uni",
            "em_mode_norm",
            "em_mode_uni",
            "degroot",
            "prob_learning",
            "social_bayesian",
        ]
        .iter()
        .map(|name| parse_model(name, defaults))
        .collect();
    }
    trimmed
        .split(',')
        .map(|name| parse_model(name.trim(), defaults))
        .collect()
}

/// A model's output for one record.
#[derive(Debug, Clone)]
pub struct UpdateResult {
    pub posterior: BeliefDistribution,
    pub point_prediction: f64,
}

fn ensure_shared_grid(a: &BeliefDistribution, b: &BeliefDistribution) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Posterior proportional to `si * prior / marginal`, renormalized; the
/// constant factor collapsing the joint terms is absorbed by normalization.
pub fn social_bayesian_update(
    prior_dist: &BeliefDistribution,
    si_dist: &BeliefDistribution,
    marginal_post: &BeliefDistribution,
    extraction: Extraction,
) -> Result<UpdateResult> {
    ensure_shared_grid(prior_dist, si_dist)?;
    ensure_shared_grid(prior_dist, marginal_post)?;
    if let Some(i) = marginal_post.mass().iter().position(|&m| m == 0.0) {
        return Err(Error::UnsmoothedMarginal(i));
    }
    let weights = prior_dist
        .mass()
        .iter()
        .zip(si_dist.mass())
        .zip(marginal_post.mass())
        .map(|((&p, &s), &m)| s * p / m)
        .collect();
    let posterior = BeliefDistribution::from_unnormalized(*prior_dist.grid(), weights)?;
    let point_prediction = extraction.extract(&posterior);
    Ok(UpdateResult {
        posterior,
        point_prediction,
    })
}

/// Posterior proportional to the elementwise product `si * prior`.
pub fn probabilistic_learning_update(
    prior_dist: &BeliefDistribution,
    si_dist: &BeliefDistribution,
    extraction: Extraction,
) -> Result<UpdateResult> {
    ensure_shared_grid(prior_dist, si_dist)?;
    let weights = prior_dist
        .mass()
        .iter()
        .zip(si_dist.mass())
        .map(|(&p, &s)| s * p)
        .collect();
    let posterior = BeliefDistribution::from_unnormalized(*prior_dist.grid(), weights)?;
    let point_prediction = extraction.extract(&posterior);
    Ok(UpdateResult {
        posterior,
        point_prediction,
    })
}

/// Convex combination `w * prior + (1 - w) * si_mean`.
pub fn degroot_update(prior_point: f64, si_mean: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::WeightOutOfRange(w));
    }
    Ok(w * prior_point + (1.0 - w) * si_mean)
}

/// Closed-form least-squares weight for `post = w*prior + (1-w)*si`:
/// `w = sum(a*b) / sum(a*a)` with `a = prior - si`, `b = post - si`,
/// clamped to `[0, 1]`.
pub fn fit_degroot_weight(triples: &[(f64, f64, f64)]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(prior, si, post) in triples {
        let a = prior - si;
        let b = post - si;
        num += a * b;
        den += a * a;
    }
    if den == 0.0 {
        return Err(Error::WeightUnidentifiable);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Naive-Bayes style update with the stated bandwidth for the normal prior
/// and the normal likelihood's zero-variance fallback.
pub fn naive_bayes_update_with(
    prior_point: f64,
    si_hist: &SocialHistogram,
    spec: &ModelSpec,
    bandwidth: Bandwidth,
) -> Result<UpdateResult> {
    let grid = *si_hist.grid();
    let likelihood = match spec.likelihood {
        LikelihoodFamily::Empirical => histogram_to_distribution(si_hist, spec.smoothing)?,
        LikelihoodFamily::Normal => {
            let mean = si_hist.mean();
            let mut sd = si_hist.std_dev();
            if sd == 0.0 {
                // unanimous crowd: fall back to one bin width
                sd = grid.width();
            }
            let weights = (0..grid.bin_count())
                .map(|i| {
                    let d = grid.center(i) - mean;
                    (-d * d / (2.0 * sd * sd)).exp()
                })
                .collect();
            BeliefDistribution::from_unnormalized(grid, weights)?
        }
    };
    let prior = match spec.prior {
        PriorFamily::Normal => point_to_distribution(prior_point, grid, Kernel::Gaussian, bandwidth)?,
        PriorFamily::Uniform => BeliefDistribution::uniform(grid),
    };
    let weights = likelihood
        .mass()
        .iter()
        .zip(prior.mass())
        .map(|(&l, &p)| l * p)
        .collect();
    let posterior = BeliefDistribution::from_unnormalized(grid, weights)?;
    let point_prediction = spec.extraction.extract(&posterior);
    Ok(UpdateResult {
        posterior,
        point_prediction,
    })
}

/// [`naive_bayes_update_with`] using the default bandwidth of one bin width.
pub fn naive_bayes_update(
    prior_point: f64,
    si_hist: &SocialHistogram,
    spec: &ModelSpec,
) -> Result<UpdateResult> {
    naive_bayes_update_with(prior_point, si_hist, spec, Bandwidth::Auto)
}

/// Round-level inputs shared by every record: the grid, the marginal over
/// post-social predictions, the fitted DeGroot weight and the kernel used to
/// build prior distributions.
#[derive(Debug, Clone)]
pub struct RoundContext {
    pub grid: BinGrid,
    pub marginal: BeliefDistribution,
    pub fitted_degroot_weight: Option<f64>,
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl RoundContext {
    /// Builds the context from a round's records: the marginal is the
    /// smoothed histogram of actual post-social values and the DeGroot weight
    /// is fit per round (None when unidentifiable).
    pub fn from_records(records: &[PredictionRecord], cfg: &DistributionConfig) -> Result<Self> {
        let first = records.first().ok_or(Error::NoRecords)?;
        let grid = *first.si.grid();
        let posts: Vec<f64> = records.iter().map(|r| r.post_social).collect();
        let post_hist = SocialHistogram::from_values(grid, &posts)?;
        let marginal = histogram_to_distribution(&post_hist, cfg.smoothing)?;
        let triples: Vec<(f64, f64, f64)> = records
            .iter()
            .map(|r| (r.pre_social, r.si.mean(), r.post_social))
            .collect();
        let fitted_degroot_weight = fit_degroot_weight(&triples).ok();
        Ok(RoundContext {
            grid,
            marginal,
            fitted_degroot_weight,
            kernel: cfg.kernel,
            bandwidth: cfg.bandwidth,
        })
    }

    /// Context for generation or tests where no post-social values exist yet:
    /// uniform marginal, no fitted weight.
    pub fn with_uniform_marginal(grid: BinGrid, cfg: &DistributionConfig) -> Self {
        RoundContext {
            grid,
            marginal: BeliefDistribution::uniform(grid),
            fitted_degroot_weight: None,
            kernel: cfg.kernel,
            bandwidth: cfg.bandwidth,
        }
    }
}

/// Prior belief distribution for a pre-social point under the context's
/// kernel settings.
pub fn prior_distribution(pre_social: f64, ctx: &RoundContext) -> Result<BeliefDistribution> {
    point_to_distribution(pre_social, ctx.grid, ctx.kernel, ctx.bandwidth)
}

/// Social-information distribution per the spec's conditioning mode: the full
/// smoothed histogram, or a Gaussian kernel at the histogram mean.
pub fn si_distribution(
    si: &SocialHistogram,
    spec: &ModelSpec,
    ctx: &RoundContext,
) -> Result<BeliefDistribution> {
    match spec.si_conditioning {
        SiConditioning::FullHistogram => histogram_to_distribution(si, spec.smoothing),
        SiConditioning::MeanKernel => {
            point_to_distribution(si.mean(), ctx.grid, Kernel::Gaussian, ctx.bandwidth)
        }
    }
}

/// Core dispatch: applies `spec` to one pre-social estimate and its social
/// histogram under the round context.
pub fn apply_model(
    pre_social: f64,
    si: &SocialHistogram,
    spec: &ModelSpec,
    ctx: &RoundContext,
) -> Result<UpdateResult> {
    if si.grid() != &ctx.grid {
        return Err(Error::GridMismatch);
    }
    match spec.kind {
        ModelKind::Degroot => {
            let w = match spec.degroot_weight {
                DegrootWeight::Fixed(w) => w,
                DegrootWeight::Fit => ctx
                    .fitted_degroot_weight
                    .ok_or(Error::WeightUnidentifiable)?,
            };
            let point = degroot_update(pre_social, si.mean(), w)?;
            let posterior = point_to_distribution(point, ctx.grid, ctx.kernel, ctx.bandwidth)?;
            Ok(UpdateResult {
                posterior,
                point_prediction: point,
            })
        }
        ModelKind::NaiveBayes => naive_bayes_update_with(pre_social, si, spec, ctx.bandwidth),
        ModelKind::SocialBayesian | ModelKind::ProbLearning => {
            let prior_dist = prior_distribution(pre_social, ctx)?;
            let si_dist = si_distribution(si, spec, ctx)?;
            if spec.kind == ModelKind::ProbLearning {
                probabilistic_learning_update(&prior_dist, &si_dist, spec.extraction)
            } else {
                let uniform;
                let marginal = match spec.marginal_source {
                    MarginalSource::RoundEmpirical => &ctx.marginal,
                    MarginalSource::Uniform => {
                        uniform = BeliefDistribution::uniform(ctx.grid);
                        &uniform
                    }
                };
                social_bayesian_update(&prior_dist, &si_dist, marginal, spec.extraction)
            }
        }
    }
}

/// Applies `spec` to one prediction record.
pub fn run_model(
    record: &PredictionRecord,
    spec: &ModelSpec,
    ctx: &RoundContext,
) -> Result<UpdateResult> {
    apply_model(record.pre_social, &record.si, spec, ctx)
}
