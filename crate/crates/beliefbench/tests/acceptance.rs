//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeMap;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beliefbench::belief::{
    histogram_to_distribution, kl_divergence, kl_matrix, point_to_distribution, Bandwidth,
    BeliefDistribution, BinGrid, DistributionConfig, Kernel, SocialHistogram,
};
use beliefbench::cli::{cmd_compare, cmd_simulate, CompareArgs, SimulateArgs, SiModeArg};
use beliefbench::data::{synthesize, write_delimited, SyntheticConfig};
use beliefbench::eval::{evaluate_round, improvement, EvalOptions};
use beliefbench::models::{
    fit_degroot_weight, parse_models, probabilistic_learning_update, social_bayesian_update,
    Extraction, ModelSpec, SiConditioning, SpecDefaults,
};

const PUBLISHED_PAIRS: [(f64, f64); 7] = [
    (2.05, 1.52),
    (5.23, 5.13),
    (1.94, 1.92),
    (1.69, 0.82),
    (1.21, 0.63),
    (2.47, 1.28),
    (2.29, 0.86),
];
const PUBLISHED_IMPROVEMENT: [f64; 7] = [54.2, 10.5, 2.0, 87.7, 58.9, 122.3, 147.1];

#[test]
fn criterion_1_improvement_row_reproduction() {
    for ((baseline, new), expected) in PUBLISHED_PAIRS.iter().zip(PUBLISHED_IMPROVEMENT) {
        let got = improvement(*new, *baseline).unwrap();
        assert!(
            (got - expected).abs() <= 0.8,
            "improvement({new}, {baseline}) = {got:.4}, published {expected} (tolerance 0.8)"
        );
    }
    println!("acceptance criterion 1 (improvement-row reproduction): pass");
}

fn random_distribution(rng: &mut ChaCha8Rng, grid: BinGrid) -> BeliefDistribution {
    let weights: Vec<f64> = (0..grid.bin_count())
        .map(|_| rng.gen_range(0.01..1.0))
        .collect();
    BeliefDistribution::from_unnormalized(grid, weights).unwrap()
}

#[test]
fn criterion_2_reduction_identities() {
    let grid = BinGrid::new(0.0, 1.0, 12).unwrap();
    let uniform = BeliefDistribution::uniform(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..1000 {
        let prior = random_distribution(&mut rng, grid);
        let si = random_distribution(&mut rng, grid);

        let sb = social_bayesian_update(&prior, &si, &uniform, Extraction::Mean).unwrap();
        let pl = probabilistic_learning_update(&prior, &si, Extraction::Mean).unwrap();
        for (a, b) in sb.posterior.mass().iter().zip(pl.posterior.mass()) {
            assert!(
                (a - b).abs() <= 1e-12,
                "uniform-marginal reduction violated: {a} vs {b}"
            );
        }

        let sb_flat = social_bayesian_update(&prior, &uniform, &uniform, Extraction::Mean).unwrap();
        for (a, b) in sb_flat.posterior.mass().iter().zip(prior.mass()) {
            assert!(
                (a - b).abs() <= 1e-12,
                "uniform-marginal + uniform-SI reduction violated: {a} vs {b}"
            );
        }
    }
    println!("acceptance criterion 2 (reduction identities, 1000 random pairs): pass");
}

/// All 3-bin mass vectors on the 0.1 lattice.
fn lattice(min_tenths: u32) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in min_tenths..=10 {
        for j in min_tenths..=(10 - i) {
            let k = 10 - i - j;
            if k < min_tenths {
                continue;
            }
            out.push([i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0]);
        }
    }
    out
}

#[test]
fn criterion_3_brute_force_oracle() {
    let grid = BinGrid::new(0.0, 3.0, 3).unwrap();
    let all = lattice(0);
    let positive = lattice(1);
    let mut checked = 0u64;
    for prior in &all {
        for si in &all {
            for marginal in &positive {
                let p = BeliefDistribution::new(grid, prior.to_vec()).unwrap();
                let s = BeliefDistribution::new(grid, si.to_vec()).unwrap();
                let m = BeliefDistribution::new(grid, marginal.to_vec()).unwrap();
                // independent direct computation
                let direct: Vec<f64> = (0..3).map(|i| si[i] * prior[i] / marginal[i]).collect();
                let total: f64 = direct.iter().sum();
                let result = social_bayesian_update(&p, &s, &m, Extraction::Mean);
                if total == 0.0 {
                    assert!(result.is_err(), "expected empty-support error");
                    continue;
                }
                let result = result.unwrap();
                for (got, want) in result
                    .posterior
                    .mass()
                    .iter()
                    .zip(direct.iter().map(|d| d / total))
                {
                    assert!(
                        (got - want).abs() <= 1e-12,
                        "lattice mismatch: {got} vs {want} (prior {prior:?} si {si:?} marg {marginal:?})"
                    );
                }
                checked += 1;
            }
        }
    }
    println!(
        "acceptance criterion 3 (brute-force 3-bin lattice oracle, {checked} cases): pass"
    );
}

struct ParsedTable {
    rounds: Vec<String>,
    mae: BTreeMap<String, Vec<f64>>,
    best_baseline: Vec<String>,
    improvement: Vec<f64>,
}

fn parse_table(text: &str) -> ParsedTable {
    let mut lines = text.lines();
    let header = lines.next().expect("empty table");
    let rounds: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut mae = BTreeMap::new();
    let mut best_baseline = Vec::new();
    let mut improvement = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        let name = fields.next().unwrap().to_string();
        let rest: Vec<&str> = fields.collect();
        match name.as_str() {
            "best_baseline" => best_baseline = rest.iter().map(|s| s.to_string()).collect(),
            "improvement" => {
                improvement = rest.iter().map(|s| s.parse().unwrap()).collect();
            }
            _ => {
                mae.insert(name, rest.iter().map(|s| s.parse().unwrap()).collect());
            }
        }
    }
    ParsedTable {
        rounds,
        mae,
        best_baseline,
        improvement,
    }
}

fn winner_per_round(table: &ParsedTable, round_idx: usize) -> String {
    table
        .mae
        .iter()
        .map(|(name, values)| (name.clone(), values[round_idx]))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)))
        .unwrap()
        .0
}

#[test]
fn criterion_4_model_recovery() {
    let dir = tempfile::tempdir().unwrap();

    // --- DeGroot side: generator degroot(w = 0.3), noise 0.5% of the true value.
    let config = SyntheticConfig {
        agent_count: 2000,
        round_count: 7,
        true_values: vec![100.0],
        prior_noise_sd: 5.0,
        generator: ModelSpec::degroot_with_weight(0.3),
        observation_noise_sd: 0.5,
        seed: 42,
        dist: DistributionConfig::default(),
    };
    let rounds = synthesize(&config).unwrap();
    let defaults = SpecDefaults::default();
    let specs = parse_models("all", &defaults).unwrap();
    let opts = EvalOptions::default();
    let mut degroot_wins = 0;
    for round in &rounds {
        let triples: Vec<_> = round
            .records
            .iter()
            .map(|r| (r.pre_social, r.si.mean(), r.post_social))
            .collect();
        let w = fit_degroot_weight(&triples).unwrap();
        assert!(
            (w - 0.3).abs() <= 0.05,
            "round {}: fitted weight {w} not within 0.3 +- 0.05",
            round.round_id
        );
        let eval = evaluate_round(round, &specs, &opts).unwrap();
        let winner = eval
            .scores
            .iter()
            .min_by(|a, b| {
                a.mae
                    .partial_cmp(&b.mae)
                    .unwrap()
                    .then_with(|| a.name.cmp(&b.name))
            })
            .unwrap()
            .name
            .clone();
        if winner == "degroot" {
            degroot_wins += 1;
        }
    }
    assert!(
        degroot_wins >= 6,
        "degroot lowest MAE in only {degroot_wins}/7 rounds"
    );

    // --- Social Bayesian side: mode extraction with mean-kernel SI so the
    // marginal division has identifiable structure; same sizes and noise.
    let mut gen_spec = ModelSpec::social_bayesian();
    gen_spec.extraction = Extraction::Mode;
    gen_spec.si_conditioning = SiConditioning::MeanKernel;
    let config = SyntheticConfig {
        agent_count: 2000,
        round_count: 7,
        true_values: vec![100.0],
        prior_noise_sd: 20.0,
        generator: gen_spec,
        observation_noise_sd: 0.5,
        seed: 42,
        dist: DistributionConfig::default(),
    };
    let rounds = synthesize(&config).unwrap();
    let data_path = dir.path().join("sb_rounds.csv");
    let mut buf = Vec::new();
    write_delimited(&mut buf, &rounds).unwrap();
    fs::write(&data_path, buf).unwrap();

    let table_path = dir.path().join("sb_report.csv");
    let mut args = CompareArgs::over_file(
        &data_path,
        "normal_approx,em_mean_norm,em_mean_uni,em_mode_norm,em_mode_uni,degroot,\
         prob_learning:extraction=mode,social_bayesian:extraction=mode",
    );
    args.output = Some(table_path.clone());
    args.si_mode = SiModeArg::MeanKernel;
    cmd_compare(&args).unwrap();

    let table = parse_table(&fs::read_to_string(&table_path).unwrap());
    assert_eq!(table.rounds.len(), 7);
    let sb_name = "social_bayesian:extraction=mode";
    let mut sb_wins = 0;
    for r in 0..7 {
        if winner_per_round(&table, r) == sb_name {
            sb_wins += 1;
            assert!(
                table.improvement[r] > 0.0,
                "round {}: social Bayesian wins but improvement {} not positive",
                table.rounds[r],
                table.improvement[r]
            );
        }
    }
    assert!(
        sb_wins >= 6,
        "social Bayesian lowest MAE in only {sb_wins}/7 rounds"
    );
    println!(
        "acceptance criterion 4 (model recovery: degroot {degroot_wins}/7, social bayesian {sb_wins}/7): pass"
    );
}

#[test]
fn criterion_5_distribution_invariant_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut construction_count = 0u64;

    for _ in 0..2600 {
        let bins = rng.gen_range(2..40);
        let lower = rng.gen_range(-100.0..100.0);
        let upper = lower + rng.gen_range(0.5..200.0);
        let grid = BinGrid::new(lower, upper, bins).unwrap();

        // kernel construction
        let point = rng.gen_range(lower..upper);
        let kernel = if rng.gen_bool(0.5) {
            Kernel::Delta
        } else {
            Kernel::Gaussian
        };
        let bandwidth = if rng.gen_bool(0.5) {
            Bandwidth::Auto
        } else {
            Bandwidth::Fixed(rng.gen_range(0.1..10.0) * grid.width())
        };
        let d = point_to_distribution(point, grid, kernel, bandwidth).unwrap();
        assert_valid(&d, false);
        construction_count += 1;

        // histogram constructions, raw and smoothed
        let counts: Vec<u64> = (0..bins).map(|_| rng.gen_range(0..30)).collect();
        if counts.iter().sum::<u64>() > 0 {
            let hist = SocialHistogram::new(grid, counts).unwrap();
            let raw = histogram_to_distribution(&hist, 0.0).unwrap();
            assert_valid(&raw, false);
            construction_count += 1;
            let smoothing = rng.gen_range(1e-3..5.0);
            let smoothed = histogram_to_distribution(&hist, smoothing).unwrap();
            assert_valid(&smoothed, true);
            construction_count += 1;
        }

        // normalized random weights
        let weights: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.0..1.0)).collect();
        if weights.iter().sum::<f64>() > 0.0 {
            let d = BeliefDistribution::from_unnormalized(grid, weights).unwrap();
            assert_valid(&d, false);
            construction_count += 1;
        }
    }
    assert!(
        construction_count >= 10_000,
        "only {construction_count} constructions exercised"
    );

    // KL properties over smoothed pairs
    let grid = BinGrid::new(0.0, 10.0, 20).unwrap();
    let mut dists = Vec::new();
    for _ in 0..200 {
        let p = random_distribution(&mut rng, grid);
        let q = random_distribution(&mut rng, grid);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!(kl >= -1e-15, "negative KL {kl}");
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let max_diff = p
            .mass()
            .iter()
            .zip(q.mass())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_diff > 1e-12 {
            assert!(kl > 0.0, "KL zero for distinct distributions");
        }
        dists.push(p);
    }
    let matrix = kl_matrix(&dists[..10]).unwrap();
    for (i, row) in matrix.iter().enumerate() {
        assert_eq!(row[i], 0.0, "non-zero diagonal at {i}");
    }
    println!(
        "acceptance criterion 5 (distribution invariants, {construction_count} constructions): pass"
    );
}

fn assert_valid(d: &BeliefDistribution, strictly_positive: bool) {
    let sum: f64 = d.mass().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "mass sums to {sum}");
    for &m in d.mass() {
        assert!(m >= 0.0, "negative mass {m}");
        if strictly_positive {
            assert!(m > 0.0, "smoothed distribution has a zero bin");
        }
    }
}

#[test]
fn criterion_6_determinism() {
    let dir = tempfile::tempdir().unwrap();

    // byte-identical simulation for a fixed seed
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let args = SimulateArgs {
            output: out.clone(),
            generator: "degroot:w=0.3".to_string(),
            agents: 100,
            rounds: 7,
            seed: 42,
            true_value: 100.0,
            prior_noise_sd: 5.0,
            obs_noise_sd: 0.5,
            dist: default_dist_args(),
            si_mode: SiModeArg::FullHistogram,
            marginal: beliefbench::cli::MarginalArg::RoundEmpirical,
        };
        cmd_simulate(&args).unwrap();
    }
    let bytes_a = fs::read(&out_a).unwrap();
    let bytes_b = fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed produced different files");

    // the emitted improvement row equals `improvement` applied to the
    // emitted MAE rows
    let report_path = dir.path().join("report.csv");
    let mut args = CompareArgs::over_file(&out_a, "all");
    args.output = Some(report_path.clone());
    cmd_compare(&args).unwrap();
    let table = parse_table(&fs::read_to_string(&report_path).unwrap());
    let sb = &table.mae["social_bayesian"];
    for (r, round) in table.rounds.iter().enumerate() {
        let baseline_name = &table.best_baseline[r];
        let baseline = table.mae[baseline_name][r];
        let expected = improvement(sb[r], baseline).unwrap();
        assert!(
            (table.improvement[r] - expected).abs() <= 0.005 + 1e-9,
            "round {round}: improvement row {} vs recomputed {expected}",
            table.improvement[r]
        );
    }
    // figure series emitted alongside
    let series = fs::read_to_string(dir.path().join("report.series.csv")).unwrap();
    assert!(series.starts_with("round,social_bayesian_mae,best_baseline_mae"));
    assert_eq!(series.lines().count(), 1 + table.rounds.len());
    println!("acceptance criterion 6 (determinism and self-consistency): pass");
}

fn default_dist_args() -> beliefbench::cli::DistArgs {
    beliefbench::cli::DistArgs {
        bins: 50,
        kernel: beliefbench::cli::KernelArg::Gaussian,
        bandwidth: Bandwidth::Auto,
        smoothing: 1.0,
    }
}
