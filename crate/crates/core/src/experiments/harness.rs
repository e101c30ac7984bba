use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{binomial_pmf, gen_countdown, per_sequence_violation, reports_to_csv, CountdownSpec, MetricReport};
use crate::ctmc::{DiffusionConfig, KernelKind, NoiseSchedule, RateKernel};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::derive_seed;
use crate::sampler::{sample, samples_to_text};
use crate::scheduler::{build_schedule, Strategy, TimeSchedule};
use crate::score::{train, MlpArch, MlpParams, MlpScore, OracleScore, ScoreModel, TrainConfig, TrainReport};
use crate::thermo::{
    curves_to_csv, sweep_curves, time_grid, wasserstein_bound, DataSource, EntropyCurve, ExactChain, WassersteinCurve,
    WassersteinMode,
};

/// Score-network architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub window_radius: usize,
    pub time_features: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_lr_fraction: f64,
    /// Number of clean training sequences.
    pub train_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![128, 128],
            window_radius: 8,
            time_features: 16,
            steps: 20_000,
            batch_size: 64,
            learning_rate: 2e-3,
            final_lr_fraction: 0.05,
            train_size: 50_000,
        }
    }
}

/// Seeds derived from an experiment seed, one per stage.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let label = stage.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    derive_seed(seed, label)
}

/// Initialize and train a network on `dataset`.
pub fn train_network(
    kernel: RateKernel,
    noise: NoiseSchedule,
    dataset: &[Vec<usize>],
    cfg: &NetworkConfig,
    seed: u64,
) -> Result<(MlpScore, TrainReport)> {
    let arch = MlpArch::new(kernel.num_states(), cfg.window_radius, cfg.time_features, cfg.hidden.clone())?;
    let params = MlpParams::init(arch, stage_seed(seed, "init"));
    let model = MlpScore::new(params, kernel, noise)?;
    let train_cfg = TrainConfig {
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        final_lr_fraction: cfg.final_lr_fraction,
        seed: stage_seed(seed, "train"),
        ..TrainConfig::default()
    };
    let report = train(model, &noise, dataset, &train_cfg)?;
    let trained = MlpScore::new(report.params.clone(), kernel, noise)?;
    Ok((trained, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub entropy: EntropyCurve,
    pub wasserstein: WassersteinCurve,
}

impl CurvePair {
    pub fn new(entropy: EntropyCurve) -> Result<Self> {
        let wasserstein = wasserstein_bound(&entropy, WassersteinMode::ActivityNonadiabatic)?;
        Ok(CurvePair { entropy, wasserstein })
    }

    pub fn to_csv(&self) -> Result<String> {
        curves_to_csv(&self.entropy, &self.wasserstein)
    }
}

/// Record of everything needed to regenerate an artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub experiment: String,
    pub seed: u64,
    pub derived_seeds: BTreeMap<String, u64>,
    pub parameters: serde_json::Value,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, parameters: serde_json::Value) -> Self {
        Manifest {
            version: 1,
            experiment: experiment.into(),
            seed,
            derived_seeds: BTreeMap::new(),
            parameters,
            files: BTreeMap::new(),
        }
    }

    /// Write `contents` under `dir` and record its hash.
    pub fn write_file(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.files.insert(name.into(), io::sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), io::to_json_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinomialConfig {
    pub kernel: KernelKind,
    pub trials: usize,
    pub p: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_samples: usize,
    pub n_tau: usize,
    pub seed: u64,
    /// Train a network for the model column; `None` skips it.
    pub network: Option<NetworkConfig>,
}

impl Default for BinomialConfig {
    fn default() -> Self {
        BinomialConfig {
            kernel: KernelKind::Uniform,
            trials: 14,
            p: 0.5,
            sigma_min: 0.01,
            sigma_max: 5.0,
            n_samples: 1024,
            n_tau: 1024,
            seed: 0,
            network: None,
        }
    }
}

impl BinomialConfig {
    pub fn kernel(&self) -> Result<RateKernel> {
        DiffusionConfig { kernel: self.kernel, vocab: self.trials + 1, sigma_min: self.sigma_min, sigma_max: self.sigma_max }
            .rate_kernel()
    }

    pub fn noise(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::geometric(self.sigma_min, self.sigma_max)
    }
}

#[derive(Debug, Clone)]
pub struct BinomialResult {
    pub ground_truth: CurvePair,
    /// Monte Carlo estimate with the exact score.
    pub oracle_estimate: CurvePair,
    pub model_estimate: Option<CurvePair>,
    /// Hamming-metric W1 (total variation) between the marginals at the
    /// grid ends.
    pub true_w1: f64,
    pub manifest: Manifest,
}

/// Entropy and Wasserstein dynamics of the binomial toy: exact curves, the
/// oracle-score estimate and optionally a trained-network estimate.
pub fn run_binomial_experiment(cfg: &BinomialConfig) -> Result<BinomialResult> {
    let kernel = cfg.kernel()?;
    let noise = cfg.noise()?;
    if !(0.0..=1.0).contains(&cfg.p) {
        return Err(Error::config("binomial p must lie in [0, 1]"));
    }
    let p0 = binomial_pmf(cfg.trials, cfg.p);
    let chain = ExactChain::single(kernel, noise, &p0)?;
    let grid = time_grid(cfg.n_tau)?;
    let ground_truth = CurvePair::new(EntropyCurve::exact(&chain, &grid)?)?;

    let mut manifest = Manifest::new("binomial", cfg.seed, serde_json::to_value(cfg)?);
    let est_seed = stage_seed(cfg.seed, "estimate");
    manifest.derived_seeds.insert("estimate".into(), est_seed);
    let oracle = OracleScore::single(kernel, noise, &p0)?;
    let source = DataSource::Token(&p0);
    let oracle_estimate = CurvePair::new(sweep_curves(&oracle, &noise, source, cfg.n_samples, cfg.n_tau, est_seed)?)?;

    let model_estimate = match &cfg.network {
        None => None,
        Some(net) => {
            let data_seed = stage_seed(cfg.seed, "dataset");
            manifest.derived_seeds.insert("dataset".into(), data_seed);
            manifest.derived_seeds.insert("init".into(), stage_seed(cfg.seed, "init"));
            manifest.derived_seeds.insert("train".into(), stage_seed(cfg.seed, "train"));
            let dataset: Vec<Vec<usize>> =
                super::sample_distribution(&p0, net.train_size, data_seed).into_iter().map(|t| vec![t]).collect();
            let (model, _) = train_network(kernel, noise, &dataset, net, cfg.seed)?;
            Some(CurvePair::new(sweep_curves(&model, &noise, source, cfg.n_samples, cfg.n_tau, est_seed)?)?)
        }
    };

    let true_w1 = crate::experiments::total_variation(&chain.marginal(grid[0])?, &chain.marginal(1.0)?)?;
    Ok(BinomialResult { ground_truth, oracle_estimate, model_estimate, true_w1, manifest })
}

impl BinomialResult {
    pub fn write_to(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = self.manifest.clone();
        manifest.write_file(dir, "ground_truth.csv", &self.ground_truth.to_csv()?)?;
        manifest.write_file(dir, "oracle_estimate.csv", &self.oracle_estimate.to_csv()?)?;
        if let Some(m) = &self.model_estimate {
            manifest.write_file(dir, "model_estimate.csv", &m.to_csv()?)?;
        }
        let summary = serde_json::json!({
            "true_w1": self.true_w1,
            "ground_truth_w_total": self.ground_truth.wasserstein.total(),
            "ground_truth_h_na_total": self.ground_truth.entropy.total(),
            "oracle_estimate_h_na_total": self.oracle_estimate.entropy.total(),
            "model_estimate_h_na_total": self.model_estimate.as_ref().map(|m| m.entropy.total()),
        });
        manifest.write_file(dir, "summary.json", &io::to_json_pretty(&summary)?)?;
        manifest.save(dir)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountdownConfig {
    pub length: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub network: NetworkConfig,
    pub n_samples: usize,
    pub n_tau: usize,
    pub k_list: Vec<usize>,
    pub strategies: Vec<Strategy>,
    /// Sequences generated per (K, strategy) cell.
    pub eval_count: usize,
    pub seed: u64,
}

impl Default for CountdownConfig {
    fn default() -> Self {
        CountdownConfig {
            length: 32,
            sigma_min: 1e-3,
            sigma_max: 100.0,
            network: NetworkConfig::default(),
            n_samples: 1024,
            n_tau: 1024,
            k_list: vec![4, 8, 16, 1024],
            strategies: Strategy::ALL.to_vec(),
            eval_count: 1024,
            seed: 0,
        }
    }
}

impl CountdownConfig {
    pub fn kernel(&self) -> Result<RateKernel> {
        RateKernel::absorbing(CountdownSpec::VOCAB)
    }

    pub fn noise(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::geometric(self.sigma_min, self.sigma_max)
    }

    pub fn dataset(&self) -> Result<Vec<Vec<usize>>> {
        let spec = CountdownSpec::new(self.length)?;
        Ok(gen_countdown(&spec, self.network.train_size, stage_seed(self.seed, "dataset")))
    }
}

#[derive(Debug, Clone)]
pub struct CountdownResult {
    pub reports: Vec<MetricReport>,
    pub curves: CurvePair,
    pub schedules: Vec<TimeSchedule>,
    /// Samples of each cell, in report order.
    pub samples: Vec<Vec<Vec<usize>>>,
    pub train_losses: Vec<f64>,
    pub model: MlpScore,
    pub manifest: Manifest,
}

/// Train (unless `model` is given), estimate curves, build schedules and
/// evaluate the rule-violation rate of every (K, strategy) cell.
pub fn run_countdown_experiment(cfg: &CountdownConfig, model: Option<MlpScore>) -> Result<CountdownResult> {
    if cfg.k_list.is_empty() || cfg.strategies.is_empty() {
        return Err(Error::config("countdown experiment needs at least one K and one strategy"));
    }
    let kernel = cfg.kernel()?;
    let noise = cfg.noise()?;
    let mut manifest = Manifest::new("countdown", cfg.seed, serde_json::to_value(cfg)?);
    for stage in ["dataset", "init", "train", "estimate"] {
        manifest.derived_seeds.insert(stage.into(), stage_seed(cfg.seed, stage));
    }
    let dataset = cfg.dataset()?;
    let (model, train_losses) = match model {
        Some(m) => {
            if m.kernel() != kernel || m.noise() != noise {
                return Err(Error::config("supplied network was trained for a different kernel or noise"));
            }
            (m, Vec::new())
        }
        None => {
            let (m, report) = train_network(kernel, noise, &dataset, &cfg.network, cfg.seed)?;
            (m, report.losses)
        }
    };

    let entropy = sweep_curves(
        &model,
        &noise,
        DataSource::Sequences(&dataset),
        cfg.n_samples,
        cfg.n_tau,
        stage_seed(cfg.seed, "estimate"),
    )?;
    let curves = CurvePair::new(entropy)?;
    let diffusion = DiffusionConfig::new(kernel, noise);
    let curve_hash = io::sha256_hex(curves.to_csv()?.as_bytes());

    let mut reports = Vec::new();
    let mut schedules = Vec::new();
    let mut samples = Vec::new();
    for &k in &cfg.k_list {
        for &strategy in &cfg.strategies {
            let (schedule, fell_back) = build_schedule(strategy, k, &curves.entropy, &curves.wasserstein)?;
            if fell_back {
                log::warn!("{strategy} K={k}: degenerate progress, used the uniform schedule");
            }
            let sample_seed = stage_seed(cfg.seed, &format!("sample/{strategy}/{k}"));
            manifest.derived_seeds.insert(format!("sample/{strategy}/{k}"), sample_seed);
            let schedule = schedule.with_provenance(diffusion, Some(curve_hash.clone()), Some(sample_seed));
            let out = sample(&schedule, &model, &noise, cfg.eval_count, cfg.length, sample_seed)?;
            let per_seq = per_sequence_violation(&out.sequences, CountdownSpec::VOCAB);
            let mut report = MetricReport::from_samples(strategy.name(), k, "rule_violation", &per_seq);
            report.n = out.sequences.len();
            log::info!("{strategy} K={k}: violation {:.4} ± {:.4}", report.value, report.stderr);
            reports.push(report);
            schedules.push(schedule);
            samples.push(out.sequences);
        }
    }
    Ok(CountdownResult { reports, curves, schedules, samples, train_losses, model, manifest })
}

impl CountdownResult {
    pub fn write_to(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = self.manifest.clone();
        manifest.write_file(dir, "report.csv", &reports_to_csv(&self.reports))?;
        manifest.write_file(dir, "curves.csv", &self.curves.to_csv()?)?;
        for ((s, r), seqs) in self.schedules.iter().zip(&self.reports).zip(&self.samples) {
            manifest.write_file(dir, &format!("schedules/{}_K{}.json", r.strategy, r.k), &s.to_json()?)?;
            manifest.write_file(dir, &format!("samples/{}_K{}.txt", r.strategy, r.k), &samples_to_text(seqs))?;
        }
        if !self.train_losses.is_empty() {
            let mut csv = String::from("step,loss\n");
            for (i, l) in self.train_losses.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", io::fmt17(*l)));
            }
            manifest.write_file(dir, "train_loss.csv", &csv)?;
        }
        manifest.write_file(dir, "model.json", &self.model.to_json()?)?;
        manifest.save(dir)?;
        Ok(manifest)
    }
}

/// Per-cell outcome of the directional comparison against uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub strategy: String,
    pub k: usize,
    /// `uniform − strategy`, positive when the strategy is better.
    pub margin: f64,
    pub combined_stderr: f64,
}

impl Comparison {
    /// Better than uniform by more than two combined standard errors.
    pub fn significant(&self) -> bool {
        self.margin > 2.0 * self.combined_stderr
    }
}

/// Compare every non-uniform report with the uniform report at the same K.
pub fn compare_to_uniform(reports: &[MetricReport]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for r in reports.iter().filter(|r| r.strategy != "uniform") {
        if let Some(u) = reports.iter().find(|u| u.strategy == "uniform" && u.k == r.k && u.metric == r.metric) {
            out.push(Comparison {
                strategy: r.strategy.clone(),
                k: r.k,
                margin: u.value - r.value,
                combined_stderr: (u.stderr.powi(2) + r.stderr.powi(2)).sqrt(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, "train"), stage_seed(1, "init"));
        assert_eq!(stage_seed(1, "train"), stage_seed(1, "train"));
        assert_ne!(stage_seed(1, "train"), stage_seed(2, "train"));
    }

    #[test]
    fn comparison_logic() {
        let reports = vec![
            MetricReport { strategy: "uniform".into(), k: 4, metric: "m".into(), value: 0.5, stderr: 0.03, n: 10 },
            MetricReport { strategy: "eds".into(), k: 4, metric: "m".into(), value: 0.3, stderr: 0.04, n: 10 },
            MetricReport { strategy: "wds".into(), k: 4, metric: "m".into(), value: 0.45, stderr: 0.04, n: 10 },
        ];
        let c = compare_to_uniform(&reports);
        assert_eq!(c.len(), 2);
        assert!(c[0].significant());
        assert!(!c[1].significant());
        assert_close!(c[0].combined_stderr, 0.05, 1e-15);
    }

    #[test]
    fn small_binomial_run() {
        let cfg = BinomialConfig { n_samples: 32, n_tau: 9, seed: 3, ..BinomialConfig::default() };
        let r = run_binomial_experiment(&cfg).unwrap();
        assert_eq!(r.ground_truth.entropy.len(), 9);
        assert!(r.ground_truth.wasserstein.total() >= r.true_w1);
        let dir = tempfile::tempdir().unwrap();
        let m = r.write_to(dir.path()).unwrap();
        assert!(m.files.contains_key("ground_truth.csv"));
        assert!(dir.path().join("manifest.json").exists());
    }
}
