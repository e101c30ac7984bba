use std::path::{Path, PathBuf};

use serde_json::json;
use thermosched_core::ctmc::{DiffusionConfig, Distribution, KernelKind};
use thermosched_core::experiments::{
    binomial_pmf, gen_countdown, hellinger, per_sequence_violation, reports_to_csv, run_binomial_experiment,
    run_countdown_experiment, sample_distribution, stage_seed, total_variation, train_network, BinomialConfig,
    CountdownConfig, CountdownSpec, Manifest, MetricReport, NetworkConfig,
};
use thermosched_core::io::{fmt17, sha256_file, sha256_hex, to_json_pretty};
use thermosched_core::rng::{self, domain};
use thermosched_core::sampler::{sample, samples_from_text, samples_to_text, SampleMeta};
use thermosched_core::scheduler::{build_schedule, uniform_schedule, Strategy, TimeSchedule};
use thermosched_core::score::{MlpScore, OracleScore, ScoreModel};
use thermosched_core::thermo::{
    curves_from_csv, curves_to_csv, sweep_curves, time_grid, wasserstein_bound, DataSource, EntropyCurve, ExactChain,
    WassersteinCurve, WassersteinMode,
};
use thermosched_core::{Error, Result};

use crate::{Cli, Command, DiffusionArgs, EvalTask, Experiment, RunConfig};

pub const OUT_DIR_ENV: &str = "THERMOSCHED_OUT_DIR";

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Entry point for a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Estimate { diffusion, score, n, grid, seed, out, mode, exact } => {
            let args = EstimateArgs {
                setup: Setup::resolve(&diffusion, &cfg)?,
                score: score.or(cfg.score.clone()).unwrap_or_else(|| "oracle".into()),
                n: n.or(cfg.n).unwrap_or(1024),
                grid: grid.or(cfg.grid).unwrap_or(1024),
                seed: require_seed(seed.or(cfg.seed), "estimate")?,
                out: out_path(out, &cfg, "estimate"),
                mode: parse_mode(mode.or(cfg.mode.clone()))?,
                exact,
                data_size: cfg.network.as_ref().map_or(NetworkConfig::default().train_size, |n| n.train_size),
            };
            cmd_estimate(&args)
        }
        Command::Schedule { diffusion, strategy, k, curves, seed, out } => {
            let strategy: Strategy = strategy
                .or(cfg.strategy.clone())
                .ok_or_else(|| Error::Config("--strategy is required".into()))?
                .parse()?;
            let k = k.or(cfg.k).ok_or_else(|| Error::Config("-K is required".into()))?;
            let out = out.or(cfg.out.clone()).unwrap_or_else(|| out_root().join(format!("schedule_{strategy}_K{k}.json")));
            let explicit = diffusion.kernel.is_some() || diffusion.data.is_some() || cfg.kernel.is_some() || cfg.data.is_some();
            let setup = if explicit { Some(Setup::resolve(&diffusion, &cfg)?) } else { None };
            cmd_schedule(strategy, k, curves.or(cfg.curves.clone()).as_deref(), setup, seed.or(cfg.seed), &out)
        }
        Command::Sample { diffusion, sched, score, count, seed, out } => {
            let sched = sched.or(cfg.sched.clone()).ok_or_else(|| Error::Config("--sched is required".into()))?;
            let args = SampleArgs {
                diffusion,
                sched,
                score: score.or(cfg.score.clone()).unwrap_or_else(|| "oracle".into()),
                count: count.or(cfg.count).unwrap_or(1024),
                seed: seed.or(cfg.seed),
                out: out.or(cfg.out.clone()).unwrap_or_else(|| out_root().join("samples.txt")),
            };
            cmd_sample(&args, &cfg)
        }
        Command::Eval { task, samples, target, trials, p, out } => {
            let samples = samples.or(cfg.samples.clone()).ok_or_else(|| Error::Config("--samples is required".into()))?;
            let target = target.or(cfg.target.clone());
            let trials = trials.or(cfg.trials).unwrap_or(BinomialConfig::default().trials);
            let p = p.or(cfg.p).unwrap_or(BinomialConfig::default().p);
            cmd_eval(task, &samples, target.as_deref(), trials, p, out.as_deref())
        }
        Command::Reproduce { experiment, seed, out, steps, model, n, grid, k_list, eval_count } => {
            let seed = require_seed(seed.or(cfg.seed), "reproduce")?;
            let name = match experiment {
                Experiment::Binomial => "binomial",
                Experiment::Countdown => "countdown",
            };
            let out = out_path(out, &cfg, name);
            let mut network = cfg.network.clone().unwrap_or_default();
            if let Some(s) = steps {
                network.steps = s;
            }
            let n = n.or(cfg.n);
            let grid = grid.or(cfg.grid);
            match experiment {
                Experiment::Binomial => reproduce_binomial(&cfg, seed, network, n, grid, &out),
                Experiment::Countdown => {
                    let mut c = CountdownConfig { seed, network, ..CountdownConfig::default() };
                    if let Some(v) = n {
                        c.n_samples = v;
                    }
                    if let Some(v) = grid {
                        c.n_tau = v;
                    }
                    if let Some(v) = k_list.or(cfg.k_list.clone()) {
                        c.k_list = v;
                    }
                    if let Some(v) = eval_count.or(cfg.eval_count) {
                        c.eval_count = v;
                    }
                    if let Some(v) = &cfg.strategies {
                        c.strategies = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
                    }
                    if let Some(v) = cfg.length {
                        c.length = v;
                    }
                    if let Some(v) = cfg.sigma_min {
                        c.sigma_min = v;
                    }
                    if let Some(v) = cfg.sigma_max {
                        c.sigma_max = v;
                    }
                    reproduce_countdown(&c, model.or(cfg.model.clone()).as_deref(), &out)
                }
            }
        }
        Command::Train { diffusion, steps, seed, out } => {
            let setup = Setup::resolve(&diffusion, &cfg)?;
            let seed = require_seed(seed.or(cfg.seed), "train")?;
            let mut network = cfg.network.clone().unwrap_or_default();
            if let Some(s) = steps {
                network.steps = s;
            }
            let out = out.or(cfg.out.clone()).unwrap_or_else(|| out_root().join("model.json"));
            cmd_train(&setup, &network, seed, &out)
        }
    }
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn out_path(flag: Option<PathBuf>, cfg: &RunConfig, default_name: &str) -> PathBuf {
    flag.or(cfg.out.clone()).unwrap_or_else(|| out_root().join(default_name))
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| {
        Error::Config(format!("a seed is required\n\nUsage: thermosched {command} --seed <SEED> [OPTIONS]"))
    })
}

fn parse_mode(mode: Option<String>) -> Result<WassersteinMode> {
    mode.map_or(Ok(WassersteinMode::ActivityNonadiabatic), |m| m.parse())
}

fn write_with_parent(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataKind {
    Binomial,
    Countdown,
}

/// Dataset and diffusion after merging flags, config file and defaults.
#[derive(Debug, Clone, Copy)]
struct Setup {
    data: DataKind,
    diffusion: DiffusionConfig,
    trials: usize,
    p: f64,
    length: usize,
}

impl Setup {
    fn resolve(args: &DiffusionArgs, cfg: &RunConfig) -> Result<Self> {
        let data = match args.data.as_deref().or(cfg.data.as_deref()).unwrap_or("binomial") {
            "binomial" => DataKind::Binomial,
            "countdown" => DataKind::Countdown,
            other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
        };
        let kernel: Option<KernelKind> = args.kernel.as_deref().or(cfg.kernel.as_deref()).map(str::parse).transpose()?;
        let trials = args.trials.or(cfg.trials).unwrap_or(BinomialConfig::default().trials);
        let p = args.p.or(cfg.p).unwrap_or(BinomialConfig::default().p);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config("--p must lie in [0, 1]".into()));
        }
        let (defaults, vocab, length) = match data {
            DataKind::Binomial => {
                let b = BinomialConfig::default();
                ((KernelKind::Uniform, b.sigma_min, b.sigma_max), trials + 1, args.length.or(cfg.length).unwrap_or(1))
            }
            DataKind::Countdown => {
                let c = CountdownConfig::default();
                (
                    (KernelKind::Absorbing, c.sigma_min, c.sigma_max),
                    CountdownSpec::VOCAB,
                    args.length.or(cfg.length).unwrap_or(c.length),
                )
            }
        };
        if data == DataKind::Binomial && length != 1 {
            return Err(Error::Config("binomial data has length 1".into()));
        }
        let diffusion = DiffusionConfig {
            kernel: kernel.unwrap_or(defaults.0),
            vocab,
            sigma_min: args.sigma_min.or(cfg.sigma_min).unwrap_or(defaults.1),
            sigma_max: args.sigma_max.or(cfg.sigma_max).unwrap_or(defaults.2),
        };
        diffusion.build()?;
        Ok(Setup { data, diffusion, trials, p, length })
    }

    fn pmf(&self) -> Distribution {
        binomial_pmf(self.trials, self.p)
    }

    fn dataset(&self, size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        Ok(match self.data {
            DataKind::Binomial => {
                sample_distribution(&self.pmf(), size, stage_seed(seed, "dataset")).into_iter().map(|t| vec![t]).collect()
            }
            DataKind::Countdown => gen_countdown(&CountdownSpec::new(self.length)?, size, stage_seed(seed, "dataset")),
        })
    }

    fn data_json(&self) -> serde_json::Value {
        match self.data {
            DataKind::Binomial => json!({ "kind": "binomial", "trials": self.trials, "p": self.p }),
            DataKind::Countdown => json!({ "kind": "countdown", "length": self.length }),
        }
    }
}

enum LoadedScore {
    Oracle(OracleScore),
    Network(MlpScore),
}

impl LoadedScore {
    fn as_model(&self) -> &dyn ScoreModel {
        match self {
            LoadedScore::Oracle(o) => o,
            LoadedScore::Network(m) => m,
        }
    }
}

/// `oracle` builds the exact score of the binomial data; anything else is
/// a parameter file whose diffusion must agree with `setup`.
fn load_score(spec: &str, setup: &Setup) -> Result<(LoadedScore, serde_json::Value)> {
    if spec == "oracle" {
        if setup.data != DataKind::Binomial {
            return Err(Error::Config("the oracle score is only available for binomial data".into()));
        }
        if setup.diffusion.vocab != setup.trials + 1 {
            return Err(Error::Config(format!(
                "kernel vocabulary {} does not fit {} binomial trials",
                setup.diffusion.vocab, setup.trials
            )));
        }
        let (kernel, noise) = setup.diffusion.build()?;
        let oracle = OracleScore::single(kernel, noise, &setup.pmf())?;
        return Ok((LoadedScore::Oracle(oracle), json!("oracle")));
    }
    let path = Path::new(spec);
    let model = MlpScore::load(path)?;
    if model.diffusion() != setup.diffusion {
        return Err(Error::Config(format!(
            "network {} was trained for {:?}, not {:?}",
            path.display(),
            model.diffusion(),
            setup.diffusion
        )));
    }
    let info = json!({ "path": spec, "sha256": sha256_file(path)? });
    Ok((LoadedScore::Network(model), info))
}

struct EstimateArgs {
    setup: Setup,
    score: String,
    n: usize,
    grid: usize,
    seed: u64,
    out: PathBuf,
    mode: WassersteinMode,
    exact: bool,
    data_size: usize,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let setup = &args.setup;
    let (kernel, noise) = setup.diffusion.build()?;
    let est_seed = stage_seed(args.seed, "estimate");
    let mut manifest = Manifest::new("estimate", args.seed, serde_json::Value::Null);

    let (entropy, score_info) = if args.exact {
        if setup.data != DataKind::Binomial {
            return Err(Error::Config("--exact needs binomial data".into()));
        }
        let chain = ExactChain::single(kernel, noise, &setup.pmf())?;
        (EntropyCurve::exact(&chain, &time_grid(args.grid)?)?, json!("exact"))
    } else {
        let (score, info) = load_score(&args.score, setup)?;
        manifest.derived_seeds.insert("estimate".into(), est_seed);
        let pmf;
        let dataset;
        let source = match setup.data {
            DataKind::Binomial => {
                pmf = setup.pmf();
                DataSource::Token(&pmf)
            }
            DataKind::Countdown => {
                manifest.derived_seeds.insert("dataset".into(), stage_seed(args.seed, "dataset"));
                dataset = setup.dataset(args.data_size, args.seed)?;
                DataSource::Sequences(&dataset)
            }
        };
        (sweep_curves(score.as_model(), &noise, source, args.n, args.grid, est_seed)?, info)
    };
    let wass = wasserstein_bound(&entropy, args.mode)?;
    manifest.parameters = json!({
        "data": setup.data_json(),
        "diffusion": setup.diffusion,
        "score": score_info,
        "n": args.n,
        "grid": args.grid,
        "mode": args.mode.name(),
    });
    std::fs::create_dir_all(&args.out)?;
    manifest.write_file(&args.out, "curves.csv", &curves_to_csv(&entropy, &wass)?)?;
    manifest.write_file(&args.out, "wasserstein.csv", &wasserstein_csv(&wass))?;
    manifest.save(&args.out)?;
    log::info!("h_na total {:.6}, W total {:.6}", entropy.total(), wass.total());
    println!("{}", args.out.display());
    Ok(())
}

fn wasserstein_csv(w: &WassersteinCurve) -> String {
    let mut out = String::from("t,w_rate,w_cum\n");
    for k in 0..w.t.len() {
        out.push_str(&format!("{},{},{}\n", fmt17(w.t[k]), fmt17(w.rate[k]), fmt17(w.cum[k])));
    }
    out
}

/// Manifest of the directory holding `curves`, if any.
fn sibling_manifest(curves: &Path) -> Result<Option<Manifest>> {
    let path = curves.parent().unwrap_or(Path::new(".")).join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = read_file(&path)?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn cmd_schedule(
    strategy: Strategy,
    k: usize,
    curves: Option<&Path>,
    setup: Option<Setup>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut diffusion = setup.map(|s| s.diffusion);
    let (schedule, curve_sha) = match (strategy, curves) {
        (Strategy::Uniform, None) => (uniform_schedule(k)?, None),
        (_, None) => return Err(Error::Config(format!("--curves is required for {strategy}"))),
        (_, Some(path)) => {
            let text = read_file(path)?;
            let sha = sha256_hex(text.as_bytes());
            if let Some(manifest) = sibling_manifest(path)? {
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if let Some(recorded) = manifest.files.get(name) {
                    if *recorded != sha {
                        return Err(Error::Config(format!(
                            "{} does not match the hash recorded in its manifest",
                            path.display()
                        )));
                    }
                }
                if let Some(d) = manifest.parameters.get("diffusion") {
                    let recorded: DiffusionConfig = serde_json::from_value(d.clone())
                        .map_err(|e| Error::Config(format!("manifest diffusion: {e}")))?;
                    if diffusion.is_some_and(|d| d != recorded) {
                        return Err(Error::Config("declared kernel differs from the curve manifest".into()));
                    }
                    diffusion = Some(recorded);
                }
            }
            let (entropy, wass) = curves_from_csv(&text)?;
            let (schedule, fell_back) = build_schedule(strategy, k, &entropy, &wass)?;
            if fell_back {
                eprintln!("warning: {strategy} progress is degenerate; wrote the uniform schedule");
            }
            (schedule, Some(sha))
        }
    };
    let mut schedule = schedule;
    schedule.kernel = diffusion;
    schedule.source_curve_sha256 = curve_sha;
    schedule.seed = seed;
    schedule.validate()?;
    write_with_parent(out, &schedule.to_json()?)?;
    println!("{}", out.display());
    Ok(())
}

struct SampleArgs {
    diffusion: DiffusionArgs,
    sched: PathBuf,
    score: String,
    count: usize,
    seed: Option<u64>,
    out: PathBuf,
}

fn cmd_sample(args: &SampleArgs, cfg: &RunConfig) -> Result<()> {
    let schedule = TimeSchedule::from_json(&read_file(&args.sched)?)?;
    schedule.validate()?;
    let seed = require_seed(args.seed.or(schedule.seed), "sample")?;

    let mut setup = Setup::resolve(&args.diffusion, cfg)?;
    let explicit = [&args.diffusion.kernel, &cfg.kernel].iter().any(|k| k.is_some())
        || [args.diffusion.sigma_min, args.diffusion.sigma_max, cfg.sigma_min, cfg.sigma_max].iter().any(|s| s.is_some());
    if let Some(declared) = schedule.kernel {
        if !explicit {
            setup.diffusion = declared;
        } else if declared != setup.diffusion {
            return Err(Error::Config(format!(
                "schedule declares {declared:?} but the command uses {:?}",
                setup.diffusion
            )));
        }
    }
    let (score, _) = load_score(&args.score, &setup)?;
    let noise = setup.diffusion.noise()?;
    let out = sample(&schedule, score.as_model(), &noise, args.count, setup.length, seed)?;
    let text = samples_to_text(&out.sequences);
    let meta = SampleMeta {
        version: 1,
        schedule_sha256: schedule.sha256()?,
        strategy: schedule.strategy.name().into(),
        k: schedule.k,
        nfe: out.nfe,
        seed,
        count: args.count,
        length: setup.length,
        forced_tokens: out.forced.iter().sum(),
        kernel: setup.diffusion,
        samples_sha256: sha256_hex(text.as_bytes()),
    };
    write_with_parent(&args.out, &text)?;
    std::fs::write(meta_path(&args.out), to_json_pretty(&meta)?)?;
    println!("{}", args.out.display());
    Ok(())
}

fn meta_path(samples: &Path) -> PathBuf {
    let mut name = samples.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn cmd_eval(task: EvalTask, samples: &Path, target: Option<&str>, trials: usize, p: f64, out: Option<&Path>) -> Result<()> {
    let seqs = samples_from_text(&read_file(samples)?)?;
    if seqs.is_empty() {
        return Err(Error::Config(format!("{} holds no samples", samples.display())));
    }
    let meta: Option<SampleMeta> = match std::fs::read_to_string(meta_path(samples)) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| Error::Config(format!("sample metadata: {e}")))?),
        Err(_) => None,
    };
    if let Some(m) = &meta {
        let sha = sha256_hex(read_file(samples)?.as_bytes());
        if sha != m.samples_sha256 {
            return Err(Error::Config("samples file does not match its metadata hash".into()));
        }
    }
    let (strategy, k) = meta.as_ref().map_or(("unknown".to_string(), 0), |m| (m.strategy.clone(), m.k));
    let report = match task {
        EvalTask::Countdown => {
            let vocab = CountdownSpec::VOCAB;
            if seqs.iter().flatten().any(|&t| t >= vocab) {
                return Err(Error::Config(format!("countdown tokens must be below {vocab}")));
            }
            MetricReport::from_samples(&strategy, k, "rule_violation", &per_sequence_violation(&seqs, vocab))
        }
        EvalTask::Tv | EvalTask::Hellinger => {
            match target {
                Some("binomial") | None => {}
                Some(other) => return Err(Error::Config(format!("unknown target {other:?}"))),
            }
            if seqs.iter().any(|s| s.len() != 1) {
                return Err(Error::Config("distribution metrics need single-token samples".into()));
            }
            let tokens: Vec<usize> = seqs.iter().map(|s| s[0]).collect();
            if tokens.iter().any(|&t| t > trials) {
                return Err(Error::Config(format!("token outside the binomial support 0..={trials}")));
            }
            let target = binomial_pmf(trials, p);
            let metric = |toks: &[usize]| -> Result<f64> {
                let emp = Distribution::empirical(toks.iter().copied(), trials + 1)?;
                match task {
                    EvalTask::Tv => total_variation(&emp, &target),
                    _ => hellinger(&emp, &target),
                }
            };
            let value = metric(&tokens)?;
            let stderr = bootstrap_stderr(&tokens, &metric)?;
            let name = if task == EvalTask::Tv { "tv" } else { "hellinger" };
            MetricReport { strategy, k, metric: name.into(), value, stderr, n: tokens.len() }
        }
    };
    let csv = reports_to_csv(&[report]);
    match out {
        Some(path) => write_with_parent(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Bootstrap standard error with a fixed resampling stream.
fn bootstrap_stderr(tokens: &[usize], metric: &dyn Fn(&[usize]) -> Result<f64>) -> Result<f64> {
    use rand::Rng as _;
    let mut rng = rng::stream(0, domain::EXPERIMENT, 0);
    let mut values = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![0; tokens.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for b in buf.iter_mut() {
            *b = tokens[rng.random_range(0..tokens.len())];
        }
        values.push(metric(&buf)?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(var.sqrt())
}

fn reproduce_binomial(
    cfg: &RunConfig,
    seed: u64,
    network: NetworkConfig,
    n: Option<usize>,
    grid: Option<usize>,
    out: &Path,
) -> Result<()> {
    let defaults = BinomialConfig::default();
    let base = BinomialConfig {
        trials: cfg.trials.unwrap_or(defaults.trials),
        p: cfg.p.unwrap_or(defaults.p),
        sigma_min: cfg.sigma_min.unwrap_or(defaults.sigma_min),
        sigma_max: cfg.sigma_max.unwrap_or(defaults.sigma_max),
        n_samples: n.unwrap_or(defaults.n_samples),
        n_tau: grid.unwrap_or(defaults.n_tau),
        seed,
        network: (network.steps > 0).then_some(network),
        ..defaults
    };
    let mut top = Manifest::new("binomial", seed, serde_json::to_value(&base)?);
    let mut summary = String::from("kernel,true_w1,w_total,h_na_total,oracle_h_na_total,model_h_na_total\n");
    for kind in [KernelKind::Uniform, KernelKind::Absorbing] {
        let name = if kind == KernelKind::Uniform { "uniform" } else { "absorbing" };
        let cfg = BinomialConfig { kernel: kind, ..base.clone() };
        let result = run_binomial_experiment(&cfg)?;
        let sub = out.join(name);
        let manifest = result.write_to(&sub)?;
        for (stage, s) in &manifest.derived_seeds {
            top.derived_seeds.insert(format!("{name}/{stage}"), *s);
        }
        for (file, sha) in &manifest.files {
            top.files.insert(format!("{name}/{file}"), sha.clone());
        }
        summary.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            fmt17(result.true_w1),
            fmt17(result.ground_truth.wasserstein.total()),
            fmt17(result.ground_truth.entropy.total()),
            fmt17(result.oracle_estimate.entropy.total()),
            result.model_estimate.as_ref().map_or(String::new(), |m| fmt17(m.entropy.total())),
        ));
    }
    top.write_file(out, "summary.csv", &summary)?;
    top.save(out)?;
    println!("{}", out.display());
    Ok(())
}

fn reproduce_countdown(cfg: &CountdownConfig, model: Option<&Path>, out: &Path) -> Result<()> {
    let model = model.map(MlpScore::load).transpose()?;
    let result = run_countdown_experiment(cfg, model)?;
    result.write_to(out)?;
    print!("{}", reports_to_csv(&result.reports));
    Ok(())
}

fn cmd_train(setup: &Setup, network: &NetworkConfig, seed: u64, out: &Path) -> Result<()> {
    let (kernel, noise) = setup.diffusion.build()?;
    let dataset = setup.dataset(network.train_size, seed)?;
    let (model, report) = train_network(kernel, noise, &dataset, network, seed)?;
    write_with_parent(out, &model.to_json()?)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in report.losses.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt17(*l)));
    }
    let mut loss_path = out.as_os_str().to_owned();
    loss_path.push(".loss.csv");
    std::fs::write(PathBuf::from(loss_path), csv)?;
    println!("{}", out.display());
    Ok(())
}
