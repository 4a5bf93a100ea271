//! The `tube` command line: configuration, persistence and result files.
//!
//! Every command reads one JSON configuration (`schema_version` required,
//! unknown keys rejected) and works inside one output directory:
//!
//! | file | written by |
//! |---|---|
//! | `joint.json`, `train.txt`, `test.txt` | `gen-data` |
//! | `model.json`, `arm.json`, `arm_ft.json` | `fit` |
//! | `table.csv` | `eval` |
//! | `sweep.csv` | `sweep` |
//! | `ablation.csv` | `ablate` |
//! | `propcheck.csv`, `bias.csv` | `propcheck` |
//! | `<command>.manifest.json` | every command |
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant violation, 1 anything else.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::estimators::Estimator;
use crate::experiments::{
    self, ablation_csv, bias_csv, replicate_stats_csv, sweep_csv, AblationConfig, ComparisonConfig,
    EstimatorSettings, ModelSource, SweepConfig, Workbench,
};
use crate::models::{
    bayes_model_from_joint, exact_logprob, fit_arm, fit_tabular, logprob_given_single_order,
    perturb_model, read_corpus, write_corpus, CondModel, GroundTruthJoint, JointKind,
};
use crate::rng::{derive_seed, stream};
use crate::seqspace::{Regime, SeqSpace, SingleOrder};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub space: SeqSpace,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub ablate: AblateSection,
    #[serde(default)]
    pub propcheck: PropcheckSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub ground_truth: JointKind,
    pub concentration: f64,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { ground_truth: JointKind::RandomJoint, concentration: 1.0, train_size: 4096, test_size: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub source: ModelSource,
    pub alpha: f64,
    pub finetune_size: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { source: ModelSource::Fit, alpha: 1.0, finetune_size: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub regimes: Option<Vec<Regime>>,
    pub bank_size: Option<usize>,
    pub reseeds: usize,
    pub beta: f64,
    pub lambda: usize,
    pub pairs: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let s = EstimatorSettings::default();
        EvalSection { regimes: None, bank_size: None, reseeds: 10, beta: s.beta, lambda: s.lambda, pairs: s.pairs }
    }
}

impl EvalSection {
    fn settings(&self) -> EstimatorSettings {
        EstimatorSettings { beta: self.beta, lambda: self.lambda, pairs: self.pairs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub betas: Vec<f64>,
    pub bank_sizes: Option<Vec<usize>>,
    pub replicates: usize,
    pub sequences: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::new(0);
        SweepSection { betas: d.betas, bank_sizes: None, replicates: d.replicates, sequences: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateSection {
    pub m_grid: Option<Vec<usize>>,
    pub bank_size: Option<usize>,
    pub replicates: usize,
    pub regime: Regime,
    pub sequences: Option<usize>,
}

impl Default for AblateSection {
    fn default() -> Self {
        AblateSection { m_grid: None, bank_size: None, replicates: 10, regime: Regime::AnyOrder, sequences: None }
    }
}

/// The fixed surrogate used by the unbiasedness study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropSurrogate {
    Arm,
    Exact,
    LogPsi(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropcheckSection {
    pub ks: Vec<usize>,
    pub replicates: usize,
    /// Index into the test set; the study uses its first block.
    pub sequence: usize,
    pub regime: Regime,
    pub surrogate: PropSurrogate,
    pub bias_k: usize,
    pub bias_replicates: usize,
    pub bias_sequences: Option<usize>,
}

impl Default for PropcheckSection {
    fn default() -> Self {
        PropcheckSection {
            ks: vec![1, 2, 4, 8],
            replicates: 100_000,
            sequence: 0,
            regime: Regime::AnyOrder,
            surrogate: PropSurrogate::Arm,
            bias_k: 4,
            bias_replicates: 10_000,
            bias_sequences: Some(16),
        }
    }
}

/// Parses and validates a configuration; any problem is a configuration error.
pub fn parse_config(text: &str) -> Result<Config> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(Error::Config(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"))),
        None => return Err(Error::Config("missing schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// SHA-256 of the configuration's canonical JSON (keys sorted), so the hash
/// does not depend on key order in the file.
pub fn config_hash(config: &Config) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(config)?)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub config: Config,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Parser)]
#[command(name = "tube", version, about = "Two-sided log-likelihood bounds for latent-ordering models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground-truth joint and train/test corpora.
    GenData(CommonArgs),
    /// Fit (or derive) the evaluated model and the ARM baselines.
    Fit(CommonArgs),
    /// Estimator comparison table.
    Eval(CommonArgs),
    /// CUBO β × bank-size sweep.
    Sweep(CommonArgs),
    /// TUBE surrogate ablation.
    Ablate(CommonArgs),
    /// Unbiasedness, variance and bias replicate studies.
    Propcheck(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Fit(_) => "fit",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Ablate(_) => "ablate",
            Command::Propcheck(_) => "propcheck",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::GenData(a) | Command::Fit(a) | Command::Eval(a) | Command::Sweep(a) | Command::Ablate(a) | Command::Propcheck(a) => a,
        }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 2,
        Error::Invariant(_) => 3,
        _ => 1,
    }
}

fn write(out: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<()> {
    fs::write(out.join(name), contents)?;
    outputs.push(name.to_string());
    Ok(())
}

fn read(out: &Path, name: &str) -> Result<String> {
    let path = out.join(name);
    fs::read_to_string(&path).map_err(|e| Error::Parse { path, message: format!("missing or unreadable input ({e}); run the earlier commands first") })
}

fn load_joint(out: &Path, config: &Config) -> Result<GroundTruthJoint> {
    let joint: GroundTruthJoint = serde_json::from_str(&read(out, "joint.json")?)?;
    if joint.space() != &config.space {
        return Err(Error::Config("joint.json was generated for a different space".into()));
    }
    Ok(joint)
}

fn load_model(out: &Path, name: &str, config: &Config) -> Result<CondModel> {
    let model = CondModel::from_json(&read(out, name)?)?;
    if model.space() != &config.space {
        return Err(Error::Config(format!("{name} was fitted for a different space")));
    }
    Ok(model)
}

/// Rebuilds the workbench from files written by `gen-data` and `fit`.
pub fn load_workbench(out: &Path, config: &Config) -> Result<Workbench> {
    let space = config.space;
    let arm_finetuned = if out.join("arm_ft.json").exists() { Some(load_model(out, "arm_ft.json", config)?) } else { None };
    Ok(Workbench {
        space,
        joint: load_joint(out, config)?,
        train: read_corpus(&space, &read(out, "train.txt")?)?,
        test: read_corpus(&space, &read(out, "test.txt")?)?,
        model: load_model(out, "model.json", config)?,
        arm: load_model(out, "arm.json", config)?,
        arm_finetuned,
    })
}

pub fn cmd_gen_data(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let d = &config.data;
    let joint = GroundTruthJoint::random(config.space, d.ground_truth, d.concentration, &mut stream(config.seed, &[1]))?;
    let train = joint.sample_corpus(&mut stream(config.seed, &[2]), d.train_size);
    let test = joint.sample_corpus(&mut stream(config.seed, &[3]), d.test_size);
    write(out, "joint.json", &serde_json::to_string(&joint)?, outputs)?;
    write(out, "train.txt", &write_corpus(&config.space, &train), outputs)?;
    write(out, "test.txt", &write_corpus(&config.space, &test), outputs)
}

pub fn cmd_fit(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let space = config.space;
    let train = read_corpus(&space, &read(out, "train.txt")?)?;
    let m = &config.model;
    let model = match m.source {
        ModelSource::Fit => {
            let plan = experiments::default_mask_plan(&space, derive_seed(config.seed, &[4]));
            fit_tabular(space, &train, plan, m.alpha)?
        }
        ModelSource::Bayes => bayes_model_from_joint(&load_joint(out, config)?)?,
        ModelSource::Perturbed { epsilon } => {
            let bayes = bayes_model_from_joint(&load_joint(out, config)?)?;
            perturb_model(&bayes, epsilon, &mut stream(config.seed, &[4]))?
        }
    };
    let arm = fit_arm(space, &train, m.alpha)?;
    let finetuned = experiments::finetune_arm(&model, &arm, m.finetune_size, m.alpha, derive_seed(config.seed, &[5]))?;
    write(out, "model.json", &model.to_json()?, outputs)?;
    write(out, "arm.json", &arm.to_json()?, outputs)?;
    match finetuned {
        Some(ft) => write(out, "arm_ft.json", &ft.to_json()?, outputs)?,
        None if out.join("arm_ft.json").exists() => fs::remove_file(out.join("arm_ft.json"))?,
        None => {}
    }
    Ok(())
}

pub fn cmd_eval(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let bench = load_workbench(out, config)?;
    let e = &config.eval;
    let cfg = ComparisonConfig {
        regimes: e.regimes.clone(),
        bank_size: e.bank_size,
        reseeds: e.reseeds,
        settings: e.settings(),
        seed: derive_seed(config.seed, &[10]),
    };
    let table = experiments::run_comparison_table(&bench, &cfg)?;
    let nfe1: Vec<_> = table.rows.iter().filter(|r| r.regime == "mdm:1" && r.estimator != "exact").collect();
    if let Some(first) = nfe1.first() {
        if let Some(bad) = nfe1.iter().find(|r| r.mean_nats.to_bits() != first.mean_nats.to_bits()) {
            return Err(Error::Invariant(format!("NFE=1 estimates disagree: {} vs {}", bad.estimator, first.estimator)));
        }
    }
    if let Some(bad) = table.rows.iter().find(|r| !r.mean_ppl.is_finite()) {
        return Err(Error::Invariant(format!("non-finite perplexity for {} / {}", bad.regime, bad.estimator)));
    }
    write(out, "table.csv", &table.to_csv()?, outputs)
}

pub fn cmd_sweep(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let bench = load_workbench(out, config)?;
    let s = &config.sweep;
    let cfg = SweepConfig {
        betas: s.betas.clone(),
        bank_sizes: s.bank_sizes.clone(),
        replicates: s.replicates,
        sequences: s.sequences,
        seed: derive_seed(config.seed, &[11]),
    };
    let records = experiments::cubo_sweep(&bench, &cfg)?;
    if let Some(bad) = records.iter().find(|r| !r.mean.is_finite()) {
        return Err(Error::Invariant(format!("non-finite CUBO at β = {}, K = {}", bad.beta, bad.bank_size)));
    }
    write(out, "sweep.csv", &sweep_csv(&records)?, outputs)
}

pub fn cmd_ablate(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let bench = load_workbench(out, config)?;
    let a = &config.ablate;
    let cfg = AblationConfig {
        m_grid: a.m_grid.clone(),
        bank_size: a.bank_size,
        replicates: a.replicates,
        regime: a.regime,
        sequences: a.sequences,
        seed: derive_seed(config.seed, &[12]),
    };
    let records = experiments::surrogate_ablation(&bench, &cfg)?;
    write(out, "ablation.csv", &ablation_csv(&records)?, outputs)
}

pub fn cmd_propcheck(config: &Config, out: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let bench = load_workbench(out, config)?;
    let p = &config.propcheck;
    let x = bench
        .test
        .get(p.sequence)
        .ok_or_else(|| Error::Config(format!("propcheck.sequence {} outside the test set", p.sequence)))?;
    let block = x.blocks(&bench.space)[0];
    let log_psi = match p.surrogate {
        PropSurrogate::Arm => {
            logprob_given_single_order(&bench.arm, block, &SingleOrder::identity(bench.space.block_size()))?
        }
        PropSurrogate::Exact => exact_logprob(&bench.model, block, p.regime)?,
        PropSurrogate::LogPsi(v) => v,
    };
    let stats = experiments::unbiasedness_variance_study(
        &bench.model,
        block,
        p.regime,
        log_psi,
        &p.ks,
        p.replicates,
        derive_seed(config.seed, &[13]),
    )?;
    write(out, "propcheck.csv", &replicate_stats_csv(&stats)?, outputs)?;

    let count = p.bias_sequences.unwrap_or(bench.test.len()).min(bench.test.len());
    let bias = experiments::bias_study(
        &bench.model,
        &bench.test[..count],
        p.regime,
        p.bias_k,
        &config.eval.settings(),
        p.bias_replicates,
        derive_seed(config.seed, &[14]),
    )?;
    if let Some(t) = bias.iter().find(|r| r.estimator == Estimator::Tube && r.z < -6.0) {
        return Err(Error::Invariant(format!("TUBE replicate mean fell {:.1} standard errors below exact", -t.z)));
    }
    write(out, "bias.csv", &bias_csv(&bias)?, outputs)
}

/// Runs one parsed command; returns the manifest path.
pub fn run(command: &Command) -> Result<PathBuf> {
    let args = command.args();
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.jobs == Some(0) {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    fs::create_dir_all(&args.out)?;
    let _lock = DirLock::acquire(&args.out)?;
    let started = now_ms();
    let work = || {
        let mut outputs = Vec::new();
        match command {
            Command::GenData(_) => cmd_gen_data(&config, &args.out, &mut outputs),
            Command::Fit(_) => cmd_fit(&config, &args.out, &mut outputs),
            Command::Eval(_) => cmd_eval(&config, &args.out, &mut outputs),
            Command::Sweep(_) => cmd_sweep(&config, &args.out, &mut outputs),
            Command::Ablate(_) => cmd_ablate(&config, &args.out, &mut outputs),
            Command::Propcheck(_) => cmd_propcheck(&config, &args.out, &mut outputs),
        }
        .map(|()| outputs)
    };
    let outputs = match args.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let manifest = RunManifest {
        command: command.name().into(),
        config_hash: config_hash(&config)?,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        outputs,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    };
    let path = args.out.join(format!("{}.manifest.json", command.name()));
    serde_json::to_writer_pretty(File::create(&path)?, &manifest)?;
    Ok(path)
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
