//! Toy-scale experimental designs: estimator comparison tables, CUBO β-sweeps,
//! surrogate ablations, and replicate studies of bias and variance.
//!
//! Each parallel task draws from its own stream derived from the master seed
//! and the task's indices, and results are collected in task order, so
//! outputs do not depend on the number of worker threads.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{values, Direction, Estimator, Population};
use crate::models::{
    bayes_model_from_joint, exact_logprob, fit_arm, fit_tabular, logprob_given_order,
    logprob_given_single_order, perturb_model, sample_from_mixture, CondModel, GroundTruthJoint,
    JointKind, MaskPlan,
};
use crate::rng::{derive_seed, stream, Rng};
use crate::seqspace::{BlockRef, Regime, SeqSpace, Sequence, SingleOrder};
use crate::{Error, Result};

/// Where the evaluated model comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    /// Count-based fit on the training corpus.
    Fit,
    /// Exact conditionals of the ground-truth joint.
    Bayes,
    /// Exact conditionals mixed with random vectors.
    Perturbed { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub space: SeqSpace,
    pub ground_truth: JointKind,
    pub concentration: f64,
    pub model_source: ModelSource,
    pub alpha: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Samples of the evaluated model used to fine-tune the ARM surrogate; 0 disables it.
    pub finetune_size: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(space: SeqSpace, model_source: ModelSource, seed: u64) -> Self {
        ExperimentConfig {
            space,
            ground_truth: JointKind::RandomJoint,
            concentration: 1.0,
            model_source,
            alpha: 1.0,
            train_size: 4096,
            test_size: 256,
            finetune_size: 4096,
            seed,
        }
    }

    /// The high-variance instance: `V = 4`, `L = L' = 6`, perturbed with `ε = 0.5`.
    pub fn stress(seed: u64) -> Self {
        let space = SeqSpace::single_block(4, 6).expect("valid space");
        Self::new(space, ModelSource::Perturbed { epsilon: 0.5 }, seed)
    }
}

/// Everything a study needs: the joint, corpora, the evaluated model and the ARM baselines.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub space: SeqSpace,
    pub joint: GroundTruthJoint,
    pub train: Vec<Sequence>,
    pub test: Vec<Sequence>,
    pub model: CondModel,
    pub arm: CondModel,
    pub arm_finetuned: Option<CondModel>,
}

/// Masks every subset for small blocks and samples masks beyond that.
pub fn default_mask_plan(space: &SeqSpace, seed: u64) -> MaskPlan {
    let n = space.block_size();
    if n <= 10 {
        MaskPlan::All
    } else {
        MaskPlan::Sampled { per_example: 4 * n, seed }
    }
}

impl Workbench {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let space = cfg.space;
        let joint = GroundTruthJoint::random(space, cfg.ground_truth, cfg.concentration, &mut stream(cfg.seed, &[1]))?;
        let train = joint.sample_corpus(&mut stream(cfg.seed, &[2]), cfg.train_size);
        let test = joint.sample_corpus(&mut stream(cfg.seed, &[3]), cfg.test_size);
        let model = match cfg.model_source {
            ModelSource::Fit => {
                fit_tabular(space, &train, default_mask_plan(&space, derive_seed(cfg.seed, &[4])), cfg.alpha)?
            }
            ModelSource::Bayes => bayes_model_from_joint(&joint)?,
            ModelSource::Perturbed { epsilon } => {
                perturb_model(&bayes_model_from_joint(&joint)?, epsilon, &mut stream(cfg.seed, &[4]))?
            }
        };
        let arm = fit_arm(space, &train, cfg.alpha)?;
        let arm_finetuned = finetune_arm(&model, &arm, cfg.finetune_size, cfg.alpha, derive_seed(cfg.seed, &[5]))?;
        Ok(Workbench { space, joint, train, test, model, arm, arm_finetuned })
    }
}

/// Refits `arm` on `count` any-order samples of `model`; `None` for `count = 0`.
pub fn finetune_arm(model: &CondModel, arm: &CondModel, count: usize, alpha: f64, seed: u64) -> Result<Option<CondModel>> {
    if count == 0 {
        return Ok(None);
    }
    let mut rng = crate::rng::seeded(seed);
    let samples = (0..count)
        .map(|_| sample_from_mixture(model, &mut rng, Regime::AnyOrder))
        .collect::<Result<Vec<_>>>()?;
    crate::estimators::finetune_surrogate_arm(arm, &samples, alpha).map(Some)
}

/// `exp(−nats / tokens)`: upper bounds on log-likelihood become lower bounds on PPL.
pub fn perplexity(nats: f64, tokens: usize) -> Result<f64> {
    if tokens == 0 {
        return Err(Error::Config("perplexity needs at least one token".into()));
    }
    Ok((-nats / tokens as f64).exp())
}

/// Formats with 12 significant digits, plain decimal where practical.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exponent) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" { "0".into() } else { s }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}

/// Bank sizes used per block size: 24 / 64 / 128 for `L' = 4 / 8 / 16`, `8 L'` otherwise.
pub fn default_bank_size(block_size: usize) -> usize {
    match block_size {
        4 => 24,
        8 => 64,
        16 => 128,
        n => (8 * n).max(8),
    }
}

/// NFE ∈ {1, 2, 4, …, L'} followed by the any-order regime.
pub fn default_regimes(block_size: usize) -> Vec<Regime> {
    let mut steps: Vec<usize> = std::iter::successors(Some(1usize), |s| s.checked_mul(2))
        .take_while(|&s| s < block_size)
        .collect();
    steps.push(block_size);
    let mut regimes: Vec<Regime> = steps.into_iter().map(|steps| Regime::Masked { steps }).collect();
    regimes.push(Regime::AnyOrder);
    regimes
}

/// Hyperparameters shared by every estimator in a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub beta: f64,
    pub lambda: usize,
    pub pairs: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings { beta: 2.0, lambda: 200, pairs: 2 }
    }
}

impl EstimatorSettings {
    fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) || self.lambda == 0 || self.pairs < 2 {
            return Err(Error::Config(format!("need β ≥ 1, Λ ≥ 1 and n_p ≥ 2; got {self:?}")));
        }
        Ok(())
    }

    /// Checks a bank budget supports every estimator: TUBE's halves and IS-VG-B's `s ≥ 1`.
    pub fn check_budget(&self, k: usize) -> Result<()> {
        if k < 2 * self.pairs {
            return Err(Error::Config(format!("bank of {k} cannot feed {} IS-VG-B pairs", self.pairs)));
        }
        Ok(())
    }
}

/// Columns of the sampled estimators, in table order.
pub const SAMPLED_ESTIMATORS: [Estimator; 6] = [
    Estimator::Elbo,
    Estimator::ElboK,
    Estimator::Tube,
    Estimator::Cubo,
    Estimator::TvoUpper,
    Estimator::IsVgb,
];

/// All six sampled estimators on one bank of `K` log-likelihoods: ELBO on the
/// first draw, ELBO_K / CUBO / TVO_U on the full bank, TUBE with `p̂` from the
/// first half and `ψ_M` from the disjoint second half, IS-VG-B on `n_p` pairs
/// of contiguous `s = K / (2 n_p)` slices.
pub fn estimate_all(logliks: &[f64], settings: &EstimatorSettings) -> Result<[f64; 6]> {
    let k = logliks.len();
    settings.check_budget(k)?;
    let half = k / 2;
    let log_psi = values::elbo_k(&logliks[half..]);
    if !log_psi.is_finite() {
        return Err(Error::NonPositiveSurrogate(log_psi));
    }
    let s = k / (2 * settings.pairs);
    let isvgb = values::isvgb(
        (0..settings.pairs).map(|j| (&logliks[2 * j * s..(2 * j + 1) * s], &logliks[(2 * j + 1) * s..(2 * j + 2) * s])),
    )
    .ok_or_else(|| Error::InvalidEstimate("an IS-VG-B X bank has zero probability".into()))?;
    let tvo = values::tvo_upper(logliks, settings.lambda)
        .ok_or_else(|| Error::InvalidEstimate("TVO needs a finite log-likelihood".into()))?;
    Ok([
        logliks[0],
        values::elbo_k(logliks),
        values::tube(&logliks[..half], log_psi),
        values::cubo(logliks, settings.beta),
        tvo,
        isvgb,
    ])
}

fn arm_logprob(arm: &CondModel, x: &Sequence) -> Result<f64> {
    let identity = SingleOrder::identity(arm.space().block_size());
    crate::models::logprob_block(arm, x, |block| logprob_given_single_order(arm, block, &identity))
}

/// Exact block-model log-likelihood, or `None` when the subset DP is over its cap.
fn exact_or_none(model: &CondModel, x: &Sequence, regime: Regime) -> Result<Option<f64>> {
    match crate::models::exact_logprob_sequence(model, x, regime) {
        Ok(v) => Ok(Some(v)),
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub regimes: Option<Vec<Regime>>,
    pub bank_size: Option<usize>,
    pub reseeds: usize,
    pub settings: EstimatorSettings,
    pub seed: u64,
}

impl ComparisonConfig {
    pub fn new(seed: u64) -> Self {
        ComparisonConfig { regimes: None, bank_size: None, reseeds: 10, settings: EstimatorSettings::default(), seed }
    }
}

/// One cell of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub l_prime: usize,
    pub regime: String,
    pub estimator: String,
    pub mean_ppl: f64,
    pub std_ppl: f64,
    pub mean_nats: f64,
    /// An upper-bound estimator whose PPL exceeds the row's ELBO_K PPL.
    pub violation: bool,
    /// `|PPL − ARM PPL|`.
    pub gap: f64,
    /// The value is exact rather than a Monte Carlo estimate.
    pub exact: bool,
    pub bank_size: usize,
}

#[derive(Serialize)]
struct TableCsvRow<'a> {
    l_prime: usize,
    regime: &'a str,
    estimator: &'a str,
    mean_ppl: String,
    std_ppl: String,
    mean_nats: String,
    violation: bool,
    gap: String,
    exact: bool,
    bank_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub rows: Vec<TableRow>,
    pub reseeds: usize,
    pub test_size: usize,
}

impl EstimateTable {
    pub fn row(&self, regime: &str, estimator: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.regime == regime && r.estimator == estimator)
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<TableCsvRow<'_>> = self
            .rows
            .iter()
            .map(|r| TableCsvRow {
                l_prime: r.l_prime,
                regime: &r.regime,
                estimator: &r.estimator,
                mean_ppl: format_sig(r.mean_ppl),
                std_ppl: format_sig(r.std_ppl),
                mean_nats: format_sig(r.mean_nats),
                violation: r.violation,
                gap: format_sig(r.gap),
                exact: r.exact,
                bank_size: r.bank_size,
            })
            .collect();
        to_csv(&rows)
    }
}

/// One regime's orderings for one reseed: a shuffled full enumeration when
/// the permutation space fits the budget, iid prior draws otherwise.
fn comparison_bank(regime: Regime, n: usize, budget: usize, pairs: usize, rng: &mut Rng) -> Result<(Vec<crate::seqspace::Order>, bool)> {
    let support = regime.support_size(n);
    let enumerate = regime == Regime::AnyOrder
        && regime.is_enumerable(n)
        && support.is_some_and(|s| s <= budget as u128 && s >= 2 * pairs as u128);
    if enumerate {
        let mut orders = regime.enumerate(n)?.orders().to_vec();
        orders.shuffle(rng);
        Ok((orders, true))
    } else {
        let orders = (0..budget).map(|_| regime.sample(rng, n)).collect();
        Ok((orders, support == Some(1)))
    }
}

/// Every estimator column per regime, mean ± std over reseeds of the
/// test-set per-token perplexity, plus exact and ARM reference rows.
pub fn run_comparison_table(bench: &Workbench, cfg: &ComparisonConfig) -> Result<EstimateTable> {
    cfg.settings.validate()?;
    if cfg.reseeds < 2 {
        return Err(Error::Config("at least two reseeds are needed for a std".into()));
    }
    if bench.test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let space = bench.space;
    let n = space.block_size();
    let tokens = space.length();
    let budget = cfg.bank_size.unwrap_or_else(|| default_bank_size(n));
    cfg.settings.check_budget(budget)?;
    let regimes = cfg.regimes.clone().unwrap_or_else(|| default_regimes(n));
    let count = bench.test.len() as f64;

    let arm_nats = bench.test.iter().map(|x| arm_logprob(&bench.arm, x)).sum::<Result<f64>>()? / count;
    let arm_ppl = perplexity(arm_nats, tokens)?;

    let mut rows = Vec::new();
    for (ri, &regime) in regimes.iter().enumerate() {
        let per_reseed: Vec<([f64; 6], usize, bool)> = (0..cfg.reseeds)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(cfg.seed, &[ri as u64, r as u64]);
                let (orders, exact_bank) = comparison_bank(regime, n, budget, cfg.settings.pairs, &mut rng)?;
                let mut totals = [0.0; 6];
                let mut logliks = vec![0.0; orders.len()];
                for x in &bench.test {
                    for block in x.blocks(&space) {
                        for (l, order) in logliks.iter_mut().zip(&orders) {
                            *l = logprob_given_order(&bench.model, block, order)?;
                        }
                        let values = estimate_all(&logliks, &cfg.settings)?;
                        for (t, v) in totals.iter_mut().zip(values) {
                            *t += v;
                        }
                    }
                }
                Ok((totals.map(|t| t / count), orders.len(), exact_bank))
            })
            .collect::<Result<_>>()?;
        let bank_size = per_reseed[0].1;
        let exact_bank = per_reseed[0].2;

        let exact_nats = bench
            .test
            .iter()
            .map(|x| exact_or_none(&bench.model, x, regime))
            .collect::<Result<Option<Vec<f64>>>>()?
            .map(|v| v.iter().sum::<f64>() / count);

        let mut regime_rows = Vec::new();
        for (e, estimator) in SAMPLED_ESTIMATORS.iter().enumerate() {
            let nats: Vec<f64> = per_reseed.iter().map(|(v, _, _)| v[e]).collect();
            let ppls = nats.iter().map(|&v| perplexity(v, tokens)).collect::<Result<Vec<_>>>()?;
            let (mean_ppl, std_ppl) = mean_std(&ppls);
            regime_rows.push(TableRow {
                l_prime: n,
                regime: regime.to_string(),
                estimator: estimator.name().into(),
                mean_ppl,
                std_ppl,
                mean_nats: mean_std(&nats).0,
                violation: false,
                gap: (mean_ppl - arm_ppl).abs(),
                exact: *estimator == Estimator::ElboK && exact_bank,
                bank_size,
            });
        }
        if let Some(nats) = exact_nats {
            let ppl = perplexity(nats, tokens)?;
            regime_rows.push(TableRow {
                l_prime: n,
                regime: regime.to_string(),
                estimator: Estimator::Exact.name().into(),
                mean_ppl: ppl,
                std_ppl: 0.0,
                mean_nats: nats,
                violation: false,
                gap: (ppl - arm_ppl).abs(),
                exact: true,
                bank_size: 0,
            });
        }
        let reference = regime_rows[1].mean_ppl;
        for row in regime_rows.iter_mut() {
            let upper = SAMPLED_ESTIMATORS
                .iter()
                .any(|e| e.name() == row.estimator && e.direction() == Direction::Upper);
            row.violation = upper && row.mean_ppl > reference * (1.0 + 1e-12);
        }
        rows.extend(regime_rows);
    }
    rows.push(TableRow {
        l_prime: n,
        regime: "arm".into(),
        estimator: "ARM".into(),
        mean_ppl: arm_ppl,
        std_ppl: 0.0,
        mean_nats: arm_nats,
        violation: false,
        gap: 0.0,
        exact: true,
        bank_size: 0,
    });
    Ok(EstimateTable { rows, reseeds: cfg.reseeds, test_size: bench.test.len() })
}

/// Largest enumerated support cached per (sequence, block).
pub const MAX_CACHED_SUPPORT: usize = 40_320;
/// Largest total number of cached log-likelihoods.
pub const MAX_CACHED_ENTRIES: usize = 50_000_000;

/// `log p(x | π)` for every ordering in the enumerated support of `regime`,
/// per (sequence, block). Every supported prior is uniform on its support, so
/// an iid prior draw is a uniform index.
#[derive(Debug, Clone)]
pub struct EnumeratedLogliks {
    blocks_per_sequence: usize,
    logliks: Vec<Vec<f64>>,
}

impl EnumeratedLogliks {
    pub fn new(model: &CondModel, sequences: &[Sequence], regime: Regime) -> Result<Self> {
        let space = model.space();
        let n = space.block_size();
        let support = regime
            .support_size(n)
            .filter(|&s| s <= MAX_CACHED_SUPPORT as u128 && regime.is_enumerable(n))
            .ok_or_else(|| Error::CapExceeded {
                what: format!("cached ordering support of {regime} over {n} positions"),
                cap: MAX_CACHED_SUPPORT as u128,
            })? as usize;
        let blocks_per_sequence = space.num_blocks();
        if support.saturating_mul(blocks_per_sequence).saturating_mul(sequences.len()) > MAX_CACHED_ENTRIES {
            return Err(Error::CapExceeded { what: "cached log-likelihoods".into(), cap: MAX_CACHED_ENTRIES as u128 });
        }
        let bank = regime.enumerate(n)?;
        let first = bank.weights()[0];
        if bank.weights().iter().any(|w| (w - first).abs() > 1e-15) {
            return Err(Error::Invariant("enumerated prior is not uniform".into()));
        }
        let logliks = sequences
            .par_iter()
            .map(|x| {
                x.blocks(space)
                    .into_iter()
                    .map(|block| bank.orders().iter().map(|o| logprob_given_order(model, block, o)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(EnumeratedLogliks { blocks_per_sequence, logliks })
    }

    pub fn blocks_per_sequence(&self) -> usize {
        self.blocks_per_sequence
    }

    pub fn num_sequences(&self) -> usize {
        self.logliks.len() / self.blocks_per_sequence
    }

    /// All log-likelihoods of block `b` of sequence `i`.
    pub fn block(&self, i: usize, b: usize) -> &[f64] {
        &self.logliks[i * self.blocks_per_sequence + b]
    }

    /// Fills `out` with iid uniform draws from block `b` of sequence `i`.
    pub fn draw(&self, i: usize, b: usize, rng: &mut Rng, out: &mut [f64]) {
        let all = self.block(i, b);
        for slot in out {
            *slot = all[rng.random_range(0..all.len())];
        }
    }

    /// Exact block log-likelihood from the cached support.
    pub fn exact(&self, i: usize, b: usize) -> f64 {
        values::elbo_k(self.block(i, b))
    }
}

const CHUNK: usize = 1024;

/// Runs `replicates` draws in fixed-size chunks, each with its own derived stream.
fn replicate_chunks<T: Send>(
    replicates: usize,
    seed: u64,
    salt: &[u64],
    f: impl Fn(&mut Rng, usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let chunks = replicates.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut path = salt.to_vec();
            path.push(c as u64);
            let mut rng = stream(seed, &path);
            f(&mut rng, CHUNK.min(replicates - c * CHUNK))
        })
        .collect()
}

/// Replicate statistics of an estimator against its population value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub estimator: Estimator,
    pub k: usize,
    pub replicates: usize,
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub population: f64,
    /// `(mean − population) / standard_error`; 0 when both deviations vanish.
    pub z: f64,
    pub theoretical_variance: Option<f64>,
    pub variance_rel_error: Option<f64>,
}

impl ReplicateStats {
    fn from_values(estimator: Estimator, k: usize, values: &[f64], population: f64, theoretical: Option<f64>) -> Self {
        let (mean, std) = mean_std(values);
        let variance = std * std;
        let replicates = values.len();
        let standard_error = (variance / replicates as f64).sqrt();
        let deviation = mean - population;
        let z = if standard_error > 0.0 {
            deviation / standard_error
        } else if deviation.abs() <= 1e-12 * (1.0 + population.abs()) {
            0.0
        } else {
            deviation.signum() * f64::INFINITY
        };
        let variance_rel_error = theoretical.map(|t| {
            if t > 0.0 {
                (variance - t).abs() / t
            } else if variance == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        });
        ReplicateStats {
            estimator,
            k,
            replicates,
            mean,
            variance,
            standard_error,
            population,
            z,
            theoretical_variance: theoretical,
            variance_rel_error,
        }
    }
}

#[derive(Serialize)]
struct StatsCsvRow {
    estimator: Estimator,
    k: usize,
    replicates: usize,
    mean: String,
    variance: String,
    standard_error: String,
    population: String,
    z: String,
    theoretical_variance: String,
    variance_rel_error: String,
}

pub fn replicate_stats_csv(stats: &[ReplicateStats]) -> Result<String> {
    let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
    let rows: Vec<StatsCsvRow> = stats
        .iter()
        .map(|s| StatsCsvRow {
            estimator: s.estimator,
            k: s.k,
            replicates: s.replicates,
            mean: format_sig(s.mean),
            variance: format_sig(s.variance),
            standard_error: format_sig(s.standard_error),
            population: format_sig(s.population),
            z: format_sig(s.z),
            theoretical_variance: opt(s.theoretical_variance),
            variance_rel_error: opt(s.variance_rel_error),
        })
        .collect();
    to_csv(&rows)
}

/// TUBE with a fixed surrogate `ψ` on one block: for each `K`, `replicates`
/// independent K-sample estimates compared with the population TUBE and with
/// `Var_π[p(x | π)] / (K ψ²)`.
pub fn unbiasedness_variance_study(
    model: &CondModel,
    block: BlockRef<'_>,
    regime: Regime,
    log_psi: f64,
    ks: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<ReplicateStats>> {
    if replicates < 2 || ks.contains(&0) {
        return Err(Error::Config("need K ≥ 1 and at least two replicates".into()));
    }
    if !log_psi.is_finite() {
        return Err(Error::NonPositiveSurrogate(log_psi));
    }
    let population = Population::enumerate(model, block, regime)?;
    let support = population.logliks();
    let target = population.tube(log_psi);
    ks.iter()
        .enumerate()
        .map(|(ki, &k)| {
            let chunks = replicate_chunks(replicates, seed, &[ki as u64], |rng, count| {
                let mut bank = vec![0.0; k];
                Ok((0..count)
                    .map(|_| {
                        for slot in bank.iter_mut() {
                            *slot = support[rng.random_range(0..support.len())];
                        }
                        values::tube(&bank, log_psi)
                    })
                    .collect::<Vec<f64>>())
            })?;
            let values: Vec<f64> = chunks.concat();
            let theory = population.tube_variance(log_psi, k);
            Ok(ReplicateStats::from_values(Estimator::Tube, k, &values, target, Some(theory)))
        })
        .collect()
}

/// Replicate means of every estimator at a fixed budget, aggregated over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRecord {
    pub estimator: Estimator,
    pub k: usize,
    pub replicates: usize,
    /// Replicate mean of the test-set average, in nats per sequence.
    pub mean_nats: f64,
    pub standard_error: f64,
    pub exact_nats: f64,
    pub z: f64,
    /// The replicate mean lies below the exact value.
    pub below_exact: bool,
    /// Sequences whose own replicate mean is more than 4 standard errors below their exact value.
    pub sequences_below: usize,
}

#[derive(Serialize)]
struct BiasCsvRow {
    estimator: Estimator,
    k: usize,
    replicates: usize,
    mean_nats: String,
    standard_error: String,
    exact_nats: String,
    z: String,
    below_exact: bool,
    sequences_below: usize,
}

pub fn bias_csv(records: &[BiasRecord]) -> Result<String> {
    let rows: Vec<BiasCsvRow> = records
        .iter()
        .map(|r| BiasCsvRow {
            estimator: r.estimator,
            k: r.k,
            replicates: r.replicates,
            mean_nats: format_sig(r.mean_nats),
            standard_error: format_sig(r.standard_error),
            exact_nats: format_sig(r.exact_nats),
            z: format_sig(r.z),
            below_exact: r.below_exact,
            sequences_below: r.sequences_below,
        })
        .collect();
    to_csv(&rows)
}

/// Bias of every estimator at budget `k` over `sequences`, by replication.
pub fn bias_study(
    model: &CondModel,
    sequences: &[Sequence],
    regime: Regime,
    k: usize,
    settings: &EstimatorSettings,
    replicates: usize,
    seed: u64,
) -> Result<Vec<BiasRecord>> {
    settings.validate()?;
    settings.check_budget(k)?;
    if replicates < 2 || sequences.is_empty() {
        return Err(Error::Config("need sequences and at least two replicates".into()));
    }
    let cache = EnumeratedLogliks::new(model, sequences, regime)?;
    let num = sequences.len();
    let blocks = cache.blocks_per_sequence();
    let exact: Vec<f64> = (0..num).map(|i| (0..blocks).map(|b| cache.exact(i, b)).sum()).collect();
    // per chunk: aggregate values per replicate, and per-sequence sums / sums of squares
    type Chunk = (Vec<[f64; 6]>, Vec<[f64; 6]>, Vec<[f64; 6]>);
    let chunks: Vec<Chunk> = replicate_chunks(replicates, seed, &[], |rng, count| {
        let mut aggregate = Vec::with_capacity(count);
        let mut sums = vec![[0.0; 6]; num];
        let mut squares = vec![[0.0; 6]; num];
        let mut bank = vec![0.0; k];
        for _ in 0..count {
            let mut total = [0.0; 6];
            for i in 0..num {
                let mut seq = [0.0; 6];
                for b in 0..blocks {
                    cache.draw(i, b, rng, &mut bank);
                    let v = estimate_all(&bank, settings)?;
                    for e in 0..6 {
                        seq[e] += v[e];
                    }
                }
                for e in 0..6 {
                    total[e] += seq[e];
                    sums[i][e] += seq[e];
                    squares[i][e] += seq[e] * seq[e];
                }
            }
            aggregate.push(total.map(|t| t / num as f64));
        }
        Ok((aggregate, sums, squares))
    })?;
    let exact_mean = exact.iter().sum::<f64>() / num as f64;
    let r = replicates as f64;
    SAMPLED_ESTIMATORS
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let values: Vec<f64> = chunks.iter().flat_map(|c| c.0.iter().map(|v| v[e])).collect();
            let stats = ReplicateStats::from_values(estimator, k, &values, exact_mean, None);
            let sequences_below = (0..num)
                .filter(|&i| {
                    let s: f64 = chunks.iter().map(|c| c.1[i][e]).sum();
                    let q: f64 = chunks.iter().map(|c| c.2[i][e]).sum();
                    let mean = s / r;
                    let var = ((q - s * mean) / (r - 1.0)).max(0.0);
                    mean < exact[i] - 4.0 * (var / r).sqrt()
                })
                .count();
            Ok(BiasRecord {
                estimator,
                k,
                replicates,
                mean_nats: stats.mean,
                standard_error: stats.standard_error,
                exact_nats: exact_mean,
                z: stats.z,
                below_exact: stats.mean < exact_mean,
                sequences_below,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    /// Defaults to powers of two below `L'!` followed by `L'!`.
    pub bank_sizes: Option<Vec<usize>>,
    pub replicates: usize,
    /// Uses the first `sequences` test sequences; all when `None`.
    pub sequences: Option<usize>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(seed: u64) -> Self {
        SweepConfig { betas: vec![1.0, 1.5, 2.0, 3.0, 5.0], bank_sizes: None, replicates: 100, sequences: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub bank_size: usize,
    /// Replicate mean of the test-set average CUBO, in nats per sequence.
    pub mean: f64,
    pub mean_ppl: f64,
    pub exact: f64,
    /// The mean lies below the exact log-likelihood, breaking the nominal upper bound.
    pub violation: bool,
}

#[derive(Serialize)]
struct SweepCsvRow {
    beta: String,
    bank_size: usize,
    mean: String,
    violation: bool,
    mean_ppl: String,
    exact: String,
}

pub fn sweep_csv(records: &[SweepRecord]) -> Result<String> {
    let rows: Vec<SweepCsvRow> = records
        .iter()
        .map(|r| SweepCsvRow {
            beta: format_sig(r.beta),
            bank_size: r.bank_size,
            mean: format_sig(r.mean),
            violation: r.violation,
            mean_ppl: format_sig(r.mean_ppl),
            exact: format_sig(r.exact),
        })
        .collect();
    to_csv(&rows)
}

fn test_subset(bench: &Workbench, limit: Option<usize>) -> Result<&[Sequence]> {
    let count = limit.unwrap_or(bench.test.len()).min(bench.test.len());
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(&bench.test[..count])
}

/// Relative slack used when flagging a mean below the exact value.
const VIOLATION_TOL: f64 = 1e-10;

/// CUBO over a β × bank-size grid for the any-order regime. Banks are drawn
/// without replacement from the enumerated permutations, so the full-size
/// bank is the whole support; every β in a replicate shares one draw.
pub fn cubo_sweep(bench: &Workbench, cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if cfg.betas.iter().any(|b| !(*b >= 1.0)) || cfg.replicates == 0 {
        return Err(Error::Config("β grid must be ≥ 1 and replicates positive".into()));
    }
    let sequences = test_subset(bench, cfg.sequences)?;
    let cache = EnumeratedLogliks::new(&bench.model, sequences, Regime::AnyOrder)?;
    let support = cache.block(0, 0).len();
    let sizes = cfg.bank_sizes.clone().unwrap_or_else(|| {
        let mut s: Vec<usize> = std::iter::successors(Some(1usize), |s| Some(s * 2)).take_while(|&s| s < support).collect();
        s.push(support);
        s
    });
    if sizes.iter().any(|&k| k == 0 || k > support) {
        return Err(Error::Config(format!("bank sizes must lie in 1..={support}")));
    }
    let num = sequences.len();
    let blocks = cache.blocks_per_sequence();
    let exact = (0..num).map(|i| (0..blocks).map(|b| cache.exact(i, b)).sum::<f64>()).sum::<f64>() / num as f64;
    let tokens = bench.space.length();
    let mut records = Vec::new();
    for (si, &k) in sizes.iter().enumerate() {
        let per_replicate: Vec<Vec<f64>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(cfg.seed, &[si as u64, r as u64]);
                let mut index: Vec<usize> = (0..support).collect();
                let mut bank = vec![0.0; k];
                let mut totals = vec![0.0; cfg.betas.len()];
                for i in 0..num {
                    for b in 0..blocks {
                        let all = cache.block(i, b);
                        let (chosen, _) = index.partial_shuffle(&mut rng, k);
                        for (slot, &j) in bank.iter_mut().zip(chosen.iter()) {
                            *slot = all[j];
                        }
                        for (t, &beta) in totals.iter_mut().zip(&cfg.betas) {
                            *t += values::cubo(&bank, beta);
                        }
                    }
                }
                totals.iter().map(|t| t / num as f64).collect()
            })
            .collect();
        for (bi, &beta) in cfg.betas.iter().enumerate() {
            let values: Vec<f64> = per_replicate.iter().map(|v| v[bi]).collect();
            let mean = mean_std(&values).0;
            records.push(SweepRecord {
                beta,
                bank_size: k,
                mean,
                mean_ppl: perplexity(mean, tokens)?,
                exact,
                violation: mean < exact - VIOLATION_TOL * (1.0 + exact.abs()),
            });
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    /// Self-surrogate sizes; defaults to powers of two up to the estimation bank size.
    pub m_grid: Option<Vec<usize>>,
    /// Estimation bank size `K`; defaults to half the block size's default bank.
    pub bank_size: Option<usize>,
    pub replicates: usize,
    pub regime: Regime,
    pub sequences: Option<usize>,
    pub seed: u64,
}

impl AblationConfig {
    pub fn new(seed: u64) -> Self {
        AblationConfig { m_grid: None, bank_size: None, replicates: 10, regime: Regime::AnyOrder, sequences: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub surrogate: String,
    pub m: Option<usize>,
    pub k: usize,
    pub mean_ppl: f64,
    pub std_ppl: f64,
    pub mean_nats: f64,
    /// Replicate mean of `TUBE − exact` in nats per sequence.
    pub mean_gap: f64,
}

#[derive(Serialize)]
struct AblationCsvRow<'a> {
    surrogate: &'a str,
    m: Option<usize>,
    k: usize,
    mean_ppl: String,
    std_ppl: String,
    mean_nats: String,
    mean_gap: String,
}

pub fn ablation_csv(records: &[AblationRecord]) -> Result<String> {
    let rows: Vec<AblationCsvRow<'_>> = records
        .iter()
        .map(|r| AblationCsvRow {
            surrogate: &r.surrogate,
            m: r.m,
            k: r.k,
            mean_ppl: format_sig(r.mean_ppl),
            std_ppl: format_sig(r.std_ppl),
            mean_nats: format_sig(r.mean_nats),
            mean_gap: format_sig(r.mean_gap),
        })
        .collect();
    to_csv(&rows)
}

/// TUBE under each surrogate on a shared estimation bank: `ψ_π`, `ψ_M` on
/// nested prefixes of one independent surrogate bank, `ψ_ARM`, `ψ_ARM-FT`
/// and the exact likelihood as an oracle surrogate.
pub fn surrogate_ablation(bench: &Workbench, cfg: &AblationConfig) -> Result<Vec<AblationRecord>> {
    if cfg.replicates < 2 {
        return Err(Error::Config("at least two replicates are needed".into()));
    }
    let n = bench.space.block_size();
    let k = cfg.bank_size.unwrap_or_else(|| default_bank_size(n) / 2);
    let grid = cfg.m_grid.clone().unwrap_or_else(|| {
        std::iter::successors(Some(1usize), |m| Some(m * 2)).take_while(|&m| m <= k).collect()
    });
    if k == 0 || grid.is_empty() || grid.contains(&0) {
        return Err(Error::Config("bank size and M grid must be positive".into()));
    }
    let max_m = *grid.iter().max().expect("nonempty grid");
    let sequences = test_subset(bench, cfg.sequences)?;
    let cache = EnumeratedLogliks::new(&bench.model, sequences, cfg.regime)?;
    let num = sequences.len();
    let blocks = cache.blocks_per_sequence();
    let space = bench.space;

    // fixed surrogates per (sequence, block): ARM, fine-tuned ARM, oracle
    let identity = SingleOrder::identity(n);
    let mut fixed_labels = vec!["psi_ARM".to_string()];
    if bench.arm_finetuned.is_some() {
        fixed_labels.push("psi_ARM_FT".into());
    }
    fixed_labels.push("oracle".into());
    let mut fixed: Vec<Vec<f64>> = Vec::with_capacity(num * blocks);
    for x in sequences {
        for (b, block) in x.blocks(&space).into_iter().enumerate() {
            let i = fixed.len() / blocks;
            let mut row = vec![logprob_given_single_order(&bench.arm, block, &identity)?];
            if let Some(ft) = &bench.arm_finetuned {
                row.push(logprob_given_single_order(ft, block, &identity)?);
            }
            row.push(exact_logprob(&bench.model, block, cfg.regime).unwrap_or_else(|_| cache.exact(i, b)));
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonPositiveSurrogate(f64::NEG_INFINITY));
            }
            fixed.push(row);
        }
    }

    let labels: Vec<(String, Option<usize>)> = std::iter::once(("psi_pi".to_string(), Some(1)))
        .chain(grid.iter().map(|&m| (format!("psi_M{m}"), Some(m))))
        .chain(fixed_labels.iter().map(|l| (l.clone(), None)))
        .collect();

    let per_replicate: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, &[r as u64]);
            let mut est = vec![0.0; k];
            let mut sur = vec![0.0; max_m];
            let mut totals = vec![0.0; labels.len()];
            for i in 0..num {
                for b in 0..blocks {
                    cache.draw(i, b, &mut rng, &mut est);
                    cache.draw(i, b, &mut rng, &mut sur);
                    let log_mean = values::elbo_k(&est);
                    let mut psis = Vec::with_capacity(labels.len());
                    psis.push(sur[0]);
                    psis.extend(grid.iter().map(|&m| values::elbo_k(&sur[..m])));
                    psis.extend(fixed[i * blocks + b].iter().copied());
                    for (t, log_psi) in totals.iter_mut().zip(psis) {
                        if !log_psi.is_finite() {
                            return Err(Error::NonPositiveSurrogate(log_psi));
                        }
                        *t += values::tube_from_mean(log_mean, log_psi);
                    }
                }
            }
            Ok(totals.iter().map(|t| t / num as f64).collect())
        })
        .collect::<Result<_>>()?;

    let exact = (0..num).map(|i| (0..blocks).map(|b| cache.exact(i, b)).sum::<f64>()).sum::<f64>() / num as f64;
    let tokens = space.length();
    labels
        .iter()
        .enumerate()
        .map(|(j, (label, m))| {
            let nats: Vec<f64> = per_replicate.iter().map(|v| v[j]).collect();
            let ppls = nats.iter().map(|&v| perplexity(v, tokens)).collect::<Result<Vec<_>>>()?;
            let (mean_ppl, std_ppl) = mean_std(&ppls);
            let mean_nats = mean_std(&nats).0;
            Ok(AblationRecord {
                surrogate: label.clone(),
                m: *m,
                k,
                mean_ppl,
                std_ppl,
                mean_nats,
                mean_gap: nats.iter().map(|v| v - exact).sum::<f64>() / nats.len() as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;
    use approx::assert_abs_diff_eq;

    fn small_bench(source: ModelSource, seed: u64) -> Workbench {
        let space = SeqSpace::single_block(3, 4).unwrap();
        let mut cfg = ExperimentConfig::new(space, source, seed);
        cfg.train_size = 2000;
        cfg.test_size = 24;
        cfg.finetune_size = 1000;
        Workbench::build(&cfg).unwrap()
    }

    #[test]
    fn perplexity_examples() {
        assert_eq!(perplexity(0.0, 3).unwrap(), 1.0);
        assert_abs_diff_eq!(perplexity(-5.0 * 7.0f64.ln(), 5).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(perplexity(0.125f64.ln(), 2).unwrap(), 2.8284, epsilon = 1e-4);
        assert!(perplexity(-1.0, 0).is_err());
        assert!(perplexity(-1.0, 2).unwrap() < perplexity(-2.0, 2).unwrap());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2.0), "2");
        assert_eq!(format_sig(-2.0794415416798357), "-2.07944154168");
        assert_eq!(format_sig(17.54), "17.54");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(1e-9), "1.00000000000e-9");
        assert_eq!(format_sig(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_bank_size(4), 24);
        assert_eq!(default_bank_size(8), 64);
        assert_eq!(default_bank_size(16), 128);
        let regimes = default_regimes(4);
        assert_eq!(regimes.iter().map(ToString::to_string).collect::<Vec<_>>(), ["mdm:1", "mdm:2", "mdm:4", "ao-arm"]);
        assert_eq!(default_regimes(6).len(), 5);
    }

    #[test]
    fn estimate_all_on_a_constant_bank() {
        let values = estimate_all(&[-3.25; 8], &EstimatorSettings::default()).unwrap();
        assert!(values.iter().all(|&v| v == -3.25));
        assert!(estimate_all(&[-1.0; 3], &EstimatorSettings::default()).is_err());
    }

    #[test]
    fn nfe_one_rows_coincide() {
        let bench = small_bench(ModelSource::Perturbed { epsilon: 0.5 }, 3);
        let mut cfg = ComparisonConfig::new(11);
        cfg.reseeds = 3;
        let table = run_comparison_table(&bench, &cfg).unwrap();
        let nfe1: Vec<&TableRow> = table.rows.iter().filter(|r| r.regime == "mdm:1").collect();
        assert_eq!(nfe1.len(), 7);
        assert!(nfe1.iter().all(|r| r.mean_ppl.to_bits() == nfe1[0].mean_ppl.to_bits()));
        assert!(nfe1.iter().all(|r| !r.violation));
        assert!(table.row("mdm:1", "ELBO_K").unwrap().exact);
        let ao = table.row("ao-arm", "ELBO_K").unwrap();
        assert!(ao.exact && ao.bank_size == 24);
        assert_abs_diff_eq!(ao.mean_nats, table.row("ao-arm", "exact").unwrap().mean_nats, epsilon = 1e-10);
        assert!(table.row("arm", "ARM").is_some());
        let csv = table.to_csv().unwrap();
        assert!(csv.starts_with("l_prime,regime,estimator,mean_ppl,std_ppl,mean_nats,violation,gap,exact,bank_size\n"));
    }

    #[test]
    fn bayes_model_collapses_every_estimator() {
        let bench = small_bench(ModelSource::Bayes, 5);
        let mut cfg = ComparisonConfig::new(2);
        cfg.reseeds = 2;
        cfg.regimes = Some(vec![Regime::AnyOrder]);
        let table = run_comparison_table(&bench, &cfg).unwrap();
        let exact = table.row("ao-arm", "exact").unwrap().mean_nats;
        for name in ["ELBO", "ELBO_K", "TUBE"] {
            assert_abs_diff_eq!(table.row("ao-arm", name).unwrap().mean_nats, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn comparison_is_reproducible() {
        let bench = small_bench(ModelSource::Fit, 8);
        let mut cfg = ComparisonConfig::new(4);
        cfg.reseeds = 2;
        let a = run_comparison_table(&bench, &cfg).unwrap().to_csv().unwrap();
        let b = run_comparison_table(&bench, &cfg).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn toy_a_variance_reference() {
        let m = toy::toy_a();
        let stats = unbiasedness_variance_study(&m, BlockRef::first(&[toy::A, toy::B]), Regime::AnyOrder, 0.125f64.ln(), &[1, 4], 20_000, 9).unwrap();
        assert_abs_diff_eq!(stats[0].theoretical_variance.unwrap(), 0.04, epsilon = 1e-12);
        for s in &stats {
            assert!(s.z.abs() < 5.0, "{s:?}");
            assert!(s.variance_rel_error.unwrap() < 0.05, "{s:?}");
        }
        let bayes = crate::models::bayes_model_from_joint(&toy::toy_a_joint()).unwrap();
        let flat = unbiasedness_variance_study(&bayes, BlockRef::first(&[toy::A, toy::B]), Regime::AnyOrder, 0.1f64.ln(), &[2], 100, 1).unwrap();
        assert!(flat[0].variance < 1e-25);
        let uniform = CondModel::uniform(*m.space()).unwrap();
        let constant = unbiasedness_variance_study(&uniform, BlockRef::first(&[toy::A, toy::B]), Regime::AnyOrder, 0.1f64.ln(), &[2], 100, 1).unwrap();
        assert_eq!(constant[0].variance, 0.0);
        assert_eq!(constant[0].variance_rel_error, Some(0.0));
    }

    #[test]
    fn sweep_full_bank_at_beta_one_is_exact() {
        let bench = small_bench(ModelSource::Perturbed { epsilon: 0.5 }, 6);
        let mut cfg = SweepConfig::new(3);
        cfg.replicates = 20;
        let records = cubo_sweep(&bench, &cfg).unwrap();
        let cell = records.iter().find(|r| r.beta == 1.0 && r.bank_size == 24).unwrap();
        assert_abs_diff_eq!(cell.mean, cell.exact, epsilon = 1e-10);
        assert!(!cell.violation);
        assert!(records.iter().any(|r| r.violation));
        assert!(sweep_csv(&records).unwrap().starts_with("beta,bank_size,mean,violation"));
    }

    #[test]
    fn constant_likelihood_sweep_never_flags() {
        let bench = small_bench(ModelSource::Bayes, 6);
        let mut cfg = SweepConfig::new(3);
        cfg.replicates = 5;
        assert!(cubo_sweep(&bench, &cfg).unwrap().iter().all(|r| !r.violation));
    }

    #[test]
    fn ablation_records() {
        let bench = small_bench(ModelSource::Perturbed { epsilon: 0.5 }, 7);
        let mut cfg = AblationConfig::new(5);
        cfg.replicates = 8;
        let records = surrogate_ablation(&bench, &cfg).unwrap();
        let pi = records.iter().find(|r| r.surrogate == "psi_pi").unwrap();
        let m1 = records.iter().find(|r| r.surrogate == "psi_M1").unwrap();
        assert_eq!(pi.mean_nats.to_bits(), m1.mean_nats.to_bits());
        let oracle = records.iter().find(|r| r.surrogate == "oracle").unwrap();
        assert!(oracle.mean_gap.abs() < 0.05, "{oracle:?}");
        assert!(records.iter().any(|r| r.surrogate == "psi_ARM_FT"));
    }

    #[test]
    fn bias_study_shapes() {
        let bench = small_bench(ModelSource::Perturbed { epsilon: 0.5 }, 9);
        let records = bias_study(&bench.model, &bench.test[..4], Regime::AnyOrder, 4, &EstimatorSettings::default(), 2000, 1).unwrap();
        assert_eq!(records.len(), 6);
        let tube = records.iter().find(|r| r.estimator == Estimator::Tube).unwrap();
        assert!(tube.mean_nats > tube.exact_nats - 4.0 * tube.standard_error);
        let elbo = records.iter().find(|r| r.estimator == Estimator::Elbo).unwrap();
        assert!(elbo.below_exact);
    }
}
