//! Likelihood bounds and their Monte Carlo estimators.
//!
//! Every estimator consumes per-ordering log-likelihoods
//! `ℓ_k = log p(x | π^{(k)})` and stays in log space until a final ratio.
//! The numeric kernels live in [`values`] and take plain slices so that
//! replicate studies can run them over cached banks; the bank-level
//! functions add bookkeeping (bound direction, parameters, independence
//! checks for self-surrogates).

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use crate::models::{
    exact_logprob, fit_with_prior, logprob_given_order, logprob_given_single_order, CondModel,
    LogLik, MaskPlan,
};
use crate::seqspace::{BlockRef, Order, Regime, Sequence, SingleOrder};
use crate::{Error, Result};

/// Slice kernels. Inputs are log-likelihoods; `-inf` entries are zero-probability draws.
pub mod values {
    use crate::logspace::{centered_mean, log_mean_exp, log_sum_exp};

    pub fn elbo_k(logliks: &[f64]) -> f64 {
        log_mean_exp(logliks)
    }

    /// `log ψ + (p̂ − ψ)/ψ` with the ratio taken as `expm1(log p̂ − log ψ)`.
    pub fn tube(logliks: &[f64], log_psi: f64) -> f64 {
        tube_from_mean(log_mean_exp(logliks), log_psi)
    }

    pub fn tube_from_mean(log_mean: f64, log_psi: f64) -> f64 {
        log_psi + (log_mean - log_psi).exp_m1()
    }

    fn finite_max(logliks: &[f64]) -> Option<f64> {
        logliks
            .iter()
            .copied()
            .filter(|l| l.is_finite())
            .fold(None, |m, l| Some(m.map_or(l, |m: f64| m.max(l))))
    }

    /// `(1/β) log((1/K) Σ exp(β ℓ_k))`; `β = 1` is exactly [`elbo_k`].
    pub fn cubo(logliks: &[f64], beta: f64) -> f64 {
        if beta == 1.0 {
            return elbo_k(logliks);
        }
        let Some(m) = finite_max(logliks) else {
            return log_mean_exp(logliks);
        };
        let scaled: Vec<f64> = logliks.iter().map(|l| beta * (l - m)).collect();
        m + log_mean_exp(&scaled) / beta
    }

    /// `(1/Λ) Σ_{λ=1..Λ} Σ_k w̄_k(λ/Λ) ℓ_k` with self-normalized weights
    /// `w̄_k(β) ∝ exp(β ℓ_k)`. `None` when every entry is `-inf`.
    pub fn tvo_upper(logliks: &[f64], lambda: usize) -> Option<f64> {
        let m = finite_max(logliks)?;
        let centered: Vec<f64> = logliks.iter().filter(|l| l.is_finite()).map(|l| l - m).collect();
        let mut weights = vec![0.0; centered.len()];
        let mut total = 0.0;
        for step in 1..=lambda {
            let beta = step as f64 / lambda as f64;
            for (w, c) in weights.iter_mut().zip(&centered) {
                *w = (beta * c).exp();
            }
            let norm: f64 = weights.iter().sum();
            total += weights.iter().zip(&centered).map(|(w, c)| w * c).sum::<f64>() / norm;
        }
        Some(m + total / lambda as f64)
    }

    /// `mean_j log mean(X_j) + log mean_j (Σ Y_j / Σ X_j)`. `None` when some
    /// X side is entirely `-inf`.
    pub fn isvgb<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Option<f64> {
        let mut elbos = Vec::new();
        let mut log_ratios = Vec::new();
        for (x, y) in pairs {
            let lx = log_sum_exp(x);
            if lx == f64::NEG_INFINITY {
                return None;
            }
            elbos.push(log_mean_exp(x));
            log_ratios.push(log_sum_exp(y) - lx);
        }
        Some(centered_mean(&elbos) + log_mean_exp(&log_ratios))
    }
}

/// Identifies the contiguous draws `[start, end)` of ordering stream `source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankTag {
    pub source: u64,
    pub start: usize,
    pub end: usize,
}

impl BankTag {
    pub fn overlaps(&self, other: &BankTag) -> bool {
        self.source == other.source && self.start < other.end && other.start < self.end
    }
}

static UNTRACKED: AtomicU64 = AtomicU64::new(0);

/// Log-likelihoods of one sequence scope under a list of sampled orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    logliks: Vec<f64>,
    tag: BankTag,
}

impl SampleBank {
    pub fn new(logliks: Vec<f64>, tag: BankTag) -> Result<Self> {
        if logliks.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidEstimate(format!("bank contains {logliks:?}")));
        }
        if tag.end.checked_sub(tag.start) != Some(logliks.len()) {
            return Err(Error::InvalidEstimate("bank tag does not match its length".into()));
        }
        Ok(SampleBank { logliks, tag })
    }

    /// A bank drawn from its own private stream: disjoint from every other bank.
    pub fn untracked(logliks: Vec<f64>) -> Result<Self> {
        let source = (1 << 63) | UNTRACKED.fetch_add(1, AtomicOrdering::Relaxed);
        let len = logliks.len();
        Self::new(logliks, BankTag { source, start: 0, end: len })
    }

    /// Scores `orders`, which are draws `[start, start + len)` of stream `source`.
    pub fn evaluate(
        model: &CondModel,
        block: BlockRef<'_>,
        orders: &[Order],
        source: u64,
        start: usize,
    ) -> Result<Self> {
        let logliks = orders
            .iter()
            .map(|o| logprob_given_order(model, block, o))
            .collect::<Result<Vec<_>>>()?;
        Self::new(logliks, BankTag { source, start, end: start + orders.len() })
    }

    pub fn logliks(&self) -> &[f64] {
        &self.logliks
    }

    pub fn tag(&self) -> BankTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.logliks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logliks.is_empty()
    }

    pub fn split_at(&self, k: usize) -> (SampleBank, SampleBank) {
        let k = k.min(self.len());
        let t = self.tag;
        (
            SampleBank { logliks: self.logliks[..k].to_vec(), tag: BankTag { end: t.start + k, ..t } },
            SampleBank { logliks: self.logliks[k..].to_vec(), tag: BankTag { start: t.start + k, ..t } },
        )
    }

    pub fn is_disjoint(&self, other: &SampleBank) -> bool {
        !self.tag.overlaps(&other.tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// `ψ_π`: one ordering.
    SingleOrder,
    /// `ψ_M`: mean over `m` independent orderings.
    SelfAverage { m: usize },
    /// `ψ_ARM`: an external left-to-right model.
    Arm,
    /// `ψ_ARM-FT`: the external ARM refit on samples of the evaluated model.
    ArmFinetuned,
    /// Any externally supplied positive value.
    Fixed,
}

impl SurrogateKind {
    pub fn label(&self) -> String {
        match self {
            SurrogateKind::SingleOrder => "psi_pi".into(),
            SurrogateKind::SelfAverage { m } => format!("psi_M{m}"),
            SurrogateKind::Arm => "psi_ARM".into(),
            SurrogateKind::ArmFinetuned => "psi_ARM_FT".into(),
            SurrogateKind::Fixed => "psi_fixed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    kind: SurrogateKind,
    log_psi: f64,
    source: Option<BankTag>,
}

impl Surrogate {
    pub fn new(kind: SurrogateKind, log_psi: f64, source: Option<BankTag>) -> Result<Self> {
        if !log_psi.is_finite() {
            return Err(Error::NonPositiveSurrogate(log_psi));
        }
        Ok(Surrogate { kind, log_psi, source })
    }

    pub fn fixed(log_psi: f64) -> Result<Self> {
        Self::new(SurrogateKind::Fixed, log_psi, None)
    }

    pub fn kind(&self) -> SurrogateKind {
        self.kind
    }

    pub fn log_psi(&self) -> f64 {
        self.log_psi
    }

    pub fn source(&self) -> Option<BankTag> {
        self.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "ELBO")]
    Elbo,
    #[serde(rename = "ELBO_K")]
    ElboK,
    #[serde(rename = "TUBE")]
    Tube,
    #[serde(rename = "CUBO")]
    Cubo,
    #[serde(rename = "TVO_U")]
    TvoUpper,
    #[serde(rename = "IS-VG-B")]
    IsVgb,
    #[serde(rename = "exact")]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
    Exact,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Elbo,
        Estimator::ElboK,
        Estimator::Tube,
        Estimator::Cubo,
        Estimator::TvoUpper,
        Estimator::IsVgb,
        Estimator::Exact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Elbo => "ELBO",
            Estimator::ElboK => "ELBO_K",
            Estimator::Tube => "TUBE",
            Estimator::Cubo => "CUBO",
            Estimator::TvoUpper => "TVO_U",
            Estimator::IsVgb => "IS-VG-B",
            Estimator::Exact => "exact",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Estimator::Elbo | Estimator::ElboK => Direction::Lower,
            Estimator::Tube | Estimator::Cubo | Estimator::TvoUpper | Estimator::IsVgb => Direction::Upper,
            Estimator::Exact => Direction::Exact,
        }
    }

    /// Whether the estimator's expectation provably keeps the bound direction
    /// at every finite sample size.
    pub fn bound_preserving(&self) -> bool {
        !matches!(self, Estimator::Cubo | Estimator::TvoUpper | Estimator::IsVgb)
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub k: usize,
    pub beta: Option<f64>,
    pub lambda: Option<usize>,
    pub s: Option<usize>,
    pub n_pairs: Option<usize>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEstimate {
    pub estimator: Estimator,
    pub value: f64,
    pub params: EstimatorParams,
    pub surrogate: Option<SurrogateKind>,
}

impl BoundEstimate {
    fn new(estimator: Estimator, value: f64, params: EstimatorParams) -> Self {
        BoundEstimate { estimator, value, params, surrogate: None }
    }

    pub fn direction(&self) -> Direction {
        self.estimator.direction()
    }

    pub fn bound_preserving(&self) -> bool {
        self.estimator.bound_preserving()
    }

    pub fn to_record(&self, seed: Option<u64>) -> BoundRecord {
        BoundRecord {
            estimator: self.estimator,
            k: self.params.k,
            beta: self.params.beta,
            lambda: self.params.lambda,
            s: self.params.s,
            n_pairs: self.params.n_pairs,
            m: self.params.m,
            value_nats: self.value,
            direction: self.direction(),
            bound_preserving: self.bound_preserving(),
            seed,
        }
    }

    pub fn to_loglik(&self, seed: Option<u64>) -> LogLik {
        LogLik {
            nats: self.value,
            estimator: self.estimator.name().into(),
            samples: self.params.k,
            surrogate: self.surrogate.map(|s| s.label()),
            seed,
        }
    }
}

/// Flat serialized form of a [`BoundEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub estimator: Estimator,
    pub k: usize,
    pub beta: Option<f64>,
    pub lambda: Option<usize>,
    pub s: Option<usize>,
    pub n_pairs: Option<usize>,
    pub m: Option<usize>,
    pub value_nats: f64,
    pub direction: Direction,
    pub bound_preserving: bool,
    pub seed: Option<u64>,
}

fn nonempty(bank: &SampleBank) -> Result<()> {
    if bank.is_empty() {
        return Err(Error::InvalidEstimate("empty sample bank".into()));
    }
    Ok(())
}

/// Single-sample ELBO. Uses the first entry of the bank.
pub fn elbo(bank: &SampleBank) -> Result<BoundEstimate> {
    nonempty(bank)?;
    Ok(BoundEstimate::new(Estimator::Elbo, bank.logliks[0], EstimatorParams { k: 1, ..Default::default() }))
}

pub fn elbo_k(bank: &SampleBank) -> Result<BoundEstimate> {
    nonempty(bank)?;
    let params = EstimatorParams { k: bank.len(), ..Default::default() };
    Ok(BoundEstimate::new(Estimator::ElboK, values::elbo_k(&bank.logliks), params))
}

pub fn tube(bank: &SampleBank, surrogate: &Surrogate) -> Result<BoundEstimate> {
    nonempty(bank)?;
    if surrogate.source.is_some_and(|s| s.overlaps(&bank.tag)) {
        return Err(Error::CorrelatedSurrogate);
    }
    let m = match surrogate.kind {
        SurrogateKind::SelfAverage { m } => Some(m),
        SurrogateKind::SingleOrder => Some(1),
        _ => None,
    };
    let params = EstimatorParams { k: bank.len(), m, ..Default::default() };
    let mut estimate = BoundEstimate::new(Estimator::Tube, values::tube(&bank.logliks, surrogate.log_psi), params);
    estimate.surrogate = Some(surrogate.kind);
    Ok(estimate)
}

/// `ψ_M(x)`: mean of `p(x | π̂^{(m)})` over a bank that must stay disjoint
/// from the estimation bank.
pub fn surrogate_self(bank: &SampleBank) -> Result<Surrogate> {
    nonempty(bank)?;
    let kind = match bank.len() {
        1 => SurrogateKind::SingleOrder,
        m => SurrogateKind::SelfAverage { m },
    };
    Surrogate::new(kind, values::elbo_k(&bank.logliks), Some(bank.tag))
}

/// `ψ_ARM(x)`: the chain-rule likelihood of one block under a left-to-right model.
pub fn surrogate_arm(arm: &CondModel, block: BlockRef<'_>) -> Result<Surrogate> {
    let n = arm.space().block_size();
    let log_psi = logprob_given_single_order(arm, block, &SingleOrder::identity(n))?;
    Surrogate::new(SurrogateKind::Arm, log_psi, None)
}

/// Like [`surrogate_arm`] for a fine-tuned ARM.
pub fn surrogate_arm_finetuned(arm: &CondModel, block: BlockRef<'_>) -> Result<Surrogate> {
    let mut s = surrogate_arm(arm, block)?;
    s.kind = SurrogateKind::ArmFinetuned;
    Ok(s)
}

/// Refits the left-to-right tables on samples of the evaluated model, using
/// the original ARM as the smoothing prior mean:
/// `p = (count + αV p_ARM) / (total + αV)`.
pub fn finetune_surrogate_arm(arm: &CondModel, model_samples: &[Sequence], alpha: f64) -> Result<CondModel> {
    fit_with_prior(*arm.space(), model_samples, MaskPlan::LeftToRight, alpha, Some(arm))
}

pub fn cubo(bank: &SampleBank, beta: f64) -> Result<BoundEstimate> {
    nonempty(bank)?;
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::InvalidEstimate(format!("CUBO needs β ≥ 1, got {beta}")));
    }
    let params = EstimatorParams { k: bank.len(), beta: Some(beta), ..Default::default() };
    Ok(BoundEstimate::new(Estimator::Cubo, values::cubo(&bank.logliks, beta), params))
}

pub fn tvo_upper(bank: &SampleBank, lambda: usize) -> Result<BoundEstimate> {
    if lambda == 0 {
        return Err(Error::InvalidEstimate("TVO needs Λ ≥ 1".into()));
    }
    let value = values::tvo_upper(&bank.logliks, lambda)
        .ok_or_else(|| Error::InvalidEstimate("TVO needs at least one finite log-likelihood".into()))?;
    let params = EstimatorParams { k: bank.len(), lambda: Some(lambda), ..Default::default() };
    Ok(BoundEstimate::new(Estimator::TvoUpper, value, params))
}

/// IS-VG-B over `n_p ≥ 2` pairs of independent `(X, Y)` banks of size `s`.
pub fn isvgb(pairs: &[(SampleBank, SampleBank)]) -> Result<BoundEstimate> {
    if pairs.len() < 2 {
        return Err(Error::InvalidEstimate(format!("IS-VG-B needs n_p ≥ 2 pairs, got {}", pairs.len())));
    }
    let s = pairs[0].0.len();
    if s == 0 || pairs.iter().any(|(x, y)| x.len() != s || y.len() != s) {
        return Err(Error::InvalidEstimate("IS-VG-B banks must all have the same size s ≥ 1".into()));
    }
    let banks: Vec<&SampleBank> = pairs.iter().flat_map(|(x, y)| [x, y]).collect();
    for (i, a) in banks.iter().enumerate() {
        if banks[i + 1..].iter().any(|b| !a.is_disjoint(b)) {
            return Err(Error::CorrelatedSurrogate);
        }
    }
    let value = values::isvgb(pairs.iter().map(|(x, y)| (x.logliks(), y.logliks())))
        .ok_or_else(|| Error::InvalidEstimate("an IS-VG-B X bank has zero probability".into()))?;
    let params = EstimatorParams {
        k: 2 * s * pairs.len(),
        s: Some(s),
        n_pairs: Some(pairs.len()),
        ..Default::default()
    };
    Ok(BoundEstimate::new(Estimator::IsVgb, value, params))
}

/// Exact population quantities for one scope, from a fully enumerated bank
/// with prior weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    logliks: Vec<f64>,
    log_weights: Vec<f64>,
}

impl Population {
    pub fn new(logliks: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if logliks.len() != weights.len() || logliks.is_empty() {
            return Err(Error::InvalidEstimate("population needs one weight per log-likelihood".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidEstimate("population weights must form a distribution".into()));
        }
        Ok(Population { logliks, log_weights: weights.iter().map(|w| w.ln()).collect() })
    }

    /// Enumerates every ordering of `regime` and scores it.
    pub fn enumerate(model: &CondModel, block: BlockRef<'_>, regime: Regime) -> Result<Self> {
        let bank = regime.enumerate(model.space().block_size())?;
        let logliks = bank
            .orders()
            .iter()
            .map(|o| logprob_given_order(model, block, o))
            .collect::<Result<Vec<_>>>()?;
        Self::new(logliks, bank.weights())
    }

    pub fn logliks(&self) -> &[f64] {
        &self.logliks
    }

    fn weighted(&self, scale: f64) -> Vec<f64> {
        self.logliks
            .iter()
            .zip(&self.log_weights)
            .map(|(l, w)| if *l == f64::NEG_INFINITY { *l } else { scale * l + w })
            .collect()
    }

    /// `log E_π[p(x | π)]`.
    pub fn exact(&self) -> f64 {
        crate::logspace::log_sum_exp(&self.weighted(1.0))
    }

    /// `E_π[log p(x | π)]`.
    pub fn elbo(&self) -> f64 {
        self.logliks
            .iter()
            .zip(&self.log_weights)
            .filter(|(_, w)| **w > f64::NEG_INFINITY)
            .map(|(l, w)| w.exp() * l)
            .sum()
    }

    pub fn tube(&self, log_psi: f64) -> f64 {
        values::tube_from_mean(self.exact(), log_psi)
    }

    /// `(1/β) log E_π[p(x | π)^β]`.
    pub fn cubo(&self, beta: f64) -> f64 {
        crate::logspace::log_sum_exp(&self.weighted(beta)) / beta
    }

    /// `E_{q_β}[log p(x | π)]` with `q_β(π) ∝ p(π) p(x | π)^β`.
    pub fn thermodynamic_integrand(&self, beta: f64) -> f64 {
        let w = self.weighted(beta);
        let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut norm = 0.0;
        let mut acc = 0.0;
        for (lw, l) in w.iter().zip(&self.logliks) {
            if *lw > f64::NEG_INFINITY {
                let q = (lw - m).exp();
                norm += q;
                acc += q * l;
            }
        }
        acc / norm
    }

    /// Right Riemann sum `(1/Λ) Σ_λ E_{q_{λ/Λ}}[log p(x | π)] ≥ log p(x)`.
    pub fn tvo(&self, lambda: usize) -> f64 {
        (1..=lambda)
            .map(|l| self.thermodynamic_integrand(l as f64 / lambda as f64))
            .sum::<f64>()
            / lambda as f64
    }

    /// `Var_π[p(x | π)] / ψ²`, computed on the `ψ`-scaled values.
    pub fn relative_variance(&self, log_psi: f64) -> f64 {
        let scaled: Vec<f64> = self.logliks.iter().map(|l| (l - log_psi).exp()).collect();
        let weights: Vec<f64> = self.log_weights.iter().map(|w| w.exp()).collect();
        let mean: f64 = scaled.iter().zip(&weights).map(|(p, w)| p * w).sum();
        scaled.iter().zip(&weights).map(|(p, w)| w * (p - mean).powi(2)).sum()
    }

    /// Variance of the K-sample TUBE estimator: `Var_π[p(x | π)] / (K ψ²)`.
    pub fn tube_variance(&self, log_psi: f64, k: usize) -> f64 {
        self.relative_variance(log_psi) / k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationBound {
    Exact,
    Elbo,
    Tube { log_psi: f64 },
    Cubo { beta: f64 },
    Tvo { lambda: usize },
}

/// Exact value of a population bound for one block by enumeration.
pub fn population_bound(bound: PopulationBound, model: &CondModel, block: BlockRef<'_>, regime: Regime) -> Result<f64> {
    let population = Population::enumerate(model, block, regime)?;
    Ok(match bound {
        PopulationBound::Exact => population.exact(),
        PopulationBound::Elbo => population.elbo(),
        PopulationBound::Tube { log_psi } => population.tube(log_psi),
        PopulationBound::Cubo { beta } => population.cubo(beta),
        PopulationBound::Tvo { lambda } => population.tvo(lambda),
    })
}

/// The subset-DP exact value, an independent route from [`Population::exact`].
pub fn exact(model: &CondModel, block: BlockRef<'_>, regime: Regime) -> Result<BoundEstimate> {
    Ok(BoundEstimate::new(Estimator::Exact, exact_logprob(model, block, regime)?, EstimatorParams::default()))
}
