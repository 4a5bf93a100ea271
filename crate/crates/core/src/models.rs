//! Tabular conditional models shared by the ARM, AO-ARM, MDM and block views.
//!
//! A [`CondModel`] stores `p(x^d = v | context)` for every position `d` of a
//! block, every reveal state of the other positions in the block, and every
//! value of the previous block (first-order block Markov conditioning). The
//! same tables answer ARM queries (identity order), AO-ARM queries (any
//! permutation) and MDM queries (grouped orders with within-step
//! factorization).
//!
//! Context keys are mixed-radix integers over the other `n − 1` positions of
//! the block with digit `0` for masked and `s + 1` for revealed symbol `s`,
//! most significant position first.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::logspace::log_add_exp;
use crate::seqspace::{
    checked_pow, encode_base, BlockRef, GroupedOrder, Order, Regime, SeqSpace, Sequence,
    SingleOrder,
};
use crate::{Error, Result};

/// Largest number of stored probabilities in one model.
pub const MAX_TABLE_ENTRIES: usize = 1 << 26;
/// Largest scope for the subset dynamic program behind [`exact_logprob`].
pub const MAX_EXACT_SCOPE: usize = 16;
/// Largest `T · 3^n` work for the grouped exact dynamic program.
pub const MAX_GROUPED_EXACT_WORK: u128 = 100_000_000;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    BayesExact,
    Fitted,
    Perturbed { epsilon: f64 },
}

/// A prediction context inside one block: per-position reveal state and the
/// previous block's tokens (`None` for the first block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub prev: Option<Vec<usize>>,
    pub cells: Vec<Option<usize>>,
}

impl Context {
    pub fn empty(n: usize) -> Self {
        Context { prev: None, cells: vec![None; n] }
    }
}

/// A log-likelihood value with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLik {
    pub nats: f64,
    pub estimator: String,
    pub samples: usize,
    pub surrogate: Option<String>,
    pub seed: Option<u64>,
}

impl LogLik {
    pub fn exact(nats: f64) -> Self {
        LogLik { nats, estimator: "exact".into(), samples: 0, surrogate: None, seed: None }
    }

    /// The model assigns the sequence probability zero.
    pub fn is_impossible(&self) -> bool {
        self.nats == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondModel {
    space: SeqSpace,
    mode: ModelMode,
    alpha: f64,
    contexts: usize,
    prev_states: usize,
    probs: Vec<f64>,
}

struct Layout {
    contexts: usize,
    prev_states: usize,
    entries: usize,
}

fn layout(space: &SeqSpace) -> Result<Layout> {
    let n = space.block_size();
    let v = space.vocab_size();
    let too_big = || Error::InvalidModel(format!("tables for {space:?} exceed {MAX_TABLE_ENTRIES} entries"));
    let contexts = checked_pow(v + 1, n - 1).ok_or_else(too_big)?;
    let prev_states = if space.num_blocks() > 1 {
        space.block_cardinality().and_then(|c| c.checked_add(1)).ok_or_else(too_big)?
    } else {
        1
    };
    let entries = [prev_states, n, contexts, v]
        .into_iter()
        .try_fold(1usize, |a, b| a.checked_mul(b))
        .filter(|&e| e <= MAX_TABLE_ENTRIES)
        .ok_or_else(too_big)?;
    Ok(Layout { contexts, prev_states, entries })
}

/// Mixed-radix key of `digits` with position `skip` removed.
fn context_key(digits: &[usize], skip: usize, base: usize) -> usize {
    digits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .fold(0, |acc, (_, &d)| acc * base + d)
}

fn decode_context(mut key: usize, n: usize, skip: usize, base: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for i in (0..n).rev().filter(|&i| i != skip) {
        digits[i] = key % base;
        key /= base;
    }
    digits
}

fn decode_prev(state: usize, n: usize, v: usize) -> Option<Vec<usize>> {
    (state > 0).then(|| {
        let mut code = state - 1;
        let mut tokens = vec![0; n];
        for slot in tokens.iter_mut().rev() {
            *slot = code % v;
            code /= v;
        }
        tokens
    })
}

fn check_distribution(p: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidModel(format!("{} is not a distribution: {p:?}", what())));
    }
    Ok(())
}

impl CondModel {
    /// Builds a model by querying `f(prev, position, cells)` for every table entry.
    pub fn from_fn(
        space: SeqSpace,
        mode: ModelMode,
        alpha: f64,
        mut f: impl FnMut(Option<&[usize]>, usize, &[Option<usize>]) -> Vec<f64>,
    ) -> Result<Self> {
        let Layout { contexts, prev_states, entries } = layout(&space)?;
        let n = space.block_size();
        let v = space.vocab_size();
        let mut probs = Vec::with_capacity(entries);
        for prev_state in 0..prev_states {
            let prev = decode_prev(prev_state, n, v);
            for d in 0..n {
                for key in 0..contexts {
                    let cells: Vec<Option<usize>> = decode_context(key, n, d, v + 1)
                        .into_iter()
                        .map(|digit| digit.checked_sub(1))
                        .collect();
                    let p = f(prev.as_deref(), d, &cells);
                    if p.len() != v {
                        return Err(Error::InvalidModel(format!("vector of length {} for V = {v}", p.len())));
                    }
                    check_distribution(&p, || format!("p(x^{d} | {cells:?})"))?;
                    probs.extend(p);
                }
            }
        }
        Ok(CondModel { space, mode, alpha, contexts, prev_states, probs })
    }

    pub fn uniform(space: SeqSpace) -> Result<Self> {
        let v = space.vocab_size();
        Self::from_fn(space, ModelMode::Fitted, 0.0, |_, _, _| vec![1.0 / v as f64; v])
    }

    pub fn space(&self) -> &SeqSpace {
        &self.space
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    fn prev_state(&self, prev: Option<&[usize]>) -> Result<usize> {
        match prev {
            None => Ok(0),
            Some(_) if self.prev_states == 1 => Err(Error::InvalidModel(
                "single-block model queried with a previous block".into(),
            )),
            Some(tokens) => {
                self.check_block(tokens)?;
                Ok(1 + encode_base(tokens, self.space.vocab_size()))
            }
        }
    }

    fn check_block(&self, tokens: &[usize]) -> Result<()> {
        let n = self.space.block_size();
        if tokens.len() != n {
            return Err(Error::InvalidSequence(format!("block of length {} != {n}", tokens.len())));
        }
        if tokens.iter().any(|&t| t >= self.space.vocab_size()) {
            return Err(Error::InvalidSequence(format!("block {tokens:?} outside vocabulary")));
        }
        Ok(())
    }

    #[inline]
    fn offset(&self, prev_state: usize, position: usize, key: usize) -> usize {
        ((prev_state * self.space.block_size() + position) * self.contexts + key) * self.space.vocab_size()
    }

    /// Conditional vector for `position` given `digits` (0 masked, s + 1 revealed).
    #[inline]
    fn row(&self, prev_state: usize, position: usize, digits: &[usize]) -> &[f64] {
        let key = context_key(digits, position, self.space.vocab_size() + 1);
        let start = self.offset(prev_state, position, key);
        &self.probs[start..start + self.space.vocab_size()]
    }

    /// `p(x^position = · | context)`.
    pub fn conditional(&self, context: &Context, position: usize) -> Result<&[f64]> {
        let n = self.space.block_size();
        if context.cells.len() != n || position >= n {
            return Err(Error::InvalidModel(format!("context {context:?} / position {position} outside scope {n}")));
        }
        if context.cells[position].is_some() {
            return Err(Error::InvalidModel(format!("position {position} is revealed in its own context")));
        }
        let prev_state = self.prev_state(context.prev.as_deref())?;
        let digits: Vec<usize> = context
            .cells
            .iter()
            .map(|c| match c {
                None => Ok(0),
                Some(s) if *s < self.space.vocab_size() => Ok(s + 1),
                Some(s) => Err(Error::InvalidSequence(format!("symbol {s} outside vocabulary"))),
            })
            .collect::<Result<_>>()?;
        Ok(self.row(prev_state, position, &digits))
    }

    /// Iterates `(prev_state, position, context_key, probabilities)` over every entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, &[f64])> + '_ {
        let n = self.space.block_size();
        let contexts = self.contexts;
        self.probs
            .chunks(self.space.vocab_size())
            .enumerate()
            .map(move |(i, p)| (i / (n * contexts), (i / contexts) % n, i % contexts, p))
    }

    fn validated_block(&self, block: BlockRef<'_>) -> Result<usize> {
        self.check_block(block.tokens)?;
        self.prev_state(block.prev)
    }

    fn groups_logprob<'g>(
        &self,
        prev_state: usize,
        tokens: &[usize],
        groups: impl Iterator<Item = &'g [usize]>,
    ) -> f64 {
        let mut digits = vec![0usize; tokens.len()];
        let mut total = 0.0;
        for group in groups {
            for &d in group {
                total += self.row(prev_state, d, &digits)[tokens[d]].ln();
            }
            for &d in group {
                digits[d] = tokens[d] + 1;
            }
        }
        total
    }

    pub(crate) fn order_logprob(&self, prev_state: usize, tokens: &[usize], order: &Order) -> f64 {
        match order {
            Order::Single(o) => self.groups_logprob(prev_state, tokens, o.positions().chunks(1)),
            Order::Grouped(g) => self.groups_logprob(prev_state, tokens, g.groups().iter().map(Vec::as_slice)),
        }
    }
}

fn check_scope(model: &CondModel, scope: usize) -> Result<()> {
    if scope != model.space().block_size() {
        return Err(Error::InvalidOrder(format!(
            "ordering scope {scope} != block size {}",
            model.space().block_size()
        )));
    }
    Ok(())
}

/// `log p(x | π) = Σ_t log p(x^{π_t} | x^{π_<t})`; `-inf` when a conditional is zero.
pub fn logprob_given_single_order(model: &CondModel, block: BlockRef<'_>, order: &SingleOrder) -> Result<f64> {
    check_scope(model, order.scope())?;
    let state = model.validated_block(block)?;
    Ok(model.groups_logprob(state, block.tokens, order.positions().chunks(1)))
}

/// `log p(x | π) = Σ_t Σ_{d ∈ π_t} log p(x^d | x^{π_<t})`: every position in a
/// group conditions only on positions revealed by strictly earlier groups.
pub fn logprob_given_grouped_order(model: &CondModel, block: BlockRef<'_>, order: &GroupedOrder) -> Result<f64> {
    check_scope(model, order.scope())?;
    let state = model.validated_block(block)?;
    Ok(model.groups_logprob(state, block.tokens, order.groups().iter().map(Vec::as_slice)))
}

pub fn logprob_given_order(model: &CondModel, block: BlockRef<'_>, order: &Order) -> Result<f64> {
    check_scope(model, order.scope())?;
    let state = model.validated_block(block)?;
    Ok(model.order_logprob(state, block.tokens, order))
}

/// Exact `log E_{π∼p(π)}[p(x | π)]` for one block.
///
/// Computed by dynamic programming over revealed subsets rather than by
/// enumerating orderings, so it is an independent route from `ELBO_K` over
/// an enumerated bank. For permutations `f(S) = Σ_{d∈S} f(S∖d) p(x^d | x^{S∖d})`
/// and `p(x) = f(full) / n!`; for `T` iid-uniform steps
/// `g_t(S) = Σ_{S'⊆S} g_{t−1}(S') Π_{d∈S∖S'} p(x^d | x^{S'})` and `p(x) = g_T(full) / T^n`.
pub fn exact_logprob(model: &CondModel, block: BlockRef<'_>, regime: Regime) -> Result<f64> {
    let state = model.validated_block(block)?;
    let n = model.space().block_size();
    if n > MAX_EXACT_SCOPE {
        return Err(Error::CapExceeded {
            what: format!("exact likelihood over a {n}-position scope"),
            cap: MAX_EXACT_SCOPE as u128,
        });
    }
    let tokens = block.tokens;
    let full = (1usize << n) - 1;
    // log p(x^d | x^S) for d ∉ S
    let mut cond = vec![f64::NEG_INFINITY; (full + 1) * n];
    let mut digits = vec![0usize; n];
    for mask in 0..=full {
        for (i, slot) in digits.iter_mut().enumerate() {
            *slot = if mask >> i & 1 == 1 { tokens[i] + 1 } else { 0 };
        }
        for d in (0..n).filter(|d| mask >> d & 1 == 0) {
            cond[mask * n + d] = model.row(state, d, &digits)[tokens[d]].ln();
        }
    }
    match regime {
        Regime::AnyOrder => {
            let mut f = vec![f64::NEG_INFINITY; full + 1];
            f[0] = 0.0;
            for mask in 1..=full {
                let mut acc = f64::NEG_INFINITY;
                for d in (0..n).filter(|d| mask >> d & 1 == 1) {
                    let rest = mask & !(1 << d);
                    acc = log_add_exp(acc, f[rest] + cond[rest * n + d]);
                }
                f[mask] = acc;
            }
            let log_factorial: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            Ok(f[full] - log_factorial)
        }
        Regime::Masked { steps } => {
            if steps == 0 {
                return Err(Error::InvalidOrder("T must be at least 1".into()));
            }
            let work = (steps as u128) * 3u128.pow(n as u32);
            if work > MAX_GROUPED_EXACT_WORK {
                return Err(Error::CapExceeded {
                    what: format!("exact grouped likelihood with T = {steps}, n = {n}"),
                    cap: MAX_GROUPED_EXACT_WORK,
                });
            }
            // reveal[S'][S] = Σ_{d ∈ S∖S'} log p(x^d | x^{S'}), computed on the fly
            let mut g = vec![f64::NEG_INFINITY; full + 1];
            g[0] = 0.0;
            for _ in 0..steps {
                let mut next = vec![f64::NEG_INFINITY; full + 1];
                for (target, slot) in next.iter_mut().enumerate() {
                    let mut acc = f64::NEG_INFINITY;
                    let mut sub = target;
                    loop {
                        if g[sub] > f64::NEG_INFINITY {
                            let added = target & !sub;
                            let step: f64 = (0..n)
                                .filter(|d| added >> d & 1 == 1)
                                .map(|d| cond[sub * n + d])
                                .sum();
                            acc = log_add_exp(acc, g[sub] + step);
                        }
                        if sub == 0 {
                            break;
                        }
                        sub = (sub - 1) & target;
                    }
                    *slot = acc;
                }
                g = next;
            }
            Ok(g[full] - n as f64 * (steps as f64).ln())
        }
    }
}

/// `log p_BM(x) = Σ_b log p(x^{B_b} | x^{B_{b−1}})`, with each block scored by `per_block`.
pub fn logprob_block(
    model: &CondModel,
    x: &Sequence,
    mut per_block: impl FnMut(BlockRef<'_>) -> Result<f64>,
) -> Result<f64> {
    x.blocks(model.space())
        .into_iter()
        .try_fold(0.0, |acc, block| Ok(acc + per_block(block)?))
}

/// Exact block-model log-likelihood of a full sequence.
pub fn exact_logprob_sequence(model: &CondModel, x: &Sequence, regime: Regime) -> Result<f64> {
    logprob_block(model, x, |block| exact_logprob(model, block, regime))
}

/// How masked/revealed patterns are drawn from each training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPlan {
    /// Every revealed subset of every block, every masked position counted.
    All,
    /// `per_example` random masks per block: a uniform prefix length of a uniform permutation.
    Sampled { per_example: usize, seed: u64 },
    /// Only identity-order prefixes, predicting the next position (ARM fitting).
    LeftToRight,
}

/// Count-based fitting with Laplace smoothing:
/// `p = (count + α) / (total + αV)`, uniform where nothing was observed and `α = 0`.
pub fn fit_tabular(space: SeqSpace, corpus: &[Sequence], plan: MaskPlan, alpha: f64) -> Result<CondModel> {
    fit_with_prior(space, corpus, plan, alpha, None)
}

/// Fits a left-to-right ARM on the same tables.
pub fn fit_arm(space: SeqSpace, corpus: &[Sequence], alpha: f64) -> Result<CondModel> {
    fit_tabular(space, corpus, MaskPlan::LeftToRight, alpha)
}

pub(crate) fn fit_with_prior(
    space: SeqSpace,
    corpus: &[Sequence],
    plan: MaskPlan,
    alpha: f64,
    prior: Option<&CondModel>,
) -> Result<CondModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidModel(format!("smoothing α = {alpha} must be nonnegative")));
    }
    if let Some(prior) = prior {
        if prior.space() != &space {
            return Err(Error::InvalidModel("prior model lives on a different space".into()));
        }
    }
    let shape = layout(&space)?;
    let mut model = CondModel {
        space,
        mode: ModelMode::Fitted,
        alpha,
        contexts: shape.contexts,
        prev_states: shape.prev_states,
        probs: vec![0.0; shape.entries],
    };
    let n = space.block_size();
    let v = space.vocab_size();
    let mut rng = match plan {
        MaskPlan::Sampled { seed, .. } => Some(crate::rng::seeded(seed)),
        _ => None,
    };
    let mut digits = vec![0usize; n];
    let mut order: Vec<usize> = (0..n).collect();
    for x in corpus {
        if x.tokens().len() != space.length() {
            return Err(Error::InvalidSequence("corpus sequence does not match the space".into()));
        }
        for block in x.blocks(&space) {
            let state = model.validated_block(block)?;
            let tokens = block.tokens;
            let count = |model: &mut CondModel, digits: &[usize], d: usize| {
                let at = model.offset(state, d, context_key(digits, d, v + 1)) + tokens[d];
                model.probs[at] += 1.0;
            };
            match plan {
                MaskPlan::All => {
                    for mask in 0..1usize << n {
                        for (i, slot) in digits.iter_mut().enumerate() {
                            *slot = if mask >> i & 1 == 1 { tokens[i] + 1 } else { 0 };
                        }
                        for d in (0..n).filter(|d| mask >> d & 1 == 0) {
                            count(&mut model, &digits, d);
                        }
                    }
                }
                MaskPlan::LeftToRight => {
                    digits.fill(0);
                    for d in 0..n {
                        count(&mut model, &digits, d);
                        digits[d] = tokens[d] + 1;
                    }
                }
                MaskPlan::Sampled { per_example, .. } => {
                    let rng = rng.as_mut().expect("sampled plan carries a stream");
                    for _ in 0..per_example {
                        use rand::seq::SliceRandom;
                        order.shuffle(rng);
                        let revealed = rng.random_range(0..n);
                        digits.fill(0);
                        for &p in &order[..revealed] {
                            digits[p] = tokens[p] + 1;
                        }
                        for &d in &order[revealed..] {
                            count(&mut model, &digits, d);
                        }
                    }
                }
            }
        }
    }
    let base = prior.map(|p| p.probs.as_slice());
    let strength = alpha * v as f64;
    for (row_index, row) in model.probs.chunks_mut(v).enumerate() {
        let total: f64 = row.iter().sum();
        let denom = total + strength;
        if denom <= 0.0 {
            match base {
                Some(b) => row.copy_from_slice(&b[row_index * v..(row_index + 1) * v]),
                None => row.fill(1.0 / v as f64),
            }
            continue;
        }
        for (j, p) in row.iter_mut().enumerate() {
            let pseudo = match base {
                Some(b) => strength * b[row_index * v + j],
                None => alpha,
            };
            *p = (*p + pseudo) / denom;
        }
    }
    Ok(model)
}

/// Ground-truth joint kinds used to synthesize corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    /// Blocks drawn iid from one random block joint.
    RandomJoint,
    /// A random first-block joint and a random block-transition kernel.
    BlockMarkov,
}

/// An explicit distribution over blocks: `first` over `V^{L'}` block values and,
/// for block-Markov joints, one transition row per previous block value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointFile", into = "JointFile")]
pub struct GroundTruthJoint {
    space: SeqSpace,
    first: Vec<f64>,
    transition: Option<Vec<f64>>,
    first_cdf: Vec<f64>,
    transition_cdf: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    format: String,
    version: u32,
    space: SeqSpace,
    first: Vec<f64>,
    transition: Option<Vec<f64>>,
}

impl TryFrom<JointFile> for GroundTruthJoint {
    type Error = Error;

    fn try_from(file: JointFile) -> Result<Self> {
        if file.format != "tube-joint" || file.version != 1 {
            return Err(Error::InvalidModel(format!("unsupported joint format {} v{}", file.format, file.version)));
        }
        GroundTruthJoint::new(file.space, file.first, file.transition)
    }
}

impl From<GroundTruthJoint> for JointFile {
    fn from(j: GroundTruthJoint) -> Self {
        JointFile { format: "tube-joint".into(), version: 1, space: j.space, first: j.first, transition: j.transition }
    }
}

const JOINT_TOL: f64 = 1e-10;

fn cumulative(rows: &[f64], width: usize) -> Vec<f64> {
    rows.chunks(width)
        .flat_map(|row| {
            row.iter().scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
        })
        .collect()
}

fn dirichlet(rng: &mut impl Rng, len: usize, concentration: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidModel(format!("concentration {concentration}: {e}")))?;
    let mut w: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        w.fill(1.0 / len as f64);
    } else {
        w.iter_mut().for_each(|x| *x /= total);
    }
    Ok(w)
}

impl GroundTruthJoint {
    pub fn new(space: SeqSpace, first: Vec<f64>, transition: Option<Vec<f64>>) -> Result<Self> {
        let width = space
            .block_cardinality()
            .filter(|&c| c <= MAX_TABLE_ENTRIES)
            .ok_or_else(|| Error::InvalidModel("block space too large".into()))?;
        let check = |row: &[f64], what: &str| -> Result<()> {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > JOINT_TOL {
                return Err(Error::InvalidModel(format!("{what} sums to {sum}, not 1")));
            }
            Ok(())
        };
        if first.len() != width {
            return Err(Error::InvalidModel(format!("first-block table has {} entries, expected {width}", first.len())));
        }
        check(&first, "first-block joint")?;
        if let Some(t) = &transition {
            if space.num_blocks() == 1 {
                return Err(Error::InvalidModel("transition kernel on a single-block space".into()));
            }
            if width.saturating_mul(width) > MAX_TABLE_ENTRIES {
                return Err(Error::CapExceeded { what: "transition kernel entries".into(), cap: MAX_TABLE_ENTRIES as u128 });
            }
            if t.len() != width * width {
                return Err(Error::InvalidModel("transition kernel has the wrong shape".into()));
            }
            for (i, row) in t.chunks(width).enumerate() {
                check(row, &format!("transition row {i}"))?;
            }
        }
        let first_cdf = cumulative(&first, width);
        let transition_cdf = transition.as_ref().map(|t| cumulative(t, width));
        Ok(GroundTruthJoint { space, first, transition, first_cdf, transition_cdf })
    }

    /// Draws a random joint with Dirichlet(`concentration`) block tables.
    pub fn random(space: SeqSpace, kind: JointKind, concentration: f64, rng: &mut impl Rng) -> Result<Self> {
        let width = space
            .block_cardinality()
            .filter(|&c| c <= MAX_TABLE_ENTRIES)
            .ok_or_else(|| Error::InvalidModel("block space too large".into()))?;
        let first = dirichlet(rng, width, concentration)?;
        let transition = match kind {
            JointKind::BlockMarkov if space.num_blocks() > 1 => {
                if width.saturating_mul(width) > MAX_TABLE_ENTRIES {
                    return Err(Error::CapExceeded { what: "transition kernel entries".into(), cap: MAX_TABLE_ENTRIES as u128 });
                }
                let mut t = Vec::with_capacity(width * width);
                for _ in 0..width {
                    t.extend(dirichlet(rng, width, concentration)?);
                }
                Some(t)
            }
            _ => None,
        };
        Self::new(space, first, transition)
    }

    pub fn space(&self) -> &SeqSpace {
        &self.space
    }

    fn width(&self) -> usize {
        self.first.len()
    }

    /// `p(x^{B_b} = · | x^{B_{b−1}} = prev)` over block indices.
    pub fn block_distribution(&self, prev: Option<&[usize]>) -> &[f64] {
        match (prev, &self.transition) {
            (Some(p), Some(t)) => {
                let row = encode_base(p, self.space.vocab_size());
                &t[row * self.width()..(row + 1) * self.width()]
            }
            _ => &self.first,
        }
    }

    pub fn log_prob(&self, x: &Sequence) -> f64 {
        x.blocks(&self.space)
            .iter()
            .map(|b| self.block_distribution(b.prev)[encode_base(b.tokens, self.space.vocab_size())].ln())
            .sum()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Sequence {
        let n = self.space.block_size();
        let v = self.space.vocab_size();
        let width = self.width();
        let mut tokens = Vec::with_capacity(self.space.length());
        for b in 0..self.space.num_blocks() {
            let cdf = match (&self.transition_cdf, b) {
                (Some(t), b) if b > 0 => {
                    let row = encode_base(&tokens[(b - 1) * n..b * n], v);
                    &t[row * width..(row + 1) * width]
                }
                _ => &self.first_cdf[..],
            };
            let u: f64 = rng.random::<f64>() * cdf[width - 1];
            let index = cdf.partition_point(|&c| c <= u).min(width - 1);
            let mut block = vec![0; n];
            let mut code = index;
            for slot in block.iter_mut().rev() {
                *slot = code % v;
                code /= v;
            }
            tokens.extend(block);
        }
        Sequence::new(&self.space, tokens).expect("sampled tokens lie in the space")
    }

    pub fn sample_corpus(&self, rng: &mut impl Rng, count: usize) -> Vec<Sequence> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// The model whose conditionals are the joint's exact conditionals; it is
/// order-invariant by construction.
pub fn bayes_model_from_joint(joint: &GroundTruthJoint) -> Result<CondModel> {
    let space = *joint.space();
    let shape = layout(&space)?;
    let n = space.block_size();
    let v = space.vocab_size();
    let base = v + 1;
    let states = checked_pow(base, n).ok_or_else(|| Error::InvalidModel("reveal-state space too large".into()))?;
    let weight: Vec<usize> = (0..n).map(|i| base.pow((n - 1 - i) as u32)).collect();
    let mut probs = Vec::with_capacity(shape.entries);
    let mut marginal = vec![0.0f64; states];
    let mut digits = vec![0usize; n];
    for prev_state in 0..shape.prev_states {
        let prev = decode_prev(prev_state, n, v);
        let q = joint.block_distribution(prev.as_deref());
        // marginal[s] = Σ over completions y of the partial state s of q(y),
        // filled from the fully revealed states downwards.
        for s in (0..states).rev() {
            let mut code = s;
            for slot in digits.iter_mut().rev() {
                *slot = code % base;
                code /= base;
            }
            marginal[s] = match digits.iter().position(|&d| d == 0) {
                None => q[digits.iter().fold(0, |acc, &d| acc * v + (d - 1))],
                Some(i) => (1..=v).map(|sym| marginal[s + sym * weight[i]]).sum(),
            };
        }
        for d in 0..n {
            for key in 0..shape.contexts {
                let ctx = decode_context(key, n, d, base);
                let s: usize = ctx.iter().zip(&weight).map(|(a, w)| a * w).sum();
                let denom = marginal[s];
                if denom > 0.0 {
                    probs.extend((1..=v).map(|sym| marginal[s + sym * weight[d]] / denom));
                } else {
                    probs.extend(std::iter::repeat_n(1.0 / v as f64, v));
                }
            }
        }
    }
    Ok(CondModel {
        space,
        mode: ModelMode::BayesExact,
        alpha: 0.0,
        contexts: shape.contexts,
        prev_states: shape.prev_states,
        probs,
    })
}

fn draw_symbol(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return s;
        }
    }
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1)
}

/// Ancestral sampling of one block along `order`; positions within a group
/// are drawn independently given the context revealed before the group.
pub fn sample_block(
    model: &CondModel,
    rng: &mut impl Rng,
    prev: Option<&[usize]>,
    order: &Order,
) -> Result<Vec<usize>> {
    check_scope(model, order.scope())?;
    let state = model.prev_state(prev)?;
    let n = model.space().block_size();
    let mut tokens = vec![0usize; n];
    let mut digits = vec![0usize; n];
    let mut drawn = Vec::new();
    order.for_each_group(|group| {
        drawn.clear();
        drawn.extend(group.iter().map(|&d| (d, draw_symbol(model.row(state, d, &digits), rng))));
        for &(d, s) in &drawn {
            tokens[d] = s;
            digits[d] = s + 1;
        }
    });
    Ok(tokens)
}

/// Samples a full sequence block by block, reusing `order` in every block.
pub fn sample_sequence(model: &CondModel, rng: &mut impl Rng, order: &Order) -> Result<Sequence> {
    let space = *model.space();
    let mut tokens: Vec<usize> = Vec::with_capacity(space.length());
    for b in 0..space.num_blocks() {
        let n = space.block_size();
        let prev = (b > 0).then(|| tokens[(b - 1) * n..b * n].to_vec());
        let block = sample_block(model, rng, prev.as_deref(), order)?;
        tokens.extend(block);
    }
    Sequence::new(&space, tokens)
}

/// Samples from the mixture `p(x) = E_π[p(x | π)]`, drawing a fresh ordering per block.
pub fn sample_from_mixture(model: &CondModel, rng: &mut impl Rng, regime: Regime) -> Result<Sequence> {
    let space = *model.space();
    let n = space.block_size();
    let mut tokens: Vec<usize> = Vec::with_capacity(space.length());
    for b in 0..space.num_blocks() {
        let order = regime.sample(rng, n);
        let prev = (b > 0).then(|| tokens[(b - 1) * n..b * n].to_vec());
        tokens.extend(sample_block(model, rng, prev.as_deref(), &order)?);
    }
    Sequence::new(&space, tokens)
}

/// Mixes every conditional with an independent uniform-simplex vector:
/// `(1 − ε) p + ε u`, renormalized. `ε = 0` returns the tables unchanged.
pub fn perturb_model(model: &CondModel, epsilon: f64, rng: &mut impl Rng) -> Result<CondModel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidModel(format!("perturbation ε = {epsilon} outside [0, 1]")));
    }
    let mut out = model.clone();
    out.mode = ModelMode::Perturbed { epsilon };
    if epsilon == 0.0 {
        return Ok(out);
    }
    let v = model.space.vocab_size();
    let mut noise = vec![0.0; v];
    for row in out.probs.chunks_mut(v) {
        for u in noise.iter_mut() {
            *u = Exp1.sample(rng);
        }
        let noise_total: f64 = noise.iter().sum();
        for (p, u) in row.iter_mut().zip(&noise) {
            *p = (1.0 - epsilon) * *p + epsilon * u / noise_total;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    space: SeqSpace,
    mode: ModelMode,
    alpha: f64,
    /// `(prev_state, position, context_key, probabilities)`
    entries: Vec<(usize, usize, usize, Vec<f64>)>,
}

impl CondModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: "tube-condmodel".into(),
            version: 1,
            space: self.space,
            mode: self.mode,
            alpha: self.alpha,
            entries: self.entries().map(|(s, d, k, p)| (s, d, k, p.to_vec())).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != "tube-condmodel" || file.version != 1 {
            return Err(Error::InvalidModel(format!("unsupported model format {} v{}", file.format, file.version)));
        }
        let shape = layout(&file.space)?;
        if file.entries.len() * file.space.vocab_size() != shape.entries {
            return Err(Error::InvalidModel("model file has the wrong number of entries".into()));
        }
        let mut model = CondModel {
            space: file.space,
            mode: file.mode,
            alpha: file.alpha,
            contexts: shape.contexts,
            prev_states: shape.prev_states,
            probs: vec![f64::NAN; shape.entries],
        };
        let n = file.space.block_size();
        for (state, d, key, p) in file.entries {
            if state >= shape.prev_states || d >= n || key >= shape.contexts || p.len() != file.space.vocab_size() {
                return Err(Error::InvalidModel(format!("entry ({state}, {d}, {key}) out of range")));
            }
            check_distribution(&p, || format!("entry ({state}, {d}, {key})"))?;
            let at = model.offset(state, d, key);
            model.probs[at..at + p.len()].copy_from_slice(&p);
        }
        if model.probs.iter().any(|p| p.is_nan()) {
            return Err(Error::InvalidModel("model file leaves entries undefined".into()));
        }
        Ok(model)
    }
}

/// One sequence per line as space-separated 1-based tokens, after a header.
pub fn write_corpus(space: &SeqSpace, corpus: &[Sequence]) -> String {
    let mut out = format!(
        "# corpus vocab_size={} length={} count={}\n",
        space.vocab_size(),
        space.length(),
        corpus.len()
    );
    for x in corpus {
        let line: Vec<String> = x.tokens().iter().map(|t| (t + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_corpus(space: &SeqSpace, text: &str) -> Result<Vec<Sequence>> {
    let bad = |m: String| Error::InvalidSequence(format!("corpus: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    let fields: std::collections::HashMap<&str, &str> = header
        .strip_prefix("# corpus")
        .ok_or_else(|| bad(format!("bad header {header:?}")))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |k: &str| -> Result<usize> {
        fields
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("header lacks {k}")))
    };
    if get("vocab_size")? != space.vocab_size() || get("length")? != space.length() {
        return Err(bad("header does not match the configured space".into()));
    }
    let corpus: Vec<Sequence> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let tokens = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().ok().filter(|&t| t >= 1).map(|t| t - 1))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad(format!("bad line {line:?}")))?;
            Sequence::new(space, tokens)
        })
        .collect::<Result<_>>()?;
    if corpus.len() != get("count")? {
        return Err(bad(format!("header count does not match {} lines", corpus.len())));
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::seqspace::{enumerate_grouped_orders, enumerate_single_orders};
    use crate::toy;
    use approx::assert_abs_diff_eq;

    const A: usize = 0;
    const B: usize = 1;

    fn single(p: &[usize]) -> SingleOrder {
        SingleOrder::new(p.to_vec()).unwrap()
    }

    #[test]
    fn toy_a_single_orders() {
        let m = toy::toy_a();
        let aa = BlockRef::first(&[A, A]);
        let ab = BlockRef::first(&[A, B]);
        assert_abs_diff_eq!(logprob_given_single_order(&m, aa, &single(&[0, 1])).unwrap(), -0.916290731874155, epsilon = 1e-12);
        assert_abs_diff_eq!(logprob_given_single_order(&m, ab, &single(&[1, 0])).unwrap(), (0.15f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(logprob_given_single_order(&m, ab, &single(&[1, 0])).unwrap(), -1.89712, epsilon = 1e-5);
        assert_abs_diff_eq!(logprob_given_single_order(&m, ab, &single(&[0, 1])).unwrap(), (0.10f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn toy_a_grouped_orders() {
        let m = toy::toy_a();
        let ab = BlockRef::first(&[A, B]);
        let one_step = GroupedOrder::new(2, vec![vec![0, 1]]).unwrap();
        assert_abs_diff_eq!(logprob_given_grouped_order(&m, ab, &one_step).unwrap(), -1.38629, epsilon = 1e-5);
        let with_empty = GroupedOrder::new(2, vec![vec![], vec![1], vec![], vec![0], vec![]]).unwrap();
        assert_eq!(
            logprob_given_grouped_order(&m, ab, &with_empty).unwrap(),
            logprob_given_single_order(&m, ab, &single(&[1, 0])).unwrap()
        );
    }

    #[test]
    fn toy_a_exact() {
        let m = toy::toy_a();
        let aa = exact_logprob(&m, BlockRef::first(&[A, A]), Regime::AnyOrder).unwrap();
        assert_abs_diff_eq!(aa, 0.4f64.ln(), epsilon = 1e-12);
        let ab = exact_logprob(&m, BlockRef::first(&[A, B]), Regime::AnyOrder).unwrap();
        assert_abs_diff_eq!(ab, -2.07944, epsilon = 1e-5);
        let t1 = exact_logprob(&m, BlockRef::first(&[A, B]), Regime::Masked { steps: 1 }).unwrap();
        assert_abs_diff_eq!(t1, 0.25f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn scope_mismatch_is_an_error() {
        let m = toy::toy_a();
        assert!(logprob_given_single_order(&m, BlockRef::first(&[A, B]), &single(&[0, 1, 2])).is_err());
        assert!(logprob_given_single_order(&m, BlockRef::first(&[A, 2]), &single(&[0, 1])).is_err());
    }

    #[test]
    fn zero_conditional_is_negative_infinity() {
        let space = SeqSpace::single_block(2, 2).unwrap();
        let m = CondModel::from_fn(space, ModelMode::Fitted, 0.0, |_, _, _| vec![1.0, 0.0]).unwrap();
        let value = logprob_given_single_order(&m, BlockRef::first(&[A, B]), &single(&[0, 1])).unwrap();
        assert_eq!(value, f64::NEG_INFINITY);
        assert!(LogLik::exact(value).is_impossible());
        assert_eq!(exact_logprob(&m, BlockRef::first(&[A, B]), Regime::AnyOrder).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bayes_conditionals_of_toy_a_joint() {
        let joint = toy::toy_a_joint();
        let m = bayes_model_from_joint(&joint).unwrap();
        let ctx = Context { prev: None, cells: vec![Some(A), None] };
        assert_abs_diff_eq!(m.conditional(&ctx, 1).unwrap()[A], 0.8, epsilon = 1e-12);
        let ctx = Context { prev: None, cells: vec![None, Some(B)] };
        // p(x¹=A | x²=B) = 0.1 / 0.45
        assert_abs_diff_eq!(m.conditional(&ctx, 0).unwrap()[A], 0.1 / 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(m.conditional(&Context::empty(2), 1).unwrap()[A], 0.55, epsilon = 1e-12);
    }

    #[test]
    fn uniform_joint_gives_uniform_conditionals() {
        let space = SeqSpace::new(3, 4, 2).unwrap();
        let width = 9;
        let joint = GroundTruthJoint::new(space, vec![1.0 / width as f64; width], None).unwrap();
        let m = bayes_model_from_joint(&joint).unwrap();
        assert!(m.entries().all(|(_, _, _, p)| p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12)));
    }

    #[test]
    fn bayes_model_is_order_invariant() {
        let space = SeqSpace::single_block(3, 4).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::RandomJoint, 0.7, &mut seeded(5)).unwrap();
        let m = bayes_model_from_joint(&joint).unwrap();
        let bank = enumerate_single_orders(4).unwrap();
        for x in Sequence::enumerate(&space).unwrap() {
            let block = BlockRef::first(x.tokens());
            let truth = joint.log_prob(&x);
            for order in bank.orders() {
                assert_abs_diff_eq!(logprob_given_order(&m, block, order).unwrap(), truth, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(exact_logprob(&m, block, Regime::AnyOrder).unwrap(), truth, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalization_over_the_space() {
        let space = SeqSpace::single_block(3, 3).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::RandomJoint, 1.0, &mut seeded(8)).unwrap();
        let m = perturb_model(&bayes_model_from_joint(&joint).unwrap(), 0.6, &mut seeded(9)).unwrap();
        for regime in [Regime::AnyOrder, Regime::Masked { steps: 1 }, Regime::Masked { steps: 2 }, Regime::Masked { steps: 4 }] {
            let total: f64 = Sequence::enumerate(&space)
                .unwrap()
                .iter()
                .map(|x| exact_logprob(&m, BlockRef::first(x.tokens()), regime).unwrap().exp())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn exact_dp_matches_enumeration_for_grouped_orders() {
        let space = SeqSpace::single_block(2, 3).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::RandomJoint, 1.0, &mut seeded(1)).unwrap();
        let m = perturb_model(&bayes_model_from_joint(&joint).unwrap(), 0.8, &mut seeded(2)).unwrap();
        for steps in 1..=4 {
            let bank = enumerate_grouped_orders(3, steps).unwrap();
            for x in Sequence::enumerate(&space).unwrap() {
                let block = BlockRef::first(x.tokens());
                let brute: f64 = bank
                    .orders()
                    .iter()
                    .zip(bank.weights())
                    .map(|(o, w)| w * logprob_given_order(&m, block, o).unwrap().exp())
                    .sum();
                let dp = exact_logprob(&m, block, Regime::Masked { steps }).unwrap();
                assert_abs_diff_eq!(dp, brute.ln(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn all_singleton_groups_reduce_to_single_orders() {
        let m = toy::stress_model(4);
        let x: Vec<usize> = vec![0, 3, 2, 1, 1, 0];
        for order in enumerate_single_orders(6).unwrap().orders().iter().step_by(37) {
            let Order::Single(s) = order else { unreachable!() };
            let g = GroupedOrder::from_single(s);
            assert_eq!(
                logprob_given_grouped_order(&m, BlockRef::first(&x), &g).unwrap(),
                logprob_given_single_order(&m, BlockRef::first(&x), s).unwrap()
            );
        }
    }

    #[test]
    fn arm_identity_order_is_the_chain_rule() {
        let joint = toy::toy_a_joint();
        let corpus = joint.sample_corpus(&mut seeded(4), 500);
        let arm = fit_arm(*joint.space(), &corpus, 1.0).unwrap();
        let x = [A, B];
        let chain = arm.conditional(&Context::empty(2), 0).unwrap()[A].ln()
            + arm.conditional(&Context { prev: None, cells: vec![Some(A), None] }, 1).unwrap()[B].ln();
        let value = logprob_given_single_order(&arm, BlockRef::first(&x), &SingleOrder::identity(2)).unwrap();
        assert_eq!(value, chain);
    }

    #[test]
    fn fitting_limits() {
        let space = SeqSpace::single_block(2, 2).unwrap();
        let x = Sequence::new(&space, vec![A, B]).unwrap();
        let corpus = vec![x.clone(); 10];
        let point = fit_tabular(space, &corpus, MaskPlan::All, 0.0).unwrap();
        assert_eq!(point.conditional(&Context::empty(2), 0).unwrap(), &[1.0, 0.0]);
        assert_eq!(point.conditional(&Context { prev: None, cells: vec![Some(A), None] }, 1).unwrap(), &[0.0, 1.0]);
        // unobserved context falls back to uniform
        assert_eq!(point.conditional(&Context { prev: None, cells: vec![Some(B), None] }, 1).unwrap(), &[0.5, 0.5]);
        let smooth = fit_tabular(space, &corpus, MaskPlan::All, 1e12).unwrap();
        assert!(smooth.entries().all(|(_, _, _, p)| (p[0] - 0.5).abs() < 1e-9));
        assert!(matches!(fit_tabular(space, &[], MaskPlan::All, 1.0), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn fitting_converges_to_bayes_conditionals() {
        let joint = toy::toy_a_joint();
        let corpus = joint.sample_corpus(&mut seeded(77), 100_000);
        let bayes = bayes_model_from_joint(&joint).unwrap();
        for plan in [MaskPlan::All, MaskPlan::Sampled { per_example: 2, seed: 3 }] {
            let fitted = fit_tabular(*joint.space(), &corpus, plan, 1.0).unwrap();
            for ((_, _, _, p), (_, _, _, q)) in fitted.entries().zip(bayes.entries()) {
                for (a, b) in p.iter().zip(q) {
                    assert!((a - b).abs() < 0.02, "{p:?} vs {q:?}");
                }
            }
        }
    }

    #[test]
    fn sampling_matches_the_joint() {
        let joint = toy::toy_a_joint();
        let m = bayes_model_from_joint(&joint).unwrap();
        let space = *joint.space();
        let mut rng = seeded(12);
        let draws = 100_000;
        for order in [Order::Single(single(&[1, 0])), GroupedOrder::new(2, vec![vec![0], vec![1]]).unwrap().into()] {
            let mut hist = [0usize; 4];
            for _ in 0..draws {
                let x = sample_sequence(&m, &mut rng, &order).unwrap();
                hist[encode_base(x.tokens(), 2)] += 1;
            }
            let tv: f64 = Sequence::enumerate(&space)
                .unwrap()
                .iter()
                .enumerate()
                .map(|(i, x)| (hist[i] as f64 / draws as f64 - joint.log_prob(x).exp()).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "total variation {tv}");
        }
        let point = CondModel::from_fn(space, ModelMode::Fitted, 0.0, |_, _, _| vec![0.0, 1.0]).unwrap();
        for _ in 0..10 {
            let x = sample_from_mixture(&point, &mut rng, Regime::Masked { steps: 2 }).unwrap();
            assert_eq!(x.tokens(), &[B, B]);
        }
        let a = sample_from_mixture(&m, &mut seeded(5), Regime::AnyOrder).unwrap();
        let b = sample_from_mixture(&m, &mut seeded(5), Regime::AnyOrder).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturbation() {
        let bayes = bayes_model_from_joint(&toy::toy_a_joint()).unwrap();
        let same = perturb_model(&bayes, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(same.probs, bayes.probs);
        assert_eq!(same.mode(), ModelMode::Perturbed { epsilon: 0.0 });

        // ε = 1 keeps only the random vectors: two draws with the same stream agree,
        // and the original tables no longer matter.
        let uniform = CondModel::uniform(*bayes.space()).unwrap();
        let r1 = perturb_model(&bayes, 1.0, &mut seeded(6)).unwrap();
        let r2 = perturb_model(&uniform, 1.0, &mut seeded(6)).unwrap();
        for (a, b) in r1.probs.iter().zip(&r2.probs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }

        let perturbed = perturb_model(&bayes, 0.3, &mut seeded(2)).unwrap();
        let bank = enumerate_single_orders(2).unwrap();
        let varies = Sequence::enumerate(bayes.space()).unwrap().iter().any(|x| {
            let p: Vec<f64> = bank
                .orders()
                .iter()
                .map(|o| logprob_given_order(&perturbed, BlockRef::first(x.tokens()), o).unwrap().exp())
                .collect();
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            p.iter().map(|q| (q - mean).powi(2)).sum::<f64>() > 0.0
        });
        assert!(varies);
        assert!(perturb_model(&bayes, 1.5, &mut seeded(2)).is_err());
    }

    #[test]
    fn independent_blocks_compose() {
        let block_space = SeqSpace::single_block(2, 3).unwrap();
        let two_block = SeqSpace::new(2, 6, 3).unwrap();
        let single_joint = GroundTruthJoint::random(block_space, JointKind::RandomJoint, 1.0, &mut seeded(21)).unwrap();
        let pair_joint = GroundTruthJoint::random(two_block, JointKind::RandomJoint, 1.0, &mut seeded(21)).unwrap();
        let single = bayes_model_from_joint(&single_joint).unwrap();
        let pair = bayes_model_from_joint(&pair_joint).unwrap();
        let x = Sequence::new(&two_block, vec![0, 1, 1, 0, 1, 1]).unwrap();
        let half = exact_logprob(&single, BlockRef::first(&[0, 1, 1]), Regime::AnyOrder).unwrap();
        let full = exact_logprob_sequence(&pair, &x, Regime::AnyOrder).unwrap();
        assert_abs_diff_eq!(full, 2.0 * half, epsilon = 1e-12);
        assert_abs_diff_eq!(full, pair_joint.log_prob(&x), epsilon = 1e-12);
    }

    #[test]
    fn single_block_composition_is_identity() {
        let m = toy::toy_a();
        let space = *m.space();
        let x = Sequence::new(&space, vec![A, B]).unwrap();
        let whole = logprob_block(&m, &x, |b| exact_logprob(&m, b, Regime::AnyOrder)).unwrap();
        assert_eq!(whole, exact_logprob(&m, BlockRef::first(&[A, B]), Regime::AnyOrder).unwrap());
    }

    #[test]
    fn block_markov_model_matches_the_joint() {
        let space = SeqSpace::new(2, 6, 2).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::BlockMarkov, 1.0, &mut seeded(31)).unwrap();
        let m = bayes_model_from_joint(&joint).unwrap();
        for x in Sequence::enumerate(&space).unwrap() {
            let value = exact_logprob_sequence(&m, &x, Regime::AnyOrder).unwrap();
            assert_abs_diff_eq!(value, joint.log_prob(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let space = SeqSpace::new(2, 4, 2).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::BlockMarkov, 1.0, &mut seeded(3)).unwrap();
        let m = perturb_model(&bayes_model_from_joint(&joint).unwrap(), 0.25, &mut seeded(4)).unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(CondModel::from_json(&text).unwrap(), m);
        let joint_text = serde_json::to_string(&joint).unwrap();
        assert_eq!(serde_json::from_str::<GroundTruthJoint>(&joint_text).unwrap(), joint);
        assert!(CondModel::from_json(&text.replace("tube-condmodel", "other")).is_err());
    }

    #[test]
    fn corpus_text() {
        let space = SeqSpace::single_block(3, 2).unwrap();
        let empty = write_corpus(&space, &[]);
        assert_eq!(empty, "# corpus vocab_size=3 length=2 count=0\n");
        assert!(read_corpus(&space, &empty).unwrap().is_empty());
        let corpus = vec![Sequence::new(&space, vec![0, 2]).unwrap(), Sequence::new(&space, vec![1, 1]).unwrap()];
        let text = write_corpus(&space, &corpus);
        assert!(text.ends_with("1 3\n2 2\n"));
        assert_eq!(read_corpus(&space, &text).unwrap(), corpus);
        assert!(read_corpus(&space, "# corpus vocab_size=3 length=2 count=1\n1 4\n").is_err());
    }

    #[test]
    fn joint_validation() {
        let space = SeqSpace::single_block(2, 1).unwrap();
        assert!(GroundTruthJoint::new(space, vec![0.5, 0.6], None).is_err());
        assert!(GroundTruthJoint::new(space, vec![1.5, -0.5], None).is_err());
        let j = GroundTruthJoint::random(SeqSpace::single_block(2, 2).unwrap(), JointKind::RandomJoint, 1.0, &mut seeded(0)).unwrap();
        assert_abs_diff_eq!(j.block_distribution(None).iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }
}
