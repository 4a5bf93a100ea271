//! Sequence spaces, orderings and block layouts.
//!
//! Positions and symbols are 0-based in memory. The text formats written by
//! [`OrderBank::to_text`] and the corpus reader use 1-based values.

use std::fmt;
use std::ops::Range;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest scope whose permutations may be enumerated.
pub const MAX_PERMUTATION_SCOPE: usize = 8;
/// Largest number of step assignments `T^n` that may be enumerated.
pub const MAX_GROUPED_ASSIGNMENTS: u128 = 1_000_000;

/// `{0..V}^L`, split into contiguous blocks of `block_size` positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SeqSpace {
    vocab_size: usize,
    length: usize,
    block_size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    vocab_size: usize,
    length: usize,
    block_size: Option<usize>,
}

impl TryFrom<RawSpace> for SeqSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SeqSpace::new(raw.vocab_size, raw.length, raw.block_size.unwrap_or(raw.length))
    }
}

impl From<SeqSpace> for RawSpace {
    fn from(space: SeqSpace) -> Self {
        RawSpace {
            vocab_size: space.vocab_size,
            length: space.length,
            block_size: Some(space.block_size),
        }
    }
}

impl SeqSpace {
    pub fn new(vocab_size: usize, length: usize, block_size: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::InvalidSpace(format!("vocabulary size {vocab_size} < 2")));
        }
        if vocab_size > u8::MAX as usize {
            return Err(Error::InvalidSpace(format!("vocabulary size {vocab_size} > 255")));
        }
        if block_size == 0 || block_size > length {
            return Err(Error::InvalidSpace(format!(
                "block size {block_size} outside 1..={length}"
            )));
        }
        if !length.is_multiple_of(block_size) {
            return Err(Error::InvalidSpace(format!(
                "block size {block_size} does not divide length {length}"
            )));
        }
        Ok(SeqSpace { vocab_size, length, block_size })
    }

    pub fn single_block(vocab_size: usize, length: usize) -> Result<Self> {
        Self::new(vocab_size, length, length)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.length / self.block_size
    }

    /// `V^L` as a checked count.
    pub fn cardinality(&self) -> Option<usize> {
        checked_pow(self.vocab_size, self.length)
    }

    /// Number of distinct blocks, `V^{L'}`.
    pub fn block_cardinality(&self) -> Option<usize> {
        checked_pow(self.vocab_size, self.block_size)
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// The `B` contiguous blocks of `space`, in order.
pub fn block_layout(space: &SeqSpace) -> Vec<Range<usize>> {
    let size = space.block_size();
    (0..space.num_blocks()).map(|b| b * size..(b + 1) * size).collect()
}

/// A token sequence validated against a [`SeqSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<usize>);

impl Sequence {
    pub fn new(space: &SeqSpace, tokens: Vec<usize>) -> Result<Self> {
        if tokens.len() != space.length() {
            return Err(Error::InvalidSequence(format!(
                "length {} != {}",
                tokens.len(),
                space.length()
            )));
        }
        if let Some(bad) = tokens.iter().find(|&&t| t >= space.vocab_size()) {
            return Err(Error::InvalidSequence(format!(
                "token {bad} outside vocabulary of size {}",
                space.vocab_size()
            )));
        }
        Ok(Sequence(tokens))
    }

    /// Decodes the base-`V` index used by joint tables (position 0 most significant).
    pub fn from_index(space: &SeqSpace, mut index: usize) -> Self {
        let v = space.vocab_size();
        let mut tokens = vec![0; space.length()];
        for slot in tokens.iter_mut().rev() {
            *slot = index % v;
            index /= v;
        }
        Sequence(tokens)
    }

    /// All `V^L` sequences in index order.
    pub fn enumerate(space: &SeqSpace) -> Result<Vec<Sequence>> {
        let count = space.cardinality().ok_or_else(|| Error::CapExceeded {
            what: "sequence space".into(),
            cap: usize::MAX as u128,
        })?;
        Ok((0..count).map(|i| Sequence::from_index(space, i)).collect())
    }

    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<usize> {
        self.0
    }

    /// Splits into per-block views, each carrying the previous block's tokens.
    pub fn blocks<'a>(&'a self, space: &SeqSpace) -> Vec<BlockRef<'a>> {
        block_layout(space)
            .into_iter()
            .enumerate()
            .map(|(b, range)| BlockRef {
                prev: (b > 0).then(|| &self.0[range.start - space.block_size()..range.start]),
                tokens: &self.0[range],
            })
            .collect()
    }
}

pub(crate) fn encode_base(tokens: &[usize], base: usize) -> usize {
    tokens.iter().fold(0, |acc, &t| acc * base + t)
}

/// One block of a sequence and the immediately preceding block, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRef<'a> {
    pub prev: Option<&'a [usize]>,
    pub tokens: &'a [usize],
}

impl<'a> BlockRef<'a> {
    pub fn first(tokens: &'a [usize]) -> Self {
        BlockRef { prev: None, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A permutation of a scope's positions: `positions[t]` is revealed at step `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingleOrder(Vec<usize>);

impl SingleOrder {
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidOrder("empty scope".into()));
        }
        let mut seen = vec![false; n];
        for &p in &positions {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidOrder(format!("{positions:?} is not a permutation")));
            }
        }
        Ok(SingleOrder(positions))
    }

    pub fn identity(n: usize) -> Self {
        SingleOrder((0..n).collect())
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn scope(&self) -> usize {
        self.0.len()
    }
}

/// `T` disjoint, possibly empty position sets covering the scope; positions
/// in group `t` are revealed together at step `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupedOrder {
    scope: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupedOrder {
    pub fn new(scope: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if scope == 0 || groups.is_empty() {
            return Err(Error::InvalidOrder("grouped order needs a scope and T >= 1".into()));
        }
        let mut seen = vec![false; scope];
        for &p in groups.iter().flatten() {
            if p >= scope || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidOrder(format!(
                    "groups {groups:?} are not disjoint over 0..{scope}"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidOrder(format!("groups {groups:?} do not cover 0..{scope}")));
        }
        Ok(GroupedOrder { scope, groups })
    }

    /// Builds the groups as preimages of a per-position step assignment.
    pub fn from_assignment(assignment: &[usize], steps: usize) -> Result<Self> {
        if let Some(bad) = assignment.iter().find(|&&t| t >= steps) {
            return Err(Error::InvalidOrder(format!("step {bad} outside 0..{steps}")));
        }
        let mut groups = vec![Vec::new(); steps];
        for (position, &step) in assignment.iter().enumerate() {
            groups[step].push(position);
        }
        Self::new(assignment.len(), groups)
    }

    /// The all-singleton grouping that reveals positions in `order`.
    pub fn from_single(order: &SingleOrder) -> Self {
        GroupedOrder {
            scope: order.scope(),
            groups: order.positions().iter().map(|&p| vec![p]).collect(),
        }
    }

    pub fn scope(&self) -> usize {
        self.scope
    }

    pub fn steps(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Returns the induced permutation when every group is a singleton.
    pub fn as_single(&self) -> Option<SingleOrder> {
        self.groups
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| (g.len() == 1).then(|| g[0]))
            .collect::<Option<Vec<_>>>()
            .map(SingleOrder)
    }
}

/// Either kind of latent ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Order {
    Single(SingleOrder),
    Grouped(GroupedOrder),
}

impl Order {
    pub fn scope(&self) -> usize {
        match self {
            Order::Single(o) => o.scope(),
            Order::Grouped(g) => g.scope(),
        }
    }

    /// Calls `f` once per reveal step with the positions revealed at that step.
    pub fn for_each_group(&self, mut f: impl FnMut(&[usize])) {
        match self {
            Order::Single(o) => o.positions().chunks(1).for_each(f),
            Order::Grouped(g) => g.groups().iter().for_each(|group| f(group)),
        }
    }
}

impl From<SingleOrder> for Order {
    fn from(o: SingleOrder) -> Self {
        Order::Single(o)
    }
}

impl From<GroupedOrder> for Order {
    fn from(g: GroupedOrder) -> Self {
        Order::Grouped(g)
    }
}

/// The latent-ordering family a model is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Uniform single-token permutations (AO-ARM).
    AnyOrder,
    /// `steps` reveal steps with iid uniform step assignment per position (MDM, NFE = steps).
    Masked { steps: usize },
}

impl Regime {
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Order {
        match *self {
            Regime::AnyOrder => sample_single_order(rng, n).into(),
            Regime::Masked { steps } => sample_grouped_order(rng, n, steps).into(),
        }
    }

    pub fn enumerate(&self, n: usize) -> Result<OrderBank> {
        match *self {
            Regime::AnyOrder => enumerate_single_orders(n),
            Regime::Masked { steps } => enumerate_grouped_orders(n, steps),
        }
    }

    /// Size of the ordering space over an `n`-position scope, if it fits in `u128`.
    pub fn support_size(&self, n: usize) -> Option<u128> {
        match *self {
            Regime::AnyOrder => (1..=n as u128).try_fold(1u128, |a, k| a.checked_mul(k)),
            Regime::Masked { steps } => (0..n).try_fold(1u128, |a, _| a.checked_mul(steps as u128)),
        }
    }

    pub fn is_enumerable(&self, n: usize) -> bool {
        match *self {
            Regime::AnyOrder => (1..=MAX_PERMUTATION_SCOPE).contains(&n),
            Regime::Masked { steps } => {
                steps >= 1 && self.support_size(n).is_some_and(|s| s <= MAX_GROUPED_ASSIGNMENTS)
            }
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::AnyOrder => write!(f, "ao-arm"),
            Regime::Masked { steps } => write!(f, "mdm:{steps}"),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ao-arm" => Ok(Regime::AnyOrder),
            _ => s
                .strip_prefix("mdm:")
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|&t| t >= 1)
                .map(|steps| Regime::Masked { steps })
                .ok_or_else(|| Error::Config(format!("unknown regime {s:?} (expected ao-arm or mdm:<T>)"))),
        }
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Regime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Enumerated,
    Sampled { seed: u64 },
}

/// A list of orderings over one scope together with their prior weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderBank {
    scope: usize,
    steps: Option<usize>,
    orders: Vec<Order>,
    weights: Vec<f64>,
    provenance: Provenance,
}

impl OrderBank {
    /// Draws `count` orderings iid from the regime's prior.
    pub fn sample(regime: Regime, n: usize, count: usize, seed: u64) -> Self {
        let mut rng = crate::rng::seeded(seed);
        let orders: Vec<Order> = (0..count).map(|_| regime.sample(&mut rng, n)).collect();
        let weights = vec![1.0 / count.max(1) as f64; count];
        OrderBank {
            scope: n,
            steps: match regime {
                Regime::AnyOrder => None,
                Regime::Masked { steps } => Some(steps),
            },
            orders,
            weights,
            provenance: Provenance::Sampled { seed },
        }
    }

    pub fn scope(&self) -> usize {
        self.scope
    }

    pub fn steps(&self) -> Option<usize> {
        self.steps
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    /// Prior weight of each ordering; sums to one for enumerated banks.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Line-oriented text form: a header line, then one ordering per line.
    /// Single orders are space-separated 1-based positions; grouped orders are
    /// `t:p,p,...` tokens with 1-based steps and positions.
    pub fn to_text(&self) -> String {
        let steps = self.steps.map_or("-".to_string(), |t| t.to_string());
        let (provenance, seed) = match self.provenance {
            Provenance::Enumerated => ("enumerated", "-".to_string()),
            Provenance::Sampled { seed } => ("sampled", seed.to_string()),
        };
        let mut out = format!(
            "# order-bank scope={} steps={steps} provenance={provenance} seed={seed} count={}\n",
            self.scope,
            self.orders.len()
        );
        for order in &self.orders {
            let line = match order {
                Order::Single(o) => o.positions().iter().map(|p| (p + 1).to_string()).join(" "),
                Order::Grouped(g) => g
                    .groups()
                    .iter()
                    .enumerate()
                    .map(|(t, group)| {
                        format!("{}:{}", t + 1, group.iter().map(|p| (p + 1).to_string()).join(","))
                    })
                    .join(" "),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidOrder(format!("order bank text: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let fields: std::collections::HashMap<&str, &str> = header
            .strip_prefix("# order-bank")
            .ok_or_else(|| bad(format!("bad header {header:?}")))?
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("header lacks {k}")));
        let scope: usize = field("scope")?.parse().map_err(|_| bad("scope".into()))?;
        let steps = match field("steps")? {
            "-" => None,
            t => Some(t.parse::<usize>().map_err(|_| bad("steps".into()))?),
        };
        let provenance = match (field("provenance")?, field("seed")?) {
            ("enumerated", _) => Provenance::Enumerated,
            ("sampled", seed) => Provenance::Sampled {
                seed: seed.parse().map_err(|_| bad("seed".into()))?,
            },
            (other, _) => return Err(bad(format!("provenance {other}"))),
        };
        let parse_pos = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&p| p >= 1)
                .map(|p| p - 1)
                .ok_or_else(|| bad(format!("position {s:?}")))
        };
        let mut orders = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let order = match steps {
                None => Order::Single(SingleOrder::new(
                    line.split_whitespace().map(parse_pos).collect::<Result<_>>()?,
                )?),
                Some(t) => {
                    let mut groups = vec![Vec::new(); t];
                    for token in line.split_whitespace() {
                        let (step, positions) =
                            token.split_once(':').ok_or_else(|| bad(format!("token {token:?}")))?;
                        let step = parse_pos(step)?;
                        let slot = groups.get_mut(step).ok_or_else(|| bad(format!("step {}", step + 1)))?;
                        for p in positions.split(',').filter(|p| !p.is_empty()) {
                            slot.push(parse_pos(p)?);
                        }
                    }
                    Order::Grouped(GroupedOrder::new(scope, groups)?)
                }
            };
            if order.scope() != scope {
                return Err(bad(format!("ordering scope {} != {scope}", order.scope())));
            }
            orders.push(order);
        }
        let weight = 1.0 / orders.len().max(1) as f64;
        Ok(OrderBank { scope, steps, weights: vec![weight; orders.len()], orders, provenance })
    }
}

/// All `n!` permutations of `0..n` in lexicographic order.
pub fn enumerate_single_orders(n: usize) -> Result<OrderBank> {
    if n == 0 {
        return Err(Error::InvalidOrder("empty scope".into()));
    }
    if n > MAX_PERMUTATION_SCOPE {
        return Err(Error::CapExceeded {
            what: format!("permutations of a {n}-position scope"),
            cap: MAX_PERMUTATION_SCOPE as u128,
        });
    }
    let orders: Vec<Order> = (0..n)
        .permutations(n)
        .map(|p| Order::Single(SingleOrder(p)))
        .collect();
    let weight = 1.0 / orders.len() as f64;
    Ok(OrderBank {
        scope: n,
        steps: None,
        weights: vec![weight; orders.len()],
        orders,
        provenance: Provenance::Enumerated,
    })
}

/// All `T^n` step assignments, lexicographic in (step of position 0, step of position 1, ...).
pub fn enumerate_grouped_orders(n: usize, steps: usize) -> Result<OrderBank> {
    if n == 0 || steps == 0 {
        return Err(Error::InvalidOrder("grouped enumeration needs n >= 1 and T >= 1".into()));
    }
    let total = Regime::Masked { steps }.support_size(n);
    if total.is_none_or(|t| t > MAX_GROUPED_ASSIGNMENTS) {
        return Err(Error::CapExceeded {
            what: format!("{steps}^{n} step assignments"),
            cap: MAX_GROUPED_ASSIGNMENTS,
        });
    }
    let orders: Vec<Order> = itertools::repeat_n(0..steps, n)
        .multi_cartesian_product()
        .map(|a| GroupedOrder::from_assignment(&a, steps).map(Order::Grouped))
        .collect::<Result<_>>()?;
    let weight = (steps as f64).powi(-(n as i32));
    Ok(OrderBank {
        scope: n,
        steps: Some(steps),
        weights: vec![weight; orders.len()],
        orders,
        provenance: Provenance::Enumerated,
    })
}

/// Uniform permutation by Fisher–Yates.
pub fn sample_single_order(rng: &mut impl Rng, n: usize) -> SingleOrder {
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(rng);
    SingleOrder(positions)
}

/// Assigns every position an independent uniform step in `0..steps`.
pub fn sample_grouped_order(rng: &mut impl Rng, n: usize, steps: usize) -> GroupedOrder {
    let mut groups = vec![Vec::new(); steps];
    for position in 0..n {
        groups[rng.random_range(0..steps)].push(position);
    }
    GroupedOrder { scope: n, groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn space_validation() {
        assert!(SeqSpace::new(1, 4, 4).is_err());
        assert!(SeqSpace::new(2, 6, 4).is_err());
        assert!(SeqSpace::new(2, 4, 0).is_err());
        assert!(SeqSpace::new(2, 4, 5).is_err());
        let s = SeqSpace::new(3, 12, 4).unwrap();
        assert_eq!(s.num_blocks(), 3);
    }

    #[test]
    fn layouts() {
        let s = SeqSpace::new(2, 8, 4).unwrap();
        assert_eq!(block_layout(&s), vec![0..4, 4..8]);
        let s = SeqSpace::new(2, 4, 4).unwrap();
        assert_eq!(block_layout(&s), vec![0..4]);
        let s = SeqSpace::new(2, 12, 4).unwrap();
        let layout = block_layout(&s);
        assert_eq!(layout.len(), 3);
        assert_eq!(layout.iter().map(|r| r.len()).sum::<usize>(), 12);
    }

    #[test]
    fn single_enumeration() {
        let bank = enumerate_single_orders(1).unwrap();
        assert_eq!(bank.orders(), &[Order::Single(SingleOrder(vec![0]))]);
        assert_eq!(enumerate_single_orders(4).unwrap().len(), 24);
        let bank = enumerate_single_orders(3).unwrap();
        assert_eq!(bank.len(), 6);
        assert_eq!(bank.orders()[0], Order::Single(SingleOrder(vec![0, 1, 2])));
        assert_eq!(bank.orders()[5], Order::Single(SingleOrder(vec![2, 1, 0])));
        match enumerate_single_orders(9) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, 8),
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn grouped_enumeration() {
        let bank = enumerate_grouped_orders(2, 2).unwrap();
        assert_eq!(bank.len(), 4);
        assert!(bank.weights().iter().all(|&w| w == 0.25));
        let bank = enumerate_grouped_orders(1, 5).unwrap();
        assert_eq!(bank.len(), 5);
        assert!(bank.weights().iter().all(|&w| (w - 0.2).abs() < 1e-15));
        let bank = enumerate_grouped_orders(3, 2).unwrap();
        assert_eq!(bank.len(), 8);
        assert!((bank.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(enumerate_grouped_orders(21, 2).is_err());
    }

    #[test]
    fn grouped_validation() {
        assert!(GroupedOrder::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(GroupedOrder::new(3, vec![vec![0], vec![2]]).is_err());
        assert!(GroupedOrder::new(3, vec![]).is_err());
        let g = GroupedOrder::new(3, vec![vec![], vec![2, 0], vec![], vec![1]]).unwrap();
        assert_eq!(g.steps(), 4);
        assert_eq!(g.as_single(), None);
        let g = GroupedOrder::new(2, vec![vec![1], vec![], vec![0]]).unwrap();
        assert_eq!(g.as_single(), Some(SingleOrder(vec![1, 0])));
    }

    #[test]
    fn single_step_grouping_is_deterministic() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let g = sample_grouped_order(&mut rng, 5, 1);
            assert_eq!(g.groups(), &[vec![0, 1, 2, 3, 4]]);
        }
    }

    #[test]
    fn fixed_seed_replays() {
        let a = sample_single_order(&mut seeded(11), 7);
        let b = sample_single_order(&mut seeded(11), 7);
        assert_eq!(a, b);
        assert_eq!(sample_single_order(&mut seeded(11), 1).positions(), &[0]);
        let bank_a = OrderBank::sample(Regime::Masked { steps: 3 }, 4, 10, 5);
        let bank_b = OrderBank::sample(Regime::Masked { steps: 3 }, 4, 10, 5);
        assert_eq!(bank_a, bank_b);
    }

    // Frequencies frozen from exact enumeration: 2 permutations of 2
    // positions, 2^2 step assignments, 2!/2^2 injective assignments.
    #[test]
    fn sampling_frequencies() {
        let mut rng = seeded(2024);
        let draws = 100_000;
        let identity = (0..draws)
            .filter(|_| sample_single_order(&mut rng, 2).positions() == [0, 1])
            .count();
        assert!((identity as f64 / draws as f64 - 0.5).abs() < 0.01);

        let mut counts = [0usize; 4];
        let mut singletons = 0;
        for _ in 0..draws {
            let g = sample_grouped_order(&mut rng, 2, 2);
            let step_of = |p: usize| g.groups().iter().position(|grp| grp.contains(&p)).unwrap();
            counts[step_of(0) * 2 + step_of(1)] += 1;
            singletons += usize::from(g.groups().iter().all(|grp| grp.len() == 1));
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
        assert!((singletons as f64 / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn bank_text_round_trip() {
        let bank = enumerate_grouped_orders(3, 2).unwrap();
        let text = bank.to_text();
        assert!(text.starts_with("# order-bank scope=3 steps=2 provenance=enumerated"));
        assert!(text.lines().nth(1).unwrap().contains("1:1,2,3 2:"));
        assert_eq!(OrderBank::from_text(&text).unwrap(), bank);
        let bank = OrderBank::sample(Regime::AnyOrder, 5, 4, 99);
        assert_eq!(OrderBank::from_text(&bank.to_text()).unwrap(), bank);
    }

    #[test]
    fn regime_strings() {
        assert_eq!("ao-arm".parse::<Regime>().unwrap(), Regime::AnyOrder);
        assert_eq!("mdm:4".parse::<Regime>().unwrap(), Regime::Masked { steps: 4 });
        assert!("mdm:0".parse::<Regime>().is_err());
        assert_eq!(Regime::Masked { steps: 2 }.to_string(), "mdm:2");
    }

    #[test]
    fn sequence_blocks_carry_previous_block() {
        let space = SeqSpace::new(3, 6, 2).unwrap();
        let x = Sequence::new(&space, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let blocks = x.blocks(&space);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].prev, None);
        assert_eq!(blocks[2].prev, Some(&[2usize, 2][..]));
        assert_eq!(blocks[2].tokens, &[1, 0]);
        assert!(Sequence::new(&space, vec![0, 1, 3, 0, 0, 0]).is_err());
        assert_eq!(Sequence::from_index(&space, 5).tokens(), &[0, 0, 0, 0, 1, 2]);
    }
}
