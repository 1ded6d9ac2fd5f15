//! Combinatorics of the chaos index set: finitely supported multi-indices,
//! graded-lexicographic enumeration, factorials and `(2N)^{-p*gamma}` weights.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of indices `enumerate` will materialize.
pub const MAX_ENUMERATED_INDICES: u128 = 10_000_000;

/// A finitely supported sequence of non-negative integers, stored sparsely.
///
/// Positions are 1-based; zero counts are never stored. Equality is equality
/// of the sparse maps, and the total order is graded lexicographic: lower
/// total order first, and within one order the index with the larger count at
/// the first differing position comes first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: BTreeMap<usize, u32>,
    order: u32,
}

impl MultiIndex {
    /// The zero index (empty support).
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit index e(k) with a single 1 at 1-based position `k`.
    pub fn unit(k: usize) -> Self {
        assert!(k >= 1, "positions are 1-based");
        let mut entries = BTreeMap::new();
        entries.insert(k, 1);
        Self { entries, order: 1 }
    }

    /// Build from a dense count vector starting at position 1; zeros are dropped.
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut entries = BTreeMap::new();
        let mut order = 0u32;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                entries.insert(i + 1, c);
                order += c;
            }
        }
        Self { entries, order }
    }

    /// Total order |gamma|.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count at 1-based position `k` (0 if absent).
    pub fn count(&self, k: usize) -> u32 {
        self.entries.get(&k).copied().unwrap_or(0)
    }

    /// Largest position with a nonzero count (0 for the zero index).
    pub fn max_position(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    /// Iterate stored (position, count) pairs in increasing position.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().map(|(&k, &c)| (k, c))
    }

    /// Dense representation `[gamma_1, ..., gamma_len]`; positions beyond
    /// `len` must be zero or this panics.
    pub fn to_dense(&self, len: usize) -> Vec<u32> {
        assert!(
            self.max_position() <= len,
            "index supported beyond requested dense length"
        );
        let mut v = vec![0u32; len];
        for (k, c) in self.iter() {
            v[k - 1] = c;
        }
        v
    }

    /// gamma! = prod_k (gamma_k)!, as a float with an overflow guard.
    pub fn factorial(&self) -> Result<f64> {
        let mut acc = 1.0f64;
        for (_, c) in self.iter() {
            for j in 2..=c as u64 {
                acc *= j as f64;
            }
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::Overflow(format!(
                "factorial of multi-index {self} exceeds f64 range"
            )))
        }
    }

    /// log of the weight (2N)^{-p*gamma} = -p * sum_k gamma_k * ln(2k).
    pub fn log_weight_2n(&self, p: f64) -> f64 {
        let s: f64 = self
            .iter()
            .map(|(k, c)| c as f64 * (2.0 * k as f64).ln())
            .sum();
        -p * s
    }

    /// The weight (2N)^{-p*gamma} = prod_k (2k)^{-p*gamma_k}.
    ///
    /// Computed in log space; may underflow to 0 for large |gamma|.
    pub fn weight_2n(&self, p: f64) -> f64 {
        self.log_weight_2n(p).exp()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order.cmp(&other.order).then_with(|| {
            // Same grade: walk positions upward, larger count sorts earlier.
            let mut a = self.entries.iter().peekable();
            let mut b = other.entries.iter().peekable();
            loop {
                match (a.peek(), b.peek()) {
                    (None, None) => return Ordering::Equal,
                    // `a` exhausted means `a` has count 0 where `b` does not.
                    (None, Some(_)) => return Ordering::Greater,
                    (Some(_), None) => return Ordering::Less,
                    (Some(&(&ka, &ca)), Some(&(&kb, &cb))) => match ka.cmp(&kb) {
                        Ordering::Less => return Ordering::Less,
                        Ordering::Greater => return Ordering::Greater,
                        Ordering::Equal => {
                            if ca != cb {
                                return cb.cmp(&ca);
                            }
                            a.next();
                            b.next();
                        }
                    },
                }
            }
        })
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dense = self.to_dense(self.max_position());
        write!(f, "(")?;
        for (i, c) in dense.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dense = self.to_dense(self.max_position());
        let mut seq = serializer.serialize_seq(Some(dense.len()))?;
        for c in dense {
            seq.serialize_element(&c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dense = Vec::<u32>::deserialize(deserializer)?;
        Ok(Self::from_counts(&dense))
    }
}

/// All multi-indices with |gamma| <= max_order supported on 1..=max_dim,
/// in graded-lexicographic order, the zero index first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSet {
    pub max_order: u32,
    pub max_dim: usize,
    indices: Vec<MultiIndex>,
}

impl TruncationSet {
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, gamma: &MultiIndex) -> bool {
        gamma.order() <= self.max_order && gamma.max_position() <= self.max_dim
    }
}

/// Exact binomial(n, k) in u128, erroring on overflow.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul((n - k + i) as u128)
            .ok_or_else(|| Error::Overflow(format!("binomial({n}, {k})")))?;
        acc /= i as u128;
    }
    Ok(acc)
}

/// Cardinality of the (P, K) truncation: binomial(K + P, K).
pub fn truncation_cardinality(max_order: u32, max_dim: usize) -> Result<u128> {
    binomial(max_dim as u64 + max_order as u64, max_dim as u64)
}

/// Enumerate the truncated index set with |gamma| <= P on positions 1..=K.
///
/// Errors when the cardinality overflows or exceeds the materialization cap;
/// summing weights over larger sets is what [`weight_sum_truncated`] is for.
pub fn enumerate(max_order: u32, max_dim: usize) -> Result<TruncationSet> {
    if max_dim < 1 {
        return Err(Error::InvalidArgument(
            "truncation dimension K must be >= 1".into(),
        ));
    }
    let card = truncation_cardinality(max_order, max_dim)?;
    if card > MAX_ENUMERATED_INDICES {
        return Err(Error::Overflow(format!(
            "truncation (P={max_order}, K={max_dim}) holds {card} indices, \
             beyond the enumeration cap {MAX_ENUMERATED_INDICES}"
        )));
    }

    let mut indices = Vec::with_capacity(card as usize);
    let mut scratch = vec![0u32; max_dim];
    for total in 0..=max_order {
        push_compositions(total, 0, &mut scratch, &mut indices);
    }
    debug_assert_eq!(indices.len() as u128, card);
    Ok(TruncationSet {
        max_order,
        max_dim,
        indices,
    })
}

// Compositions of `remaining` over positions pos.. in graded-lex order:
// the largest count at the current position first.
fn push_compositions(
    remaining: u32,
    pos: usize,
    scratch: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex::from_counts(scratch));
        return;
    }
    for v in (0..=remaining).rev() {
        scratch[pos] = v;
        push_compositions(remaining - v, pos + 1, scratch, out);
    }
}

/// Sum of (2N)^{-p*gamma} over the truncation set, in stored order.
pub fn weight_partial_sum(p: f64, trunc: &TruncationSet) -> f64 {
    trunc.indices().iter().map(|g| g.weight_2n(p)).sum()
}

/// Same sum computed dimension-by-dimension without materializing indices.
///
/// A truncated-degree product over positions: after processing position k the
/// accumulator holds, per total order j, the sum of weights of all indices
/// supported on 1..=k with |gamma| = j.
pub fn weight_sum_truncated(p: f64, max_order: u32, max_dim: usize) -> f64 {
    let cap = max_order as usize;
    let mut by_order = vec![0.0f64; cap + 1];
    by_order[0] = 1.0;
    for k in 1..=max_dim {
        let w = (2.0 * k as f64).powf(-p);
        let mut next = vec![0.0f64; cap + 1];
        for j in 0..=cap {
            let mut wm = 1.0;
            for m in 0..=j {
                next[j] += by_order[j - m] * wm;
                wm *= w;
            }
        }
        by_order = next;
    }
    by_order.iter().sum()
}
