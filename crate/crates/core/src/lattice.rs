//! Bitmask subsets of the attribute index set and the combinatorial helpers
//! used by the subset-lattice computations.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Default cap on the attribute count; the engine allocates Theta(n * 2^n)
/// log-weights, so an explicit opt-in is required beyond this.
pub const DEFAULT_NODE_CAP: usize = 24;

/// Hard cap even with the opt-in flag.
pub const MAX_NODE_CAP: usize = 26;

/// A subset of the attribute indices `0..n-1`, stored as a bitmask.
///
/// Bit `i` set means attribute `i` is in the set. Attributes are 0-indexed
/// throughout, including all file formats.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_mask(mask: u32) -> Self {
        NodeSet(mask)
    }

    /// The full set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 32);
        if n == 32 {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        NodeSet(1 << i)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    /// The mask as an array index.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[must_use]
    pub fn insert(self, i: usize) -> Self {
        NodeSet(self.0 | 1 << i)
    }

    #[must_use]
    pub fn remove(self, i: usize) -> Self {
        NodeSet(self.0 & !(1 << i))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        NodeSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: Self) -> Self {
        NodeSet(self.0 & other.0)
    }

    /// Elements of `self` not in `other`.
    #[must_use]
    pub fn difference(self, other: Self) -> Self {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Reindex into the universe with element `i` deleted: bits above `i`
    /// shift down by one. `self` must not contain `i`.
    #[must_use]
    pub fn compress(self, i: usize) -> Self {
        debug_assert!(!self.contains(i));
        let low = self.0 & ((1u32 << i) - 1);
        NodeSet(low | (self.0 >> (i + 1)) << i)
    }

    /// Inverse of [`compress`](Self::compress): reopen a gap at position `i`
    /// (the result does not contain `i`).
    #[must_use]
    pub fn expand(self, i: usize) -> Self {
        let low = self.0 & ((1u32 << i) - 1);
        NodeSet(low | (self.0 >> i) << (i + 1))
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|i| i as u32))
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let indices = Vec::<u32>::deserialize(deserializer)?;
        let mut set = NodeSet::EMPTY;
        for i in indices {
            if i >= 32 {
                return Err(D::Error::custom(format!("node index {i} out of range")));
            }
            set = set.insert(i as usize);
        }
        Ok(set)
    }
}

/// Attribute count and maximum indegree, validated against the memory guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    n: usize,
    k: usize,
}

impl ProblemDims {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        Self::with_cap(n, k, false)
    }

    /// `allow_large` raises the cap from [`DEFAULT_NODE_CAP`] to [`MAX_NODE_CAP`].
    pub fn with_cap(n: usize, k: usize, allow_large: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "attribute count n must be at least 1".into(),
            ));
        }
        let cap = if allow_large {
            MAX_NODE_CAP
        } else {
            DEFAULT_NODE_CAP
        };
        if n > cap {
            return Err(Error::CapExceeded { n, cap });
        }
        if k >= n {
            return Err(Error::InvalidArgument(format!(
                "maximum indegree k={k} must be at most n-1={}",
                n - 1
            )));
        }
        Ok(ProblemDims { n, k })
    }

    pub fn n(self) -> usize {
        self.n
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn full_set(self) -> NodeSet {
        NodeSet::full(self.n)
    }

    /// `2^n`, the size of a full lattice table.
    pub fn lattice_len(self) -> usize {
        1 << self.n
    }
}

/// Every subset of `ground` with at most `max_size` elements, in ascending
/// (cardinality, mask) order. `max_size` is clamped to `|ground|`.
///
/// The order is part of the contract: callers rely on it for reproducible
/// table layouts and output files.
pub fn enumerate_subsets(ground: NodeSet, max_size: usize) -> SubsetsUpTo {
    let positions: Vec<u32> = ground.iter().map(|i| i as u32).collect();
    let max_size = max_size.min(positions.len());
    SubsetsUpTo {
        positions,
        max_size,
        size: 0,
        comb: 0,
        exhausted: false,
    }
}

pub struct SubsetsUpTo {
    positions: Vec<u32>,
    max_size: usize,
    size: usize,
    /// Current combination over `positions.len()` compressed bits.
    comb: u64,
    exhausted: bool,
}

impl SubsetsUpTo {
    fn advance(&mut self) {
        let t = self.positions.len();
        if self.size > 0 {
            // Gosper's hack: next mask with the same popcount.
            let u = self.comb & self.comb.wrapping_neg();
            let v = self.comb + u;
            let next = v | (((self.comb ^ v) / u) >> 2);
            if next < 1u64 << t {
                self.comb = next;
                return;
            }
        }
        self.size += 1;
        if self.size > self.max_size {
            self.exhausted = true;
        } else {
            self.comb = (1u64 << self.size) - 1;
        }
    }
}

impl Iterator for SubsetsUpTo {
    type Item = NodeSet;

    fn next(&mut self) -> Option<NodeSet> {
        if self.exhausted {
            return None;
        }
        let mut mask = 0u32;
        let mut c = self.comb;
        while c != 0 {
            let j = c.trailing_zeros() as usize;
            c &= c - 1;
            mask |= 1 << self.positions[j];
        }
        self.advance();
        Some(NodeSet(mask))
    }
}

/// Exact `C(n, k)` for `n <= 64`.
pub fn binomial(n: u32, k: u32) -> Result<u128> {
    if n > 64 {
        return Err(Error::InvalidArgument(format!(
            "binomial requires n <= 64, got n={n}"
        )));
    }
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 1..=k as u128 {
        // Exact at every step: c * (n - j + 1) is divisible by j.
        c = c
            .checked_mul(n as u128 - j + 1)
            .ok_or(Error::Overflow("binomial"))?
            / j;
    }
    Ok(c)
}

/// Exact partial sum of binomial coefficients `sum_{j=0..=k} C(n, j)`,
/// the number of subsets of an `n`-element set with at most `k` elements.
pub fn binomial_tail(n: u32, k: u32) -> Result<u128> {
    if n > 64 {
        return Err(Error::InvalidArgument(format!(
            "binomial_tail requires n <= 64, got n={n}"
        )));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "binomial_tail requires k <= n, got k={k}, n={n}"
        )));
    }
    let mut sum: u128 = 0;
    let mut c: u128 = 1;
    for j in 0..=k {
        if j > 0 {
            c = c
                .checked_mul((n - j + 1) as u128)
                .ok_or(Error::Overflow("binomial_tail"))?
                / j as u128;
        }
        sum = sum.checked_add(c).ok_or(Error::Overflow("binomial_tail"))?;
    }
    Ok(sum)
}

/// Upper bound `2^n * exp(-n/4 + k - k^2/n)` on [`binomial_tail`], valid
/// whenever `n > 2k`.
pub fn chernoff_tail_bound(n: u32, k: u32) -> Result<f64> {
    if n <= 2 * k {
        return Err(Error::InvalidArgument(format!(
            "chernoff_tail_bound requires n > 2k, got n={n}, k={k}"
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    Ok(nf.exp2() * (-nf / 4.0 + kf - kf * kf / nf).exp())
}
