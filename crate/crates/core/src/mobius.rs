//! Log-domain weights and fast truncated subset-sum (zeta/Möbius) transforms
//! over the lattice of subsets of `{0, .., n-1}`.
//!
//! All scores in this crate are products of probabilities and nonnegative
//! prior factors, which underflow f64 long before the interesting problem
//! sizes; every table therefore stores natural logarithms, with a dedicated
//! bottom element for log 0.

use crate::error::{Error, Result};
use crate::lattice::{binomial_tail, enumerate_subsets, NodeSet};
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, MulAssign};

/// Natural logarithm of a nonnegative quantity. [`LogWeight::ZERO`] encodes
/// log 0; finite values encode positive reals. Positive infinity and NaN are
/// excluded by construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    /// The weight 0 (log-domain bottom), the additive identity.
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    /// The weight 1 (log 1 = 0), the multiplicative identity.
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan() && ln != f64::INFINITY);
        LogWeight(ln)
    }

    /// From a nonnegative linear-scale value.
    pub fn from_value(value: f64) -> Self {
        debug_assert!(value >= 0.0);
        LogWeight(value.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// Back to linear scale (may underflow to 0.0 or overflow to inf).
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Stable `log(exp(a) + exp(b))`: the larger exponent is factored out, so the
/// result never overflows and [`LogWeight::ZERO`] acts as identity.
#[inline]
pub fn log_sum(a: LogWeight, b: LogWeight) -> LogWeight {
    if a.0 == f64::NEG_INFINITY && b.0 == f64::NEG_INFINITY {
        return LogWeight::ZERO;
    }
    if a.0 > b.0 {
        LogWeight(a.0 + (b.0 - a.0).exp().ln_1p())
    } else {
        LogWeight(b.0 + (a.0 - b.0).exp().ln_1p())
    }
}

impl Add for LogWeight {
    type Output = LogWeight;
    /// Addition of the underlying nonnegative quantities.
    fn add(self, rhs: LogWeight) -> LogWeight {
        log_sum(self, rhs)
    }
}

impl AddAssign for LogWeight {
    fn add_assign(&mut self, rhs: LogWeight) {
        *self = log_sum(*self, rhs);
    }
}

impl Mul for LogWeight {
    type Output = LogWeight;
    /// Multiplication of the underlying quantities (log-domain addition).
    fn mul(self, rhs: LogWeight) -> LogWeight {
        LogWeight(self.0 + rhs.0)
    }
}

impl MulAssign for LogWeight {
    fn mul_assign(&mut self, rhs: LogWeight) {
        self.0 += rhs.0;
    }
}

impl Div for LogWeight {
    type Output = LogWeight;
    /// Division of the underlying quantities; the divisor must be nonzero.
    fn div(self, rhs: LogWeight) -> LogWeight {
        debug_assert!(!rhs.is_zero());
        LogWeight(self.0 - rhs.0)
    }
}

impl Sum for LogWeight {
    fn sum<I: Iterator<Item = LogWeight>>(iter: I) -> LogWeight {
        iter.fold(LogWeight::ZERO, log_sum)
    }
}

impl Product for LogWeight {
    fn product<I: Iterator<Item = LogWeight>>(iter: I) -> LogWeight {
        iter.fold(LogWeight::ONE, |a, b| a * b)
    }
}

/// Dense array of one [`LogWeight`] per subset of an `n`-element ground set,
/// indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeTable {
    n: usize,
    entries: Vec<LogWeight>,
}

impl LatticeTable {
    pub fn filled(n: usize, w: LogWeight) -> Self {
        LatticeTable {
            n,
            entries: vec![w; 1 << n],
        }
    }

    pub fn from_entries(n: usize, entries: Vec<LogWeight>) -> Self {
        assert_eq!(entries.len(), 1 << n, "table length must be exactly 2^n");
        LatticeTable { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[LogWeight] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [LogWeight] {
        &mut self.entries
    }
}

impl Index<usize> for LatticeTable {
    type Output = LogWeight;
    fn index(&self, mask: usize) -> &LogWeight {
        &self.entries[mask]
    }
}

impl IndexMut<usize> for LatticeTable {
    fn index_mut(&mut self, mask: usize) -> &mut LogWeight {
        &mut self.entries[mask]
    }
}

impl Index<NodeSet> for LatticeTable {
    type Output = LogWeight;
    fn index(&self, set: NodeSet) -> &LogWeight {
        &self.entries[set.index()]
    }
}

impl IndexMut<NodeSet> for LatticeTable {
    fn index_mut(&mut self, set: NodeSet) -> &mut LogWeight {
        &mut self.entries[set.index()]
    }
}

/// Work accounting for a counted transform run.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransformWork {
    /// Table entries computed across all sweeps, including entries that the
    /// in-place realization carries over unchanged. Per sweep `i` this equals
    /// the number of index vectors whose first `i` coordinates have popcount
    /// at most `k`.
    pub entries: u64,
    /// Two-term accumulations actually performed (one per updated entry).
    pub additions: u64,
}

/// Superset sums restricted to small outputs: replaces the table `s` with `t`
/// where `t(T) = sum of s(S) over supersets S of T`, guaranteed correct at
/// every `T` with `|T| <= k`. Entries above cardinality `k` are unspecified
/// and must not be read.
///
/// Runs n in-place coordinate sweeps, bit 0 first; sweep `b` only touches
/// indices whose bits below `b` carry at most `k` ones, which keeps the total
/// work within `4 (k+1) 2^n` entry updates instead of `n 2^n`.
pub fn downward_transform_truncated(mut table: LatticeTable, k: usize) -> LatticeTable {
    downward_sweeps::<false>(table.n, k, table.as_mut_slice(), &mut TransformWork::default());
    table
}

/// [`downward_transform_truncated`] with work counters, for bound checks.
pub fn downward_transform_truncated_counted(
    mut table: LatticeTable,
    k: usize,
) -> (LatticeTable, TransformWork) {
    let mut work = TransformWork::default();
    downward_sweeps::<true>(table.n, k, table.as_mut_slice(), &mut work);
    (table, work)
}

/// Slice-level variant of [`downward_transform_truncated`] so callers can
/// reuse one scratch buffer across many transforms.
pub(crate) fn downward_in_place(n: usize, k: usize, entries: &mut [LogWeight]) {
    debug_assert_eq!(entries.len(), 1 << n);
    downward_sweeps::<false>(n, k, entries, &mut TransformWork::default());
}

fn downward_sweeps<const COUNT: bool>(
    n: usize,
    k: usize,
    entries: &mut [LogWeight],
    work: &mut TransformWork,
) {
    for b in 0..n {
        let bit = 1usize << b;
        let step = bit << 1;
        let hi_count = 1usize << (n - b - 1);
        if k >= b {
            // Every b-bit prefix is admissible; plain paired sweep.
            for hi in 0..hi_count {
                let base = hi * step;
                for lo in 0..bit {
                    let m = base | lo;
                    entries[m] = log_sum(entries[m], entries[m | bit]);
                    if COUNT {
                        work.additions += 1;
                    }
                }
            }
        } else {
            let prefixes: Vec<usize> = enumerate_subsets(NodeSet::full(b), k)
                .map(|s| s.index())
                .collect();
            for hi in 0..hi_count {
                let base = hi * step;
                for &lo in &prefixes {
                    let m = base | lo;
                    entries[m] = log_sum(entries[m], entries[m | bit]);
                    if COUNT {
                        work.additions += 1;
                    }
                }
            }
        }
        if COUNT {
            // Entries with bit b set and an admissible prefix are carried
            // over unchanged; they still count as computed per sweep.
            let carried = if k == 0 {
                0
            } else {
                binomial_tail(b as u32, (k - 1).min(b) as u32).unwrap() as u64
            };
            let updated = binomial_tail(b as u32, k.min(b) as u32).unwrap() as u64;
            work.entries += (updated + carried) * hi_count as u64;
        }
    }
}

/// Subset sums under a small-support promise: replaces `s` with `t` where
/// `t(T) = sum of s(S) over subsets S of T`, for every `T`. The input must
/// vanish ([`LogWeight::ZERO`]) at all sets with more than `k` elements;
/// a violation is reported as an error.
///
/// Dual sweep of [`downward_transform_truncated`]: after sweep `b` every
/// intermediate entry whose suffix above `b` has popcount exceeding `k` is
/// identically zero, so those updates are skipped.
pub fn upward_transform_truncated(mut table: LatticeTable, k: usize) -> Result<LatticeTable> {
    let n = table.n;
    if k < n {
        for (mask, w) in table.as_slice().iter().enumerate() {
            if mask.count_ones() as usize > k && !w.is_zero() {
                return Err(Error::TruncationSupport {
                    set: format!("{}", NodeSet::from_mask(mask as u32)),
                    card: mask.count_ones() as usize,
                    k,
                });
            }
        }
    }
    let entries = table.as_mut_slice();
    for b in 0..n {
        let bit = 1usize << b;
        let suffix_bits = n - b - 1;
        if k >= suffix_bits {
            for hi in 0..1usize << suffix_bits {
                let base = (hi << (b + 1)) | bit;
                for lo in 0..bit {
                    let m = base | lo;
                    entries[m] = log_sum(entries[m], entries[m ^ bit]);
                }
            }
        } else {
            let suffixes: Vec<usize> = enumerate_subsets(NodeSet::full(suffix_bits), k)
                .map(|s| s.index())
                .collect();
            for &hi in &suffixes {
                let base = (hi << (b + 1)) | bit;
                for lo in 0..bit {
                    let m = base | lo;
                    entries[m] = log_sum(entries[m], entries[m ^ bit]);
                }
            }
        }
    }
    Ok(table)
}

/// Guard for the definitional reference transforms (they cost O(3^n)).
pub const NAIVE_TRANSFORM_MAX_N: usize = 14;

fn check_naive_guard(n: usize) -> Result<()> {
    if n > NAIVE_TRANSFORM_MAX_N {
        return Err(Error::GuardExceeded(format!(
            "naive transform requires n <= {NAIVE_TRANSFORM_MAX_N}, got n={n}"
        )));
    }
    Ok(())
}

/// Definitional superset sums, `t(T) = sum over S ⊇ T of s(S)`. Test oracle.
pub fn naive_downward(table: &LatticeTable) -> Result<LatticeTable> {
    check_naive_guard(table.n)?;
    let full = table.len() - 1;
    let mut out = LatticeTable::filled(table.n, LogWeight::ZERO);
    for t in 0..table.len() {
        let free = full & !t;
        let mut acc = LogWeight::ZERO;
        // All supersets of t: t | sub for every submask sub of the complement.
        let mut sub = free;
        loop {
            acc += table[t | sub];
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
        out[t] = acc;
    }
    Ok(out)
}

/// Definitional subset sums, `t(T) = sum over S ⊆ T of s(S)`. Test oracle.
pub fn naive_upward(table: &LatticeTable) -> Result<LatticeTable> {
    check_naive_guard(table.n)?;
    let mut out = LatticeTable::filled(table.n, LogWeight::ZERO);
    for t in 0..table.len() {
        let mut acc = LogWeight::ZERO;
        let mut sub = t;
        loop {
            acc += table[sub];
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & t;
        }
        out[t] = acc;
    }
    Ok(out)
}
