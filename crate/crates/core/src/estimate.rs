//! Method-C parameter estimates.
//!
//! Seen symbols `q(w)` get `c(σ|w) / (c(w) + #(w))`; the novel mass
//! `#(w) / (c(w) + #(w))` is split uniformly over `q̄(w)`, with
//! `#(w) = min(|q(w)|, |q̄(w)|)`. No escapes and no blending.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::corpus::{ContextStats, NodeId, Symbol};
use crate::error::{Error, Result};

/// Exact nonnegative ratio of two integers. Not normalized; equality and
/// ordering compare values.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "ratio with zero denominator");
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_big(self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn reduced(self) -> Self {
        let g = gcd(self.num, self.den);
        Self {
            num: self.num / g,
            den: self.den / g,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// `min(|q(w)|, |q̄(w)|)`.
pub fn novel_weight(seen: usize, alphabet_size: usize) -> u64 {
    seen.min(alphabet_size.saturating_sub(seen)) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventPartition {
    pub seen: Vec<Symbol>,
    pub novel: Vec<Symbol>,
    pub novel_weight: u64,
}

impl EventPartition {
    pub fn from_counts(counts: &[u64]) -> Self {
        let (seen, novel): (Vec<Symbol>, Vec<Symbol>) =
            (0..counts.len() as u16).map(|s| s as Symbol).partition(|&s| counts[s as usize] > 0);
        let novel_weight = novel_weight(seen.len(), counts.len());
        Self {
            seen,
            novel,
            novel_weight,
        }
    }
}

/// Everything method C needs about one context: `c(w)`, `#(w)`, `|q(w)|` and
/// the dense count vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEstimate {
    counts: Vec<u64>,
    total: u64,
    seen: usize,
    novel_weight: u64,
}

impl ContextEstimate {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        let seen = counts.iter().filter(|&&c| c > 0).count();
        let novel_weight = novel_weight(seen, counts.len());
        if total + novel_weight == 0 {
            return Err(Error::DegenerateContext);
        }
        Ok(Self {
            counts,
            total,
            seen,
            novel_weight,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    /// `c(w)`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `c(σ|w)`.
    pub fn count(&self, sym: Symbol) -> u64 {
        self.counts[sym as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `|q(w)|`.
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// `#(w)`.
    pub fn novel_weight(&self) -> u64 {
        self.novel_weight
    }

    /// `λ(σ|w)` as an exact ratio.
    pub fn lambda(&self, sym: Symbol) -> Ratio {
        lambda_from_summary(
            self.count(sym),
            self.total,
            self.novel_weight,
            self.seen,
            self.counts.len(),
        )
    }

    pub fn lambda_f64(&self, sym: Symbol) -> f64 {
        self.lambda(sym).to_f64()
    }

    pub fn lambdas(&self) -> Vec<Ratio> {
        (0..self.counts.len()).map(|s| self.lambda(s as Symbol)).collect()
    }
}

/// Method C from the summary a model file stores for each context.
pub fn lambda_from_summary(
    count: u64,
    total: u64,
    novel_weight: u64,
    seen: usize,
    alphabet_size: usize,
) -> Ratio {
    let den = total + novel_weight;
    if count > 0 {
        Ratio::new(count, den)
    } else {
        let novel = (alphabet_size - seen) as u64;
        Ratio::new(novel_weight, novel * den)
    }
}

/// Estimates `λ(·|w)` for a context of the statistics trie.
pub fn estimate_lambda(stats: &ContextStats, node: NodeId) -> Result<ContextEstimate> {
    ContextEstimate::from_counts(stats.dense_next_counts(node))
}
