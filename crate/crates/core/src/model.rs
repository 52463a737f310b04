//! The extension model `⟨Σ, D, E, λ⟩` and its probability semantics.
//!
//! A symbol is predicted in the longest suffix of the history that is in
//! the dictionary and lists the symbol among its extensions. Every longer
//! in-dictionary suffix that skipped the symbol scales the shorter
//! prediction by its expansion factor
//!
//! ```text
//! δ(w) = (1 - λ(E(w)|w)) / (1 - p̃(E(w) | ⌊w⌋))
//! ```
//!
//! The chain of in-dictionary suffixes of a history is fully determined by
//! the longest one, so each context's predictive distribution is computed
//! once at construction from its maximal proper suffix `⌊w⌋`.

use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use sha2::{Digest, Sha256};

use crate::corpus::{escape_bytes, unescape_bytes, Alphabet, AlphabetProfile, Symbol};
use crate::error::{Error, Result};
use crate::estimate::{lambda_from_summary, ContextEstimate, Ratio};

pub const MODEL_MAGIC: &str = "EXTMODEL";
pub const MODEL_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub symbol: Symbol,
    /// `c(σ|w)`.
    pub count: u64,
    /// `λ(σ|w)`.
    pub lambda: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEntry {
    /// Context in forward order (oldest symbol first).
    pub context: Vec<Symbol>,
    /// `c(w)`.
    pub count: u64,
    /// `#(w)`.
    pub novel_weight: u64,
    /// `|q(w)|`.
    pub seen: usize,
    /// `E(w)` with parameters, sorted by symbol.
    pub extensions: Vec<Extension>,
}

impl ContextEntry {
    /// Entry whose parameters come from method-C estimates restricted to `set`.
    pub fn from_estimate(context: Vec<Symbol>, estimate: &ContextEstimate, set: &[Symbol]) -> Self {
        let mut extensions: Vec<Extension> = set
            .iter()
            .map(|&s| Extension {
                symbol: s,
                count: estimate.count(s),
                lambda: estimate.lambda(s),
            })
            .collect();
        extensions.sort_by_key(|e| e.symbol);
        Self {
            context,
            count: estimate.total(),
            novel_weight: estimate.novel_weight(),
            seen: estimate.seen(),
            extensions,
        }
    }

    /// Hand-specified parameters with no supporting counts.
    pub fn with_lambdas(context: Vec<Symbol>, lambdas: &[(Symbol, Ratio)]) -> Self {
        let mut extensions: Vec<Extension> = lambdas
            .iter()
            .map(|&(symbol, lambda)| Extension {
                symbol,
                count: 0,
                lambda,
            })
            .collect();
        extensions.sort_by_key(|e| e.symbol);
        Self {
            context,
            count: 0,
            novel_weight: 0,
            seen: 0,
            extensions,
        }
    }

    pub fn extension(&self, symbol: Symbol) -> Option<&Extension> {
        self.extensions
            .binary_search_by_key(&symbol, |e| e.symbol)
            .ok()
            .map(|k| &self.extensions[k])
    }

    /// `λ(E(w)|w)` in exact arithmetic.
    pub fn lambda_mass_exact(&self) -> BigRational {
        self.extensions
            .iter()
            .fold(BigRational::zero(), |acc, e| acc + e.lambda.to_big())
    }

    /// `c(E(w)|w)`.
    pub fn extension_count(&self) -> u64 {
        self.extensions.iter().map(|e| e.count).sum()
    }

    /// The method C value implied by the stored counts, when defined.
    fn count_lambda(&self, ext: &Extension, alphabet_size: usize) -> Option<Ratio> {
        if self.count + self.novel_weight == 0 || self.seen > alphabet_size {
            return None;
        }
        if ext.count == 0 && (self.seen == alphabet_size || self.novel_weight == 0) {
            return None;
        }
        Some(lambda_from_summary(
            ext.count,
            self.count,
            self.novel_weight,
            self.seen,
            alphabet_size,
        ))
    }
}

/// Arithmetic used to evaluate the chain of contexts, shared by the
/// floating-point fast path and the exact rational path.
trait Prob: Clone {
    fn p_zero() -> Self;
    fn p_one() -> Self;
    fn from_ratio(r: Ratio) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_positive(&self) -> bool;
}

impl Prob for f64 {
    fn p_zero() -> Self {
        0.0
    }
    fn p_one() -> Self {
        1.0
    }
    fn from_ratio(r: Ratio) -> Self {
        r.to_f64()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
}

impl Prob for BigRational {
    fn p_zero() -> Self {
        Zero::zero()
    }
    fn p_one() -> Self {
        One::one()
    }
    fn from_ratio(r: Ratio) -> Self {
        r.to_big()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
}

/// Predictive row of a context from its suffix's row. Returns the row and δ.
fn chain_row<P: Prob>(entry: &ContextEntry, base: &[P]) -> (Vec<P>, P) {
    let mut lambda_mass = P::p_zero();
    let mut base_mass = P::p_zero();
    for e in &entry.extensions {
        lambda_mass = lambda_mass.add(&P::from_ratio(e.lambda));
        base_mass = base_mass.add(&base[e.symbol as usize]);
    }
    let denom = P::p_one().sub(&base_mass);
    let delta = if entry.extensions.len() == base.len() {
        P::p_zero()
    } else if denom.is_positive() {
        let num = P::p_one().sub(&lambda_mass);
        if num.is_positive() {
            num.div(&denom)
        } else {
            P::p_zero()
        }
    } else {
        P::p_zero()
    };
    let mut row: Vec<P> = base.iter().map(|p| delta.mul(p)).collect();
    for e in &entry.extensions {
        row[e.symbol as usize] = P::from_ratio(e.lambda);
    }
    (row, delta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TrieNode {
    children: Vec<(Symbol, u32)>,
    context: Option<u32>,
}

impl TrieNode {
    fn child(&self, x: Symbol) -> Option<u32> {
        self.children
            .binary_search_by_key(&x, |&(s, _)| s)
            .ok()
            .map(|k| self.children[k].1)
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionModel {
    alphabet: Alphabet,
    contexts: Vec<ContextEntry>,
    /// Reversed trie over the suffix closure of the dictionary.
    trie: Vec<TrieNode>,
    trie_node_of: Vec<u32>,
    floor: Vec<Option<u32>>,
    ceil: Vec<Vec<u32>>,
    rows: Vec<f64>,
    deltas: Vec<f64>,
    zero_row: Vec<f64>,
    max_depth: usize,
}

impl PartialEq for ExtensionModel {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.contexts == other.contexts
    }
}

pub(crate) fn canonical_key(context: &[Symbol]) -> (usize, Vec<Symbol>) {
    (context.len(), context.iter().rev().copied().collect())
}

impl ExtensionModel {
    /// Builds a model from its contexts; they are sorted into canonical order.
    /// The model is not validated here, see [`ExtensionModel::validate`].
    pub fn new(alphabet: Alphabet, mut contexts: Vec<ContextEntry>) -> Result<Self> {
        let m = alphabet.size();
        contexts.sort_by_cached_key(|c| canonical_key(&c.context));
        for pair in contexts.windows(2) {
            if pair[0].context == pair[1].context {
                return Err(Error::InvalidModel(format!(
                    "duplicate context {:?}",
                    pair[0].context
                )));
            }
        }
        for entry in &mut contexts {
            for &s in &entry.context {
                alphabet.check_symbol(s)?;
            }
            entry.extensions.sort_by_key(|e| e.symbol);
            for pair in entry.extensions.windows(2) {
                if pair[0].symbol == pair[1].symbol {
                    return Err(Error::InvalidModel(format!(
                        "duplicate extension {} in context {:?}",
                        pair[0].symbol, entry.context
                    )));
                }
            }
            for e in &entry.extensions {
                alphabet.check_symbol(e.symbol)?;
            }
        }

        let mut trie = vec![TrieNode {
            children: Vec::new(),
            context: None,
        }];
        let mut trie_node_of = Vec::with_capacity(contexts.len());
        let mut floor = Vec::with_capacity(contexts.len());
        for (ci, entry) in contexts.iter().enumerate() {
            let mut node = 0u32;
            let mut last_ctx = trie[0].context;
            for &x in entry.context.iter().rev() {
                if let Some(c) = trie[node as usize].context {
                    last_ctx = Some(c);
                }
                node = match trie[node as usize].child(x) {
                    Some(c) => c,
                    None => {
                        let id = trie.len() as u32;
                        trie.push(TrieNode {
                            children: Vec::new(),
                            context: None,
                        });
                        let children = &mut trie[node as usize].children;
                        let pos = children.partition_point(|&(s, _)| s < x);
                        children.insert(pos, (x, id));
                        id
                    }
                };
            }
            trie[node as usize].context = Some(ci as u32);
            trie_node_of.push(node);
            floor.push(if entry.context.is_empty() { None } else { last_ctx });
        }

        let mut ceil = vec![Vec::new(); contexts.len()];
        for (ci, f) in floor.iter().enumerate() {
            if let Some(f) = f {
                ceil[*f as usize].push(ci as u32);
            }
        }

        let zero_row = vec![0.0; m];
        let mut rows = vec![0.0; contexts.len() * m];
        let mut deltas = vec![0.0; contexts.len()];
        for ci in 0..contexts.len() {
            let (row, delta) = {
                let base: &[f64] = match floor[ci] {
                    Some(f) => &rows[f as usize * m..(f as usize + 1) * m],
                    None => &zero_row,
                };
                chain_row(&contexts[ci], base)
            };
            rows[ci * m..(ci + 1) * m].copy_from_slice(&row);
            deltas[ci] = delta;
        }

        let max_depth = contexts.iter().map(|c| c.context.len()).max().unwrap_or(0);
        Ok(Self {
            alphabet,
            contexts,
            trie,
            trie_node_of,
            floor,
            ceil,
            rows,
            deltas,
            zero_row,
            max_depth,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    /// Contexts in canonical order.
    pub fn contexts(&self) -> &[ContextEntry] {
        &self.contexts
    }

    /// `|D|`.
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Number of extension pairs `⟨w, σ⟩`.
    pub fn parameter_count(&self) -> usize {
        self.contexts.iter().map(|c| c.extensions.len()).sum()
    }

    /// Length of the deepest context.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn entry(&self, ci: usize) -> &ContextEntry {
        &self.contexts[ci]
    }

    /// `⌊w⌋`: index of the maximal proper suffix of context `ci` in D.
    pub fn floor_of(&self, ci: usize) -> Option<usize> {
        self.floor[ci].map(|f| f as usize)
    }

    /// `⌈w⌉`: contexts whose maximal proper suffix is context `ci`.
    pub fn ceil_of(&self, ci: usize) -> impl Iterator<Item = usize> + '_ {
        self.ceil[ci].iter().map(|&c| c as usize)
    }

    /// Index of a context given in forward order, if it is in D.
    pub fn find(&self, context: &[Symbol]) -> Option<usize> {
        let mut node = 0u32;
        for &x in context.iter().rev() {
            node = self.trie[node as usize].child(x)?;
        }
        self.trie[node as usize].context.map(|c| c as usize)
    }

    /// Longest suffix of `history` that is in D.
    pub fn longest_context(&self, history: &[Symbol]) -> Option<usize> {
        let mut node = 0u32;
        let mut best = self.trie[0].context;
        for &x in history.iter().rev().take(self.max_depth) {
            match self.trie[node as usize].child(x) {
                Some(c) => {
                    node = c;
                    if let Some(ctx) = self.trie[node as usize].context {
                        best = Some(ctx);
                    }
                }
                None => break,
            }
        }
        best.map(|c| c as usize)
    }

    /// Whether context `ci` is a proper suffix of another context in D.
    pub fn has_longer_context(&self, ci: usize) -> bool {
        !self.trie[self.trie_node_of[ci] as usize].children.is_empty()
    }

    /// Number of children of every vertex of the suffix tree spanned by D.
    pub fn suffix_tree_branching(&self) -> impl Iterator<Item = usize> + '_ {
        self.trie.iter().map(|n| n.children.len())
    }

    /// Predictive distribution `p̃(·|w)` of context `ci`.
    pub fn context_distribution(&self, ci: usize) -> &[f64] {
        let m = self.alphabet_size();
        &self.rows[ci * m..(ci + 1) * m]
    }

    /// `p̃(·|h)`.
    pub fn distribution(&self, history: &[Symbol]) -> &[f64] {
        match self.longest_context(history) {
            Some(ci) => self.context_distribution(ci),
            None => &self.zero_row,
        }
    }

    /// `p̃(σ|h)`.
    pub fn cond_prob(&self, symbol: Symbol, history: &[Symbol]) -> f64 {
        self.distribution(history)[symbol as usize]
    }

    /// `δ` at the longest suffix of `history` in D.
    pub fn expansion_factor(&self, history: &[Symbol]) -> f64 {
        self.longest_context(history).map_or(1.0, |ci| self.deltas[ci])
    }

    /// `δ(w)` of context `ci`.
    pub fn context_expansion_factor(&self, ci: usize) -> f64 {
        self.deltas[ci]
    }

    fn chain_exact(&self, ci: usize) -> (Vec<BigRational>, BigRational) {
        let mut chain = vec![ci];
        while let Some(f) = self.floor[*chain.last().unwrap()] {
            chain.push(f as usize);
        }
        let mut row = vec![BigRational::zero(); self.alphabet_size()];
        let mut delta = BigRational::one();
        for &c in chain.iter().rev() {
            (row, delta) = chain_row(&self.contexts[c], &row);
        }
        (row, delta)
    }

    /// `p̃(·|h)` in exact rational arithmetic.
    pub fn distribution_exact(&self, history: &[Symbol]) -> Vec<BigRational> {
        match self.longest_context(history) {
            Some(ci) => self.chain_exact(ci).0,
            None => vec![BigRational::zero(); self.alphabet_size()],
        }
    }

    pub fn cond_prob_exact(&self, symbol: Symbol, history: &[Symbol]) -> BigRational {
        self.distribution_exact(history).swap_remove(symbol as usize)
    }

    pub fn expansion_factor_exact(&self, history: &[Symbol]) -> BigRational {
        match self.longest_context(history) {
            Some(ci) => self.chain_exact(ci).1,
            None => BigRational::one(),
        }
    }

    /// `-log2 p̃(s | h0)` in bits; infinite if any conditional is zero.
    pub fn log_prob(&self, seq: &[Symbol], initial_history: &[Symbol]) -> f64 {
        let keep = initial_history.len().min(self.max_depth);
        let mut buf = Vec::with_capacity(keep + seq.len());
        buf.extend_from_slice(&initial_history[initial_history.len() - keep..]);
        buf.extend_from_slice(seq);
        let mut bits = 0.0;
        for i in keep..buf.len() {
            let lo = i.saturating_sub(self.max_depth);
            let p = self.cond_prob(buf[i], &buf[lo..i]);
            if p <= 0.0 {
                return f64::INFINITY;
            }
            bits -= p.log2();
        }
        bits
    }

    pub fn validate(&self) -> ValidationReport {
        let m = self.alphabet_size();
        let mut violations = Vec::new();
        match self.find(&[]) {
            None => violations.push(Violation::MissingEmptyContext),
            Some(ci) => {
                let present = self.contexts[ci].extensions.len();
                if present != m {
                    violations.push(Violation::EmptyContextIncomplete {
                        missing: m - present,
                    });
                }
            }
        }
        for entry in &self.contexts {
            if entry.extensions.is_empty() {
                violations.push(Violation::EmptyExtensionSet {
                    context: entry.context.clone(),
                });
            }
            for e in &entry.extensions {
                if e.lambda.num > e.lambda.den {
                    violations.push(Violation::LambdaOutOfRange {
                        context: entry.context.clone(),
                        symbol: e.symbol,
                    });
                }
            }
            let mass = entry.lambda_mass_exact();
            let mass_f = ratio_to_f64(&mass);
            if mass > BigRational::one() {
                violations.push(Violation::MassExceedsOne {
                    context: entry.context.clone(),
                    mass: mass_f,
                });
            }
            if entry.extensions.len() == m && mass != BigRational::one() {
                violations.push(Violation::FullSetNotNormalized {
                    context: entry.context.clone(),
                    mass: mass_f,
                });
            }
        }
        ValidationReport { violations }
    }

    /// Line-oriented text form; see the crate README for the grammar.
    pub fn serialize(&self) -> String {
        let m = self.alphabet_size();
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(out, "alphabet {}", self.alphabet.profile().descriptor());
        for entry in &self.contexts {
            let text = escape_bytes(&self.alphabet.render(&entry.context));
            let _ = writeln!(
                out,
                "ctx \"{text}\" c={} novel={} seen={}",
                entry.count, entry.novel_weight, entry.seen
            );
            for e in &entry.extensions {
                let _ = write!(out, "  ext {} c={}", e.symbol, e.count);
                if entry.count_lambda(e, m) != Some(e.lambda) {
                    let r = e.lambda.reduced();
                    let _ = write!(out, " lambda={}/{}", r.num, r.den);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let malformed = |line: usize, reason: &str| Error::MalformedModel {
            line,
            reason: reason.to_string(),
        };

        let (ln, header) = lines.next().ok_or_else(|| malformed(1, "empty file"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(malformed(ln, "missing EXTMODEL header"));
        }
        match parts.next() {
            Some(MODEL_VERSION) => {}
            Some(v) => return Err(Error::VersionMismatch(v.to_string())),
            None => return Err(malformed(ln, "missing version")),
        }

        let (ln, alpha_line) = lines.next().ok_or_else(|| malformed(2, "missing alphabet"))?;
        let desc = alpha_line
            .strip_prefix("alphabet ")
            .ok_or_else(|| malformed(ln, "expected `alphabet <profile>`"))?;
        let alphabet = Alphabet::build(&AlphabetProfile::parse(desc.trim())?)?;
        let m = alphabet.size();

        let mut contexts: Vec<ContextEntry> = Vec::new();
        let mut overrides: Vec<(usize, usize, Ratio)> = Vec::new();
        for (ln, line) in lines {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("ctx ") {
                let rest = rest
                    .strip_prefix('"')
                    .ok_or_else(|| malformed(ln, "context must be quoted"))?;
                let close = rest
                    .find('"')
                    .ok_or_else(|| malformed(ln, "unterminated context"))?;
                let bytes = unescape_bytes(&rest[..close])
                    .ok_or_else(|| malformed(ln, "bad context escape"))?;
                let fields = parse_fields(&rest[close + 1..])
                    .ok_or_else(|| malformed(ln, "bad ctx fields"))?;
                let get = |k: &str| {
                    fields
                        .iter()
                        .find(|(key, _)| key == k)
                        .and_then(|(_, v)| v.parse::<u64>().ok())
                        .ok_or_else(|| malformed(ln, &format!("missing or bad `{k}`")))
                };
                contexts.push(ContextEntry {
                    context: alphabet.parse_context(&bytes),
                    count: get("c")?,
                    novel_weight: get("novel")?,
                    seen: get("seen")? as usize,
                    extensions: Vec::new(),
                });
            } else if let Some(rest) = trimmed.strip_prefix("ext ") {
                let ci_last = contexts.len().wrapping_sub(1);
                let entry = contexts
                    .last_mut()
                    .ok_or_else(|| malformed(ln, "ext before any ctx"))?;
                let mut it = rest.splitn(2, ' ');
                let symbol: Symbol = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| malformed(ln, "bad symbol index"))?;
                if symbol as usize >= m {
                    return Err(malformed(ln, "symbol index out of range"));
                }
                let fields =
                    parse_fields(it.next().unwrap_or("")).ok_or_else(|| malformed(ln, "bad ext fields"))?;
                let mut count = None;
                let mut lambda = None;
                for (k, v) in fields {
                    match k.as_str() {
                        "c" => count = v.parse::<u64>().ok(),
                        "lambda" => {
                            let (n, d) = v.split_once('/').ok_or_else(|| malformed(ln, "bad lambda"))?;
                            let n: u64 = n.parse().map_err(|_| malformed(ln, "bad lambda"))?;
                            let d: u64 = d.parse().map_err(|_| malformed(ln, "bad lambda"))?;
                            if d == 0 {
                                return Err(malformed(ln, "zero lambda denominator"));
                            }
                            lambda = Some(Ratio::new(n, d));
                        }
                        _ => return Err(malformed(ln, "unknown ext field")),
                    }
                }
                let count = count.ok_or_else(|| malformed(ln, "missing `c`"))?;
                if let Some(l) = lambda {
                    overrides.push((ci_last, entry.extensions.len(), l));
                }
                entry.extensions.push(Extension {
                    symbol,
                    count,
                    lambda: Ratio::ZERO,
                });
            } else {
                return Err(malformed(ln, "unknown record"));
            }
        }

        for (ci, entry) in contexts.iter_mut().enumerate() {
            let fixed: Vec<Option<Ratio>> = entry
                .extensions
                .iter()
                .map(|e| entry.count_lambda(e, m))
                .collect();
            for (k, l) in fixed.into_iter().enumerate() {
                match l {
                    Some(l) => entry.extensions[k].lambda = l,
                    None if !overrides.iter().any(|&(c, e, _)| c == ci && e == k) => {
                        return Err(Error::MalformedModel {
                            line: 0,
                            reason: format!(
                                "context {:?} has no counts or explicit lambda for symbol {}",
                                entry.context, entry.extensions[k].symbol
                            ),
                        });
                    }
                    None => {}
                }
            }
        }
        for (ci, k, l) in overrides {
            contexts[ci].extensions[k].lambda = l;
        }

        let model = Self::new(alphabet, contexts)?;
        let report = model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report.to_string()));
        }
        Ok(model)
    }

    /// SHA-256 of the serialized model.
    pub fn digest(&self) -> [u8; 32] {
        let hash = Sha256::digest(self.serialize().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&hash);
        out
    }
}

fn parse_fields(text: &str) -> Option<Vec<(String, String)>> {
    text.split_whitespace()
        .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// 4a: ε ∉ D.
    MissingEmptyContext,
    /// 4a: E(ε) ≠ Σ.
    EmptyContextIncomplete { missing: usize },
    /// 4b: λ(E(w)|w) > 1.
    MassExceedsOne { context: Vec<Symbol>, mass: f64 },
    /// 4c: E(w) = Σ but λ(Σ|w) ≠ 1.
    FullSetNotNormalized { context: Vec<Symbol>, mass: f64 },
    EmptyExtensionSet { context: Vec<Symbol> },
    LambdaOutOfRange { context: Vec<Symbol>, symbol: Symbol },
}

impl Violation {
    /// Short constraint label (`4a`, `4b`, `4c`, or `structure`).
    pub fn constraint(&self) -> &'static str {
        match self {
            Self::MissingEmptyContext | Self::EmptyContextIncomplete { .. } => "4a",
            Self::MassExceedsOne { .. } => "4b",
            Self::FullSetNotNormalized { .. } => "4c",
            Self::EmptyExtensionSet { .. } | Self::LambdaOutOfRange { .. } => "structure",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingEmptyContext => write!(f, "4a: empty context missing from D"),
            Self::EmptyContextIncomplete { missing } => {
                write!(f, "4a: E(ε) lacks {missing} symbols")
            }
            Self::MassExceedsOne { context, mass } => {
                write!(f, "4b: λ(E(w)|w) = {mass} > 1 at {context:?}")
            }
            Self::FullSetNotNormalized { context, mass } => {
                write!(f, "4c: λ(Σ|w) = {mass} ≠ 1 at {context:?}")
            }
            Self::EmptyExtensionSet { context } => write!(f, "empty E(w) at {context:?}"),
            Self::LambdaOutOfRange { context, symbol } => {
                write!(f, "λ({symbol}|w) > 1 at {context:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, constraint: &str) -> bool {
        self.violations.iter().any(|v| v.constraint() == constraint)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Exact rational from a decimal-free fraction, handy for hand-built models.
pub fn big_ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
