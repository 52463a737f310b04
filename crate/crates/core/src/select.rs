//! Divergence-heuristic model selection.
//!
//! A candidate context `w` gets an extension set `S` only when the data bits
//! it saves exceed the model bits it costs. `Extend` grows `S` greedily one
//! symbol at a time; `Refine` walks candidate contexts breadth first, one
//! order per level, evaluating every candidate of a level against the model
//! as it stood when the level began.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{escape_bytes, Alphabet, ContextStats, NodeId, Symbol, SymbolSequence};
use crate::error::{Error, Result};
use crate::estimate::{ContextEstimate, Ratio};
use crate::mdl::{log_binomial, model_codelength};
use crate::model::{ContextEntry, Extension, ExtensionModel};

/// How the model-side cost `ΔL_φ(w, S)` of an extension set is priced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostMode {
    /// Four-term approximation of the codelength increase.
    MdlApprox,
    /// A flat `b` bits per extension.
    Constant(f64),
    /// `L(φ ∪ {w}×S) − L(φ)` recomputed in full. Slow; for comparisons.
    Exact,
}

impl FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdl" | "mdl-approx" => Ok(CostMode::MdlApprox),
            "exact" => Ok(CostMode::Exact),
            _ => {
                let b = s
                    .strip_prefix("const:")
                    .and_then(|b| b.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown cost mode `{s}`")))?;
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "constant cost must be positive, got {b}"
                    )));
                }
                Ok(CostMode::Constant(b))
            }
        }
    }
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostMode::MdlApprox => f.write_str("mdl"),
            CostMode::Constant(b) => write!(f, "const:{b}"),
            CostMode::Exact => f.write_str("exact"),
        }
    }
}

/// Search parameters. Argmax ties go to the lowest symbol index and
/// candidates are visited in canonical context order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// `n_max`.
    pub max_order: usize,
    /// `c_min`: candidates need `c(w) > c_min`.
    pub min_count: u64,
    pub cost_mode: CostMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            max_order: 10,
            min_count: 8,
            cost_mode: CostMode::MdlApprox,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if let CostMode::Constant(b) = self.cost_mode {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "constant cost must be positive, got {b}"
                )));
            }
        }
        if self.max_order > u16::MAX as usize {
            return Err(Error::InvalidConfig("order too large".into()));
        }
        Ok(())
    }
}

/// The four terms of the approximate cost, reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostTerms {
    /// `log2 |D|`.
    pub dictionary: f64,
    /// `log2 C(m, |S|)`.
    pub subset: f64,
    /// `log2 c(⌊w⌋)`.
    pub floor_count: f64,
    /// `log2 C(c(w) + |S|, |S|)`.
    pub partition: f64,
}

impl CostTerms {
    pub fn new(dictionary_size: usize, m: usize, k: usize, floor_count: u64, count: u64) -> Self {
        let k64 = k as u64;
        Self {
            dictionary: (dictionary_size.max(1) as f64).log2(),
            subset: log_binomial(m as u64, k64.min(m as u64)).unwrap_or(0.0),
            floor_count: (floor_count.max(1) as f64).log2(),
            partition: log_binomial(count + k64, k64).unwrap_or(0.0),
        }
    }

    pub fn total(&self) -> f64 {
        self.dictionary + self.subset + self.floor_count + self.partition
    }
}

/// Everything needed to price extension sets for one candidate context
/// against a frozen model.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub context: Vec<Symbol>,
    pub estimate: ContextEstimate,
    /// `λ(σ|w)` from method C on the raw counts of `w`.
    pub lambda: Vec<f64>,
    /// `p̃(σ|w, φ)` in the current model.
    pub current: Vec<f64>,
    /// `c(⌊w⌋)`.
    pub floor_count: u64,
    current_total: f64,
}

impl Candidate {
    pub fn new(model: &ExtensionModel, stats: &ContextStats, node: NodeId) -> Result<Self> {
        let context = stats.context_of(node);
        let estimate = ContextEstimate::from_counts(stats.dense_next_counts(node))?;
        Ok(Self::from_parts(model, stats, context, estimate))
    }

    fn from_parts(
        model: &ExtensionModel,
        stats: &ContextStats,
        context: Vec<Symbol>,
        estimate: ContextEstimate,
    ) -> Self {
        let lambda = (0..estimate.alphabet_size())
            .map(|s| estimate.lambda_f64(s as Symbol))
            .collect();
        let current = model.distribution(&context).to_vec();
        let floor_ctx = model
            .longest_context(&context[1.min(context.len())..])
            .map(|ci| model.entry(ci).context.clone())
            .unwrap_or_default();
        let floor_count = stats.count_of(&floor_ctx);
        let current_total = current.iter().sum();
        Self {
            context,
            estimate,
            lambda,
            current,
            floor_count,
            current_total,
        }
    }

    /// `c(w)`.
    pub fn count(&self) -> u64 {
        self.estimate.total()
    }

    fn state(&self) -> BenefitState {
        BenefitState {
            count_in: 0,
            novel_in: 0,
            current_in: 0.0,
            direct_bits: 0.0,
        }
    }

    /// `λ(Σ − S|w)` from the counts outside `S`.
    fn lambda_rest(&self, st: &BenefitState) -> f64 {
        let e = &self.estimate;
        let m = e.alphabet_size() as u64;
        let unseen = m - e.seen() as u64;
        let count_rest = (e.total() - st.count_in) as f64;
        let novel_rest = if unseen == 0 {
            0.0
        } else {
            e.novel_weight() as f64 * (unseen - st.novel_in) as f64 / unseen as f64
        };
        (count_rest + novel_rest) / (e.total() + e.novel_weight()) as f64
    }

    fn benefit_of(&self, st: &BenefitState) -> f64 {
        let count_rest = self.estimate.total() - st.count_in;
        let first = if count_rest == 0 {
            0.0
        } else {
            let lam = self.lambda_rest(st);
            let cur = self.current_total - st.current_in;
            if cur <= 0.0 {
                f64::INFINITY
            } else if lam <= 0.0 {
                f64::NEG_INFINITY
            } else {
                count_rest as f64 * (lam / cur).log2()
            }
        };
        first + st.direct_bits
    }

    fn with_symbol(&self, st: &BenefitState, sym: Symbol) -> BenefitState {
        let s = sym as usize;
        let c = self.estimate.count(sym);
        let direct = if c == 0 {
            0.0
        } else if self.current[s] <= 0.0 {
            f64::INFINITY
        } else {
            c as f64 * (self.lambda[s] / self.current[s]).log2()
        };
        BenefitState {
            count_in: st.count_in + c,
            novel_in: st.novel_in + u64::from(c == 0),
            current_in: st.current_in + self.current[s],
            direct_bits: st.direct_bits + direct,
        }
    }

    /// `ΔL_T(w, S)`.
    pub fn benefit(&self, set: &[Symbol]) -> f64 {
        let st = set
            .iter()
            .fold(self.state(), |st, &s| self.with_symbol(&st, s));
        self.benefit_of(&st)
    }

    /// The approximate cost terms for a set of `k` extensions.
    pub fn cost_terms(&self, model: &ExtensionModel, k: usize) -> CostTerms {
        CostTerms::new(
            model.len(),
            model.alphabet_size(),
            k,
            self.floor_count,
            self.count(),
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct BenefitState {
    count_in: u64,
    novel_in: u64,
    current_in: f64,
    direct_bits: f64,
}

/// Prices `ΔL_φ(w, S)` by set size, memoized for the exact mode.
struct CostOracle<'a> {
    model: &'a ExtensionModel,
    mode: CostMode,
    base_bits: f64,
    memo: HashMap<usize, f64>,
}

impl<'a> CostOracle<'a> {
    fn new(model: &'a ExtensionModel, mode: CostMode, base_bits: f64) -> Self {
        Self {
            model,
            mode,
            base_bits,
            memo: HashMap::new(),
        }
    }

    fn cost(&mut self, cand: &Candidate, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(0.0);
        }
        match self.mode {
            CostMode::MdlApprox => Ok(cand.cost_terms(self.model, k).total()),
            CostMode::Constant(b) => Ok(b * k as f64),
            CostMode::Exact => {
                if let Some(&bits) = self.memo.get(&k) {
                    return Ok(bits);
                }
                let bits = exact_cost(self.model, cand, k, self.base_bits)?;
                self.memo.insert(k, bits);
                Ok(bits)
            }
        }
    }
}

/// `L(φ ∪ {w}×S) − L(φ)`. The codelength depends on `S` only through `|S|`.
fn exact_cost(model: &ExtensionModel, cand: &Candidate, k: usize, base_bits: f64) -> Result<f64> {
    let mut contexts = model.contexts().to_vec();
    let e = &cand.estimate;
    contexts.push(ContextEntry {
        context: cand.context.clone(),
        count: e.total(),
        novel_weight: e.novel_weight(),
        seen: e.seen(),
        extensions: (0..k)
            .map(|s| Extension {
                symbol: s as Symbol,
                count: e.count(s as Symbol),
                lambda: Ratio::ZERO,
            })
            .collect(),
    });
    let grown = ExtensionModel::new(model.alphabet().clone(), contexts)?;
    Ok(model_codelength(&grown)? - base_bits)
}

/// `ΔL_φ(w, S)` for a context of `stats` against `model`.
pub fn delta_cost(
    context: &[Symbol],
    set: &[Symbol],
    model: &ExtensionModel,
    stats: &ContextStats,
    cfg: &SelectionConfig,
) -> Result<f64> {
    let cand = candidate_for(context, model, stats)?;
    let base = match cfg.cost_mode {
        CostMode::Exact => model_codelength(model)?,
        _ => 0.0,
    };
    CostOracle::new(model, cfg.cost_mode, base).cost(&cand, set.len())
}

/// `ΔL_T(w, S)` for a context of `stats` against `model`.
pub fn delta_benefit(
    context: &[Symbol],
    set: &[Symbol],
    model: &ExtensionModel,
    stats: &ContextStats,
) -> Result<f64> {
    Ok(candidate_for(context, model, stats)?.benefit(set))
}

/// Marginal profit of adding `symbol` to an existing set for `context`.
pub fn delta_single(
    context: &[Symbol],
    set: &[Symbol],
    symbol: Symbol,
    model: &ExtensionModel,
    stats: &ContextStats,
    cfg: &SelectionConfig,
) -> Result<f64> {
    if set.contains(&symbol) {
        return Err(Error::InvalidConfig(format!(
            "symbol {symbol} is already in the extension set"
        )));
    }
    let mut grown = set.to_vec();
    grown.push(symbol);
    let benefit = delta_benefit(context, &grown, model, stats)?
        - delta_benefit(context, set, model, stats)?;
    let cost = delta_cost(context, &grown, model, stats, cfg)?
        - delta_cost(context, set, model, stats, cfg)?;
    Ok(benefit - cost)
}

fn candidate_for(context: &[Symbol], model: &ExtensionModel, stats: &ContextStats) -> Result<Candidate> {
    let estimate = match stats.lookup(context) {
        Some(node) => ContextEstimate::from_counts(stats.dense_next_counts(node))?,
        None => return Err(Error::DegenerateContext),
    };
    Ok(Candidate::from_parts(model, stats, context.to_vec(), estimate))
}

/// One greedy step: the argmax symbol and its marginal deltas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub level: usize,
    /// Context in forward order.
    pub context: Vec<Symbol>,
    /// Position in the greedy sequence, from 0.
    pub step: usize,
    pub symbol: Symbol,
    /// `ΔL_φ(w, S ∪ {σ})`.
    pub set_cost: f64,
    /// `ΔL_T(w, S ∪ {σ})`.
    pub set_benefit: f64,
    pub marginal_cost: f64,
    pub marginal_benefit: f64,
    pub accepted: bool,
}

impl LedgerEntry {
    pub fn profit(&self) -> f64 {
        self.marginal_benefit - self.marginal_cost
    }

    /// Strictly positive profit; NaN is not.
    pub fn is_profitable(&self) -> bool {
        self.profit() > 0.0
    }
}

/// Every greedy step taken during a fit, in the order taken.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeltaLedger {
    pub entries: Vec<LedgerEntry>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    level: usize,
    context: &'a str,
    step: usize,
    symbol: usize,
    symbol_text: &'a str,
    set_cost: f64,
    set_benefit: f64,
    marginal_cost: f64,
    marginal_benefit: f64,
    profit: f64,
    accepted: bool,
}

/// Result of re-deriving a ledger from the corpus.
#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub checked: usize,
    pub accepted: usize,
    pub problems: Vec<String>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

impl DeltaLedger {
    pub fn accepted(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.accepted)
    }

    /// Accepted entries whose recorded profit is not strictly positive.
    pub fn unsound_entries(&self) -> Vec<&LedgerEntry> {
        self.accepted().filter(|e| !e.is_profitable()).collect()
    }

    pub fn write_csv<W: Write>(&self, alphabet: &Alphabet, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            let context = escape_bytes(&alphabet.render(&e.context));
            let symbol_text = escape_bytes(&alphabet.render(&[e.symbol]));
            w.serialize(CsvRow {
                level: e.level,
                context: &context,
                step: e.step,
                symbol: e.symbol as usize,
                symbol_text: &symbol_text,
                set_cost: e.set_cost,
                set_benefit: e.set_benefit,
                marginal_cost: e.marginal_cost,
                marginal_benefit: e.marginal_benefit,
                profit: e.profit(),
                accepted: e.accepted,
            })
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds the model level by level from the accepted entries and
    /// recomputes every recorded step against it: the deltas must agree, each
    /// recorded symbol must be the argmax, and accepted steps must be
    /// strictly profitable.
    pub fn replay(
        &self,
        seq: &SymbolSequence,
        alphabet: &Alphabet,
        cfg: &SelectionConfig,
    ) -> Result<ReplayReport> {
        let stats = ContextStats::count(seq.as_slice(), alphabet.size(), cfg.max_order);
        let mut model = base_model(alphabet, &stats)?;
        let mut report = ReplayReport::default();
        let mut level_start = 0;
        while level_start < self.entries.len() {
            let level = self.entries[level_start].level;
            let level_end = self.entries[level_start..]
                .iter()
                .position(|e| e.level != level)
                .map_or(self.entries.len(), |k| level_start + k);
            let base_bits = match cfg.cost_mode {
                CostMode::Exact => model_codelength(&model)?,
                _ => 0.0,
            };
            let mut additions = Vec::new();
            let mut i = level_start;
            while i < level_end {
                let context = &self.entries[i].context;
                let group_end = self.entries[i..level_end]
                    .iter()
                    .position(|e| &e.context != context)
                    .map_or(level_end, |k| i + k);
                let cand = candidate_for(context, &model, &stats)?;
                if cand.count() <= cfg.min_count {
                    report
                        .problems
                        .push(format!("context {context:?} is below the count threshold"));
                }
                let mut oracle = CostOracle::new(&model, cfg.cost_mode, base_bits);
                let (steps, set) = greedy(&cand, &mut oracle, level)?;
                let recorded = &self.entries[i..group_end];
                if steps.len() != recorded.len() {
                    report.problems.push(format!(
                        "context {context:?}: {} steps recorded, {} on replay",
                        recorded.len(),
                        steps.len()
                    ));
                }
                for (r, s) in recorded.iter().zip(&steps) {
                    report.checked += 1;
                    if r.accepted {
                        report.accepted += 1;
                        if !r.is_profitable() {
                            report.problems.push(format!(
                                "context {context:?} step {}: accepted with profit {}",
                                r.step,
                                r.profit()
                            ));
                        }
                    }
                    let close = |a: f64, b: f64| {
                        a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
                    };
                    if r.symbol != s.symbol
                        || r.accepted != s.accepted
                        || !close(r.marginal_cost, s.marginal_cost)
                        || !close(r.marginal_benefit, s.marginal_benefit)
                    {
                        report.problems.push(format!(
                            "context {context:?} step {}: recorded {:?}, replayed {:?}",
                            r.step, r, s
                        ));
                    }
                }
                if !set.is_empty() {
                    additions.push(ContextEntry::from_estimate(
                        cand.context.clone(),
                        &cand.estimate,
                        &set,
                    ));
                }
                i = group_end;
            }
            model = merge(&model, additions)?;
            level_start = level_end;
        }
        Ok(report)
    }
}

/// Greedy `Extend`: returns the steps taken and the chosen set.
fn greedy(
    cand: &Candidate,
    oracle: &mut CostOracle<'_>,
    level: usize,
) -> Result<(Vec<LedgerEntry>, Vec<Symbol>)> {
    let m = cand.lambda.len();
    let mut in_set = vec![false; m];
    let mut set = Vec::new();
    let mut st = cand.state();
    let mut benefit = 0.0;
    let mut cost = 0.0;
    let mut steps = Vec::new();
    while set.len() < m {
        let next_cost = oracle.cost(cand, set.len() + 1)?;
        let mut best: Option<(Symbol, f64, BenefitState)> = None;
        for (s, _) in in_set.iter().enumerate().filter(|(_, &used)| !used) {
            let next = cand.with_symbol(&st, s as Symbol);
            let b = cand.benefit_of(&next);
            if best.as_ref().is_none_or(|&(_, bb, _)| b > bb) {
                best = Some((s as Symbol, b, next));
            }
        }
        let (sym, next_benefit, next_state) = best.expect("a symbol outside the set exists");
        let marginal_benefit = next_benefit - benefit;
        let marginal_cost = next_cost - cost;
        let accepted = marginal_benefit - marginal_cost > 0.0;
        steps.push(LedgerEntry {
            level,
            context: cand.context.clone(),
            step: steps.len(),
            symbol: sym,
            set_cost: next_cost,
            set_benefit: next_benefit,
            marginal_cost,
            marginal_benefit,
            accepted,
        });
        if !accepted {
            break;
        }
        in_set[sym as usize] = true;
        set.push(sym);
        st = next_state;
        benefit = next_benefit;
        cost = next_cost;
    }
    set.sort_unstable();
    Ok((steps, set))
}

/// `Extend(w)`: the greedily chosen extension set (possibly empty).
pub fn extend(
    context: &[Symbol],
    model: &ExtensionModel,
    stats: &ContextStats,
    cfg: &SelectionConfig,
) -> Result<Vec<Symbol>> {
    let cand = candidate_for(context, model, stats)?;
    let base = match cfg.cost_mode {
        CostMode::Exact => model_codelength(model)?,
        _ => 0.0,
    };
    let mut oracle = CostOracle::new(model, cfg.cost_mode, base);
    Ok(greedy(&cand, &mut oracle, 0)?.1)
}

/// `D = {ε}`, `E(ε) = Σ`, `λ(·|ε)` from the unigram counts.
pub fn base_model(alphabet: &Alphabet, stats: &ContextStats) -> Result<ExtensionModel> {
    let m = alphabet.size();
    let all: Vec<Symbol> = (0..m).map(|s| s as Symbol).collect();
    let root = stats.root();
    let entry = if stats.context_count(root) == 0 {
        let uniform: Vec<(Symbol, Ratio)> =
            all.iter().map(|&s| (s, Ratio::new(1, m as u64))).collect();
        ContextEntry::with_lambdas(Vec::new(), &uniform)
    } else {
        let est = ContextEstimate::from_counts(stats.dense_next_counts(root))?;
        ContextEntry::from_estimate(Vec::new(), &est, &all)
    };
    ExtensionModel::new(alphabet.clone(), vec![entry])
}

fn merge(model: &ExtensionModel, additions: Vec<ContextEntry>) -> Result<ExtensionModel> {
    if additions.is_empty() {
        return Ok(model.clone());
    }
    let mut contexts = model.contexts().to_vec();
    contexts.extend(additions);
    ExtensionModel::new(model.alphabet().clone(), contexts)
}

/// What one `Refine` level did.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub candidates: usize,
    pub contexts_added: usize,
    pub extensions_added: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: ExtensionModel,
    pub ledger: DeltaLedger,
    pub levels: Vec<LevelSummary>,
    pub warnings: Vec<String>,
}

/// Runs `Refine` levels `1..=n_max` starting from `model`, whose contexts
/// must all be shorter than the first level.
pub fn refine(
    model: ExtensionModel,
    stats: &ContextStats,
    cfg: &SelectionConfig,
) -> Result<(ExtensionModel, DeltaLedger, Vec<LevelSummary>)> {
    cfg.validate()?;
    let mut model = model;
    let mut ledger = DeltaLedger::default();
    let mut levels = Vec::new();
    let mut previous = vec![stats.root()];
    for level in 1..=cfg.max_order.min(stats.depth_bound()) {
        let current: Vec<NodeId> = previous
            .iter()
            .flat_map(|&node| stats.children(node))
            .filter(|&(_, child)| stats.context_count(child) > cfg.min_count)
            .map(|(_, child)| child)
            .collect();
        if current.is_empty() {
            break;
        }
        let base_bits = match cfg.cost_mode {
            CostMode::Exact => model_codelength(&model)?,
            _ => 0.0,
        };
        let frozen = &model;
        let results: Vec<Result<Evaluated>> = current
            .par_iter()
            .map(|&node| {
                let cand = Candidate::new(frozen, stats, node)?;
                let mut oracle = CostOracle::new(frozen, cfg.cost_mode, base_bits);
                let (steps, set) = greedy(&cand, &mut oracle, level)?;
                Ok((cand, steps, set))
            })
            .collect();
        let mut additions = Vec::new();
        let mut summary = LevelSummary {
            level,
            candidates: current.len(),
            ..Default::default()
        };
        for r in results {
            let (cand, steps, set) = r?;
            ledger.entries.extend(steps);
            if !set.is_empty() {
                summary.contexts_added += 1;
                summary.extensions_added += set.len();
                additions.push(ContextEntry::from_estimate(cand.context, &cand.estimate, &set));
            }
        }
        model = merge(&model, additions)?;
        levels.push(summary);
        previous = current;
    }
    Ok((model, ledger, levels))
}

/// A candidate with its greedy steps and the selected set.
type Evaluated = (Candidate, Vec<LedgerEntry>, Vec<Symbol>);

/// Selects an extension model for `seq`.
pub fn fit(seq: &SymbolSequence, alphabet: &Alphabet, cfg: &SelectionConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    for &s in seq.as_slice() {
        alphabet.check_symbol(s)?;
    }
    let stats = ContextStats::count(seq.as_slice(), alphabet.size(), cfg.max_order);
    let mut warnings = Vec::new();
    if seq.is_empty() {
        warnings.push("empty corpus: returning the uniform order-0 model".to_string());
    }
    let base = base_model(alphabet, &stats)?;
    let (model, ledger, levels) = refine(base, &stats, cfg)?;
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report.to_string()));
    }
    Ok(FitOutcome {
        model,
        ledger,
        levels,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn cost_mode_parsing() {
        assert_eq!("mdl".parse::<CostMode>().unwrap(), CostMode::MdlApprox);
        assert_eq!("const:2".parse::<CostMode>().unwrap(), CostMode::Constant(2.0));
        assert_eq!("exact".parse::<CostMode>().unwrap(), CostMode::Exact);
        assert!("const:0".parse::<CostMode>().is_err());
        assert!("const:x".parse::<CostMode>().is_err());
        assert!("cheap".parse::<CostMode>().is_err());
    }

    #[test]
    fn four_term_cost() {
        let t = CostTerms::new(1024, 70, 1, 256, 16);
        let expected = 10.0 + 70f64.log2() + 8.0 + 17f64.log2();
        assert!(close(t.total(), expected));
        let full = CostTerms::new(4, 5, 5, 10, 10);
        assert_eq!(full.subset, 0.0);
    }

    fn binary() -> Alphabet {
        Alphabet::from_name("custom:01").unwrap()
    }

    fn seq(text: &str) -> SymbolSequence {
        binary().ingest(text.as_bytes())
    }

    #[test]
    fn constant_cost_is_linear() {
        let s = seq("0001000100010001");
        let stats = ContextStats::count(s.as_slice(), 2, 2);
        let model = base_model(&binary(), &stats).unwrap();
        let cfg = SelectionConfig {
            cost_mode: CostMode::Constant(2.0),
            ..Default::default()
        };
        assert_eq!(delta_cost(&[0], &[0, 1], &model, &stats, &cfg).unwrap(), 4.0);
        assert_eq!(delta_cost(&[0], &[], &model, &stats, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn two_symbol_benefit_by_hand() {
        // c(a|w) = 9, c(b|w) = 1 against a uniform current model.
        let s = seq("00");
        let stats = ContextStats::count(s.as_slice(), 2, 1);
        let model = base_model(&binary(), &stats).unwrap();
        let est = ContextEstimate::from_counts(vec![9, 1]).unwrap();
        let mut cand = Candidate::from_parts(&model, &stats, vec![1], est);
        cand.current = vec![0.5, 0.5];
        cand.current_total = 1.0;
        let b = cand.benefit(&[0]);
        let expected = 1.0 * ((1.0 - 0.9) / 0.5f64).log2() + 9.0 * (0.9f64 / 0.5).log2();
        assert!(close(b, expected));
        // λ equal to p̃ gives nothing.
        cand.current = cand.lambda.clone();
        assert!(close(cand.benefit(&[0]), 0.0));
        assert!(close(cand.benefit(&[0, 1]), 0.0));
    }

    #[test]
    fn full_set_drops_complement_term() {
        let s = seq("0");
        let stats = ContextStats::count(s.as_slice(), 2, 1);
        let model = base_model(&binary(), &stats).unwrap();
        let est = ContextEstimate::from_counts(vec![3, 1]).unwrap();
        let mut cand = Candidate::from_parts(&model, &stats, vec![0], est);
        cand.current = vec![0.5, 0.5];
        cand.current_total = 1.0;
        let expected = 3.0 * (0.75f64 / 0.5).log2() + 1.0 * (0.25f64 / 0.5).log2();
        assert!(close(cand.benefit(&[0, 1]), expected));
    }

    #[test]
    fn periodic_corpus_gets_order_one_contexts() {
        let s = seq(&"01".repeat(200));
        let out = fit(&s, &binary(), &SelectionConfig::default()).unwrap();
        let m = &out.model;
        assert!(m.find(&[0]).is_some());
        assert!(m.find(&[1]).is_some());
        assert!(m.cond_prob(1, &[0]) > 0.99);
        assert!(out.ledger.unsound_entries().is_empty());
    }

    #[test]
    fn high_threshold_keeps_base_model() {
        let s = seq(&"01".repeat(20));
        let cfg = SelectionConfig {
            min_count: 1000,
            ..Default::default()
        };
        let out = fit(&s, &binary(), &cfg).unwrap();
        assert_eq!(out.model.len(), 1);
        let cfg = SelectionConfig {
            max_order: 0,
            ..Default::default()
        };
        assert_eq!(fit(&s, &binary(), &cfg).unwrap().model.len(), 1);
    }

    #[test]
    fn empty_corpus_warns() {
        let out = fit(&seq(""), &binary(), &SelectionConfig::default()).unwrap();
        assert_eq!(out.model.len(), 1);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.model.validate().is_valid());
    }

    #[test]
    fn no_divergence_no_extensions() {
        // When the current model already predicts w's λ exactly, nothing pays.
        let s = seq(&"0110".repeat(30));
        let stats = ContextStats::count(s.as_slice(), 2, 1);
        let model = base_model(&binary(), &stats).unwrap();
        let node = stats.lookup(&[0]).unwrap();
        let mut cand = Candidate::new(&model, &stats, node).unwrap();
        cand.current = cand.lambda.clone();
        cand.current_total = cand.current.iter().sum();
        let mut oracle = CostOracle::new(&model, CostMode::MdlApprox, 0.0);
        let (steps, set) = greedy(&cand, &mut oracle, 1).unwrap();
        assert!(set.is_empty());
        assert_eq!(steps.len(), 1);
        assert!(!steps[0].accepted);
    }

    #[test]
    fn tie_goes_to_lowest_symbol() {
        let abcd = Alphabet::from_name("custom:abcd").unwrap();
        let s = abcd.ingest(b"a");
        let stats = ContextStats::count(s.as_slice(), 4, 1);
        let model = base_model(&abcd, &stats).unwrap();
        let est = ContextEstimate::from_counts(vec![60, 60, 40, 40]).unwrap();
        let mut cand = Candidate::from_parts(&model, &stats, vec![0], est);
        cand.current = vec![0.2, 0.2, 0.3, 0.3];
        assert_eq!(cand.benefit(&[0]), cand.benefit(&[1]));
        assert!(cand.benefit(&[0]) > cand.benefit(&[2]));
        cand.current_total = 1.0;
        let mut oracle = CostOracle::new(&model, CostMode::Constant(1.0), 0.0);
        let (steps, _) = greedy(&cand, &mut oracle, 1).unwrap();
        assert_eq!(steps[0].symbol, 0);
    }

    #[test]
    fn replay_matches_fit() {
        let text: String = (0..600).map(|i| if (i * 7) % 5 < 2 { '0' } else { '1' }).collect();
        let s = seq(&text);
        let cfg = SelectionConfig {
            max_order: 4,
            min_count: 2,
            ..Default::default()
        };
        let out = fit(&s, &binary(), &cfg).unwrap();
        let report = out.ledger.replay(&s, &binary(), &cfg).unwrap();
        assert!(report.is_clean(), "{:?}", report.problems);
        assert_eq!(report.checked, out.ledger.entries.len());
    }
}
