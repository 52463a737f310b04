//! Train/test protocol, message entropy, an order-k n-gram baseline and the
//! parameter/entropy sweep.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{escape_bytes, Alphabet, ContextStats, Symbol, SymbolSequence};
use crate::error::{Error, Result};
use crate::estimate::lambda_from_summary;
use crate::mdl::{elias_length, log_binomial, total_codelength, CodelengthReport};
use crate::model::ExtensionModel;
use crate::select::{fit, CostMode, SelectionConfig};

/// Per-file prefix split: the first `⌊fraction·len⌋` symbols of each file
/// train, the rest test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.9 }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must be in (0, 1], got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction })
    }

    pub fn train_len(&self, len: usize) -> usize {
        ((self.train_fraction * len as f64).floor() as usize).min(len)
    }
}

/// Splits every file and concatenates the parts in file order.
pub fn split(files: &[SymbolSequence], spec: &SplitSpec) -> Result<(SymbolSequence, SymbolSequence)> {
    let spec = SplitSpec::new(spec.train_fraction)?;
    if files.is_empty() {
        return Err(Error::NoInput);
    }
    // The parts inherit the already-checked symbols of their files.
    let m = Symbol::MAX as usize + 1;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for f in files {
        let cut = spec.train_len(f.len());
        train.extend_from_slice(&f.as_slice()[..cut]);
        test.extend_from_slice(&f.as_slice()[cut..]);
    }
    Ok((SymbolSequence::new(train, m)?, SymbolSequence::new(test, m)?))
}

/// Bits per symbol of `test` under `model`, histories starting empty.
pub fn message_entropy(model: &ExtensionModel, test: &[Symbol]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTest);
    }
    Ok(model.log_prob(test, &[]) / test.len() as f64)
}

/// Fixed-order Markov model with method-C estimates per state. The first
/// `k` symbols of a text are predicted from their shorter history; a state
/// never seen in training predicts uniformly.
#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    stats: ContextStats,
}

impl NgramModel {
    pub fn fit(train: &[Symbol], alphabet_size: usize, order: usize) -> Self {
        Self {
            order,
            stats: ContextStats::count(train, alphabet_size, order),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet_size(&self) -> usize {
        self.stats.alphabet_size()
    }

    /// `p(σ | history)`; only the last `k` symbols of `history` matter.
    pub fn cond_prob(&self, symbol: Symbol, history: &[Symbol]) -> f64 {
        let m = self.alphabet_size();
        let keep = history.len().min(self.order);
        let state = &history[history.len() - keep..];
        match self.stats.lookup(state) {
            Some(node) if self.stats.context_count(node) > 0 => {
                let total = self.stats.context_count(node);
                let seen = self.stats.next_counts(node).count();
                let novel = crate::estimate::novel_weight(seen, m);
                let c = self.stats.next_count(node, symbol);
                lambda_from_summary(c, total, novel, seen, m).to_f64()
            }
            _ => 1.0 / m as f64,
        }
    }

    pub fn log_prob(&self, seq: &[Symbol]) -> f64 {
        let mut bits = 0.0;
        for i in 0..seq.len() {
            let lo = i.saturating_sub(self.order);
            let p = self.cond_prob(seq[i], &seq[lo..i]);
            bits -= p.log2();
        }
        bits
    }

    pub fn entropy(&self, test: &[Symbol]) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::EmptyTest);
        }
        Ok(self.log_prob(test) / test.len() as f64)
    }

    /// States of full length `k` observed in training.
    pub fn observed_states(&self) -> Vec<crate::corpus::NodeId> {
        let mut level = vec![self.stats.root()];
        for _ in 0..self.order {
            level = level
                .iter()
                .flat_map(|&n| self.stats.children(n).map(|(_, c)| c))
                .collect();
        }
        level
    }

    /// `m^(k+1)`, saturating.
    pub fn nominal_parameters(&self) -> u128 {
        (self.alphabet_size() as u128).saturating_pow(self.order as u32 + 1)
    }

    /// `m` parameters for each observed state.
    pub fn realized_parameters(&self) -> u64 {
        self.observed_states().len() as u64 * self.alphabet_size() as u64
    }

    /// Two-part codelength of the n-gram: the number of observed states,
    /// each state's identity (`k log2 m`), its count and its frequency
    /// vector, then the training data.
    pub fn total_codelength(&self, train: &[Symbol]) -> f64 {
        let m = self.alphabet_size() as u64;
        let states = self.observed_states();
        let mut bits = elias_length(states.len() as u64);
        for node in states {
            let c = self.stats.context_count(node);
            bits += self.order as f64 * (m as f64).log2();
            bits += elias_length(c);
            bits += log_binomial(c + m - 1, m - 1).unwrap_or(0.0);
        }
        bits + self.log_prob(train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model_name: String,
    /// Extension pairs for extension models; realized parameters for n-grams.
    pub parameter_count: u64,
    /// Only meaningful for n-grams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nominal_parameters: Option<u128>,
    pub train_bits: f64,
    pub test_bits: f64,
    pub test_symbols: usize,
    pub test_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codelength: Option<CodelengthReport>,
}

/// Evaluates an extension model. `train` may be empty, `test` may not.
pub fn evaluate_model(
    name: &str,
    model: &ExtensionModel,
    train: &[Symbol],
    test: &[Symbol],
) -> Result<EvalReport> {
    let test_entropy = message_entropy(model, test)?;
    let codelength = if train.is_empty() {
        None
    } else {
        Some(total_codelength(model, train)?)
    };
    Ok(EvalReport {
        model_name: name.to_string(),
        parameter_count: model.parameter_count() as u64,
        nominal_parameters: None,
        train_bits: codelength.as_ref().map_or(0.0, |c| c.data_bits),
        test_bits: test_entropy * test.len() as f64,
        test_symbols: test.len(),
        test_entropy,
        codelength,
    })
}

pub fn evaluate_ngram(model: &NgramModel, train: &[Symbol], test: &[Symbol]) -> Result<EvalReport> {
    let test_entropy = model.entropy(test)?;
    Ok(EvalReport {
        model_name: format!("ngram-{}", model.order()),
        parameter_count: model.realized_parameters(),
        nominal_parameters: Some(model.nominal_parameters()),
        train_bits: model.log_prob(train),
        test_bits: test_entropy * test.len() as f64,
        test_symbols: test.len(),
        test_entropy,
        codelength: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Nem,
    Ngram,
}

impl std::str::FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nem" | "extension" => Ok(ModelClass::Nem),
            "ngram" => Ok(ModelClass::Ngram),
            _ => Err(Error::InvalidConfig(format!("unknown model class `{s}`"))),
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::Nem => "nem",
            ModelClass::Ngram => "ngram",
        })
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model_class: ModelClass,
    pub order: usize,
    /// Cost mode for extension models, empty for n-grams.
    pub cost_mode: String,
    pub params: u64,
    pub total_codelength: f64,
    pub test_entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSetting {
    pub class: ModelClass,
    pub order: usize,
    pub cost_mode: CostMode,
}

/// Every (class, order, cost mode) combination; cost modes only multiply
/// extension-model settings.
pub fn sweep_settings(classes: &[ModelClass], orders: &[usize], cost_modes: &[CostMode]) -> Vec<SweepSetting> {
    let mut out = Vec::new();
    for &class in classes {
        for &order in orders {
            match class {
                ModelClass::Nem => out.extend(cost_modes.iter().map(|&cost_mode| SweepSetting {
                    class,
                    order,
                    cost_mode,
                })),
                ModelClass::Ngram => out.push(SweepSetting {
                    class,
                    order,
                    cost_mode: CostMode::MdlApprox,
                }),
            }
        }
    }
    out
}

/// Fits and scores each setting; rows come back in setting order.
pub fn efficiency_sweep(
    train: &SymbolSequence,
    test: &SymbolSequence,
    alphabet: &Alphabet,
    settings: &[SweepSetting],
    min_count: u64,
) -> Result<Vec<SweepRow>> {
    settings
        .par_iter()
        .map(|s| match s.class {
            ModelClass::Nem => {
                let cfg = SelectionConfig {
                    max_order: s.order,
                    min_count,
                    cost_mode: s.cost_mode,
                };
                let out = fit(train, alphabet, &cfg)?;
                let report = total_codelength(&out.model, train.as_slice())?;
                Ok(SweepRow {
                    model_class: s.class,
                    order: s.order,
                    cost_mode: s.cost_mode.to_string(),
                    params: out.model.parameter_count() as u64,
                    total_codelength: report.total,
                    test_entropy: message_entropy(&out.model, test.as_slice())?,
                })
            }
            ModelClass::Ngram => {
                let ngram = NgramModel::fit(train.as_slice(), alphabet.size(), s.order);
                Ok(SweepRow {
                    model_class: s.class,
                    order: s.order,
                    cost_mode: String::new(),
                    params: ngram.realized_parameters(),
                    total_codelength: ngram.total_codelength(train.as_slice()),
                    test_entropy: ngram.entropy(test.as_slice())?,
                })
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectExtension {
    pub symbol: Symbol,
    pub text: String,
    pub count: u64,
    pub lambda: String,
    pub probability: f64,
    /// `p̃(σ|⌊w⌋)`, what the context would predict without this extension.
    pub floor_probability: f64,
    /// More likely in `w` than in `⌊w⌋`.
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectRecord {
    pub requested: String,
    /// The context reported: the request itself or its longest suffix in D.
    pub context: String,
    pub exact: bool,
    pub count: u64,
    pub novel_weight: u64,
    pub expansion_factor: f64,
    pub extensions: Vec<InspectExtension>,
    pub floor: Option<String>,
    pub ceil: Vec<String>,
}

impl InspectRecord {
    /// `+E(w)`.
    pub fn positive(&self) -> impl Iterator<Item = &InspectExtension> {
        self.extensions.iter().filter(|e| e.positive)
    }

    /// `−E(w)`.
    pub fn negative(&self) -> impl Iterator<Item = &InspectExtension> {
        self.extensions.iter().filter(|e| !e.positive)
    }
}

fn quote(alphabet: &Alphabet, ctx: &[Symbol]) -> String {
    format!("\"{}\"", escape_bytes(&alphabet.render(ctx)))
}

pub fn inspect(model: &ExtensionModel, context: &[Symbol]) -> Result<InspectRecord> {
    let alphabet = model.alphabet();
    let ci = model
        .longest_context(context)
        .ok_or_else(|| Error::InvalidModel("model has no empty context".into()))?;
    let entry = model.entry(ci);
    let floor_row: Vec<f64> = match model.floor_of(ci) {
        Some(f) => model.context_distribution(f).to_vec(),
        None => vec![0.0; model.alphabet_size()],
    };
    let row = model.context_distribution(ci);
    let extensions = entry
        .extensions
        .iter()
        .map(|e| {
            let s = e.symbol as usize;
            let probability = row[s];
            InspectExtension {
                symbol: e.symbol,
                text: escape_bytes(&alphabet.render(&[e.symbol])),
                count: e.count,
                lambda: e.lambda.reduced().to_string(),
                probability,
                floor_probability: floor_row[s],
                positive: probability > floor_row[s],
            }
        })
        .collect();
    Ok(InspectRecord {
        requested: quote(alphabet, context),
        context: quote(alphabet, &entry.context),
        exact: entry.context.len() == context.len(),
        count: entry.count,
        novel_weight: entry.novel_weight,
        expansion_factor: model.context_expansion_factor(ci),
        extensions,
        floor: model.floor_of(ci).map(|f| quote(alphabet, &model.entry(f).context)),
        ceil: model
            .ceil_of(ci)
            .map(|c| quote(alphabet, &model.entry(c).context))
            .collect(),
    })
}

impl fmt::Display for InspectRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            writeln!(f, "context {}", self.context)?;
        } else {
            writeln!(
                f,
                "context {} not in D; longest suffix in D is {}",
                self.requested, self.context
            )?;
        }
        writeln!(
            f,
            "  c(w) = {}  #(w) = {}  delta = {:.6}",
            self.count, self.novel_weight, self.expansion_factor
        )?;
        match &self.floor {
            Some(fl) => writeln!(f, "  floor {fl}")?,
            None => writeln!(f, "  floor (none)")?,
        }
        if !self.ceil.is_empty() {
            writeln!(f, "  ceil  {}", self.ceil.join(" "))?;
        }
        let list = |it: &mut dyn Iterator<Item = &InspectExtension>| {
            it.map(|e| e.text.clone()).collect::<Vec<_>>().join(",")
        };
        writeln!(f, "  +E(w) {{{}}}", list(&mut self.positive()))?;
        writeln!(f, "  -E(w) {{{}}}", list(&mut self.negative()))?;
        for e in &self.extensions {
            writeln!(
                f,
                "  {} {:<4} c={:<8} lambda={:<12} p={:.6} floor_p={:.6}",
                if e.positive { '+' } else { '-' },
                e.text,
                e.count,
                e.lambda,
                e.probability,
                e.floor_probability
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::Ratio;
    use crate::model::ContextEntry;

    fn bin() -> Alphabet {
        Alphabet::from_name("custom:01").unwrap()
    }

    #[test]
    fn prefix_split_per_file() {
        let a = bin().ingest(b"0101010101");
        let (train, test) = split(std::slice::from_ref(&a), &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
        let b = bin().ingest(b"11110");
        let (train, test) = split(&[a, b], &SplitSpec::default()).unwrap();
        assert_eq!(train.as_slice(), bin().ingest(b"0101010101111").as_slice());
        assert_eq!(test.as_slice(), bin().ingest(b"10").as_slice());
        assert!(matches!(split(&[], &SplitSpec::default()), Err(Error::NoInput)));
        assert!(SplitSpec::new(0.0).is_err());
        assert!(SplitSpec::new(1.5).is_err());
    }

    #[test]
    fn full_train_fraction_leaves_no_test() {
        let a = bin().ingest(b"0101");
        let (_, test) = split(&[a], &SplitSpec::new(1.0).unwrap()).unwrap();
        assert!(test.is_empty());
        let model = ExtensionModel::new(
            bin(),
            vec![ContextEntry::with_lambdas(vec![], &[(0, Ratio::new(1, 2)), (1, Ratio::new(1, 2))])],
        )
        .unwrap();
        assert!(matches!(message_entropy(&model, test.as_slice()), Err(Error::EmptyTest)));
        assert_eq!(message_entropy(&model, &[0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn unigram_on_uniform_data() {
        let abcd = Alphabet::from_name("custom:abcd").unwrap();
        let text = abcd.ingest(&b"abcd".repeat(100));
        let ng = NgramModel::fit(text.as_slice(), 4, 0);
        assert!((ng.entropy(text.as_slice()).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(ng.nominal_parameters(), 4);
        assert_eq!(ng.realized_parameters(), 4);
        let ng2 = NgramModel::fit(text.as_slice(), 4, 2);
        assert!(ng2.entropy(text.as_slice()).unwrap() < 0.1);
        assert_eq!(ng2.nominal_parameters(), 64);
        assert_eq!(ng2.realized_parameters(), 16);
    }

    #[test]
    fn inspect_falls_back_to_suffix() {
        let s = bin().ingest(&b"01".repeat(100));
        let out = fit(&s, &bin(), &SelectionConfig::default()).unwrap();
        let rec = inspect(&out.model, &[1, 1, 0]).unwrap();
        assert!(!rec.exact);
        assert_eq!(rec.context, "\"0\"");
        // Suppressing 0 after "0" is cheaper than boosting 1: a negative extension.
        assert_eq!(rec.negative().map(|e| e.symbol).collect::<Vec<_>>(), vec![0]);
        assert!(out.model.cond_prob(1, &[0]) > 0.99);
        let root = inspect(&out.model, &[]).unwrap();
        assert!(root.exact);
        assert_eq!(root.extensions.len(), 2);
        assert!(root.floor.is_none());
        assert!(format!("{rec}").contains("-E(w) {0}"));
    }
}
