//! Two-part codelength of a model and a text.
//!
//! `L(T, φ) = L(D) + L(E|D) + L(c|D,E) + L(T|φ)`, all in ideal (real-valued)
//! bits. Only the lengths are computed; nothing is actually encoded.

use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::model::ExtensionModel;

/// Elias gamma length `2⌊log2 n⌋ + 1`; zero is coded as one.
pub fn elias_length(n: u64) -> f64 {
    let n = n.max(1);
    (2 * (63 - n.leading_zeros()) + 1) as f64
}

/// Uniform code for an integer in `0..=bound`.
pub fn bounded_integer_length(_value: u64, bound: u64) -> f64 {
    ((bound as f64) + 1.0).log2()
}

pub fn log2_factorial(n: u64) -> f64 {
    ln_factorial(n) / std::f64::consts::LN_2
}

/// `log2 C(n, k)`.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::BinomialDomain { n, k });
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= 64 {
        let base = (n - k) as f64;
        Ok((1..=k).map(|i| ((base + i as f64) / i as f64).log2()).sum())
    } else {
        Ok(log2_factorial(n) - log2_factorial(k) - log2_factorial(n - k))
    }
}

fn log_binomial_ok(n: u64, k: u64) -> f64 {
    log_binomial(n, k).expect("k <= n by construction")
}

/// `log2[(Σ parts − 1)! / Π parts_i!]`, the number of ordered trees with the
/// given vertex-degree counts. Zero when every part is zero.
pub fn log_multinomial(parts: &[u64]) -> f64 {
    let total: u64 = parts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let bits = log2_factorial(total - 1) - parts.iter().map(|&p| log2_factorial(p)).sum::<f64>();
    // A leaves-only "tree" gives log2(1/k); such trees have no internal vertices.
    bits.max(0.0)
}

/// `log2[(Σ parts)! / Π parts_i!]`.
pub fn log_multinomial_coefficient(parts: &[u64]) -> f64 {
    let total: u64 = parts.iter().sum();
    let bits = log2_factorial(total) - parts.iter().map(|&p| log2_factorial(p)).sum::<f64>();
    bits.max(0.0)
}

/// Shape of the suffix tree spanned by D plus extension-set sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeShape {
    pub alphabet_size: usize,
    /// `n`: internal vertices.
    pub internal: u64,
    /// `branching[i] = n_i`; `branching[0] = n_0` counts leaves.
    pub branching: Vec<u64>,
    /// `extension_sizes[i] = m_i`, contexts with exactly `i` extensions.
    pub extension_sizes: Vec<u64>,
    /// `|⌊D⌋|` excluding ε.
    pub floor_size: u64,
    /// `|D|`.
    pub dictionary_size: u64,
}

impl TreeShape {
    pub fn from_model(model: &ExtensionModel) -> Self {
        let m = model.alphabet_size();
        let mut branching = vec![0u64; m + 1];
        for b in model.suffix_tree_branching() {
            branching[b] += 1;
        }
        let mut extension_sizes = vec![0u64; m + 1];
        for entry in model.contexts() {
            extension_sizes[entry.extensions.len()] += 1;
        }
        let floor_size = (0..model.len())
            .filter(|&ci| !model.entry(ci).context.is_empty() && model.has_longer_context(ci))
            .count() as u64;
        Self {
            alphabet_size: m,
            internal: branching[1..].iter().sum(),
            branching,
            extension_sizes,
            floor_size,
            dictionary_size: model.len() as u64,
        }
    }

    /// `n_0 = 1 + Σ (i − 1) n_i`.
    pub fn expected_leaves(&self) -> u64 {
        1 + self
            .branching
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, &n)| (i as u64 - 1) * n)
            .sum::<u64>()
    }

    pub fn check(&self) -> Result<()> {
        let m = self.alphabet_size;
        if self.branching.len() != m + 1 || self.extension_sizes.len() != m + 1 {
            return Err(Error::InconsistentShape("vector lengths must be m + 1".into()));
        }
        if self.internal != self.branching[1..].iter().sum::<u64>() {
            return Err(Error::InconsistentShape("n ≠ Σ n_i".into()));
        }
        if self.branching[0] != self.expected_leaves() {
            return Err(Error::InconsistentShape(format!(
                "n_0 = {} but 1 + Σ(i−1)n_i = {}",
                self.branching[0],
                self.expected_leaves()
            )));
        }
        if self.extension_sizes.iter().sum::<u64>() != self.dictionary_size {
            return Err(Error::InconsistentShape("Σ m_i ≠ |D|".into()));
        }
        if self.floor_size > self.internal {
            return Err(Error::InconsistentShape("|⌊D⌋| > n".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DictionaryTerms {
    /// `L_Z(n)`.
    pub vertex_count: f64,
    /// `log C(n + m − 1, m − 1)`.
    pub branching_counts: f64,
    /// `log (n_0 + … + n_m − 1)! / (n_0! … n_m!)`.
    pub tree_enumeration: f64,
    /// `Σ n_i log C(m, i)`.
    pub edge_labels: f64,
    /// `L_{Z≤}(|⌊D⌋|, n)`.
    pub floor_size: f64,
    /// `log C(n + |⌊D⌋| − 1, |⌊D⌋| − 1)`.
    pub floor_identity: f64,
    pub total: f64,
}

pub fn dictionary_codelength(shape: &TreeShape) -> Result<DictionaryTerms> {
    shape.check()?;
    let m = shape.alphabet_size as u64;
    let n = shape.internal;
    let mut t = DictionaryTerms {
        vertex_count: elias_length(n),
        branching_counts: log_binomial_ok(n + m - 1, m - 1),
        ..Default::default()
    };
    if n > 0 {
        t.tree_enumeration = log_multinomial(&shape.branching);
        t.edge_labels = shape
            .branching
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &ni)| ni as f64 * log_binomial_ok(m, i as u64))
            .sum();
    }
    let f = shape.floor_size;
    t.floor_size = bounded_integer_length(f, n);
    if f > 0 {
        t.floor_identity = log_binomial_ok(n + f - 1, f - 1);
    }
    t.total = t.vertex_count
        + t.branching_counts
        + t.tree_enumeration
        + t.edge_labels
        + t.floor_size
        + t.floor_identity;
    Ok(t)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtensionTerms {
    /// `log C(|D| + m − 1, m − 1)`: the counts `{m_i}`.
    pub size_distribution: f64,
    /// `log C(|D|; {m_i})`: `|E(w)|` for each context.
    pub sizes: f64,
    /// `Σ m_i log C(m, i)`: each `E(w)` as a subset of Σ.
    pub subsets: f64,
    pub total: f64,
}

pub fn extensions_codelength(model: &ExtensionModel) -> ExtensionTerms {
    let shape = TreeShape::from_model(model);
    extension_terms(&shape)
}

fn extension_terms(shape: &TreeShape) -> ExtensionTerms {
    let m = shape.alphabet_size as u64;
    let d = shape.dictionary_size;
    let size_distribution = log_binomial_ok(d + m - 1, m - 1);
    let sizes = log_multinomial_coefficient(&shape.extension_sizes);
    let subsets = shape
        .extension_sizes
        .iter()
        .enumerate()
        .map(|(i, &mi)| mi as f64 * log_binomial_ok(m, i as u64))
        .sum();
    ExtensionTerms {
        size_distribution,
        sizes,
        subsets,
        total: size_distribution + sizes + subsets,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CountTerms {
    /// `L_Z(c(ε))`, i.e. `|T|`.
    pub corpus_length: f64,
    /// `Σ_w log C(c(w) + |⌈w⌉|, c(w))`.
    pub context_partition: f64,
    /// `Σ_w log C(c(w) + |E(w)|, |E(w)|)`.
    pub extension_partition: f64,
    pub total: f64,
}

pub fn counts_codelength(model: &ExtensionModel) -> CountTerms {
    let root_count = model.find(&[]).map_or(0, |ci| model.entry(ci).count);
    let mut t = CountTerms {
        corpus_length: elias_length(root_count),
        ..Default::default()
    };
    for (ci, entry) in model.contexts().iter().enumerate() {
        let c = entry.count;
        let children = model.ceil_of(ci).count() as u64;
        t.context_partition += log_binomial_ok(c + children, c);
        let k = entry.extensions.len() as u64;
        t.extension_partition += log_binomial_ok(c + k, k);
    }
    t.total = t.corpus_length + t.context_partition + t.extension_partition;
    t
}

/// `L(T|φ) = −log2 p̃(T|φ)` with an empty starting history.
pub fn data_codelength(model: &ExtensionModel, seq: &[crate::corpus::Symbol]) -> f64 {
    model.log_prob(seq, &[])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodelengthReport {
    #[serde(rename = "L_D")]
    pub dictionary_bits: f64,
    #[serde(rename = "L_E_given_D")]
    pub extension_bits: f64,
    #[serde(rename = "L_c")]
    pub count_bits: f64,
    #[serde(rename = "L_T")]
    pub data_bits: f64,
    pub total: f64,
    pub shape: TreeShape,
    pub dictionary: DictionaryTerms,
    pub extensions: ExtensionTerms,
    pub counts: CountTerms,
}

impl CodelengthReport {
    /// `L(φ)`.
    pub fn model_bits(&self) -> f64 {
        self.dictionary_bits + self.extension_bits + self.count_bits
    }
}

/// `L(D) + L(E|D) + L(c|D,E)`.
pub fn model_codelength(model: &ExtensionModel) -> Result<f64> {
    let shape = TreeShape::from_model(model);
    let d = dictionary_codelength(&shape)?;
    let e = extension_terms(&shape);
    let c = counts_codelength(model);
    Ok(d.total + e.total + c.total)
}

pub fn total_codelength(
    model: &ExtensionModel,
    seq: &[crate::corpus::Symbol],
) -> Result<CodelengthReport> {
    let shape = TreeShape::from_model(model);
    let dictionary = dictionary_codelength(&shape)?;
    let extensions = extension_terms(&shape);
    let counts = counts_codelength(model);
    let data_bits = data_codelength(model, seq);
    Ok(CodelengthReport {
        dictionary_bits: dictionary.total,
        extension_bits: extensions.total,
        count_bits: counts.total,
        data_bits,
        total: dictionary.total + extensions.total + counts.total + data_bits,
        shape,
        dictionary,
        extensions,
        counts,
    })
}
