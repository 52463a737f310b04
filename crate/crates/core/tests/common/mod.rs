#![allow(dead_code)]

use std::path::{Path, PathBuf};

use extlm::{Alphabet, ContextEntry, ExtensionModel, Ratio, Symbol, SymbolSequence};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn custom_alphabet(m: usize) -> Alphabet {
    let letters: String = (b'a'..b'a' + m as u8).map(char::from).collect();
    Alphabet::from_name(&format!("custom:{letters}")).unwrap()
}

/// Random valid model over `m` symbols with at most `max_contexts` contexts.
///
/// Every λ is strictly positive and a partial extension set keeps some slack,
/// so every δ is well defined.
pub fn random_model<R: Rng>(rng: &mut R, m: usize, max_contexts: usize) -> ExtensionModel {
    let mut entries = vec![random_entry(rng, Vec::new(), &(0..m as Symbol).collect::<Vec<_>>(), m)];
    let mut used: Vec<Vec<Symbol>> = vec![Vec::new()];
    let extra = rng.gen_range(0..max_contexts);
    for _ in 0..extra {
        let len = rng.gen_range(1..=3);
        let ctx: Vec<Symbol> = (0..len).map(|_| rng.gen_range(0..m) as Symbol).collect();
        if used.contains(&ctx) {
            continue;
        }
        let mut set: Vec<Symbol> = (0..m as Symbol).filter(|_| rng.gen_bool(0.5)).collect();
        if set.is_empty() {
            set.push(rng.gen_range(0..m) as Symbol);
        }
        entries.push(random_entry(rng, ctx.clone(), &set, m));
        used.push(ctx);
    }
    ExtensionModel::new(custom_alphabet(m), entries).unwrap()
}

fn random_entry<R: Rng>(rng: &mut R, ctx: Vec<Symbol>, set: &[Symbol], m: usize) -> ContextEntry {
    let weights: Vec<u64> = set.iter().map(|_| rng.gen_range(1..=9)).collect();
    let slack = if set.len() == m { 0 } else { rng.gen_range(1..=9) };
    let den = weights.iter().sum::<u64>() + slack;
    let lambdas: Vec<(Symbol, Ratio)> = set
        .iter()
        .zip(&weights)
        .map(|(&s, &w)| (s, Ratio::new(w, den)))
        .collect();
    ContextEntry::with_lambdas(ctx, &lambdas)
}

/// All strings of length `n` over `m` symbols.
pub fn all_strings(m: usize, n: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..m as Symbol).map(move |x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn string_prob(model: &ExtensionModel, s: &[Symbol]) -> f64 {
    (0..s.len()).map(|i| model.cond_prob(s[i], &s[..i])).product()
}

pub fn string_prob_exact(model: &ExtensionModel, s: &[Symbol]) -> BigRational {
    let mut p = BigRational::from_integer(BigInt::from(1));
    for i in 0..s.len() {
        p *= model.cond_prob_exact(s[i], &s[..i]);
    }
    p
}

/// Shuffled sequence whose symbol histogram is exactly `counts`.
pub fn realize_counts<R: Rng>(rng: &mut R, counts: &[u64]) -> Vec<Symbol> {
    let mut seq: Vec<Symbol> = counts
        .iter()
        .enumerate()
        .flat_map(|(s, &c)| std::iter::repeat_n(s as Symbol, c as usize))
        .collect();
    seq.shuffle(rng);
    seq
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Every file of `dir`, sorted by name, mapped through `alphabet`.
pub fn load_dir(dir: &Path, alphabet: &Alphabet) -> Vec<SymbolSequence> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    names
        .iter()
        .map(|p| alphabet.ingest(&std::fs::read(p).unwrap()))
        .collect()
}

/// `log2` of a big integer, good to about 1e-15 relative.
pub fn big_log2(x: &num_bigint::BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 60 {
        let v: u64 = x.try_into().unwrap();
        return (v as f64).log2();
    }
    let shift = bits - 60;
    let top: u64 = (x >> shift).try_into().unwrap();
    (top as f64).log2() + shift as f64
}

/// Pascal's triangle rows `0..=n_max` as exact big integers.
pub fn pascal(n_max: usize) -> Vec<Vec<num_bigint::BigUint>> {
    let mut rows: Vec<Vec<num_bigint::BigUint>> = vec![vec![1u32.into()]];
    for n in 1..=n_max {
        let prev = &rows[n - 1];
        let mut row = Vec::with_capacity(n + 1);
        row.push(1u32.into());
        for k in 1..n {
            row.push(&prev[k - 1] + &prev[k]);
        }
        row.push(1u32.into());
        rows.push(row);
    }
    rows
}

/// Preorder child-set words of every suffix tree over `m` symbols with
/// exactly `internal` internal vertices. Each vertex is the bitmask of the
/// symbols labelling its child edges.
pub fn enumerate_trees(m: usize, internal: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut word = Vec::new();
    grow(m, internal, 1, 0, &mut word, &mut out);
    out
}

fn grow(m: usize, internal: usize, open: usize, used: usize, word: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if open == 0 {
        if used == internal {
            out.push(word.clone());
        }
        return;
    }
    for mask in 0u32..(1 << m) {
        let deg = mask.count_ones() as usize;
        let used = used + usize::from(deg > 0);
        if used > internal {
            continue;
        }
        word.push(mask);
        grow(m, internal, open - 1 + deg, used, word, out);
        word.pop();
    }
}

/// Method C straight from the counts: seen symbols get `c(σ)/(c + #)`, the
/// novel ones share `#/(c + #)` evenly, with `# = min(seen, unseen)`.
pub fn method_c(counts: &[u64]) -> Vec<BigRational> {
    let m = counts.len() as i64;
    let c: i64 = counts.iter().map(|&x| x as i64).sum();
    let seen = counts.iter().filter(|&&x| x > 0).count() as i64;
    let weight = seen.min(m - seen);
    counts
        .iter()
        .map(|&x| {
            if x > 0 {
                BigRational::new(BigInt::from(x), BigInt::from(c + weight))
            } else {
                BigRational::new(BigInt::from(weight), BigInt::from((m - seen) * (c + weight)))
            }
        })
        .collect()
}
