//! Acceptance gate. Prints one line per criterion and exits nonzero if any
//! criterion fails. Corpus-scale criteria use `data/canterbury` and
//! `data/kjv`; set `EXTLM_BROWN_DIR` to a directory of Brown corpus files to
//! run the Brown check as well.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{all_strings, big_log2, enumerate_trees, method_c, pascal, random_model, string_prob};
use extlm::estimate::estimate_lambda;
use extlm::eval::{message_entropy, split, NgramModel, SplitSpec};
use extlm::mdl::{dictionary_codelength, log_binomial, TreeShape};
use extlm::{
    decode, encode, fit, Alphabet, ContextEntry, ContextStats, CostMode, ExtensionModel, FitOutcome,
    Ratio, SelectionConfig, Symbol, SymbolSequence,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORDER: usize = 7;
const MIN_COUNT: u64 = 8;

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Line {
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Line {
    let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Line { name, verdict, detail }
}

fn report(line: &Line) {
    let tag = match line.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Skip => "SKIP",
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} {}: {}", line.name, line.detail).unwrap();
    out.flush().unwrap();
}

fn binary_toy() -> Line {
    let model = ExtensionModel::new(
        Alphabet::from_name("custom:01").unwrap(),
        vec![
            ContextEntry::with_lambdas(vec![], &[(0, Ratio::new(1, 2)), (1, Ratio::new(1, 2))]),
            ContextEntry::with_lambdas(vec![0], &[(0, Ratio::new(3, 4))]),
        ],
    )
    .unwrap();
    let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let p = model.cond_prob(1, &[0]);
    let d = model.expansion_factor(&[0]);
    let pass = model.cond_prob_exact(1, &[0]) == quarter
        && model.expansion_factor_exact(&[0]) == half
        && (p - 0.25).abs() <= 1e-12
        && (d - 0.5).abs() <= 1e-12;
    check("binary toy exactness", pass, format!("p(1|0) = {p}, delta(0) = {d}"))
}

fn normalization() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e0_0001);
    let mut worst = 0.0f64;
    let mut valid = true;
    for _ in 0..200 {
        let m = rng.gen_range(2..=3);
        let model = random_model(&mut rng, m, 6);
        valid &= model.validate().is_valid() && model.len() <= 6;
        for n in 0..=4 {
            let total: f64 = all_strings(m, n).iter().map(|s| string_prob(&model, s)).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        "normalization suite",
        valid && worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("200 models, n <= 4, max |sum - 1| = {worst:.2e}, {elapsed:.2?} (limit 1e-9, 10 s)"),
    )
}

fn estimator_oracle() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e0_0002);
    let mut mismatches = 0;
    let mut checked = 0;
    while checked < 1000 {
        let m = rng.gen_range(2..=70);
        let counts: Vec<u64> = (0..m)
            .map(|_| if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..500) })
            .collect();
        if counts.iter().all(|&c| c == 0) {
            continue;
        }
        let seq = common::realize_counts(&mut rng, &counts);
        let stats = ContextStats::count(&seq, m, 0);
        let est = estimate_lambda(&stats, stats.root()).unwrap();
        let want = method_c(&counts);
        if (0..m).any(|s| est.lambda(s as Symbol).to_big() != want[s]) {
            mismatches += 1;
        }
        checked += 1;
    }
    check(
        "estimator oracle",
        mismatches == 0,
        format!("{checked} count vectors, {mismatches} exact mismatches"),
    )
}

fn codelength_identities() -> Line {
    let rows = pascal(500);
    let mut worst = 0.0f64;
    for (n, row) in rows.iter().enumerate() {
        for (k, exact) in row.iter().enumerate() {
            let got = log_binomial(n as u64, k as u64).unwrap();
            worst = worst.max((got - big_log2(exact)).abs());
        }
    }
    let m = 2;
    let mut tree_mismatch = 0;
    let mut shapes = 0;
    for n in 1..=3 {
        let mut by_degree: std::collections::BTreeMap<Vec<u64>, std::collections::BTreeSet<Vec<u32>>> =
            Default::default();
        for word in enumerate_trees(m, n) {
            let mut d = vec![0u64; m + 1];
            for &mask in &word {
                d[mask.count_ones() as usize] += 1;
            }
            by_degree.entry(d).or_default().insert(word.iter().map(|w| w.count_ones()).collect());
        }
        for (d, plane) in by_degree {
            shapes += 1;
            let shape = TreeShape {
                alphabet_size: m,
                internal: n as u64,
                branching: d,
                extension_sizes: vec![0, 1, 0],
                floor_size: 0,
                dictionary_size: 1,
            };
            let bits = dictionary_codelength(&shape).unwrap().tree_enumeration;
            if BigUint::from(bits.exp2().round() as u64) != BigUint::from(plane.len()) {
                tree_mismatch += 1;
            }
        }
    }
    check(
        "codelength identities",
        worst <= 1e-9 && tree_mismatch == 0,
        format!(
            "log_binomial n <= 500 max error {worst:.2e}; tree count {shapes} degree vectors (m = 2, n <= 3), {tree_mismatch} mismatches"
        ),
    )
}

struct Corpus {
    alphabet: Alphabet,
    train: SymbolSequence,
    test: SymbolSequence,
    bytes: usize,
}

fn load_corpus(dirs: &[PathBuf]) -> Corpus {
    let alphabet = Alphabet::printable_ascii_70();
    let files: Vec<SymbolSequence> = dirs.iter().flat_map(|d| common::load_dir(d, &alphabet)).collect();
    let bytes = files.iter().map(|f| f.len()).sum();
    let (train, test) = split(&files, &SplitSpec::default()).unwrap();
    Corpus {
        alphabet,
        train,
        test,
        bytes,
    }
}

fn config(cost_mode: CostMode) -> SelectionConfig {
    SelectionConfig {
        max_order: ORDER,
        min_count: MIN_COUNT,
        cost_mode,
    }
}

fn selection_audit(corpus: &Corpus, first: &FitOutcome) -> Line {
    let cfg = config(CostMode::MdlApprox);
    let replay = first.ledger.replay(&corpus.train, &corpus.alphabet, &cfg).unwrap();
    let second = fit(&corpus.train, &corpus.alphabet, &cfg).unwrap();
    let identical = first.model.serialize().as_bytes() == second.model.serialize().as_bytes();
    check(
        "selection audit",
        replay.is_clean() && first.ledger.unsound_entries().is_empty() && identical,
        format!(
            "{} steps replayed, {} accepted, {} problems; repeat fit byte-identical: {identical}",
            replay.checked,
            replay.accepted,
            replay.problems.len()
        ),
    )
}

fn codec_achievability(model: &ExtensionModel, text: &[Symbol]) -> Line {
    let start = Instant::now();
    let stream = encode(model, text).unwrap();
    let back = decode(model, &stream).unwrap();
    let elapsed = start.elapsed();
    let ideal = model.log_prob(text, &[]);
    let bits = stream.payload_bits() as f64;
    let bound = ideal + 32.0 + 0.001 * text.len() as f64;
    let exact = back.as_slice() == text;
    check(
        "codec achievability",
        text.len() >= 1 << 20 && bits <= bound && exact && elapsed < Duration::from_secs(60),
        format!(
            "t = {}, payload {bits} bits, L(T) = {ideal:.1}, bound {bound:.1}, round trip exact: {exact}, {elapsed:.2?}",
            text.len()
        ),
    )
}

struct Scores {
    entropy: f64,
    params: usize,
}

fn directional_table(corpus: &Corpus, nem: &Scores) -> Line {
    let ngram = NgramModel::fit(corpus.train.as_slice(), corpus.alphabet.size(), 3);
    let ng_entropy = ngram.entropy(corpus.test.as_slice()).unwrap();
    let ng_params = ngram.realized_parameters();
    let gap = ng_entropy - nem.entropy;
    let ratio = nem.params as f64 / ng_params as f64;
    check(
        "directional comparison vs order-3 n-gram",
        corpus.bytes >= 1 << 20 && gap >= 0.3 && ratio <= 0.1,
        format!(
            "{} bytes; extension model {:.4} bits/char with {} params; 3-gram {ng_entropy:.4} with {ng_params}; gap {gap:.4} (>= 0.3), ratio {ratio:.4} (<= 0.1)",
            corpus.bytes, nem.entropy, nem.params
        ),
    )
}

fn constant_cost_direction(corpus: &Corpus, nem: &Scores) -> Line {
    let out = fit(&corpus.train, &corpus.alphabet, &config(CostMode::Constant(2.0))).unwrap();
    let entropy = message_entropy(&out.model, corpus.test.as_slice()).unwrap();
    let params = out.model.parameter_count();
    let growth = params as f64 / nem.params as f64;
    check(
        "constant-cost direction",
        entropy < nem.entropy && growth >= 2.0,
        format!(
            "const:2 {entropy:.4} bits/char with {params} params vs mdl {:.4} with {}; growth {growth:.2}x (>= 2)",
            nem.entropy, nem.params
        ),
    )
}

fn brown() -> Line {
    let name = "brown corpus stretch";
    let Some(dir) = std::env::var_os("EXTLM_BROWN_DIR").map(PathBuf::from) else {
        return Line {
            name,
            verdict: Verdict::Skip,
            detail: "corpus not supplied (set EXTLM_BROWN_DIR)".into(),
        };
    };
    let corpus = load_corpus(&[dir]);
    let out = fit(&corpus.train, &corpus.alphabet, &config(CostMode::MdlApprox)).unwrap();
    let entropy = message_entropy(&out.model, corpus.test.as_slice()).unwrap();
    let params = out.model.parameter_count();
    check(
        name,
        (1.85..=2.15).contains(&entropy) && (29_775..=267_975).contains(&params),
        format!("{entropy:.4} bits/char (1.85..2.15), {params} params (29775..267975)"),
    )
}

fn main() {
    let mut lines = Vec::new();
    let mut run = |line: Line| {
        report(&line);
        lines.push(line);
    };
    run(binary_toy());
    run(normalization());
    run(estimator_oracle());
    run(codelength_identities());

    let data = common::data_dir();
    let corpus = load_corpus(&[data.join("canterbury"), data.join("kjv")]);
    let start = Instant::now();
    let first = fit(&corpus.train, &corpus.alphabet, &config(CostMode::MdlApprox)).unwrap();
    let fit_time = start.elapsed();
    let nem = Scores {
        entropy: message_entropy(&first.model, corpus.test.as_slice()).unwrap(),
        params: first.model.parameter_count(),
    };
    println!(
        "  fitted order {ORDER}, c_min {MIN_COUNT}: |D| = {}, {} params, {fit_time:.2?}",
        first.model.len(),
        nem.params
    );

    run(selection_audit(&corpus, &first));
    // The codec text must be unseen: fit on the KJV training part, encode
    // all of Canterbury.
    let kjv = load_corpus(&[data.join("kjv")]);
    let kjv_model = fit(&kjv.train, &kjv.alphabet, &config(CostMode::MdlApprox)).unwrap().model;
    drop(kjv);
    let canterbury: Vec<Symbol> = common::load_dir(&data.join("canterbury"), &corpus.alphabet)
        .iter()
        .flat_map(|f| f.as_slice().to_vec())
        .collect();
    run(codec_achievability(&kjv_model, &canterbury));
    drop(kjv_model);
    run(directional_table(&corpus, &nem));
    run(constant_cost_direction(&corpus, &nem));
    run(brown());

    let failed = lines.iter().filter(|l| matches!(l.verdict, Verdict::Fail)).count();
    println!("{} criteria, {failed} failed", lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
