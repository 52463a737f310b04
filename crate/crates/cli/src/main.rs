use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use extlm::codec::{self, CodedStream};
use extlm::eval::{self, ModelClass, NgramModel, SplitSpec};
use extlm::mdl::total_codelength;
use extlm::select::{fit, CostMode, SelectionConfig};
use extlm::{Alphabet, ExtensionModel, SymbolSequence};

#[derive(Parser)]
#[command(name = "extlm", version, about = "Extension language models selected by description length")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a model on the training part of a corpus.
    Fit(FitArgs),
    /// Test message entropy of a model on held-out text.
    Eval(EvalArgs),
    /// Fit several model classes and orders and tabulate params vs entropy.
    Sweep(SweepArgs),
    /// Show one context of a model.
    Inspect(InspectArgs),
    /// Two-part codelength breakdown of a model on a corpus.
    Report(ReportArgs),
    /// Encode a file with a model.
    Compress(CodecArgs),
    /// Decode a file produced by `compress`.
    Decompress(CodecArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Files or directories; directories are read recursively in name order.
    #[arg(long, num_args = 1.., required = true)]
    corpus: Vec<PathBuf>,
    /// Fraction of each file used for training; the rest is test.
    #[arg(long, default_value_t = 0.9)]
    train_frac: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value = "printable-ascii-casefolded-70")]
    alphabet: String,
    /// Maximum context order.
    #[arg(short = 'n', long, default_value_t = 10)]
    order: usize,
    /// Candidates need more than this many occurrences.
    #[arg(long, default_value_t = 8)]
    cmin: u64,
    /// `mdl`, `const:<bits>` or `exact`.
    #[arg(long, default_value = "mdl")]
    cost_mode: String,
    #[arg(long)]
    out: PathBuf,
    /// Write the selection ledger as CSV.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Files or directories; the held-out tail of each file is scored.
    #[arg(long, num_args = 1.., required = true)]
    test: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    train_frac: f64,
    /// Also score an order-k n-gram fitted on the training part.
    #[arg(long)]
    ngram: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value = "printable-ascii-casefolded-70")]
    alphabet: String,
    /// `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "0..10")]
    orders: String,
    #[arg(long, default_value = "nem,ngram")]
    classes: String,
    /// Comma list of cost modes for extension models.
    #[arg(long, default_value = "mdl")]
    cost_modes: String,
    #[arg(long, default_value_t = 8)]
    cmin: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Context text; `\xHH` escapes are accepted.
    #[arg(long)]
    context: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long)]
    model: PathBuf,
    input: PathBuf,
    output: PathBuf,
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = fs::metadata(path).with_context(|| format!("cannot read {}", path.display()))?;
    if meta.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn read_corpus(paths: &[PathBuf], alphabet: &Alphabet) -> Result<Vec<SymbolSequence>> {
    let mut files = Vec::new();
    for p in paths {
        collect_files(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(extlm::Error::NoInput.into());
    }
    files
        .iter()
        .map(|f| {
            let bytes = fs::read(f).with_context(|| format!("cannot read {}", f.display()))?;
            Ok(alphabet.ingest(&bytes))
        })
        .collect()
}

fn load_model(path: &Path) -> Result<ExtensionModel> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(ExtensionModel::deserialize(&text)?)
}

fn split_corpus(
    paths: &[PathBuf],
    alphabet: &Alphabet,
    train_frac: f64,
) -> Result<(SymbolSequence, SymbolSequence)> {
    let spec = SplitSpec::new(train_frac)?;
    let files = read_corpus(paths, alphabet)?;
    Ok(eval::split(&files, &spec)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run_fit(a: FitArgs) -> Result<()> {
    let alphabet = Alphabet::from_name(&a.alphabet)?;
    let cost_mode: CostMode = a.cost_mode.parse()?;
    let cfg = SelectionConfig {
        max_order: a.order,
        min_count: a.cmin,
        cost_mode,
    };
    cfg.validate()?;
    let (train, _) = split_corpus(&a.split.corpus, &alphabet, a.split.train_frac)?;
    let outcome = fit(&train, &alphabet, &cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    fs::write(&a.out, outcome.model.serialize())
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    if let Some(path) = &a.ledger {
        let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        outcome.ledger.write_csv(&alphabet, io::BufWriter::new(f))?;
    }
    let accepted = outcome.ledger.accepted().count();
    if a.json {
        print_json(&serde_json::json!({
            "train_symbols": train.len(),
            "contexts": outcome.model.len(),
            "parameters": outcome.model.parameter_count(),
            "ledger_entries": outcome.ledger.entries.len(),
            "accepted": accepted,
            "levels": outcome.levels,
        }))?;
    } else {
        println!(
            "fitted {} contexts, {} extensions on {} symbols",
            outcome.model.len(),
            outcome.model.parameter_count(),
            train.len()
        );
        for l in &outcome.levels {
            println!(
                "  level {:>2}: {:>7} candidates, {:>6} contexts, {:>6} extensions",
                l.level, l.candidates, l.contexts_added, l.extensions_added
            );
        }
        println!("ledger: {} steps, {} accepted", outcome.ledger.entries.len(), accepted);
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    if a.train_frac >= 1.0 {
        bail!(extlm::Error::InvalidConfig(
            "--train-frac 1.0 leaves no test text to evaluate".into()
        ));
    }
    let model = load_model(&a.model)?;
    let alphabet = model.alphabet().clone();
    let (train, test) = split_corpus(&a.test, &alphabet, a.train_frac)?;
    let name = a.model.file_name().map_or("model".into(), |n| n.to_string_lossy().into_owned());
    let mut reports = vec![eval::evaluate_model(&name, &model, train.as_slice(), test.as_slice())?];
    if let Some(k) = a.ngram {
        let ng = NgramModel::fit(train.as_slice(), alphabet.size(), k);
        reports.push(eval::evaluate_ngram(&ng, train.as_slice(), test.as_slice())?);
    }
    if a.json {
        if reports.len() == 1 {
            print_json(&reports[0])?;
        } else {
            print_json(&reports)?;
        }
    } else {
        for r in &reports {
            println!(
                "{:<24} params {:>12}  test {:>10} symbols  {:.4} bits/symbol",
                r.model_name, r.parameter_count, r.test_symbols, r.test_entropy
            );
        }
    }
    Ok(())
}

fn parse_orders(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().context("bad --orders range")?;
        let hi: usize = hi.trim().parse().context("bad --orders range")?;
        if lo > hi {
            bail!(extlm::Error::InvalidConfig(format!("empty order range {spec}")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<usize>().context("bad --orders list"))
        .collect()
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let alphabet = Alphabet::from_name(&a.alphabet)?;
    let orders = parse_orders(&a.orders)?;
    let classes = a
        .classes
        .split(',')
        .map(|c| c.trim().parse::<ModelClass>())
        .collect::<extlm::Result<Vec<_>>>()?;
    let modes = a
        .cost_modes
        .split(',')
        .map(|c| c.trim().parse::<CostMode>())
        .collect::<extlm::Result<Vec<_>>>()?;
    if a.split.train_frac >= 1.0 {
        bail!(extlm::Error::InvalidConfig(
            "--train-frac 1.0 leaves no test text for the sweep".into()
        ));
    }
    let (train, test) = split_corpus(&a.split.corpus, &alphabet, a.split.train_frac)?;
    let settings = eval::sweep_settings(&classes, &orders, &modes);
    let rows = eval::efficiency_sweep(&train, &test, &alphabet, &settings, a.cmin)?;
    match &a.csv {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            eval::write_sweep_csv(&rows, io::BufWriter::new(f))?;
        }
        None => eval::write_sweep_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn run_inspect(a: InspectArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let bytes = extlm::corpus::unescape_bytes(&a.context)
        .ok_or_else(|| extlm::Error::InvalidConfig(format!("bad escape in context `{}`", a.context)))?;
    let context = model.alphabet().parse_context(&bytes);
    let record = eval::inspect(&model, &context)?;
    if a.json {
        print_json(&record)?;
    } else {
        print!("{record}");
    }
    Ok(())
}

fn run_report(a: ReportArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (train, _) = split_corpus(&a.split.corpus, model.alphabet(), a.split.train_frac)?;
    let report = total_codelength(&model, train.as_slice())?;
    if a.json {
        print_json(&report)?;
    } else {
        println!("L(D)      {:>16.3}", report.dictionary_bits);
        println!("L(E|D)    {:>16.3}", report.extension_bits);
        println!("L(c|D,E)  {:>16.3}", report.count_bits);
        println!("L(T|phi)  {:>16.3}", report.data_bits);
        println!("total     {:>16.3}", report.total);
        println!("symbols   {:>16}", train.len());
    }
    Ok(())
}

fn run_compress(a: CodecArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let alphabet = model.alphabet();
    if alphabet.is_lossy() {
        eprintln!(
            "warning: alphabet `{}` folds bytes; decompression will not restore the original \
             exactly (use byte-256 for archival)",
            alphabet.profile().descriptor()
        );
    }
    let bytes = fs::read(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let seq = alphabet.ingest(&bytes);
    let stream = codec::encode(&model, seq.as_slice())?;
    fs::write(&a.output, stream.to_bytes())
        .with_context(|| format!("cannot write {}", a.output.display()))?;
    Ok(())
}

fn run_decompress(a: CodecArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let bytes = fs::read(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let stream = CodedStream::from_bytes(&bytes)?;
    let seq = codec::decode(&model, &stream)?;
    fs::write(&a.output, model.alphabet().render(seq.as_slice()))
        .with_context(|| format!("cannot write {}", a.output.display()))?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EXTLM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| extlm::Error::InvalidConfig(format!("EXTLM_THREADS must be a count, got `{v}`")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<extlm::Error>() {
        return e.kind();
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<extlm::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return "io";
        }
    }
    "other"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Eval(a) => run_eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Inspect(a) => run_inspect(a),
        Command::Report(a) => run_report(a),
        Command::Compress(a) => run_compress(a),
        Command::Decompress(a) => run_decompress(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{}]: {}", error_kind(&e), message);
            ExitCode::FAILURE
        }
    }
}
