//! `morphal` command-line interface.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use morphal::adapter::{self, ExternalLearnerSpec};
use morphal::driver::{self, LearnerChoice, RunConfig};
use morphal::strategies::{self, ScoredExample, SelectionConfig, StrategyKind};
use morphal::{corpus, metrics, rng, ColumnOrder, Dataset, ExampleId, PredictionSet};
use serde_json::json;

#[derive(Parser)]
#[command(name = "morphal", version, about = "Active-learning simulation for morphological inflection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iterated active-learning experiment and write reports.
    Simulate(SimulateArgs),
    /// Select a batch from a prediction dump; prints ids in rank order.
    Select(SelectArgs),
    /// Exact-match accuracy of a prediction dump.
    Score(DumpGoldArgs),
    /// Point-biserial correlation between top-1 log-likelihood and correctness.
    Pbcc(DumpGoldArgs),
    /// Re-emit summary.csv and deltas.csv from a records.jsonl file.
    Report(ReportArgs),
    /// Check a prediction dump against the adapter protocol.
    ValidateDump(ValidateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Column order of inflection files: lemma-form-tags or lemma-tags-form.
    #[arg(long, default_value = "lemma-form-tags")]
    order: ColumnOrder,
}

#[derive(Args)]
struct SimulateArgs {
    /// Inflection data file (three tab-separated columns).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    data_args: DataArgs,
    /// Strategy name, a comma-separated list, or `all`.
    #[arg(long)]
    strategy: String,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    seed_size: u64,
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    cycles: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    beam: u64,
    #[arg(long, default_value_t = strategies::DEFAULT_TAU)]
    tau: f64,
    /// Number of independent seed runs.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    test_size: u64,
    #[arg(long, default_value_t = 0)]
    dev_size: u64,
    /// Built-in learner (the only accepted value).
    #[arg(long, default_value = "builtin", conflicts_with = "learner_cmd")]
    learner: String,
    /// External learner command line, split on whitespace.
    #[arg(long)]
    learner_cmd: Option<String>,
    /// Working directory for external learners (default: <out>/models).
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Per-invocation timeout for external learners, in seconds.
    #[arg(long, default_value_t = 3600, value_parser = clap::value_parser!(u64).range(1..))]
    learner_timeout: u64,
    #[arg(long)]
    out: PathBuf,
    /// Draw the selection pool from the test ids instead of a separate pool.
    #[arg(long)]
    pool_from_test: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct DumpGoldArgs {
    /// Prediction dump (example_id, lemma, tags, rank, form, log_likelihood).
    #[arg(long)]
    dump: PathBuf,
    /// Inflection file with gold forms; example ids are line positions.
    #[arg(long)]
    gold: PathBuf,
    #[command(flatten)]
    data_args: DataArgs,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    dump: PathBuf,
    /// Gold file, required by the oracle strategies.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[command(flatten)]
    data_args: DataArgs,
    #[arg(long)]
    strategy: StrategyKind,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = strategies::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dump: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_dataset(path: &Path, order: ColumnOrder) -> Result<Dataset> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    corpus::parse_unimorph_bytes(&bytes, order).with_context(|| format!("in {}", path.display()))
}

fn load_dump(path: &Path) -> Result<Vec<PredictionSet>> {
    adapter::parse_dump(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn gold_map(data: &Dataset) -> HashMap<ExampleId, String> {
    data.triples.iter().map(|t| (t.id, t.form.clone())).collect()
}

fn parse_strategies(s: &str) -> Result<Vec<StrategyKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(StrategyKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in s.split(',') {
        let kind: StrategyKind = name.trim().parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let data = load_dataset(&args.data, args.data_args.order)?;
    let learner = match &args.learner_cmd {
        Some(cmd) => {
            let command: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            if command.is_empty() {
                bail!("--learner-cmd is empty");
            }
            LearnerChoice::External(ExternalLearnerSpec {
                command,
                model_dir: args.model_dir.clone().unwrap_or_else(|| args.out.join("models")),
                beam: args.beam as usize,
                timeout_seconds: args.learner_timeout,
            })
        }
        None if args.learner == "builtin" => LearnerChoice::Builtin,
        None => bail!("unknown learner `{}` (use builtin or --learner-cmd)", args.learner),
    };
    let cfg = RunConfig {
        strategies: parse_strategies(&args.strategy)?,
        seed_train_size: args.seed_size as usize,
        dev_size: args.dev_size as usize,
        test_size: args.test_size as usize,
        batch_k: args.batch as usize,
        cycles: args.cycles as usize,
        beam: args.beam as usize,
        tau: args.tau,
        n_seeds: args.seeds as usize,
        master_seed: args.seed,
        learner,
        pool_from_test: args.pool_from_test,
        jobs: args.jobs as usize,
    };
    let start = std::time::Instant::now();
    let records = driver::run_experiment(&cfg, &data)?;
    let written = driver::emit_report(&records, &args.out)?;
    if args.verbose {
        eprintln!("{} records in {:.2?}", records.len(), start.elapsed());
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let preds = load_dump(&args.dump)?;
    let gold = match &args.gold {
        Some(path) => Some(gold_map(&load_dataset(path, args.data_args.order)?)),
        None if args.strategy.needs_gold() => bail!("strategy {} needs --gold", args.strategy),
        None => None,
    };
    if preds.is_empty() {
        bail!("dump contains no predictions");
    }
    let pool: Vec<ScoredExample> = preds
        .into_iter()
        .enumerate()
        .map(|(pool_index, prediction)| {
            let gold_form = gold.as_ref().and_then(|g| g.get(&prediction.example_id).cloned());
            ScoredExample { example_id: prediction.example_id, prediction, gold_form, pool_index }
        })
        .collect();
    let cfg = SelectionConfig { k: args.k as usize, entropy_threshold: args.tau, rng_seed: args.seed, ..Default::default() };
    let ids = strategies::select(args.strategy, &pool, &cfg, &mut rng::run_rng(args.seed))?;
    let mut out = String::new();
    for id in ids {
        out.push_str(&id.to_string());
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn score(args: DumpGoldArgs) -> Result<()> {
    let preds = load_dump(&args.dump)?;
    let gold = gold_map(&load_dataset(&args.gold, args.data_args.order)?);
    let accuracy = metrics::accuracy(&preds, &gold)?;
    let n_correct = preds.iter().filter(|p| metrics::is_correct(p, &gold[&p.example_id])).count();
    println!("{}", json!({ "accuracy": accuracy, "n": preds.len(), "n_correct": n_correct }));
    Ok(())
}

fn pbcc(args: DumpGoldArgs) -> Result<()> {
    let preds = load_dump(&args.dump)?;
    let gold = gold_map(&load_dataset(&args.gold, args.data_args.order)?);
    let mut scores = Vec::with_capacity(preds.len());
    let mut correct = Vec::with_capacity(preds.len());
    for p in &preds {
        let g = gold.get(&p.example_id).ok_or(morphal::Error::MissingGold(p.example_id))?;
        scores.push(strategies::confidence(p));
        correct.push(metrics::is_correct(p, g));
    }
    let result = metrics::pbcc(&scores, &correct)?;
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let records = driver::parse_records_jsonl(&read(&args.records)?)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("summary.csv"), driver::summary_csv(&records)?)?;
    fs::write(args.out.join("deltas.csv"), driver::deltas_csv(&records)?)?;
    Ok(())
}

fn validate_dump(args: ValidateArgs) -> Result<()> {
    let text = read(&args.dump)?;
    let sets = adapter::parse_dump(&text)?;
    let rows: usize = sets.iter().map(|s| s.hypotheses.len()).sum();
    println!("{}", json!({ "valid": true, "ids": sets.len(), "rows": rows }));
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use morphal::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Parse { .. }) | Some(E::Utf8(_)) => "parse",
        Some(E::Protocol { .. }) => "protocol",
        Some(E::Learner(_)) | Some(E::Timeout(_)) => "learner",
        Some(E::InfeasibleSplit { .. }) | Some(E::InvalidArgument(_)) => "invalid-argument",
        Some(E::Degenerate(_)) | Some(E::NonFinite(_)) => "degenerate",
        Some(E::MissingGold(_)) => "missing-gold",
        Some(E::Io(_)) => "io",
        Some(E::Json(_)) => "json",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "error",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Select(a) => select(a),
        Command::Score(a) => score(a),
        Command::Pbcc(a) => pbcc(a),
        Command::Report(a) => report(a),
        Command::ValidateDump(a) => validate_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {}: {msg}", error_kind(&err));
            ExitCode::from(1)
        }
    }
}
