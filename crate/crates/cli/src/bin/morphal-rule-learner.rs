//! The built-in rule learner behind the external-learner protocol.
//!
//! `train` copies the training file into the model directory; `predict`
//! retrains from that copy (training is deterministic) and writes a dump.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use morphal::{adapter, corpus, rulelearner, ColumnOrder};

const MODEL_FILE: &str = "train.tsv";

#[derive(Parser)]
#[command(name = "morphal-rule-learner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        beam: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { train, dev: _, model } => {
            let text = fs::read_to_string(&train).with_context(|| format!("cannot read {}", train.display()))?;
            let data = corpus::parse_unimorph(&text, ColumnOrder::LemmaTagsForm)?;
            rulelearner::train(&data.triples)?;
            fs::create_dir_all(&model)?;
            fs::write(model.join(MODEL_FILE), text)?;
        }
        Command::Predict { model, input, beam, output } => {
            let path = model.join(MODEL_FILE);
            let text = fs::read_to_string(&path).with_context(|| format!("untrained model: {}", path.display()))?;
            let data = corpus::parse_unimorph(&text, ColumnOrder::LemmaTagsForm)?;
            let rules = rulelearner::train(&data.triples)?;
            let inputs = adapter::parse_predict_input(&fs::read_to_string(&input)?)?;
            let preds = inputs
                .iter()
                .map(|i| rulelearner::predict(&rules, i, beam as usize))
                .collect::<morphal::Result<Vec<_>>>()?;
            fs::write(&output, adapter::write_dump(&preds))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
