//! File-and-argv protocol for external learners.
//!
//! An external learner is any executable that understands two subcommands:
//!
//! ```text
//! <command...> train   --train <train.tsv> --dev <dev.tsv> --model <dir>
//! <command...> predict --model <dir> --input <input.tsv> --beam <b> --output <dump.tsv>
//! ```
//!
//! Train and dev files are three-column inflection files in
//! `lemma \t tags \t form` order. Predict inputs carry `id \t lemma \t tags`
//! and never the gold form. The learner answers with a prediction dump:
//!
//! ```text
//! example_id \t lemma \t tags \t rank \t candidate_form \t log_likelihood
//! ```
//!
//! Ranks start at 1 and appear in order for each id; log-likelihoods are
//! non-increasing with rank. Positive log-likelihoods up to
//! [`LOG_LIKELIHOOD_SLACK`] are read as 0 to absorb rounding in the learner;
//! anything larger is a protocol violation. Exit status 0 means success.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{join_tags, nfc, split_tags, ExampleId};
use crate::error::{Error, Result};
use crate::rulelearner::{Hypothesis, PredictInput, PredictionSet};

/// Largest positive log-likelihood accepted (and read as 0).
pub const LOG_LIKELIHOOD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLearnerSpec {
    /// Executable followed by fixed leading arguments.
    pub command: Vec<String>,
    pub model_dir: PathBuf,
    pub beam: usize,
    pub timeout_seconds: u64,
}

impl ExternalLearnerSpec {
    pub fn with_model_dir(&self, model_dir: impl Into<PathBuf>) -> Self {
        ExternalLearnerSpec { model_dir: model_dir.into(), ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(Error::InvalidArgument("external learner command is empty".into()));
        }
        if self.beam == 0 {
            return Err(Error::InvalidArgument("beam must be at least 1".into()));
        }
        if self.timeout_seconds == 0 {
            return Err(Error::InvalidArgument("timeout must be at least 1 second".into()));
        }
        Ok(())
    }
}

/// Formats a log-likelihood as the shortest decimal that reads back to the
/// same `f64`.
pub fn format_log_likelihood(ll: f64) -> String {
    // -0.0 prints as "-0"
    let ll = if ll == 0.0 { 0.0 } else { ll };
    format!("{ll}")
}

pub fn write_predict_input(inputs: &[PredictInput]) -> String {
    let mut out = String::new();
    for i in inputs {
        let _ = writeln!(out, "{}\t{}\t{}", i.example_id, i.lemma, join_tags(&i.tags));
    }
    out
}

pub fn parse_predict_input(text: &str) -> Result<Vec<PredictInput>> {
    let mut inputs = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let row = n + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(protocol(row, format!("expected 3 fields, found {}", fields.len())));
        }
        let example_id = parse_id(fields[0], row)?;
        if !seen.insert(example_id) {
            return Err(protocol(row, format!("duplicate id {example_id}")));
        }
        if fields[1].is_empty() {
            return Err(protocol(row, "empty lemma".into()));
        }
        let tags = split_tags(fields[2]).ok_or_else(|| protocol(row, "malformed tags".into()))?;
        inputs.push(PredictInput { example_id, lemma: nfc(fields[1]), tags });
    }
    Ok(inputs)
}

pub fn write_dump(preds: &[PredictionSet]) -> String {
    let mut out = String::new();
    for p in preds {
        let tags = join_tags(&p.tags);
        for (rank, h) in p.hypotheses.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                p.example_id,
                p.lemma,
                tags,
                rank + 1,
                h.form,
                format_log_likelihood(h.log_likelihood)
            );
        }
    }
    out
}

fn protocol(row: usize, reason: String) -> Error {
    Error::Protocol { row, reason }
}

fn parse_id(field: &str, row: usize) -> Result<ExampleId> {
    field.parse().map_err(|_| protocol(row, format!("bad example id `{field}`")))
}

/// Parses and checks a prediction dump on its own terms: field count, ids,
/// contiguous ranks in order, distinct forms, finite non-increasing
/// log-likelihoods and consistent lemma/tags per id. Sets come back in order
/// of first appearance.
pub fn parse_dump(text: &str) -> Result<Vec<PredictionSet>> {
    let mut sets: Vec<PredictionSet> = Vec::new();
    let mut index: HashMap<ExampleId, usize> = HashMap::new();
    let mut last_row: Option<ExampleId> = None;

    for (n, line) in text.lines().enumerate() {
        let row = n + 1;
        if line.is_empty() {
            return Err(protocol(row, "blank line".into()));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(protocol(row, format!("expected 6 fields, found {}", fields.len())));
        }
        if let Some(i) = fields.iter().position(|f| f.is_empty()) {
            return Err(protocol(row, format!("field {} is empty", i + 1)));
        }
        let id = parse_id(fields[0], row)?;
        let tags = split_tags(fields[2]).ok_or_else(|| protocol(row, "malformed tags".into()))?;
        let rank: usize = fields[3].parse().map_err(|_| protocol(row, format!("bad rank `{}`", fields[3])))?;
        let mut ll: f64 = fields[5]
            .parse()
            .map_err(|_| protocol(row, format!("bad log-likelihood `{}`", fields[5])))?;
        if !ll.is_finite() {
            return Err(protocol(row, format!("non-finite log-likelihood `{}`", fields[5])));
        }
        if ll > LOG_LIKELIHOOD_SLACK {
            return Err(protocol(row, format!("positive log-likelihood {ll}")));
        }
        if ll > 0.0 {
            ll = 0.0;
        }
        let form = nfc(fields[4]);
        let lemma = nfc(fields[1]);

        let slot = match index.get(&id) {
            Some(&i) => {
                if last_row != Some(id) {
                    return Err(protocol(row, format!("rows for id {id} are not contiguous")));
                }
                i
            }
            None => {
                index.insert(id, sets.len());
                sets.push(PredictionSet { example_id: id, lemma: lemma.clone(), tags: tags.clone(), hypotheses: Vec::new() });
                sets.len() - 1
            }
        };
        let set = &mut sets[slot];
        let expected = set.hypotheses.len() + 1;
        if rank != expected {
            return Err(protocol(row, format!("id {id}: expected rank {expected}, found {rank}")));
        }
        if set.lemma != lemma || set.tags != tags {
            return Err(protocol(row, format!("id {id}: lemma or tags differ between rows")));
        }
        if set.hypotheses.iter().any(|h| h.form == form) {
            return Err(protocol(row, format!("id {id}: duplicate candidate `{form}`")));
        }
        if let Some(prev) = set.hypotheses.last() {
            if ll > prev.log_likelihood {
                return Err(protocol(row, format!("id {id}: log-likelihood increases at rank {rank}")));
            }
        }
        set.hypotheses.push(Hypothesis { form, log_likelihood: ll });
        last_row = Some(id);
    }
    Ok(sets)
}

/// Checks a parsed dump against the inputs it answers: every input id
/// exactly once, nothing else, lemma and tags echoed back. Returns the sets
/// in input order.
pub fn match_inputs(mut sets: Vec<PredictionSet>, inputs: &[PredictInput]) -> Result<Vec<PredictionSet>> {
    let mut by_id: HashMap<ExampleId, PredictionSet> = HashMap::with_capacity(sets.len());
    for (row, s) in sets.drain(..).enumerate() {
        let id = s.example_id;
        if by_id.insert(id, s).is_some() {
            return Err(protocol(row + 1, format!("id {id} appears twice")));
        }
    }
    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs {
        let set = by_id
            .remove(&input.example_id)
            .ok_or_else(|| protocol(0, format!("missing predictions for id {}", input.example_id)))?;
        if set.lemma != input.lemma || set.tags != input.tags {
            return Err(protocol(0, format!("id {}: lemma or tags do not match the input", input.example_id)));
        }
        out.push(set);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(protocol(0, format!("unexpected id {extra}")));
    }
    Ok(out)
}

struct Finished {
    success: bool,
    status: String,
    stderr: String,
}

fn run_with_timeout(spec: &ExternalLearnerSpec, args: &[String]) -> Result<Finished> {
    let mut cmd = Command::new(&spec.command[0]);
    cmd.args(&spec.command[1..]).args(args).stdin(Stdio::null()).stdout(Stdio::null()).stderr(Stdio::piped());
    let mut child = cmd
        .spawn()
        .map_err(|e| Error::Learner(format!("cannot start `{}`: {e}", spec.command[0])))?;

    let mut stderr = child.stderr.take().expect("stderr is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    });

    let deadline = Instant::now() + Duration::from_secs(spec.timeout_seconds);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            // a grandchild may still hold stderr open; leave the reader behind
            drop(reader);
            return Err(Error::Timeout(spec.timeout_seconds));
        }
        thread::sleep(Duration::from_millis(5));
    };
    let stderr = reader.join().unwrap_or_default();
    Ok(Finished { success: status.success(), status: status.to_string(), stderr })
}

fn check(finished: Finished, what: &str) -> Result<()> {
    if finished.success {
        Ok(())
    } else {
        Err(Error::Learner(format!("{what} failed ({}): {}", finished.status, finished.stderr.trim())))
    }
}

fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn external_train(spec: &ExternalLearnerSpec, train_file: &Path, dev_file: &Path) -> Result<()> {
    spec.validate()?;
    fs::create_dir_all(&spec.model_dir)?;
    let args = vec![
        "train".to_owned(),
        "--train".to_owned(),
        path_arg(train_file),
        "--dev".to_owned(),
        path_arg(dev_file),
        "--model".to_owned(),
        path_arg(&spec.model_dir),
    ];
    check(run_with_timeout(spec, &args)?, "train")
}

/// Runs `predict` on `input_file` and returns one set per input row, in
/// input order. The dump is written next to the input as `<input>.dump`.
pub fn external_predict(spec: &ExternalLearnerSpec, input_file: &Path) -> Result<Vec<PredictionSet>> {
    spec.validate()?;
    let inputs = parse_predict_input(&fs::read_to_string(input_file)?)?;
    let mut out_path = input_file.as_os_str().to_owned();
    out_path.push(".dump");
    let out_path = PathBuf::from(out_path);
    let _ = fs::remove_file(&out_path);
    let args = vec![
        "predict".to_owned(),
        "--model".to_owned(),
        path_arg(&spec.model_dir),
        "--input".to_owned(),
        path_arg(input_file),
        "--beam".to_owned(),
        spec.beam.to_string(),
        "--output".to_owned(),
        path_arg(&out_path),
    ];
    check(run_with_timeout(spec, &args)?, "predict")?;
    let text = fs::read_to_string(&out_path)
        .map_err(|e| Error::Learner(format!("predict wrote no readable output at {}: {e}", out_path.display())))?;
    let sets = match_inputs(parse_dump(&text)?, &inputs)?;
    if let Some(s) = sets.iter().find(|s| s.hypotheses.len() > spec.beam) {
        return Err(protocol(0, format!("id {} has {} hypotheses for beam {}", s.example_id, s.hypotheses.len(), spec.beam)));
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(id: usize, hyps: &[(&str, f64)]) -> PredictionSet {
        PredictionSet {
            example_id: id,
            lemma: format!("lem{id}"),
            tags: vec!["V".into(), "PST".into()],
            hypotheses: hyps.iter().map(|&(f, ll)| Hypothesis { form: f.into(), log_likelihood: ll }).collect(),
        }
    }

    #[test]
    fn dump_format() {
        let text = write_dump(&[set(3, &[("a", 0.0), ("b", -1.5)])]);
        assert_eq!(text, "3\tlem3\tV;PST\t1\ta\t0\n3\tlem3\tV;PST\t2\tb\t-1.5\n");
    }

    #[test]
    fn log_likelihoods_round_trip_exactly() {
        for ll in [-0.1, -1.0 / 3.0, -1e-300, -123456.789, (0.75f64).ln(), -0.0] {
            let parsed: f64 = format_log_likelihood(ll).parse().unwrap();
            assert_eq!(parsed.to_bits(), if ll == 0.0 { 0.0f64.to_bits() } else { ll.to_bits() });
        }
    }

    #[test]
    fn dump_round_trips() {
        let sets = vec![set(0, &[("a", -0.2), ("b", -1.0 / 3.0)]), set(5, &[("c", 0.0)])];
        assert_eq!(parse_dump(&write_dump(&sets)).unwrap(), sets);
    }

    #[test]
    fn rank_gap_is_rejected() {
        let text = "1\tl\tV\t1\ta\t-0.1\n1\tl\tV\t3\tb\t-0.2\n";
        let err = parse_dump(text).unwrap_err();
        assert!(matches!(err, Error::Protocol { row: 2, .. }), "{err}");
    }

    #[test]
    fn positive_and_non_finite_scores_are_rejected() {
        assert!(parse_dump("1\tl\tV\t1\ta\t0.5\n").is_err());
        assert!(parse_dump("1\tl\tV\t1\ta\tNaN\n").is_err());
        assert!(parse_dump("1\tl\tV\t1\ta\t-inf\n").is_err());
        let tiny = parse_dump("1\tl\tV\t1\ta\t1e-12\n").unwrap();
        assert_eq!(tiny[0].hypotheses[0].log_likelihood, 0.0);
    }

    #[test]
    fn structural_violations_are_rejected() {
        // increasing score
        assert!(parse_dump("1\tl\tV\t1\ta\t-0.5\n1\tl\tV\t2\tb\t-0.1\n").is_err());
        // duplicate candidate
        assert!(parse_dump("1\tl\tV\t1\ta\t-0.1\n1\tl\tV\t2\ta\t-0.5\n").is_err());
        // interleaved ids
        assert!(parse_dump("1\tl\tV\t1\ta\t-0.1\n2\tm\tV\t1\ta\t-0.1\n1\tl\tV\t2\tb\t-0.5\n").is_err());
        // inconsistent lemma
        assert!(parse_dump("1\tl\tV\t1\ta\t-0.1\n1\tk\tV\t2\tb\t-0.5\n").is_err());
        // comma decimal separator
        assert!(parse_dump("1\tl\tV\t1\ta\t-0,1\n").is_err());
        // wrong field count, blank field, blank line
        assert!(parse_dump("1\tl\tV\t1\ta\n").is_err());
        assert!(parse_dump("1\tl\tV\t1\t\t-0.1\n").is_err());
        assert!(parse_dump("1\tl\tV\t1\ta\t-0.1\n\n").is_err());
    }

    #[test]
    fn matching_against_inputs() {
        let inputs: Vec<PredictInput> = (0..3)
            .map(|i| PredictInput { example_id: i, lemma: format!("lem{i}"), tags: vec!["V".into(), "PST".into()] })
            .collect();
        let sets: Vec<PredictionSet> = (0..3).rev().map(|i| set(i, &[("x", 0.0)])).collect();
        let matched = match_inputs(sets.clone(), &inputs).unwrap();
        assert_eq!(matched.iter().map(|s| s.example_id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(match_inputs(sets[..2].to_vec(), &inputs).is_err());
        let mut extra = sets.clone();
        extra.push(set(9, &[("x", 0.0)]));
        assert!(match_inputs(extra, &inputs).is_err());
    }

    #[test]
    fn predict_input_never_contains_gold() {
        let inputs = vec![PredictInput { example_id: 4, lemma: "walk".into(), tags: vec!["V".into(), "PST".into()] }];
        let text = write_predict_input(&inputs);
        assert_eq!(text, "4\twalk\tV;PST\n");
        assert_eq!(parse_predict_input(&text).unwrap(), inputs);
    }
}
