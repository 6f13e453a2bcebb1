//! Iterated train / predict / select cycles over one or more seeds and
//! strategies, plus report emission.
//!
//! A run for `(seed_index, strategy)` proceeds as follows. Cycle 1 trains on
//! the seed split, evaluates on the test ids and predicts the pool; this
//! baseline is computed once per seed and shared by every strategy. Each later
//! cycle selects up to `batch_k` pool ids from the previous model's pool
//! predictions, moves them into training with their gold forms, retrains from
//! scratch and evaluates. A run stops early once the pool is empty.
//!
//! Seeds: the split for seed `s` uses `mix_seed([master, s, 0])` and the run
//! PRNG for strategy `k` uses `mix_seed([master, s, 1 + ordinal(k)])`, so
//! any single run can be replayed on its own.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapter::{self, ExternalLearnerSpec};
use crate::corpus::{self, ColumnOrder, Dataset, ExampleId, IdSet, SplitSpec, Triple};
use crate::error::{Error, Result};
use crate::metrics::{self, aggregate};
use crate::rng::{mix_seed, run_rng, RunRng};
use crate::rulelearner::{self, PredictInput, PredictionSet, RuleModel};
use crate::strategies::{self, confidence, ScoredExample, SelectionConfig, StrategyKind};

/// Anything that can be trained on gold triples and asked for beams.
pub trait Learner: Sync {
    type Model: Send + Sync;

    /// `run_key` names the run and cycle (`seed0/Random/cycle3`) and is unique
    /// per trained model; learners that keep files use it to keep them apart.
    fn train(&self, train: &[&Triple], dev: &[&Triple], run_key: &str) -> Result<Self::Model>;

    /// `label` distinguishes prediction batches for the same model.
    fn predict(
        &self,
        model: &Self::Model,
        inputs: &[PredictInput],
        beam: usize,
        run_key: &str,
        label: &str,
    ) -> Result<Vec<PredictionSet>>;
}

/// The in-process affix-rewrite learner.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinLearner;

impl Learner for BuiltinLearner {
    type Model = RuleModel;

    fn train(&self, train: &[&Triple], _dev: &[&Triple], _run_key: &str) -> Result<RuleModel> {
        rulelearner::train(train.iter().copied())
    }

    fn predict(
        &self,
        model: &RuleModel,
        inputs: &[PredictInput],
        beam: usize,
        _run_key: &str,
        _label: &str,
    ) -> Result<Vec<PredictionSet>> {
        inputs.iter().map(|i| rulelearner::predict(model, i, beam)).collect()
    }
}

/// An external executable driven through the adapter protocol. Each run key
/// gets its own directory under the spec's `model_dir`.
#[derive(Debug, Clone)]
pub struct ExternalLearner {
    pub spec: ExternalLearnerSpec,
}

impl ExternalLearner {
    fn run_dir(&self, run_key: &str) -> PathBuf {
        self.spec.model_dir.join(run_key)
    }
}

impl Learner for ExternalLearner {
    type Model = PathBuf;

    fn train(&self, train: &[&Triple], dev: &[&Triple], run_key: &str) -> Result<PathBuf> {
        let dir = self.run_dir(run_key);
        fs::create_dir_all(&dir)?;
        let write = |name: &str, triples: &[&Triple]| -> Result<PathBuf> {
            let mut text = String::new();
            for t in triples {
                corpus::write_triple(&mut text, t, ColumnOrder::LemmaTagsForm);
            }
            let path = dir.join(name);
            fs::write(&path, text)?;
            Ok(path)
        };
        let train_file = write("train.tsv", train)?;
        let dev_file = write("dev.tsv", dev)?;
        let model_dir = dir.join("model");
        adapter::external_train(&self.spec.with_model_dir(&model_dir), &train_file, &dev_file)?;
        Ok(model_dir)
    }

    fn predict(
        &self,
        model: &PathBuf,
        inputs: &[PredictInput],
        beam: usize,
        run_key: &str,
        label: &str,
    ) -> Result<Vec<PredictionSet>> {
        let input_file = self.run_dir(run_key).join(format!("{label}.input.tsv"));
        fs::write(&input_file, adapter::write_predict_input(inputs))?;
        let spec = ExternalLearnerSpec { beam, ..self.spec.with_model_dir(model) };
        adapter::external_predict(&spec, &input_file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerChoice {
    Builtin,
    External(ExternalLearnerSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategies: Vec<StrategyKind>,
    pub seed_train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub batch_k: usize,
    pub cycles: usize,
    pub beam: usize,
    pub tau: f64,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub learner: LearnerChoice,
    pub pool_from_test: bool,
    /// Worker threads for independent runs; results do not depend on it.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategies: StrategyKind::ALL.to_vec(),
            seed_train_size: 600,
            dev_size: 0,
            test_size: 1000,
            batch_k: strategies::DEFAULT_BATCH,
            cycles: 10,
            beam: strategies::DEFAULT_BEAM,
            tau: strategies::DEFAULT_TAU,
            n_seeds: 3,
            master_seed: 0,
            learner: LearnerChoice::Builtin,
            pool_from_test: false,
            jobs: 1,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.cycles == 0 {
            return bad("cycles must be at least 1");
        }
        if self.batch_k == 0 {
            return bad("batch size must be at least 1");
        }
        if self.beam == 0 {
            return bad("beam must be at least 1");
        }
        if self.n_seeds == 0 {
            return bad("need at least one seed");
        }
        if self.strategies.is_empty() {
            return bad("need at least one strategy");
        }
        if !(0.0..1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn split_seed(&self, seed_index: usize) -> u64 {
        mix_seed(&[self.master_seed, seed_index as u64, 0])
    }

    pub fn run_seed(&self, seed_index: usize, strategy: StrategyKind) -> u64 {
        mix_seed(&[self.master_seed, seed_index as u64, 1 + strategy.ordinal()])
    }

    fn selection(&self) -> SelectionConfig {
        SelectionConfig { k: self.batch_k, entropy_threshold: self.tau, beam: self.beam, rng_seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct CycleState {
    pub cycle_index: usize,
    pub seed_index: usize,
    pub train_ids: IdSet,
    pub pool_ids: IdSet,
    pub dev_ids: IdSet,
    pub test_ids: IdSet,
    pub rng: RunRng,
    /// Current model's beams over `pool_ids`, in id order.
    pub pool_predictions: Vec<PredictionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub strategy: StrategyKind,
    pub seed_index: usize,
    pub cycle_index: usize,
    pub train_size: usize,
    pub accuracy: f64,
    pub pbcc_r: Option<f64>,
    pub pbcc_p: Option<f64>,
    pub selected_ids: Vec<ExampleId>,
}

fn triples<'a>(data: &'a Dataset, ids: &IdSet) -> Result<Vec<&'a Triple>> {
    ids.iter()
        .map(|&id| data.get(id).ok_or_else(|| Error::InvalidArgument(format!("unknown example id {id}"))))
        .collect()
}

fn inputs(data: &Dataset, ids: &IdSet) -> Result<Vec<PredictInput>> {
    Ok(triples(data, ids)?.into_iter().map(PredictInput::from).collect())
}

struct Evaluation {
    accuracy: f64,
    pbcc_r: Option<f64>,
    pbcc_p: Option<f64>,
}

fn evaluate(preds: &[PredictionSet], data: &Dataset) -> Result<Evaluation> {
    let gold: HashMap<ExampleId, String> = preds
        .iter()
        .map(|p| data.get(p.example_id).map(|t| (t.id, t.form.clone())).ok_or(Error::MissingGold(p.example_id)))
        .collect::<Result<_>>()?;
    let accuracy = metrics::accuracy(preds, &gold)?;
    let scores: Vec<f64> = preds.iter().map(confidence).collect();
    let correct: Vec<bool> = preds.iter().map(|p| metrics::is_correct(p, &gold[&p.example_id])).collect();
    let (pbcc_r, pbcc_p) = match metrics::pbcc(&scores, &correct) {
        Ok(c) => (Some(c.r), Some(c.p_value)),
        Err(_) => (None, None),
    };
    Ok(Evaluation { accuracy, pbcc_r, pbcc_p })
}

/// Trains on the current training ids, evaluates on the test ids and
/// predicts the pool. Shared by the baseline and every later cycle.
fn train_and_evaluate<L: Learner>(
    learner: &L,
    cfg: &RunConfig,
    data: &Dataset,
    state: &mut CycleState,
    run_key: &str,
) -> Result<Evaluation> {
    let train = triples(data, &state.train_ids)?;
    let dev = triples(data, &state.dev_ids)?;
    let model = learner.train(&train, &dev, run_key)?;
    let test_inputs = inputs(data, &state.test_ids)?;
    let test_preds = learner.predict(&model, &test_inputs, cfg.beam, run_key, "test")?;
    let eval = evaluate(&test_preds, data)?;
    state.pool_predictions = if state.cycle_index < cfg.cycles && !state.pool_ids.is_empty() {
        let pool_inputs = inputs(data, &state.pool_ids)?;
        learner.predict(&model, &pool_inputs, cfg.beam, run_key, "pool")?
    } else {
        Vec::new()
    };
    Ok(eval)
}

/// Draws the seed split and evaluates the baseline model (cycle 1).
pub fn baseline<L: Learner>(
    learner: &L,
    cfg: &RunConfig,
    data: &Dataset,
    seed_index: usize,
) -> Result<(CycleState, CycleRecord)> {
    cfg.validate()?;
    let spec = SplitSpec {
        seed_train_size: cfg.seed_train_size,
        dev_size: cfg.dev_size,
        test_size: cfg.test_size,
        rng_seed: cfg.split_seed(seed_index),
    };
    let split = corpus::split(data, &spec)?;
    let pool_ids = if cfg.pool_from_test { split.test.clone() } else { split.pool };
    let mut state = CycleState {
        cycle_index: 1,
        seed_index,
        train_ids: split.train,
        pool_ids,
        dev_ids: split.dev,
        test_ids: split.test,
        rng: run_rng(0),
        pool_predictions: Vec::new(),
    };
    let eval = train_and_evaluate(learner, cfg, data, &mut state, &format!("seed{seed_index}/baseline"))?;
    let record = CycleRecord {
        strategy: cfg.strategies[0],
        seed_index,
        cycle_index: 1,
        train_size: state.train_ids.len(),
        accuracy: eval.accuracy,
        pbcc_r: eval.pbcc_r,
        pbcc_p: eval.pbcc_p,
        selected_ids: Vec::new(),
    };
    Ok((state, record))
}

/// Advances a run by one cycle: select from the previous model's pool
/// predictions, transfer, retrain and evaluate. Returns `None` when the run
/// is over (last cycle reached or pool exhausted).
pub fn run_cycle<L: Learner>(
    learner: &L,
    state: CycleState,
    cfg: &RunConfig,
    strategy: StrategyKind,
    data: &Dataset,
) -> Result<Option<(CycleState, CycleRecord)>> {
    if state.cycle_index >= cfg.cycles || state.pool_ids.is_empty() {
        return Ok(None);
    }
    let mut state = state;
    let pool: Vec<ScoredExample> = std::mem::take(&mut state.pool_predictions)
        .into_iter()
        .enumerate()
        .map(|(pool_index, prediction)| {
            // gold is attached only for the selection step of oracle strategies
            let gold_form = if strategy.needs_gold() {
                data.get(prediction.example_id).map(|t| t.form.clone())
            } else {
                None
            };
            ScoredExample { example_id: prediction.example_id, prediction, gold_form, pool_index }
        })
        .collect();
    if pool.len() != state.pool_ids.len() {
        return Err(Error::Learner(format!(
            "expected predictions for {} pool examples, got {}",
            state.pool_ids.len(),
            pool.len()
        )));
    }
    let selected = strategies::select(strategy, &pool, &cfg.selection(), &mut state.rng)?;
    for id in &selected {
        state.pool_ids.remove(id);
        if cfg.pool_from_test {
            state.test_ids.remove(id);
        }
        state.train_ids.insert(*id);
    }
    state.cycle_index += 1;
    if state.test_ids.is_empty() {
        return Ok(None);
    }
    let run_key = format!("seed{}/{}/cycle{}", state.seed_index, strategy, state.cycle_index);
    let eval = train_and_evaluate(learner, cfg, data, &mut state, &run_key)?;
    let record = CycleRecord {
        strategy,
        seed_index: state.seed_index,
        cycle_index: state.cycle_index,
        train_size: state.train_ids.len(),
        accuracy: eval.accuracy,
        pbcc_r: eval.pbcc_r,
        pbcc_p: eval.pbcc_p,
        selected_ids: selected,
    };
    Ok(Some((state, record)))
}

/// Runs one strategy from a shared baseline to the end.
pub fn run_strategy<L: Learner>(
    learner: &L,
    cfg: &RunConfig,
    data: &Dataset,
    base_state: &CycleState,
    base_record: &CycleRecord,
    strategy: StrategyKind,
) -> Result<Vec<CycleRecord>> {
    let mut state = base_state.clone();
    state.rng = run_rng(cfg.run_seed(state.seed_index, strategy));
    let mut records = vec![CycleRecord { strategy, ..base_record.clone() }];
    while let Some((next, record)) = run_cycle(learner, state, cfg, strategy, data)? {
        records.push(record);
        state = next;
    }
    Ok(records)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every configured strategy for every seed. Records are ordered by
/// strategy (configuration order), seed and cycle, independent of `jobs`.
pub fn run_experiment_with<L: Learner>(learner: &L, cfg: &RunConfig, data: &Dataset) -> Result<Vec<CycleRecord>> {
    cfg.validate()?;
    with_pool(cfg.jobs, || {
        let baselines: Vec<(CycleState, CycleRecord)> = (0..cfg.n_seeds)
            .into_par_iter()
            .map(|s| baseline(learner, cfg, data, s))
            .collect::<Result<_>>()?;
        let runs: Vec<(usize, usize)> = (0..cfg.strategies.len())
            .flat_map(|k| (0..cfg.n_seeds).map(move |s| (k, s)))
            .collect();
        let results: Vec<Vec<CycleRecord>> = runs
            .par_iter()
            .map(|&(k, s)| {
                let (state, record) = &baselines[s];
                run_strategy(learner, cfg, data, state, record, cfg.strategies[k])
            })
            .collect::<Result<_>>()?;
        Ok(results.into_iter().flatten().collect())
    })?
}

pub fn run_experiment(cfg: &RunConfig, data: &Dataset) -> Result<Vec<CycleRecord>> {
    match &cfg.learner {
        LearnerChoice::Builtin => run_experiment_with(&BuiltinLearner, cfg, data),
        LearnerChoice::External(spec) => {
            run_experiment_with(&ExternalLearner { spec: spec.clone() }, cfg, data)
        }
    }
}

pub fn records_jsonl(records: &[CycleRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_records_jsonl(text: &str) -> Result<Vec<CycleRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: n + 1, reason: e.to_string() }))
        .collect()
}

/// Groups records by strategy (first-appearance order) and then by key.
fn group<K: Ord>(records: &[CycleRecord], key: impl Fn(&CycleRecord) -> K) -> Vec<(StrategyKind, BTreeMap<K, Vec<&CycleRecord>>)> {
    let mut out: Vec<(StrategyKind, BTreeMap<K, Vec<&CycleRecord>>)> = Vec::new();
    for r in records {
        let slot = match out.iter().position(|(s, _)| *s == r.strategy) {
            Some(i) => i,
            None => {
                out.push((r.strategy, BTreeMap::new()));
                out.len() - 1
            }
        };
        out[slot].1.entry(key(r)).or_default().push(r);
    }
    out
}

/// Mean and sample standard deviation of accuracy per (strategy, cycle).
pub fn summary_csv(records: &[CycleRecord]) -> Result<String> {
    let mut out = String::from("strategy,cycle,train_size,n_runs,mean_accuracy,std_accuracy\n");
    for (strategy, cycles) in group(records, |r| r.cycle_index) {
        for (cycle, rs) in cycles {
            let acc: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            let agg = aggregate(&acc)?;
            let _ = writeln!(
                out,
                "{strategy},{cycle},{},{},{:.6},{:.6}",
                rs[0].train_size, agg.n_runs, agg.mean, agg.std
            );
        }
    }
    Ok(out)
}

/// Accuracy change from the shared baseline, after the first selection round
/// and at each run's final cycle, averaged over seeds.
pub fn deltas_csv(records: &[CycleRecord]) -> Result<String> {
    let mut out = String::from(
        "strategy,n_runs,baseline_accuracy,first_round_accuracy,first_round_delta,final_cycle,final_accuracy,final_delta\n",
    );
    for (strategy, seeds) in group(records, |r| r.seed_index) {
        let mut base = Vec::new();
        let mut first = Vec::new();
        let mut first_delta = Vec::new();
        let mut fin = Vec::new();
        let mut fin_delta = Vec::new();
        let mut final_cycle = 0;
        for rs in seeds.values() {
            let b = rs.iter().min_by_key(|r| r.cycle_index).unwrap();
            let f = rs.iter().max_by_key(|r| r.cycle_index).unwrap();
            base.push(b.accuracy);
            if let Some(r2) = rs.iter().find(|r| r.cycle_index == b.cycle_index + 1) {
                first.push(r2.accuracy);
                first_delta.push(r2.accuracy - b.accuracy);
            }
            fin.push(f.accuracy);
            fin_delta.push(f.accuracy - b.accuracy);
            final_cycle = final_cycle.max(f.cycle_index);
        }
        let mean = |v: &[f64]| -> Result<String> {
            if v.is_empty() {
                Ok(String::new())
            } else {
                Ok(format!("{:.6}", aggregate(v)?.mean))
            }
        };
        let _ = writeln!(
            out,
            "{strategy},{},{},{},{},{final_cycle},{},{}",
            base.len(),
            mean(&base)?,
            mean(&first)?,
            mean(&first_delta)?,
            mean(&fin)?,
            mean(&fin_delta)?
        );
    }
    Ok(out)
}

/// Writes `records.jsonl`, `summary.csv` and `deltas.csv` into `out_dir`.
pub fn emit_report(records: &[CycleRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let files = [
        ("records.jsonl", records_jsonl(records)?),
        ("summary.csv", summary_csv(records)?),
        ("deltas.csv", deltas_csv(records)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
