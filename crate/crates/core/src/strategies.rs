//! Sampling strategies: pure functions from a scored pool to a ranked list of
//! example ids.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::ExampleId;
use crate::error::{Error, Result};
use crate::metrics::{is_correct, levenshtein};
use crate::rng::RunRng;
use crate::rulelearner::PredictionSet;

pub const DEFAULT_BATCH: usize = 250;
pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_BEAM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    OracleIncorrect,
    OracleCorrect,
    LowestConfidence,
    HighestConfidence,
    HighestEntropy,
    LowestEntropy,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::OracleIncorrect,
        StrategyKind::OracleCorrect,
        StrategyKind::LowestConfidence,
        StrategyKind::HighestConfidence,
        StrategyKind::HighestEntropy,
        StrategyKind::LowestEntropy,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::OracleIncorrect => "OracleIncorrect",
            StrategyKind::OracleCorrect => "OracleCorrect",
            StrategyKind::LowestConfidence => "LowestConfidence",
            StrategyKind::HighestConfidence => "HighestConfidence",
            StrategyKind::HighestEntropy => "HighestEntropy",
            StrategyKind::LowestEntropy => "LowestEntropy",
            StrategyKind::Random => "Random",
        }
    }

    /// Position in [`StrategyKind::ALL`]; used for seed derivation.
    pub fn ordinal(self) -> u64 {
        StrategyKind::ALL.iter().position(|&k| k == self).unwrap() as u64
    }

    pub fn needs_gold(self) -> bool {
        matches!(self, StrategyKind::OracleIncorrect | StrategyKind::OracleCorrect)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    /// Case-insensitive; `-` and `_` are ignored, so `lowest-confidence`
    /// and `LowestConfidence` both parse.
    fn from_str(s: &str) -> Result<Self> {
        let squashed: String = s.chars().filter(|c| !matches!(c, '-' | '_')).collect();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(&squashed))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub example_id: ExampleId,
    pub prediction: PredictionSet,
    pub gold_form: Option<String>,
    pub pool_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub entropy_threshold: f64,
    pub beam: usize,
    pub rng_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { k: DEFAULT_BATCH, entropy_threshold: DEFAULT_TAU, beam: DEFAULT_BEAM, rng_seed: 0 }
    }
}

/// Renormalizes the beam's log-likelihoods into probabilities.
pub fn to_distribution(pred: &PredictionSet) -> Result<Vec<f64>> {
    if pred.hypotheses.is_empty() {
        return Err(Error::InvalidArgument(format!("example {} has an empty beam", pred.example_id)));
    }
    if let Some(h) = pred.hypotheses.iter().find(|h| !h.log_likelihood.is_finite()) {
        return Err(Error::NonFinite(h.log_likelihood));
    }
    let max = pred.hypotheses.iter().map(|h| h.log_likelihood).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = pred.hypotheses.iter().map(|h| (h.log_likelihood - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Beam entropy in nats over the renormalized probabilities that reach
/// `tau`. Dropped terms are not renormalized away.
pub fn entropy(pred: &PredictionSet, tau: f64) -> Result<f64> {
    let h = to_distribution(pred)?
        .into_iter()
        .filter(|&p| p >= tau && p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Log-likelihood of the top-ranked hypothesis.
pub fn confidence(pred: &PredictionSet) -> f64 {
    pred.top().log_likelihood
}

/// Gap between the first and second log-likelihoods; infinite for a
/// single-hypothesis beam.
pub fn margin(pred: &PredictionSet) -> f64 {
    match pred.hypotheses.as_slice() {
        [first, second, ..] => first.log_likelihood - second.log_likelihood,
        _ => f64::INFINITY,
    }
}

/// Sorts `(key, example)` pairs by key, then ascending pool index.
fn rank_by<'a>(
    items: impl IntoIterator<Item = &'a ScoredExample>,
    key: impl Fn(&ScoredExample) -> f64,
    descending: bool,
) -> Vec<&'a ScoredExample> {
    let mut keyed: Vec<(f64, &ScoredExample)> = items.into_iter().map(|e| (key(e), e)).collect();
    keyed.sort_by(|a, b| {
        let ord = a.0.total_cmp(&b.0);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then_with(|| a.1.pool_index.cmp(&b.1.pool_index))
    });
    keyed.into_iter().map(|(_, e)| e).collect()
}

fn gold(e: &ScoredExample) -> Result<&str> {
    e.gold_form.as_deref().ok_or(Error::MissingGold(e.example_id))
}

fn oracle_select(pool: &[ScoredExample], k: usize, want_incorrect: bool) -> Result<Vec<ExampleId>> {
    let mut wanted = Vec::new();
    let mut others = Vec::new();
    for e in pool {
        let correct = is_correct(&e.prediction, gold(e)?);
        if correct != want_incorrect {
            wanted.push(e);
        } else {
            others.push(e);
        }
    }
    // The primary group is always ranked by its surplus criterion; when it
    // cannot fill the batch, the other group is appended ranked by margin.
    let ranked = if want_incorrect {
        rank_by(wanted, |e| levenshtein(&e.prediction.top().form, e.gold_form.as_deref().unwrap()) as f64, true)
    } else {
        // edit distance is zero for every correct prediction
        rank_by(wanted, |e| margin(&e.prediction), true)
    };
    let chosen: Vec<&ScoredExample> = if ranked.len() >= k {
        ranked
    } else {
        let fill = rank_by(others, |e| margin(&e.prediction), !want_incorrect);
        ranked.into_iter().chain(fill).collect()
    };
    Ok(chosen.into_iter().take(k).map(|e| e.example_id).collect())
}

/// Selects `min(k, |pool|)` example ids in selection-rank order.
pub fn select(
    kind: StrategyKind,
    pool: &[ScoredExample],
    cfg: &SelectionConfig,
    rng: &mut RunRng,
) -> Result<Vec<ExampleId>> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("batch size k must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.entropy_threshold) {
        return Err(Error::InvalidArgument(format!(
            "entropy threshold must lie in [0, 1), got {}",
            cfg.entropy_threshold
        )));
    }
    let k = cfg.k;
    let take = |ranked: Vec<&ScoredExample>| ranked.into_iter().take(k).map(|e| e.example_id).collect();
    match kind {
        StrategyKind::OracleIncorrect => oracle_select(pool, k, true),
        StrategyKind::OracleCorrect => oracle_select(pool, k, false),
        StrategyKind::LowestConfidence | StrategyKind::HighestConfidence => {
            if let Some(e) = pool.iter().find(|e| !confidence(&e.prediction).is_finite()) {
                return Err(Error::NonFinite(confidence(&e.prediction)));
            }
            let desc = kind == StrategyKind::HighestConfidence;
            Ok(take(rank_by(pool, |e| confidence(&e.prediction), desc)))
        }
        StrategyKind::HighestEntropy | StrategyKind::LowestEntropy => {
            let scores = pool
                .iter()
                .map(|e| entropy(&e.prediction, cfg.entropy_threshold))
                .collect::<Result<Vec<f64>>>()?;
            let mut order: Vec<usize> = (0..pool.len()).collect();
            let desc = kind == StrategyKind::HighestEntropy;
            order.sort_by(|&a, &b| {
                let ord = scores[a].total_cmp(&scores[b]);
                let ord = if desc { ord.reverse() } else { ord };
                ord.then_with(|| pool[a].pool_index.cmp(&pool[b].pool_index))
            });
            Ok(order.into_iter().take(k).map(|i| pool[i].example_id).collect())
        }
        StrategyKind::Random => {
            let mut ids: Vec<ExampleId> = pool.iter().map(|e| e.example_id).collect();
            ids.shuffle(rng);
            ids.truncate(k);
            Ok(ids)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_rng;
    use crate::rulelearner::Hypothesis;

    fn pred_ll(id: usize, lls: &[f64]) -> PredictionSet {
        PredictionSet {
            example_id: id,
            lemma: "l".into(),
            tags: vec!["T".into()],
            hypotheses: lls
                .iter()
                .enumerate()
                .map(|(i, &ll)| Hypothesis { form: format!("f{i}"), log_likelihood: ll })
                .collect(),
        }
    }

    fn from_probs(probs: &[f64]) -> PredictionSet {
        pred_ll(0, &probs.iter().map(|p| p.ln()).collect::<Vec<_>>())
    }

    #[test]
    fn distribution_examples() {
        assert_eq!(to_distribution(&pred_ll(0, &[-0.3])).unwrap(), vec![1.0]);
        let d = to_distribution(&pred_ll(0, &[-0.1, -2.0])).unwrap();
        assert!((d[0] - 0.86989).abs() < 1e-4 && (d[1] - 0.13011).abs() < 1e-4);
        let shifted = to_distribution(&pred_ll(0, &[-7.1, -9.0])).unwrap();
        assert!((d[0] - shifted[0]).abs() < 1e-12 && (d[1] - shifted[1]).abs() < 1e-12);
    }

    #[test]
    fn distribution_rejects_non_finite() {
        assert!(matches!(to_distribution(&pred_ll(0, &[-0.1, f64::NAN])), Err(Error::NonFinite(_))));
        assert!(to_distribution(&pred_ll(0, &[f64::NEG_INFINITY])).is_err());
        assert!(to_distribution(&pred_ll(0, &[])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&from_probs(&[1.0]), 0.05).unwrap(), 0.0);
        let h = entropy(&from_probs(&[0.5, 0.3, 0.2]), 0.05).unwrap();
        assert!((h - 1.02965).abs() < 1e-4, "{h}");
        let h = entropy(&from_probs(&[0.9, 0.06, 0.04]), 0.05).unwrap();
        assert!((h - 0.26362).abs() < 1e-4, "{h}");
    }

    #[test]
    fn confidence_and_margin() {
        let p = pred_ll(0, &[-0.1, -2.0]);
        assert_eq!(confidence(&p), -0.1);
        assert!((margin(&p) - 1.9).abs() < 1e-12);
        assert_eq!(confidence(&pred_ll(0, &[0.0])), 0.0);
        assert_eq!(margin(&pred_ll(0, &[0.0])), f64::INFINITY);
        assert_eq!(margin(&pred_ll(0, &[-0.7, -0.7])), 0.0);
    }

    #[test]
    fn strategy_names_round_trip_case_insensitively() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(k.name().to_lowercase().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("oracle".parse::<StrategyKind>().is_err());
    }

    /// Example whose top form is `top` and gold is `gold`, with two hypotheses
    /// separated by `gap` unless `gap` is infinite.
    fn scored(id: usize, top: &str, gold: &str, gap: f64) -> ScoredExample {
        let mut hyps = vec![Hypothesis { form: top.into(), log_likelihood: -0.01 }];
        if gap.is_finite() {
            hyps.push(Hypothesis { form: format!("{top}~"), log_likelihood: -0.01 - gap });
        }
        ScoredExample {
            example_id: id,
            prediction: PredictionSet { example_id: id, lemma: "l".into(), tags: vec!["T".into()], hypotheses: hyps },
            gold_form: Some(gold.into()),
            pool_index: id,
        }
    }

    fn cfg(k: usize) -> SelectionConfig {
        SelectionConfig { k, ..SelectionConfig::default() }
    }

    #[test]
    fn oracle_incorrect_fills_with_smallest_margin() {
        let pool = vec![
            scored(10, "a", "a", 2.0),
            scored(11, "b", "x", 1.0),
            scored(12, "c", "c", 0.5),
            scored(13, "d", "y", 3.0),
            scored(14, "e", "e", 0.9),
        ];
        let ids = select(StrategyKind::OracleIncorrect, &pool, &cfg(3), &mut run_rng(0)).unwrap();
        assert_eq!(ids, vec![11, 13, 12]);
    }

    #[test]
    fn oracle_incorrect_ranks_surplus_by_edit_distance() {
        let pool = vec![
            scored(0, "a", "b", 1.0),
            scored(1, "a", "bbbb", 1.0),
            scored(2, "a", "bb", 1.0),
            scored(3, "a", "bbb", 1.0),
        ];
        let ids = select(StrategyKind::OracleIncorrect, &pool, &cfg(2), &mut run_rng(0)).unwrap();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn oracle_correct_mirrors_rules() {
        let pool = vec![
            scored(0, "a", "a", 0.2),
            scored(1, "b", "b", f64::INFINITY),
            scored(2, "c", "x", 0.3),
            scored(3, "d", "y", 4.0),
        ];
        // surplus: most peaked correct first, single-hypothesis beam is infinite
        let ids = select(StrategyKind::OracleCorrect, &pool, &cfg(1), &mut run_rng(0)).unwrap();
        assert_eq!(ids, vec![1]);
        // shortfall: both correct (most peaked first), then incorrect by largest margin
        let ids = select(StrategyKind::OracleCorrect, &pool, &cfg(3), &mut run_rng(0)).unwrap();
        assert_eq!(ids, vec![1, 0, 3]);
    }

    #[test]
    fn oracle_requires_gold() {
        let mut e = scored(5, "a", "a", 1.0);
        e.gold_form = None;
        let err = select(StrategyKind::OracleCorrect, &[e], &cfg(1), &mut run_rng(0)).unwrap_err();
        assert!(matches!(err, Error::MissingGold(5)));
    }

    #[test]
    fn lowest_confidence_is_argmin() {
        let pool: Vec<ScoredExample> = [-0.1, -3.0, -1.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| ScoredExample { example_id: i, prediction: pred_ll(i, &[c]), gold_form: None, pool_index: i })
            .collect();
        assert_eq!(select(StrategyKind::LowestConfidence, &pool, &cfg(1), &mut run_rng(0)).unwrap(), vec![1]);
        assert_eq!(select(StrategyKind::HighestConfidence, &pool, &cfg(1), &mut run_rng(0)).unwrap(), vec![0]);
    }

    #[test]
    fn entropy_selection_orders() {
        let probs: [&[f64]; 3] = [&[1.0], &[0.5, 0.5], &[0.9, 0.1]];
        let pool: Vec<ScoredExample> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut pred = from_probs(p);
                pred.example_id = i;
                ScoredExample { example_id: i, prediction: pred, gold_form: None, pool_index: i }
            })
            .collect();
        assert_eq!(select(StrategyKind::HighestEntropy, &pool, &cfg(3), &mut run_rng(0)).unwrap(), vec![1, 2, 0]);
        assert_eq!(select(StrategyKind::LowestEntropy, &pool, &cfg(3), &mut run_rng(0)).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn exhaustion_returns_every_id() {
        let pool: Vec<ScoredExample> = (0..6).map(|i| scored(i, "a", if i % 2 == 0 { "a" } else { "b" }, i as f64)).collect();
        for kind in StrategyKind::ALL {
            let mut ids = select(kind, &pool, &cfg(6), &mut run_rng(3)).unwrap();
            ids.sort();
            assert_eq!(ids, (0..6).collect::<Vec<_>>(), "{kind}");
            let big = select(kind, &pool, &cfg(50), &mut run_rng(3)).unwrap();
            assert_eq!(big.len(), 6);
        }
    }

    #[test]
    fn zero_k_and_bad_tau_are_rejected() {
        let pool = vec![scored(0, "a", "a", 1.0)];
        assert!(select(StrategyKind::Random, &pool, &cfg(0), &mut run_rng(0)).is_err());
        let bad = SelectionConfig { entropy_threshold: 1.0, ..cfg(1) };
        assert!(select(StrategyKind::HighestEntropy, &pool, &bad, &mut run_rng(0)).is_err());
    }

    #[test]
    fn random_is_seed_deterministic() {
        let pool: Vec<ScoredExample> = (0..30).map(|i| scored(i, "a", "a", 1.0)).collect();
        let a = select(StrategyKind::Random, &pool, &cfg(10), &mut run_rng(42)).unwrap();
        let b = select(StrategyKind::Random, &pool, &cfg(10), &mut run_rng(42)).unwrap();
        let c = select(StrategyKind::Random, &pool, &cfg(10), &mut run_rng(43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
