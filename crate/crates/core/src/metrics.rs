//! Evaluation statistics: exact-match accuracy, edit distance,
//! point-biserial correlation and multi-seed aggregation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::corpus::{nfc, ExampleId};
use crate::error::{Error, Result};
use crate::rulelearner::PredictionSet;

/// Unit-cost edit distance over Unicode scalar values of the NFC forms.
///
/// Scalars, not grapheme clusters: a Hangul syllable or a Ge'ez letter with a
/// combining mark may count as more than one edit.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = nfc(a).chars().collect();
    let b: Vec<char> = nfc(b).chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (j, lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, sc) in short.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if sc == lc { diag } else { 1 + diag.min(above).min(row[i]) };
            diag = above;
        }
    }
    row[short.len()]
}

/// Whether the top hypothesis equals the gold form exactly.
pub fn is_correct(pred: &PredictionSet, gold: &str) -> bool {
    pred.top().form == gold || nfc(&pred.top().form) == nfc(gold)
}

pub fn accuracy(preds: &[PredictionSet], gold: &HashMap<ExampleId, String>) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction list".into()));
    }
    let mut hits = 0usize;
    for p in preds {
        let g = gold.get(&p.example_id).ok_or(Error::MissingGold(p.example_id))?;
        if is_correct(p, g) {
            hits += 1;
        }
    }
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub n_correct: usize,
    pub n_incorrect: usize,
}

/// Point-biserial correlation between a continuous score and correctness,
/// with a two-sided p-value from Student's t on `n - 2` degrees of freedom.
pub fn pbcc(scores: &[f64], correct: &[bool]) -> Result<CorrelationResult> {
    if scores.len() != correct.len() {
        return Err(Error::Degenerate(format!(
            "{} scores but {} correctness labels",
            scores.len(),
            correct.len()
        )));
    }
    let n = scores.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("need at least 3 observations, got {n}")));
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(s));
    }
    let n1 = correct.iter().filter(|&&c| c).count();
    let n0 = n - n1;
    if n1 == 0 {
        return Err(Error::Degenerate("no correct examples".into()));
    }
    if n0 == 0 {
        return Err(Error::Degenerate("no incorrect examples".into()));
    }
    let nf = n as f64;
    let mean = scores.iter().sum::<f64>() / nf;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / nf;
    if var <= 0.0 {
        return Err(Error::Degenerate("scores have zero variance".into()));
    }
    let group_mean = |want: bool, count: usize| {
        scores.iter().zip(correct).filter(|(_, &c)| c == want).map(|(s, _)| s).sum::<f64>() / count as f64
    };
    let m1 = group_mean(true, n1);
    let m0 = group_mean(false, n0);
    let r = ((m1 - m0) / var.sqrt() * ((n1 as f64) * (n0 as f64) / (nf * nf)).sqrt()).clamp(-1.0, 1.0);
    Ok(CorrelationResult { r, p_value: correlation_p_value(r, n), n, n_correct: n1, n_incorrect: n0 })
}

/// Two-sided p-value of a Pearson-type correlation `r` over `n` samples.
///
/// `P(|T| > t)` with `T ~ t(df)` equals `I_x(df/2, 1/2)` at
/// `x = df / (df + t^2)`, which is evaluated directly so small tails keep
/// their relative precision. With `t^2 = df r^2 / (1 - r^2)` this simplifies
/// to `x = 1 - r^2`.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let x = (1.0 - r) * (1.0 + r);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single run.
    pub std: f64,
    pub n_runs: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("aggregate of no values".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Aggregate { mean, std, n_runs: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulelearner::Hypothesis;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
    }

    #[test]
    fn levenshtein_counts_scalars_after_nfc() {
        assert_eq!(levenshtein("caf\u{e9}", "cafe\u{301}"), 0);
        assert_eq!(levenshtein("ሰላም", "ሰላሞ"), 1);
    }

    fn pred(id: usize, top: &str) -> PredictionSet {
        PredictionSet {
            example_id: id,
            lemma: "x".into(),
            tags: vec!["T".into()],
            hypotheses: vec![Hypothesis { form: top.into(), log_likelihood: -0.1 }],
        }
    }

    #[test]
    fn accuracy_counts_top1_matches() {
        let preds = vec![pred(0, "a"), pred(1, "b"), pred(2, "c"), pred(3, "d")];
        let gold: HashMap<_, _> = [(0, "a"), (1, "x"), (2, "c"), (3, "y")]
            .into_iter()
            .map(|(i, g)| (i, g.to_owned()))
            .collect();
        assert_eq!(accuracy(&preds, &gold).unwrap(), 0.5);
        let all: HashMap<_, _> = (0..4).map(|i| (i, preds[i].top().form.clone())).collect();
        assert_eq!(accuracy(&preds, &all).unwrap(), 1.0);
        let none: HashMap<_, _> = (0..4).map(|i| (i, "zz".to_owned())).collect();
        assert_eq!(accuracy(&preds, &none).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_errors() {
        assert!(accuracy(&[], &HashMap::new()).is_err());
        assert!(matches!(accuracy(&[pred(3, "a")], &HashMap::new()), Err(Error::MissingGold(3))));
    }

    #[test]
    fn pbcc_reference_case() {
        let res = pbcc(&[-1.0, -2.0, -3.0, -4.0], &[true, true, false, false]).unwrap();
        assert!((res.r - 0.894_427).abs() < 1e-6);
        // df = 2 closed form: P(|T| > t) = 1 - t / sqrt(2 + t^2)
        let t = res.r * 2f64.sqrt() / (1.0 - res.r * res.r).sqrt();
        assert!((t - 2.828).abs() < 1e-3);
        let closed = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((res.p_value - closed).abs() < 1e-12);
        assert!((res.p_value - 0.1056).abs() < 1e-3);
        assert_eq!((res.n, res.n_correct, res.n_incorrect), (4, 2, 2));
    }

    #[test]
    fn pbcc_degenerate_inputs() {
        assert!(matches!(pbcc(&[1.0, 2.0], &[true, false]), Err(Error::Degenerate(_))));
        let e = pbcc(&[1.0, 2.0, 3.0], &[true, true, true]).unwrap_err();
        assert!(e.to_string().contains("no incorrect"));
        let e = pbcc(&[1.0, 2.0, 3.0], &[false, false, false]).unwrap_err();
        assert!(e.to_string().contains("no correct"));
        let e = pbcc(&[1.0, 1.0, 1.0], &[true, false, true]).unwrap_err();
        assert!(e.to_string().contains("variance"));
        assert!(pbcc(&[1.0, 2.0, 3.0], &[true, false]).is_err());
    }

    #[test]
    fn perfect_separation_gives_zero_p_value() {
        assert_eq!(correlation_p_value(1.0, 10), 0.0);
        assert_eq!(correlation_p_value(-1.0, 10), 0.0);
    }

    #[test]
    fn t_tail_matches_cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: P(|T| > t) = 1 - 2 atan(t) / pi
        for t in [0.1, 0.5, 1.0, 3.0, 12.7062, 100.0] {
            let closed = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            let got = student_t_two_sided(t, 1.0);
            assert!(((got - closed) / closed).abs() < 1e-10, "t={t}: {got} vs {closed}");
        }
    }

    #[test]
    fn extreme_tails_keep_relative_precision() {
        // df = 2: P(|T| > t) = 1 - t / sqrt(2 + t^2); evaluated stably as
        // 2 / (sqrt(2 + t^2) (sqrt(2 + t^2) + t))
        for t in [1e3f64, 1e6, 1e20] {
            let s: f64 = (2.0 + t * t).sqrt();
            let closed = 2.0 / (s * (s + t));
            let got = student_t_two_sided(t, 2.0);
            assert!(((got - closed) / closed).abs() < 1e-10, "t={t}: {got} vs {closed}");
        }
        // large df and strong correlation: tiny but non-zero
        let p = correlation_p_value(0.9, 600);
        assert!(p > 0.0 && p < 1e-100, "{p}");
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let a = aggregate(&[0.800, 0.795, 0.774]).unwrap();
        assert!((a.mean - 0.790).abs() < 5e-4);
        assert!((a.std - 0.014).abs() < 5e-4);
        let b = aggregate(&[0.618, 0.621, 0.604]).unwrap();
        assert!((b.mean - 0.614).abs() < 5e-4);
        assert!((b.std - 0.009).abs() < 5e-4);
        let one = aggregate(&[0.42]).unwrap();
        assert_eq!((one.mean, one.std, one.n_runs), (0.42, 0.0, 1));
        assert!(aggregate(&[]).is_err());
    }
}
