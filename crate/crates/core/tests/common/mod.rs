//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it is used to check.

#![allow(dead_code)]

use morphal::{Hypothesis, PredictionSet, ScoredExample};

/// Edit distance from the full `(m+1) x (n+1)` dynamic-programming table.
pub fn levenshtein_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Pearson correlation with the textbook two-pass formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// `-sum p ln p` with probabilities from a naive softmax (no max shift).
pub fn direct_entropy(lls: &[f64], tau: f64) -> f64 {
    let z: f64 = lls.iter().map(|l| l.exp()).sum();
    lls.iter().map(|l| l.exp() / z).filter(|&p| p >= tau).map(|p| -p * p.ln()).sum()
}

pub fn prediction(id: usize, hyps: &[(&str, f64)]) -> PredictionSet {
    PredictionSet {
        example_id: id,
        lemma: format!("lemma{id}"),
        tags: vec!["T".into()],
        hypotheses: hyps.iter().map(|&(f, ll)| Hypothesis { form: f.into(), log_likelihood: ll }).collect(),
    }
}

fn gap(e: &ScoredExample) -> f64 {
    let h = &e.prediction.hypotheses;
    if h.len() < 2 {
        f64::INFINITY
    } else {
        h[0].log_likelihood - h[1].log_likelihood
    }
}

/// Repeatedly extracts the best remaining element under `better`.
fn extract_in_order(
    mut items: Vec<&ScoredExample>,
    better: impl Fn(&ScoredExample, &ScoredExample) -> bool,
) -> Vec<&ScoredExample> {
    let mut out = Vec::new();
    while !items.is_empty() {
        let mut best = 0;
        for i in 1..items.len() {
            if better(items[i], items[best]) {
                best = i;
            }
        }
        out.push(items.remove(best));
    }
    out
}

/// Oracle selection written directly from the rules:
/// * incorrect = top-1 differs from gold;
/// * surplus incorrect: largest edit distance first;
/// * surplus correct: largest first-vs-second gap first;
/// * shortfall: take the whole wanted group (same ranking), then fill from
///   the other group by smallest gap (incorrect run) or largest gap
///   (correct run);
/// * ties: smaller pool index first.
pub fn brute_force_oracle(pool: &[ScoredExample], k: usize, want_incorrect: bool) -> Vec<usize> {
    let is_wrong = |e: &ScoredExample| e.prediction.hypotheses[0].form != *e.gold_form.as_ref().unwrap();
    let wanted: Vec<&ScoredExample> = pool.iter().filter(|e| is_wrong(e) == want_incorrect).collect();
    let others: Vec<&ScoredExample> = pool.iter().filter(|e| is_wrong(e) != want_incorrect).collect();

    let dist = |e: &ScoredExample| levenshtein_table(&e.prediction.hypotheses[0].form, e.gold_form.as_ref().unwrap());
    let ranked_wanted = if want_incorrect {
        extract_in_order(wanted, |a, b| dist(a) > dist(b) || (dist(a) == dist(b) && a.pool_index < b.pool_index))
    } else {
        extract_in_order(wanted, |a, b| gap(a) > gap(b) || (gap(a) == gap(b) && a.pool_index < b.pool_index))
    };
    let mut chosen: Vec<usize> = ranked_wanted.iter().map(|e| e.example_id).collect();
    if chosen.len() < k {
        let fill = if want_incorrect {
            extract_in_order(others, |a, b| gap(a) < gap(b) || (gap(a) == gap(b) && a.pool_index < b.pool_index))
        } else {
            extract_in_order(others, |a, b| gap(a) > gap(b) || (gap(a) == gap(b) && a.pool_index < b.pool_index))
        };
        chosen.extend(fill.iter().map(|e| e.example_id));
    }
    chosen.truncate(k);
    chosen
}
