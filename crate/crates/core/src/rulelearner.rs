//! Built-in affix-rewrite learner.
//!
//! Each training pair is reduced to the longest common substring of lemma and
//! form; what surrounds it on either side becomes a prefix/suffix rewrite
//! filed under the pair's tag bundle. Prediction applies every rule of the
//! bundle whose lemma-side affixes fit the input and scores each distinct
//! output by `count * 2^(matched affix length)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{join_tags, ExampleId, Triple};
use crate::error::{Error, Result};

/// Affix rewrite extracted from one lemma/form pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Affixes {
    pub lemma_prefix: String,
    pub form_prefix: String,
    pub lemma_suffix: String,
    pub form_suffix: String,
}

impl Affixes {
    /// Applies the rewrite if the lemma-side affixes fit without overlapping.
    pub fn apply(&self, lemma: &str) -> Option<String> {
        let lp = self.lemma_prefix.chars().count();
        let ls = self.lemma_suffix.chars().count();
        if lp + ls > lemma.chars().count() {
            return None;
        }
        let core = lemma.strip_prefix(self.lemma_prefix.as_str())?;
        let core = core.strip_suffix(self.lemma_suffix.as_str())?;
        let mut out = String::with_capacity(self.form_prefix.len() + core.len() + self.form_suffix.len());
        out.push_str(&self.form_prefix);
        out.push_str(core);
        out.push_str(&self.form_suffix);
        Some(out)
    }

    /// Number of lemma characters the rule conditions on.
    pub fn specificity(&self) -> usize {
        self.lemma_prefix.chars().count() + self.lemma_suffix.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub tag_key: String,
    pub affixes: Affixes,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleModel {
    /// Rules per tag bundle, aggregated by identical affixes.
    pub rules: BTreeMap<String, BTreeMap<Affixes, u64>>,
    pub trained_size: usize,
}

impl RuleModel {
    pub fn rules_for(&self, tag_key: &str) -> impl Iterator<Item = Rule> + '_ {
        let tag_key = tag_key.to_owned();
        self.rules.get(&tag_key).into_iter().flat_map(move |m| {
            let tag_key = tag_key.clone();
            m.iter().map(move |(a, &count)| Rule { tag_key: tag_key.clone(), affixes: a.clone(), count })
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.values().map(BTreeMap::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub form: String,
    pub log_likelihood: f64,
}

/// An input together with its ranked beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub example_id: ExampleId,
    pub lemma: String,
    pub tags: Vec<String>,
    /// Sorted by log-likelihood, best first.
    pub hypotheses: Vec<Hypothesis>,
}

impl PredictionSet {
    pub fn top(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }

    pub fn tag_key(&self) -> String {
        join_tags(&self.tags)
    }
}

/// Lemma and tags of an example, without its gold form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictInput {
    pub example_id: ExampleId,
    pub lemma: String,
    pub tags: Vec<String>,
}

impl From<&Triple> for PredictInput {
    fn from(t: &Triple) -> Self {
        PredictInput { example_id: t.id, lemma: t.lemma.clone(), tags: t.tags.clone() }
    }
}

/// Longest common substring, as `(start in a, start in b, length)` over
/// char indices. Ties go to the leftmost start in `a`, then in `b`.
fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    // prev[j]: length of the common run ending at a[i-1], b[j-1]
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            let len = cur[j];
            if len == 0 {
                continue;
            }
            let cand = (i - len, j - len, len);
            let better = len > best.2
                || (len == best.2 && (cand.0, cand.1) < (best.0, best.1));
            if better {
                best = cand;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub fn extract_rule(lemma: &str, form: &str) -> Affixes {
    let l: Vec<char> = lemma.chars().collect();
    let f: Vec<char> = form.chars().collect();
    let (ls, fs, len) = longest_common_substring(&l, &f);
    if len == 0 {
        return Affixes {
            lemma_prefix: lemma.to_owned(),
            form_prefix: form.to_owned(),
            lemma_suffix: String::new(),
            form_suffix: String::new(),
        };
    }
    let s = |v: &[char]| v.iter().collect::<String>();
    Affixes {
        lemma_prefix: s(&l[..ls]),
        form_prefix: s(&f[..fs]),
        lemma_suffix: s(&l[ls + len..]),
        form_suffix: s(&f[fs + len..]),
    }
}

pub fn train<'a, I>(triples: I) -> Result<RuleModel>
where
    I: IntoIterator<Item = &'a Triple>,
{
    let mut model = RuleModel::default();
    for t in triples {
        let affixes = extract_rule(&t.lemma, &t.form);
        *model.rules.entry(t.tag_key()).or_default().entry(affixes).or_insert(0) += 1;
        model.trained_size += 1;
    }
    if model.trained_size == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty list".into()));
    }
    Ok(model)
}

/// Scores every candidate the model can produce for `(lemma, tags)` and
/// returns them as `(form, probability)`, best first. Unseen bundles and
/// unmatched lemmas fall back to the lemma itself with probability 1.
pub fn candidates(model: &RuleModel, lemma: &str, tags: &[String]) -> Vec<(String, f64)> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    if let Some(rules) = model.rules.get(&join_tags(tags)) {
        for (affixes, &count) in rules {
            if let Some(out) = affixes.apply(lemma) {
                let weight = count as f64 * 2f64.powi(affixes.specificity() as i32);
                *scores.entry(out).or_insert(0.0) += weight;
            }
        }
    }
    if scores.is_empty() {
        return vec![(lemma.to_owned(), 1.0)];
    }
    let total: f64 = scores.values().sum();
    let mut out: Vec<(String, f64)> = scores.into_iter().map(|(f, s)| (f, s / total)).collect();
    // BTreeMap order is lexicographic, so a stable sort keeps form order on ties.
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

pub fn predict(model: &RuleModel, input: &PredictInput, beam: usize) -> Result<PredictionSet> {
    if beam == 0 {
        return Err(Error::InvalidArgument("beam must be at least 1".into()));
    }
    let hypotheses = candidates(model, &input.lemma, &input.tags)
        .into_iter()
        .take(beam)
        .map(|(form, p)| Hypothesis { form, log_likelihood: clamp_log(p.ln()) })
        .collect();
    Ok(PredictionSet {
        example_id: input.example_id,
        lemma: input.lemma.clone(),
        tags: input.tags.clone(),
        hypotheses,
    })
}

// ln of a probability that rounded to slightly above 1
fn clamp_log(ll: f64) -> f64 {
    if ll > 0.0 {
        0.0
    } else {
        ll
    }
}
