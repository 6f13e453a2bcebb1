//! Inflection datasets: UniMorph-style TSV parsing, serialization and
//! seeded splitting into train/dev/test/pool id sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng::run_rng;

/// Stable identifier of a triple within one dataset (input order, from 0).
pub type ExampleId = usize;

/// Set of example ids. Ordered so that iteration is deterministic.
pub type IdSet = BTreeSet<ExampleId>;

/// Separator between features of a tag bundle.
pub const TAG_SEPARATOR: char = ';';

/// One labeled inflection example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub id: ExampleId,
    pub lemma: String,
    pub tags: Vec<String>,
    pub form: String,
}

impl Triple {
    /// Canonical `;`-joined tag bundle.
    pub fn tag_key(&self) -> String {
        join_tags(&self.tags)
    }
}

pub fn join_tags(tags: &[String]) -> String {
    tags.join(";")
}

/// Splits a `;`-joined bundle. Empty features are rejected.
pub fn split_tags(bundle: &str) -> Option<Vec<String>> {
    let tags: Vec<String> = bundle.split(TAG_SEPARATOR).map(str::to_owned).collect();
    if tags.iter().any(|t| t.is_empty() || t.contains('\t')) {
        return None;
    }
    Some(tags)
}

pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Column order of a three-column inflection file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ColumnOrder {
    /// `lemma \t form \t tags`, the UniMorph release convention.
    #[default]
    LemmaFormTags,
    /// `lemma \t tags \t form`.
    LemmaTagsForm,
}

impl FromStr for ColumnOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lemmaformtags" => Ok(ColumnOrder::LemmaFormTags),
            "lemmatagsform" => Ok(ColumnOrder::LemmaTagsForm),
            _ => Err(Error::InvalidArgument(format!("unknown column order `{s}`"))),
        }
    }
}

impl fmt::Display for ColumnOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnOrder::LemmaFormTags => f.write_str("lemma-form-tags"),
            ColumnOrder::LemmaTagsForm => f.write_str("lemma-tags-form"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub triples: Vec<Triple>,
    pub source_label: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Looks up a triple by id. Ids are positional, so this is an index.
    pub fn get(&self, id: ExampleId) -> Option<&Triple> {
        self.triples.get(id).filter(|t| t.id == id)
    }

    /// Builds a dataset from `(lemma, tags, form)` tuples, assigning ids by
    /// position and normalizing strings.
    pub fn from_entries<I, L, T, F>(entries: I, source_label: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (L, T, F)>,
        L: AsRef<str>,
        T: AsRef<str>,
        F: AsRef<str>,
    {
        let mut triples = Vec::new();
        for (i, (lemma, tags, form)) in entries.into_iter().enumerate() {
            let triple = make_triple(i, lemma.as_ref(), tags.as_ref(), form.as_ref())
                .map_err(|reason| Error::Parse { line: i + 1, reason })?;
            triples.push(triple);
        }
        Ok(Dataset { triples, source_label: source_label.into() })
    }
}

fn make_triple(id: ExampleId, lemma: &str, tags: &str, form: &str) -> std::result::Result<Triple, String> {
    if lemma.is_empty() {
        return Err("empty lemma".into());
    }
    if form.is_empty() {
        return Err("empty form".into());
    }
    if tags.is_empty() {
        return Err("empty tag bundle".into());
    }
    let tags = split_tags(tags).ok_or_else(|| format!("malformed tag bundle `{tags}`"))?;
    Ok(Triple { id, lemma: nfc(lemma), tags, form: nfc(form) })
}

/// Parses a UTF-8 inflection file. Blank lines are skipped; every other line
/// must have exactly three non-empty tab-separated fields.
pub fn parse_unimorph(text: &str, order: ColumnOrder) -> Result<Dataset> {
    let mut triples = Vec::new();
    for (lineno, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim_matches(' ').is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (lemma, tags, form) = match order {
            ColumnOrder::LemmaFormTags => (fields[0], fields[2], fields[1]),
            ColumnOrder::LemmaTagsForm => (fields[0], fields[1], fields[2]),
        };
        let triple = make_triple(triples.len(), lemma, tags, form)
            .map_err(|reason| Error::Parse { line: lineno + 1, reason })?;
        triples.push(triple);
    }
    Ok(Dataset { triples, source_label: String::new() })
}

/// Parses raw bytes, reporting invalid UTF-8 as an error.
pub fn parse_unimorph_bytes(bytes: &[u8], order: ColumnOrder) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Utf8(e.to_string()))?;
    parse_unimorph(text, order)
}

pub fn serialize(dataset: &Dataset, order: ColumnOrder) -> String {
    let mut out = String::new();
    for t in &dataset.triples {
        write_triple(&mut out, t, order);
    }
    out
}

pub(crate) fn write_triple(out: &mut String, t: &Triple, order: ColumnOrder) {
    let tags = t.tag_key();
    let (second, third) = match order {
        ColumnOrder::LemmaFormTags => (t.form.as_str(), tags.as_str()),
        ColumnOrder::LemmaTagsForm => (tags.as_str(), t.form.as_str()),
    };
    out.push_str(&t.lemma);
    out.push('\t');
    out.push_str(second);
    out.push('\t');
    out.push_str(third);
    out.push('\n');
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed_train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: IdSet,
    pub dev: IdSet,
    pub test: IdSet,
    pub pool: IdSet,
}

/// Shuffles the id list with a seeded Fisher-Yates pass and cuts it into
/// train, dev and test; whatever remains is the pool.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if spec.seed_train_size == 0 || spec.test_size == 0 {
        return Err(Error::InvalidArgument(
            "seed_train_size and test_size must be positive".into(),
        ));
    }
    let required = spec.seed_train_size + spec.dev_size + spec.test_size;
    if required > dataset.len() {
        return Err(Error::InfeasibleSplit { required, available: dataset.len() });
    }
    let mut ids: Vec<ExampleId> = dataset.triples.iter().map(|t| t.id).collect();
    ids.shuffle(&mut run_rng(spec.rng_seed));

    let (train, rest) = ids.split_at(spec.seed_train_size);
    let (dev, rest) = rest.split_at(spec.dev_size);
    let (test, pool) = rest.split_at(spec.test_size);
    Ok(Split {
        train: train.iter().copied().collect(),
        dev: dev.iter().copied().collect(),
        test: test.iter().copied().collect(),
        pool: pool.iter().copied().collect(),
    })
}
