//! Deterministic generator for a small synthetic agglutinative language.
//!
//! The language has nouns and verbs built from `CV(CV)C` stems.
//!
//! * Nouns end in a class vowel, `-a` or `-o`. Inflected forms are
//!   `stem + number link + case suffix` over 3 numbers and 8 cases (24 cells).
//!   Links: class `a` takes `a`/`es`/`i` for SG/DU/PL, class `o` takes
//!   `o`/`us`/`e`. Cases: NOM `-`, ACC `n`, GEN `s`, DAT `ra`, LOC `ti`,
//!   ABL `del`, INS `mu`, COM `vel`. NOM;SG equals the lemma.
//! * Verbs end in a theme vowel plus `r` (`-ar`, `-ur`). Forms are
//!   `stem + tense link + person/number` over PRS/PST/FUT x 1/2/3 x SG/PL,
//!   plus two imperatives and two participles (22 cells). PRS links the
//!   theme vowel, PST links `il`/`el`, FUT links theme + `s`.
//! * Palatalization: a stem-final `k` becomes `č` before a front vowel
//!   (`e`, `i`). It affects only the cells whose suffix starts with a front
//!   vowel and only the minority of stems that end in `k`.
//!
//! Together the 46 tag bundles give a language where most of each cell is a
//! single regular rewrite, and a learnable minority pattern needs enough
//! `k`-stem examples per cell to outweigh the regular rule.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::corpus::Dataset;
use crate::error::Result;
use crate::rng::run_rng;

const CONSONANTS: [char; 10] = ['p', 't', 'm', 'n', 's', 'l', 'r', 'v', 'd', 'g'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
const CASES: [(&str, &str); 8] = [
    ("NOM", ""),
    ("ACC", "n"),
    ("GEN", "s"),
    ("DAT", "ra"),
    ("LOC", "ti"),
    ("ABL", "del"),
    ("INS", "mu"),
    ("COM", "vel"),
];
const PERSONS: [(&str, &str, &str); 6] = [
    ("1", "SG", "m"),
    ("2", "SG", "t"),
    ("3", "SG", ""),
    ("1", "PL", "me"),
    ("2", "PL", "te"),
    ("3", "PL", "nt"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_triples: usize,
    pub n_lexemes: usize,
    /// Share of stems ending in `k`.
    pub k_stem_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n_triples: 3000, n_lexemes: 400, k_stem_rate: 0.2, seed: 2023 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Noun,
    Verb,
}

/// A paradigm cell: tag bundle plus the suffix it attaches for a given class
/// vowel.
struct Cell {
    tags: String,
    pos: Pos,
    suffix: fn(char, &str) -> String,
    extra: &'static str,
}

fn noun_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for number in ["SG", "DU", "PL"] {
        for (case, suffix) in CASES {
            let link: fn(char, &str) -> String = match number {
                "SG" => |class, s| format!("{class}{s}"),
                "DU" => |class, s| format!("{}{s}", if class == 'a' { "es" } else { "us" }),
                _ => |class, s| format!("{}{s}", if class == 'a' { "i" } else { "e" }),
            };
            cells.push(Cell { tags: format!("N;{case};{number}"), pos: Pos::Noun, suffix: link, extra: suffix });
        }
    }
    cells
}

fn verb_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for tense in ["PRS", "PST", "FUT"] {
        for (person, number, ending) in PERSONS {
            let link: fn(char, &str) -> String = match tense {
                "PRS" => |theme, s| format!("{theme}{s}"),
                "PST" => |theme, s| format!("{}{s}", if theme == 'a' { "il" } else { "el" }),
                _ => |theme, s| format!("{theme}s{s}"),
            };
            cells.push(Cell {
                tags: format!("V;{tense};{person};{number}"),
                pos: Pos::Verb,
                suffix: link,
                extra: ending,
            });
        }
    }
    cells.push(Cell { tags: "V;IMP;2;SG".into(), pos: Pos::Verb, suffix: |_, s| format!("i{s}"), extra: "" });
    cells.push(Cell { tags: "V;IMP;2;PL".into(), pos: Pos::Verb, suffix: |_, s| format!("i{s}"), extra: "te" });
    cells.push(Cell { tags: "V;PTCP;PRS".into(), pos: Pos::Verb, suffix: |theme, s| format!("{theme}{s}"), extra: "nd" });
    cells.push(Cell { tags: "V;PTCP;PST".into(), pos: Pos::Verb, suffix: |_, s| format!("en{s}"), extra: "" });
    cells
}

/// Every tag bundle of the language, nouns first.
pub fn tag_bundles() -> Vec<String> {
    noun_cells().into_iter().chain(verb_cells()).map(|c| c.tags).collect()
}

/// Joins stem and suffix, palatalizing a stem-final `k` before a front vowel.
fn attach(stem: &str, suffix: &str) -> String {
    let front = suffix.starts_with(['e', 'i']);
    match stem.strip_suffix('k') {
        Some(base) if front => format!("{base}č{suffix}"),
        _ => format!("{stem}{suffix}"),
    }
}

struct Lexeme {
    stem: String,
    class: char,
    pos: Pos,
}

impl Lexeme {
    fn lemma(&self) -> String {
        match self.pos {
            Pos::Noun => format!("{}{}", self.stem, self.class),
            Pos::Verb => format!("{}{}r", self.stem, self.class),
        }
    }

    fn inflect(&self, cell: &Cell) -> String {
        attach(&self.stem, &(cell.suffix)(self.class, cell.extra))
    }
}

fn stem<R: Rng>(rng: &mut R, k_rate: f64) -> String {
    let syllables = rng.random_range(1..=2);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).unwrap());
        s.push(*VOWELS.choose(rng).unwrap());
    }
    if rng.random_bool(k_rate) {
        s.push('k');
    } else {
        s.push(*CONSONANTS.choose(rng).unwrap());
    }
    s
}

/// Generates `n_triples` distinct (lexeme, cell) examples in shuffled order.
pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = run_rng(cfg.seed);
    let nouns = noun_cells();
    let verbs = verb_cells();

    let mut seen = BTreeSet::new();
    let mut lexemes = Vec::new();
    while lexemes.len() < cfg.n_lexemes {
        let pos = if lexemes.len() % 2 == 0 { Pos::Noun } else { Pos::Verb };
        let class = match pos {
            Pos::Noun => *['a', 'o'].choose(&mut rng).unwrap(),
            Pos::Verb => *['a', 'u'].choose(&mut rng).unwrap(),
        };
        let lex = Lexeme { stem: stem(&mut rng, cfg.k_stem_rate), class, pos };
        if seen.insert(lex.lemma()) {
            lexemes.push(lex);
        }
    }

    let mut pairs: Vec<(usize, usize)> = lexemes
        .iter()
        .enumerate()
        .flat_map(|(i, lex)| {
            let n = if lex.pos == Pos::Noun { nouns.len() } else { verbs.len() };
            (0..n).map(move |c| (i, c))
        })
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(cfg.n_triples);

    let entries = pairs.into_iter().map(|(i, c)| {
        let lex = &lexemes[i];
        let cell = if lex.pos == Pos::Noun { &nouns[c] } else { &verbs[c] };
        debug_assert_eq!(cell.pos, lex.pos);
        (lex.lemma(), cell.tags.clone(), lex.inflect(cell))
    });
    Dataset::from_entries(entries, "synthetic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{serialize, ColumnOrder};

    #[test]
    fn has_enough_slots() {
        let bundles = tag_bundles();
        assert_eq!(bundles.len(), 46);
        assert_eq!(bundles.iter().collect::<BTreeSet<_>>().len(), 46);
    }

    #[test]
    fn inflection_examples() {
        let noun = Lexeme { stem: "rok".into(), class: 'a', pos: Pos::Noun };
        let cells = noun_cells();
        let by_tag = |t: &str| cells.iter().find(|c| c.tags == t).unwrap();
        assert_eq!(noun.lemma(), "roka");
        assert_eq!(noun.inflect(by_tag("N;NOM;SG")), "roka");
        assert_eq!(noun.inflect(by_tag("N;ACC;SG")), "rokan");
        assert_eq!(noun.inflect(by_tag("N;LOC;PL")), "ročiti");
        assert_eq!(noun.inflect(by_tag("N;GEN;DU")), "ročess");
        let verb = Lexeme { stem: "talup".into(), class: 'u', pos: Pos::Verb };
        let vcells = verb_cells();
        let vtag = |t: &str| vcells.iter().find(|c| c.tags == t).unwrap();
        assert_eq!(verb.lemma(), "talupur");
        assert_eq!(verb.inflect(vtag("V;PST;1;PL")), "talupelme");
        assert_eq!(verb.inflect(vtag("V;FUT;3;PL")), "talupusnt");
    }

    #[test]
    fn generation_is_deterministic_and_sized() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.len(), 3000);
        assert_eq!(serialize(&a, ColumnOrder::LemmaFormTags), serialize(&b, ColumnOrder::LemmaFormTags));
        let other = generate(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn covers_every_bundle() {
        let d = generate(&SyntheticConfig::default()).unwrap();
        let used: BTreeSet<String> = d.triples.iter().map(|t| t.tag_key()).collect();
        assert_eq!(used.len(), 46);
    }
}
