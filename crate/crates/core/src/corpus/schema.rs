use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Md3Error, Result};

/// Size of the published movie corpus the cardinality targets refer to.
pub const MOVIE_REFERENCE_SIZE: usize = 16_881;

/// Per-attribute statistics a generated corpus should reproduce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityTarget {
    /// Fraction of records holding at least one value, in (0, 1].
    pub coverage: f64,
    /// Distinct values observed at `reference_size` records.
    pub distinct: usize,
    /// Mean number of values among records that have the attribute (≥ 1).
    pub mean_values: f64,
    /// Open vocabularies (people) grow with the corpus; closed ones
    /// (years, genres, languages) do not.
    pub open_vocabulary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<String>,
    pub value_vocab: Vec<Vec<String>>,
    pub targets: Vec<CardinalityTarget>,
    pub reference_size: usize,
}

impl AttributeSchema {
    pub fn new(
        attributes: Vec<String>,
        value_vocab: Vec<Vec<String>>,
        targets: Vec<CardinalityTarget>,
        reference_size: usize,
    ) -> Result<Self> {
        let schema = AttributeSchema {
            attributes,
            value_vocab,
            targets,
            reference_size,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.attributes.len();
        if l == 0 {
            return Err(Md3Error::Schema(
                "schema needs at least one attribute".into(),
            ));
        }
        if self.value_vocab.len() != l || self.targets.len() != l {
            return Err(Md3Error::Schema(
                "value_vocab and targets must have one entry per attribute".into(),
            ));
        }
        for (i, a) in self.attributes.iter().enumerate() {
            if self.attributes[..i].contains(a) {
                return Err(Md3Error::Schema(format!("duplicate attribute `{a}`")));
            }
            if self.value_vocab[i].is_empty() {
                return Err(Md3Error::Schema(format!("attribute `{a}` has no values")));
            }
            let t = &self.targets[i];
            if !(t.coverage > 0.0 && t.coverage <= 1.0) {
                return Err(Md3Error::Schema(format!("coverage of `{a}` outside (0,1]")));
            }
            if t.mean_values < 1.0 {
                return Err(Md3Error::Schema(format!("mean values of `{a}` below 1")));
            }
        }
        if self.reference_size == 0 {
            return Err(Md3Error::Schema("reference size must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, attribute: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == attribute)
            .ok_or_else(|| Md3Error::Schema(format!("unknown attribute `{attribute}`")))
    }

    pub fn name(&self, j: usize) -> &str {
        &self.attributes[j]
    }

    pub fn allows(&self, j: usize, value: &str) -> bool {
        self.value_vocab[j].iter().any(|v| v == value)
    }

    /// Expected number of values drawn for attribute `j` in an `n`-record
    /// corpus.
    pub fn expected_draws(&self, j: usize, n: usize) -> f64 {
        let t = &self.targets[j];
        (t.coverage * n as f64).round() * t.mean_values
    }

    /// Distinct-value target for attribute `j` at corpus size `n`.
    pub fn target_distinct(&self, j: usize, n: usize) -> usize {
        let t = &self.targets[j];
        let scaled = if t.open_vocabulary {
            (t.distinct as f64 * n as f64 / self.reference_size as f64).round() as usize
        } else {
            t.distinct
        };
        let draws = self.expected_draws(j, n).floor() as usize;
        scaled.min(draws).min(self.value_vocab[j].len()).max(1)
    }

    /// Stable content hash, used to key checkpoints.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The six-attribute movie schema with targets taken from the published
    /// corpus statistics (documents containing the attribute, distinct
    /// values, mean values per document).
    pub fn movie() -> Self {
        let people = person_names(12_000);
        let years: Vec<String> = (1915..=2017).map(|y| y.to_string()).collect();
        let genres: Vec<String> = GENRES.iter().map(|s| s.to_string()).collect();
        let languages: Vec<String> = LANGUAGES.iter().map(|s| s.to_string()).collect();
        let n = MOVIE_REFERENCE_SIZE as f64;
        let target = |num: f64, distinct: usize, mean: f64, open: bool| CardinalityTarget {
            coverage: num / n,
            distinct,
            mean_values: mean,
            open_vocabulary: open,
        };
        AttributeSchema {
            attributes: MOVIE_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            value_vocab: vec![
                people.clone(),
                years,
                people.clone(),
                people,
                genres,
                languages,
            ],
            targets: vec![
                target(14_853.0, 6_187, 1.05, true),
                // Every movie has exactly one year.
                target(n, 103, 1.00, false),
                target(12_712.0, 10_404, 1.48, true),
                target(13_204.0, 10_180, 2.48, true),
                target(12_118.0, 23, 1.27, false),
                target(3_071.0, 96, 1.10, false),
            ],
            reference_size: MOVIE_REFERENCE_SIZE,
        }
    }
}

pub const MOVIE_ATTRIBUTES: [&str; 6] = [
    "directed_by",
    "release_year",
    "written_by",
    "starred_actors",
    "has_genre",
    "in_language",
];

pub const GENRES: [&str; 23] = [
    "drama",
    "comedy",
    "thriller",
    "horror",
    "romance",
    "action",
    "documentary",
    "animation",
    "crime",
    "mystery",
    "western",
    "musical",
    "war",
    "fantasy",
    "adventure",
    "family",
    "biography",
    "history",
    "sport",
    "music",
    "scifi",
    "noir",
    "satire",
];

pub const LANGUAGES: [&str; 96] = [
    "english",
    "french",
    "german",
    "spanish",
    "italian",
    "japanese",
    "mandarin",
    "cantonese",
    "korean",
    "hindi",
    "russian",
    "portuguese",
    "swedish",
    "danish",
    "norwegian",
    "finnish",
    "dutch",
    "polish",
    "czech",
    "hungarian",
    "greek",
    "turkish",
    "arabic",
    "hebrew",
    "persian",
    "tamil",
    "telugu",
    "bengali",
    "marathi",
    "malayalam",
    "kannada",
    "punjabi",
    "urdu",
    "thai",
    "vietnamese",
    "indonesian",
    "malay",
    "tagalog",
    "romanian",
    "bulgarian",
    "serbian",
    "croatian",
    "bosnian",
    "slovenian",
    "slovak",
    "ukrainian",
    "belarusian",
    "lithuanian",
    "latvian",
    "estonian",
    "icelandic",
    "irish",
    "welsh",
    "scottish",
    "basque",
    "catalan",
    "galician",
    "albanian",
    "macedonian",
    "georgian",
    "armenian",
    "azerbaijani",
    "kazakh",
    "uzbek",
    "mongolian",
    "tibetan",
    "nepali",
    "sinhala",
    "burmese",
    "khmer",
    "lao",
    "swahili",
    "amharic",
    "yoruba",
    "zulu",
    "xhosa",
    "afrikaans",
    "somali",
    "hausa",
    "igbo",
    "wolof",
    "maori",
    "samoan",
    "hawaiian",
    "quechua",
    "guarani",
    "latin",
    "esperanto",
    "yiddish",
    "romani",
    "luxembourgish",
    "maltese",
    "faroese",
    "inuktitut",
    "navajo",
    "cherokee",
];

const ONSETS: [&str; 20] = [
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "br",
    "tr", "gr",
];
const NUCLEI: [&str; 8] = ["a", "e", "i", "o", "u", "ai", "ou", "ei"];
const CODAS: [&str; 6] = ["", "n", "r", "s", "l", "k"];

fn syllable(k: usize) -> String {
    let o = ONSETS[k % ONSETS.len()];
    let n = NUCLEI[(k / ONSETS.len()) % NUCLEI.len()];
    let c = CODAS[(k / (ONSETS.len() * NUCLEI.len())) % CODAS.len()];
    format!("{o}{n}{c}")
}

/// Deterministic pseudo-word `k`: two syllables, or three for the last
/// names so the two pools never collide.
fn pseudo_word(k: usize, syllables: usize) -> String {
    let base = ONSETS.len() * NUCLEI.len() * CODAS.len();
    let mut s = String::new();
    let mut rest = k;
    for _ in 0..syllables {
        s.push_str(&syllable(rest % base));
        rest = rest / base + 7;
    }
    s
}

/// `count` distinct "first last" names in a fixed, well-mixed order.
pub fn person_names(count: usize) -> Vec<String> {
    let firsts: Vec<String> = (0..160).map(|k| pseudo_word(k * 37 + 3, 2)).collect();
    let lasts: Vec<String> = (0..200).map(|k| pseudo_word(k * 53 + 11, 3)).collect();
    let total = firsts.len() * lasts.len();
    assert!(count <= total);
    // Walk the grid with a stride coprime to its size.
    let stride = 7_919;
    (0..count)
        .map(|i| {
            let cell = (i * stride) % total;
            format!(
                "{} {}",
                firsts[cell % firsts.len()],
                lasts[cell / firsts.len()]
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn movie_schema_is_valid() {
        let s = AttributeSchema::movie();
        s.validate().unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.index_of("release_year").unwrap(), 1);
        assert!(s.index_of("budget").is_err());
        assert_eq!(s.target_distinct(1, 2000), 103);
    }

    #[test]
    fn person_names_are_unique_two_token_strings() {
        let names = person_names(12_000);
        let set: HashSet<&String> = names.iter().collect();
        assert_eq!(set.len(), names.len());
        assert!(names.iter().all(|n| n.split(' ').count() == 2));
        let firsts: HashSet<&str> = names.iter().map(|n| n.split(' ').next().unwrap()).collect();
        let lasts: HashSet<&str> = names.iter().map(|n| n.split(' ').nth(1).unwrap()).collect();
        assert!(firsts.is_disjoint(&lasts));
    }

    #[test]
    fn rejects_bad_schemas() {
        let t = CardinalityTarget {
            coverage: 1.0,
            distinct: 1,
            mean_values: 1.0,
            open_vocabulary: false,
        };
        assert!(AttributeSchema::new(vec![], vec![], vec![], 1).is_err());
        assert!(AttributeSchema::new(
            vec!["a".into(), "a".into()],
            vec![vec!["x".into()], vec!["y".into()]],
            vec![t.clone(), t.clone()],
            1
        )
        .is_err());
        assert!(AttributeSchema::new(vec!["a".into()], vec![vec![]], vec![t.clone()], 1).is_err());
        let mut bad = t;
        bad.coverage = 0.0;
        assert!(
            AttributeSchema::new(vec!["a".into()], vec![vec!["x".into()]], vec![bad], 1).is_err()
        );
    }
}
