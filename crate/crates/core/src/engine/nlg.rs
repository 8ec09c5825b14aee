//! Template-based surface realisation for the agent and the simulated user.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{attribute_words, join_values, Answer};
use crate::error::{Md3Error, Result};
use crate::text::tokenize;

/// Question, answer and unknown templates for one attribute. `{v}` is the
/// value slot in answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeTemplates {
    pub ask: Vec<String>,
    pub answer: Vec<String>,
}

const UNKNOWN: [&str; 4] = [
    "i don't know",
    "i have no idea",
    "not sure , sorry",
    "i can't remember that",
];

const GUESS: [&str; 3] = [
    "is it {t} ?",
    "my guess is {t} .",
    "i think the movie is {t} .",
];

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Built-in templates for the movie attributes, with a generic fallback
/// for any other attribute name.
pub fn attribute_templates(attribute: &str) -> AttributeTemplates {
    let (ask, answer): (&[&str], &[&str]) = match attribute {
        "directed_by" => (
            &[
                "who directed it ?",
                "who is the director ?",
                "do you know who directed the movie ?",
            ],
            &[
                "it is directed by {v}",
                "its director is {v}",
                "{v} directed it",
            ],
        ),
        "release_year" => (
            &[
                "when is it released ?",
                "what year did it come out ?",
                "when was the movie released ?",
            ],
            &[
                "it was released in {v}",
                "it came out in {v}",
                "the year is {v}",
            ],
        ),
        "written_by" => (
            &[
                "who wrote it ?",
                "who is the writer ?",
                "who wrote the screenplay ?",
            ],
            &["it is written by {v}", "the writer is {v}", "{v} wrote it"],
        ),
        "starred_actors" => (
            &[
                "who stars in it ?",
                "who are the actors ?",
                "which actors play in the movie ?",
            ],
            &["it stars {v}", "the actors are {v}", "{v} play in it"],
        ),
        "has_genre" => (
            &[
                "what genre is it ?",
                "what kind of movie is it ?",
                "which genre does it belong to ?",
            ],
            &["it is a {v} movie", "the genre is {v}", "it belongs to {v}"],
        ),
        "in_language" => (
            &[
                "what language is it in ?",
                "which language do they speak ?",
                "what is the language of the movie ?",
            ],
            &["it is in {v}", "the language is {v}", "they speak {v}"],
        ),
        _ => {
            let w = attribute_words(attribute);
            return AttributeTemplates {
                ask: vec![
                    format!("what is its {w} ?"),
                    format!("do you know its {w} ?"),
                    format!("tell me the {w} ."),
                ],
                answer: vec![
                    format!("its {w} is {{v}}"),
                    format!("the {w} is {{v}}"),
                    "it is {v}".to_string(),
                ],
            };
        }
    };
    AttributeTemplates {
        ask: owned(ask),
        answer: owned(answer),
    }
}

/// Template set for a whole schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    pub attributes: Vec<AttributeTemplates>,
    pub unknown: Vec<String>,
    pub guess: Vec<String>,
}

impl Templates {
    pub fn for_attributes<S: AsRef<str>>(attributes: &[S]) -> Self {
        Templates {
            attributes: attributes
                .iter()
                .map(|a| attribute_templates(a.as_ref()))
                .collect(),
            unknown: owned(&UNKNOWN),
            guess: owned(&GUESS),
        }
    }

    fn attribute(&self, j: usize) -> Result<&AttributeTemplates> {
        self.attributes
            .get(j)
            .filter(|t| !t.ask.is_empty() && !t.answer.is_empty())
            .ok_or_else(|| Md3Error::InvalidConfig(format!("no templates for attribute {j}")))
    }

    fn pick<'a, R: Rng>(options: &'a [String], rng: &mut R) -> Result<&'a str> {
        options
            .choose(rng)
            .map(String::as_str)
            .ok_or_else(|| Md3Error::InvalidConfig("empty template list".into()))
    }

    pub fn ask<R: Rng>(&self, j: usize, rng: &mut R) -> Result<Vec<String>> {
        Ok(tokenize(Self::pick(&self.attribute(j)?.ask, rng)?))
    }

    pub fn guess<R: Rng>(&self, title: &str, rng: &mut R) -> Result<Vec<String>> {
        Ok(tokenize(
            &Self::pick(&self.guess, rng)?.replace("{t}", title),
        ))
    }

    pub fn answer<R: Rng>(&self, j: usize, answer: &Answer, rng: &mut R) -> Result<Vec<String>> {
        match answer {
            Answer::Unknown => Ok(tokenize(Self::pick(&self.unknown, rng)?)),
            Answer::Values(v) => {
                let t = Self::pick(&self.attribute(j)?.answer, rng)?;
                Ok(tokenize(&t.replace("{v}", &join_values(v))))
            }
        }
    }

    /// Every token the templates can emit outside of slot values.
    pub fn tokens(&self) -> Vec<String> {
        let all = self
            .attributes
            .iter()
            .flat_map(|a| a.ask.iter().chain(&a.answer))
            .chain(&self.unknown)
            .chain(&self.guess);
        let mut out: Vec<String> = all
            .flat_map(|t| tokenize(&t.replace("{v}", " ").replace("{t}", " ")))
            .collect();
        out.extend(["and".to_string(), ",".to_string()]);
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MOVIE_ATTRIBUTES;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn at_least_three_per_act() {
        let t = Templates::for_attributes(&MOVIE_ATTRIBUTES);
        for a in &t.attributes {
            assert!(a.ask.len() >= 3 && a.answer.len() >= 3);
        }
        assert!(t.unknown.len() >= 3 && t.guess.len() >= 3);
        let g = Templates::for_attributes(&["budget_band"]);
        assert!(g.attributes[0].ask[0].contains("budget band"));
    }

    #[test]
    fn release_year_question_is_a_year_template() {
        let t = Templates::for_attributes(&MOVIE_ATTRIBUTES);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = t.ask(1, &mut rng).unwrap().join(" ");
        assert!(t.attributes[1].ask.contains(&q), "{q}");
        assert!(t.attributes[1]
            .ask
            .contains(&"when is it released ?".to_string()));
    }

    #[test]
    fn answers_fill_all_values() {
        let t = Templates::for_attributes(&MOVIE_ATTRIBUTES);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Answer::Values(vec!["milcho manchevski".into()]);
        for _ in 0..10 {
            let s = t.answer(0, &a, &mut rng).unwrap().join(" ");
            assert!(s.contains("milcho manchevski"));
        }
        let two = Answer::Values(vec!["ann lee".into(), "bo chan".into()]);
        let s = t.answer(3, &two, &mut rng).unwrap().join(" ");
        assert!(s.contains("ann lee") && s.contains("bo chan"), "{s}");
        let u = t.answer(3, &Answer::Unknown, &mut rng).unwrap().join(" ");
        assert!(t.unknown.contains(&u));
    }

    #[test]
    fn guess_contains_title_and_is_seeded() {
        let t = Templates::for_attributes(&MOVIE_ATTRIBUTES);
        let a = t
            .guess("before the rain", &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = t
            .guess("before the rain", &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
        assert!(a.join(" ").contains("before the rain"));
    }

    #[test]
    fn missing_template_is_config_error() {
        let t = Templates::for_attributes(&["a"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            t.ask(4, &mut rng),
            Err(Md3Error::InvalidConfig(_))
        ));
    }
}
