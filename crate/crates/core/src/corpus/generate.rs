use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::{Document, KBRecord};
use super::schema::AttributeSchema;
use crate::error::{Md3Error, Result};
use crate::text::tokenize;

/// Probability that a present attribute is surfaced in the document text.
pub const MENTION_RATE: f64 = 0.95;
/// Share of mentioned attributes realized with a paraphrase template.
pub const PARAPHRASE_RATE: f64 = 0.1;
/// Skew of the value popularity distribution.
const ZIPF_EXPONENT: f64 = 0.7;

const TITLE_ADJECTIVES: [&str; 48] = [
    "silent",
    "broken",
    "golden",
    "hidden",
    "last",
    "lonely",
    "distant",
    "burning",
    "frozen",
    "secret",
    "wild",
    "crimson",
    "endless",
    "fallen",
    "bright",
    "hollow",
    "quiet",
    "restless",
    "savage",
    "shining",
    "strange",
    "tender",
    "velvet",
    "wicked",
    "ancient",
    "bitter",
    "blue",
    "dark",
    "electric",
    "empty",
    "gentle",
    "iron",
    "lost",
    "midnight",
    "northern",
    "pale",
    "red",
    "rising",
    "scarlet",
    "shadowed",
    "small",
    "stolen",
    "summer",
    "twisted",
    "winter",
    "wandering",
    "white",
    "young",
];
const TITLE_NOUNS: [&str; 64] = [
    "harbor", "river", "kingdom", "garden", "mirror", "train", "city", "road", "island", "letter",
    "promise", "storm", "valley", "tower", "bridge", "forest", "house", "machine", "ocean",
    "desert", "mountain", "night", "morning", "season", "voyage", "witness", "stranger", "empire",
    "circle", "horizon", "lantern", "orchard", "planet", "rain", "shore", "signal", "sky", "song",
    "station", "street", "sun", "tide", "town", "village", "wind", "window", "wolf", "dream",
    "echo", "fortune", "ghost", "heart", "hunter", "journey", "legacy", "memory", "passage",
    "prophet", "rebel", "sailor", "soldier", "spirit", "thief", "dust",
];
const TITLE_SUFFIXES: [&str; 5] = ["", " ii", " iii", " returns", " reborn"];

const INTRO_TEMPLATES: [&str; 3] = [
    "{title} is a film .",
    "{title} is a motion picture .",
    "the movie {title} tells a story .",
];

const FILLER: [&str; 10] = [
    "the film received mixed reviews from critics .",
    "it was a modest success at the box office .",
    "the story follows a family across several years .",
    "the production faced several delays .",
    "it premiered at a festival before its wide release .",
    "critics praised the photography and the score .",
    "the plot centers on an unlikely friendship .",
    "a sequel was discussed but never made .",
    "the film was later restored and rereleased .",
    "it has since gained a loyal following .",
];

/// Sentence templates for one attribute: `standard` are used most of the
/// time, `paraphrase` for [`PARAPHRASE_RATE`] of mentions.
pub struct DocTemplates {
    pub standard: Vec<&'static str>,
    pub paraphrase: Vec<&'static str>,
}

pub fn doc_templates(attribute: &str) -> DocTemplates {
    let (standard, paraphrase): (Vec<&str>, Vec<&str>) = match attribute {
        "directed_by" => (
            vec![
                "it was directed by {v} .",
                "{v} directed the film .",
                "the director of the movie is {v} .",
            ],
            vec![
                "{v} was behind the camera for this picture .",
                "the picture was helmed by {v} .",
            ],
        ),
        "release_year" => (
            vec![
                "it was released in {v} .",
                "the film came out in {v} .",
                "the movie was first shown in {v} .",
            ],
            vec![
                "audiences first saw it in {v} .",
                "{v} marked its theatrical debut .",
            ],
        ),
        "written_by" => (
            vec![
                "the screenplay was written by {v} .",
                "{v} wrote the script .",
                "the film was written by {v} .",
            ],
            vec![
                "the writing credit goes to {v} .",
                "the story was penned by {v} .",
            ],
        ),
        "starred_actors" => (
            vec![
                "it stars {v} .",
                "the cast includes {v} .",
                "{v} play the leading roles .",
            ],
            vec!["{v} appear on screen .", "the main parts went to {v} ."],
        ),
        "has_genre" => (
            vec![
                "it is a {v} film .",
                "the movie belongs to the {v} genre .",
                "critics describe it as {v} .",
            ],
            vec![
                "fans of {v} will enjoy it .",
                "it sits firmly in {v} territory .",
            ],
        ),
        "in_language" => (
            vec![
                "the film is in {v} .",
                "it was made in the {v} language .",
                "the dialogue is spoken in {v} .",
            ],
            vec![
                "viewers hear {v} throughout .",
                "the characters converse in {v} .",
            ],
        ),
        _ => (
            vec![
                "its {a} is {v} .",
                "the {a} of the film is {v} .",
                "the film has {v} as {a} .",
            ],
            vec!["one could say its {a} is {v} ."],
        ),
    };
    DocTemplates {
        standard,
        paraphrase,
    }
}

/// "a", "a and b", "a , b and c".
pub fn join_values(values: &[String]) -> String {
    match values {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(" , "), last),
    }
}

pub fn attribute_words(attribute: &str) -> String {
    attribute.replace('_', " ")
}

fn fill(template: &str, attribute: &str, values: &str) -> String {
    template
        .replace("{a}", &attribute_words(attribute))
        .replace("{v}", values)
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|r| 1.0 / ((r + 1) as f64).powf(ZIPF_EXPONENT))
        .collect()
}

fn sample_weighted<R: Rng>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let x = rng.gen_range(0.0..total);
    cumulative
        .partition_point(|&c| c <= x)
        .min(cumulative.len() - 1)
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p = rng.gen::<f64>();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k
}

fn make_titles<R: Rng>(n: usize, rng: &mut R) -> Vec<String> {
    let mut base: Vec<String> = Vec::new();
    for s in TITLE_SUFFIXES {
        for a in TITLE_ADJECTIVES {
            for nn in TITLE_NOUNS {
                base.push(format!("the {a} {nn}{s}"));
            }
        }
    }
    base.shuffle(rng);
    let mut out: Vec<String> = base.into_iter().take(n).collect();
    let mut k = 2;
    while out.len() < n {
        let i = out.len();
        out.push(format!("{} part {k}", out[i % 1000]));
        k += 1;
    }
    out
}

/// Generates `n_objects` records and their documents. A pure function of
/// `(schema, n_objects, seed)`.
pub fn generate_corpus(
    schema: &AttributeSchema,
    n_objects: usize,
    seed: u64,
) -> Result<(Vec<KBRecord>, Vec<Document>)> {
    if n_objects < 2 {
        return Err(Md3Error::InvalidConfig(format!(
            "need at least 2 objects, got {n_objects}"
        )));
    }
    schema.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n_objects.to_string().len().max(5);
    let titles = make_titles(n_objects, &mut rng);
    let mut records: Vec<KBRecord> = (0..n_objects)
        .map(|i| KBRecord {
            object_id: format!("m{:0width$}", i, width = width),
            title: titles[i].clone(),
            values: vec![Vec::new(); schema.len()],
        })
        .collect();

    for j in 0..schema.len() {
        assign_attribute(schema, j, &mut records, &mut rng);
    }

    let documents = records
        .iter()
        .map(|r| render_document(schema, r, &mut rng))
        .collect();
    Ok((records, documents))
}

fn assign_attribute<R: Rng>(
    schema: &AttributeSchema,
    j: usize,
    records: &mut [KBRecord],
    rng: &mut R,
) {
    let n = records.len();
    let target = &schema.targets[j];
    let vocab = &schema.value_vocab[j];
    let present = ((target.coverage * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let holders = &order[..present];

    let pool_size = schema.target_distinct(j, n);
    let mut pool: Vec<&String> = vocab.iter().collect();
    pool.shuffle(rng);
    pool.truncate(pool_size);
    let mut cumulative = zipf_weights(pool.len());
    for i in 1..cumulative.len() {
        cumulative[i] += cumulative[i - 1];
    }

    let counts: Vec<usize> = holders
        .iter()
        .map(|_| (1 + poisson(target.mean_values - 1.0, rng)).min(pool.len()))
        .collect();

    // Every pool value is placed once on a random slot, the remaining slots
    // follow the popularity skew.
    let mut slots: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(h, &c)| (0..c).map(move |k| (h, k)))
        .collect();
    slots.shuffle(rng);
    let mut sets: Vec<HashSet<usize>> = vec![HashSet::new(); holders.len()];
    let mut next_forced = 0;
    for (h, _) in slots {
        let mut chosen = None;
        if next_forced < pool.len() && !sets[h].contains(&next_forced) {
            chosen = Some(next_forced);
            next_forced += 1;
        }
        let v = match chosen {
            Some(v) => v,
            None => {
                let mut v = sample_weighted(&cumulative, rng);
                let mut tries = 0;
                while sets[h].contains(&v) && tries < 32 {
                    v = sample_weighted(&cumulative, rng);
                    tries += 1;
                }
                while sets[h].contains(&v) {
                    v = (v + 1) % pool.len();
                }
                v
            }
        };
        sets[h].insert(v);
    }
    for (&r, set) in holders.iter().zip(sets) {
        let mut vals: Vec<String> = set.into_iter().map(|v| pool[v].clone()).collect();
        vals.sort();
        records[r].values[j] = vals;
    }
}

fn render_document<R: Rng>(schema: &AttributeSchema, record: &KBRecord, rng: &mut R) -> Document {
    let mut sentences: Vec<String> = Vec::new();
    let intro = INTRO_TEMPLATES[rng.gen_range(0..INTRO_TEMPLATES.len())];
    sentences.push(intro.replace("{title}", &record.title));
    let mut mentioned = vec![false; schema.len()];
    for (j, vals) in record.values.iter().enumerate() {
        if vals.is_empty() || !rng.gen_bool(MENTION_RATE) {
            continue;
        }
        let templates = doc_templates(schema.name(j));
        let pick = if rng.gen_bool(PARAPHRASE_RATE) {
            templates.paraphrase[rng.gen_range(0..templates.paraphrase.len())]
        } else {
            templates.standard[rng.gen_range(0..templates.standard.len())]
        };
        sentences.push(fill(pick, schema.name(j), &join_values(vals)));
        mentioned[j] = true;
    }
    let n_filler = rng.gen_range(1..=2);
    for f in FILLER.choose_multiple(rng, n_filler) {
        sentences.push((*f).to_string());
    }
    sentences.shuffle(rng);
    Document {
        object_id: record.object_id.clone(),
        sentences: sentences.iter().map(|s| tokenize(s)).collect(),
        mentioned,
    }
}
