//! Small hand-built knowledge bases used by tests, examples and the
//! terminal demo.

use super::record::{Document, KBRecord};
use super::schema::{AttributeSchema, CardinalityTarget};
use super::Corpus;
use crate::text::tokenize;

fn vals(v: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = v.iter().map(|s| s.to_string()).collect();
    out.sort();
    out
}

/// The four-movie walkthrough: the target "Before the Rain" (1994, Milcho
/// Manchevski). Release year carries the most entropy at the start; two
/// movies share 1994 and are then separated by language or director.
pub fn four_movies() -> Corpus {
    let schema = AttributeSchema::movie();
    let rows: [(&str, &str, [&[&str]; 6]); 4] = [
        (
            "before-the-rain",
            "before the rain",
            [
                &["milcho manchevski"],
                &["1994"],
                &["milcho manchevski"],
                &[],
                &["drama"],
                &[],
            ],
        ),
        (
            "terminal-velocity",
            "terminal velocity",
            [
                &["deran sarafian"],
                &["1994"],
                &["david twohy"],
                &[],
                &["action"],
                &["english"],
            ],
        ),
        (
            "shadows",
            "shadows",
            [
                &["milcho manchevski"],
                &["2007"],
                &["milcho manchevski"],
                &[],
                &["drama"],
                &["english"],
            ],
        ),
        (
            "dust",
            "dust",
            [
                &["milcho manchevski"],
                &["2001"],
                &["milcho manchevski"],
                &[],
                &["drama"],
                &["english"],
            ],
        ),
    ];
    let records: Vec<KBRecord> = rows
        .iter()
        .map(|(id, title, v)| KBRecord {
            object_id: id.to_string(),
            title: title.to_string(),
            values: v.iter().map(|x| vals(x)).collect(),
        })
        .collect();
    let mut schema = schema;
    // The real names are not in the synthetic person pool.
    for r in &records {
        for (j, vs) in r.values.iter().enumerate() {
            for v in vs {
                if !schema.allows(j, v) {
                    schema.value_vocab[j].push(v.clone());
                }
            }
        }
    }
    let documents = records
        .iter()
        .map(|r| simple_document(&schema, r))
        .collect();
    Corpus::new(schema, records, documents).expect("fixture is consistent")
}

/// One plain sentence per present attribute.
pub fn simple_document(schema: &AttributeSchema, r: &KBRecord) -> Document {
    let mut sentences = vec![tokenize(&format!("{} is a film .", r.title))];
    let mut mentioned = vec![false; schema.len()];
    for (j, v) in r.values.iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let t = super::doc_templates(schema.name(j)).standard[0];
        let s = t
            .replace("{a}", &super::attribute_words(schema.name(j)))
            .replace("{v}", &super::join_values(v));
        sentences.push(tokenize(&s));
        mentioned[j] = true;
    }
    Document {
        object_id: r.object_id.clone(),
        sentences,
        mentioned,
    }
}

/// Three-attribute toy schema over letters, for brute-force oracles.
pub fn toy_schema() -> AttributeSchema {
    let letters = |p: &str| (0..6).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let t = CardinalityTarget {
        coverage: 1.0,
        distinct: 6,
        mean_values: 1.0,
        open_vocabulary: false,
    };
    AttributeSchema::new(
        vec!["alpha".into(), "beta".into(), "gamma".into()],
        vec![letters("a"), letters("b"), letters("c")],
        vec![t.clone(), t.clone(), t],
        6,
    )
    .expect("valid toy schema")
}

/// Six records over [`toy_schema`], including a missing value and a
/// multi-valued attribute.
pub fn toy_records() -> Vec<KBRecord> {
    let table: [[&[&str]; 3]; 6] = [
        [&["a0"], &["b0"], &["c0", "c1"]],
        [&["a0"], &["b1"], &["c1"]],
        [&["a1"], &["b1"], &["c2"]],
        [&["a2"], &[], &["c0"]],
        [&["a1"], &["b2"], &["c3", "c4"]],
        [&["a0"], &["b0"], &[]],
    ];
    table
        .iter()
        .enumerate()
        .map(|(i, row)| KBRecord {
            object_id: format!("t{i}"),
            title: format!("toy {i}"),
            values: row.iter().map(|v| vals(v)).collect(),
        })
        .collect()
}

pub fn toy_corpus() -> Corpus {
    let schema = toy_schema();
    let records = toy_records();
    let documents = records
        .iter()
        .map(|r| simple_document(&schema, r))
        .collect();
    Corpus::new(schema, records, documents).expect("toy fixture is consistent")
}
