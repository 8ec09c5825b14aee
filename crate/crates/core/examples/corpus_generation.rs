//! Generates a synthetic movie corpus and prints per-attribute statistics
//! and one rendered document.
//!
//!     cargo run --example corpus_generation -- 2000 7

use md3::corpus::{corpus_stats, AttributeSchema, Corpus};

fn main() -> md3::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let corpus = Corpus::generate(AttributeSchema::movie(), n, seed)?;
    let stats = corpus_stats(&corpus.schema, &corpus.records, &corpus.documents)?;

    println!(
        "{n} movies, seed {seed}, corpus hash {}",
        &corpus.hash()[..12]
    );
    println!(
        "{:<16} {:>6} {:>8} {:>6}",
        "attribute", "num", "distinct", "ave"
    );
    for (name, a) in corpus.schema.attributes.iter().zip(&stats.attributes) {
        println!("{name:<16} {:>6} {:>8} {:>6.2}", a.num, a.ent, a.ave);
    }

    let record = &corpus.records[0];
    println!("\n{} ({})", record.title, record.object_id);
    for (name, values) in corpus.schema.attributes.iter().zip(&record.values) {
        println!(
            "  {name}: {}",
            if values.is_empty() {
                "-".into()
            } else {
                values.join(", ")
            }
        );
    }
    for sentence in &corpus.documents[0].sentences {
        println!("  | {}", sentence.join(" "));
    }
    Ok(())
}
