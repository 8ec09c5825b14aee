//! Picks questions greedily by attribute entropy and narrows a small
//! candidate set with truthful answers.

use md3::corpus::{entropy_of, filter_consistent, fixtures::four_movies, Answer, KBRecord};

fn main() -> md3::Result<()> {
    let corpus = four_movies();
    let target = &corpus.records[0];
    let mut alive: Vec<KBRecord> = corpus.records.clone();
    println!("target: {}", target.title);

    let mut asked = Vec::new();
    while alive.len() > 1 && asked.len() < corpus.schema.len() {
        let scores: Vec<f64> = (0..corpus.schema.len())
            .map(|j| entropy_of(&alive, j))
            .collect();
        for (j, h) in scores.iter().enumerate() {
            println!("  H({}) = {h:.3}", corpus.schema.name(j));
        }
        let j = (0..scores.len())
            .filter(|j| !asked.contains(j))
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
            .expect("an attribute left to ask");
        asked.push(j);
        let name = corpus.schema.name(j);
        let answer = Answer::from_record(target, j);
        alive = filter_consistent(&corpus.schema, &alive, name, &answer)?
            .into_iter()
            .cloned()
            .collect();
        let titles: Vec<&str> = alive.iter().map(|r| r.title.as_str()).collect();
        println!("ask {name} -> {answer:?}; left: {titles:?}");
    }
    Ok(())
}
