//! Pretrains a small encoder, renders scripted dialogues into labelled
//! turns and fits the turn-level understanding model on them.
//!
//!     cargo run --release --example train_nlu

use md3::corpus::{generate_dialogues, AttributeSchema, Corpus, Split};
use md3::encoder::{pretrain, DocReps, PretrainConfig};
use md3::engine::Templates;
use md3::nlu::{build_examples, train_nlu, NluConfig};
use md3::nn::argmax;
use md3::text::Vocab;

fn main() -> md3::Result<()> {
    let corpus = Corpus::generate(AttributeSchema::movie(), 400, 3)?;
    let templates = Templates::for_attributes(&corpus.schema.attributes);
    let tokens = templates.tokens();
    let vocab = Vocab::build(
        corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().flatten())
            .chain(tokens.iter())
            .map(String::as_str),
    );
    let members = corpus.split_indices(Split::Pretrain);
    let config = PretrainConfig {
        hidden: 16,
        embed_dim: 16,
        sentence_rnn: false,
        epochs: 10,
        lr: 6e-3,
        ..PretrainConfig::default()
    };
    let (encoder, _) = pretrain(&corpus, &members, vocab, &config, 3)?;
    let reps = DocReps::build(&encoder, &corpus)?;

    let train = corpus.subset(&members);
    let dialogues =
        generate_dialogues(&train.schema, &train.records, &train.documents, 16, 600, 3)?;
    let examples = build_examples(&dialogues, &corpus, &reps, &templates, 0.1, 3)?;
    println!(
        "{} dialogues, {} labelled turns",
        dialogues.len(),
        examples.len()
    );

    let nlu_config = NluConfig {
        epochs: 5,
        lr: 3e-3,
        ..NluConfig::default()
    };
    let (nlu, report) = train_nlu(&examples, &encoder, &reps, &nlu_config, 3)?;
    for (split, e) in [("train", &report.train), ("held-out", &report.held_out)] {
        println!(
            "{split:<9} attribute acc {:.3}  unknown acc {:.3}  matching MRR {:.3}",
            e.attribute_accuracy, e.unknown_accuracy, e.matching_mrr
        );
    }

    let ex = &examples[0];
    let candidates: Vec<&[f64]> = ex
        .candidates
        .iter()
        .map(|&i| reps.q[i].as_slice())
        .collect();
    let b = nlu.infer(&ex.turn, &encoder, &candidates)?;
    println!(
        "\nagent: {}\nuser:  {}\nattribute {} (true {}), unknown {:.2}, target rank {}",
        ex.turn.question.join(" "),
        ex.turn.response.join(" "),
        corpus.schema.name(argmax(&b.pi_tilde)),
        corpus.schema.name(ex.attribute),
        b.alpha,
        1 + b.p_hat.iter().filter(|&&p| p > b.p_hat[ex.target]).count()
    );
    Ok(())
}
