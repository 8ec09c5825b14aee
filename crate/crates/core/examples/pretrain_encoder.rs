//! Pretrains the two-tower encoder on a small synthetic corpus and compares
//! held-out retrieval accuracy with and without per-attribute attention.
//!
//!     cargo run --release --example pretrain_encoder -- 400

use md3::corpus::{AttributeSchema, Corpus, Split};
use md3::encoder::{pretrain, retrieval_accuracy, PretrainConfig};
use md3::text::Vocab;

fn main() -> md3::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(400);
    let corpus = Corpus::generate(AttributeSchema::movie(), n, 11)?;
    let train = corpus.split_indices(Split::Pretrain);
    let held_out = corpus.split_indices(Split::Dialogue);
    let vocab = Vocab::build(
        corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().flatten().map(String::as_str)),
    );

    for shared in [false, true] {
        let config = PretrainConfig {
            hidden: 16,
            embed_dim: 16,
            sentence_rnn: false,
            shared_attention: shared,
            epochs: 16,
            lr: 6e-3,
            ..PretrainConfig::default()
        };
        let start = std::time::Instant::now();
        let (params, report) = pretrain(&corpus, &train, vocab.clone(), &config, 5)?;
        let acc = retrieval_accuracy(&params, &corpus, &held_out, 400, config.negatives, 99)?;
        let per_epoch: Vec<f64> = report
            .losses
            .chunks(report.losses.len().div_ceil(config.epochs))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        println!(
            "{:<14} epoch loss {:.3} -> {:.3}  held-out accuracy {acc:.3}  ({:.1}s)",
            if shared { "shared" } else { "per-attribute" },
            per_epoch[0],
            per_epoch[per_epoch.len() - 1],
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
