//! After training, see what each topic means: cluster sizes, the words
//! that dominate each cluster, and purity against the planted labels.
//!
//! Run with: cargo run --release --example inspect_topics

use chorus::corpus::{encode_article, generate_synthetic, Dataset, SyntheticSpec};
use chorus::metrics::{assign_topics, purity, topic_top_words};
use chorus::model::Model;
use chorus::{train, Config};
use std::collections::HashSet;

fn main() -> chorus::Result<()> {
    let spec = SyntheticSpec::disjoint(3, 10, 30, 3, 41);
    let raw = generate_synthetic(&spec)?;
    let cfg = Config {
        vocab_cap: 200,
        max_title_len: 8,
        max_body_len: 40,
        max_comment_len: 10,
        embed_dim: 10,
        enc_hidden: 6,
        enc_layers: 1,
        dec_hidden: 12,
        dec_layers: 1,
        latent_dim: 6,
        n_topics: 3,
        vgc_hidden: 16,
        classifier_hidden: 12,
        gate_hidden: 6,
        selector_hidden: 6,
        learning_rate: 3e-3,
        batch_size: 8,
        epochs: 8,
        dev_fraction: 0.0,
        dropout: 0.0,
        n_diverse: 3,
        beam_size: 2,
        seed: 4,
        ..Config::default()
    };
    let docs: Vec<&str> = raw
        .iter()
        .flat_map(|a| {
            std::iter::once(a.title.as_str())
                .chain(std::iter::once(a.body.as_str()))
                .chain(a.comments.iter().map(|c| c.as_str()))
        })
        .collect();
    let vocab = chorus::corpus::build_vocab(docs, cfg.vocab_cap)?;
    let dataset = Dataset {
        articles: raw.iter().map(|a| encode_article(a, &vocab, &cfg)).collect(),
    };
    let mut model = Model::new(cfg, vocab);
    train::train(&mut model, &dataset, None)?;

    let assignments = assign_topics(&model, &dataset).expect("clustering enabled");
    let gold: Vec<usize> = raw
        .iter()
        .flat_map(|a| std::iter::repeat(a.topic.unwrap()).take(a.comments.len()))
        .collect();
    println!("purity vs planted topics: {:.3}\n", purity(&assignments, &gold));

    let stop = HashSet::new();
    for t in 0..model.cfg.n_topics {
        let size = assignments.iter().filter(|&&a| a == t).count();
        let words = topic_top_words(&model, &dataset, t, 6, &stop);
        println!("topic {t}: {size:>3} comments  top words: {}", words.join(" "));
    }
    Ok(())
}
