//! Generate comments two ways: one best comment per article, and a
//! diverse set with one comment per high-probability reader topic.
//!
//! Trains a small model first (a few seconds), then decodes. In diverse
//! mode each comment is conditioned on a different topic mean, which is
//! where the variety comes from — the article input is the same.
//!
//! Run with: cargo run --release --example generate_comments

use chorus::corpus::{encode_article, generate_synthetic, Dataset, SyntheticSpec};
use chorus::model::Model;
use chorus::{infer, train, Config};

fn main() -> chorus::Result<()> {
    let spec = SyntheticSpec::disjoint(3, 12, 30, 3, 21);
    let raw = generate_synthetic(&spec)?;
    let cfg = Config {
        vocab_cap: 200,
        max_title_len: 8,
        max_body_len: 40,
        max_comment_len: 10,
        embed_dim: 12,
        enc_hidden: 8,
        enc_layers: 1,
        dec_hidden: 16,
        dec_layers: 1,
        latent_dim: 6,
        n_topics: 3,
        vgc_hidden: 12,
        classifier_hidden: 8,
        gate_hidden: 8,
        selector_hidden: 8,
        learning_rate: 2e-3,
        batch_size: 8,
        epochs: 8,
        dev_fraction: 0.0,
        dropout: 0.0,
        n_diverse: 3,
        beam_size: 3,
        seed: 2,
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

    for (i, art) in dataset.articles.iter().take(3).enumerate() {
        let gold = raw[i].topic.unwrap();
        println!("article {i} (gold topic {gold})");
        println!("  title: {}", raw[i].title);

        let single = infer::generate_single(&model, &art.title, &art.body);
        println!(
            "  single: [topic {:?}, score {:.3}] {}",
            single.topic, single.score, single.text
        );

        for g in infer::generate_diverse(&model, &art.title, &art.body, model.cfg.n_diverse) {
            println!(
                "  diverse: [topic {:?}, score {:.3}] {}",
                g.topic, g.score, g.text
            );
        }
        println!();
    }
    Ok(())
}
