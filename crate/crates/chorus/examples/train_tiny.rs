//! Train the full model — attention seq2seq, topic clustering, saliency
//! gates — on a small synthetic corpus and watch the loss fall.
//!
//! Run with: cargo run --release --example train_tiny

use chorus::corpus::{encode_article, generate_synthetic, Dataset, SyntheticSpec};
use chorus::model::Model;
use chorus::{train, Config};

fn main() -> chorus::Result<()> {
    let spec = SyntheticSpec::disjoint(3, 12, 24, 3, 7);
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
        epochs: 6,
        dev_fraction: 0.0,
        dropout: 0.0,
        n_diverse: 3,
        beam_size: 3,
        seed: 1,
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
    println!("vocabulary: {} entries", vocab.size());

    let dataset = Dataset {
        articles: raw.iter().map(|a| encode_article(a, &vocab, &cfg)).collect(),
    };
    let mut model = Model::new(cfg, vocab);
    println!("parameters: {}", model.store.n_scalars());

    let report = train::train(&mut model, &dataset, None)?;
    for (e, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}  train loss {loss:.4}", e + 1);
    }
    println!(
        "{} steps over {} epochs{}",
        report.steps_run,
        report.epochs_run,
        if report.stopped_early { " (stopped early)" } else { "" }
    );

    let first = report.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("loss {first:.4} -> {last:.4}");
    Ok(())
}
