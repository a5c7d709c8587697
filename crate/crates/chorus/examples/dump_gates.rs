//! Inspect the saliency gates: which body tokens the model keeps when it
//! attends, and the soft scores behind those decisions.
//!
//! Each body token is scored against the title summary; at inference a
//! token is kept when its score clears 0.5. During training the same
//! scores drive a two-class Gumbel-Softmax, so the model learns with the
//! discreteness it will face later.
//!
//! Run with: cargo run --release --example dump_gates

use chorus::corpus::{encode_article, generate_synthetic, Dataset, SyntheticSpec};
use chorus::model::Model;
use chorus::{infer, train, Config};

fn main() -> chorus::Result<()> {
    let spec = SyntheticSpec::disjoint(2, 10, 16, 2, 33);
    let raw = generate_synthetic(&spec)?;
    let cfg = Config {
        vocab_cap: 100,
        max_title_len: 6,
        max_body_len: 24,
        max_comment_len: 8,
        embed_dim: 10,
        enc_hidden: 6,
        enc_layers: 1,
        dec_hidden: 12,
        dec_layers: 1,
        latent_dim: 5,
        n_topics: 2,
        vgc_hidden: 10,
        classifier_hidden: 8,
        gate_hidden: 8,
        selector_hidden: 6,
        learning_rate: 2e-3,
        // No sparsity pressure here: let the data alone decide the gates,
        // so the dump shows a mix of kept and dropped tokens.
        lambda2: 0.0,
        batch_size: 8,
        epochs: 4,
        dev_fraction: 0.0,
        dropout: 0.0,
        n_diverse: 2,
        beam_size: 2,
        seed: 5,
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

    for (i, art) in dataset.articles.iter().take(2).enumerate() {
        let trace = infer::gate_trace(&model, &art.title, &art.body).expect("gates enabled");
        println!("article {i}: kept {}/{} body tokens", trace.kept(), trace.hard.len());
        for (t, (&id, (&beta, &hard))) in art
            .body
            .iter()
            .zip(trace.beta.iter().zip(&trace.hard))
            .enumerate()
        {
            let mark = if hard > 0.0 { "KEEP" } else { "    " };
            println!("  {t:>2}  {:<8} beta {beta:.3}  {mark}", model.vocab.token(id));
        }
        println!();
    }
    Ok(())
}
