//! Check the autodiff backward pass against finite differences on a
//! micro model, parameter by parameter.
//!
//! The whole training loss — cross entropy, clustering bound, gate
//! penalty, topic alignment — runs on a small reverse-mode tape, so one
//! numeric sweep validates every layer at once. Noise (latent sample,
//! Gumbel pair) is frozen so both sides differentiate the same function.
//!
//! Run with: cargo run --release --example verify_gradients

use chorus::corpus::{encode_article, generate_synthetic, SyntheticSpec};
use chorus::fusion::{instance_loss, InstanceNoise};
use chorus::graph::{GradStore, Graph};
use chorus::model::Model;
use chorus::saliency::GateDiagnostics;
use chorus::Config;

fn loss_at(model: &Model, title: &[usize], body: &[usize], comment: &[usize]) -> f64 {
    let mut g = Graph::new();
    let mut diag = GateDiagnostics::default();
    let noise = InstanceNoise {
        vgc_eps: Some(vec![0.3, -0.2, 0.15]),
        gumbel: Some(body.iter().map(|_| (0.1, -0.2)).collect()),
        dropout: None,
    };
    let fwd = instance_loss(&mut g, model, title, body, comment, 0.8, noise, &mut diag);
    g.scalar_value(fwd.losses.total)
}

fn main() -> chorus::Result<()> {
    let spec = SyntheticSpec::disjoint(2, 6, 4, 2, 9);
    let raw = generate_synthetic(&spec)?;
    let cfg = Config {
        vocab_cap: 50,
        max_title_len: 4,
        max_body_len: 6,
        max_comment_len: 5,
        embed_dim: 4,
        enc_hidden: 3,
        enc_layers: 1,
        dec_hidden: 6,
        dec_layers: 1,
        latent_dim: 3,
        n_topics: 2,
        vgc_hidden: 4,
        classifier_hidden: 4,
        gate_hidden: 4,
        selector_hidden: 4,
        dropout: 0.0,
        n_diverse: 2,
        beam_size: 2,
        // Let gradients flow through the clustering posterior too, so the
        // analytic and numeric sides differentiate the same function.
        ltop_detach_q: false,
        seed: 6,
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
    let art = encode_article(&raw[0], &vocab, &cfg);
    let mut model = Model::new(cfg, vocab);

    // Analytic gradient.
    let mut g = Graph::new();
    let mut diag = GateDiagnostics::default();
    let noise = InstanceNoise {
        vgc_eps: Some(vec![0.3, -0.2, 0.15]),
        gumbel: Some(art.body.iter().map(|_| (0.1, -0.2)).collect()),
        dropout: None,
    };
    let fwd = instance_loss(
        &mut g, &model, &art.title, &art.body, &art.comments[0], 0.8, noise, &mut diag,
    );
    let mut grads = GradStore::zeros_like(&model.store);
    g.backward(fwd.losses.total, 1.0, &mut grads);
    let analytic = grads.flatten();

    // Central finite differences over every scalar parameter.
    let base = model.store.flatten();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_idx = 0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        model.store.assign_flat(&plus);
        let up = loss_at(&model, &art.title, &art.body, &art.comments[0]);
        let mut minus = base.clone();
        minus[i] -= h;
        model.store.assign_flat(&minus);
        let down = loss_at(&model, &art.title, &art.body, &art.comments[0]);
        let numeric = (up - down) / (2.0 * h);
        // The 1e-6 floor keeps finite-difference cancellation noise from
        // dominating the ratio on near-zero gradients.
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst {
            worst = rel;
            worst_idx = i;
        }
    }
    model.store.assign_flat(&base);

    println!("checked {} parameters", base.len());
    println!("worst relative error {worst:.2e} at flat index {worst_idx}");
    assert!(worst < 1e-3, "gradient mismatch");
    println!("analytic gradients agree with finite differences");
    Ok(())
}
