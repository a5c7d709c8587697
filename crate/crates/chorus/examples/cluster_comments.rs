//! Train the variational clustering module on its own and recover planted
//! topics from comment bag-of-words vectors.
//!
//! No sequence model is involved here: each comment becomes a count vector,
//! the amortized posterior maps it to a latent Gaussian, a classifier soft-
//! assigns it to one of K learned cluster means, and the evidence lower
//! bound is the only training signal. With disjoint topic vocabularies the
//! clusters snap onto the gold topics, which purity makes visible.
//!
//! Run with: cargo run --release --example cluster_comments

use chorus::corpus::{comment_bow, generate_synthetic, SyntheticSpec};
use chorus::graph::Graph;
use chorus::metrics::purity;
use chorus::model::Model;
use chorus::topic::{bow_dense, classify_topic, elbo, encode_comment, reparameterize};
use chorus::train::Adam;
use chorus::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> chorus::Result<()> {
    let k = 4;
    let spec = SyntheticSpec::disjoint(k, 15, 60, 4, 13);
    let raw = generate_synthetic(&spec)?;

    let cfg = Config {
        vocab_cap: 200,
        latent_dim: 8,
        n_topics: k,
        vgc_hidden: 24,
        classifier_hidden: 16,
        learning_rate: 5e-3,
        // The rest of the model exists but is never touched here.
        embed_dim: 4,
        enc_hidden: 3,
        enc_layers: 1,
        dec_hidden: 6,
        dec_layers: 1,
        gate_hidden: 4,
        selector_hidden: 4,
        n_diverse: 2,
        beam_size: 2,
        seed: 3,
        ..Config::default()
    };
    let docs: Vec<&str> = raw
        .iter()
        .flat_map(|a| a.comments.iter().map(|c| c.as_str()))
        .collect();
    let vocab = chorus::corpus::build_vocab(docs, cfg.vocab_cap)?;
    let v = vocab.size();

    let mut gold = Vec::new();
    let mut bows = Vec::new();
    for a in &raw {
        for c in &a.comments {
            bows.push(bow_dense(&comment_bow(&vocab.encode(c)), v));
            gold.push(a.topic.unwrap());
        }
    }
    println!("{} comments, {k} planted topics, vocab {v}", bows.len());

    let model = Model::new(cfg.clone(), vocab);
    let mut store = model.store;
    let topic_params = model.topic.expect("clustering enabled");
    let mut opt = Adam::new(&store, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for epoch in 1..=15 {
        let mut loss_sum = 0.0;
        for bow in &bows {
            let mut g = Graph::new();
            let col = g.col(bow);
            let eps: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
            let out = elbo(&mut g, &store, &topic_params, col, Some(&eps));
            let loss = g.scale(out.elbo, -1.0);
            loss_sum += g.scalar_value(loss);
            let mut grads = chorus::graph::GradStore::zeros_like(&store);
            g.backward(loss, 1.0, &mut grads);
            grads.clamp(cfg.grad_clamp);
            opt.update(&mut store, &grads);
        }
        // Evaluation assignments use the posterior mean, no sampling.
        let assigned: Vec<usize> = bows
            .iter()
            .map(|bow| {
                let mut g = Graph::new();
                let col = g.col(bow);
                let post = encode_comment(&mut g, &store, &topic_params, col);
                let z = reparameterize(&mut g, &post, None);
                let topics = classify_topic(&mut g, &store, &topic_params, z);
                let q = g.value(topics.q);
                (0..k)
                    .max_by(|&a, &b| q[[a, 0]].partial_cmp(&q[[b, 0]]).unwrap())
                    .unwrap()
            })
            .collect();
        println!(
            "epoch {epoch:>2}  -elbo/comment {:>8.3}  purity {:.3}",
            loss_sum / bows.len() as f64,
            purity(&assigned, &gold)
        );
    }
    Ok(())
}
