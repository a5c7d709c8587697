//! Scratch probe for diversity-trend tuning. Not part of the crate's
//! example set; deleted before release.
//!
//! Usage: probe_c6 <epochs> <lr> <comments_per_article> [seed] [batch] [lambda1]

use chorus::config::Config;
use chorus::corpus::{build_vocab, encode_article, generate_synthetic, Dataset, SyntheticSpec};
use chorus::infer;
use chorus::metrics::{m_distinct_n, purity, tokenize};
use chorus::model::Model;
use chorus::train;

fn toks(s: &str) -> Vec<String> {
    tokenize(s, true)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3e-3);
    let cpa: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2);
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(31);
    let batch: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(25);
    let lambda1: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let mut spec = SyntheticSpec::disjoint(5, 20, 500, cpa, 31);
    spec.seed = 31;
    let base = Config {
        vocab_cap: 500,
        max_title_len: 8,
        max_body_len: 40,
        max_comment_len: 10,
        embed_dim: 16,
        enc_hidden: 10,
        enc_layers: 1,
        dec_hidden: 20,
        dec_layers: 1,
        latent_dim: 8,
        n_topics: 5,
        vgc_hidden: 32,
        classifier_hidden: 16,
        gate_hidden: 12,
        selector_hidden: 16,
        learning_rate: lr,
        lambda1,
        batch_size: batch,
        epochs,
        patience: 1000,
        dev_fraction: 0.0,
        dropout: 0.0,
        n_diverse: 5,
        beam_size: 5,
        seed,
        ..Config::default()
    };

    let raw = generate_synthetic(&spec).unwrap();
    let docs: Vec<&str> = raw
        .iter()
        .flat_map(|a| {
            std::iter::once(a.title.as_str())
                .chain(std::iter::once(a.body.as_str()))
                .chain(a.comments.iter().map(|c| c.as_str()))
        })
        .collect();
    let vocab = build_vocab(docs, base.vocab_cap).unwrap();

    for use_topic in [true, false] {
        let cfg = Config { use_topic, ..base.clone() };
        let mut model = Model::new(cfg.clone(), vocab.clone());
        let articles: Vec<_> = raw
            .iter()
            .map(|r| encode_article(r, &model.vocab, &model.cfg))
            .collect();
        let dataset = Dataset { articles };
        let rep = train::train(&mut model, &dataset, None).unwrap();
        println!(
            "use_topic={use_topic} epochs={epochs} lr={lr} cpa={cpa} batch={batch} l1={lambda1} \
             loss {:.3} -> {:.3}",
            rep.epoch_losses[0],
            rep.epoch_losses.last().unwrap()
        );

        if use_topic {
            // How well has the clustering converged on the training comments?
            let mut assign = Vec::new();
            let mut gold = Vec::new();
            for (art, r) in dataset.articles.iter().zip(&raw) {
                for c in &art.comments {
                    assign.push(infer::comment_topic(&model, c).unwrap());
                    gold.push(r.topic.unwrap());
                }
            }
            println!("  vgc purity {:.3}", purity(&assign, &gold));
        }

        let groups: Vec<Vec<Vec<String>>> = dataset
            .articles
            .iter()
            .map(|art| {
                infer::generate_diverse(&model, &art.title, &art.body, 5)
                    .into_iter()
                    .map(|g| toks(&g.text))
                    .collect()
            })
            .collect();
        let md = m_distinct_n(&groups, 4);
        // How many articles produced 5 pairwise-distinct comments?
        let all_distinct = groups
            .iter()
            .filter(|g| {
                let mut seen = std::collections::HashSet::new();
                g.iter().all(|c| seen.insert(c.join(" ")))
            })
            .count();
        println!("  m_distinct_4 {md:.4}  groups all-distinct {all_distinct}/500");
        for (i, g) in groups.iter().take(2).enumerate() {
            println!("  article {i} (gold topic {:?}):", raw[i].topic);
            for c in g {
                println!("    | {}", c.join(" "));
            }
        }
    }
}
