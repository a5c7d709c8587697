//! Synthetic corpora with planted topic structure.
//!
//! Each article is assigned a topic (round-robin, so topics are balanced)
//! and its title, body, and comments are all drawn i.i.d. from that topic's
//! word distribution. The gold topic label is stored on the record, which
//! lets clustering tests score purity against ground truth.

use super::dataset::RawArticle;
use crate::error::{Error, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    /// Token strings the distributions index into.
    pub tokens: Vec<String>,
    /// One categorical per topic over `tokens`; each row sums to 1.
    pub topic_word_dists: Vec<Vec<f64>>,
    pub n_articles: usize,
    pub comments_per_article: usize,
    pub title_len: usize,
    pub body_len: usize,
    pub comment_len: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Spec with fully disjoint per-topic vocabularies (`t{i}w{j}` tokens,
    /// uniform within each topic). Comments from different topics then share
    /// zero tokens, the cleanest setting for cluster-recovery tests.
    pub fn disjoint(
        n_topics: usize,
        words_per_topic: usize,
        n_articles: usize,
        comments_per_article: usize,
        seed: u64,
    ) -> Self {
        let mut tokens = Vec::with_capacity(n_topics * words_per_topic);
        for t in 0..n_topics {
            for j in 0..words_per_topic {
                tokens.push(format!("t{t}w{j}"));
            }
        }
        let mut dists = Vec::with_capacity(n_topics);
        for t in 0..n_topics {
            let mut row = vec![0.0; tokens.len()];
            for j in 0..words_per_topic {
                row[t * words_per_topic + j] = 1.0 / words_per_topic as f64;
            }
            dists.push(row);
        }
        Self {
            n_topics,
            tokens,
            topic_word_dists: dists,
            n_articles,
            comments_per_article,
            title_len: 6,
            body_len: 40,
            comment_len: 8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 || self.topic_word_dists.len() != self.n_topics {
            return Err(Error::InvalidInput(
                "topic_word_dists must have one row per topic".into(),
            ));
        }
        for (t, row) in self.topic_word_dists.iter().enumerate() {
            if row.len() != self.tokens.len() {
                return Err(Error::InvalidInput(format!(
                    "topic {t} distribution width {} != vocabulary size {}",
                    row.len(),
                    self.tokens.len()
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "topic {t} distribution sums to {s}, expected 1"
                )));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "topic {t} distribution has a negative entry"
                )));
            }
        }
        if self.title_len == 0 || self.body_len == 0 || self.comment_len == 0 {
            return Err(Error::InvalidInput("sample lengths must be >= 1".into()));
        }
        Ok(())
    }
}

fn sample_text(
    spec: &SyntheticSpec,
    dist: &WeightedIndex<f64>,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> String {
    (0..len)
        .map(|_| spec.tokens[dist.sample(rng)].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates the corpus described by `spec`. Deterministic: the same spec
/// (including seed) always yields byte-identical records.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<RawArticle>> {
    spec.validate()?;
    let dists: Vec<WeightedIndex<f64>> = spec
        .topic_word_dists
        .iter()
        .map(|row| {
            WeightedIndex::new(row.iter().copied())
                .map_err(|e| Error::InvalidInput(format!("bad topic distribution: {e}")))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n_articles);
    for i in 0..spec.n_articles {
        let topic = i % spec.n_topics;
        let dist = &dists[topic];
        let title = sample_text(spec, dist, spec.title_len, &mut rng);
        let body = sample_text(spec, dist, spec.body_len, &mut rng);
        let comments = (0..spec.comments_per_article)
            .map(|_| sample_text(spec, dist, spec.comment_len, &mut rng))
            .collect();
        out.push(RawArticle {
            title,
            body,
            comments,
            topic: Some(topic),
        });
    }
    Ok(out)
}
