//! Variational clustering of comments into K latent reader topics.
//!
//! A comment enters as a bag-of-words count vector `y`. An amortized
//! Gaussian posterior `q(z|y) = N(mu, diag(sigma^2))` is produced by a
//! two-layer tanh MLP with two affine heads `l1`, `l2`; a classifier MLP
//! turns a sampled `z` into a topic posterior `q(c|z)`; a one-layer softmax
//! decoder reconstructs the counts multinomially. The latent prior is a
//! uniform mixture of unit-variance Gaussians whose means (the topic bank)
//! are learned — maximizing the evidence lower bound
//!
//! ```text
//! recon_loglik  -  sum_c q(c|z) KL(q(z|y) || N(mu_c, I))  -  KL(q(c|z) || uniform)
//! ```
//!
//! pulls comment posteriors toward topic means while the uniform prior on
//! `c` keeps clusters from collapsing onto one topic.

use crate::corpus::CommentBoW;
use crate::graph::{Graph, ParamId, ParamStore, Var};

/// Clamp bounds for the log-variance head, applied before exponentiation.
pub const LOGVAR_CLAMP: f64 = 10.0;

/// Parameter handles of the clustering component. The bank is stored as a
/// `(latent, K)` matrix whose columns are the topic means `mu_c`.
#[derive(Debug, Clone, Copy)]
pub struct TopicParams {
    pub enc_w1: ParamId,
    pub enc_b1: ParamId,
    pub enc_w2: ParamId,
    pub enc_b2: ParamId,
    /// Posterior mean head `l1`.
    pub mu_w: ParamId,
    pub mu_b: ParamId,
    /// Posterior log-variance head `l2`.
    pub logvar_w: ParamId,
    pub logvar_b: ParamId,
    pub cls_w1: ParamId,
    pub cls_b1: ParamId,
    pub cls_w2: ParamId,
    pub cls_b2: ParamId,
    pub dec_w: ParamId,
    pub dec_b: ParamId,
    pub bank: ParamId,
    pub latent: usize,
    pub k: usize,
}

/// Amortized posterior over the comment latent, on the tape.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPosterior {
    pub mu: Var,
    /// Log-variance, already clamped to `[-LOGVAR_CLAMP, LOGVAR_CLAMP]`.
    pub logvar: Var,
}

/// Topic posterior `q(c|z)` with its log kept for KL terms.
#[derive(Debug, Clone, Copy)]
pub struct TopicPosterior {
    pub q: Var,
    pub log_q: Var,
}

/// All tape nodes produced by one evidence-lower-bound evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ElboOut {
    pub elbo: Var,
    pub recon: Var,
    pub kl_gauss: Var,
    pub kl_cat: Var,
    pub z: Var,
    pub posterior: GaussianPosterior,
    pub topics: TopicPosterior,
}

/// Densifies a bag-of-words into a count column over the full vocabulary.
pub fn bow_dense(bow: &CommentBoW, vocab_size: usize) -> Vec<f64> {
    let mut col = vec![0.0; vocab_size];
    for (&id, &count) in &bow.counts {
        col[id] = count as f64;
    }
    col
}

/// Two-layer tanh encoder and the two affine heads: BoW counts to the
/// Gaussian posterior.
pub fn encode_comment(
    g: &mut Graph,
    store: &ParamStore,
    p: &TopicParams,
    bow_col: Var,
) -> GaussianPosterior {
    let w1 = g.param(store, p.enc_w1);
    let b1 = g.param(store, p.enc_b1);
    let w2 = g.param(store, p.enc_w2);
    let b2 = g.param(store, p.enc_b2);
    let a1 = g.affine(w1, bow_col, b1);
    let h1 = g.tanh(a1);
    let a2 = g.affine(w2, h1, b2);
    let h = g.tanh(a2);
    let mw = g.param(store, p.mu_w);
    let mb = g.param(store, p.mu_b);
    let mu = g.affine(mw, h, mb);
    let lw = g.param(store, p.logvar_w);
    let lb = g.param(store, p.logvar_b);
    let lv_raw = g.affine(lw, h, lb);
    let logvar = g.clamp(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP);
    GaussianPosterior { mu, logvar }
}

/// Reparameterized sample `z = mu + sigma * noise`; `None` noise means the
/// deterministic evaluation mode `z = mu`.
pub fn reparameterize(
    g: &mut Graph,
    post: &GaussianPosterior,
    noise: Option<&[f64]>,
) -> Var {
    match noise {
        None => post.mu,
        Some(eps) => {
            let half = g.scale(post.logvar, 0.5);
            let sigma = g.exp(half);
            let eps = g.col(eps);
            let scaled = g.mul(sigma, eps);
            g.add(post.mu, scaled)
        }
    }
}

/// Two-layer classifier MLP with softmax: `z` to `q(c|z)`.
pub fn classify_topic(
    g: &mut Graph,
    store: &ParamStore,
    p: &TopicParams,
    z: Var,
) -> TopicPosterior {
    let w1 = g.param(store, p.cls_w1);
    let b1 = g.param(store, p.cls_b1);
    let w2 = g.param(store, p.cls_w2);
    let b2 = g.param(store, p.cls_b2);
    let a1 = g.affine(w1, z, b1);
    let h = g.tanh(a1);
    let logits = g.affine(w2, h, b2);
    let log_q = g.log_softmax(logits);
    let q = g.exp(log_q);
    TopicPosterior { q, log_q }
}

/// Multinomial reconstruction log-likelihood `sum_w count_w * log pi_w`
/// under the one-layer softmax decoder (count-independent coefficient
/// omitted). An empty BoW scores 0.
pub fn reconstruct_loglik(
    g: &mut Graph,
    store: &ParamStore,
    p: &TopicParams,
    z: Var,
    bow_col: Var,
) -> Var {
    let w = g.param(store, p.dec_w);
    let b = g.param(store, p.dec_b);
    let logits = g.affine(w, z, b);
    let log_pi = g.log_softmax(logits);
    g.dot(bow_col, log_pi)
}

/// `KL(N(mu, diag(sigma^2)) || N(mu_c, I))` for one topic mean column.
pub fn kl_gauss_to_topic(g: &mut Graph, post: &GaussianPosterior, mu_c: Var) -> Var {
    let var = g.exp(post.logvar);
    let diff = g.sub(post.mu, mu_c);
    let diff2 = g.mul(diff, diff);
    let s = g.add(var, diff2);
    let s = g.sub(s, post.logvar);
    let s = g.add_scalar(s, -1.0);
    let total = g.sum(s);
    g.scale(total, 0.5)
}

/// Row vector `(1, K)` of `KL(q(z|y) || N(mu_c, I))` for every topic at
/// once: the variance part is shared, the mean part is a column-wise
/// squared distance to the bank.
pub fn kl_gauss_all_topics(
    g: &mut Graph,
    store: &ParamStore,
    p: &TopicParams,
    post: &GaussianPosterior,
) -> Var {
    let var = g.exp(post.logvar);
    let vs = g.sub(var, post.logvar);
    let vs = g.add_scalar(vs, -1.0);
    let vsum = g.sum(vs);
    let shared = g.scale(vsum, 0.5);

    let bank = g.param(store, p.bank);
    let neg_mu = g.scale(post.mu, -1.0);
    let diff = g.add_col(bank, neg_mu);
    let diff2 = g.mul(diff, diff);
    let ones = g.constant(ndarray::Array2::ones((1, p.latent)));
    let sq = g.matmul(ones, diff2);
    let half_sq = g.scale(sq, 0.5);
    g.add_col(half_sq, shared)
}

/// `KL(q(c|z) || uniform(K)) = sum_c q_c log(q_c K)`.
pub fn kl_cat_to_uniform(g: &mut Graph, topics: &TopicPosterior, k: usize) -> Var {
    let qlq = g.mul(topics.q, topics.log_q);
    let s1 = g.sum(qlq);
    let qs = g.sum(topics.q);
    let s2 = g.scale(qs, (k as f64).ln());
    g.add(s1, s2)
}

/// Single-sample evidence lower bound for one comment, with `q(c|z)`
/// computed from the same sampled `z`.
pub fn elbo(
    g: &mut Graph,
    store: &ParamStore,
    p: &TopicParams,
    bow_col: Var,
    noise: Option<&[f64]>,
) -> ElboOut {
    let posterior = encode_comment(g, store, p, bow_col);
    let z = reparameterize(g, &posterior, noise);
    let topics = classify_topic(g, store, p, z);
    let recon = reconstruct_loglik(g, store, p, z, bow_col);
    let kl_row = kl_gauss_all_topics(g, store, p, &posterior);
    let kl_gauss = g.matmul(kl_row, topics.q);
    let kl_cat = kl_cat_to_uniform(g, &topics, p.k);
    let e = g.sub(recon, kl_gauss);
    let elbo = g.sub(e, kl_cat);
    ElboOut {
        elbo,
        recon,
        kl_gauss,
        kl_cat,
        z,
        posterior,
        topics,
    }
}
