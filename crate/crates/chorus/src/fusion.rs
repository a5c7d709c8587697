//! Joins the pieces into one trainable objective: article-side topic
//! selection, the comment-weighted topic vector, topic-aware fusion of the
//! decoder state, the selector alignment loss, and the weighted total loss
//! built per (article, comment) instance.
//!
//! During training the decoder is conditioned on the comment-derived topic
//! mixture `mu_tilde = sum_c q(c|z) mu_c`; the article-side selector
//! `p(c|X)` is pulled toward `q(c|z)` by a KL term so that at inference —
//! when no comment exists — it can pick the topic on its own.

use crate::backbone::{self, DecState, EncoderOutput};
use crate::corpus::{comment_bow, BOS, EOS};
use crate::graph::{Graph, ParamId, ParamStore, Var};
use crate::model::Model;
use crate::saliency::{self, GateDiagnostics, Gates};
use crate::topic::{self, ElboOut};
use rand_chacha::ChaCha8Rng;

/// Article-side topic selector: two affine layers + softmax over `h^e`.
#[derive(Debug, Clone, Copy)]
pub struct SelectorParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// `p(c|X)` from the encoder summary. Returns `(p, log p)`, both `(K, 1)`.
pub fn select_topic(
    g: &mut Graph,
    store: &ParamStore,
    sel: &SelectorParams,
    summary: Var,
) -> (Var, Var) {
    let w1 = g.param(store, sel.w1);
    let b1 = g.param(store, sel.b1);
    let w2 = g.param(store, sel.w2);
    let b2 = g.param(store, sel.b2);
    let a1 = g.affine(w1, summary, b1);
    let h = g.tanh(a1);
    let logits = g.affine(w2, h, b2);
    let log_p = g.log_softmax(logits);
    let p = g.exp(log_p);
    (p, log_p)
}

/// Convex combination of topic means: `mu_tilde = bank q`, `(latent, 1)`.
pub fn weighted_topic(g: &mut Graph, store: &ParamStore, bank: ParamId, q: Var) -> Var {
    let b = g.param(store, bank);
    g.matmul(b, q)
}

/// Topic-aware fusion `tanh(W_c [h_t; context; mu_tilde])`.
pub fn fuse_with_topic(
    g: &mut Graph,
    store: &ParamStore,
    w_c: ParamId,
    h_t: Var,
    context: Var,
    mu_tilde: Var,
) -> Var {
    let wc = g.param(store, w_c);
    let cat = g.concat_rows(&[h_t, context, mu_tilde]);
    let z = g.matmul(wc, cat);
    g.tanh(z)
}

/// `KL(q || p)` between two categorical posteriors given as value/log
/// pairs. When `detach_q` is set the target side enters as constants, so
/// gradient reaches only `log_p` — the selector learns toward the
/// clustering posterior without disturbing it.
pub fn topic_alignment_loss(
    g: &mut Graph,
    q: Var,
    log_q: Var,
    log_p: Var,
    detach_q: bool,
) -> Var {
    let (q, log_q) = if detach_q {
        let qv = g.value(q).clone();
        let lqv = g.value(log_q).clone();
        (g.constant(qv), g.constant(lqv))
    } else {
        (q, log_q)
    };
    let diff = g.sub(log_q, log_p);
    let terms = g.mul(q, diff);
    g.sum(terms)
}

/// Scalar loss components of one instance (tape nodes; missing components
/// are `None` under the corresponding ablation).
pub struct InstanceLosses {
    pub total: Var,
    pub ce: Option<Var>,
    pub elbo: Option<Var>,
    pub sal: Option<Var>,
    pub top: Option<Var>,
    /// Mean selection probability over body tokens, for the training log.
    pub mean_beta: Option<f64>,
}

/// `L = lambda1 (-elbo) + lambda2 sal + lambda3 ce + lambda4 top` over
/// whatever components exist; zero-weight components are excluded from the
/// sum (and callers may skip building them).
pub fn total_loss(
    g: &mut Graph,
    weights: (f64, f64, f64, f64),
    elbo: Option<Var>,
    sal: Option<Var>,
    ce: Option<Var>,
    top: Option<Var>,
) -> Var {
    let (l1, l2, l3, l4) = weights;
    let mut acc: Option<Var> = None;
    let mut add_term = |g: &mut Graph, lambda: f64, term: Option<Var>, negate: bool| {
        if lambda == 0.0 {
            return;
        }
        if let Some(t) = term {
            let k = if negate { -lambda } else { lambda };
            let scaled = g.scale(t, k);
            acc = Some(match acc {
                Some(a) => g.add(a, scaled),
                None => scaled,
            });
        }
    };
    add_term(g, l1, elbo, true);
    add_term(g, l2, sal, false);
    add_term(g, l3, ce, false);
    add_term(g, l4, top, false);
    acc.unwrap_or_else(|| g.scalar(0.0))
}

/// Noise drawn by the trainer for one instance. `None` fields select the
/// deterministic evaluation behavior: `z = mu`, no gate sampling (relaxed
/// gates are replaced by the betas themselves), no dropout.
pub struct InstanceNoise<'a> {
    pub vgc_eps: Option<Vec<f64>>,
    pub gumbel: Option<Vec<(f64, f64)>>,
    pub dropout: Option<(f64, &'a mut ChaCha8Rng)>,
}

impl InstanceNoise<'_> {
    /// Evaluation mode: fully deterministic forward.
    pub fn eval() -> Self {
        InstanceNoise {
            vgc_eps: None,
            gumbel: None,
            dropout: None,
        }
    }
}

/// Everything the trainer needs back from one instance forward pass.
pub struct InstanceForward {
    pub losses: InstanceLosses,
    pub elbo_parts: Option<ElboOut>,
}

/// One decoder step, shared verbatim by teacher forcing and beam search:
/// embeds the input token, advances the stacked LSTM, attends over the
/// body (gated when `gates` is given), fuses the context (with the topic
/// vector when `mu_tilde` is given), and returns the new state plus the
/// log-distribution over the vocabulary.
#[allow(clippy::too_many_arguments)]
pub fn decode_step(
    g: &mut Graph,
    model: &Model,
    token: usize,
    state: &DecState,
    enc_hs: Var,
    gates: Option<Var>,
    mu_tilde: Option<Var>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
    diag: &mut GateDiagnostics,
) -> (DecState, Var) {
    let store = &model.store;
    let x = backbone::embed(g, store, model.embedding, &[token]);
    let state = backbone::decoder_step(g, store, &model.decoder, x, state, dropout);
    let (_, context) = match gates {
        Some(gt) => {
            saliency::gated_attention(g, store, model.w_a, state.top(), enc_hs, gt, diag)
        }
        None => backbone::attend(g, store, model.w_a, state.top(), enc_hs),
    };
    let fused = match mu_tilde {
        Some(mt) => fuse_with_topic(g, store, model.w_c, state.top(), context, mt),
        None => backbone::fuse_plain(g, store, model.w_c, state.top(), context),
    };
    let logits = backbone::output_logits(g, store, model.w_out, model.b_out, fused);
    let lp = g.log_softmax(logits);
    (state, lp)
}

/// Builds the full training graph for one (article, comment) pair:
/// encoders, clustering, gates, teacher-forced decoding, and the weighted
/// total. Components are included according to the model's ablation
/// switches; the decoder pass is skipped entirely when `lambda3 == 0`
/// (clustering-only training).
pub fn instance_loss(
    g: &mut Graph,
    model: &Model,
    title: &[usize],
    body: &[usize],
    comment: &[usize],
    tau: f64,
    mut noise: InstanceNoise<'_>,
    diag: &mut GateDiagnostics,
) -> InstanceForward {
    let cfg = &model.cfg;
    let store = &model.store;

    // Content encoding (always needed: every loss hangs off it except a
    // pure clustering run, where it is cheap enough not to special-case).
    let body_emb = backbone::embed(g, store, model.embedding, body);
    let enc: EncoderOutput = backbone::bilstm_encode(g, store, &model.encoder, body_emb);

    // Clustering side.
    let elbo_parts = model.topic.as_ref().map(|tp| {
        let bow = comment_bow(comment);
        let dense = topic::bow_dense(&bow, model.vocab.size());
        let y = g.col(&dense);
        topic::elbo(g, store, tp, y, noise.vgc_eps.as_deref())
    });

    // Saliency gates over body tokens.
    let gates: Option<Gates> = match (&model.title_encoder, &model.gate) {
        (Some(tenc), Some(gp)) => {
            let t_emb = backbone::embed(g, store, model.embedding, title);
            let t_out = backbone::bilstm_encode(g, store, tenc, t_emb);
            let beta = saliency::gate_probabilities(g, store, gp, enc.hs, t_out.summary);
            Some(match &noise.gumbel {
                Some(eps) => {
                    saliency::gumbel_gates(g, beta, tau, eps, cfg.gate_class_flip)
                }
                // Deterministic forward: use the probabilities directly.
                None => Gates {
                    beta,
                    select: beta,
                    gate: beta,
                },
            })
        }
        _ => None,
    };

    let sal = gates.as_ref().map(|gt| saliency::saliency_loss(g, gt.gate));
    let mean_beta = gates.as_ref().map(|gt| {
        let b = g.value(gt.beta);
        b.sum() / b.len() as f64
    });

    // Selector alignment (needs both posteriors).
    let top = match (model.selector.as_ref(), elbo_parts.as_ref()) {
        (Some(sel), Some(e)) => {
            let (_, log_p) = select_topic(g, store, sel, enc.summary);
            Some(topic_alignment_loss(
                g,
                e.topics.q,
                e.topics.log_q,
                log_p,
                cfg.ltop_detach_q,
            ))
        }
        _ => None,
    };

    // Teacher-forced decoding.
    let ce = if cfg.lambda3 > 0.0 {
        let mu_tilde = elbo_parts.as_ref().map(|e| {
            weighted_topic(g, store, model.topic.as_ref().unwrap().bank, e.topics.q)
        });
        let mut state: DecState = backbone::decoder_init(g, store, &model.decoder, enc.summary);
        let mut inputs = Vec::with_capacity(comment.len() + 1);
        inputs.push(BOS);
        inputs.extend_from_slice(comment);
        let mut targets = Vec::with_capacity(comment.len() + 1);
        targets.extend_from_slice(comment);
        targets.push(EOS);

        let mut logprobs = Vec::with_capacity(inputs.len());
        for &tok in &inputs {
            let drop = noise
                .dropout
                .as_mut()
                .map(|(p, rng)| (*p, &mut **rng));
            let (next, lp) = decode_step(
                g,
                model,
                tok,
                &state,
                enc.hs,
                gates.as_ref().map(|gt| gt.gate),
                mu_tilde,
                drop,
                diag,
            );
            state = next;
            logprobs.push(lp);
        }
        Some(backbone::cross_entropy(g, &logprobs, &targets))
    } else {
        None
    };

    let total = total_loss(
        g,
        (cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4),
        elbo_parts.as_ref().map(|e| e.elbo),
        sal,
        ce,
        top,
    );

    InstanceForward {
        losses: InstanceLosses {
            total,
            ce,
            elbo: elbo_parts.as_ref().map(|e| e.elbo),
            sal,
            top,
            mean_beta,
        },
        elbo_parts,
    }
}
