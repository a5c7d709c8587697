//! Generation: deterministic article preparation (hard gates, topic
//! selection) and length-normalized beam search over the same decode step
//! the trainer uses.

use crate::backbone::{self, DecState};
use crate::corpus::{BOS, EOS, PAD};
use crate::fusion;
use crate::graph::{Graph, Var};
use crate::model::Model;
use crate::saliency::{self, GateDiagnostics};
use ndarray::Array2;

/// One ranked beam-search result. `tokens` excludes the terminating EOS;
/// `score` is the mean token log-probability (EOS included when reached).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub score: f64,
}

/// A generated comment with its provenance.
#[derive(Debug, Clone)]
pub struct Generation {
    /// Topic index that conditioned the decode; `None` for a model trained
    /// without the clustering module.
    pub topic: Option<usize>,
    pub tokens: Vec<usize>,
    pub text: String,
    pub score: f64,
}

/// Per-token saliency decisions for one article body.
#[derive(Debug, Clone)]
pub struct GateTrace {
    /// Raw selection probabilities, one per body token.
    pub beta: Vec<f64>,
    /// Thresholded gates actually applied at inference (`beta > 0.5`).
    pub hard: Vec<f64>,
}

impl GateTrace {
    pub fn kept(&self) -> usize {
        self.hard.iter().filter(|&&g| g > 0.0).count()
    }
}

/// Everything about one article that can be computed before decoding:
/// encoder states, hard saliency gates, and the topic distribution.
pub struct ArticleState {
    g: Graph,
    enc_hs: Var,
    summary: Var,
    gate: Option<Var>,
    pub trace: Option<GateTrace>,
    /// `p(c|X)` from the selector, when the model has one.
    pub topic_probs: Option<Vec<f64>>,
    pub diag: GateDiagnostics,
}

/// Runs the encoders once and freezes the inference-time decisions.
pub fn prepare(model: &Model, title: &[usize], body: &[usize]) -> ArticleState {
    let mut g = Graph::new();
    let store = &model.store;
    let body_emb = backbone::embed(&mut g, store, model.embedding, body);
    let enc = backbone::bilstm_encode(&mut g, store, &model.encoder, body_emb);

    let (gate, trace) = match (&model.title_encoder, &model.gate) {
        (Some(tenc), Some(gp)) => {
            let t_emb = backbone::embed(&mut g, store, model.embedding, title);
            let t_out = backbone::bilstm_encode(&mut g, store, tenc, t_emb);
            let beta_var = saliency::gate_probabilities(&mut g, store, gp, enc.hs, t_out.summary);
            let beta: Vec<f64> = g.value(beta_var).iter().copied().collect();
            let hard = saliency::hard_gates(&beta);
            let row = Array2::from_shape_vec((1, hard.len()), hard.clone()).unwrap();
            let gate = g.constant(row);
            (Some(gate), Some(GateTrace { beta, hard }))
        }
        _ => (None, None),
    };

    let topic_probs = model.selector.as_ref().map(|sel| {
        let (p, _) = fusion::select_topic(&mut g, store, sel, enc.summary);
        g.value(p).iter().copied().collect::<Vec<f64>>()
    });

    ArticleState {
        g,
        enc_hs: enc.hs,
        summary: enc.summary,
        gate,
        trace,
        topic_probs,
        diag: GateDiagnostics::default(),
    }
}

/// Highest-probability index; ties go to the smallest index.
pub fn argmax_topic(probs: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Indices sorted by probability descending; equal probabilities keep
/// ascending index order.
pub fn rank_topics(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// The prior mean of one topic, `mu_c`, as a graph node (`bank . e_c`).
fn topic_mean(g: &mut Graph, model: &Model, c: usize) -> Var {
    let tp = model.topic.as_ref().expect("model has no topic module");
    let bank = g.param(&model.store, tp.bank);
    let mut e = Array2::zeros((tp.k, 1));
    e[(c, 0)] = 1.0;
    let e = g.constant(e);
    g.matmul(bank, e)
}

struct Beam {
    state: DecState,
    last: usize,
    tokens: Vec<usize>,
    sum_lp: f64,
}

/// Beam search over an arbitrary step function (token, state) -> (state,
/// log-distribution). Hypotheses are ranked by mean log-probability; PAD
/// and BOS can never be emitted; EOS terminates a hypothesis and counts
/// toward its length. Public so decoders other than the built-in model
/// forward (and tests with hand-built transition tables) can reuse it.
pub fn beam_search_core(
    g: &mut Graph,
    init: DecState,
    beam_size: usize,
    max_len: usize,
    mut step: impl FnMut(&mut Graph, usize, &DecState) -> (DecState, Var),
) -> Vec<Hypothesis> {
    assert!(beam_size >= 1);
    let mut active = vec![Beam {
        state: init,
        last: BOS,
        tokens: Vec::new(),
        sum_lp: 0.0,
    }];
    let mut completed: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        // (candidate total, parent index, token, parent's advanced state)
        let mut cands: Vec<(f64, usize, usize, DecState)> = Vec::new();
        for (bi, b) in active.iter().enumerate() {
            let (next, lp) = step(g, b.last, &b.state);
            let lpv = g.value(lp);
            let mut toks: Vec<usize> = (0..lpv.nrows()).filter(|&t| t != PAD && t != BOS).collect();
            toks.sort_by(|&a, &b2| {
                lpv[(b2, 0)].partial_cmp(&lpv[(a, 0)]).unwrap().then(a.cmp(&b2))
            });
            for &t in toks.iter().take(beam_size) {
                cands.push((b.sum_lp + lpv[(t, 0)], bi, t, next.clone()));
            }
        }
        cands.sort_by(|x, y| {
            y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
        });
        let mut next_active = Vec::new();
        for (sum, bi, tok, state) in cands.into_iter().take(beam_size) {
            let parent_tokens = &active[bi].tokens;
            if tok == EOS {
                completed.push(Hypothesis {
                    tokens: parent_tokens.clone(),
                    score: sum / (parent_tokens.len() + 1) as f64,
                });
            } else {
                let mut tokens = Vec::with_capacity(parent_tokens.len() + 1);
                tokens.extend_from_slice(parent_tokens);
                tokens.push(tok);
                next_active.push(Beam {
                    state,
                    last: tok,
                    tokens,
                    sum_lp: sum,
                });
            }
        }
        active = next_active;
        if active.is_empty() {
            break;
        }
    }
    // Hypotheses still open at the length cap compete with their running
    // mean (no EOS term to pay).
    for b in active {
        let len = b.tokens.len().max(1);
        completed.push(Hypothesis {
            tokens: b.tokens,
            score: b.sum_lp / len as f64,
        });
    }
    completed.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    completed
}

/// Beam search through the model's decode step for one prepared article,
/// optionally conditioned on a topic mean.
pub fn beam_search(
    model: &Model,
    st: &mut ArticleState,
    mu_tilde: Option<Var>,
    beam_size: usize,
    max_len: usize,
) -> Vec<Hypothesis> {
    let ArticleState {
        ref mut g,
        enc_hs,
        summary,
        gate,
        ref mut diag,
        ..
    } = *st;
    let init = backbone::decoder_init(g, &model.store, &model.decoder, summary);
    beam_search_core(g, init, beam_size, max_len, |g, prev, state| {
        fusion::decode_step(g, model, prev, state, enc_hs, gate, mu_tilde, None, diag)
    })
}

fn to_generation(model: &Model, topic: Option<usize>, hyp: Hypothesis) -> Generation {
    Generation {
        topic,
        text: model.vocab.decode_clean(&hyp.tokens),
        tokens: hyp.tokens,
        score: hyp.score,
    }
}

/// One comment: the selector picks the topic (`argmax p(c|X)`), decoding
/// conditions on that topic's mean. Models without the clustering module
/// decode unconditioned.
pub fn generate_single(model: &Model, title: &[usize], body: &[usize]) -> Generation {
    let mut st = prepare(model, title, body);
    let choice = match (&model.topic, &st.topic_probs) {
        (Some(_), Some(p)) => Some(argmax_topic(p)),
        _ => None,
    };
    let mu = choice.map(|c| topic_mean(&mut st.g, model, c));
    let hyps = beam_search(
        model,
        &mut st,
        mu,
        model.cfg.beam_size,
        model.cfg.max_comment_len,
    );
    to_generation(model, choice, hyps.into_iter().next().expect("beam returned nothing"))
}

/// `n` comments per article. With the clustering module each of the top-n
/// topics under `p(c|X)` conditions one beam decode, ordered by topic
/// rank. Without it, the top-n beam hypotheses stand in.
pub fn generate_diverse(model: &Model, title: &[usize], body: &[usize], n: usize) -> Vec<Generation> {
    let mut st = prepare(model, title, body);
    match (&model.topic, st.topic_probs.clone()) {
        (Some(_), Some(p)) => rank_topics(&p)
            .into_iter()
            .take(n)
            .map(|c| {
                let mu = topic_mean(&mut st.g, model, c);
                let hyps = beam_search(
                    model,
                    &mut st,
                    Some(mu),
                    model.cfg.beam_size,
                    model.cfg.max_comment_len,
                );
                to_generation(
                    model,
                    Some(c),
                    hyps.into_iter().next().expect("beam returned nothing"),
                )
            })
            .collect(),
        _ => {
            let hyps = beam_search(
                model,
                &mut st,
                None,
                model.cfg.beam_size.max(n),
                model.cfg.max_comment_len,
            );
            hyps.into_iter()
                .take(n)
                .map(|h| to_generation(model, None, h))
                .collect()
        }
    }
}

/// The saliency decisions for one article, when the model has gates.
pub fn gate_trace(model: &Model, title: &[usize], body: &[usize]) -> Option<GateTrace> {
    prepare(model, title, body).trace
}

/// Which cluster a comment belongs to: `argmax_c q(c|z)` at the posterior
/// mean. `None` for models without the clustering module.
pub fn comment_topic(model: &Model, comment: &[usize]) -> Option<usize> {
    let tp = model.topic.as_ref()?;
    let mut g = Graph::new();
    let bow = crate::corpus::comment_bow(comment);
    let dense = crate::topic::bow_dense(&bow, model.vocab.size());
    let y = g.col(&dense);
    let post = crate::topic::encode_comment(&mut g, &model.store, tp, y);
    let z = crate::topic::reparameterize(&mut g, &post, None);
    let t = crate::topic::classify_topic(&mut g, &model.store, tp, z);
    let q: Vec<f64> = g.value(t.q).iter().copied().collect();
    Some(argmax_topic(&q))
}
