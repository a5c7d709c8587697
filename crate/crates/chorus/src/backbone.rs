//! Attention seq2seq skeleton: shared embedding, stacked BiLSTM encoders,
//! stacked LSTM decoder, bilinear attention, fused output head, and the
//! teacher-forced cross-entropy loss.
//!
//! Functions here are tape builders: they take a [`Graph`] plus parameter
//! handles and append the forward computation for one (unpadded) sequence.
//! Batching is the caller's loop; padded positions never enter a graph.

use crate::graph::{Graph, ParamId, ParamStore, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parameter handles of one LSTM direction/layer: `w_ih` is `(4h, in)`,
/// `w_hh` is `(4h, h)`, `b` is `(4h, 1)`, gate order `[i, f, g, o]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
}

/// Stacked bidirectional encoder; `fwd[l]`/`bwd[l]` are layer `l`'s two
/// directions, each with hidden width `hidden`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: Vec<LstmLayer>,
    pub bwd: Vec<LstmLayer>,
    pub hidden: usize,
}

/// Stacked unidirectional decoder. Layer 0's initial hidden comes from the
/// encoder summary through the affine bridge; all other initial states are
/// zero.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub layers: Vec<LstmLayer>,
    pub bridge_w: ParamId,
    pub bridge_b: ParamId,
    pub hidden: usize,
}

/// Encoder result for one sequence: per-token hidden columns stacked into a
/// `(2h, L)` matrix, plus the summary `[fwd last; bwd first]`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderOutput {
    pub hs: Var,
    pub summary: Var,
    pub len: usize,
}

/// Decoder recurrent state: one (h, c) pair per layer; `h.last()` feeds
/// attention and the output head.
#[derive(Debug, Clone)]
pub struct DecState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

impl DecState {
    pub fn top(&self) -> Var {
        *self.h.last().expect("decoder has at least one layer")
    }
}

/// Looks up embedding columns for a token sequence: `(E, L)`.
pub fn embed(g: &mut Graph, store: &ParamStore, embedding: ParamId, ids: &[usize]) -> Var {
    let table = g.param(store, embedding);
    g.gather(table, ids)
}

/// One LSTM cell step; returns the new `(h, c)`.
pub fn lstm_step(
    g: &mut Graph,
    store: &ParamStore,
    layer: &LstmLayer,
    x: Var,
    h: Var,
    c: Var,
) -> (Var, Var) {
    let hidden = store.value(layer.w_hh).ncols();
    let w_ih = g.param(store, layer.w_ih);
    let w_hh = g.param(store, layer.w_hh);
    let b = g.param(store, layer.b);
    let wx = g.matmul(w_ih, x);
    let wh = g.matmul(w_hh, h);
    let s = g.add(wx, wh);
    let pre = g.add(s, b);
    let i_raw = g.slice_rows(pre, 0, hidden);
    let f_raw = g.slice_rows(pre, hidden, hidden);
    let g_raw = g.slice_rows(pre, 2 * hidden, hidden);
    let o_raw = g.slice_rows(pre, 3 * hidden, hidden);
    let i = g.sigmoid(i_raw);
    let f = g.sigmoid(f_raw);
    let cand = g.tanh(g_raw);
    let o = g.sigmoid(o_raw);
    let fc = g.mul(f, c);
    let ic = g.mul(i, cand);
    let c_new = g.add(fc, ic);
    let c_act = g.tanh(c_new);
    let h_new = g.mul(o, c_act);
    (h_new, c_new)
}

/// Runs the stacked BiLSTM over an embedded sequence `(E, L)` with `L >= 1`.
pub fn bilstm_encode(
    g: &mut Graph,
    store: &ParamStore,
    enc: &BiLstm,
    embedded: Var,
) -> EncoderOutput {
    let len = g.value(embedded).ncols();
    assert!(len >= 1, "encoder requires at least one token");
    let mut inputs: Vec<Var> = (0..len).map(|t| g.gather(embedded, &[t])).collect();
    let mut summary = None;
    for (fwd, bwd) in enc.fwd.iter().zip(&enc.bwd) {
        let mut fh = g.zeros(enc.hidden);
        let mut fc = g.zeros(enc.hidden);
        let mut fwd_h = Vec::with_capacity(len);
        for &x in &inputs {
            let (h, c) = lstm_step(g, store, fwd, x, fh, fc);
            fwd_h.push(h);
            fh = h;
            fc = c;
        }
        let mut bh = g.zeros(enc.hidden);
        let mut bc = g.zeros(enc.hidden);
        let mut bwd_h = vec![fh; len]; // placeholder, overwritten below
        for t in (0..len).rev() {
            let (h, c) = lstm_step(g, store, bwd, inputs[t], bh, bc);
            bwd_h[t] = h;
            bh = h;
            bc = c;
        }
        inputs = (0..len)
            .map(|t| g.concat_rows(&[fwd_h[t], bwd_h[t]]))
            .collect();
        summary = Some(g.concat_rows(&[fwd_h[len - 1], bwd_h[0]]));
    }
    let hs = g.concat_cols(&inputs);
    EncoderOutput {
        hs,
        summary: summary.expect("encoder has at least one layer"),
        len,
    }
}

/// Initial decoder state from the encoder summary.
pub fn decoder_init(g: &mut Graph, store: &ParamStore, dec: &Decoder, summary: Var) -> DecState {
    let bw = g.param(store, dec.bridge_w);
    let bb = g.param(store, dec.bridge_b);
    let h0 = g.affine(bw, summary, bb);
    let mut h = vec![h0];
    let mut c = vec![g.zeros(dec.hidden)];
    for _ in 1..dec.layers.len() {
        h.push(g.zeros(dec.hidden));
        c.push(g.zeros(dec.hidden));
    }
    DecState { h, c }
}

/// Inverted-dropout mask column: entries are `0` with probability `p`, else
/// `1/(1-p)`, so the expectation is the identity.
pub fn dropout_mask(g: &mut Graph, rows: usize, p: f64, rng: &mut ChaCha8Rng) -> Var {
    let scale = 1.0 / (1.0 - p);
    let col: Vec<f64> = (0..rows)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
        .collect();
    g.col(&col)
}

/// One decoder step on input embedding `x` `(E, 1)`. `dropout` applies an
/// inverted-dropout mask after each layer's hidden output (training only;
/// pass `None` for evaluation).
pub fn decoder_step(
    g: &mut Graph,
    store: &ParamStore,
    dec: &Decoder,
    x: Var,
    state: &DecState,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> DecState {
    let mut h = Vec::with_capacity(dec.layers.len());
    let mut c = Vec::with_capacity(dec.layers.len());
    let mut input = x;
    for (l, layer) in dec.layers.iter().enumerate() {
        let (h_new, c_new) = lstm_step(g, store, layer, input, state.h[l], state.c[l]);
        h.push(h_new);
        c.push(c_new);
        input = h_new;
        if let Some((p, rng)) = dropout.as_mut() {
            let mask = dropout_mask(g, dec.hidden, *p, rng);
            input = g.mul(input, mask);
            h[l] = input;
        }
    }
    DecState { h, c }
}

/// Bilinear attention `e_i = h_tᵀ W_a h^e_i`, softmax over positions.
/// Returns `(weights (1, L), context (2h, 1))`.
pub fn attend(
    g: &mut Graph,
    store: &ParamStore,
    w_a: ParamId,
    h_t: Var,
    enc_hs: Var,
) -> (Var, Var) {
    let wa = g.param(store, w_a);
    let ht_row = g.transpose(h_t);
    let q = g.matmul(ht_row, wa);
    let scores = g.matmul(q, enc_hs);
    let weights = g.softmax(scores);
    let wt = g.transpose(weights);
    let context = g.matmul(enc_hs, wt);
    (weights, context)
}

/// Plain fusion `tanh(W_c [h_t; context])`, the no-topic form.
pub fn fuse_plain(
    g: &mut Graph,
    store: &ParamStore,
    w_c: ParamId,
    h_t: Var,
    context: Var,
) -> Var {
    let wc = g.param(store, w_c);
    let cat = g.concat_rows(&[h_t, context]);
    let z = g.matmul(wc, cat);
    g.tanh(z)
}

/// Vocabulary logits from the fused vector.
pub fn output_logits(
    g: &mut Graph,
    store: &ParamStore,
    w_out: ParamId,
    b_out: ParamId,
    fused: Var,
) -> Var {
    let w = g.param(store, w_out);
    let b = g.param(store, b_out);
    g.affine(w, fused, b)
}

/// Mean negative log-probability of the target ids given per-step
/// log-probability columns (teacher forcing).
pub fn cross_entropy(g: &mut Graph, logprobs: &[Var], targets: &[usize]) -> Var {
    assert_eq!(logprobs.len(), targets.len());
    assert!(!targets.is_empty(), "cross_entropy over empty targets");
    let picks: Vec<Var> = logprobs
        .iter()
        .zip(targets)
        .map(|(&lp, &t)| g.pick(lp, t, 0))
        .collect();
    let stacked = g.concat_rows(&picks);
    let total = g.sum(stacked);
    g.scale(total, -1.0 / targets.len() as f64)
}
