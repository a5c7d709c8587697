//! Reader-aware saliency gating over article body tokens.
//!
//! Every body token gets a selection probability `beta_i` from a two-layer
//! MLP over its encoder hidden and the title summary. Training samples a
//! relaxed binary gate per token through the Gumbel-Softmax trick (so
//! gradients reach the gate head), attention is renormalized over gated
//! tokens only, and an L1 penalty (the mean gate value) pushes the model to
//! select few tokens. At inference the gates harden to `beta > 0.5`.

use crate::graph::{Graph, ParamId, ParamStore, Var};
use rand::Rng;
use rand_distr::{Distribution, Gumbel};

/// Bounds used when taking `log beta` / `log (1-beta)`.
pub const BETA_CLAMP: f64 = 1e-6;

/// Below this gated-attention denominator the ungated softmax is used.
pub const GATE_DENOM_FLOOR: f64 = 1e-8;

/// Gate-head parameters: `w1 (hidden, 2d + 2t)`, `w2 (1, hidden)` with a
/// tanh between and a sigmoid on top.
#[derive(Debug, Clone, Copy)]
pub struct GateParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Per-token gate nodes for one article: `beta` are the Bernoulli
/// probabilities, `select` is the relaxed probability of the select class,
/// and `gate` is the value actually multiplied into attention (normally
/// `select`; its complement when the flip switch is on).
#[derive(Debug, Clone, Copy)]
pub struct Gates {
    pub beta: Var,
    pub select: Var,
    pub gate: Var,
}

/// Counters for rare numerical escapes, reported after training/decoding.
#[derive(Debug, Clone, Copy, Default)]
pub struct GateDiagnostics {
    /// Times gated attention fell back to the ungated softmax because the
    /// gated denominator was below [`GATE_DENOM_FLOOR`].
    pub attention_fallbacks: usize,
}

/// Selection probabilities for each body token: `sigmoid` over a two-layer
/// MLP of `[h^e_i; title summary]`. Returns a `(1, L)` row.
pub fn gate_probabilities(
    g: &mut Graph,
    store: &ParamStore,
    p: &GateParams,
    enc_hs: Var,
    title_summary: Var,
) -> Var {
    let len = g.value(enc_hs).ncols();
    let t_rows = g.value(title_summary).nrows();
    let zeros = g.constant(ndarray::Array2::zeros((t_rows, len)));
    let tiled = g.add_col(zeros, title_summary);
    let cat = g.concat_rows(&[enc_hs, tiled]);
    let w1 = g.param(store, p.w1);
    let b1 = g.param(store, p.b1);
    let a1 = g.matmul(w1, cat);
    let a1 = g.add_col(a1, b1);
    let h = g.tanh(a1);
    let w2 = g.param(store, p.w2);
    let b2 = g.param(store, p.b2);
    let a2 = g.matmul(w2, h);
    let a2 = g.add_col(a2, b2);
    g.sigmoid(a2)
}

/// One pair of standard Gumbel draws per body token.
pub fn sample_gumbel_pairs<R: Rng>(rng: &mut R, len: usize) -> Vec<(f64, f64)> {
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel");
    (0..len)
        .map(|_| (gumbel.sample(rng), gumbel.sample(rng)))
        .collect()
}

/// Relaxed binary gates from the two-class Gumbel-Softmax. With class
/// probabilities `(1-beta, beta)` and noise pair `(eps0, eps1)`,
///
/// ```text
/// select_i = exp((log beta_i + eps1)/tau) /
///            (exp((log beta_i + eps1)/tau) + exp((log(1-beta_i) + eps0)/tau))
/// ```
///
/// computed in its algebraically identical sigmoid form for stability. As
/// `tau -> 0` the pair `(1-select, select)` approaches one-hot.
pub fn gumbel_gates(
    g: &mut Graph,
    beta: Var,
    tau: f64,
    noise: &[(f64, f64)],
    flip: bool,
) -> Gates {
    assert!(tau > 0.0, "temperature must be positive");
    let len = g.value(beta).ncols();
    assert_eq!(noise.len(), len, "one noise pair per token");
    let clamped = g.clamp(beta, BETA_CLAMP, 1.0 - BETA_CLAMP);
    let log_b = g.ln(clamped);
    let neg = g.scale(clamped, -1.0);
    let one_minus = g.add_scalar(neg, 1.0);
    let log_1mb = g.ln(one_minus);
    let logit = g.sub(log_b, log_1mb);
    let delta: Vec<f64> = noise.iter().map(|&(e0, e1)| e1 - e0).collect();
    let delta = g.constant(
        ndarray::Array2::from_shape_vec((1, len), delta).expect("row shape"),
    );
    let shifted = g.add(logit, delta);
    let scaled = g.scale(shifted, 1.0 / tau);
    let select = g.sigmoid(scaled);
    let gate = if flip {
        let n = g.scale(select, -1.0);
        g.add_scalar(n, 1.0)
    } else {
        select
    };
    Gates {
        beta,
        select,
        gate,
    }
}

/// Attention restricted to gated tokens: weights proportional to
/// `g_i * exp(e_i)`, renormalized. If the denominator underflows the floor
/// (all gates effectively closed) the ungated softmax is used instead and
/// the event is counted.
pub fn gated_attention(
    g: &mut Graph,
    store: &ParamStore,
    w_a: ParamId,
    h_t: Var,
    enc_hs: Var,
    gates: Var,
    diag: &mut GateDiagnostics,
) -> (Var, Var) {
    let wa = g.param(store, w_a);
    let ht_row = g.transpose(h_t);
    let q = g.matmul(ht_row, wa);
    let scores = g.matmul(q, enc_hs);
    // Shift by the (constant) max score: the weights are invariant to the
    // shift, and exp stays in range.
    let m = g
        .value(scores)
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = g.add_scalar(scores, -m);
    let e = g.exp(shifted);
    let weighted = g.mul(gates, e);
    let denom = g.sum(weighted);
    let weights = if g.scalar_value(denom) < GATE_DENOM_FLOOR {
        diag.attention_fallbacks += 1;
        g.softmax(scores)
    } else {
        g.div_scalar(weighted, denom)
    };
    let wt = g.transpose(weights);
    let context = g.matmul(enc_hs, wt);
    (weights, context)
}

/// L1 sparsity penalty: mean gate value over the body's tokens.
pub fn saliency_loss(g: &mut Graph, gates: Var) -> Var {
    g.mean(gates)
}

/// Deterministic inference gates: 1 where `beta > 0.5`.
pub fn hard_gates(beta: &[f64]) -> Vec<f64> {
    beta.iter().map(|&b| if b > 0.5 { 1.0 } else { 0.0 }).collect()
}

/// Exponential temperature decay from `start` to `end` over the first
/// `anneal_frac` of `total_steps`, holding at `end` afterwards.
pub fn tau_at(step: usize, total_steps: usize, start: f64, end: f64, anneal_frac: f64) -> f64 {
    let anneal_steps = (total_steps as f64 * anneal_frac).ceil();
    if anneal_steps <= 0.0 {
        return end;
    }
    let t = (step as f64 / anneal_steps).min(1.0);
    start * (end / start).powf(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gate_params(
        store: &mut ParamStore,
        in_dim: usize,
        hidden: usize,
        mut init: impl FnMut(usize, usize) -> Array2<f64>,
    ) -> GateParams {
        GateParams {
            w1: store.register("gate.w1", init(hidden, in_dim)),
            b1: store.register("gate.b1", init(hidden, 1)),
            w2: store.register("gate.w2", init(1, hidden)),
            b2: store.register("gate.b2", init(1, 1)),
        }
    }

    #[test]
    fn zero_head_gives_half_everywhere() {
        let mut store = ParamStore::new();
        let p = gate_params(&mut store, 5, 3, |r, c| Array2::zeros((r, c)));
        let mut g = Graph::new();
        let hs = g.constant(Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64 * 0.1));
        let title = g.col(&[0.5, -0.5]);
        let beta = gate_probabilities(&mut g, &store, &p, hs, title);
        assert_eq!(g.value(beta).dim(), (1, 4));
        for j in 0..4 {
            assert_abs_diff_eq!(g.value(beta)[(0, j)], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_bias_saturates_and_identical_hiddens_agree() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let p = gate_params(&mut store, 5, 3, |r, c| {
            Array2::from_shape_fn((r, c), |_| rng.gen_range(-0.5..0.5))
        });
        store.value_mut(p.b2)[(0, 0)] = 50.0;
        let mut g = Graph::new();
        let mut hs = Array2::zeros((3, 3));
        hs.column_mut(0).assign(&ndarray::arr1(&[0.3, -0.1, 0.8]));
        hs.column_mut(1).assign(&ndarray::arr1(&[0.9, 0.2, -0.4]));
        hs.column_mut(2).assign(&ndarray::arr1(&[0.3, -0.1, 0.8])); // same as 0
        let hs = g.constant(hs);
        let title = g.col(&[0.1, 0.7]);
        let beta = gate_probabilities(&mut g, &store, &p, hs, title);
        for j in 0..3 {
            assert!(g.value(beta)[(0, j)] > 0.999_999);
        }
        // Columns 0 and 2 are identical tokens -> identical beta.
        assert_abs_diff_eq!(
            g.value(beta)[(0, 0)],
            g.value(beta)[(0, 2)],
            epsilon = 1e-15
        );
    }

    #[test]
    fn gumbel_gate_oracles() {
        // Symmetric beta with equal noise stays at one half for any tau.
        for tau in [0.05, 0.3, 1.0, 5.0] {
            let mut g = Graph::new();
            let beta = g.constant(Array2::from_elem((1, 1), 0.5));
            let out = gumbel_gates(&mut g, beta, tau, &[(0.7, 0.7)], false);
            assert_abs_diff_eq!(g.value(out.select)[(0, 0)], 0.5, epsilon = 1e-12);
        }

        // Zero noise, tau=1: the softmax of log-probabilities recovers beta.
        let mut g = Graph::new();
        let beta = g.constant(Array2::from_elem((1, 1), 0.9));
        let out = gumbel_gates(&mut g, beta, 1.0, &[(0.0, 0.0)], false);
        assert_abs_diff_eq!(g.value(out.select)[(0, 0)], 0.9, epsilon = 1e-12);

        // Zero noise, tau=0.1: sharpened to 0.9^10/(0.9^10 + 0.1^10).
        let out = gumbel_gates(&mut g, beta, 0.1, &[(0.0, 0.0)], false);
        let expected = 0.9f64.powi(10) / (0.9f64.powi(10) + 0.1f64.powi(10));
        assert_abs_diff_eq!(g.value(out.select)[(0, 0)], expected, epsilon = 1e-9);
        assert!(g.value(out.select)[(0, 0)] > 1.0 - 1e-9);
    }

    #[test]
    fn flip_switch_selects_complement_class() {
        let mut g = Graph::new();
        let beta = g.constant(Array2::from_elem((1, 2), 0.8));
        let noise = [(0.3, -0.2), (0.0, 1.0)];
        let a = gumbel_gates(&mut g, beta, 0.7, &noise, false);
        let b = gumbel_gates(&mut g, beta, 0.7, &noise, true);
        for j in 0..2 {
            assert_abs_diff_eq!(
                g.value(b.gate)[(0, j)],
                1.0 - g.value(a.gate)[(0, j)],
                epsilon = 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn gate_pair_is_simplex_point(
            beta in 0.001..0.999f64,
            tau in 0.01..10.0f64,
            e0 in -4.0..4.0f64,
            e1 in -4.0..4.0f64,
        ) {
            let mut g = Graph::new();
            let b = g.constant(Array2::from_elem((1, 1), beta));
            let out = gumbel_gates(&mut g, b, tau, &[(e0, e1)], false);
            let p1 = g.value(out.select)[(0, 0)];
            prop_assert!((0.0..=1.0).contains(&p1));
        }

        #[test]
        fn gate_monotone_in_beta(
            lo in 0.01..0.5f64,
            gap in 0.01..0.45f64,
            tau in 0.05..5.0f64,
            e0 in -3.0..3.0f64,
            e1 in -3.0..3.0f64,
        ) {
            let hi = lo + gap;
            let mut g = Graph::new();
            let b1 = g.constant(Array2::from_elem((1, 1), lo));
            let b2 = g.constant(Array2::from_elem((1, 1), hi));
            let o1 = gumbel_gates(&mut g, b1, tau, &[(e0, e1)], false);
            let o2 = gumbel_gates(&mut g, b2, tau, &[(e0, e1)], false);
            let p1 = g.value(o1.select)[(0, 0)];
            let p2 = g.value(o2.select)[(0, 0)];
            // Strictly increasing in beta, except where the sigmoid has
            // saturated to the same double.
            prop_assert!(p2 >= p1);
            let arg = |b: f64| ((b / (1.0 - b)).ln() + (e1 - e0)) / tau;
            if arg(hi).abs() < 30.0 && arg(lo).abs() < 30.0 {
                prop_assert!(p2 > p1);
            }
        }
    }

    #[test]
    fn gumbel_max_frequency_tracks_beta() {
        // argmax of (log(1-b) + e0, log b + e1) picks the select class with
        // probability exactly beta; check the empirical rate.
        let beta: f64 = 0.35;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let mut hits = 0;
        for pair in sample_gumbel_pairs(&mut rng, n) {
            if beta.ln() + pair.1 > (1.0 - beta).ln() + pair.0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - beta).abs() < 0.02, "empirical {freq} vs beta {beta}");
    }

    #[test]
    fn unit_gates_reproduce_plain_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut store = ParamStore::new();
        let w_a =
            store.register("w_a", Array2::from_shape_fn((3, 4), |_| rng.gen_range(-0.5..0.5)));
        let mut g = Graph::new();
        let h_t = g.col(&[0.2, -0.9, 0.4]);
        let hs = g.constant(Array2::from_shape_fn((4, 5), |_| rng.gen_range(-1.0..1.0)));
        let ones = g.constant(Array2::ones((1, 5)));
        let mut diag = GateDiagnostics::default();
        let (gw, gctx) = gated_attention(&mut g, &store, w_a, h_t, hs, ones, &mut diag);
        let (pw, pctx) = backbone::attend(&mut g, &store, w_a, h_t, hs);
        for j in 0..5 {
            assert_abs_diff_eq!(g.value(gw)[(0, j)], g.value(pw)[(0, j)], epsilon = 1e-12);
        }
        for i in 0..4 {
            assert_abs_diff_eq!(
                g.value(gctx)[(i, 0)],
                g.value(pctx)[(i, 0)],
                epsilon = 1e-12
            );
        }
        assert_eq!(diag.attention_fallbacks, 0);
    }

    #[test]
    fn gating_renormalizes_over_open_gates() {
        let mut store = ParamStore::new();
        let w_a = store.register("w_a", Array2::zeros((2, 2)));
        // Zero W_a -> all scores equal.
        let mut g = Graph::new();
        let h_t = g.col(&[1.0, 1.0]);
        let hs = g.constant(Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64));
        let gates = g.constant(Array2::from_shape_vec((1, 3), vec![1.0, 1.0, 0.0]).unwrap());
        let mut diag = GateDiagnostics::default();
        let (w, _) = gated_attention(&mut g, &store, w_a, h_t, hs, gates, &mut diag);
        assert_abs_diff_eq!(g.value(w)[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(w)[(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(w)[(0, 2)], 0.0, epsilon = 1e-12);

        // Single open gate takes all the mass.
        let one_hot = g.constant(Array2::from_shape_vec((1, 3), vec![0.0, 1.0, 0.0]).unwrap());
        let (w, ctx) = gated_attention(&mut g, &store, w_a, h_t, hs, one_hot, &mut diag);
        assert_abs_diff_eq!(g.value(w)[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(ctx)[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(ctx)[(1, 0)], 4.0, epsilon = 1e-12);
        assert_eq!(diag.attention_fallbacks, 0);
    }

    #[test]
    fn closed_gates_fall_back_to_ungated() {
        let mut store = ParamStore::new();
        let w_a = store.register("w_a", Array2::eye(2));
        let mut g = Graph::new();
        let h_t = g.col(&[1.0, 0.0]);
        let hs = g.constant(ndarray::array![[1.0, 0.0], [0.0, 1.0]]);
        let closed = g.constant(Array2::zeros((1, 2)));
        let mut diag = GateDiagnostics::default();
        let (w, _) = gated_attention(&mut g, &store, w_a, h_t, hs, closed, &mut diag);
        assert_eq!(diag.attention_fallbacks, 1);
        // Fallback equals the plain softmax of the scores.
        assert_abs_diff_eq!(g.value(w)[(0, 0)], 0.7310585786300049, epsilon = 1e-12);
    }

    #[test]
    fn saliency_loss_oracles() {
        let mut g = Graph::new();
        let all_on = g.constant(Array2::ones((1, 10)));
        let l = saliency_loss(&mut g, all_on);
        assert_abs_diff_eq!(g.scalar_value(l), 1.0, epsilon = 1e-12);
        let half = g.constant(Array2::from_shape_vec((1, 4), vec![1.0, 0.0, 1.0, 0.0]).unwrap());
        let l = saliency_loss(&mut g, half);
        assert_abs_diff_eq!(g.scalar_value(l), 0.5, epsilon = 1e-12);
        let soft = g.constant(Array2::from_shape_vec((1, 2), vec![0.2, 0.4]).unwrap());
        let l = saliency_loss(&mut g, soft);
        assert_abs_diff_eq!(g.scalar_value(l), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn hard_gates_threshold_at_half() {
        assert_eq!(hard_gates(&[0.49, 0.5, 0.51, 0.9]), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn tau_schedule_shape() {
        let (s, e, f) = (1.0, 0.1, 2.0 / 3.0);
        assert_abs_diff_eq!(tau_at(0, 300, s, e, f), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tau_at(200, 300, s, e, f), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(tau_at(299, 300, s, e, f), 0.1, epsilon = 1e-12);
        // Strictly decreasing during the anneal.
        let mut prev = tau_at(0, 300, s, e, f);
        for step in 1..200 {
            let t = tau_at(step, 300, s, e, f);
            assert!(t < prev);
            prev = t;
        }
        // Halfway through the anneal, the value is the geometric midpoint.
        assert_abs_diff_eq!(
            tau_at(100, 300, s, e, f),
            (s * e).sqrt(),
            epsilon = 1e-9
        );
    }
}
