//! Whole-model container: configuration, vocabulary, and every parameter
//! tensor with its handles, under a stable naming scheme shared with the
//! checkpoint format.
//!
//! Component presence follows the ablation switches: the clustering
//! parameters and article-side topic selector exist only when `use_topic`
//! is on, the title encoder and gate head only when `use_saliency` is on.

use crate::backbone::{BiLstm, Decoder, LstmLayer};
use crate::config::Config;
use crate::corpus::Vocabulary;
use crate::fusion::SelectorParams;
use crate::graph::{ParamId, ParamStore};
use crate::saliency::GateParams;
use crate::topic::TopicParams;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug)]
pub struct Model {
    pub cfg: Config,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub embedding: ParamId,
    pub encoder: BiLstm,
    pub decoder: Decoder,
    pub w_a: ParamId,
    pub w_c: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub topic: Option<TopicParams>,
    pub selector: Option<SelectorParams>,
    pub title_encoder: Option<BiLstm>,
    pub gate: Option<GateParams>,
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weight init (the usual LSTM
/// scheme); biases start at zero.
fn init_weight(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = 1.0 / (cols.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a))
}

struct Builder<'a> {
    store: ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn weight(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        let w = init_weight(rows, cols, self.rng);
        self.store.register(name, w)
    }

    fn bias(&mut self, name: &str, rows: usize) -> ParamId {
        self.store.register(name, Array2::zeros((rows, 1)))
    }

    fn lstm_layer(&mut self, prefix: &str, input: usize, hidden: usize) -> LstmLayer {
        LstmLayer {
            w_ih: self.weight(&format!("{prefix}.w_ih"), 4 * hidden, input),
            w_hh: self.weight(&format!("{prefix}.w_hh"), 4 * hidden, hidden),
            b: self.bias(&format!("{prefix}.b"), 4 * hidden),
        }
    }

    fn bilstm(&mut self, prefix: &str, input: usize, hidden: usize, layers: usize) -> BiLstm {
        let mut fwd = Vec::with_capacity(layers);
        let mut bwd = Vec::with_capacity(layers);
        for l in 0..layers {
            let in_dim = if l == 0 { input } else { 2 * hidden };
            fwd.push(self.lstm_layer(&format!("{prefix}.l{l}.fwd"), in_dim, hidden));
            bwd.push(self.lstm_layer(&format!("{prefix}.l{l}.bwd"), in_dim, hidden));
        }
        BiLstm { fwd, bwd, hidden }
    }
}

impl Model {
    /// Builds a freshly initialized model; all randomness comes from
    /// `cfg.seed`, so equal (config, vocabulary) pairs yield equal models.
    pub fn new(cfg: Config, vocab: Vocabulary) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let v = vocab.size();
        let ctx = 2 * cfg.enc_hidden;
        let mut b = Builder {
            store: ParamStore::new(),
            rng: &mut rng,
        };

        let embedding = b.weight("embedding", cfg.embed_dim, v);
        let encoder = b.bilstm("encoder", cfg.embed_dim, cfg.enc_hidden, cfg.enc_layers);
        let mut dec_layers = Vec::with_capacity(cfg.dec_layers);
        for l in 0..cfg.dec_layers {
            let in_dim = if l == 0 { cfg.embed_dim } else { cfg.dec_hidden };
            dec_layers.push(b.lstm_layer(&format!("decoder.l{l}"), in_dim, cfg.dec_hidden));
        }
        let decoder = Decoder {
            layers: dec_layers,
            bridge_w: b.weight("decoder.bridge.w", cfg.dec_hidden, ctx),
            bridge_b: b.bias("decoder.bridge.b", cfg.dec_hidden),
            hidden: cfg.dec_hidden,
        };
        let w_a = b.weight("attention.w_a", cfg.dec_hidden, ctx);
        let fuse_in = cfg.dec_hidden
            + ctx
            + if cfg.use_topic { cfg.latent_dim } else { 0 };
        let w_c = b.weight("fusion.w_c", cfg.dec_hidden, fuse_in);
        let w_out = b.weight("output.w", v, cfg.dec_hidden);
        let b_out = b.bias("output.b", v);

        let topic = cfg.use_topic.then(|| {
            // Topic means start tightly spread around the origin so no
            // cluster dominates before the data speaks.
            let normal = Normal::new(0.0, 0.1).expect("valid normal");
            let bank_init = Array2::from_shape_fn((cfg.latent_dim, cfg.n_topics), |_| {
                normal.sample(b.rng)
            });
            TopicParams {
                enc_w1: b.weight("vgc.enc.w1", cfg.vgc_hidden, v),
                enc_b1: b.bias("vgc.enc.b1", cfg.vgc_hidden),
                enc_w2: b.weight("vgc.enc.w2", cfg.vgc_hidden, cfg.vgc_hidden),
                enc_b2: b.bias("vgc.enc.b2", cfg.vgc_hidden),
                mu_w: b.weight("vgc.l1.w", cfg.latent_dim, cfg.vgc_hidden),
                mu_b: b.bias("vgc.l1.b", cfg.latent_dim),
                logvar_w: b.weight("vgc.l2.w", cfg.latent_dim, cfg.vgc_hidden),
                logvar_b: b.bias("vgc.l2.b", cfg.latent_dim),
                cls_w1: b.weight("vgc.cls.w1", cfg.classifier_hidden, cfg.latent_dim),
                cls_b1: b.bias("vgc.cls.b1", cfg.classifier_hidden),
                cls_w2: b.weight("vgc.cls.w2", cfg.n_topics, cfg.classifier_hidden),
                cls_b2: b.bias("vgc.cls.b2", cfg.n_topics),
                dec_w: b.weight("vgc.dec.w", v, cfg.latent_dim),
                dec_b: b.bias("vgc.dec.b", v),
                bank: b.store.register("vgc.topic_bank", bank_init),
                latent: cfg.latent_dim,
                k: cfg.n_topics,
            }
        });
        let selector = cfg.use_topic.then(|| SelectorParams {
            w1: b.weight("selector.w1", cfg.selector_hidden, ctx),
            b1: b.bias("selector.b1", cfg.selector_hidden),
            w2: b.weight("selector.w2", cfg.n_topics, cfg.selector_hidden),
            b2: b.bias("selector.b2", cfg.n_topics),
        });

        let title_encoder = cfg
            .use_saliency
            .then(|| b.bilstm("title_encoder", cfg.embed_dim, cfg.enc_hidden, cfg.enc_layers));
        let gate = cfg.use_saliency.then(|| GateParams {
            w1: b.weight("saliency.gate.w1", cfg.gate_hidden, 2 * ctx),
            b1: b.bias("saliency.gate.b1", cfg.gate_hidden),
            w2: b.weight("saliency.gate.w2", 1, cfg.gate_hidden),
            b2: b.bias("saliency.gate.b2", 1),
        });

        Model {
            cfg,
            vocab,
            store: b.store,
            embedding,
            encoder,
            decoder,
            w_a,
            w_c,
            w_out,
            b_out,
            topic,
            selector,
            title_encoder,
            gate,
        }
    }

    pub fn n_params(&self) -> usize {
        self.store.n_scalars()
    }
}
