//! Joint training loop: per-instance graphs, batch-averaged gradients,
//! elementwise gradient clamping, Adam, the Gumbel temperature schedule,
//! JSONL step logging, and dev-loss early stopping.

use crate::corpus::{batch_iter, Batch, Dataset};
use crate::error::{Error, Result};
use crate::fusion::{self, InstanceNoise};
use crate::graph::{GradStore, Graph, ParamStore};
use crate::model::Model;
use crate::saliency::{self, GateDiagnostics};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::io::Write;

/// Adam with the standard defaults (beta1 0.9, beta2 0.999, eps 1e-8).
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: GradStore,
    v: GradStore,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: GradStore::zeros_like(store),
            v: GradStore::zeros_like(store),
            t: 0,
        }
    }

    pub fn update(&mut self, store: &mut ParamStore, grads: &GradStore) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (id, g) in grads.iter() {
            ndarray::Zip::from(self.m.get_mut(id))
                .and(g)
                .for_each(|m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            ndarray::Zip::from(self.v.get_mut(id))
                .and(g)
                .for_each(|v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(store.value_mut(id))
                .and(self.m.get(id))
                .and(self.v.get(id))
                .for_each(|p, &m, &v| {
                    *p -= self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                });
        }
    }
}

/// One training-log line; keys are fixed and always present (absent
/// components serialize as null).
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    #[serde(rename = "L")]
    pub total: f64,
    #[serde(rename = "L_ce")]
    pub ce: Option<f64>,
    #[serde(rename = "L_ELBO")]
    pub elbo: Option<f64>,
    #[serde(rename = "L_sal")]
    pub sal: Option<f64>,
    #[serde(rename = "L_top")]
    pub top: Option<f64>,
    pub mean_beta: Option<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainReport {
    pub steps_run: usize,
    pub epochs_run: usize,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean dev loss per epoch (empty when no dev split).
    pub dev_losses: Vec<f64>,
    pub attention_fallbacks: usize,
    pub stopped_early: bool,
}

pub struct Trainer<'a> {
    pub model: &'a mut Model,
    opt: Adam,
    /// Noise stream for posterior samples, gate noise, and dropout; seeded
    /// apart from the init stream so reseeding one does not replay the other.
    rng: ChaCha8Rng,
    step: usize,
    total_steps: usize,
    pub diag: GateDiagnostics,
}

/// Deterministic article-level split into (train, dev).
pub fn split_dataset(dataset: &Dataset, dev_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_dev = (dataset.len() as f64 * dev_fraction).floor() as usize;
    let (dev_idx, train_idx) = idx.split_at(n_dev);
    let pick = |ids: &[usize]| Dataset {
        articles: ids.iter().map(|&i| dataset.articles[i].clone()).collect(),
    };
    (pick(train_idx), pick(dev_idx))
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut Model, total_steps: usize) -> Self {
        let opt = Adam::new(&model.store, model.cfg.learning_rate);
        let rng = ChaCha8Rng::seed_from_u64(model.cfg.seed.wrapping_add(0x5eed));
        Trainer {
            model,
            opt,
            rng,
            step: 0,
            total_steps,
            diag: GateDiagnostics::default(),
        }
    }

    pub fn tau(&self) -> f64 {
        let c = &self.model.cfg;
        saliency::tau_at(
            self.step,
            self.total_steps.max(1),
            c.tau_start,
            c.tau_end,
            c.tau_anneal_frac,
        )
    }

    /// Runs one batch: builds a graph per instance, averages gradients,
    /// clamps them elementwise, and applies one Adam update.
    pub fn train_step(&mut self, batch: &Batch) -> Result<StepRecord> {
        let tau = self.tau();
        let b = batch.len() as f64;
        let mut grads = GradStore::zeros_like(&self.model.store);
        let mut sums = ComponentSums::default();

        for r in 0..batch.len() {
            let (title, body, comment) = batch.row_unpadded(r);
            let latent = self.model.cfg.latent_dim;
            let vgc_eps = self.model.topic.as_ref().map(|_| {
                (0..latent)
                    .map(|_| StandardNormal.sample(&mut self.rng))
                    .collect::<Vec<f64>>()
            });
            let gumbel = self
                .model
                .gate
                .as_ref()
                .map(|_| saliency::sample_gumbel_pairs(&mut self.rng, body.len()));
            let dropout = (self.model.cfg.dropout > 0.0)
                .then_some((self.model.cfg.dropout, &mut self.rng));
            let noise = InstanceNoise {
                vgc_eps,
                gumbel,
                dropout,
            };
            let mut g = Graph::new();
            let fwd = fusion::instance_loss(
                &mut g, self.model, title, body, comment, tau, noise, &mut self.diag,
            );
            sums.add(&g, &fwd.losses);
            g.backward(fwd.losses.total, 1.0 / b, &mut grads);
        }

        let record = sums.record(self.step, b, tau);
        if !record.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                total: record.total,
                ce: record.ce.unwrap_or(f64::NAN),
                elbo: record.elbo.unwrap_or(f64::NAN),
                sal: record.sal.unwrap_or(f64::NAN),
                top: record.top.unwrap_or(f64::NAN),
            });
        }

        grads.clamp(self.model.cfg.grad_clamp);
        self.opt.update(&mut self.model.store, &grads);
        self.step += 1;
        Ok(record)
    }

    /// Mean eval-mode loss over a dataset (posterior means, no gate
    /// sampling, no dropout).
    pub fn eval_loss(&mut self, dataset: &Dataset) -> f64 {
        eval_loss(self.model, dataset, &mut self.diag)
    }
}

/// Deterministic total-loss evaluation used for the dev plateau check.
pub fn eval_loss(model: &Model, dataset: &Dataset, diag: &mut GateDiagnostics) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for article in &dataset.articles {
        for comment in &article.comments {
            let mut g = Graph::new();
            let fwd = fusion::instance_loss(
                &mut g,
                model,
                &article.title,
                &article.body,
                comment,
                model.cfg.tau_end,
                InstanceNoise::eval(),
                diag,
            );
            sum += g.scalar_value(fwd.losses.total);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Default)]
struct ComponentSums {
    total: f64,
    ce: Option<f64>,
    elbo: Option<f64>,
    sal: Option<f64>,
    top: Option<f64>,
    beta: Option<f64>,
}

impl ComponentSums {
    fn add(&mut self, g: &Graph, l: &fusion::InstanceLosses) {
        let acc = |slot: &mut Option<f64>, v: Option<f64>| {
            if let Some(v) = v {
                *slot = Some(slot.unwrap_or(0.0) + v);
            }
        };
        self.total += g.scalar_value(l.total);
        acc(&mut self.ce, l.ce.map(|v| g.scalar_value(v)));
        acc(&mut self.elbo, l.elbo.map(|v| g.scalar_value(v)));
        acc(&mut self.sal, l.sal.map(|v| g.scalar_value(v)));
        acc(&mut self.top, l.top.map(|v| g.scalar_value(v)));
        acc(&mut self.beta, l.mean_beta);
    }

    fn record(&self, step: usize, b: f64, tau: f64) -> StepRecord {
        StepRecord {
            step,
            total: self.total / b,
            ce: self.ce.map(|v| v / b),
            elbo: self.elbo.map(|v| v / b),
            sal: self.sal.map(|v| v / b),
            top: self.top.map(|v| v / b),
            mean_beta: self.beta.map(|v| v / b),
            tau,
        }
    }
}

/// Trains to completion: epochs of shuffled batches with per-step logging,
/// stopping early once the dev loss has not improved for `patience` epochs.
pub fn train(
    model: &mut Model,
    dataset: &Dataset,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainReport> {
    if dataset.n_pairs() == 0 {
        return Err(Error::Ingestion("training dataset has no comments".into()));
    }
    let cfg = model.cfg.clone();
    let (train_ds, dev_ds) = split_dataset(dataset, cfg.dev_fraction, cfg.seed);
    let (train_ds, dev_ds) = if train_ds.n_pairs() == 0 {
        // Degenerate split (tiny corpus): train on everything.
        (dataset.clone(), Dataset::default())
    } else {
        (train_ds, dev_ds)
    };
    let batches_per_epoch = train_ds.n_pairs().div_ceil(cfg.batch_size);
    let total_steps = batches_per_epoch * cfg.epochs;

    let mut trainer = Trainer::new(model, total_steps);
    let mut report = TrainReport::default();
    let mut best_dev = f64::INFINITY;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        let shuffle_seed = cfg.seed.wrapping_add(1 + epoch as u64);
        let batches: Vec<Batch> =
            batch_iter(&train_ds, cfg.batch_size, shuffle_seed).collect();
        for batch in &batches {
            let rec = trainer.train_step(batch)?;
            epoch_loss += rec.total;
            n_batches += 1;
            if let Some(w) = log.as_deref_mut() {
                serde_json::to_writer(&mut *w, &rec)
                    .map_err(|e| Error::Ingestion(e.to_string()))?;
                writeln!(w)?;
            }
        }
        report.steps_run = trainer.step;
        report.epochs_run = epoch + 1;
        report.epoch_losses.push(epoch_loss / n_batches.max(1) as f64);

        if dev_ds.n_pairs() > 0 {
            let dev = trainer.eval_loss(&dev_ds);
            report.dev_losses.push(dev);
            if dev < best_dev - 1e-9 {
                best_dev = dev;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    report.stopped_early = true;
                    break;
                }
            }
        }
    }
    report.attention_fallbacks = trainer.diag.attention_fallbacks;
    Ok(report)
}
