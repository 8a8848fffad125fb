//! Seeded minibatch training with Adam, plus the flat key-value run
//! configuration shared by the CLI.

use serde::{Deserialize, Serialize};

use super::model::{batch_loss, draw_batch_noise, init_denoiser_params, prepare_instance};
use super::schedule::{NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T};
use super::DiffusionError;
use crate::datagen::Instance;
use crate::encoder::{ModelConfig, TextEncoder};
use crate::nn::{gradients, AdamConfig, Binder, Checkpoint, Graph, ParameterStore};
use crate::rng::derive_rng;
use crate::scene::DEFAULT_DELTA;

/// Every run knob in one flat struct; the on-disk form is `key = value`
/// lines. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub t_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub model_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    pub n_points: usize,
    pub seed: u64,
    pub half_x: f64,
    pub half_y: f64,
    pub delta: f64,
    pub strict_paper_update: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // desk-scale defaults; reference-scale values are epochs=200,
        // batch=256
        TrainConfig {
            t_steps: DEFAULT_T,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            epochs: 50,
            batch: 64,
            lr: 1e-4,
            model_dim: 128,
            blocks: 4,
            heads: 4,
            n_points: 256,
            seed: 0,
            half_x: 0.5,
            half_y: 0.5,
            delta: DEFAULT_DELTA,
            strict_paper_update: false,
        }
    }
}

impl TrainConfig {
    /// Parses `key = value` lines; `#` starts a comment. Every key is
    /// optional, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, DiffusionError> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(lineno, raw, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "T" => cfg.t_steps = parse_num(lineno, raw, value)?,
                "beta_start" => cfg.beta_start = parse_num(lineno, raw, value)?,
                "beta_end" => cfg.beta_end = parse_num(lineno, raw, value)?,
                "epochs" => cfg.epochs = parse_num(lineno, raw, value)?,
                "batch" => cfg.batch = parse_num(lineno, raw, value)?,
                "lr" => cfg.lr = parse_num(lineno, raw, value)?,
                "model_dim" => cfg.model_dim = parse_num(lineno, raw, value)?,
                "blocks" => cfg.blocks = parse_num(lineno, raw, value)?,
                "heads" => cfg.heads = parse_num(lineno, raw, value)?,
                "n_points" => cfg.n_points = parse_num(lineno, raw, value)?,
                "seed" => cfg.seed = parse_num(lineno, raw, value)?,
                "half_x" => cfg.half_x = parse_num(lineno, raw, value)?,
                "half_y" => cfg.half_y = parse_num(lineno, raw, value)?,
                "delta" => cfg.delta = parse_num(lineno, raw, value)?,
                "strict_paper_update" => {
                    cfg.strict_paper_update = parse_num(lineno, raw, value)?
                }
                _ => return Err(bad(lineno, raw, "unknown key")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(DiffusionError::BadConfig(msg.to_string()))
            }
        };
        check(self.t_steps >= 1, "T must be >= 1")?;
        check(
            0.0 < self.beta_start && self.beta_start <= self.beta_end && self.beta_end < 1.0,
            "need 0 < beta_start <= beta_end < 1",
        )?;
        check(self.batch >= 1, "batch must be >= 1")?;
        check(self.lr.is_finite() && self.lr >= 0.0, "lr must be finite and >= 0")?;
        check(self.model_dim >= 1 && self.model_dim % (2 * self.heads.max(1)) == 0,
            "model_dim must be a positive multiple of 2*heads")?;
        check(self.blocks >= 1, "blocks must be >= 1")?;
        check(self.half_x > 0.0 && self.half_y > 0.0, "workspace extents must be positive")?;
        check(self.delta > 0.0 && self.delta < 1.0, "delta must be in (0, 1)")?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            model_dim: self.model_dim,
            blocks: self.blocks,
            heads: self.heads,
            n_points: self.n_points,
            init_seed: self.seed,
            ..ModelConfig::default()
        }
    }

    pub fn schedule(&self) -> NoiseSchedule {
        NoiseSchedule::linear(self.t_steps, self.beta_start, self.beta_end)
    }
}

fn bad(lineno: usize, raw: &str, msg: &str) -> DiffusionError {
    DiffusionError::BadConfig(format!("line {}: {msg}: {raw:?}", lineno + 1))
}

fn parse_num<T: std::str::FromStr>(lineno: usize, raw: &str, v: &str) -> Result<T, DiffusionError> {
    v.parse().map_err(|_| bad(lineno, raw, "bad value"))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Runs `cfg.epochs` of seeded shuffled minibatches over the dataset.
/// Noise streams key off the optimizer step count, so resuming from a
/// checkpoint continues the exact run a single longer run would produce.
pub fn train<E: TextEncoder>(
    instances: &[Instance],
    encoder: &E,
    cfg: &TrainConfig,
    resume: Option<Checkpoint>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Checkpoint, TrainReport), DiffusionError> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(DiffusionError::BadConfig("empty dataset".to_string()));
    }
    let model_cfg = cfg.model_config();
    let schedule = cfg.schedule();
    let prepared = instances
        .iter()
        .map(|i| prepare_instance(i, encoder, &model_cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut store = match resume {
        Some(ckpt) => ckpt.store,
        None => {
            let mut s = ParameterStore::new();
            init_denoiser_params(&mut s, &model_cfg);
            s
        }
    };
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };

    let epoch_offset = store.step / steps_per_epoch(instances.len(), cfg.batch);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        let epoch = epoch_offset as usize + e;
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let mut shuffle_rng = derive_rng(cfg.seed, "epoch-shuffle", epoch as u64);
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<_> = chunk.iter().map(|&i| prepared[i].clone()).collect();
            let mut noise_rng = derive_rng(cfg.seed, "batch-noise", store.step);
            let noise = draw_batch_noise(&schedule, &batch, &mut noise_rng)?;
            let loss_fn = |g: &mut Graph, binder: &mut Binder| {
                batch_loss(g, binder, &model_cfg, &batch, &noise)
            };
            let (loss, grads) = gradients(&store, &loss_fn)?;
            if !loss.is_finite() {
                return Err(DiffusionError::NonFiniteLoss { epoch, step: store.step, value: loss });
            }
            store.adam_step(&grads, &adam)?;
            epoch_loss += loss;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        on_epoch(epoch, mean);
        epoch_losses.push(mean);
    }

    let steps = store.step;
    let ckpt = Checkpoint {
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed: cfg.seed,
        store,
    };
    Ok((ckpt, TrainReport { epoch_losses, steps }))
}

fn steps_per_epoch(n: usize, batch: usize) -> u64 {
    (n.div_ceil(batch)) as u64
}
