use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::substream;
use crate::tensor::{adam_step, AdamConfig, AdamState, Tensor};

/// Mini-batch Adam schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub shuffle: bool,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            learning_rate,
            batch_size,
            seed,
            shuffle: true,
        }
    }

    pub fn validate(&self, samples: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > samples {
            return Err(Error::Config(format!(
                "batch size {} must be in [1, {samples}]",
                self.batch_size
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean per-sample loss and wall time of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub seconds: f64,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// Loss and parameter gradients for one batch of sample indices.
pub(crate) trait Objective {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f32>>;
    fn params(&self) -> Vec<&Tensor<f32>>;
    fn batch(&self, indices: &[usize]) -> Result<(f64, Vec<Tensor<f32>>)>;
}

/// Shuffled mini-batch Adam over `n` samples. Batch order comes from
/// substream 1 of the seed, so it is independent of weight initialization.
pub(crate) fn fit(model: &mut impl Objective, n: usize, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate(n)?;
    let start = Instant::now();
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.learning_rate), model.params())?;
    let mut rng = substream(cfg.seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let diagnose = |detail: String, model: &dyn Objective| Error::Training {
                epoch,
                batch: b,
                detail: format!(
                    "{detail}; parameter norms {:?}",
                    model.params().iter().map(|p| p.norm()).collect::<Vec<_>>()
                ),
            };
            let (loss, grads) = model.batch(idx)?;
            if !loss.is_finite() {
                return Err(diagnose(format!("loss is {loss}"), model));
            }
            let grad_refs: Vec<&Tensor<f32>> = grads.iter().collect();
            if let Err(e) = adam_step(&mut model.params_mut(), &grad_refs, &mut adam) {
                return Err(diagnose(e.to_string(), model));
            }
            total += loss * idx.len() as f64;
        }
        let epoch_loss = total / n as f64;
        if epoch % 100 == 0 || epoch + 1 == cfg.epochs {
            log::debug!("epoch {epoch}: loss {epoch_loss:.6e}");
        }
        history.push(epoch_loss);
    }
    Ok(TrainReport {
        loss_history: history,
        seconds: start.elapsed().as_secs_f64(),
    })
}
