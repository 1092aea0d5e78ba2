//! Training loop (Adam, exponential LR decay, early stopping) and
//! per-category precision/recall evaluation.

mod metrics;

pub use metrics::{evaluate, precision_recall, ClassMetrics, ConfusionMatrix, EvalReport};

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{decode, Category, Checkpoint, ModelConfig, Mstcn, TrainingMetadata};
use crate::sim::LabeledSample;
use crate::tensorcore::{adam_step, exp_lr_schedule, AdamState};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without a strictly lower validation loss before stopping.
    pub patience: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Windows per Adam step.
    pub batch_size: usize,
    pub window_seconds: f64,
    /// Stride between training-window starts.
    pub window_hop_seconds: f64,
    /// When set, each epoch shifts the window grid by a random multiple of
    /// this step below one hop.
    pub jitter_step_seconds: Option<f64>,
    /// Stop once validation window accuracy reaches this fraction.
    pub target_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            patience: 10,
            lr_start: 1e-5,
            lr_end: 1e-8,
            batch_size: 32,
            window_seconds: 3.0,
            window_hop_seconds: 0.5,
            jitter_step_seconds: None,
            target_accuracy: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.patience >= self.epochs {
            return bad(format!(
                "patience {} must be below epochs {}",
                self.patience, self.epochs
            ));
        }
        if !(self.lr_start > 0.0
            && self.lr_end > 0.0
            && self.lr_start.is_finite()
            && self.lr_end.is_finite())
        {
            return bad(format!(
                "learning rates must be positive, got {} and {}",
                self.lr_start, self.lr_end
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return bad(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            ));
        }
        if !(self.window_hop_seconds > 0.0 && self.window_hop_seconds.is_finite()) {
            return bad(format!(
                "window_hop_seconds must be positive, got {}",
                self.window_hop_seconds
            ));
        }
        if let Some(j) = self.jitter_step_seconds {
            if !(j > 0.0 && j <= self.window_hop_seconds) {
                return bad(format!(
                    "jitter_step_seconds must lie in (0, window_hop_seconds], got {j}"
                ));
            }
        }
        if let Some(a) = self.target_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("target_accuracy must lie in [0, 1], got {a}"));
            }
        }
        Ok(())
    }
}

/// Multi-label target `[assistant, expert]` of a category.
pub fn target_of(category: Category) -> [f32; 2] {
    [
        category.assistant() as u8 as f32,
        category.expert() as u8 as f32,
    ]
}

/// Target for the window centred at `center_time`; a centre on a boundary
/// takes the later segment.
pub fn window_label(sample: &LabeledSample, center_time: f64) -> Result<[f32; 2]> {
    let index = (center_time * sample.sample_rate as f64).round();
    if !(center_time >= 0.0 && index < sample.audio.len() as f64) {
        return Err(Error::Invalid(format!(
            "window centre {center_time} s lies outside the {:.3} s sample",
            sample.duration()
        )));
    }
    sample
        .category_at(index as usize)
        .map(target_of)
        .ok_or_else(|| Error::Invalid(format!("no segment covers {center_time} s")))
}

/// One training window: `window` samples of `samples[sample]` from `start`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingWindow {
    pub sample: usize,
    pub start: usize,
    pub category: Category,
}

/// Windows starting at `offset + k·hop` that fit in each sample, labelled
/// by their centre sample.
pub fn window_grid(
    samples: &[LabeledSample],
    window: usize,
    hop: usize,
    offset: usize,
) -> Result<Vec<TrainingWindow>> {
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let mut start = offset;
        while start + window <= s.audio.len() {
            let category = s.category_at(start + window / 2).ok_or_else(|| {
                Error::Invalid(format!(
                    "sample {i}: no segment covers sample {}",
                    start + window / 2
                ))
            })?;
            out.push(TrainingWindow {
                sample: i,
                start,
                category,
            });
            start += hop;
        }
    }
    Ok(out)
}

fn bce(probs: [f32; 2], target: [f32; 2]) -> f64 {
    probs
        .iter()
        .zip(target)
        .map(|(&p, y)| {
            let p = crate::tensorcore::clamp_probability(p as f64);
            let y = y as f64;
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

/// Mean loss and decision accuracy over `windows`.
pub fn window_metrics(
    model: &Mstcn<f32>,
    samples: &[LabeledSample],
    windows: &[TrainingWindow],
    window: usize,
) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::Training("no windows to score".into()));
    }
    let scored: Vec<(f64, bool)> = windows
        .par_iter()
        .map(|w| {
            let probs = model.predict(&samples[w.sample].audio[w.start..w.start + window])?;
            let hit = decode(probs, model.config().threshold) == w.category;
            Ok((bce(probs, target_of(w.category)), hit))
        })
        .collect::<Result<_>>()?;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
    let acc = scored.iter().filter(|s| s.1).count() as f64 / scored.len() as f64;
    Ok((loss, acc))
}

/// One Adam step on the mean summed cross-entropy of `batch`. Returns each
/// window's loss before the update.
pub fn batch_step(
    model: &mut Mstcn<f32>,
    adam: &mut AdamState<f32>,
    batch: &[(&[f32], [f32; 2])],
    lr: f32,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let frozen = &*model;
    let results: Vec<(f64, Vec<Option<Vec<f32>>>)> = batch
        .par_iter()
        .map(|(audio, target)| {
            let mut s = frozen.session();
            let probs = s.forward(audio)?;
            let loss = s.loss(probs, target)?;
            let value = s.value(loss).values()[0] as f64;
            Ok((value, s.param_grads(loss)?))
        })
        .collect::<Result<_>>()?;
    let losses: Vec<f64> = results.iter().map(|r| r.0).collect();
    if let Some((i, l)) = losses.iter().enumerate().find(|(_, l)| !l.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite loss {l} on batch window {i}"
        )));
    }
    let mut sum: Vec<Option<Vec<f32>>> = vec![None; model.params().len()];
    for (_, grads) in results {
        for (acc, g) in sum.iter_mut().zip(grads) {
            match (acc.as_mut(), g) {
                (Some(a), Some(g)) => a.iter_mut().zip(&g).for_each(|(a, g)| *a += g),
                (None, Some(g)) => *acc = Some(g),
                _ => {}
            }
        }
    }
    let scale = 1.0 / batch.len() as f32;
    for (p, g) in model.params_mut().iter_mut().zip(sum) {
        match g {
            Some(mut g) => {
                g.iter_mut().for_each(|v| *v *= scale);
                p.set_grad(g)?;
            }
            None => p.zero_grad(),
        }
    }
    adam_step(model.params_mut(), adam, lr)?;
    Ok(losses)
}

/// Stops after `patience` consecutive epochs without a strictly lower
/// validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch's validation loss; true when it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        match self.best {
            Some((_, best)) if loss >= best => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochLimit,
    Patience,
    TargetAccuracy,
}

pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
}

/// `epoch,train_loss,valid_loss,lr` lines.
pub fn history_text(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,valid_loss,lr\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{:.9},{:.9},{:e}",
            r.epoch, r.train_loss, r.valid_loss, r.lr
        );
    }
    out
}

pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, history_text(history)).map_err(|e| Error::io(path, e))
}

fn check_rates(config: &ModelConfig, sets: &[&[LabeledSample]]) -> Result<()> {
    for s in sets.iter().flat_map(|s| s.iter()) {
        if s.sample_rate != config.sample_rate {
            return Err(Error::SampleRate {
                expected: config.sample_rate,
                found: s.sample_rate,
            });
        }
    }
    Ok(())
}

/// Trains a freshly initialised model. `on_epoch` sees each finished epoch.
pub fn train(
    model_config: &ModelConfig,
    config: &TrainConfig,
    train_set: &[LabeledSample],
    valid_set: &[LabeledSample],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    model_config.validate()?;
    config.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Training(format!(
            "need training and validation samples, got {} and {}",
            train_set.len(),
            valid_set.len()
        )));
    }
    check_rates(model_config, &[train_set, valid_set])?;
    let sr = model_config.sample_rate as f64;
    let window = (config.window_seconds * sr).round() as usize;
    let hop = ((config.window_hop_seconds * sr).round() as usize).max(1);
    let valid_windows = window_grid(valid_set, window, hop, 0)?;
    if valid_windows.is_empty() || window_grid(train_set, window, hop, 0)?.is_empty() {
        return Err(Error::Training(format!(
            "samples are shorter than the {} s window",
            config.window_seconds
        )));
    }

    let mut model = Mstcn::<f32>::new(model_config.clone(), config.seed)?;
    let mut adam = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut stop = StopReason::EpochLimit;

    for epoch in 0..config.epochs {
        let lr = exp_lr_schedule(epoch, config.epochs, config.lr_start, config.lr_end);
        let offset = match config.jitter_step_seconds {
            Some(step) => {
                let step = ((step * sr).round() as usize).max(1);
                rng.gen_range(0..hop.div_ceil(step)) * step
            }
            None => 0,
        };
        let mut windows = window_grid(train_set, window, hop, offset)?;
        if windows.is_empty() {
            windows = window_grid(train_set, window, hop, 0)?;
        }
        windows.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in windows.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[f32], [f32; 2])> = chunk
                .iter()
                .map(|w| {
                    (
                        &train_set[w.sample].audio[w.start..w.start + window],
                        target_of(w.category),
                    )
                })
                .collect();
            let losses =
                batch_step(&mut model, &mut adam, &batch, lr as f32).map_err(|e| match e {
                    Error::Training(m) => {
                        Error::Training(format!("epoch {epoch}, batch {b} (lr {lr:e}): {m}"))
                    }
                    other => other,
                })?;
            total += losses.iter().sum::<f64>();
        }
        let (valid_loss, valid_accuracy) =
            window_metrics(&model, valid_set, &valid_windows, window)?;
        if !valid_loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / windows.len() as f64,
            valid_loss,
            valid_accuracy,
            lr,
        };
        on_epoch(&record);
        history.push(record);
        if stopper.observe(epoch, valid_loss) {
            best = model.clone();
        }
        if config.target_accuracy.is_some_and(|t| valid_accuracy >= t) {
            // The target is met by the current weights, whatever the loss.
            best = model.clone();
            stop = StopReason::TargetAccuracy;
            break;
        }
        if stopper.should_stop() {
            stop = StopReason::Patience;
            break;
        }
    }

    let (best_epoch, best_loss) = match stop {
        StopReason::TargetAccuracy => {
            let last = history.last().expect("at least one epoch");
            (last.epoch, last.valid_loss)
        }
        _ => stopper.best().expect("at least one epoch"),
    };
    let metadata = TrainingMetadata {
        seed: config.seed,
        epochs_run: history.len(),
        best_epoch: Some(best_epoch),
        best_valid_loss: Some(best_loss),
        note: format!("stopped: {stop:?}"),
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(best, metadata),
        history,
        stop,
    })
}
