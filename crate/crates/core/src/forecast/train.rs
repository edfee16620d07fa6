use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{HourlySeries, Normalizer};
use super::lstm::{Input, LstmModel};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::seed::{derive_seed, seeded_rng, TAG_TRAINING};

/// A normalized input window and the normalized count that follows it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub inputs: Vec<Input<T>>,
    pub target: T,
}

/// Sliding `context`-hour windows over a series. The window ending at hour
/// `t` (whose last vector carries the count of `t - 1`) targets the count of
/// hour `t`.
pub fn make_samples<T: Real>(
    series: &HourlySeries,
    normalizer: &Normalizer<T>,
    context: usize,
) -> Result<Vec<Sample<T>>> {
    if context == 0 {
        return Err(Error::Argument("context must be positive".into()));
    }
    let features = series.features()?;
    let inputs: Vec<Input<T>> = features.iter().map(|f| normalizer.normalize(f)).collect();
    Ok((context..=inputs.len())
        .map(|end| Sample {
            inputs: inputs[end - context..end].to_vec(),
            target: normalizer.normalize_target(T::lit(series.counts[end])),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Gradients with a larger L2 norm are rescaled to this norm.
    pub clip_norm: f64,
    /// Samples per update; 1 is per-sample descent.
    pub batch_size: usize,
    /// Reshuffle sample order each epoch from this seed; `None` keeps order.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            clip_norm: 5.0,
            batch_size: 1,
            shuffle_seed: None,
        }
    }
}

fn dataset_loss<T: Real>(model: &LstmModel<T>, data: &[Sample<T>]) -> Result<T> {
    let losses = data
        .par_iter()
        .map(|s| model.loss(&s.inputs, s.target))
        .collect::<Result<Vec<T>>>()?;
    Ok(losses.into_iter().sum::<T>() / T::from_usize_lossy(data.len()))
}

/// Gradient descent with norm clipping on the mean squared error in
/// normalized units. Returns the full-dataset loss after each epoch.
pub fn train<T: Real>(
    model: &mut LstmModel<T>,
    data: &[Sample<T>],
    config: &TrainConfig,
) -> Result<Vec<T>> {
    if data.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if !(config.learning_rate >= 0.0) || !(config.clip_norm > 0.0) || config.batch_size == 0 {
        return Err(Error::Argument(
            "learning rate must be >= 0, clip norm > 0 and batch size >= 1".into(),
        ));
    }
    let lr = T::lit(config.learning_rate);
    let clip = T::lit(config.clip_norm);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if let Some(seed) = config.shuffle_seed {
            order.shuffle(&mut seeded_rng(derive_seed(
                seed,
                TAG_TRAINING,
                epoch as u64,
            )));
        }
        for batch in order.chunks(config.batch_size) {
            let grads: Vec<Vec<T>> = if batch.len() == 1 {
                let s = &data[batch[0]];
                vec![model.loss_and_gradient(&s.inputs, s.target)?.1]
            } else {
                let m = &*model;
                batch
                    .par_iter()
                    .map(|&i| {
                        m.loss_and_gradient(&data[i].inputs, data[i].target)
                            .map(|r| r.1)
                    })
                    .collect::<Result<_>>()?
            };
            let mut grad = vec![T::zero(); model.params().len()];
            for g in &grads {
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += *v;
                }
            }
            let scale = T::one() / T::from_usize_lossy(batch.len());
            let norm = grad.iter().map(|g| *g * *g).sum::<T>().sqrt() * scale;
            if !norm.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    loss: f64::NAN,
                });
            }
            let step = if norm > clip {
                lr * scale * clip / norm
            } else {
                lr * scale
            };
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= step * *g;
            }
        }
        let loss = dataset_loss(model, data)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: loss.to_f64_lossy(),
            });
        }
        history.push(loss);
    }
    Ok(history)
}

/// Model size and training schedule for [`fit_forecaster`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecasterSpec {
    pub hidden: usize,
    pub context: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ForecasterSpec {
    fn default() -> Self {
        Self {
            hidden: super::DEFAULT_HIDDEN,
            context: super::DEFAULT_CONTEXT,
            train: TrainConfig {
                epochs: 30,
                learning_rate: 0.01,
                clip_norm: 5.0,
                batch_size: 1,
                shuffle_seed: Some(0),
            },
            seed: 0,
        }
    }
}

/// Fits normalization on all series, then trains a fresh model on their
/// pooled windows.
pub fn fit_forecaster(
    series: &[HourlySeries],
    spec: &ForecasterSpec,
) -> Result<(LstmModel<f64>, Vec<f64>)> {
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for s in series {
        features.extend(s.features()?);
        targets.extend_from_slice(&s.counts[1..]);
    }
    let normalizer = Normalizer::fit(&features, &targets)?;
    let mut samples = Vec::new();
    for s in series {
        samples.extend(make_samples(s, &normalizer, spec.context)?);
    }
    let mut model = LstmModel::init(spec.hidden, spec.context, normalizer, spec.seed);
    let history = train(&mut model, &samples, &spec.train)?;
    Ok((model, history))
}
