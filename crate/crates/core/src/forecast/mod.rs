//! Hourly vehicle-count forecaster: feature construction, an LSTM trained by
//! backpropagation through time, autoregressive 12-hour rollout and error
//! statistics.

mod features;
mod lstm;
mod train;

pub use features::{
    build_features, hourly_timestamps, synthetic_seasonal, FeatureVector, HourlySeries, Normalizer,
    FEATURES, TIMESTAMP_FORMAT,
};
pub use lstm::{gradient_check, random_inputs, Forward, Input, LstmModel, FD_ABS_FLOOR, FD_STEP};
pub use train::{fit_forecaster, make_samples, train, ForecasterSpec, Sample, TrainConfig};

use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;

/// Hours predicted by [`predict_horizon`].
pub const HORIZON_HOURS: usize = 12;
pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_CONTEXT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorStats<T> {
    /// Vehicles squared.
    pub mse: T,
    /// Vehicles.
    pub rmse: T,
}

/// Mean squared and root mean squared error of `predictions` against `truth`.
pub fn evaluate<T: Real>(predictions: &[T], truth: &[T]) -> Result<ErrorStats<T>> {
    if predictions.len() != truth.len() || predictions.is_empty() {
        return Err(Error::Argument(format!(
            "{} predictions for {} observations",
            predictions.len(),
            truth.len()
        )));
    }
    let mse = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (*p - *t) * (*p - *t))
        .sum::<T>()
        / T::from_usize_lossy(truth.len());
    Ok(ErrorStats {
        mse,
        rmse: mse.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastResult<T> {
    /// First forecast hour.
    pub start: NaiveDateTime,
    /// Vehicles per hour for `start`, `start + 1h`, ...
    pub predictions: Vec<T>,
    pub errors: Option<ErrorStats<T>>,
}

impl<T: Real> ForecastResult<T> {
    /// Attaches error statistics against observed counts.
    pub fn with_truth(mut self, truth: &[T]) -> Result<Self> {
        self.errors = Some(evaluate(&self.predictions, truth)?);
        Ok(self)
    }
}

/// Rolls the model forward `steps` hours. The last history vector must be the
/// feature vector of `start` (its lagged count is the latest observation);
/// each prediction, clamped at zero, becomes the next hour's lagged count.
pub fn predict_steps<T: Real>(
    model: &LstmModel<T>,
    history: &[FeatureVector],
    start: NaiveDateTime,
    steps: usize,
) -> Result<ForecastResult<T>> {
    let context = model.context();
    if history.len() < context {
        return Err(Error::Argument(format!(
            "history of {} hours is shorter than the {context}-hour context",
            history.len()
        )));
    }
    let last = history.last().expect("non-empty history");
    if !last.same_time(start) {
        return Err(Error::Argument(format!(
            "last history vector is not at the forecast start {start}"
        )));
    }
    let mut window: Vec<FeatureVector> = history[history.len() - context..].to_vec();
    let mut predictions = Vec::with_capacity(steps);
    for k in 0..steps {
        let y = model.forward(&window)?.prediction.max(T::zero());
        predictions.push(y);
        if k + 1 < steps {
            let next = FeatureVector::at(y.to_f64_lossy(), start + Duration::hours(k as i64 + 1));
            window.remove(0);
            window.push(next);
        }
    }
    Ok(ForecastResult {
        start,
        predictions,
        errors: None,
    })
}

/// Twelve-hour autoregressive forecast; see [`predict_steps`].
pub fn predict_horizon<T: Real>(
    model: &LstmModel<T>,
    history: &[FeatureVector],
    start: NaiveDateTime,
) -> Result<ForecastResult<T>> {
    predict_steps(model, history, start, HORIZON_HOURS)
}

/// Persistence baseline: the last observed count, repeated.
pub fn persistence_forecast(last_count: f64, steps: usize) -> Vec<f64> {
    vec![last_count; steps]
}

pub const MODEL_FORMAT: &str = "astm-lstm/1";

/// On-disk model layout. `gate_weights` is row-major `[4H][6 + H]` with gate
/// rows ordered input, forget, output, candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub context: usize,
    pub gate_weights: Vec<f64>,
    pub gate_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub normalization: Normalizer<f64>,
}

impl<T: Real> LstmModel<T> {
    pub fn to_file(&self) -> ModelFile {
        let f = |xs: &[T]| xs.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        let n = self.normalizer();
        ModelFile {
            format: MODEL_FORMAT.into(),
            input_dim: FEATURES,
            hidden_dim: self.hidden_dim(),
            context: self.context(),
            gate_weights: f(self.gate_weights()),
            gate_biases: f(self.gate_biases()),
            output_weights: f(self.output_weights()),
            output_bias: self.output_bias().to_f64_lossy(),
            normalization: Normalizer {
                feature_min: n.feature_min.map(|x| x.to_f64_lossy()),
                feature_max: n.feature_max.map(|x| x.to_f64_lossy()),
                target_min: n.target_min.to_f64_lossy(),
                target_max: n.target_max.to_f64_lossy(),
            },
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unsupported model format {:?}",
                file.format
            )));
        }
        if file.input_dim != FEATURES {
            return Err(Error::Model(format!(
                "input_dim {} != {FEATURES}",
                file.input_dim
            )));
        }
        let h = file.hidden_dim;
        let expect = [
            (
                "gate_weights",
                file.gate_weights.len(),
                4 * h * (FEATURES + h),
            ),
            ("gate_biases", file.gate_biases.len(), 4 * h),
            ("output_weights", file.output_weights.len(), h),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Model(format!(
                    "{name} has {got} values, expected {want}"
                )));
            }
        }
        let params: Vec<T> = file
            .gate_weights
            .iter()
            .chain(&file.gate_biases)
            .chain(&file.output_weights)
            .chain(std::iter::once(&file.output_bias))
            .map(|x| T::lit(*x))
            .collect();
        let n = &file.normalization;
        let normalizer = Normalizer {
            feature_min: n.feature_min.map(T::lit),
            feature_max: n.feature_max.map(T::lit),
            target_min: T::lit(n.target_min),
            target_max: T::lit(n.target_max),
        };
        LstmModel::from_parts(h, file.context, params, normalizer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(Error::from_json)?;
        Self::from_file(&file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2017, 3, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn history(len: usize) -> (Vec<FeatureVector>, NaiveDateTime) {
        let ts = hourly_timestamps(start(), len + 1);
        let counts = vec![5.0; len + 1];
        (build_features(&counts, &ts).unwrap(), ts[len])
    }

    #[test]
    fn evaluate_examples() {
        let e = evaluate(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((e.mse, e.rmse), (0.0, 0.0));
        let e = evaluate(&[3.0], &[5.0]).unwrap();
        assert_eq!((e.mse, e.rmse), (4.0, 2.0));
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn constant_model_rollout() {
        let mut norm = Normalizer::identity();
        norm.target_max = 20.0;
        let mut m = LstmModel::zeros(4, 24, norm);
        m.set_output_bias(0.5);
        let (h, at) = history(30);
        let r = predict_horizon(&m, &h, at).unwrap();
        assert_eq!(r.predictions, vec![10.0; 12]);
        assert_eq!(r.start, at);
    }

    #[test]
    fn rollout_clamps_negative_output() {
        let mut m = LstmModel::zeros(4, 24, Normalizer::identity());
        m.set_output_bias(-3.0);
        let (h, at) = history(24);
        let r = predict_horizon(&m, &h, at).unwrap();
        assert!(r.predictions.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn rollout_preconditions() {
        let m = LstmModel::<f64>::zeros(4, 24, Normalizer::identity());
        let (h, at) = history(23);
        assert!(matches!(
            predict_horizon(&m, &h, at),
            Err(Error::Argument(_))
        ));
        let (h, at) = history(30);
        assert!(predict_horizon(&m, &h, at + Duration::hours(1)).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = LstmModel::<f64>::init(5, 7, Normalizer::identity(), 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        let back = LstmModel::<f64>::load(&p).unwrap();
        assert_eq!(back, m);
        let mut file = m.to_file();
        file.output_weights.pop();
        assert!(LstmModel::<f64>::from_file(&file).is_err());
        file = m.to_file();
        file.input_dim = 5;
        assert!(LstmModel::<f64>::from_file(&file).is_err());
    }

    #[test]
    fn with_truth_attaches_errors() {
        let r = ForecastResult {
            start: start(),
            predictions: vec![3.0, 4.0],
            errors: None,
        }
        .with_truth(&[5.0, 4.0])
        .unwrap();
        let e = r.errors.unwrap();
        assert_eq!(e.mse, 2.0);
    }

    proptest! {
        #[test]
        fn rmse_squared_is_mse(pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let e = evaluate(&p, &t).unwrap();
            prop_assert!((e.rmse * e.rmse - e.mse).abs() <= 1e-9 * e.mse.max(1e-300));
        }
    }
}
