//! Single-layer LSTM with a scalar output head.
//!
//! Parameters live in one flat vector:
//!
//! ```text
//! gate weights  [4H x (I + H)]  rows: input, forget, output, candidate
//! gate biases   [4H]
//! output weight [H]
//! output bias   [1]
//! ```
//!
//! Inputs are normalized feature rows; the head's output is in normalized
//! count units and is de-normalized by the model's [`Normalizer`].

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::features::{FeatureVector, Normalizer, FEATURES};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::seed::{derive_seed, seeded_rng, TAG_INIT};

pub type Input<T> = [T; FEATURES];

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel<T> {
    hidden: usize,
    context: usize,
    params: Vec<T>,
    normalizer: Normalizer<T>,
}

/// Per-step activations kept for backpropagation.
#[derive(Clone, Debug)]
struct Step<T> {
    /// `[x_t; h_{t-1}]`
    concat: Vec<T>,
    input: Vec<T>,
    forget: Vec<T>,
    output: Vec<T>,
    candidate: Vec<T>,
    cell_prev: Vec<T>,
    cell_tanh: Vec<T>,
}

/// Result of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    /// Head output in normalized units.
    pub normalized: T,
    /// De-normalized prediction, vehicles.
    pub prediction: T,
    pub hidden: Vec<T>,
    pub cell: Vec<T>,
    steps: Vec<Step<T>>,
}

impl<T: Real> LstmModel<T> {
    pub const INPUT_DIM: usize = FEATURES;

    pub fn param_count(hidden: usize) -> usize {
        4 * hidden * (FEATURES + hidden) + 4 * hidden + hidden + 1
    }

    /// All-zero parameters.
    pub fn zeros(hidden: usize, context: usize, normalizer: Normalizer<T>) -> Self {
        Self {
            hidden,
            context,
            params: vec![T::zero(); Self::param_count(hidden)],
            normalizer,
        }
    }

    /// Uniform `±1/sqrt(H)` weights, forget-gate bias 1, everything else 0.
    pub fn init(hidden: usize, context: usize, normalizer: Normalizer<T>, seed: u64) -> Self {
        let mut model = Self::zeros(hidden, context, normalizer);
        let scale = 1.0 / (hidden as f64).sqrt();
        Self::randomize(&mut model, scale, seed);
        let h = hidden;
        let bias = model.bias_offset();
        for k in h..2 * h {
            model.params[bias + k] = T::one();
        }
        model
    }

    /// Every parameter uniform in `±scale`.
    pub fn random(
        hidden: usize,
        context: usize,
        normalizer: Normalizer<T>,
        scale: f64,
        seed: u64,
    ) -> Self {
        let mut model = Self::zeros(hidden, context, normalizer);
        Self::randomize(&mut model, scale, seed);
        model
    }

    fn randomize(model: &mut Self, scale: f64, seed: u64) {
        let mut rng = seeded_rng(derive_seed(seed, TAG_INIT, model.hidden as u64));
        let dist = Uniform::new_inclusive(-scale, scale).expect("finite scale");
        for p in model.params.iter_mut() {
            *p = T::lit(dist.sample(&mut rng));
        }
    }

    /// Rebuilds a model from its flat parameter vector.
    pub fn from_parts(
        hidden: usize,
        context: usize,
        params: Vec<T>,
        normalizer: Normalizer<T>,
    ) -> Result<Self> {
        if hidden == 0 || context == 0 {
            return Err(Error::Model(
                "hidden size and context must be positive".into(),
            ));
        }
        if params.len() != Self::param_count(hidden) {
            return Err(Error::Model(format!(
                "expected {} parameters for hidden size {hidden}, got {}",
                Self::param_count(hidden),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Model("non-finite parameter".into()));
        }
        normalizer.validate()?;
        Ok(Self {
            hidden,
            context,
            params,
            normalizer,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.normalizer
    }

    fn width(&self) -> usize {
        FEATURES + self.hidden
    }

    fn bias_offset(&self) -> usize {
        4 * self.hidden * self.width()
    }

    fn head_offset(&self) -> usize {
        self.bias_offset() + 4 * self.hidden
    }

    pub fn gate_weights(&self) -> &[T] {
        &self.params[..self.bias_offset()]
    }

    pub fn gate_biases(&self) -> &[T] {
        &self.params[self.bias_offset()..self.head_offset()]
    }

    pub fn output_weights(&self) -> &[T] {
        &self.params[self.head_offset()..self.head_offset() + self.hidden]
    }

    pub fn output_bias(&self) -> T {
        self.params[self.params.len() - 1]
    }

    pub fn set_output_bias(&mut self, b: T) {
        let last = self.params.len() - 1;
        self.params[last] = b;
    }

    /// Forward pass over raw feature vectors.
    pub fn forward(&self, sequence: &[FeatureVector]) -> Result<Forward<T>> {
        let inputs: Vec<Input<T>> = sequence
            .iter()
            .map(|f| self.normalizer.normalize(f))
            .collect();
        self.forward_normalized(&inputs)
    }

    /// Forward pass over normalized inputs.
    pub fn forward_normalized(&self, inputs: &[Input<T>]) -> Result<Forward<T>> {
        let fwd = self.forward_unchecked(inputs)?;
        if !fwd.normalized.is_finite() {
            return Err(Error::Model("non-finite output".into()));
        }
        Ok(fwd)
    }

    /// Forward pass that lets a non-finite output through, for training.
    fn forward_unchecked(&self, inputs: &[Input<T>]) -> Result<Forward<T>> {
        if inputs.is_empty() {
            return Err(Error::Model("empty input sequence".into()));
        }
        let h = self.hidden;
        let width = self.width();
        let weights = self.gate_weights();
        let biases = self.gate_biases();
        let mut hidden = vec![T::zero(); h];
        let mut cell = vec![T::zero(); h];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut z = vec![T::zero(); 4 * h];

        for x in inputs {
            let mut concat = Vec::with_capacity(width);
            concat.extend_from_slice(x);
            concat.extend_from_slice(&hidden);
            for (row, zr) in z.iter_mut().enumerate() {
                let w = &weights[row * width..(row + 1) * width];
                *zr = biases[row] + w.iter().zip(&concat).map(|(a, b)| *a * *b).sum::<T>();
            }
            let input: Vec<T> = z[..h].iter().map(|v| sigmoid(*v)).collect();
            let forget: Vec<T> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
            let output: Vec<T> = z[2 * h..3 * h].iter().map(|v| sigmoid(*v)).collect();
            let candidate: Vec<T> = z[3 * h..].iter().map(|v| v.tanh()).collect();
            let cell_prev = cell.clone();
            for k in 0..h {
                cell[k] = forget[k] * cell_prev[k] + input[k] * candidate[k];
            }
            let cell_tanh: Vec<T> = cell.iter().map(|c| c.tanh()).collect();
            for k in 0..h {
                hidden[k] = output[k] * cell_tanh[k];
            }
            steps.push(Step {
                concat,
                input,
                forget,
                output,
                candidate,
                cell_prev,
                cell_tanh,
            });
        }

        let normalized = self.output_bias()
            + self
                .output_weights()
                .iter()
                .zip(&hidden)
                .map(|(w, v)| *w * *v)
                .sum::<T>();
        Ok(Forward {
            normalized,
            prediction: self.normalizer.denormalize_target(normalized),
            hidden,
            cell,
            steps,
        })
    }

    /// Gradient of a loss with `d loss / d output = d_output` with respect to
    /// every parameter, by backpropagation through time. Accumulates into `grad`.
    pub fn backward(&self, fwd: &Forward<T>, d_output: T, grad: &mut [T]) {
        let h = self.hidden;
        let width = self.width();
        let weights = self.gate_weights();
        let (bias_off, head_off) = (self.bias_offset(), self.head_offset());
        let last = self.params.len() - 1;

        grad[last] += d_output;
        let mut dh: Vec<T> = self
            .output_weights()
            .iter()
            .map(|w| *w * d_output)
            .collect();
        for k in 0..h {
            grad[head_off + k] += fwd.hidden[k] * d_output;
        }
        let mut dc = vec![T::zero(); h];
        let mut dz = vec![T::zero(); 4 * h];

        for step in fwd.steps.iter().rev() {
            for k in 0..h {
                let (i, f, o, g) = (
                    step.input[k],
                    step.forget[k],
                    step.output[k],
                    step.candidate[k],
                );
                let tc = step.cell_tanh[k];
                dc[k] += dh[k] * o * (T::one() - tc * tc);
                let d_o = dh[k] * tc;
                let d_i = dc[k] * g;
                let d_g = dc[k] * i;
                let d_f = dc[k] * step.cell_prev[k];
                dz[k] = d_i * i * (T::one() - i);
                dz[h + k] = d_f * f * (T::one() - f);
                dz[2 * h + k] = d_o * o * (T::one() - o);
                dz[3 * h + k] = d_g * (T::one() - g * g);
                dc[k] *= f;
            }
            let mut d_concat = vec![T::zero(); width];
            for (row, dzr) in dz.iter().enumerate() {
                if *dzr == T::zero() {
                    continue;
                }
                grad[bias_off + row] += *dzr;
                let w = &weights[row * width..(row + 1) * width];
                let gw = &mut grad[row * width..(row + 1) * width];
                for c in 0..width {
                    gw[c] += *dzr * step.concat[c];
                    d_concat[c] += *dzr * w[c];
                }
            }
            dh.copy_from_slice(&d_concat[FEATURES..]);
        }
    }

    /// Squared error in normalized units and its gradient.
    pub fn loss_and_gradient(&self, inputs: &[Input<T>], target: T) -> Result<(T, Vec<T>)> {
        let fwd = self.forward_unchecked(inputs)?;
        let err = fwd.normalized - target;
        let mut grad = vec![T::zero(); self.params.len()];
        self.backward(&fwd, T::lit(2.0) * err, &mut grad);
        Ok((err * err, grad))
    }

    pub fn loss(&self, inputs: &[Input<T>], target: T) -> Result<T> {
        let y = self.forward_unchecked(inputs)?.normalized;
        Ok((y - target) * (y - target))
    }
}

/// Step for central finite differences.
pub const FD_STEP: f64 = 1e-5;
/// Below this magnitude gradients are compared by absolute error.
pub const FD_ABS_FLOOR: f64 = 1e-8;

/// Largest disagreement between backpropagated and central-difference
/// gradients over all parameters, for the squared-error loss of one sample.
///
/// Relative error `|a - n| / max(|a|, |n|)`, falling back to `|a - n|` when
/// both are below [`FD_ABS_FLOOR`].
pub fn gradient_check<T: Real>(
    model: &LstmModel<T>,
    inputs: &[Input<T>],
    target: T,
) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradient(inputs, target)?;
    let mut probe = model.clone();
    let step = T::lit(FD_STEP);
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = probe.params[k];
        probe.params[k] = orig + step;
        let up = probe.loss(inputs, target)?;
        probe.params[k] = orig - step;
        let down = probe.loss(inputs, target)?;
        probe.params[k] = orig;
        let numeric = ((up - down) / (T::lit(2.0) * step)).to_f64_lossy();
        let a = a.to_f64_lossy();
        let scale = a.abs().max(numeric.abs());
        let err = if scale < FD_ABS_FLOOR {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / scale
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Random normalized sequence, for checks and benchmarks.
pub fn random_inputs<T: Real, R: Rng>(rng: &mut R, len: usize) -> Vec<Input<T>> {
    (0..len)
        .map(|_| std::array::from_fn(|_| T::lit(rng.random::<f64>())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::features::Normalizer;

    fn unit_norm() -> Normalizer<f64> {
        Normalizer::identity()
    }

    #[test]
    fn zero_model_emits_output_bias() {
        let mut norm = unit_norm();
        norm.target_min = 10.0;
        norm.target_max = 30.0;
        let mut m = LstmModel::zeros(3, 4, norm);
        m.set_output_bias(0.25);
        let fwd = m.forward_normalized(&[[0.3; 6], [0.9; 6]]).unwrap();
        assert_eq!(fwd.cell, vec![0.0; 3]);
        assert_eq!(fwd.hidden, vec![0.0; 3]);
        assert_eq!(fwd.steps[0].input, vec![0.5; 3]);
        assert_eq!(fwd.steps[1].forget, vec![0.5; 3]);
        assert_eq!(fwd.steps[1].candidate, vec![0.0; 3]);
        assert_eq!(fwd.prediction, 15.0);
    }

    #[test]
    fn scalar_cell_matches_hand_evaluation() {
        // H = 1, one step, only feature 0 and the biases are non-zero.
        let mut m = LstmModel::zeros(1, 1, unit_norm());
        let width = 7;
        let (wi, wf, wo, wg) = (0.5, -0.3, 0.8, 1.2);
        let (bi, bf, bo, bg) = (0.1, 0.2, -0.1, 0.05);
        let p = m.params_mut();
        p[0] = wi;
        p[width] = wf;
        p[2 * width] = wo;
        p[3 * width] = wg;
        p[4 * width] = bi;
        p[4 * width + 1] = bf;
        p[4 * width + 2] = bo;
        p[4 * width + 3] = bg;
        p[4 * width + 4] = 2.0;
        p[4 * width + 5] = -0.5;
        let x = 0.7;
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(wi * x + bi);
        let o = s(wo * x + bo);
        let g = (wg * x + bg).tanh();
        let c = i * g; // previous cell is zero, the forget gate has no effect
        let h = o * c.tanh();
        let expected = 2.0 * h - 0.5;
        let mut input = [0.0; 6];
        input[0] = x;
        let got = m.forward_normalized(&[input]).unwrap().normalized;
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(1);
        for seed in 0..5 {
            let m = LstmModel::random(4, 5, unit_norm(), 0.5, seed);
            let xs = random_inputs::<f64, _>(&mut rng, 5);
            let err = gradient_check(&m, &xs, 0.3).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
            assert_eq!(err, gradient_check(&m, &xs, 0.3).unwrap());
        }
    }

    #[test]
    fn output_bias_gradient_is_exact() {
        // d loss / d b_out = 2 (y - target) regardless of the recurrence.
        let m = LstmModel::random(4, 3, unit_norm(), 0.5, 3);
        let xs = [[0.2; 6], [0.4; 6]];
        let y = m.forward_normalized(&xs).unwrap().normalized;
        let (_, g) = m.loss_and_gradient(&xs, y).unwrap();
        assert_eq!(*g.last().unwrap(), 0.0);
        assert!(gradient_check(&m, &xs, y).unwrap() < 1e-4);
    }

    #[test]
    fn parts_are_checked() {
        assert!(LstmModel::<f64>::from_parts(2, 3, vec![0.0; 5], unit_norm()).is_err());
        let n = LstmModel::<f64>::param_count(2);
        let mut p = vec![0.0; n];
        assert!(LstmModel::from_parts(2, 3, p.clone(), unit_norm()).is_ok());
        p[0] = f64::NAN;
        assert!(LstmModel::from_parts(2, 3, p, unit_norm()).is_err());
        let m = LstmModel::<f64>::zeros(2, 3, unit_norm());
        assert!(m.forward_normalized(&[]).is_err());
    }

    #[test]
    fn single_precision_forward() {
        let m = LstmModel::<f32>::init(8, 4, Normalizer::identity(), 5);
        let y = m.forward_normalized(&[[0.5f32; 6]; 4]).unwrap();
        assert!(y.prediction.is_finite());
    }
}
