use rand::distr::{Distribution, Uniform};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, Scalar};
use crate::rng::Rng;

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `max(x, 0.2 x)`
    LeakyRelu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::LeakyRelu => {
                if x > T::zero() {
                    x
                } else {
                    x * T::of(LEAKY_SLOPE)
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::LeakyRelu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::of(LEAKY_SLOPE)
                }
            }
            Activation::Linear => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    HiddenOnly,
    InputAndHidden,
}

/// Inverted dropout settings. `rate` applies to hidden activations;
/// `input_rate` to raw inputs when the placement includes them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub placement: DropoutPlacement,
    pub input_rate: f64,
}

impl DropoutSpec {
    pub const NONE: DropoutSpec = DropoutSpec {
        rate: 0.0,
        placement: DropoutPlacement::HiddenOnly,
        input_rate: 0.0,
    };

    pub fn hidden(rate: f64) -> Self {
        Self {
            rate,
            placement: DropoutPlacement::HiddenOnly,
            input_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("rate", self.rate), ("input_rate", self.input_rate)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("dropout {name} {r} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Rate applied to raw network inputs.
    pub fn effective_input_rate(&self) -> f64 {
        match self.placement {
            DropoutPlacement::HiddenOnly => 0.0,
            DropoutPlacement::InputAndHidden => self.input_rate,
        }
    }
}

impl Default for DropoutSpec {
    fn default() -> Self {
        Self {
            rate: 0.5,
            placement: DropoutPlacement::HiddenOnly,
            input_rate: 0.2,
        }
    }
}

/// Draws an inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut Rng) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

/// Multiplies `m` elementwise by a fresh dropout mask and returns the mask.
pub fn apply_dropout<T: Scalar>(m: &mut Matrix<T>, rate: f64, rng: &mut Rng) -> Vec<T> {
    let mask = dropout_mask(m.rows() * m.cols(), rate, rng);
    for (v, &k) in m.as_mut_slice().iter_mut().zip(&mask) {
        *v = *v * k;
    }
    mask
}

/// `activation(x W + b)` with `W` stored as `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

/// Values saved by a training forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub input: Matrix<T>,
    pub pre: Matrix<T>,
    pub mask: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    /// Glorot-uniform weights on `(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`;
    /// zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut Rng) -> Self {
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new(-s, s).expect("finite non-empty range");
        let data = (0..fan_in * fan_out).map(|_| T::of(dist.sample(rng))).collect();
        Self {
            weights: Matrix::from_vec(fan_in, fan_out, data).expect("length matches"),
            bias: vec![T::zero(); fan_out],
            activation,
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![T::zero(); fan_out],
            activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    /// Forward pass keeping the intermediates needed by [`Self::backward`].
    /// `dropout_rate` masks the activated output in train mode.
    pub fn forward_cached(
        &self,
        input: &Matrix<T>,
        dropout_rate: f64,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Matrix<T>, LayerCache<T>)> {
        if input.cols() != self.fan_in() {
            return Err(Error::Shape {
                op: "dense_forward",
                left: input.shape(),
                right: self.weights.shape(),
            });
        }
        let mut pre = input.matmul(&self.weights)?;
        for i in 0..pre.rows() {
            for (v, &b) in pre.row_mut(i).iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        let mut out = pre.map(|v| self.activation.apply(v));
        let mask = (mode == Mode::Train && dropout_rate > 0.0).then(|| apply_dropout(&mut out, dropout_rate, rng));
        Ok((
            out,
            LayerCache {
                input: input.clone(),
                pre,
                mask,
            },
        ))
    }

    /// Backpropagates `grad_out` (gradient w.r.t. this layer's output).
    /// Returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Matrix<T>) -> Result<(LayerGrads<T>, Matrix<T>)> {
        if grad_out.shape() != cache.pre.shape() {
            return Err(Error::Shape {
                op: "dense_backward",
                left: grad_out.shape(),
                right: cache.pre.shape(),
            });
        }
        let mut dpre = grad_out.clone();
        let pre = cache.pre.as_slice();
        match &cache.mask {
            Some(mask) => {
                for ((g, &p), &k) in dpre.as_mut_slice().iter_mut().zip(pre).zip(mask) {
                    *g = *g * k * self.activation.derivative(p);
                }
            }
            None => {
                for (g, &p) in dpre.as_mut_slice().iter_mut().zip(pre) {
                    *g = *g * self.activation.derivative(p);
                }
            }
        }
        let weights = cache.input.t_matmul(&dpre)?;
        let bias = dpre.col_sums();
        let grad_input = dpre.matmul_t(&self.weights)?;
        Ok((LayerGrads { weights, bias }, grad_input))
    }
}

/// One dense layer applied to `input`; dropout with `dropout.rate` masks the
/// output in train mode. Eval mode is deterministic and ignores `rng`.
pub fn dense_forward<T: Scalar>(
    input: &Matrix<T>,
    layer: &DenseLayer<T>,
    dropout: &DropoutSpec,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Matrix<T>> {
    layer.forward_cached(input, dropout.rate, mode, rng).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn layer(w: &[f64], b: &[f64], act: Activation) -> DenseLayer<f64> {
        let n = b.len();
        DenseLayer {
            weights: Matrix::from_vec(w.len() / n, n, w.to_vec()).unwrap(),
            bias: b.to_vec(),
            activation: act,
        }
    }

    fn eval(input: &[f64], l: &DenseLayer<f64>) -> Vec<f64> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec()).unwrap();
        dense_forward(&x, l, &DropoutSpec::NONE, Mode::Eval, &mut seeded(0))
            .unwrap()
            .into_vec()
    }

    #[test]
    fn leaky_relu_identity_weights() {
        let l = layer(&[1., 0., 0., 1.], &[0., 0.], Activation::LeakyRelu);
        assert_eq!(eval(&[1., -1.], &l), vec![1.0, -0.2]);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let l = DenseLayer::<f64>::glorot(2, 2, Activation::LeakyRelu, &mut seeded(3));
        assert_eq!(eval(&[0., 0.], &l), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_with_bias() {
        let l = layer(&[1., 0., 0., 1.], &[1., 1.], Activation::Linear);
        assert_eq!(eval(&[2., 3.], &l), vec![3.0, 4.0]);
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let l = DenseLayer::<f64>::zeros(3, 2, Activation::Linear);
        let x = Matrix::zeros(1, 2);
        let msg = dense_forward(&x, &l, &DropoutSpec::NONE, Mode::Eval, &mut seeded(0))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("(1, 2)") && msg.contains("(3, 2)"), "{msg}");
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let a = DenseLayer::<f64>::glorot(10, 6, Activation::LeakyRelu, &mut seeded(9));
        let b = DenseLayer::<f64>::glorot(10, 6, Activation::LeakyRelu, &mut seeded(9));
        assert_eq!(a, b);
        let s = (6.0f64 / 16.0).sqrt();
        assert!(a.weights.as_slice().iter().all(|w| w.abs() < s));
        assert!(a.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let l = layer(&[1.0, 0.5, -0.25, 2.0], &[0.1, 0.3], Activation::LeakyRelu);
        let x = Matrix::from_vec(1, 2, vec![0.7, 0.4]).unwrap();
        let clean = dense_forward(&x, &l, &DropoutSpec::NONE, Mode::Eval, &mut seeded(0)).unwrap();
        let mut rng = seeded(11);
        let draws = 40_000;
        let mut acc = [0.0f64; 2];
        for _ in 0..draws {
            let out = dense_forward(&x, &l, &DropoutSpec::hidden(0.5), Mode::Train, &mut rng).unwrap();
            acc[0] += out[(0, 0)];
            acc[1] += out[(0, 1)];
        }
        for j in 0..2 {
            let mean = acc[j] / draws as f64;
            let rel = (mean - clean[(0, j)]).abs() / clean[(0, j)].abs();
            assert!(rel < 0.02, "unit {j}: mean {mean} vs {}", clean[(0, j)]);
        }
    }

    #[test]
    fn eval_mode_ignores_dropout() {
        let l = DenseLayer::<f64>::glorot(4, 4, Activation::LeakyRelu, &mut seeded(1));
        let x = Matrix::from_vec(1, 4, vec![0.3, -0.2, 0.9, 0.1]).unwrap();
        let a = dense_forward(&x, &l, &DropoutSpec::hidden(0.5), Mode::Eval, &mut seeded(1)).unwrap();
        let b = dense_forward(&x, &l, &DropoutSpec::hidden(0.5), Mode::Eval, &mut seeded(2)).unwrap();
        assert_eq!(a, b);
    }
}
