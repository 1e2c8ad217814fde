use crate::error::{Error, Result};
use crate::nn::{
    apply_dropout, Activation, DenseLayer, DropoutSpec, LayerCache, LayerGrads, Matrix, Mode,
    Parameterized, Scalar,
};
use crate::rng::Rng;

/// Feed-forward stack of dense layers. Every layer but the last is a hidden
/// layer and receives hidden dropout in train mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// One leaky-ReLU hidden layer and a linear output layer.
    pub fn single_hidden(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            layers: vec![
                DenseLayer::glorot(input, hidden, Activation::LeakyRelu, rng),
                DenseLayer::glorot(hidden, output, Activation::Linear, rng),
            ],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.fan_in())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out())
    }

    /// Forward pass. Input dropout (if any) is the caller's business; this
    /// applies `dropout.rate` to hidden activations only.
    pub fn forward(
        &self,
        input: &Matrix<T>,
        dropout: &DropoutSpec,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Matrix<T>, MlpCache<T>)> {
        let last = self.layers.len().saturating_sub(1);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let rate = if i < last { dropout.rate } else { 0.0 };
            let (out, cache) = layer.forward_cached(&x, rate, mode, rng)?;
            caches.push(cache);
            x = out;
        }
        Ok((x, MlpCache { layers: caches }))
    }

    /// Eval-mode forward pass.
    pub fn predict(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        // eval mode never draws from the stream
        let mut unused = crate::rng::seeded(0);
        self.forward(input, &DropoutSpec::NONE, Mode::Eval, &mut unused)
            .map(|(out, _)| out)
    }

    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Matrix<T>) -> Result<(Vec<LayerGrads<T>>, Matrix<T>)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State("cache does not belong to this network".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let (lg, gin) = layer.backward(lc, &g)?;
            grads.push(lg);
            g = gin;
        }
        grads.reverse();
        Ok((grads, g))
    }
}

/// Input-dropout helper: a copy of `input` with a fresh mask applied when
/// `rate > 0` in train mode.
pub fn drop_inputs<T: Scalar>(input: &Matrix<T>, rate: f64, mode: Mode, rng: &mut Rng) -> Matrix<T> {
    let mut out = input.clone();
    if mode == Mode::Train && rate > 0.0 {
        apply_dropout(&mut out, rate, rng);
    }
    out
}

impl<T: Scalar> Parameterized<T> for Mlp<T> {
    fn params(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weights"), l.weights.as_slice()));
            out.push((format!("layer{i}.bias"), l.bias.as_slice()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.weights"), l.weights.as_mut_slice()));
            out.push((format!("layer{i}.bias"), l.bias.as_mut_slice()));
        }
        out
    }
}

/// Flattens per-layer gradients in [`Parameterized`] order.
pub fn flatten_grads<T: Scalar>(grads: &[LayerGrads<T>]) -> Vec<Vec<T>> {
    grads
        .iter()
        .flat_map(|g| [g.weights.as_slice().to_vec(), g.bias.clone()])
        .collect()
}
