//! Minimal dense-network engine: layers, losses, Adam, gradient checks.

mod adam;
pub mod gradcheck;
mod layer;
pub mod loss;
mod matrix;
mod mlp;
mod scalar;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use layer::{
    apply_dropout, dense_forward, dropout_mask, Activation, DenseLayer, DropoutPlacement, DropoutSpec, LayerCache,
    LayerGrads, Mode, LEAKY_SLOPE,
};
pub use loss::{weighted_l1_loss, LossWeights};
pub use matrix::Matrix;
pub use mlp::{drop_inputs, flatten_grads, Mlp, MlpCache};
pub use scalar::Scalar;

/// Named access to every trainable tensor of a model, in a fixed order.
pub trait Parameterized<T: Scalar> {
    fn params(&self) -> Vec<(String, &[T])>;
    fn params_mut(&mut self) -> Vec<(String, &mut [T])>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    fn flat_params(&self) -> Vec<T> {
        self.params().into_iter().flat_map(|(_, p)| p.to_vec()).collect()
    }

    fn set_flat_params(&mut self, flat: &[T]) {
        let mut offset = 0;
        for (_, p) in self.params_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length");
    }
}
