use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    drop_inputs, flatten_grads, loss::weighted_l1_loss, DropoutSpec, Matrix, Mlp, MlpCache, Mode,
    Parameterized, Scalar,
};
use crate::rng::{derive_seed, seeded, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `Z = E(X, Y)`, `X̂ = D(Z, Y)`; codes from random seen pairs.
    #[serde(rename = "full")]
    Full,
    /// `Z = E(X)`, `X̂ = D(Z, Y)`; codes from random seen instances.
    #[serde(rename = "ae_nonparam")]
    AeNonparam,
    /// As `ae_nonparam` with 20% dropout on the encoder input.
    #[serde(rename = "dae_nonparam")]
    DaeNonparam,
    /// Denoising AE conditioned on `Y`; codes drawn from `N(0, I)`.
    #[serde(rename = "dae_randZ")]
    DaeRandZ,
    /// Denoising AE conditioned on class attributes; codes from `N(0, I)`.
    #[serde(rename = "dae_attr_zeroshot")]
    DaeAttrZeroshot,
    /// `X̂ = Y^u + (X^s - Y^s)`; no trainable parameters.
    #[serde(rename = "linear_offset")]
    LinearOffset,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::AeNonparam,
        Variant::DaeNonparam,
        Variant::DaeRandZ,
        Variant::DaeAttrZeroshot,
        Variant::LinearOffset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::AeNonparam => "ae_nonparam",
            Variant::DaeNonparam => "dae_nonparam",
            Variant::DaeRandZ => "dae_randZ",
            Variant::DaeAttrZeroshot => "dae_attr_zeroshot",
            Variant::LinearOffset => "linear_offset",
        }
    }

    pub fn encoder_sees_anchor(self) -> bool {
        self == Variant::Full
    }

    pub fn is_denoising(self) -> bool {
        matches!(
            self,
            Variant::DaeNonparam | Variant::DaeRandZ | Variant::DaeAttrZeroshot
        )
    }

    /// Codes come from `N(0, I)` instead of encoded seen samples.
    pub fn parametric_codes(self) -> bool {
        matches!(self, Variant::DaeRandZ | Variant::DaeAttrZeroshot)
    }

    pub fn uses_attributes(self) -> bool {
        self == Variant::DaeAttrZeroshot
    }

    pub fn is_closed_form(self) -> bool {
        self == Variant::LinearOffset
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.name().replace('_', "-").eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub z_dim: usize,
    /// Width of the class attribute vectors; only read by the
    /// attribute-conditioned variant.
    pub attribute_dim: usize,
    pub variant: Variant,
}

impl ArchConfig {
    /// 8192 hidden units and a 16-dimensional code.
    pub fn reference(feature_dim: usize, variant: Variant) -> Self {
        Self {
            feature_dim,
            hidden_dim: 8192,
            z_dim: 16,
            attribute_dim: 0,
            variant,
        }
    }

    pub fn encoder_input_dim(&self) -> usize {
        if self.variant.encoder_sees_anchor() {
            2 * self.feature_dim
        } else {
            self.feature_dim
        }
    }

    /// Width of the decoder's conditioning input (anchor or attributes).
    pub fn condition_dim(&self) -> usize {
        if self.variant.uses_attributes() {
            self.attribute_dim
        } else {
            self.feature_dim
        }
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.z_dim + self.condition_dim()
    }

    /// Length of a [`DeltaCode`](crate::delta::DeltaCode) for this model.
    pub fn code_dim(&self) -> usize {
        if self.variant.is_closed_form() {
            self.feature_dim
        } else {
            self.z_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Config("feature dim must be positive".into()));
        }
        if self.variant.is_closed_form() {
            return Ok(());
        }
        if self.hidden_dim == 0 || self.z_dim == 0 {
            return Err(Error::Config("hidden and code dims must be positive".into()));
        }
        if self.z_dim >= self.feature_dim {
            return Err(Error::Config(format!(
                "code dim {} must be smaller than feature dim {}",
                self.z_dim, self.feature_dim
            )));
        }
        if self.variant.uses_attributes() && self.attribute_dim == 0 {
            return Err(Error::Config(format!("variant {} needs class attributes", self.variant)));
        }
        Ok(())
    }
}

/// How a model's parameters came to be.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub init_seed: u64,
    pub trained: bool,
    pub train_seed: Option<u64>,
    pub epochs: usize,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEncoderModel<T> {
    pub arch: ArchConfig,
    /// `None` for the closed-form variant.
    pub encoder: Option<Mlp<T>>,
    pub decoder: Option<Mlp<T>>,
    pub fingerprint: TrainingFingerprint,
}

/// One reconstruction pass with everything needed for backpropagation.
pub(crate) struct Pass<T> {
    pub loss: T,
    pub grads: Vec<Vec<T>>,
}

impl<T: Scalar> DeltaEncoderModel<T> {
    /// A fresh, untrained model. Parameters depend only on `arch` and `seed`.
    pub fn build(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let fingerprint = TrainingFingerprint {
            init_seed: seed,
            // nothing to fit
            trained: arch.variant.is_closed_form(),
            ..TrainingFingerprint::default()
        };
        if arch.variant.is_closed_form() {
            return Ok(Self {
                arch,
                encoder: None,
                decoder: None,
                fingerprint,
            });
        }
        let mut rng = seeded(derive_seed(seed, stream::INIT));
        let encoder = Mlp::single_hidden(arch.encoder_input_dim(), arch.hidden_dim, arch.z_dim, &mut rng);
        let decoder = Mlp::single_hidden(arch.decoder_input_dim(), arch.hidden_dim, arch.feature_dim, &mut rng);
        Ok(Self {
            arch,
            encoder: Some(encoder),
            decoder: Some(decoder),
            fingerprint,
        })
    }

    pub fn variant(&self) -> Variant {
        self.arch.variant
    }

    pub fn is_trained(&self) -> bool {
        self.fingerprint.trained
    }

    pub(crate) fn networks(&self) -> Result<(&Mlp<T>, &Mlp<T>)> {
        match (&self.encoder, &self.decoder) {
            (Some(e), Some(d)) => Ok((e, d)),
            _ => Err(Error::State(format!("variant {} has no networks", self.arch.variant))),
        }
    }

    fn encoder_input(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        if self.arch.variant.encoder_sees_anchor() {
            x.hcat(y)
        } else {
            Ok(x.clone())
        }
    }

    /// Eval-mode codes for a batch of `(X, Y)` rows. `y` is ignored by
    /// variants whose encoder only sees `X`.
    pub fn encode(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        let (enc, _) = self.networks()?;
        enc.predict(&self.encoder_input(x, y)?)
    }

    /// Eval-mode decoding of codes against per-row conditioning vectors.
    pub fn decode(&self, z: &Matrix<T>, condition: &Matrix<T>) -> Result<Matrix<T>> {
        let (_, dec) = self.networks()?;
        dec.predict(&z.hcat(condition)?)
    }

    /// `D(E(X, Y), C)` in eval mode.
    pub fn reconstruct(&self, x: &Matrix<T>, y: &Matrix<T>, condition: &Matrix<T>) -> Result<Matrix<T>> {
        self.decode(&self.encode(x, y)?, condition)
    }

    /// Forward and backward pass of the reconstruction loss. Gradients are
    /// flattened in [`Parameterized`] order.
    pub(crate) fn pass(
        &self,
        x: &Matrix<T>,
        y: &Matrix<T>,
        condition: &Matrix<T>,
        dropout: &DropoutSpec,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Pass<T>> {
        let (enc, dec) = self.networks()?;
        let noisy_x = drop_inputs(x, dropout.effective_input_rate(), mode, rng);
        let enc_in = self.encoder_input(&noisy_x, y)?;
        let (z, enc_cache): (Matrix<T>, MlpCache<T>) = enc.forward(&enc_in, dropout, mode, rng)?;
        let (x_hat, dec_cache) = dec.forward(&z.hcat(condition)?, dropout, mode, rng)?;
        let (loss, g_out) = weighted_l1_loss(x, &x_hat)?;
        let (dec_grads, g_dec_in) = dec.backward(&dec_cache, &g_out)?;
        let g_z = g_dec_in.col_range(0, self.arch.z_dim);
        let (enc_grads, _) = enc.backward(&enc_cache, &g_z)?;
        let mut grads = flatten_grads(&enc_grads);
        grads.extend(flatten_grads(&dec_grads));
        Ok(Pass { loss, grads })
    }

    /// Analytic gradient of the mean weighted-L1 reconstruction loss with
    /// dropout disabled, flattened in [`Parameterized`] order.
    pub fn reconstruction_gradient(&self, x: &Matrix<T>, y: &Matrix<T>, condition: &Matrix<T>) -> Result<(T, Vec<T>)> {
        let mut unused = seeded(0);
        let p = self.pass(x, y, condition, &DropoutSpec::NONE, Mode::Eval, &mut unused)?;
        Ok((p.loss, p.grads.into_iter().flatten().collect()))
    }
}

impl<T: Scalar> Parameterized<T> for DeltaEncoderModel<T> {
    fn params(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (prefix, net) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            if let Some(net) = net {
                out.extend(net.params().into_iter().map(|(n, p)| (format!("{prefix}.{n}"), p)));
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out = Vec::new();
        for (prefix, net) in [("encoder", &mut self.encoder), ("decoder", &mut self.decoder)] {
            if let Some(net) = net {
                out.extend(net.params_mut().into_iter().map(|(n, p)| (format!("{prefix}.{n}"), p)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(d: usize, h: usize, z: usize, variant: Variant) -> ArchConfig {
        ArchConfig {
            feature_dim: d,
            hidden_dim: h,
            z_dim: z,
            attribute_dim: 0,
            variant,
        }
    }

    #[test]
    fn reference_layer_shapes() {
        let a = ArchConfig::reference(2048, Variant::Full);
        assert_eq!(a.encoder_input_dim(), 4096);
        assert_eq!(a.decoder_input_dim(), 2064);
        // building the full-size f32 model allocates ~200 MB, so check the
        // wiring on a proportionally scaled copy instead
        let m = DeltaEncoderModel::<f32>::build(arch(32, 128, 4, Variant::Full), 0).unwrap();
        let (e, d) = m.networks().unwrap();
        let shapes = |n: &Mlp<f32>| n.layers.iter().map(|l| l.weights.shape()).collect::<Vec<_>>();
        assert_eq!(shapes(e), vec![(64, 128), (128, 4)]);
        assert_eq!(shapes(d), vec![(36, 128), (128, 32)]);
    }

    #[test]
    fn build_is_deterministic() {
        let a = DeltaEncoderModel::<f64>::build(arch(4, 8, 2, Variant::Full), 5).unwrap();
        let b = DeltaEncoderModel::<f64>::build(arch(4, 8, 2, Variant::Full), 5).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_trained());
    }

    #[test]
    fn linear_offset_has_no_parameters() {
        let m = DeltaEncoderModel::<f32>::build(arch(16, 0, 0, Variant::LinearOffset), 0).unwrap();
        assert_eq!(m.param_count(), 0);
        assert!(m.encoder.is_none() && m.decoder.is_none());
        assert!(m.is_trained());
    }

    #[test]
    fn code_dim_must_be_below_feature_dim() {
        let err = DeltaEncoderModel::<f32>::build(arch(8, 16, 8, Variant::Full), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn attribute_variant_needs_attribute_dim() {
        assert!(DeltaEncoderModel::<f32>::build(arch(8, 16, 2, Variant::DaeAttrZeroshot), 0).is_err());
        let mut a = arch(8, 16, 2, Variant::DaeAttrZeroshot);
        a.attribute_dim = 5;
        let m = DeltaEncoderModel::<f32>::build(a, 0).unwrap();
        assert_eq!(m.decoder.unwrap().input_dim(), 7);
        assert_eq!(m.encoder.unwrap().input_dim(), 8);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert_eq!("linear-offset".parse::<Variant>().unwrap(), Variant::LinearOffset);
        assert!("nope".parse::<Variant>().is_err());
    }
}
