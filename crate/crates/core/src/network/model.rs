//! The encoder/decoder layer table and model container.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depool::KernelBank;
use crate::error::{Error, Result};
use crate::network::conv::{Activation, ConvLayer};

/// One row of the architecture table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub block: &'static str,
    pub layer: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn name(&self) -> String {
        format!("{}.Layer{}", self.block, self.layer)
    }
}

const fn spec(block: &'static str, layer: usize, kernel_size: usize, in_channels: usize, out_channels: usize, relu: bool) -> LayerSpec {
    LayerSpec { block, layer, kernel_size, in_channels, out_channels, activation: if relu { Activation::Relu } else { Activation::None } }
}

/// Encoder blocks E-Block1..4 in execution order.
pub const ENCODER: [&[LayerSpec]; 4] = [
    &[spec("E-Block1", 1, 1, 1, 1, true), spec("E-Block1", 2, 3, 1, 64, true), spec("E-Block1", 3, 3, 64, 64, true)],
    &[spec("E-Block2", 1, 3, 64, 128, true), spec("E-Block2", 2, 3, 128, 128, true)],
    &[
        spec("E-Block3", 1, 3, 128, 256, true),
        spec("E-Block3", 2, 3, 256, 256, true),
        spec("E-Block3", 3, 3, 256, 256, true),
        spec("E-Block3", 4, 3, 256, 256, true),
    ],
    &[spec("E-Block4", 1, 3, 256, 512, false)],
];

/// Decoder blocks D-Block4..1 in execution order.
pub const DECODER: [&[LayerSpec]; 4] = [
    &[spec("D-Block4", 1, 3, 512, 256, false)],
    &[
        spec("D-Block3", 1, 3, 256, 256, true),
        spec("D-Block3", 2, 3, 256, 256, true),
        spec("D-Block3", 3, 3, 256, 256, true),
        spec("D-Block3", 4, 3, 256, 128, true),
    ],
    &[spec("D-Block2", 1, 3, 128, 128, true), spec("D-Block2", 2, 3, 128, 64, true)],
    &[spec("D-Block1", 1, 3, 64, 64, true), spec("D-Block1", 2, 3, 64, 1, true)],
];

/// Every layer, encoder first, in file order.
pub fn layer_specs() -> impl Iterator<Item = &'static LayerSpec> {
    ENCODER.iter().chain(DECODER.iter()).flat_map(|b| b.iter())
}

pub fn layer_count() -> usize {
    layer_specs().count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder_blocks: Vec<Vec<ConvLayer>>,
    pub decoder_blocks: Vec<Vec<ConvLayer>>,
    pub bank: KernelBank,
}

fn check_layer(layer: &ConvLayer, spec: &LayerSpec) -> Result<()> {
    let name = spec.name();
    if layer.name != name {
        return Err(Error::Weights(format!("expected layer {name}, found {}", layer.name)));
    }
    let got = (layer.kernel_size, layer.in_channels, layer.out_channels, layer.activation);
    let want = (spec.kernel_size, spec.in_channels, spec.out_channels, spec.activation);
    if got != want {
        return Err(Error::Weights(format!(
            "{name}: kernel {}, {} -> {} channels, activation {:?} does not match the architecture (kernel {}, {} -> {}, {:?})",
            got.0, got.1, got.2, got.3, want.0, want.1, want.2, want.3
        )));
    }
    Ok(())
}

impl Model {
    /// Splits a flat layer list into blocks, checking it against the table.
    pub fn from_layers(layers: Vec<ConvLayer>, bank: KernelBank) -> Result<Self> {
        if layers.len() != layer_count() {
            return Err(Error::Weights(format!("{} layers, the architecture has {}", layers.len(), layer_count())));
        }
        for (layer, spec) in layers.iter().zip(layer_specs()) {
            check_layer(layer, spec)?;
        }
        let mut it = layers.into_iter();
        let mut take =
            |blocks: &[&[LayerSpec]; 4]| -> Vec<Vec<ConvLayer>> { blocks.iter().map(|b| it.by_ref().take(b.len()).collect()).collect() };
        let encoder_blocks = take(&ENCODER);
        let decoder_blocks = take(&DECODER);
        Ok(Model { encoder_blocks, decoder_blocks, bank })
    }

    /// Re-checks every layer against the table.
    pub fn validate(&self) -> Result<()> {
        if self.encoder_blocks.len() != 4 || self.decoder_blocks.len() != 4 {
            return Err(Error::Weights("model needs four encoder and four decoder blocks".into()));
        }
        let mut n = 0;
        for (layer, spec) in self.layers().zip(layer_specs()) {
            check_layer(layer, spec)?;
            n += 1;
        }
        if n != layer_count() {
            return Err(Error::Weights(format!("{n} layers, the architecture has {}", layer_count())));
        }
        Ok(())
    }

    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.encoder_blocks.iter().chain(&self.decoder_blocks).flatten()
    }

    /// Seeded Glorot-uniform weights, zero biases.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_specs()
            .map(|s| {
                let k2 = (s.kernel_size * s.kernel_size) as f64;
                let a = (6.0 / (s.in_channels as f64 * k2 + s.out_channels as f64 * k2)).sqrt() as f32;
                let n = s.out_channels * s.in_channels * s.kernel_size * s.kernel_size;
                let weights = (0..n).map(|_| rng.random_range(-a..=a)).collect();
                ConvLayer {
                    name: s.name(),
                    in_channels: s.in_channels,
                    out_channels: s.out_channels,
                    kernel_size: s.kernel_size,
                    weights,
                    bias: vec![0.0; s.out_channels],
                    activation: s.activation,
                }
            })
            .collect();
        Self::from_layers(layers, KernelBank::depool4()).expect("generated layers follow the table")
    }

    /// Every weight and bias zero.
    pub fn zeros() -> Self {
        let layers =
            layer_specs().map(|s| ConvLayer::zeros(s.name(), s.in_channels, s.out_channels, s.kernel_size, s.activation)).collect();
        Self::from_layers(layers, KernelBank::depool4()).expect("generated layers follow the table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_chains() {
        assert_eq!(layer_count(), 19);
        for blocks in [&ENCODER, &DECODER] {
            let flat: Vec<_> = blocks.iter().flat_map(|b| b.iter()).collect();
            for pair in flat.windows(2) {
                assert_eq!(pair[0].out_channels, pair[1].in_channels, "{}", pair[1].name());
            }
        }
        assert_eq!(ENCODER[3][0].activation, Activation::None);
        assert_eq!(DECODER[0][0].activation, Activation::None);
        assert_eq!(DECODER[3][1].activation, Activation::Relu);
    }

    #[test]
    fn random_is_seeded_and_bounded() {
        let a = Model::random(5);
        assert_eq!(a, Model::random(5));
        assert_ne!(a, Model::random(6));
        let first = a.layers().nth(2).unwrap();
        let bound = (6.0f64 / (64.0 * 9.0 * 2.0)).sqrt() as f32;
        assert!(first.weights.iter().all(|w| w.abs() <= bound));
        a.validate().unwrap();
    }

    #[test]
    fn wrong_layer_is_named() {
        let mut layers: Vec<ConvLayer> = Model::zeros().layers().cloned().collect();
        layers[3] = ConvLayer::zeros("E-Block2.Layer1", 64, 127, 3, Activation::Relu);
        let err = Model::from_layers(layers, KernelBank::depool4()).unwrap_err();
        assert!(err.to_string().contains("E-Block2.Layer1"), "{err}");
    }
}
