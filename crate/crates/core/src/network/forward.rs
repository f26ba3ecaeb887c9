//! Encoder, decoder and the two-source fusion pass.

use crate::depool::{depool_forward, depool_inverse, pad_to_even, DetailStash, Subband, SubbandSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::{fuse_details_add, fuse_spatial_attention};
use crate::network::conv::{conv2d_forward_with, ConvLayer};
use crate::network::model::Model;
use crate::tensor::{FeatureMap, Field};

/// Number of de-pooling steps between the four encoder blocks.
pub const POOLINGS: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InferenceOptions {
    /// Divide MS bands by their tap sum between blocks and undo it before
    /// synthesis. Off by default.
    pub normalize_ms: bool,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// E-Block4 output.
    pub deep: FeatureMap,
    /// Shallow to deep.
    pub stash: Vec<DetailStash>,
    pub original_shape: (usize, usize),
    /// `(channels, height, width)` after each block.
    pub block_dims: Vec<Dims>,
}

fn run_block(x: FeatureMap, block: &[ConvLayer], execution: Execution) -> Result<FeatureMap> {
    block.iter().try_fold(x, |x, layer| conv2d_forward_with(&x, layer, execution))
}

fn ms_gain(model: &Model) -> f64 {
    model.bank.tap_sum(Subband::Ms)
}

pub fn encoder_forward(input: &Field, model: &Model) -> Result<EncoderOutput> {
    encoder_forward_with(input, model, InferenceOptions::default())
}

pub fn encoder_forward_with(input: &Field, model: &Model, opts: InferenceOptions) -> Result<EncoderOutput> {
    model.validate()?;
    let original_shape = input.shape();
    let (padded, _) = pad_to_even(input, POOLINGS);
    let deepest_in = padded.height().min(padded.width()) >> (POOLINGS - 1);
    if deepest_in < model.bank.side() {
        return Err(Error::param(format!("{}x{} input is too small for {POOLINGS} de-pooling steps", original_shape.0, original_shape.1)));
    }
    let mut x = FeatureMap::single(padded);
    let mut stash = Vec::with_capacity(POOLINGS);
    let mut block_dims = Vec::with_capacity(4);
    let gain = ms_gain(model);
    for (b, block) in model.encoder_blocks.iter().enumerate() {
        x = run_block(x, block, opts.execution)?;
        block_dims.push(x.dims());
        if b == POOLINGS {
            break;
        }
        let sets = opts
            .execution
            .map(x.num_channels(), |c| depool_forward(x.channel(c), &model.bank))
            .into_iter()
            .collect::<Result<Vec<SubbandSet>>>()?;
        let (mut ms, mut vd, mut hd, mut dd) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for s in sets {
            ms.push(if opts.normalize_ms { s.ms.scale(1.0 / gain) } else { s.ms });
            vd.push(s.vd);
            hd.push(s.hd);
            dd.push(s.dd);
        }
        stash.push(DetailStash { vd: FeatureMap::new(vd)?, hd: FeatureMap::new(hd)?, dd: FeatureMap::new(dd)? });
        x = FeatureMap::new(ms)?;
    }
    Ok(EncoderOutput { deep: x, stash, original_shape, block_dims })
}

/// `(channels, height, width)` of one activation.
pub type Dims = (usize, usize, usize);

/// Runs the decoder; returns the clamped image and the dims after each block.
pub fn decoder_forward_traced(
    deep: &FeatureMap,
    stash: &[DetailStash],
    original_shape: (usize, usize),
    model: &Model,
    opts: InferenceOptions,
) -> Result<(Field, Vec<Dims>)> {
    model.validate()?;
    if stash.len() != POOLINGS {
        return Err(Error::shape(format!("decoder needs {POOLINGS} stash levels, got {}", stash.len())));
    }
    let gain = ms_gain(model);
    let mut x = deep.clone();
    let mut block_dims = Vec::with_capacity(4);
    for (b, block) in model.decoder_blocks.iter().enumerate() {
        x = run_block(x, block, opts.execution)?;
        block_dims.push(x.dims());
        if b == POOLINGS {
            break;
        }
        let level = &stash[POOLINGS - 1 - b];
        if x.dims() != level.dims() {
            return Err(Error::shape(format!(
                "decoder features {:?} do not match stash level {} {:?}",
                x.dims(),
                POOLINGS - b,
                level.dims()
            )));
        }
        let (_, h, w) = x.dims();
        let fields = opts.execution.map(x.num_channels(), |c| {
            let ms = if opts.normalize_ms { x.channel(c).scale(gain) } else { x.channel(c).clone() };
            let s =
                SubbandSet::new(ms, level.vd.channel(c).clone(), level.hd.channel(c).clone(), level.dd.channel(c).clone(), (2 * h, 2 * w))?;
            depool_inverse(&s, &model.bank)
        });
        x = FeatureMap::new(fields.into_iter().collect::<Result<Vec<_>>>()?)?;
    }
    if x.num_channels() != 1 {
        return Err(Error::shape(format!("decoder produced {} channels", x.num_channels())));
    }
    let out = x.into_channels().remove(0).crop(original_shape.0, original_shape.1)?;
    Ok((out.clamp_unit(), block_dims))
}

pub fn decoder_forward(deep: &FeatureMap, stash: &[DetailStash], original_shape: (usize, usize), model: &Model) -> Result<Field> {
    Ok(decoder_forward_traced(deep, stash, original_shape, model, InferenceOptions::default())?.0)
}

/// Encodes both sources, fuses E-Block4 outputs by spatial attention and the
/// stashes by addition, and decodes.
pub fn fuse_network(ir: &Field, vi: &Field, model: &Model, opts: InferenceOptions) -> Result<Field> {
    if ir.shape() != vi.shape() {
        return Err(Error::shape(format!("infrared is {}x{}, visible is {}x{}", ir.height(), ir.width(), vi.height(), vi.width())));
    }
    let (e_ir, e_vi) = match opts.execution {
        Execution::Parallel => rayon::join(|| encoder_forward_with(ir, model, opts), || encoder_forward_with(vi, model, opts)),
        Execution::Sequential => (encoder_forward_with(ir, model, opts), encoder_forward_with(vi, model, opts)),
    };
    let (e_ir, e_vi) = (e_ir?, e_vi?);
    let deep = fuse_spatial_attention(&e_ir.deep, &e_vi.deep)?;
    let stash = e_ir.stash.iter().zip(&e_vi.stash).map(|(a, b)| fuse_details_add(a, b)).collect::<Result<Vec<_>>>()?;
    Ok(decoder_forward_traced(&deep, &stash, ir.shape(), model, opts)?.0)
}
