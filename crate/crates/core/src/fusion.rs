//! Fusion strategies for feature maps and the training-free pyramid fusion
//! pipeline.

use std::fmt;
use std::str::FromStr;

use crate::depool::{
    maxpool_forward, maxpool_round_trip, nearest_upsample, pad_to_even, pyramid_decompose, pyramid_reconstruct, BankKind, DetailStash,
    KernelBank, PyramidDecomposition,
};
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Field};

/// Per-pixel weights of the two sources; `c_ir + c_vi = 1` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMaps {
    pub c_ir: Field,
    pub c_vi: Field,
}

/// Channel-wise l1 norm at every pixel, summed in channel order.
fn l1_norm_map(f: &FeatureMap) -> Field {
    let (_, h, w) = f.dims();
    let mut acc = vec![0.0; h * w];
    for c in f.channels() {
        for (a, v) in acc.iter_mut().zip(c.data()) {
            *a += v.abs();
        }
    }
    Field::from_vec(h, w, acc)
}

/// l1-normalized attention weights. Pixels where both norms vanish get
/// 0.5 / 0.5.
pub fn spatial_attention_weights(f_ir: &FeatureMap, f_vi: &FeatureMap) -> Result<WeightMaps> {
    spatial_attention_weights_with(f_ir, f_vi, false)
}

/// As [`spatial_attention_weights`]; with `softmax` the norms are
/// exponentiated before normalizing.
pub fn spatial_attention_weights_with(f_ir: &FeatureMap, f_vi: &FeatureMap, softmax: bool) -> Result<WeightMaps> {
    f_ir.ensure_same_dims(f_vi)?;
    let n_ir = l1_norm_map(f_ir);
    let n_vi = l1_norm_map(f_vi);
    let (h, w) = n_ir.shape();
    let mut c_ir = Vec::with_capacity(h * w);
    let mut c_vi = Vec::with_capacity(h * w);
    for (&a, &b) in n_ir.data().iter().zip(n_vi.data()) {
        let (wa, wb) = if softmax {
            // shift by the max so the exponentials stay finite
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            (ea / (ea + eb), eb / (ea + eb))
        } else if a + b == 0.0 {
            (0.5, 0.5)
        } else {
            (a / (a + b), b / (a + b))
        };
        c_ir.push(wa);
        c_vi.push(wb);
    }
    Ok(WeightMaps { c_ir: Field::from_vec(h, w, c_ir), c_vi: Field::from_vec(h, w, c_vi) })
}

fn apply_weights(f_ir: &FeatureMap, f_vi: &FeatureMap, wm: &WeightMaps) -> FeatureMap {
    let channels = f_ir
        .channels()
        .iter()
        .zip(f_vi.channels())
        .map(|(a, b)| {
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .zip(wm.c_ir.data().iter().zip(wm.c_vi.data()))
                .map(|((x, y), (wx, wy))| wx * x + wy * y)
                .collect();
            Field::from_vec(a.height(), a.width(), data)
        })
        .collect();
    FeatureMap::from_channels(channels)
}

/// Attention-weighted sum of the two feature maps, weights shared by all
/// channels.
pub fn fuse_spatial_attention(f_ir: &FeatureMap, f_vi: &FeatureMap) -> Result<FeatureMap> {
    let wm = spatial_attention_weights(f_ir, f_vi)?;
    Ok(apply_weights(f_ir, f_vi, &wm))
}

pub fn fuse_spatial_attention_with(f_ir: &FeatureMap, f_vi: &FeatureMap, softmax: bool) -> Result<FeatureMap> {
    let wm = spatial_attention_weights_with(f_ir, f_vi, softmax)?;
    Ok(apply_weights(f_ir, f_vi, &wm))
}

pub fn fuse_average(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    a.zip_map(b, |x, y| (x + y) / 2.0)
}

pub fn fuse_addition(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    a.zip_map(b, |x, y| x + y)
}

pub fn fuse_max(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    a.zip_map(b, f64::max)
}

/// Direction-wise sum of two detail stashes.
pub fn fuse_details_add(d_ir: &DetailStash, d_vi: &DetailStash) -> Result<DetailStash> {
    d_ir.zip_with(d_vi, fuse_addition)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    SpatialAttention,
    Average,
    Addition,
}

impl Strategy {
    pub fn apply(self, a: &FeatureMap, b: &FeatureMap, softmax: bool) -> Result<FeatureMap> {
        match self {
            Strategy::SpatialAttention => fuse_spatial_attention_with(a, b, softmax),
            Strategy::Average => fuse_average(a, b),
            Strategy::Addition => fuse_addition(a, b),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::SpatialAttention => "spatial_attention",
            Strategy::Average => "average",
            Strategy::Addition => "addition",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial_attention" => Ok(Strategy::SpatialAttention),
            "average" => Ok(Strategy::Average),
            "addition" => Ok(Strategy::Addition),
            other => Err(Error::param(format!("unknown strategy {other:?}, expected spatial_attention, average or addition"))),
        }
    }
}

/// Downscaling used by the classical pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Decomposition pooling with a detail stash.
    Depool,
    /// 2x2 max-pooling and nearest upsampling, details discarded.
    MaxPool,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Depool => "depool",
            Pooling::MaxPool => "maxpool",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depool" => Ok(Pooling::Depool),
            "maxpool" => Ok(Pooling::MaxPool),
            other => Err(Error::param(format!("unknown pooling {other:?}, expected depool or maxpool"))),
        }
    }
}

/// Fusion settings, readable from `key = value` lines.
///
/// Keys: `deep_strategy`, `detail_strategy`, `levels`, `bank` (`4x4` or
/// `2x2`), `pooling` (`depool` or `maxpool`), `softmax` (`true`/`false`).
/// Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionConfig {
    pub deep_strategy: Strategy,
    pub detail_strategy: Strategy,
    pub levels: usize,
    pub bank: BankKind,
    pub pooling: Pooling,
    pub softmax: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            deep_strategy: Strategy::SpatialAttention,
            detail_strategy: Strategy::Addition,
            levels: 3,
            bank: BankKind::Depool4,
            pooling: Pooling::Depool,
            softmax: false,
        }
    }
}

impl FusionConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = FusionConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::param(format!("config line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "deep_strategy" => cfg.deep_strategy = value.parse()?,
                "detail_strategy" => cfg.detail_strategy = value.parse()?,
                "levels" => {
                    cfg.levels = value
                        .parse()
                        .ok()
                        .filter(|&l: &usize| l >= 1)
                        .ok_or_else(|| Error::param(format!("levels must be a positive integer, got {value:?}")))?
                }
                "bank" => cfg.bank = value.parse()?,
                "pooling" => cfg.pooling = value.parse()?,
                "softmax" => {
                    cfg.softmax = value.parse().map_err(|_| Error::param(format!("softmax must be true or false, got {value:?}")))?
                }
                other => return Err(Error::param(format!("config line {}: unknown key {other:?}", n + 1))),
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "deep_strategy = {}\ndetail_strategy = {}\nlevels = {}\nbank = {}\npooling = {}\nsoftmax = {}\n",
            self.deep_strategy, self.detail_strategy, self.levels, self.bank, self.pooling, self.softmax
        )
    }
}

impl FromStr for FusionConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Decomposes both sources, fuses the deepest MS band with the deep strategy
/// and every stash level with the detail strategy, reconstructs and clamps to
/// `[0, 1]`.
pub fn classical_fuse_pipeline(ir: &Field, vi: &Field, cfg: &FusionConfig) -> Result<Field> {
    if ir.shape() != vi.shape() {
        return Err(Error::shape(format!("infrared is {}x{}, visible is {}x{}", ir.height(), ir.width(), vi.height(), vi.width())));
    }
    let fused = match cfg.pooling {
        Pooling::Depool => depool_fuse(ir, vi, cfg)?,
        Pooling::MaxPool => maxpool_fuse(ir, vi, cfg)?,
    };
    Ok(fused.clamp_unit())
}

/// Decomposes and reconstructs a single image under the pooling, bank and
/// level count of `cfg`. No fusion and no clamping: this measures what the
/// downscaling path alone preserves.
pub fn round_trip(x: &Field, cfg: &FusionConfig) -> Result<Field> {
    match cfg.pooling {
        Pooling::Depool => {
            let bank = KernelBank::from_kind(cfg.bank);
            let p = pyramid_decompose(&FeatureMap::single(x.clone()), cfg.levels, &bank)?;
            Ok(pyramid_reconstruct(&p, &bank)?.into_channels().remove(0))
        }
        Pooling::MaxPool => maxpool_round_trip(x, cfg.levels),
    }
}

fn depool_fuse(ir: &Field, vi: &Field, cfg: &FusionConfig) -> Result<Field> {
    let bank = KernelBank::from_kind(cfg.bank);
    let p_ir = pyramid_decompose(&FeatureMap::single(ir.clone()), cfg.levels, &bank)?;
    let p_vi = pyramid_decompose(&FeatureMap::single(vi.clone()), cfg.levels, &bank)?;
    let deep = cfg.deep_strategy.apply(&p_ir.deepest_ms, &p_vi.deepest_ms, cfg.softmax)?;
    let stash = p_ir
        .detail_stash
        .iter()
        .zip(&p_vi.detail_stash)
        .map(|(a, b)| a.zip_with(b, |x, y| cfg.detail_strategy.apply(x, y, cfg.softmax)))
        .collect::<Result<Vec<_>>>()?;
    let fused = PyramidDecomposition::new(deep, stash, ir.shape(), false)?;
    Ok(pyramid_reconstruct(&fused, &bank)?.into_channels().remove(0))
}

fn maxpool_fuse(ir: &Field, vi: &Field, cfg: &FusionConfig) -> Result<Field> {
    let pool = |x: &Field| -> Result<Field> {
        let (mut cur, _) = pad_to_even(x, cfg.levels);
        for _ in 0..cfg.levels {
            cur = maxpool_forward(&cur)?;
        }
        Ok(cur)
    };
    let a = FeatureMap::single(pool(ir)?);
    let b = FeatureMap::single(pool(vi)?);
    let mut cur = cfg.deep_strategy.apply(&a, &b, cfg.softmax)?.into_channels().remove(0);
    for _ in 0..cfg.levels {
        cur = nearest_upsample(&cur);
    }
    cur.crop(ir.height(), ir.width())
}
