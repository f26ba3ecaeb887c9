//! Multi-level decomposition of channel stacks.

use crate::depool::bank::{KernelBank, Subband};
use crate::depool::synthesis::depool_inverse;
use crate::depool::transform::{depool_forward, SubbandSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tensor::{FeatureMap, Field};

/// Detail bands of one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailStash {
    pub vd: FeatureMap,
    pub hd: FeatureMap,
    pub dd: FeatureMap,
}

impl DetailStash {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        let z = FeatureMap::zeros(channels, height, width);
        DetailStash { vd: z.clone(), hd: z.clone(), dd: z }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.vd.dims()
    }

    /// Applies `f` to each direction pair.
    pub fn zip_with(&self, other: &DetailStash, f: impl Fn(&FeatureMap, &FeatureMap) -> Result<FeatureMap>) -> Result<DetailStash> {
        Ok(DetailStash { vd: f(&self.vd, &other.vd)?, hd: f(&self.hd, &other.hd)?, dd: f(&self.dd, &other.dd)? })
    }

    fn validate(&self) -> Result<()> {
        self.vd.ensure_same_dims(&self.hd)?;
        self.vd.ensure_same_dims(&self.dd)
    }
}

/// Options shared by decomposition and reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PyramidOptions {
    /// Divide the MS band by its tap sum before it feeds the next level, and
    /// multiply it back during reconstruction. Off by default.
    pub normalize_ms: bool,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidDecomposition {
    levels: usize,
    pub deepest_ms: FeatureMap,
    /// Shallow to deep.
    pub detail_stash: Vec<DetailStash>,
    original_shape: (usize, usize),
    normalize_ms: bool,
}

impl PyramidDecomposition {
    /// Assembles a decomposition from parts, validating the scale ladder.
    pub fn new(deepest_ms: FeatureMap, detail_stash: Vec<DetailStash>, original_shape: (usize, usize), normalize_ms: bool) -> Result<Self> {
        let levels = detail_stash.len();
        if levels == 0 {
            return Err(Error::param("pyramid needs at least one level"));
        }
        let (c, h, w) = deepest_ms.dims();
        let padded = (h << levels, w << levels);
        if padded.0 < original_shape.0 || padded.1 < original_shape.1 {
            return Err(Error::shape(format!(
                "{levels}-level pyramid with {h}x{w} deepest band cannot hold {}x{}",
                original_shape.0, original_shape.1
            )));
        }
        for (i, stash) in detail_stash.iter().enumerate() {
            stash.validate()?;
            let expect = (c, padded.0 >> (i + 1), padded.1 >> (i + 1));
            if stash.dims() != expect {
                return Err(Error::shape(format!("stash level {} is {:?}, expected {:?}", i + 1, stash.dims(), expect)));
            }
        }
        Ok(PyramidDecomposition { levels, deepest_ms, detail_stash, original_shape, normalize_ms })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn original_shape(&self) -> (usize, usize) {
        self.original_shape
    }

    /// Size after auto-padding.
    pub fn padded_shape(&self) -> (usize, usize) {
        (self.deepest_ms.height() << self.levels, self.deepest_ms.width() << self.levels)
    }

    pub fn normalize_ms(&self) -> bool {
        self.normalize_ms
    }
}

/// Mirror index that keeps reflecting for offsets larger than the field.
fn mirror(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

/// Reflect-pads the bottom and right edges so both sides divide `2^levels`.
pub fn pad_to_even(x: &Field, levels: usize) -> (Field, (usize, usize)) {
    let shape = x.shape();
    let unit = 1usize << levels;
    let ph = shape.0.div_ceil(unit) * unit;
    let pw = shape.1.div_ceil(unit) * unit;
    if (ph, pw) == shape {
        return (x.clone(), shape);
    }
    let padded = Field::from_fn(ph, pw, |i, j| x.get(mirror(i, shape.0), mirror(j, shape.1)));
    (padded, shape)
}

/// Inverse of [`pad_to_even`]: keeps the top-left `original_shape` window.
pub fn crop(x: &Field, original_shape: (usize, usize)) -> Result<Field> {
    x.crop(original_shape.0, original_shape.1)
}

pub fn pyramid_decompose(x: &FeatureMap, levels: usize, bank: &KernelBank) -> Result<PyramidDecomposition> {
    pyramid_decompose_with(x, levels, bank, PyramidOptions::default())
}

pub fn pyramid_decompose_with(x: &FeatureMap, levels: usize, bank: &KernelBank, opts: PyramidOptions) -> Result<PyramidDecomposition> {
    if levels == 0 {
        return Err(Error::param("levels must be at least 1"));
    }
    if levels > 16 {
        return Err(Error::param(format!("{levels} levels is too many")));
    }
    let original_shape = (x.height(), x.width());
    let mut current: Vec<Field> = x.channels().iter().map(|c| pad_to_even(c, levels).0).collect();
    let (ph, pw) = current[0].shape();
    let deepest = (ph >> (levels - 1), pw >> (levels - 1));
    if deepest.0 < bank.side() || deepest.1 < bank.side() {
        return Err(Error::param(format!(
            "{}x{} input is too small for {levels} levels with the {} bank",
            original_shape.0,
            original_shape.1,
            bank.kind()
        )));
    }
    let ms_scale = if opts.normalize_ms { 1.0 / bank.tap_sum(Subband::Ms) } else { 1.0 };
    let mut stash = Vec::with_capacity(levels);
    for _ in 0..levels {
        let sets = opts.execution.map(current.len(), |c| depool_forward(&current[c], bank));
        let sets = sets.into_iter().collect::<Result<Vec<SubbandSet>>>()?;
        let mut ms = Vec::with_capacity(sets.len());
        let (mut vd, mut hd, mut dd) = (Vec::new(), Vec::new(), Vec::new());
        for s in sets {
            ms.push(if opts.normalize_ms { s.ms.scale(ms_scale) } else { s.ms });
            vd.push(s.vd);
            hd.push(s.hd);
            dd.push(s.dd);
        }
        stash.push(DetailStash { vd: FeatureMap::from_channels(vd), hd: FeatureMap::from_channels(hd), dd: FeatureMap::from_channels(dd) });
        current = ms;
    }
    Ok(PyramidDecomposition {
        levels,
        deepest_ms: FeatureMap::from_channels(current),
        detail_stash: stash,
        original_shape,
        normalize_ms: opts.normalize_ms,
    })
}

pub fn pyramid_reconstruct(p: &PyramidDecomposition, bank: &KernelBank) -> Result<FeatureMap> {
    pyramid_reconstruct_with(p, bank, Execution::default())
}

pub fn pyramid_reconstruct_with(p: &PyramidDecomposition, bank: &KernelBank, execution: Execution) -> Result<FeatureMap> {
    if p.detail_stash.len() != p.levels {
        return Err(Error::shape(format!("pyramid has {} levels but {} stash entries", p.levels, p.detail_stash.len())));
    }
    let ms_gain = if p.normalize_ms { bank.tap_sum(Subband::Ms) } else { 1.0 };
    let mut current = p.deepest_ms.clone();
    for stash in p.detail_stash.iter().rev() {
        stash.validate()?;
        current.ensure_same_dims(&stash.vd)?;
        let (_, h, w) = current.dims();
        let fields = execution.map(current.num_channels(), |c| {
            let ms = if p.normalize_ms { current.channel(c).scale(ms_gain) } else { current.channel(c).clone() };
            let s =
                SubbandSet::new(ms, stash.vd.channel(c).clone(), stash.hd.channel(c).clone(), stash.dd.channel(c).clone(), (2 * h, 2 * w))?;
            depool_inverse(&s, bank)
        });
        current = FeatureMap::from_channels(fields.into_iter().collect::<Result<Vec<_>>>()?);
    }
    let cropped = current.channels().iter().map(|c| crop(c, p.original_shape)).collect::<Result<Vec<_>>>()?;
    Ok(FeatureMap::from_channels(cropped))
}
