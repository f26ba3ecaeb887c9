//! Analysis (de-pooling) and its adjoint.

use crate::depool::bank::{KernelBank, Subband};
use crate::error::{Error, Result};
use crate::tensor::Field;

/// The four half-resolution outputs of one decomposition step.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub ms: Field,
    pub vd: Field,
    pub hd: Field,
    pub dd: Field,
    original_shape: (usize, usize),
}

impl SubbandSet {
    /// Bundles four subbands; each must be `(H/2) x (W/2)` for an even
    /// `original_shape` of `(H, W)`.
    pub fn new(ms: Field, vd: Field, hd: Field, dd: Field, original_shape: (usize, usize)) -> Result<Self> {
        let (h, w) = original_shape;
        if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!("original shape {h}x{w} must be even and positive")));
        }
        let expect = (h / 2, w / 2);
        for (band, f) in Subband::ALL.iter().zip([&ms, &vd, &hd, &dd]) {
            if f.shape() != expect {
                return Err(Error::shape(format!(
                    "{} subband is {}x{}, expected {}x{} for a {h}x{w} input",
                    band.suffix(),
                    f.height(),
                    f.width(),
                    expect.0,
                    expect.1
                )));
            }
        }
        Ok(SubbandSet { ms, vd, hd, dd, original_shape })
    }

    pub fn zeros(original_shape: (usize, usize)) -> Result<Self> {
        let (h, w) = original_shape;
        let z = Field::zeros((h / 2).max(1), (w / 2).max(1));
        Self::new(z.clone(), z.clone(), z.clone(), z, original_shape)
    }

    pub fn original_shape(&self) -> (usize, usize) {
        self.original_shape
    }

    /// `(H/2, W/2)`.
    pub fn band_shape(&self) -> (usize, usize) {
        self.ms.shape()
    }

    pub fn band(&self, band: Subband) -> &Field {
        match band {
            Subband::Ms => &self.ms,
            Subband::Vd => &self.vd,
            Subband::Hd => &self.hd,
            Subband::Dd => &self.dd,
        }
    }

    pub fn band_mut(&mut self, band: Subband) -> &mut Field {
        match band {
            Subband::Ms => &mut self.ms,
            Subband::Vd => &mut self.vd,
            Subband::Hd => &mut self.hd,
            Subband::Dd => &mut self.dd,
        }
    }

    /// Concatenation MS, VD, HD, DD, each row-major. This is the row order of
    /// [`crate::depool::build_operator_matrix`].
    pub fn flatten(&self) -> Vec<f64> {
        Subband::ALL.iter().flat_map(|&b| self.band(b).data().iter().copied()).collect()
    }

    /// Inverse of [`SubbandSet::flatten`].
    pub fn from_flat(flat: &[f64], original_shape: (usize, usize)) -> Result<Self> {
        let (h, w) = original_shape;
        let q = (h / 2) * (w / 2);
        if flat.len() != 4 * q {
            return Err(Error::shape(format!("{} coefficients for a {h}x{w} subband set, expected {}", flat.len(), 4 * q)));
        }
        let band = |k: usize| Field::from_vec(h / 2, w / 2, flat[k * q..(k + 1) * q].to_vec());
        Self::new(band(0), band(1), band(2), band(3), original_shape)
    }

    pub fn dot(&self, other: &SubbandSet) -> Result<f64> {
        Subband::ALL.iter().try_fold(0.0, |acc, &b| Ok(acc + self.band(b).dot(other.band(b))?))
    }
}

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n-2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    debug_assert!((0..n).contains(&i));
    i as usize
}

fn check_analysis_input(x: &Field, bank: &KernelBank) -> Result<()> {
    let (h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("de-pooling needs even dimensions, got {h}x{w}; pad with pad_to_even first")));
    }
    if h < bank.side() || w < bank.side() {
        return Err(Error::shape(format!("{h}x{w} input is smaller than the {0}x{0} kernels", bank.side())));
    }
    Ok(())
}

/// Reflect-padded copy with `pad` extra samples on every side.
fn reflect_pad(x: &Field, pad: usize) -> Field {
    if pad == 0 {
        return x.clone();
    }
    let (h, w) = x.shape();
    let p = pad as isize;
    Field::from_fn(h + 2 * pad, w + 2 * pad, |i, j| x.get(reflect(i as isize - p, h), reflect(j as isize - p, w)))
}

/// Tree sum over a power-of-two slice. With ±1 taps on a constant input
/// every partial sum is a power-of-two multiple of the constant or zero, so
/// constants decompose exactly.
fn pairwise_sum(v: &mut [f64]) -> f64 {
    debug_assert!(v.len().is_power_of_two());
    let mut n = v.len();
    while n > 1 {
        n /= 2;
        for k in 0..n {
            v[k] = v[2 * k] + v[2 * k + 1];
        }
    }
    v[0]
}

/// Decomposes `x` into four subbands by stride-2 correlation with the raw
/// kernel taps.
pub fn depool_forward(x: &Field, bank: &KernelBank) -> Result<SubbandSet> {
    check_analysis_input(x, bank)?;
    if let Some(index) = x.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain { index });
    }
    let (h, w) = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let padded = reflect_pad(x, bank.padding());
    let pw = padded.width();
    let src = padded.data();
    let side = bank.side();
    let bands = Subband::ALL.map(|band| {
        let taps = bank.kernel(band);
        let mut out = Vec::with_capacity(oh * ow);
        for i in 0..oh {
            for j in 0..ow {
                let mut prods = [0.0f64; 16];
                for r in 0..side {
                    let row = &src[(2 * i + r) * pw + 2 * j..][..side];
                    for (c, (t, v)) in taps[r * side..(r + 1) * side].iter().zip(row).enumerate() {
                        prods[r * side + c] = t * v;
                    }
                }
                out.push(pairwise_sum(&mut prods[..side * side]));
            }
        }
        Field::from_vec(oh, ow, out)
    });
    let [ms, vd, hd, dd] = bands;
    Ok(SubbandSet { ms, vd, hd, dd, original_shape: (h, w) })
}

fn check_set(s: &SubbandSet, bank: &KernelBank) -> Result<()> {
    let (h, w) = s.original_shape;
    if h < bank.side() || w < bank.side() {
        return Err(Error::shape(format!("{h}x{w} original shape is smaller than the {0}x{0} kernels", bank.side())));
    }
    for b in Subband::ALL {
        if s.band(b).shape() != (h / 2, w / 2) {
            return Err(Error::shape(format!("{} subband does not match original shape {h}x{w}", b.suffix())));
        }
    }
    Ok(())
}

/// Transpose of [`depool_forward`]: scatter-adds every kernel weighted by its
/// coefficients onto the padded grid, then folds the padding back onto the
/// interior samples it mirrors.
pub fn depool_adjoint(s: &SubbandSet, bank: &KernelBank) -> Result<Field> {
    check_set(s, bank)?;
    let (h, w) = s.original_shape;
    let pad = bank.padding();
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let side = bank.side();
    let mut padded = vec![0.0; ph * pw];
    for band in Subband::ALL {
        let taps = bank.kernel(band);
        let coeffs = s.band(band);
        for i in 0..h / 2 {
            for j in 0..w / 2 {
                let c = coeffs.get(i, j);
                if c == 0.0 {
                    continue;
                }
                for r in 0..side {
                    let row = &mut padded[(2 * i + r) * pw + 2 * j..][..side];
                    for (dst, t) in row.iter_mut().zip(&taps[r * side..(r + 1) * side]) {
                        *dst += c * t;
                    }
                }
            }
        }
    }
    if pad == 0 {
        return Ok(Field::from_vec(h, w, padded));
    }
    let mut out = Field::zeros(h, w);
    let p = pad as isize;
    for i in 0..ph {
        let oi = reflect(i as isize - p, h);
        for j in 0..pw {
            let oj = reflect(j as isize - p, w);
            let k = oi * w + oj;
            out.data_mut()[k] += padded[i * pw + j];
        }
    }
    Ok(out)
}
