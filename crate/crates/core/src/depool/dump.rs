//! Subband dumps: min-max mapped PGMs for viewing, raw little-endian `f64`
//! planes for lossless reloading, and a text sidecar with shape and ranges.
//!
//! For a stem `s` the files are `s.ms.pgm` .. `s.dd.pgm`, `s.ms.f64` ..
//! `s.dd.f64` and `s.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::depool::bank::Subband;
use crate::depool::transform::SubbandSet;
use crate::error::{Error, Result};
use crate::pnm::{load_gray, save_gray};
use crate::tensor::Field;

pub fn band_path(dir: &Path, stem: &str, band: Subband, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{}.{ext}", band.suffix()))
}

pub fn sidecar_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.txt"))
}

/// Affine map of `f` onto `[0, 1]`; a flat band maps to 0.
fn normalize(f: &Field) -> (Field, f64, f64) {
    let (lo, hi) = f.min_max();
    let span = hi - lo;
    let mapped = if span > 0.0 { f.map(|v| (v - lo) / span) } else { f.map(|_| 0.0) };
    (mapped, lo, hi)
}

pub fn dump_subbands(s: &SubbandSet, dir: &Path, stem: &str) -> Result<()> {
    let (h, w) = s.original_shape();
    let mut sidecar = format!("height {h}\nwidth {w}\n");
    for band in Subband::ALL {
        let f = s.band(band);
        let (mapped, lo, hi) = normalize(f);
        save_gray(&mapped, band_path(dir, stem, band, "pgm"))?;
        let raw: Vec<u8> = f.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = band_path(dir, stem, band, "f64");
        fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
        sidecar.push_str(&format!("{} {lo} {hi}\n", band.suffix()));
    }
    let path = sidecar_path(dir, stem);
    fs::write(&path, sidecar).map_err(|e| Error::io(&path, e))
}

struct Sidecar {
    shape: (usize, usize),
    ranges: [(f64, f64); 4],
}

fn parse_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::param(format!("{}: {msg}", path.display()));
    let (mut h, mut w) = (None, None);
    let mut ranges = [None; 4];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            parts.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(format!("malformed line {line:?}")))
        };
        match parts[0] {
            "height" => h = Some(num(1)? as usize),
            "width" => w = Some(num(1)? as usize),
            key => {
                let band = Subband::ALL.into_iter().find(|b| b.suffix() == key).ok_or_else(|| bad(format!("unknown key {key:?}")))?;
                ranges[band.index()] = Some((num(1)?, num(2)?));
            }
        }
    }
    let shape = (h.ok_or_else(|| bad("missing height".into()))?, w.ok_or_else(|| bad("missing width".into()))?);
    let mut out = [(0.0, 0.0); 4];
    for (o, r) in out.iter_mut().zip(ranges) {
        *o = r.ok_or_else(|| bad("missing subband range".into()))?;
    }
    Ok(Sidecar { shape, ranges: out })
}

/// Reloads a dump. Raw planes are preferred; when one is absent the PGM is
/// mapped back through the recorded range (lossy).
pub fn load_subbands(dir: &Path, stem: &str) -> Result<SubbandSet> {
    let meta = parse_sidecar(&sidecar_path(dir, stem))?;
    let (h, w) = meta.shape;
    let (bh, bw) = (h / 2, w / 2);
    let mut bands = Vec::with_capacity(4);
    for band in Subband::ALL {
        let raw_path = band_path(dir, stem, band, "f64");
        let field = if raw_path.exists() {
            let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
            if bytes.len() != bh * bw * 8 {
                return Err(Error::Load {
                    path: raw_path,
                    offset: bytes.len(),
                    message: format!("expected {} bytes for a {bh}x{bw} plane", bh * bw * 8),
                });
            }
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
            Field::new(bh, bw, data)?
        } else {
            let (lo, hi) = meta.ranges[band.index()];
            load_gray(band_path(dir, stem, band, "pgm"))?.map(|v| lo + v * (hi - lo))
        };
        bands.push(field);
    }
    let dd = bands.pop().expect("four bands");
    let hd = bands.pop().expect("four bands");
    let vd = bands.pop().expect("four bands");
    let ms = bands.pop().expect("four bands");
    SubbandSet::new(ms, vd, hd, dd, meta.shape)
}
