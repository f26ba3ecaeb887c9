//! Fusion quality metrics: SD, VIF, AG, SCD and EN, plus PSNR for
//! reconstruction fidelity.
//!
//! SD, AG and VIF work on the 8-bit scale (samples times 255). EN bins
//! samples with the same quantizer used for writing images.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::loss::{filter_valid, gaussian_taps};
use crate::pnm::quantize_u8;
use crate::tensor::Field;

const SCALE: f64 = 255.0;

/// Population standard deviation on the 8-bit scale.
pub fn metric_sd(f: &Field) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::param("SD of an empty image"));
    }
    let n = f.len() as f64;
    let mean = f.data().iter().map(|v| v * SCALE).sum::<f64>() / n;
    let var = f.data().iter().map(|v| (v * SCALE - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Mean of `sqrt((gx² + gy²) / 2)` over forward differences on the
/// `(H-1) x (W-1)` grid, 8-bit scale.
pub fn metric_ag(f: &Field) -> Result<f64> {
    let (h, w) = f.shape();
    if h < 2 || w < 2 {
        return Err(Error::param(format!("AG needs at least 2x2 samples, got {h}x{w}")));
    }
    let mut acc = 0.0;
    for i in 0..h - 1 {
        for j in 0..w - 1 {
            let v = f.get(i, j);
            let gx = (f.get(i, j + 1) - v) * SCALE;
            let gy = (f.get(i + 1, j) - v) * SCALE;
            acc += ((gx * gx + gy * gy) / 2.0).sqrt();
        }
    }
    Ok(acc / ((h - 1) * (w - 1)) as f64)
}

/// 256-bin histogram of quantized samples.
pub fn histogram(f: &Field) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in f.data() {
        hist[quantize_u8(v) as usize] += 1;
    }
    hist
}

/// Shannon entropy of the 256-bin histogram, in bits.
pub fn metric_en(f: &Field) -> f64 {
    let hist = histogram(f);
    let n = f.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * (1.0 / p).log2()
        })
        .sum::<f64>()
}

/// Pearson correlation; an operand without variance gives 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_flat(a, saa) || is_flat(b, sbb) {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Zero variance up to the rounding of the mean.
fn is_flat(x: &[f64], ss: f64) -> bool {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ss <= x.len() as f64 * (1e-13 * scale).powi(2)
}

/// `r(F - B, A) + r(F - A, B)`.
pub fn metric_scd(f: &Field, a: &Field, b: &Field) -> Result<f64> {
    f.ensure_same_shape(a)?;
    f.ensure_same_shape(b)?;
    let fb: Vec<f64> = f.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let fa: Vec<f64> = f.data().iter().zip(a.data()).map(|(x, y)| x - y).collect();
    Ok(pearson(&fb, a.data()) + pearson(&fa, b.data()))
}

pub const VIF_SCALES: usize = 4;
pub const VIF_NOISE_VAR: f64 = 2.0;
const VIF_EPS: f64 = 1e-10;

/// Window size and sigma of VIF scale `s` (1-based).
pub fn vif_window(s: usize) -> (usize, f64) {
    let base = 1usize << (5 - s);
    (base + 1, base as f64 / 5.0)
}

/// Per-scale (numerator, denominator) information sums.
pub fn vif_terms(fused: &Field, reference: &Field) -> Result<Vec<(f64, f64)>> {
    fused.ensure_same_shape(reference)?;
    let (mut h, mut w) = reference.shape();
    let mut r: Vec<f64> = reference.data().iter().map(|v| v * SCALE).collect();
    let mut d: Vec<f64> = fused.data().iter().map(|v| v * SCALE).collect();
    let mut out = Vec::with_capacity(VIF_SCALES);
    for s in 1..=VIF_SCALES {
        let (size, sigma) = vif_window(s);
        let taps = gaussian_taps(size, sigma);
        let too_small = |h: usize, w: usize| h < size || w < size;
        if s > 1 {
            if too_small(h, w) {
                return Err(Error::param("image too small for the VIF scales"));
            }
            let (fh, fw) = (h - size + 1, w - size + 1);
            let rf = filter_valid(&r, h, w, &taps);
            let df = filter_valid(&d, h, w, &taps);
            let (nh, nw) = (fh.div_ceil(2), fw.div_ceil(2));
            let sub = |x: &[f64]| -> Vec<f64> {
                (0..nh).flat_map(|i| (0..nw).map(move |j| (i, j))).map(|(i, j)| x[2 * i * fw + 2 * j]).collect()
            };
            r = sub(&rf);
            d = sub(&df);
            h = nh;
            w = nw;
        }
        if too_small(h, w) {
            return Err(Error::param(format!("image too small for VIF scale {s} ({h}x{w} against a {size}x{size} window)")));
        }
        let mu1 = filter_valid(&r, h, w, &taps);
        let mu2 = filter_valid(&d, h, w, &taps);
        let rr: Vec<f64> = r.iter().map(|v| v * v).collect();
        let dd: Vec<f64> = d.iter().map(|v| v * v).collect();
        let rd: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a * b).collect();
        let s11 = filter_valid(&rr, h, w, &taps);
        let s22 = filter_valid(&dd, h, w, &taps);
        let s12 = filter_valid(&rd, h, w, &taps);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..mu1.len() {
            let (n, dn) = vif_pixel(mu1[k], mu2[k], s11[k], s22[k], s12[k]);
            num += n;
            den += dn;
        }
        out.push((num, den));
    }
    Ok(out)
}

/// Information terms at one window position from local moments.
pub(crate) fn vif_pixel(mu1: f64, mu2: f64, e11: f64, e22: f64, e12: f64) -> (f64, f64) {
    let mut sigma1_sq = (e11 - mu1 * mu1).max(0.0);
    let sigma2_sq = (e22 - mu2 * mu2).max(0.0);
    let sigma12 = e12 - mu1 * mu2;
    let mut g = sigma12 / (sigma1_sq + VIF_EPS);
    let mut sv_sq = sigma2_sq - g * sigma12;
    if sigma1_sq < VIF_EPS {
        g = 0.0;
        sv_sq = sigma2_sq;
        sigma1_sq = 0.0;
    }
    if sigma2_sq < VIF_EPS {
        g = 0.0;
        sv_sq = 0.0;
    }
    if g < 0.0 {
        sv_sq = sigma2_sq;
        g = 0.0;
    }
    if sv_sq <= VIF_EPS {
        sv_sq = VIF_EPS;
    }
    let num = (1.0 + g * g * sigma1_sq / (sv_sq + VIF_NOISE_VAR)).log10();
    let den = (1.0 + sigma1_sq / VIF_NOISE_VAR).log10();
    (num, den)
}

/// Pixel-domain VIF of `fused` against `reference`: information sums over
/// the four scales, numerator over denominator. A reference with no
/// variance at any scale scores 1 when the numerator is also zero.
pub fn metric_vif(fused: &Field, reference: &Field) -> Result<f64> {
    let terms = vif_terms(fused, reference)?;
    let num: f64 = terms.iter().map(|t| t.0).sum();
    let den: f64 = terms.iter().map(|t| t.1).sum();
    if den == 0.0 {
        return Ok(if num == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// PSNR in dB for data in `[0, 1]`; infinite for identical fields.
pub fn psnr(a: &Field, b: &Field) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub pair: String,
    pub sd: f64,
    pub vif: f64,
    pub ag: f64,
    pub scd: f64,
    pub en: f64,
}

/// SD, AG and EN of the fused image; SCD against both sources; VIF as the
/// mean over the two sources.
pub fn evaluate_pair(pair: impl Into<String>, fused: &Field, ir: &Field, vi: &Field) -> Result<MetricReport> {
    fused.ensure_same_shape(ir)?;
    fused.ensure_same_shape(vi)?;
    Ok(MetricReport {
        pair: pair.into(),
        sd: metric_sd(fused)?,
        vif: (metric_vif(fused, ir)? + metric_vif(fused, vi)?) / 2.0,
        ag: metric_ag(fused)?,
        scd: metric_scd(fused, ir, vi)?,
        en: metric_en(fused),
    })
}

/// Field-wise arithmetic mean, labelled `mean`.
pub fn mean_report(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Some(MetricReport {
        pair: "mean".into(),
        sd: avg(|r| r.sd),
        vif: avg(|r| r.vif),
        ag: avg(|r| r.ag),
        scd: avg(|r| r.scd),
        en: avg(|r| r.en),
    })
}

pub const CSV_HEADER: &str = "pair,sd,vif,ag,scd,en";

/// Four decimals; values that round to zero print without a sign.
pub fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

pub fn csv_row(r: &MetricReport) -> String {
    let cols = [r.sd, r.vif, r.ag, r.scd, r.en].map(fmt4);
    format!("{},{}", r.pair, cols.join(","))
}

/// Header, one row per report in order, then the mean row.
pub fn format_csv(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").expect("write to string");
    for r in reports {
        writeln!(out, "{}", csv_row(r)).expect("write to string");
    }
    if let Some(m) = mean_report(reports) {
        writeln!(out, "{}", csv_row(&m)).expect("write to string");
    }
    out
}
