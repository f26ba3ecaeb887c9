//! Full-range BT.601 YCbCr conversion (JPEG convention, chroma offset 0.5).

use crate::error::Result;
use crate::tensor::{Field, RgbImage};

/// Forward matrix acting on (R, G, B); chroma rows get +0.5 afterwards.
pub const RGB_TO_YCBCR: [[f64; 3]; 3] = [[0.299, 0.587, 0.114], [-0.168736, -0.331264, 0.5], [0.5, -0.418688, -0.081312]];

/// Inverse of [`RGB_TO_YCBCR`] by cofactor expansion, so the round trip is
/// exact for the rounded published coefficients.
fn inverse_matrix() -> [[f64; 3]; 3] {
    let m = RGB_TO_YCBCR;
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    adj.map(|row| row.map(|v| v / det))
}

/// Splits an RGB image into luma and the two chroma planes.
pub fn rgb_to_ycbcr(img: &RgbImage) -> (Field, Field, Field) {
    let (h, w) = img.shape();
    let n = h * w;
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let m = RGB_TO_YCBCR;
    for k in 0..n {
        let (r, g, b) = (img.r.data()[k], img.g.data()[k], img.b.data()[k]);
        y.push(m[0][0] * r + m[0][1] * g + m[0][2] * b);
        cb.push(m[1][0] * r + m[1][1] * g + m[1][2] * b + 0.5);
        cr.push(m[2][0] * r + m[2][1] * g + m[2][2] * b + 0.5);
    }
    (Field::from_vec(h, w, y), Field::from_vec(h, w, cb), Field::from_vec(h, w, cr))
}

/// Inverse conversion without the final clamp.
pub fn ycbcr_to_rgb_unclamped(y: &Field, cb: &Field, cr: &Field) -> Result<RgbImage> {
    y.ensure_same_shape(cb)?;
    y.ensure_same_shape(cr)?;
    let (h, w) = y.shape();
    let n = h * w;
    let (mut r, mut g, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let inv = inverse_matrix();
    for k in 0..n {
        let v = [y.data()[k], cb.data()[k] - 0.5, cr.data()[k] - 0.5];
        let dot = |row: &[f64; 3]| row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        r.push(dot(&inv[0]));
        g.push(dot(&inv[1]));
        b.push(dot(&inv[2]));
    }
    Ok(RgbImage { r: Field::from_vec(h, w, r), g: Field::from_vec(h, w, g), b: Field::from_vec(h, w, b) })
}

/// Inverse of [`rgb_to_ycbcr`], clamped to `[0, 1]`.
pub fn ycbcr_to_rgb(y: &Field, cb: &Field, cr: &Field) -> Result<RgbImage> {
    let rgb = ycbcr_to_rgb_unclamped(y, cb, cr)?;
    Ok(RgbImage { r: rgb.r.clamp_unit(), g: rgb.g.clamp_unit(), b: rgb.b.clamp_unit() })
}
