//! Binary PGM (P5) and PPM (P6) reading and writing.
//!
//! Samples are scaled to `[0, 1]` by dividing by the header maxval. Files with
//! maxval above 255 carry big-endian 16-bit samples. Writing always produces
//! maxval 255 with clamp-then-round-half-up quantization.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Field, RgbImage};

/// A decoded PNM image.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Gray(Field),
    Color(RgbImage),
}

impl Image {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Image::Gray(f) => f.shape(),
            Image::Color(c) => c.shape(),
        }
    }
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes).map_err(|(offset, message)| Error::Load { path: path.to_path_buf(), offset, message })
}

/// Loads a grayscale image; color files are rejected.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    match load_pnm(path)? {
        Image::Gray(f) => Ok(f),
        Image::Color(_) => {
            Err(Error::Load { path: path.to_path_buf(), offset: 0, message: "expected a grayscale (P5) image, found color (P6)".into() })
        }
    }
}

pub fn save_pnm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(image)).map_err(|e| Error::io(path, e))
}

pub fn save_gray(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_gray(field)).map_err(|e| Error::io(path, e))
}

pub fn save_rgb(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_rgb(image)).map_err(|e| Error::io(path, e))
}

/// Clamp to `[0, 1]`, scale to 255 and round half up.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    match image {
        Image::Gray(f) => encode_gray(f),
        Image::Color(c) => encode_rgb(c),
    }
}

pub fn encode_gray(field: &Field) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", field.width(), field.height()).into_bytes();
    out.extend(field.data().iter().map(|&v| quantize_u8(v)));
    out
}

pub fn encode_rgb(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.reserve(image.r.len() * 3);
    for ((&r, &g), &b) in image.r.data().iter().zip(image.g.data()).zip(image.b.data()) {
        out.extend([quantize_u8(r), quantize_u8(g), quantize_u8(b)]);
    }
    out
}

type DecodeError = (usize, String);

struct Header {
    color: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, DecodeError> {
    if bytes.len() < 2 {
        return Err((0, "file too short for a PNM magic number".into()));
    }
    let color = match &bytes[..2] {
        b"P5" => false,
        b"P6" => true,
        other => return Err((0, format!("unsupported magic {:?}, expected P5 or P6", String::from_utf8_lossy(other)))),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err((start, format!("expected {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text.parse().map_err(|_| (start, format!("{name} {text} out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err((pos, "expected a single whitespace byte after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err((2, format!("zero-sized image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err((2, format!("maxval {maxval} outside 1..=65535")));
    }
    Ok(Header { color, width: width as usize, height: height as usize, maxval, data_offset: pos })
}

/// Decodes an in-memory P5/P6 file. Errors carry the byte offset.
pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, (usize, String)> {
    let header = parse_header(bytes)?;
    let planes = if header.color { 3 } else { 1 };
    let sample_bytes = if header.maxval > 255 { 2 } else { 1 };
    let count = header.width * header.height * planes;
    let payload = &bytes[header.data_offset..];
    if payload.len() < count * sample_bytes {
        return Err((
            header.data_offset + payload.len(),
            format!("truncated payload: expected {} bytes, found {}", count * sample_bytes, payload.len()),
        ));
    }
    let scale = 1.0 / f64::from(header.maxval);
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let raw =
            if sample_bytes == 2 { u32::from(u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]])) } else { u32::from(payload[k]) };
        if raw > header.maxval {
            return Err((header.data_offset + k * sample_bytes, format!("sample {raw} exceeds maxval {}", header.maxval)));
        }
        samples.push(f64::from(raw) * scale);
    }
    let (h, w) = (header.height, header.width);
    if header.color {
        let mut planes = [Vec::with_capacity(h * w), Vec::with_capacity(h * w), Vec::with_capacity(h * w)];
        for px in samples.chunks_exact(3) {
            for (plane, &v) in planes.iter_mut().zip(px) {
                plane.push(v);
            }
        }
        let [r, g, b] = planes;
        Ok(Image::Color(RgbImage { r: Field::from_vec(h, w, r), g: Field::from_vec(h, w, g), b: Field::from_vec(h, w, b) }))
    } else {
        Ok(Image::Gray(Field::from_vec(h, w, samples)))
    }
}
