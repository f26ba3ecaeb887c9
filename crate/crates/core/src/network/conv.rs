//! Convolution layers evaluated as im2col followed by a single-precision GEMM.
//!
//! The reduction index runs over input channels outermost and kernel taps
//! row-major within a channel.

use crate::depool::transform::reflect;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tensor::{FeatureMap, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    /// `(out, in, k, k)` row-major.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn new(
        name: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
        activation: Activation,
    ) -> Result<Self> {
        let name = name.into();
        if !matches!(kernel_size, 1 | 3) {
            return Err(Error::param(format!("{name}: kernel size {kernel_size} is not 1 or 3")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::param(format!("{name}: channel counts must be positive")));
        }
        let expect = out_channels * in_channels * kernel_size * kernel_size;
        if weights.len() != expect || bias.len() != out_channels {
            return Err(Error::shape(format!(
                "{name}: {} weights and {} biases, expected {expect} and {out_channels}",
                weights.len(),
                bias.len()
            )));
        }
        Ok(ConvLayer { name, in_channels, out_channels, kernel_size, weights, bias, activation })
    }

    /// A layer with every weight and bias zero.
    pub fn zeros(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation) -> Self {
        ConvLayer {
            name: name.into(),
            in_channels,
            out_channels,
            kernel_size,
            weights: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![0.0; out_channels],
            activation,
        }
    }

    /// Length of one reduction: `in * k * k`.
    pub fn reduction_len(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }
}

/// Columns of the patch matrix, `(in * k * k) x (h * w)` row-major in `f32`.
/// 3x3 patches read the input through reflect padding of one sample.
fn im2col(x: &FeatureMap, k: usize) -> Vec<f32> {
    let (c, h, w) = x.dims();
    let n = h * w;
    let mut cols = vec![0.0f32; c * k * k * n];
    let half = (k / 2) as isize;
    let row_src: Vec<Vec<usize>> = (0..k).map(|dy| (0..h).map(|i| reflect(i as isize + dy as isize - half, h)).collect()).collect();
    let col_src: Vec<Vec<usize>> = (0..k).map(|dx| (0..w).map(|j| reflect(j as isize + dx as isize - half, w)).collect()).collect();
    for (ch, field) in x.channels().iter().enumerate() {
        let src = field.data();
        for (dy, rows) in row_src.iter().enumerate() {
            for (dx, cols_dx) in col_src.iter().enumerate() {
                let row = (ch * k + dy) * k + dx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for i in 0..h {
                    let base = rows[i] * w;
                    let out = &mut dst[i * w..(i + 1) * w];
                    for (o, &sj) in out.iter_mut().zip(cols_dx) {
                        *o = src[base + sj] as f32;
                    }
                }
            }
        }
    }
    cols
}

/// Rows of output channels handled by one GEMM call in parallel mode.
const ROW_BLOCK: usize = 32;

/// `out = weights * cols`, optionally split over output-channel blocks. Each
/// output element is reduced by the same kernel either way.
fn gemm_rows(layer: &ConvLayer, cols: &[f32], n: usize, execution: Execution) -> Vec<f32> {
    let kdim = layer.reduction_len();
    let m = layer.out_channels;
    let blocks = m.div_ceil(ROW_BLOCK);
    let run = |b: usize| -> Vec<f32> {
        let r0 = b * ROW_BLOCK;
        let rows = ROW_BLOCK.min(m - r0);
        let mut out = vec![0.0f32; rows * n];
        let a = &layer.weights[r0 * kdim..(r0 + rows) * kdim];
        // SAFETY: `a` is rows x kdim, `cols` is kdim x n and `out` is
        // rows x n, all row-major with the strides passed.
        unsafe {
            matrixmultiply::sgemm(
                rows,
                kdim,
                n,
                1.0,
                a.as_ptr(),
                kdim as isize,
                1,
                cols.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        out
    };
    execution.map(blocks, run).concat()
}

pub fn conv2d_forward(x: &FeatureMap, layer: &ConvLayer) -> Result<FeatureMap> {
    conv2d_forward_with(x, layer, Execution::default())
}

pub fn conv2d_forward_with(x: &FeatureMap, layer: &ConvLayer, execution: Execution) -> Result<FeatureMap> {
    let (c, h, w) = x.dims();
    if c != layer.in_channels {
        return Err(Error::shape(format!("{}: expects {} input channels, got {c}", layer.name, layer.in_channels)));
    }
    let k = layer.kernel_size;
    if k == 3 && (h < 2 || w < 2) {
        return Err(Error::shape(format!("{}: {h}x{w} input is too small for reflect padding", layer.name)));
    }
    let n = h * w;
    let cols = im2col(x, k);
    let out = gemm_rows(layer, &cols, n, execution);
    let channels = out
        .chunks_exact(n)
        .zip(&layer.bias)
        .map(|(plane, &b)| {
            let data = plane
                .iter()
                .map(|&v| {
                    let v = v + b;
                    let v = match layer.activation {
                        Activation::Relu => v.max(0.0),
                        Activation::None => v,
                    };
                    v as f64
                })
                .collect();
            Field::from_vec(h, w, data)
        })
        .collect();
    Ok(FeatureMap::from_channels(channels))
}
