//! Dense single-channel grids and channel stacks.
//!
//! [`Field`] is the unit of all transform and metric math: a row-major grid of
//! `f64` samples with explicit height and width. [`FeatureMap`] stacks fields
//! of one shape into channels, and [`RgbImage`] holds the three planes of a
//! color image with samples in `[0, 1]`.

use crate::error::{Error, Result};

/// A 2-D real-valued grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Field {
    /// Builds a field from row-major samples.
    ///
    /// Fails when the sample count does not match `height * width`, when a
    /// dimension is zero, or when a sample is not finite.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!("field dimensions must be positive, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!("{height}x{width} field needs {} samples, got {}", height * width, data.len())));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain { index });
        }
        Ok(Field { height, width, data })
    }

    pub(crate) fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Field { height, width, data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        Field { height, width, data: vec![value; height * width] }
    }

    /// Builds a field by evaluating `f(row, col)` at every position.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Field { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the samples. Callers may write non-finite values;
    /// operations that require finite input check for them.
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two same-shape fields.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_vec(self.height, self.width, data))
    }

    pub fn scale(&self, factor: f64) -> Field {
        self.map(|v| v * factor)
    }

    pub fn clamp_unit(&self) -> Field {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn transpose(&self) -> Field {
        Field::from_fn(self.width, self.height, |i, j| self.get(j, i))
    }

    /// Top-left `height x width` window.
    pub fn crop(&self, height: usize, width: usize) -> Result<Field> {
        if height == 0 || width == 0 || height > self.height || width > self.width {
            return Err(Error::shape(format!("cannot crop {}x{} field to {height}x{width}", self.height, self.width)));
        }
        Ok(Field::from_fn(height, width, |i, j| self.get(i, j)))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub(crate) fn ensure_same_shape(&self, other: &Field) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!("{}x{} vs {}x{}", self.height, self.width, other.height, other.width)));
        }
        Ok(())
    }
}

/// A stack of same-shape fields, one per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: Vec<Field>,
}

impl FeatureMap {
    pub fn new(channels: Vec<Field>) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::shape("feature map needs at least one channel"))?;
        let shape = first.shape();
        if let Some((c, f)) = channels.iter().enumerate().find(|(_, f)| f.shape() != shape) {
            return Err(Error::shape(format!("channel {c} is {}x{}, channel 0 is {}x{}", f.height(), f.width(), shape.0, shape.1)));
        }
        Ok(FeatureMap { channels })
    }

    pub(crate) fn from_channels(channels: Vec<Field>) -> Self {
        debug_assert!(!channels.is_empty());
        FeatureMap { channels }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0, "feature map needs at least one channel");
        FeatureMap { channels: vec![Field::zeros(height, width); channels] }
    }

    pub fn single(field: Field) -> Self {
        FeatureMap { channels: vec![field] }
    }

    #[inline]
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    /// `(channels, height, width)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_channels(), self.height(), self.width())
    }

    pub fn channel(&self, c: usize) -> &Field {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [Field] {
        &mut self.channels
    }

    pub fn into_channels(self) -> Vec<Field> {
        self.channels
    }

    /// Elementwise combination of two feature maps with identical dims.
    pub fn zip_map(&self, other: &FeatureMap, f: impl Fn(f64, f64) -> f64) -> Result<FeatureMap> {
        self.ensure_same_dims(other)?;
        let channels = self.channels.iter().zip(&other.channels).map(|(a, b)| a.zip_map(b, &f)).collect::<Result<Vec<_>>>()?;
        Ok(FeatureMap { channels })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureMap {
        FeatureMap { channels: self.channels.iter().map(|c| c.map(&f)).collect() }
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> Result<f64> {
        self.ensure_same_dims(other)?;
        self.channels.iter().zip(&other.channels).try_fold(0.0f64, |m, (a, b)| Ok(m.max(a.max_abs_diff(b)?)))
    }

    pub fn all_finite(&self) -> bool {
        self.channels.iter().all(Field::all_finite)
    }

    pub(crate) fn ensure_same_dims(&self, other: &FeatureMap) -> Result<()> {
        if self.dims() != other.dims() {
            let (c0, h0, w0) = self.dims();
            let (c1, h1, w1) = other.dims();
            return Err(Error::shape(format!("feature maps {c0}x{h0}x{w0} vs {c1}x{h1}x{w1}")));
        }
        Ok(())
    }
}

/// A color image as three planes with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub r: Field,
    pub g: Field,
    pub b: Field,
}

impl RgbImage {
    pub fn new(r: Field, g: Field, b: Field) -> Result<Self> {
        r.ensure_same_shape(&g)?;
        r.ensure_same_shape(&b)?;
        Ok(RgbImage { r, g, b })
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.r.shape()
    }
}
