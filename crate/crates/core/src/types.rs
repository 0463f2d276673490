//! Shared value types: probability maps, label masks, images and feature maps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mask sentinel for "no supervision at this pixel".
pub const IGNORE: u16 = u16::MAX;

/// Absolute tolerance on the per-pixel probability sum.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// Per-pixel class probabilities, row-major `H x W x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbMap {
    /// Wraps raw data after checking its length. Value invariants are
    /// checked separately by [`ProbMap::validate`].
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("probability map needs at least one class"));
        }
        if data.len() != height * width * num_classes {
            return Err(Error::DimensionMismatch(format!(
                "probability map {height}x{width}x{num_classes} needs {} values, got {}",
                height * width * num_classes,
                data.len()
            )));
        }
        Ok(Self { height, width, num_classes, data })
    }

    /// Uniform `1/K` map.
    pub fn uniform(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        let v = 1.0 / num_classes as f64;
        Self::new(height, width, num_classes, vec![v; height * width * num_classes])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Probabilities of pixel `index` (row-major).
    pub fn pixel(&self, index: usize) -> &[f64] {
        let k = self.num_classes;
        &self.data[index * k..(index + 1) * k]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_classes)
    }

    /// Checks that every value lies in `[0, 1]` and every pixel sums to one
    /// within [`NORMALIZATION_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        for (pixel, probs) in self.pixels().enumerate() {
            let mut sum = 0.0;
            for (class, &value) in probs.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::OutOfRange { pixel, class, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::NotNormalized { pixel, sum });
            }
        }
        Ok(())
    }
}

/// Same as [`ProbMap::validate`].
pub fn validate_prob_map(p: &ProbMap) -> Result<()> {
    p.validate()
}

/// Per-pixel class labels with [`IGNORE`] for unsupervised pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<u16>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<u16>) -> Result<Self> {
        if num_classes == 0 || num_classes >= IGNORE as usize {
            return Err(Error::invalid(format!("unsupported class count {num_classes}")));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v != IGNORE && v as usize >= num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Self { height, width, num_classes, data })
    }

    /// A mask where every pixel is [`IGNORE`].
    pub fn ignored(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        Self::new(height, width, num_classes, vec![IGNORE; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.width + col]
    }

    /// Number of non-IGNORE pixels.
    pub fn labeled_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != IGNORE).count()
    }

    /// Pixel count per class (IGNORE excluded).
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &v in &self.data {
            if v != IGNORE {
                counts[v as usize] += 1;
            }
        }
        counts
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }
}

/// 8-bit image with one or three channels, row-major `H x W x C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "image {height}x{width}x{channels} needs {} bytes, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    /// Image filled with one color (length must equal `channels`).
    pub fn filled(height: usize, width: usize, color: &[u8]) -> Result<Self> {
        let data = color.iter().copied().cycle().take(height * width * color.len()).collect();
        Self::new(height, width, color.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// RGB triple of a pixel; grayscale values are replicated.
    pub fn rgb(&self, row: usize, col: usize) -> [u8; 3] {
        let px = self.pixel(row, col);
        if self.channels == 1 {
            [px[0]; 3]
        } else {
            [px[0], px[1], px[2]]
        }
    }
}

/// Per-pixel feature vectors, row-major `H x W x D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if data.len() != height * width * dim {
            return Err(Error::DimensionMismatch(format!(
                "feature map {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self { height, width, dim, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Image-level annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ImageLabel {
    Normal = 0,
    Lesion = 1,
}

impl ImageLabel {
    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }
}

impl TryFrom<u8> for ImageLabel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(ImageLabel::Normal),
            1 => Ok(ImageLabel::Lesion),
            v => Err(Error::invalid(format!("image label must be 0 or 1, got {v}"))),
        }
    }
}

/// Index of the highest probability per pixel, ties to the lowest class.
pub fn argmax_map(p: &ProbMap) -> LabelMask {
    let data = p.pixels().map(|probs| argmax(probs) as u16).collect();
    LabelMask { height: p.height, width: p.width, num_classes: p.num_classes, data }
}

/// Highest probability per pixel.
pub fn max_map(p: &ProbMap) -> Vec<f64> {
    p.pixels().map(|probs| probs[argmax(probs)]).collect()
}

/// First index of the maximum (strictly greater wins).
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
