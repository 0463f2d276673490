//! The three toy networks: a per-pixel softmax segmenter, a mean-pooled
//! logistic image classifier and a logistic discriminator over pooled
//! statistics of a softmax map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::types::{FeatureMap, ProbMap};

/// Per-pixel affine map followed by softmax. Weights are `(D + 1) x K`
/// row-major; the last row holds the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySegmenter {
    feature_dim: usize,
    num_classes: usize,
    weights: Vec<f64>,
}

impl ToySegmenter {
    pub fn zeros(feature_dim: usize, num_classes: usize) -> Self {
        Self { feature_dim, num_classes, weights: vec![0.0; (feature_dim + 1) * num_classes] }
    }

    pub fn from_weights(feature_dim: usize, num_classes: usize, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, (feature_dim + 1) * num_classes, "segmenter")?;
        if num_classes == 0 {
            return Err(Error::invalid("segmenter needs at least one class"));
        }
        Ok(Self { feature_dim, num_classes, weights })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Per-pixel logits, `H x W x K`.
    pub fn logits(&self, f: &FeatureMap) -> Result<FeatureMap> {
        if f.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "segmenter expects {} features, got {}",
                self.feature_dim,
                f.dim()
            )));
        }
        let k = self.num_classes;
        let bias = &self.weights[self.feature_dim * k..];
        let mut out = Vec::with_capacity(f.num_pixels() * k);
        for px in f.pixels() {
            let start = out.len();
            out.extend_from_slice(bias);
            for (d, &x) in px.iter().enumerate() {
                let row = &self.weights[d * k..(d + 1) * k];
                for (o, &wt) in out[start..].iter_mut().zip(row) {
                    *o += x * wt;
                }
            }
        }
        FeatureMap::new(f.height(), f.width(), k, out)
    }

    pub fn forward(&self, f: &FeatureMap) -> Result<ProbMap> {
        let logits = self.logits(f)?;
        Ok(softmax_map(&logits))
    }
}

/// Row-wise softmax of a logit map.
pub fn softmax_map(logits: &FeatureMap) -> ProbMap {
    let k = logits.dim();
    let mut data = Vec::with_capacity(logits.data().len());
    for z in logits.pixels() {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        let mut sum = 0.0;
        for &v in z {
            let e = math::exp(v - max);
            sum += e;
            data.push(e);
        }
        data[start..].iter_mut().for_each(|e| *e /= sum);
    }
    ProbMap::new(logits.height(), logits.width(), k, data).expect("same shape")
}

/// Logistic regression on mean-pooled pixel features. Weights are `D + 1`
/// (last entry is the bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    feature_dim: usize,
    weights: Vec<f64>,
}

impl ToyClassifier {
    pub fn zeros(feature_dim: usize) -> Self {
        Self { feature_dim, weights: vec![0.0; feature_dim + 1] }
    }

    pub fn from_weights(feature_dim: usize, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, feature_dim + 1, "classifier")?;
        Ok(Self { feature_dim, weights })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Mean feature vector with a trailing 1 for the bias.
    pub fn pooled(&self, f: &FeatureMap) -> Result<Vec<f64>> {
        if f.dim() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "classifier expects {} features, got {}",
                self.feature_dim,
                f.dim()
            )));
        }
        let mut pooled = vec![0.0; self.feature_dim + 1];
        for px in f.pixels() {
            for (p, &x) in pooled.iter_mut().zip(px) {
                *p += x;
            }
        }
        let n = f.num_pixels().max(1) as f64;
        pooled.iter_mut().for_each(|p| *p /= n);
        pooled[self.feature_dim] = 1.0;
        Ok(pooled)
    }

    /// Probability that the image contains a lesion.
    pub fn forward(&self, f: &FeatureMap) -> Result<f64> {
        let pooled = self.pooled(f)?;
        Ok(math::sigmoid(dot(&self.weights, &pooled)))
    }
}

/// Logistic regression over `[mean_k, max_k, var_k for each class] + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDiscriminator {
    num_classes: usize,
    weights: Vec<f64>,
}

impl ToyDiscriminator {
    pub fn stat_dim(num_classes: usize) -> usize {
        3 * num_classes
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self { num_classes, weights: vec![0.0; Self::stat_dim(num_classes) + 1] }
    }

    pub fn from_weights(num_classes: usize, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, Self::stat_dim(num_classes) + 1, "discriminator")?;
        Ok(Self { num_classes, weights })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Probability that the map came from the target domain.
    pub fn forward(&self, p: &ProbMap) -> Result<f64> {
        let stats = MapStats::of(p, self.num_classes)?;
        Ok(math::sigmoid(dot(&self.weights, &stats.features)))
    }
}

/// Pooled statistics of a probability map, with what the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct MapStats {
    /// `[mean_0..K, max_0..K, var_0..K, 1]`.
    pub features: Vec<f64>,
    /// Pixel index holding each class maximum (first occurrence).
    pub argmax_pixel: Vec<usize>,
}

impl MapStats {
    pub fn of(p: &ProbMap, num_classes: usize) -> Result<Self> {
        if p.num_classes() != num_classes {
            return Err(Error::ClassMismatch { expected: num_classes, found: p.num_classes() });
        }
        let k = num_classes;
        let n = p.num_pixels().max(1) as f64;
        let mut mean = vec![0.0; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        let mut argmax_pixel = vec![0; k];
        for (idx, probs) in p.pixels().enumerate() {
            for c in 0..k {
                mean[c] += probs[c];
                if probs[c] > max[c] {
                    max[c] = probs[c];
                    argmax_pixel[c] = idx;
                }
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for probs in p.pixels() {
            for c in 0..k {
                let d = probs[c] - mean[c];
                var[c] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let mut features = Vec::with_capacity(3 * k + 1);
        features.extend_from_slice(&mean);
        features.extend_from_slice(&max);
        features.extend_from_slice(&var);
        features.push(1.0);
        Ok(Self { features, argmax_pixel })
    }

    /// Adds `scale * d(w . features)/d p` to `grad_p` (layout of `p`).
    pub fn backprop(&self, p: &ProbMap, weights: &[f64], scale: f64, grad_p: &mut [f64]) {
        let k = p.num_classes();
        let n = p.num_pixels().max(1) as f64;
        let mean = &self.features[..k];
        for (idx, probs) in p.pixels().enumerate() {
            for c in 0..k {
                let g = weights[c] / n + weights[2 * k + c] * 2.0 * (probs[c] - mean[c]) / n;
                grad_p[idx * k + c] += scale * g;
            }
        }
        for c in 0..k {
            grad_p[self.argmax_pixel[c] * k + c] += scale * weights[k + c];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_weights(weights: &[f64], expected: usize, what: &str) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::DimensionMismatch(format!("{what} needs {expected} weights, got {}", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid(format!("{what} weights must be finite")));
    }
    Ok(())
}
