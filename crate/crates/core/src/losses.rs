//! Value-and-gradient loss terms, independent of any particular model.
//!
//! Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before every log;
//! gradients are those of the clamped expression, so they vanish on saturated
//! inputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::types::{ImageLabel, LabelMask, ProbMap, IGNORE};

pub const PROB_EPS: f64 = 1e-7;

/// Trade-off weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the adversarial term.
    pub eta: f64,
    /// Weight of the centroid alignment term.
    pub mu: f64,
    /// l1 weight inside the centroid alignment term.
    pub alpha: f64,
    /// Global pseudo-label reward; reported in the segmentation loss value only.
    pub lambda_global: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { eta: 0.3, mu: 10.0, alpha: 1.0, lambda_global: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("eta", self.eta), ("mu", self.mu), ("alpha", self.alpha), ("lambda_global", self.lambda_global)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[inline]
fn clamp_prob(p: f64) -> (f64, bool) {
    if p < PROB_EPS {
        (PROB_EPS, true)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, true)
    } else {
        (p, false)
    }
}

/// `-log(p)` and its derivative with respect to `p`.
#[inline]
fn neg_log(p: f64) -> (f64, f64) {
    let (c, clamped) = clamp_prob(p);
    (-math::ln(c), if clamped { 0.0 } else { -1.0 / c })
}

/// Binary cross-entropy of one image-level prediction.
pub fn classification_loss(pred: f64, label: ImageLabel) -> (f64, f64) {
    match label {
        ImageLabel::Lesion => neg_log(pred),
        ImageLabel::Normal => {
            let (l, g) = neg_log(1.0 - pred);
            (l, -g)
        }
    }
}

/// Segmentation loss and its gradient with respect to the probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationLoss {
    pub loss: f64,
    /// Same layout as the probability map.
    pub grad: Vec<f64>,
    /// Non-IGNORE pixel count.
    pub labeled: usize,
}

/// Cross-entropy over labeled pixels minus `lambda_global` per labeled pixel,
/// both divided by `H * W`. The reward term is constant for fixed labels and
/// has no gradient.
pub fn segmentation_loss(p: &ProbMap, m: &LabelMask, lambda_global: f64) -> Result<SegmentationLoss> {
    if (p.height(), p.width()) != (m.height(), m.width()) {
        return Err(Error::dims("probabilities vs mask", (p.height(), p.width()), (m.height(), m.width())));
    }
    if p.num_classes() != m.num_classes() {
        return Err(Error::ClassMismatch { expected: p.num_classes(), found: m.num_classes() });
    }
    let k = p.num_classes();
    let n = p.num_pixels();
    let inv = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    let mut grad = vec![0.0; p.data().len()];
    let mut sum = 0.0;
    let mut labeled = 0;
    for (idx, &label) in m.data().iter().enumerate() {
        if label == IGNORE {
            continue;
        }
        let j = idx * k + label as usize;
        let (l, g) = neg_log(p.data()[j]);
        sum += l;
        grad[j] = g * inv;
        labeled += 1;
    }
    let loss = (sum - lambda_global * labeled as f64) * inv;
    Ok(SegmentationLoss { loss, grad, labeled })
}

/// Discriminator objective with gradients for every output.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorLoss {
    /// Cross-entropy with target = 1 and source = 0 (what the discriminator minimizes).
    pub loss: f64,
    /// `mean log D(target) + mean log(1 - D(source))`, i.e. `-loss`.
    pub log_likelihood: f64,
    pub grad_source: Vec<f64>,
    pub grad_target: Vec<f64>,
}

pub fn discriminator_loss(d_src: &[f64], d_tgt: &[f64]) -> Result<DiscriminatorLoss> {
    if d_src.is_empty() || d_tgt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (ns, nt) = (d_src.len() as f64, d_tgt.len() as f64);
    let mut loss = 0.0;
    let grad_target = d_tgt
        .iter()
        .map(|&d| {
            let (l, g) = neg_log(d);
            loss += l / nt;
            g / nt
        })
        .collect();
    let grad_source = d_src
        .iter()
        .map(|&d| {
            let (l, g) = neg_log(1.0 - d);
            loss += l / ns;
            -g / ns
        })
        .collect();
    Ok(DiscriminatorLoss { loss, log_likelihood: -loss, grad_source, grad_target })
}

/// Segmenter side of the adversarial game: push target predictions towards the
/// source label, `-mean log(1 - D(target))`. Returns the loss and its gradient
/// with respect to each discriminator output.
pub fn adversarial_loss_for_segmenter(d_tgt: &[f64]) -> Result<(f64, Vec<f64>)> {
    if d_tgt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = d_tgt.len() as f64;
    let mut loss = 0.0;
    let grad = d_tgt
        .iter()
        .map(|&d| {
            let (l, g) = neg_log(1.0 - d);
            loss += l / n;
            -g / n
        })
        .collect();
    Ok((loss, grad))
}

/// The four loss terms of the combined objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub classification: f64,
    pub segmentation: f64,
    pub adversarial: f64,
    pub transfer: f64,
}

/// `L_C + L_S + eta * L_D + mu * L_SRT`.
pub fn total_loss(parts: &LossParts, w: &LossWeights) -> f64 {
    parts.classification + parts.segmentation + w.eta * parts.adversarial + w.mu * parts.transfer
}
