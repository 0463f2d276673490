//! Class feature centroids, their exponentially-weighted accumulation across
//! training steps, and the centroid alignment loss between two domains.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::types::{FeatureMap, LabelMask, IGNORE};

/// Centroids of one batch, `K x D` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchCentroids {
    num_classes: usize,
    dim: usize,
    values: Vec<f64>,
    counts: Vec<usize>,
}

impl BatchCentroids {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn centroid(&self, class: usize) -> &[f64] {
        &self.values[class * self.dim..(class + 1) * self.dim]
    }

    /// Labeled pixels per class.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn from_values(num_classes: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_classes * dim {
            return Err(Error::DimensionMismatch(format!(
                "{num_classes}x{dim} centroids need {} values, got {}",
                num_classes * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("centroids must be finite"));
        }
        Ok(Self { num_classes, dim, values, counts: vec![0; num_classes] })
    }
}

/// Per-class feature sums divided by the total pixel count `|x|` (not by the
/// per-class count), so classes with no labeled pixel give the zero vector.
pub fn batch_centroids(f: &FeatureMap, m: &LabelMask, num_classes: usize) -> Result<BatchCentroids> {
    batch_centroids_many([(f, m)], num_classes)
}

/// Centroids over several images treated as one concatenated batch: the
/// divisor is the total pixel count of all images.
pub fn batch_centroids_many<'a, I>(pairs: I, num_classes: usize) -> Result<BatchCentroids>
where
    I: IntoIterator<Item = (&'a FeatureMap, &'a LabelMask)>,
{
    let mut dim = None;
    let mut sums: Vec<f64> = Vec::new();
    let mut counts = vec![0usize; num_classes];
    let mut total = 0usize;
    for (f, m) in pairs {
        if (f.height(), f.width()) != (m.height(), m.width()) {
            return Err(Error::dims("features vs mask", (f.height(), f.width()), (m.height(), m.width())));
        }
        if m.num_classes() != num_classes {
            return Err(Error::ClassMismatch { expected: num_classes, found: m.num_classes() });
        }
        let d = f.dim();
        match dim {
            None => {
                dim = Some(d);
                sums = vec![0.0; num_classes * d];
            }
            Some(expected) if expected != d => {
                return Err(Error::DimensionMismatch(format!("feature dim {d} vs {expected}")));
            }
            Some(_) => {}
        }
        for (feat, &label) in f.pixels().zip(m.data()) {
            if label == IGNORE {
                continue;
            }
            let k = label as usize;
            counts[k] += 1;
            for (s, v) in sums[k * d..(k + 1) * d].iter_mut().zip(feat) {
                *s += v;
            }
        }
        total += f.num_pixels();
    }
    let dim = dim.ok_or(Error::EmptyInput)?;
    if total > 0 {
        let inv = 1.0 / total as f64;
        sums.iter_mut().for_each(|s| *s *= inv);
    }
    Ok(BatchCentroids { num_classes, dim, values: sums, counts })
}

/// Exponentially-weighted class centroids, `C <- gamma * C + C_new`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBank {
    num_classes: usize,
    dim: usize,
    centroids: Vec<f64>,
    gamma: f64,
    steps: u64,
}

impl CentroidBank {
    /// Zero-initialized bank; `gamma` must lie in `[0, 1)`.
    pub fn new(num_classes: usize, dim: usize, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if num_classes == 0 || dim == 0 {
            return Err(Error::invalid("centroid bank needs K >= 1 and D >= 1"));
        }
        Ok(Self { num_classes, dim, centroids: vec![0.0; num_classes * dim], gamma, steps: 0 })
    }

    /// Rebuilds a bank from stored parts.
    pub fn from_parts(num_classes: usize, dim: usize, centroids: Vec<f64>, gamma: f64, steps: u64) -> Result<Self> {
        let mut bank = Self::new(num_classes, dim, gamma)?;
        if centroids.len() != num_classes * dim {
            return Err(Error::DimensionMismatch(format!(
                "{num_classes}x{dim} bank needs {} values, got {}",
                num_classes * dim,
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("centroids must be finite"));
        }
        bank.centroids = centroids;
        bank.steps = steps;
        Ok(bank)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn centroid(&self, class: usize) -> &[f64] {
        &self.centroids[class * self.dim..(class + 1) * self.dim]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Folds in one batch: every stored centroid decays by `gamma` and the
    /// new batch centroid is added with weight one.
    pub fn update(&mut self, batch: &BatchCentroids) -> Result<()> {
        if (batch.num_classes, batch.dim) != (self.num_classes, self.dim) {
            return Err(Error::dims(
                "bank vs batch (KxD)",
                (self.num_classes, self.dim),
                (batch.num_classes, batch.dim),
            ));
        }
        for (c, &v) in self.centroids.iter_mut().zip(&batch.values) {
            *c = self.gamma * *c + v;
        }
        self.steps += 1;
        Ok(())
    }

    /// The stored centroids scaled by `gamma`: what the next update adds its
    /// batch term to.
    pub fn decayed(&self) -> Vec<f64> {
        self.centroids.iter().map(|c| self.gamma * c).collect()
    }
}

/// Same as [`CentroidBank::update`], returning the updated bank.
pub fn update_bank(mut bank: CentroidBank, batch: &BatchCentroids) -> Result<CentroidBank> {
    bank.update(batch)?;
    Ok(bank)
}

/// Alignment loss value and its (sub)gradients with respect to both banks.
#[derive(Debug, Clone, PartialEq)]
pub struct SrtLoss {
    pub loss: f64,
    pub grad_source: Vec<f64>,
    pub grad_target: Vec<f64>,
}

/// `sum_k ||Cs_k - Ct_k||_2^2 + alpha * ||Cs_k - Ct_k||_1` with `sign(0) = 0`.
pub fn srt_loss(bank_s: &CentroidBank, bank_t: &CentroidBank, alpha: f64) -> Result<SrtLoss> {
    if (bank_s.num_classes, bank_s.dim) != (bank_t.num_classes, bank_t.dim) {
        return Err(Error::dims(
            "source vs target bank (KxD)",
            (bank_s.num_classes, bank_s.dim),
            (bank_t.num_classes, bank_t.dim),
        ));
    }
    srt_loss_raw(&bank_s.centroids, &bank_t.centroids, alpha)
}

/// [`srt_loss`] over raw `K x D` centroid buffers of equal length.
pub fn srt_loss_raw(source: &[f64], target: &[f64], alpha: f64) -> Result<SrtLoss> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch(format!("centroid buffers {} vs {}", source.len(), target.len())));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut loss = 0.0;
    let mut grad_source = Vec::with_capacity(source.len());
    for (&s, &t) in source.iter().zip(target) {
        let d = s - t;
        loss += d * d + alpha * d.abs();
        grad_source.push(2.0 * d + alpha * math::sign(d));
    }
    let grad_target = grad_source.iter().map(|g| -g).collect();
    Ok(SrtLoss { loss, grad_source, grad_target })
}
