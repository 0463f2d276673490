//! Dataset-level IoU from a global confusion matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::{LabelMask, IGNORE};

/// `counts[gt][pred]` over pixels with non-IGNORE ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { num_classes, counts: vec![0; num_classes * num_classes] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction/ground-truth pair. Predictions must be total.
    pub fn accumulate(&mut self, pred: &LabelMask, gt: &LabelMask) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::dims(
                "prediction vs ground truth",
                (pred.height(), pred.width()),
                (gt.height(), gt.width()),
            ));
        }
        let k = self.num_classes;
        if pred.data().contains(&IGNORE) {
            return Err(Error::PredHasIgnore);
        }
        if let Some(&bad) = pred.data().iter().chain(gt.data()).find(|&&v| v != IGNORE && v as usize >= k) {
            return Err(Error::ClassMismatch { expected: k, found: bad as usize + 1 });
        }
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if g != IGNORE {
                self.counts[g as usize * k + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Element-wise sum of two matrices.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::ClassMismatch { expected: self.num_classes, found: other.num_classes });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `TP / (TP + FP + FN)` per class; `None` when the denominator is zero.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        let k = self.num_classes;
        (0..k)
            .map(|c| {
                let tp = self.get(c, c);
                let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| self.get(c, p)).sum();
                let fp: u64 = (0..k).filter(|&g| g != c).map(|g| self.get(g, c)).sum();
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect()
    }

    /// Per-class IoU and their mean over defined classes; the normal/disease
    /// fields are filled only for two classes (0 = normal, 1 = disease).
    pub fn summary(&self) -> IouSummary {
        let per_class = self.iou_per_class();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let miou = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let (iou_n, iou_d) = if self.num_classes == 2 { (per_class[0], per_class[1]) } else { (None, None) };
        IouSummary { iou_n, iou_d, miou, per_class }
    }

    /// Like [`ConfusionMatrix::summary`] but fails unless there are exactly two classes.
    pub fn binary_summary(&self) -> Result<IouSummary> {
        if self.num_classes != 2 {
            return Err(Error::NotBinary(self.num_classes));
        }
        Ok(self.summary())
    }
}

/// Same as [`ConfusionMatrix::accumulate`], by value.
pub fn accumulate(mut cm: ConfusionMatrix, pred: &LabelMask, gt: &LabelMask) -> Result<ConfusionMatrix> {
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouSummary {
    pub iou_n: Option<f64>,
    pub iou_d: Option<f64>,
    /// Mean over classes whose IoU is defined.
    pub miou: Option<f64>,
    pub per_class: Vec<Option<f64>>,
}
