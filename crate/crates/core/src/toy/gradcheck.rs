//! Central finite-difference check of the analytic gradients of
//! [`backward_all`] on a small random instance.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::rng::SplitMix64;
use crate::toy::backward::{backward_all, Batch, BatchItem, Models, Objective};
use crate::transfer::CentroidBank;
use crate::types::{FeatureMap, ImageLabel, LabelMask, IGNORE};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so gradients near zero are
/// compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: &'static str,
    pub parameters: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub seed: u64,
    pub blocks: Vec<BlockReport>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

struct Instance {
    models: Models,
    src_features: Vec<FeatureMap>,
    src_masks: Vec<LabelMask>,
    src_labels: Vec<ImageLabel>,
    tgt_features: Vec<FeatureMap>,
    tgt_masks: Vec<LabelMask>,
    tgt_labels: Vec<ImageLabel>,
    source_bank: CentroidBank,
    target_bank: CentroidBank,
    objective: Objective,
}

impl Instance {
    fn random(seed: u64, num_classes: usize) -> Result<Self> {
        let (h, w, d, k) = (4, 5, 6, num_classes);
        let mut rng = SplitMix64::new(seed);
        let features =
            |rng: &mut SplitMix64| FeatureMap::new(h, w, d, (0..h * w * d).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let mask = |rng: &mut SplitMix64, ignore_rate: f64| {
            let data =
                (0..h * w).map(|_| if rng.next_f64() < ignore_rate { IGNORE } else { rng.below(k) as u16 }).collect();
            LabelMask::new(h, w, k, data)
        };
        let mut models = Models::zeros(d, k);
        for wt in models
            .segmenter
            .weights_mut()
            .iter_mut()
            .chain(models.classifier.weights_mut())
            .chain(models.discriminator.weights_mut())
        {
            *wt = rng.uniform(-0.8, 0.8);
        }
        let gamma = 0.7;
        let bank = |rng: &mut SplitMix64| -> Result<CentroidBank> {
            let values = (0..k * k).map(|_| rng.uniform(-1.0, 1.0)).collect();
            CentroidBank::from_parts(k, k, values, gamma, 3)
        };
        let source_bank = bank(&mut rng)?;
        let target_bank = bank(&mut rng)?;
        let mut inst = Self {
            models,
            src_features: Vec::new(),
            src_masks: Vec::new(),
            src_labels: Vec::new(),
            tgt_features: Vec::new(),
            tgt_masks: Vec::new(),
            tgt_labels: Vec::new(),
            source_bank,
            target_bank,
            objective: Objective {
                weights: LossWeights { eta: 0.3, mu: 10.0, alpha: 1.0, lambda_global: 0.5 },
                target_segmentation: true,
            },
        };
        for _ in 0..2 {
            inst.src_features.push(features(&mut rng)?);
            inst.src_masks.push(mask(&mut rng, 0.0)?);
            inst.src_labels.push(if rng.next_f64() < 0.5 { ImageLabel::Normal } else { ImageLabel::Lesion });
            inst.tgt_features.push(features(&mut rng)?);
            inst.tgt_masks.push(mask(&mut rng, 0.4)?);
            inst.tgt_labels.push(if rng.next_f64() < 0.5 { ImageLabel::Normal } else { ImageLabel::Lesion });
        }
        Ok(inst)
    }

    fn batch(&self) -> Batch<'_> {
        fn items<'a>(f: &'a [FeatureMap], m: &'a [LabelMask], l: &[ImageLabel]) -> Vec<BatchItem<'a>> {
            f.iter().zip(m).zip(l).map(|((features, mask), &label)| BatchItem { features, mask, label }).collect()
        }
        Batch {
            source: items(&self.src_features, &self.src_masks, &self.src_labels),
            target: items(&self.tgt_features, &self.tgt_masks, &self.tgt_labels),
        }
    }

    fn losses(&self, models: &Models) -> Result<(f64, f64)> {
        let r = backward_all(models, &self.batch(), &self.source_bank, &self.target_bank, &self.objective)?;
        Ok((r.total, r.discriminator_loss))
    }
}

#[derive(Clone, Copy)]
enum Block {
    Segmenter,
    Classifier,
    Discriminator,
}

fn weights_mut(models: &mut Models, block: Block) -> &mut [f64] {
    match block {
        Block::Segmenter => models.segmenter.weights_mut(),
        Block::Classifier => models.classifier.weights_mut(),
        Block::Discriminator => models.discriminator.weights_mut(),
    }
}

/// Runs the check for one seed. Segmenter and classifier gradients are
/// checked against the combined objective, discriminator gradients against
/// the discriminator cross-entropy.
pub fn gradcheck(seed: u64, num_classes: usize) -> Result<GradcheckReport> {
    if num_classes < 2 {
        return Err(Error::invalid(format!("gradcheck needs at least 2 classes, got {num_classes}")));
    }
    let inst = Instance::random(seed, num_classes)?;
    let analytic = backward_all(&inst.models, &inst.batch(), &inst.source_bank, &inst.target_bank, &inst.objective)?;
    let mut blocks = Vec::new();
    for (name, block, grad) in [
        ("segmenter", Block::Segmenter, &analytic.grads.segmenter),
        ("classifier", Block::Classifier, &analytic.grads.classifier),
        ("discriminator", Block::Discriminator, &analytic.grads.discriminator),
    ] {
        let mut report = BlockReport { name, parameters: grad.len(), max_rel_error: 0.0, max_abs_error: 0.0 };
        for (i, &a) in grad.iter().enumerate() {
            let mut plus = inst.models.clone();
            weights_mut(&mut plus, block)[i] += FD_STEP;
            let mut minus = inst.models.clone();
            weights_mut(&mut minus, block)[i] -= FD_STEP;
            let (lp, lm) = (inst.losses(&plus)?, inst.losses(&minus)?);
            let (fp, fm) = match block {
                Block::Discriminator => (lp.1, lm.1),
                _ => (lp.0, lm.0),
            };
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        }
        blocks.push(report);
    }
    Ok(GradcheckReport { seed, blocks })
}
