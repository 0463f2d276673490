//! The self-training loop: per epoch, re-derive class thresholds from the
//! current target predictions, regenerate superpixel-refined pseudo labels,
//! then take gradient steps on source and target batches while accumulating
//! the centroid banks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::math;
use crate::metrics::ConfusionMatrix;
use crate::pseudo_label;
use crate::rng::SplitMix64;
use crate::superpixel::{slic, SlicParams, SuperpixelMap};
use crate::thresholds::{determine_lambdas, ClassThresholds, CurriculumSchedule};
use crate::toy::backward::{backward_all, Batch, BatchItem, Models, Objective};
use crate::toy::features::{feature_dim, pixel_features};
use crate::toy::models::ToySegmenter;
use crate::toy::synth::SyntheticData;
use crate::transfer::CentroidBank;
use crate::types::{argmax_map, FeatureMap, Image, ImageLabel, LabelMask, ProbMap, IGNORE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_rate: f64,
    /// Steps between learning-rate decays.
    pub lr_decay_step: usize,
    /// Heavy-ball momentum; 0 gives plain gradient descent.
    pub momentum: f64,
    pub weights: LossWeights,
    pub schedule: CurriculumSchedule,
    /// Decay of the centroid banks.
    pub gamma: f64,
    pub slic: SlicParams,
    /// Train on pseudo-labeled target pixels.
    pub use_pseudo_labels: bool,
    /// Centroid alignment term (off forces `mu = 0`).
    pub use_transfer: bool,
    /// Adversarial term (off forces `eta = 0`).
    pub use_adversarial: bool,
    /// Force every threshold to 1.0, so no pseudo label is ever selected.
    pub closed_thresholds: bool,
    /// Scale lesion-class probabilities by the classifier's lesion
    /// probability (then renormalize) before pseudo-labeling and evaluation.
    pub refine_with_classifier: bool,
    /// Drop lesion pseudo labels on target images labeled normal.
    pub gate_by_image_label: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 4,
            learning_rate: 0.5,
            lr_decay_rate: 0.7,
            lr_decay_step: 950,
            momentum: 0.0,
            weights: LossWeights::default(),
            schedule: CurriculumSchedule::default(),
            gamma: 0.7,
            slic: SlicParams::default(),
            use_pseudo_labels: true,
            use_transfer: true,
            use_adversarial: true,
            closed_thresholds: false,
            refine_with_classifier: false,
            gate_by_image_label: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Source-only baseline: no pseudo labels, no alignment, no adversary.
    pub fn baseline() -> Self {
        Self { use_pseudo_labels: false, use_transfer: false, use_adversarial: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.lr_decay_rate > 0.0 && self.lr_decay_rate <= 1.0) {
            return Err(Error::invalid(format!("lr_decay_rate must lie in (0, 1], got {}", self.lr_decay_rate)));
        }
        if self.lr_decay_step == 0 {
            return Err(Error::invalid("lr_decay_step must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        self.weights.validate()?;
        self.schedule.validate()?;
        self.slic.validate()
    }

    /// Loss weights with the disabled terms zeroed.
    pub fn effective_weights(&self) -> LossWeights {
        LossWeights {
            eta: if self.use_adversarial { self.weights.eta } else { 0.0 },
            mu: if self.use_transfer { self.weights.mu } else { 0.0 },
            ..self.weights
        }
    }

    pub fn learning_rate_at(&self, step: usize) -> f64 {
        self.learning_rate * math::powf(self.lr_decay_rate, (step / self.lr_decay_step) as f64)
    }
}

/// Training inputs. Target masks, when present, are only used for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub num_classes: usize,
    pub source_images: Vec<Image>,
    pub source_labels: Vec<ImageLabel>,
    pub source_masks: Vec<LabelMask>,
    pub target_images: Vec<Image>,
    pub target_labels: Vec<ImageLabel>,
    pub target_eval_masks: Option<Vec<LabelMask>>,
}

impl From<SyntheticData> for TrainData {
    fn from(d: SyntheticData) -> Self {
        let num_classes = d.source.masks.first().map_or(2, |m| m.num_classes());
        Self {
            num_classes,
            source_images: d.source.images,
            source_labels: d.source.labels,
            source_masks: d.source.masks,
            target_images: d.target.images,
            target_labels: d.target.labels,
            target_eval_masks: Some(d.target.masks),
        }
    }
}

impl TrainData {
    pub fn validate(&self) -> Result<()> {
        let ns = self.source_images.len();
        let nt = self.target_images.len();
        if ns == 0 || nt == 0 {
            return Err(Error::EmptyInput);
        }
        if self.source_labels.len() != ns || self.source_masks.len() != ns || self.target_labels.len() != nt {
            return Err(Error::invalid("every image needs a label (and every source image a mask)"));
        }
        if let Some(eval) = &self.target_eval_masks {
            if eval.len() != nt {
                return Err(Error::invalid("one evaluation mask per target image is required"));
            }
        }
        let channels = self.source_images[0].channels();
        let images = self.source_images.iter().chain(&self.target_images);
        if images.clone().any(|im| im.channels() != channels) {
            return Err(Error::invalid("all images must have the same channel count"));
        }
        let target_masks = self.target_eval_masks.iter().flatten();
        for m in self.source_masks.iter().chain(target_masks.clone()) {
            if m.num_classes() != self.num_classes {
                return Err(Error::ClassMismatch { expected: self.num_classes, found: m.num_classes() });
            }
        }
        for (im, m) in
            self.source_images.iter().zip(&self.source_masks).chain(self.target_images.iter().zip(target_masks))
        {
            if (im.height(), im.width()) != (m.height(), m.width()) {
                return Err(Error::dims("image vs mask", (im.height(), im.width()), (m.height(), m.width())));
            }
        }
        Ok(())
    }
}

/// One line of the per-epoch log. Loss terms are batch means over the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub portion: f64,
    pub learning_rate: f64,
    pub l_c: f64,
    pub l_s: f64,
    pub l_d: f64,
    pub l_srt: f64,
    pub total: f64,
    pub discriminator: f64,
    /// Fraction of target pixels carrying a pseudo label this epoch.
    pub selected_fraction: f64,
    pub selected_per_class: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub iou_n: Option<f64>,
    pub iou_d: Option<f64>,
    pub miou: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub models: Models,
    pub log: Vec<EpochRecord>,
    /// Pseudo labels of the last epoch (all IGNORE when no epoch ran).
    pub pseudo_labels: Vec<LabelMask>,
    pub source_bank: CentroidBank,
    pub target_bank: CentroidBank,
}

/// Computes superpixels for the target images.
pub fn target_superpixels(data: &TrainData, params: &SlicParams) -> Result<Vec<SuperpixelMap>> {
    data.target_images.iter().map(|im| slic(im, params)).collect()
}

pub fn train(cfg: &TrainConfig, data: &TrainData) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.validate()?;
    let superpixels = target_superpixels(data, &cfg.slic)?;
    train_with_superpixels(cfg, data, &superpixels)
}

/// [`train`] with precomputed target superpixels (one per target image).
pub fn train_with_superpixels(
    cfg: &TrainConfig,
    data: &TrainData,
    superpixels: &[SuperpixelMap],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.validate()?;
    if superpixels.len() != data.target_images.len() {
        return Err(Error::invalid("one superpixel map per target image is required"));
    }
    let k = data.num_classes;
    let channels = data.source_images[0].channels();
    let fdim = feature_dim(channels);
    let mut models = Models::zeros(fdim, k);
    let mut source_bank = CentroidBank::new(k, k, cfg.gamma)?;
    let mut target_bank = CentroidBank::new(k, k, cfg.gamma)?;
    let objective = Objective { weights: cfg.effective_weights(), target_segmentation: cfg.use_pseudo_labels };
    let needs_pseudo = cfg.use_pseudo_labels || cfg.use_transfer;

    let source_features: Vec<FeatureMap> = data.source_images.iter().map(pixel_features).collect();
    let target_features: Vec<FeatureMap> = data.target_images.iter().map(pixel_features).collect();
    let mut pseudo: Vec<LabelMask> =
        data.target_images.iter().map(|im| LabelMask::ignored(im.height(), im.width(), k)).collect::<Result<_>>()?;

    let mut rng = SplitMix64::new(cfg.seed);
    let mut velocity = [
        vec![0.0; models.segmenter.weights().len()],
        vec![0.0; models.classifier.weights().len()],
        vec![0.0; models.discriminator.weights().len()],
    ];
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    let (ns, nt) = (data.source_images.len(), data.target_images.len());
    let mut source_order: Vec<usize> = (0..ns).collect();
    let mut target_order: Vec<usize> = (0..nt).collect();

    for epoch in 0..cfg.epochs {
        let portion = cfg.schedule.portion_at(epoch);
        let mut lambdas = vec![0.0; k];
        if needs_pseudo {
            let probs = predict_all(&models, &target_features, cfg.refine_with_classifier)?;
            let thresholds =
                if cfg.closed_thresholds { ClassThresholds::closed(k)? } else { determine_lambdas(&probs, portion)? };
            lambdas = thresholds.lambdas().to_vec();
            for (j, p) in probs.iter().enumerate() {
                let mut mask = pseudo_label::generate(p, &thresholds, &superpixels[j])?;
                if cfg.gate_by_image_label && data.target_labels[j] == ImageLabel::Normal {
                    gate_normal(&mut mask)?;
                }
                pseudo[j] = mask;
            }
        }
        let (selected_fraction, selected_per_class) = selection_stats(&pseudo, k);

        rng.shuffle(&mut source_order);
        rng.shuffle(&mut target_order);
        let batches = ns.div_ceil(cfg.batch_size);
        let mut sums = [0.0f64; 6];
        let mut lr = cfg.learning_rate_at(step);
        for b in 0..batches {
            let src_idx = &source_order[b * cfg.batch_size..((b + 1) * cfg.batch_size).min(ns)];
            let tgt_idx: Vec<usize> =
                (0..cfg.batch_size).map(|i| target_order[(b * cfg.batch_size + i) % nt]).collect();
            let batch = Batch {
                source: src_idx
                    .iter()
                    .map(|&i| BatchItem {
                        features: &source_features[i],
                        mask: &data.source_masks[i],
                        label: data.source_labels[i],
                    })
                    .collect(),
                target: tgt_idx
                    .iter()
                    .map(|&j| BatchItem {
                        features: &target_features[j],
                        mask: &pseudo[j],
                        label: data.target_labels[j],
                    })
                    .collect(),
            };
            let result = backward_all(&models, &batch, &source_bank, &target_bank, &objective)?;
            source_bank.update(&result.source_centroids)?;
            target_bank.update(&result.target_centroids)?;

            lr = cfg.learning_rate_at(step);
            let [vs, vc, vd] = &mut velocity;
            apply_step(models.segmenter.weights_mut(), &result.grads.segmenter, vs, lr, cfg.momentum);
            apply_step(models.classifier.weights_mut(), &result.grads.classifier, vc, lr, cfg.momentum);
            apply_step(models.discriminator.weights_mut(), &result.grads.discriminator, vd, lr, cfg.momentum);
            step += 1;
            for (name, w) in [
                ("segmenter weights", models.segmenter.weights()),
                ("classifier weights", models.classifier.weights()),
                ("discriminator weights", models.discriminator.weights()),
            ] {
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(name));
                }
            }

            let p = &result.parts;
            for (s, v) in sums.iter_mut().zip([
                p.classification,
                p.segmentation,
                p.adversarial,
                p.transfer,
                result.total,
                result.discriminator_loss,
            ]) {
                *s += v;
            }
        }
        let nb = batches as f64;
        let (iou_n, iou_d, miou) = match &data.target_eval_masks {
            Some(masks) => {
                let s = evaluate(&models, &target_features, masks, cfg.refine_with_classifier)?;
                (s.0, s.1, s.2)
            }
            None => (None, None, None),
        };
        log.push(EpochRecord {
            epoch,
            portion,
            learning_rate: lr,
            l_c: sums[0] / nb,
            l_s: sums[1] / nb,
            l_d: sums[2] / nb,
            l_srt: sums[3] / nb,
            total: sums[4] / nb,
            discriminator: sums[5] / nb,
            selected_fraction,
            selected_per_class,
            lambdas,
            iou_n,
            iou_d,
            miou,
        });
    }
    Ok(TrainOutcome { models, log, pseudo_labels: pseudo, source_bank, target_bank })
}

fn apply_step(weights: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    for ((w, g), v) in weights.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *w -= lr * *v;
    }
}

/// Segmenter probabilities for every image, optionally refined by the
/// classifier. Every map is validated.
pub fn predict_all(models: &Models, features: &[FeatureMap], refine: bool) -> Result<Vec<ProbMap>> {
    features
        .iter()
        .map(|f| {
            let p = models.segmenter.forward(f)?;
            let p = if refine { refine_with_classifier(&p, models.classifier.forward(f)?)? } else { p };
            p.validate()?;
            Ok(p)
        })
        .collect()
}

/// Multiplies every lesion-class probability by `lesion_prob`, leaves class 0
/// untouched and renormalizes each pixel.
pub fn refine_with_classifier(p: &ProbMap, lesion_prob: f64) -> Result<ProbMap> {
    let k = p.num_classes();
    let mut data = p.data().to_vec();
    for px in data.chunks_exact_mut(k) {
        px[1..].iter_mut().for_each(|v| *v *= lesion_prob);
        let sum: f64 = px.iter().sum();
        if sum > 0.0 {
            px.iter_mut().for_each(|v| *v /= sum);
        } else {
            px.iter_mut().for_each(|v| *v = 0.0);
            px[0] = 1.0;
        }
    }
    ProbMap::new(p.height(), p.width(), k, data)
}

fn gate_normal(mask: &mut LabelMask) -> Result<()> {
    let data: Vec<u16> = mask.data().iter().map(|&v| if v != 0 && v != IGNORE { IGNORE } else { v }).collect();
    *mask = LabelMask::new(mask.height(), mask.width(), mask.num_classes(), data)?;
    Ok(())
}

fn selection_stats(masks: &[LabelMask], k: usize) -> (f64, Vec<f64>) {
    let mut counts = vec![0usize; k];
    let mut total = 0usize;
    for m in masks {
        for (c, n) in counts.iter_mut().zip(m.class_counts()) {
            *c += n;
        }
        total += m.num_pixels();
    }
    let denom = total.max(1) as f64;
    let per_class: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    (counts.iter().sum::<usize>() as f64 / denom, per_class)
}

/// Target IoU summary (normal, disease, mean) against held-out masks.
pub fn evaluate(
    models: &Models,
    features: &[FeatureMap],
    masks: &[LabelMask],
    refine: bool,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let k = models.segmenter.num_classes();
    let mut cm = ConfusionMatrix::new(k);
    for (p, gt) in predict_all(models, features, refine)?.iter().zip(masks) {
        cm.accumulate(&argmax_map(p), gt)?;
    }
    let s = cm.summary();
    Ok((s.iou_n, s.iou_d, s.miou))
}

/// Hard predictions of a trained segmenter.
pub fn predict_masks(segmenter: &ToySegmenter, images: &[Image]) -> Result<Vec<LabelMask>> {
    images.iter().map(|im| segmenter.forward(&pixel_features(im)).map(|p| argmax_map(&p))).collect()
}
