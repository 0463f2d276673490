//! Forward pass, combined objective and analytic gradients for one batch.
//!
//! The segmenter and classifier minimize
//! `L_C + L_S + eta * L_adv + mu * L_SRT`; the discriminator minimizes its own
//! cross-entropy. Centroids are taken over the segmenter's softmax outputs
//! (logits are unbounded and make the centroid term diverge). The centroid
//! banks enter as constants `gamma * C`: only the newest batch centroid
//! carries gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::{
    adversarial_loss_for_segmenter, classification_loss, discriminator_loss, segmentation_loss, total_loss, LossParts,
    LossWeights,
};
use crate::math;
use crate::toy::models::{dot, softmax_map, MapStats, ToyClassifier, ToyDiscriminator, ToySegmenter};
use crate::transfer::{batch_centroids_many, srt_loss_raw, BatchCentroids, CentroidBank};
use crate::types::{FeatureMap, ImageLabel, LabelMask, ProbMap, IGNORE};

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub segmenter: ToySegmenter,
    pub classifier: ToyClassifier,
    pub discriminator: ToyDiscriminator,
}

impl Models {
    pub fn zeros(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            segmenter: ToySegmenter::zeros(feature_dim, num_classes),
            classifier: ToyClassifier::zeros(feature_dim),
            discriminator: ToyDiscriminator::zeros(num_classes),
        }
    }
}

/// One image of a batch. For target items `mask` holds pseudo labels.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub features: &'a FeatureMap,
    pub mask: &'a LabelMask,
    pub label: ImageLabel,
}

#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub source: Vec<BatchItem<'a>>,
    pub target: Vec<BatchItem<'a>>,
}

/// Which terms are active and with what weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub weights: LossWeights,
    /// Include the pseudo-labeled target term in `L_S`.
    pub target_segmentation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub segmenter: Vec<f64>,
    pub classifier: Vec<f64>,
    pub discriminator: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub parts: LossParts,
    /// Combined objective of segmenter and classifier.
    pub total: f64,
    /// Discriminator cross-entropy.
    pub discriminator_loss: f64,
    pub grads: Gradients,
    pub source_centroids: BatchCentroids,
    pub target_centroids: BatchCentroids,
    pub source_probs: Vec<ProbMap>,
    pub target_probs: Vec<ProbMap>,
}

struct Forward {
    /// Softmax outputs viewed as `K`-dimensional pixel features.
    centroid_inputs: Vec<FeatureMap>,
    probs: Vec<ProbMap>,
    stats: Vec<MapStats>,
    disc: Vec<f64>,
    pooled: Vec<Vec<f64>>,
    cls: Vec<f64>,
}

fn forward_items(models: &Models, items: &[BatchItem<'_>]) -> Result<Forward> {
    let k = models.segmenter.num_classes();
    let mut fw = Forward {
        centroid_inputs: Vec::new(),
        probs: Vec::new(),
        stats: Vec::new(),
        disc: Vec::new(),
        pooled: Vec::new(),
        cls: Vec::new(),
    };
    for item in items {
        if (item.features.height(), item.features.width()) != (item.mask.height(), item.mask.width()) {
            return Err(Error::dims(
                "features vs mask",
                (item.features.height(), item.features.width()),
                (item.mask.height(), item.mask.width()),
            ));
        }
        let logits = models.segmenter.logits(item.features)?;
        let probs = softmax_map(&logits);
        let stats = MapStats::of(&probs, k)?;
        fw.disc.push(math::sigmoid(dot(models.discriminator.weights(), &stats.features)));
        let pooled = models.classifier.pooled(item.features)?;
        fw.cls.push(math::sigmoid(dot(models.classifier.weights(), &pooled)));
        fw.centroid_inputs.push(FeatureMap::new(probs.height(), probs.width(), k, probs.data().to_vec())?);
        fw.probs.push(probs);
        fw.stats.push(stats);
        fw.pooled.push(pooled);
    }
    Ok(fw)
}

/// Evaluates every loss term on a batch and returns analytic gradients for
/// all three models.
pub fn backward_all(
    models: &Models,
    batch: &Batch<'_>,
    source_bank: &CentroidBank,
    target_bank: &CentroidBank,
    objective: &Objective,
) -> Result<BatchResult> {
    if batch.source.is_empty() || batch.target.is_empty() {
        return Err(Error::EmptyInput);
    }
    let w = &objective.weights;
    let k = models.segmenter.num_classes();
    let fdim = models.segmenter.feature_dim();
    if source_bank.num_classes() != k
        || source_bank.dim() != k
        || target_bank.num_classes() != k
        || target_bank.dim() != k
    {
        return Err(Error::invalid("centroid banks must be K x K (centroids of segmenter probabilities)"));
    }
    let src = forward_items(models, &batch.source)?;
    let tgt = forward_items(models, &batch.target)?;
    let (ns, nt) = (batch.source.len() as f64, batch.target.len() as f64);

    let mut parts = LossParts::default();
    let mut grad_cls = vec![0.0; fdim + 1];
    let mut grad_disc = vec![0.0; models.discriminator.weights().len()];
    // dL/dp per image, then dL/dz per image.
    let mut dp_src: Vec<Vec<f64>> = src.probs.iter().map(|p| vec![0.0; p.data().len()]).collect();
    let mut dp_tgt: Vec<Vec<f64>> = tgt.probs.iter().map(|p| vec![0.0; p.data().len()]).collect();

    // Classification on both domains.
    for (fw, items, n) in [(&src, &batch.source, ns), (&tgt, &batch.target, nt)] {
        for (i, item) in items.iter().enumerate() {
            let q = fw.cls[i];
            let (l, g) = classification_loss(q, item.label);
            parts.classification += l / n;
            let dz = g * q * (1.0 - q) / n;
            for (gc, x) in grad_cls.iter_mut().zip(&fw.pooled[i]) {
                *gc += dz * x;
            }
        }
    }

    // Segmentation: supervised source term, optional pseudo-labeled target term.
    for (i, item) in batch.source.iter().enumerate() {
        let s = segmentation_loss(&src.probs[i], item.mask, w.lambda_global)?;
        parts.segmentation += s.loss / ns;
        for (d, g) in dp_src[i].iter_mut().zip(&s.grad) {
            *d += g / ns;
        }
    }
    if objective.target_segmentation {
        for (i, item) in batch.target.iter().enumerate() {
            let s = segmentation_loss(&tgt.probs[i], item.mask, w.lambda_global)?;
            parts.segmentation += s.loss / nt;
            for (d, g) in dp_tgt[i].iter_mut().zip(&s.grad) {
                *d += g / nt;
            }
        }
    }

    // Segmenter side of the adversarial game (target maps only).
    let (adv, adv_grad) = adversarial_loss_for_segmenter(&tgt.disc)?;
    parts.adversarial = adv;
    for (i, &d) in tgt.disc.iter().enumerate() {
        let scale = w.eta * adv_grad[i] * d * (1.0 - d);
        tgt.stats[i].backprop(&tgt.probs[i], models.discriminator.weights(), scale, &mut dp_tgt[i]);
    }

    // Discriminator cross-entropy and its gradient.
    let dl = discriminator_loss(&src.disc, &tgt.disc)?;
    for (fw, grads) in [(&src, &dl.grad_source), (&tgt, &dl.grad_target)] {
        for (i, &d) in fw.disc.iter().enumerate() {
            let scale = grads[i] * d * (1.0 - d);
            for (gd, x) in grad_disc.iter_mut().zip(&fw.stats[i].features) {
                *gd += scale * x;
            }
        }
    }

    // Centroid alignment over softmax outputs.
    let source_centroids =
        batch_centroids_many(src.centroid_inputs.iter().zip(batch.source.iter().map(|it| it.mask)), k)?;
    let target_centroids =
        batch_centroids_many(tgt.centroid_inputs.iter().zip(batch.target.iter().map(|it| it.mask)), k)?;
    let after_s: Vec<f64> = source_bank.decayed().iter().zip(source_centroids.values()).map(|(h, c)| h + c).collect();
    let after_t: Vec<f64> = target_bank.decayed().iter().zip(target_centroids.values()).map(|(h, c)| h + c).collect();
    let srt = srt_loss_raw(&after_s, &after_t, w.alpha)?;
    parts.transfer = srt.loss;

    let total = total_loss(&parts, w);

    // The centroid term reaches a labeled pixel's probabilities with weight
    // mu / (total pixels of the batch side).
    for (items, dps, srt_grad) in
        [(&batch.source, &mut dp_src, &srt.grad_source), (&batch.target, &mut dp_tgt, &srt.grad_target)]
    {
        let total_pixels: usize = items.iter().map(|it| it.features.num_pixels()).sum();
        let centroid_scale = w.mu / total_pixels.max(1) as f64;
        for (i, item) in items.iter().enumerate() {
            for (idx, &label) in item.mask.data().iter().enumerate() {
                if label != IGNORE {
                    for c in 0..k {
                        dps[i][idx * k + c] += centroid_scale * srt_grad[label as usize * k + c];
                    }
                }
            }
        }
    }

    // Back through softmax into logits, then into weights.
    let mut grad_seg = vec![0.0; models.segmenter.weights().len()];
    let mut dz = vec![0.0; k];
    for (fw, items, dps) in [(&src, &batch.source, &dp_src), (&tgt, &batch.target, &dp_tgt)] {
        for (i, item) in items.iter().enumerate() {
            let probs = &fw.probs[i];
            for (idx, (feat, p)) in item.features.pixels().zip(probs.pixels()).enumerate() {
                let dp = &dps[i][idx * k..(idx + 1) * k];
                let inner: f64 = dp.iter().zip(p).map(|(g, q)| g * q).sum();
                for c in 0..k {
                    dz[c] = p[c] * (dp[c] - inner);
                }
                for (d, &x) in feat.iter().enumerate() {
                    let row = &mut grad_seg[d * k..(d + 1) * k];
                    for (g, &v) in row.iter_mut().zip(dz.iter()) {
                        *g += x * v;
                    }
                }
                let bias = &mut grad_seg[fdim * k..];
                for (g, &v) in bias.iter_mut().zip(dz.iter()) {
                    *g += v;
                }
            }
        }
    }

    Ok(BatchResult {
        parts,
        total,
        discriminator_loss: dl.loss,
        grads: Gradients { segmenter: grad_seg, classifier: grad_cls, discriminator: grad_disc },
        source_centroids,
        target_centroids,
        source_probs: src.probs,
        target_probs: tgt.probs,
    })
}
