//! Flat JSON run configuration. Every key is optional in a file; missing keys
//! take library defaults, unknown keys are rejected, and command-line flags
//! override file values. The fully resolved document is echoed into outputs.

use std::path::Path;

use semtrans_core::losses::LossWeights;
use semtrans_core::superpixel::SlicParams;
use semtrans_core::thresholds::CurriculumSchedule;
use semtrans_core::toy::{SynthConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::read_json;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    // Synthetic data.
    pub image_size: Option<usize>,
    pub num_classes: Option<usize>,
    pub source_count: Option<usize>,
    pub target_count: Option<usize>,
    pub lesion_probability: Option<f64>,
    pub brightness_shift: Option<f64>,
    pub noise_shift: Option<f64>,
    // Training.
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lr_decay_rate: Option<f64>,
    pub lr_decay_step: Option<usize>,
    pub momentum: Option<f64>,
    pub gamma: Option<f64>,
    pub use_pseudo_labels: Option<bool>,
    pub use_transfer: Option<bool>,
    pub use_adversarial: Option<bool>,
    pub closed_thresholds: Option<bool>,
    pub refine_with_classifier: Option<bool>,
    pub gate_by_image_label: Option<bool>,
    // Loss weights.
    pub eta: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda_global: Option<f64>,
    // Curriculum.
    pub p0: Option<f64>,
    pub p_step: Option<f64>,
    pub p_max: Option<f64>,
    // Superpixels.
    pub n_segments: Option<usize>,
    pub compactness: Option<f64>,
    pub slic_iterations: Option<usize>,
    pub enforce_connectivity: Option<bool>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Values set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self, other;
            seed, image_size, num_classes, source_count, target_count, lesion_probability, brightness_shift,
            noise_shift, epochs, batch_size, learning_rate, lr_decay_rate, lr_decay_step, momentum, gamma,
            use_pseudo_labels, use_transfer, use_adversarial, closed_thresholds, refine_with_classifier,
            gate_by_image_label, eta, mu, alpha, lambda_global, p0, p_step, p_max, n_segments, compactness,
            slic_iterations, enforce_connectivity,
        );
    }

    pub fn synth(&self) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            image_size: self.image_size.unwrap_or(d.image_size),
            num_classes: self.num_classes.unwrap_or(d.num_classes),
            source_count: self.source_count.unwrap_or(d.source_count),
            target_count: self.target_count.unwrap_or(d.target_count),
            lesion_probability: self.lesion_probability.unwrap_or(d.lesion_probability),
            brightness_shift: self.brightness_shift.unwrap_or(d.brightness_shift),
            noise_shift: self.noise_shift.unwrap_or(d.noise_shift),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    pub fn slic(&self) -> SlicParams {
        let d = SlicParams::default();
        SlicParams {
            n_segments: self.n_segments.unwrap_or(d.n_segments),
            compactness: self.compactness.unwrap_or(d.compactness),
            iterations: self.slic_iterations.unwrap_or(d.iterations),
            enforce_connectivity: self.enforce_connectivity.unwrap_or(d.enforce_connectivity),
        }
    }

    pub fn train(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            lr_decay_rate: self.lr_decay_rate.unwrap_or(d.lr_decay_rate),
            lr_decay_step: self.lr_decay_step.unwrap_or(d.lr_decay_step),
            momentum: self.momentum.unwrap_or(d.momentum),
            weights: LossWeights {
                eta: self.eta.unwrap_or(d.weights.eta),
                mu: self.mu.unwrap_or(d.weights.mu),
                alpha: self.alpha.unwrap_or(d.weights.alpha),
                lambda_global: self.lambda_global.unwrap_or(d.weights.lambda_global),
            },
            schedule: CurriculumSchedule {
                p0: self.p0.unwrap_or(d.schedule.p0),
                step: self.p_step.unwrap_or(d.schedule.step),
                p_max: self.p_max.unwrap_or(d.schedule.p_max),
            },
            gamma: self.gamma.unwrap_or(d.gamma),
            slic: self.slic(),
            use_pseudo_labels: self.use_pseudo_labels.unwrap_or(d.use_pseudo_labels),
            use_transfer: self.use_transfer.unwrap_or(d.use_transfer),
            use_adversarial: self.use_adversarial.unwrap_or(d.use_adversarial),
            closed_thresholds: self.closed_thresholds.unwrap_or(d.closed_thresholds),
            refine_with_classifier: self.refine_with_classifier.unwrap_or(d.refine_with_classifier),
            gate_by_image_label: self.gate_by_image_label.unwrap_or(d.gate_by_image_label),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    /// Checks every section against its module's invariants.
    pub fn validate(&self) -> Result<()> {
        self.synth().validate()?;
        self.train().validate()?;
        Ok(())
    }

    /// The configuration with every key filled in.
    pub fn effective(&self) -> RunConfig {
        let (s, t) = (self.synth(), self.train());
        RunConfig {
            seed: Some(t.seed),
            image_size: Some(s.image_size),
            num_classes: Some(s.num_classes),
            source_count: Some(s.source_count),
            target_count: Some(s.target_count),
            lesion_probability: Some(s.lesion_probability),
            brightness_shift: Some(s.brightness_shift),
            noise_shift: Some(s.noise_shift),
            epochs: Some(t.epochs),
            batch_size: Some(t.batch_size),
            learning_rate: Some(t.learning_rate),
            lr_decay_rate: Some(t.lr_decay_rate),
            lr_decay_step: Some(t.lr_decay_step),
            momentum: Some(t.momentum),
            gamma: Some(t.gamma),
            use_pseudo_labels: Some(t.use_pseudo_labels),
            use_transfer: Some(t.use_transfer),
            use_adversarial: Some(t.use_adversarial),
            closed_thresholds: Some(t.closed_thresholds),
            refine_with_classifier: Some(t.refine_with_classifier),
            gate_by_image_label: Some(t.gate_by_image_label),
            eta: Some(t.weights.eta),
            mu: Some(t.weights.mu),
            alpha: Some(t.weights.alpha),
            lambda_global: Some(t.weights.lambda_global),
            p0: Some(t.schedule.p0),
            p_step: Some(t.schedule.step),
            p_max: Some(t.schedule.p_max),
            n_segments: Some(t.slic.n_segments),
            compactness: Some(t.slic.compactness),
            slic_iterations: Some(t.slic.iterations),
            enforce_connectivity: Some(t.slic.enforce_connectivity),
        }
    }
}
