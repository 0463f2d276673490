//! Synthetic two-domain lesion data: textured background with elliptical
//! "lesions", and a target domain that differs by a brightness offset and
//! extra sensor noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SplitMix64;
use crate::types::{Image, ImageLabel, LabelMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Height and width of every image.
    pub image_size: usize,
    pub num_classes: usize,
    pub source_count: usize,
    pub target_count: usize,
    /// Probability that an image contains at least one lesion.
    pub lesion_probability: f64,
    /// Intensity offset added to every target pixel and channel.
    pub brightness_shift: f64,
    /// Extra Gaussian noise standard deviation in the target domain.
    pub noise_shift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            num_classes: 2,
            source_count: 200,
            target_count: 100,
            lesion_probability: 0.7,
            brightness_shift: 40.0,
            noise_shift: 4.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::invalid(format!("image_size must be >= 8, got {}", self.image_size)));
        }
        if self.num_classes < 2 || self.num_classes > LESION_COLORS.len() + 1 {
            return Err(Error::invalid(format!(
                "num_classes must lie in [2, {}], got {}",
                LESION_COLORS.len() + 1,
                self.num_classes
            )));
        }
        if self.source_count == 0 || self.target_count == 0 {
            return Err(Error::invalid("source_count and target_count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.lesion_probability) {
            return Err(Error::invalid("lesion_probability must lie in [0, 1]"));
        }
        if !self.brightness_shift.is_finite() || !(self.noise_shift >= 0.0 && self.noise_shift.is_finite()) {
            return Err(Error::invalid("domain shift must be finite with noise_shift >= 0"));
        }
        Ok(())
    }
}

/// Images of one domain with their image-level labels and pixel masks.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSet {
    pub images: Vec<Image>,
    pub labels: Vec<ImageLabel>,
    /// For the source domain these are training masks; for the target domain
    /// they are evaluation-only ground truth.
    pub masks: Vec<LabelMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub source: DomainSet,
    pub target: DomainSet,
}

const BACKGROUND: [f64; 3] = [200.0, 125.0, 110.0];
/// Mean color of lesion classes 1, 2, ...
const LESION_COLORS: [[f64; 3]; 4] =
    [[150.0, 65.0, 65.0], [205.0, 175.0, 90.0], [120.0, 90.0, 150.0], [235.0, 210.0, 205.0]];
const BASE_NOISE: f64 = 6.0;

pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let source = gen_domain(cfg, cfg.source_count, 0.0, 0.0, &mut rng.fork());
    let target = gen_domain(cfg, cfg.target_count, cfg.brightness_shift, cfg.noise_shift, &mut rng.fork());
    Ok(SyntheticData { source, target })
}

fn gen_domain(cfg: &SynthConfig, count: usize, brightness: f64, extra_noise: f64, rng: &mut SplitMix64) -> DomainSet {
    let mut set = DomainSet { images: Vec::new(), labels: Vec::new(), masks: Vec::new() };
    for _ in 0..count {
        let (img, label, mask) = gen_image(cfg, brightness, extra_noise, &mut rng.fork());
        set.images.push(img);
        set.labels.push(label);
        set.masks.push(mask);
    }
    set
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    cos: f64,
    sin: f64,
    class: u16,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.rx) * (u / self.rx) + (v / self.ry) * (v / self.ry) <= 1.0
    }
}

fn gen_image(
    cfg: &SynthConfig,
    brightness: f64,
    extra_noise: f64,
    rng: &mut SplitMix64,
) -> (Image, ImageLabel, LabelMask) {
    let n = cfg.image_size;
    let size = n as f64;
    let has_lesion = rng.next_f64() < cfg.lesion_probability;
    let mut ellipses = Vec::new();
    if has_lesion {
        let count = 1 + rng.below(2);
        for _ in 0..count {
            let angle = rng.uniform(0.0, core::f64::consts::PI);
            ellipses.push(Ellipse {
                cy: rng.uniform(0.2 * size, 0.8 * size),
                cx: rng.uniform(0.2 * size, 0.8 * size),
                ry: rng.uniform(0.1 * size, 0.22 * size),
                rx: rng.uniform(0.1 * size, 0.22 * size),
                cos: math::cos(angle),
                sin: math::sin(angle),
                class: 1 + rng.below(cfg.num_classes - 1) as u16,
            });
        }
    }
    let jitter = |rng: &mut SplitMix64| [rng.normal() * 8.0, rng.normal() * 8.0, rng.normal() * 8.0];
    let bg_jitter = jitter(rng);
    let lesion_jitter = jitter(rng);
    // Low-frequency texture: one oriented sinusoid.
    let amp = rng.uniform(4.0, 12.0);
    let (fy, fx) = (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    let phase = rng.uniform(0.0, core::f64::consts::TAU);
    let noise_sd = BASE_NOISE + extra_noise;

    let mut data = Vec::with_capacity(n * n * 3);
    let mut mask = vec![0u16; n * n];
    for row in 0..n {
        for col in 0..n {
            let (y, x) = (row as f64, col as f64);
            let class = ellipses.iter().rev().find(|e| e.contains(y, x)).map_or(0, |e| e.class);
            mask[row * n + col] = class;
            let texture = amp * math::sin(fy * y + fx * x + phase);
            let base = if class == 0 {
                [BACKGROUND[0] + bg_jitter[0], BACKGROUND[1] + bg_jitter[1], BACKGROUND[2] + bg_jitter[2]]
            } else {
                let c = LESION_COLORS[class as usize - 1];
                [c[0] + lesion_jitter[0], c[1] + lesion_jitter[1], c[2] + lesion_jitter[2]]
            };
            for b in base {
                let v = b + texture + brightness + noise_sd * rng.normal();
                data.push(math::round(v).clamp(0.0, 255.0) as u8);
            }
        }
    }
    let label = if mask.iter().any(|&c| c != 0) { ImageLabel::Lesion } else { ImageLabel::Normal };
    let image = Image::new(n, n, 3, data).expect("sized");
    let mask = LabelMask::new(n, n, cfg.num_classes, mask).expect("labels in range");
    (image, label, mask)
}
