//! Class-balanced confidence thresholds and the curriculum portion schedule.
//!
//! For every class the confidences `M_j` of pixels predicted as that class are
//! collected over the whole target set and sorted ascending; the threshold is
//! the value ranked at `floor((1 - p) * n)`, so roughly the top `p` fraction
//! of each class clears it regardless of how frequent the class is.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::types::{argmax, ProbMap};

/// Lower bound applied to gathered confidences before taking logs.
pub const MIN_CONFIDENCE: f64 = 1e-12;

/// Per-class balance parameters `lambda_k` and their thresholds `exp(-lambda_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassThresholds {
    lambdas: Vec<f64>,
    thresholds: Vec<f64>,
}

impl ClassThresholds {
    /// Builds thresholds from `lambda_k >= 0`; thresholds are always derived as
    /// `exp(-lambda_k)` so a reload from the lambdas alone is lossless.
    pub fn from_lambdas(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("thresholds need at least one class"));
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::invalid(format!("class balance parameter {bad} is not a finite value >= 0")));
        }
        let thresholds = lambdas.iter().map(|&l| math::exp(-l)).collect();
        Ok(Self { lambdas, thresholds })
    }

    /// Builds from thresholds in `(0, 1]`.
    pub fn from_thresholds(thresholds: &[f64]) -> Result<Self> {
        if let Some(bad) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::invalid(format!("threshold {bad} outside (0, 1]")));
        }
        Self::from_lambdas(thresholds.iter().map(|&t| (-math::ln(t)).max(0.0)).collect())
    }

    /// All thresholds at 1.0: nothing passes the strict comparison.
    pub fn closed(num_classes: usize) -> Result<Self> {
        Self::from_lambdas(vec![0.0; num_classes])
    }

    pub fn num_classes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

/// Portion of predicted pixels per class admitted as pseudo labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    pub p0: f64,
    pub step: f64,
    pub p_max: f64,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self { p0: 0.25, step: 0.05, p_max: 0.55 }
    }
}

impl CurriculumSchedule {
    pub fn new(p0: f64, step: f64, p_max: f64) -> Result<Self> {
        let s = Self { p0, step, p_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 <= self.p_max && self.p_max <= 1.0) {
            return Err(Error::invalid(format!(
                "schedule needs 0 < p0 <= p_max <= 1, got p0={} p_max={}",
                self.p0, self.p_max
            )));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("schedule step must be >= 0, got {}", self.step)));
        }
        Ok(())
    }

    pub fn portion_at(&self, epoch: usize) -> f64 {
        (self.p0 + self.step * epoch as f64).min(self.p_max)
    }
}

/// Same as [`CurriculumSchedule::portion_at`].
pub fn portion_at(schedule: &CurriculumSchedule, epoch: usize) -> f64 {
    schedule.portion_at(epoch)
}

/// Rank of the threshold inside an ascending list of `len >= 1` confidences.
pub fn threshold_rank(len: usize, p: f64) -> usize {
    let t = math::floor((1.0 - p) * len as f64);
    (t.max(0.0) as usize).min(len - 1)
}

/// Determines `lambda_k` for every class from the target predictions at portion `p`.
///
/// A class that no pixel is predicted as gets `lambda_k = 0`.
pub fn determine_lambdas<'a, I>(maps: I, p: f64) -> Result<ClassThresholds>
where
    I: IntoIterator<Item = &'a ProbMap>,
{
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("portion p must lie in (0, 1], got {p}")));
    }
    let mut per_class: Vec<Vec<f64>> = Vec::new();
    let mut num_classes = None;
    for map in maps {
        let k = map.num_classes();
        match num_classes {
            None => {
                num_classes = Some(k);
                per_class = vec![Vec::new(); k];
            }
            Some(expected) if expected != k => {
                return Err(Error::ClassMismatch { expected, found: k });
            }
            Some(_) => {}
        }
        for probs in map.pixels() {
            let label = argmax(probs);
            per_class[label].push(probs[label]);
        }
    }
    if num_classes.is_none() {
        return Err(Error::EmptyInput);
    }
    let lambdas = per_class
        .into_iter()
        .map(|mut confidences| {
            if confidences.is_empty() {
                return 0.0;
            }
            confidences.sort_unstable_by(f64::total_cmp);
            let value = confidences[threshold_rank(confidences.len(), p)].max(MIN_CONFIDENCE);
            (-math::ln(value)).max(0.0)
        })
        .collect();
    ClassThresholds::from_lambdas(lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn schedule_values() {
        let s = CurriculumSchedule::default();
        assert_eq!(s.portion_at(0), 0.25);
        assert!(approx(s.portion_at(3), 0.40));
        assert_eq!(s.portion_at(10), 0.55);
        assert_eq!(s.portion_at(usize::MAX / 2), 0.55);
    }

    #[test]
    fn schedule_validation() {
        assert!(CurriculumSchedule::new(0.0, 0.05, 0.5).is_err());
        assert!(CurriculumSchedule::new(0.6, 0.05, 0.5).is_err());
        assert!(CurriculumSchedule::new(0.2, -0.1, 0.5).is_err());
        assert!(CurriculumSchedule::new(0.2, 0.0, 1.0).is_ok());
    }

    #[test]
    fn two_pixel_trace() {
        let map = ProbMap::new(2, 1, 2, vec![0.9, 0.1, 0.3, 0.7]).unwrap();
        let t = determine_lambdas([&map], 0.5).unwrap();
        assert!(approx(t.lambdas()[0], -libm::log(0.9)));
        assert!(approx(t.lambdas()[1], -libm::log(0.7)));
    }

    #[test]
    fn empty_class_gets_zero_lambda() {
        let map = ProbMap::new(4, 1, 2, vec![0.7, 0.3, 0.5, 0.5, 0.8, 0.2, 0.6, 0.4]).unwrap();
        let t = determine_lambdas([&map], 0.25).unwrap();
        assert!(approx(t.lambdas()[0], -libm::log(0.8)));
        assert_eq!(t.lambdas()[1], 0.0);
        assert_eq!(t.thresholds()[1], 1.0);
    }

    #[test]
    fn errors() {
        let maps: [&ProbMap; 0] = [];
        assert_eq!(determine_lambdas(maps, 0.5), Err(Error::EmptyInput));
        let a = ProbMap::uniform(1, 1, 2).unwrap();
        let b = ProbMap::uniform(1, 1, 3).unwrap();
        assert_eq!(determine_lambdas([&a, &b], 0.5), Err(Error::ClassMismatch { expected: 2, found: 3 }));
        assert!(determine_lambdas([&a], 0.0).is_err());
        assert!(determine_lambdas([&a], 1.5).is_err());
    }

    #[test]
    fn zero_confidence_is_clamped() {
        let map = ProbMap::new(1, 1, 1, vec![0.0]).unwrap();
        let t = determine_lambdas([&map], 1.0).unwrap();
        assert!(t.lambdas()[0].is_finite());
    }

    #[test]
    fn thresholds_match_lambdas() {
        let t = ClassThresholds::from_thresholds(&[0.5, 1.0, 0.123]).unwrap();
        for (l, th) in t.lambdas().iter().zip(t.thresholds()) {
            assert!((libm::exp(-l) - th).abs() <= 1e-9 * th);
        }
        assert!(ClassThresholds::from_thresholds(&[0.0]).is_err());
    }
}
