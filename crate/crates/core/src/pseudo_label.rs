//! Pseudo-label assignment from class-balanced thresholds, followed by a
//! superpixel-gated neighborhood vote that fills isolated gaps.

use alloc::vec;

use crate::error::{Error, Result};
use crate::superpixel::SuperpixelMap;
use crate::thresholds::ClassThresholds;
use crate::types::{LabelMask, ProbMap, IGNORE};

/// Minimum winning vote count (exclusive) needed to fill an unlabeled pixel.
pub const VOTE_THRESHOLD: usize = 4;

/// Closed-form per-pixel assignment: pick the class with the largest
/// `prob / threshold` and keep it only when `prob > threshold`.
pub fn assign_initial(p: &ProbMap, t: &ClassThresholds) -> Result<LabelMask> {
    if t.num_classes() != p.num_classes() {
        return Err(Error::ClassMismatch { expected: p.num_classes(), found: t.num_classes() });
    }
    let thresholds = t.thresholds();
    let data = p
        .pixels()
        .map(|probs| {
            let mut best = 0;
            let mut best_ratio = probs[0] / thresholds[0];
            for (k, (&prob, &th)) in probs.iter().zip(thresholds).enumerate().skip(1) {
                let ratio = prob / th;
                if ratio > best_ratio {
                    best = k;
                    best_ratio = ratio;
                }
            }
            if probs[best] > thresholds[best] {
                best as u16
            } else {
                IGNORE
            }
        })
        .collect();
    LabelMask::new(p.height(), p.width(), p.num_classes(), data)
}

/// Fills IGNORE pixels by an 8-neighborhood vote restricted to neighbors in
/// the same superpixel. Votes are read from a frozen copy of the input, so the
/// result does not depend on scan order; labeled pixels are never changed.
pub fn refine_with_superpixels(m: &LabelMask, sp: &SuperpixelMap) -> Result<LabelMask> {
    let (h, w) = (m.height(), m.width());
    if (sp.height(), sp.width()) != (h, w) {
        return Err(Error::dims("mask vs superpixels", (h, w), (sp.height(), sp.width())));
    }
    let frozen = m.data();
    let ids = sp.data();
    let mut out = m.clone();
    let mut votes = vec![0usize; m.num_classes()];
    for row in 0..h {
        for col in 0..w {
            let idx = row * w + col;
            if frozen[idx] != IGNORE {
                continue;
            }
            votes.iter_mut().for_each(|v| *v = 0);
            let segment = ids[idx];
            for nr in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for nc in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    let n = nr * w + nc;
                    let label = frozen[n];
                    if label != IGNORE && ids[n] == segment {
                        votes[label as usize] += 1;
                    }
                }
            }
            let mut winner = 0;
            for k in 1..votes.len() {
                if votes[k] > votes[winner] {
                    winner = k;
                }
            }
            if votes[winner] > VOTE_THRESHOLD {
                out.data_mut()[idx] = winner as u16;
            }
        }
    }
    Ok(out)
}

/// Initial assignment followed by superpixel refinement.
pub fn generate(p: &ProbMap, t: &ClassThresholds, sp: &SuperpixelMap) -> Result<LabelMask> {
    if (sp.height(), sp.width()) != (p.height(), p.width()) {
        return Err(Error::dims("probabilities vs superpixels", (p.height(), p.width()), (sp.height(), sp.width())));
    }
    refine_with_superpixels(&assign_initial(p, t)?, sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn mask3(labels: [u16; 9]) -> LabelMask {
        LabelMask::new(3, 3, 2, labels.to_vec()).unwrap()
    }

    fn one_segment() -> SuperpixelMap {
        SuperpixelMap::new(3, 3, vec![0; 9]).unwrap()
    }

    const I: u16 = IGNORE;

    #[test]
    fn closed_thresholds_ignore_everything() {
        let p = ProbMap::new(1, 2, 2, vec![1.0, 0.0, 0.3, 0.7]).unwrap();
        let m = assign_initial(&p, &ClassThresholds::closed(2).unwrap()).unwrap();
        assert_eq!(m.data(), &[I, I]);
    }

    #[test]
    fn ratio_rule() {
        let p = ProbMap::new(1, 1, 2, vec![0.8, 0.2]).unwrap();
        let t = ClassThresholds::from_thresholds(&[0.5, 0.5]).unwrap();
        assert_eq!(assign_initial(&p, &t).unwrap().data(), &[0]);
    }

    #[test]
    fn ratio_can_pick_a_non_argmax_class() {
        let p = ProbMap::new(1, 1, 3, vec![0.45, 0.44, 0.11]).unwrap();
        let t = ClassThresholds::from_thresholds(&[0.9, 0.4, 0.9]).unwrap();
        assert_eq!(assign_initial(&p, &t).unwrap().data(), &[1]);
    }

    #[test]
    fn class_mismatch() {
        let p = ProbMap::uniform(1, 1, 2).unwrap();
        let t = ClassThresholds::closed(3).unwrap();
        assert!(matches!(assign_initial(&p, &t), Err(Error::ClassMismatch { .. })));
    }

    #[test]
    fn full_neighborhood_fills_center() {
        let m = mask3([1, 1, 1, 1, I, 1, 1, 1, 1]);
        let out = refine_with_superpixels(&m, &one_segment()).unwrap();
        assert_eq!(out.get(1, 1), 1);
    }

    #[test]
    fn four_votes_do_not_fill() {
        let m = mask3([1, 1, I, 1, I, I, 1, I, I]);
        let out = refine_with_superpixels(&m, &one_segment()).unwrap();
        assert_eq!(out.get(1, 1), I);
    }

    #[test]
    fn five_votes_fill() {
        let m = mask3([1, 1, 1, 1, I, I, 1, I, I]);
        let out = refine_with_superpixels(&m, &one_segment()).unwrap();
        assert_eq!(out.get(1, 1), 1);
    }

    #[test]
    fn superpixel_gate() {
        // Center shares a segment with 4 of its 8 labeled neighbors.
        let m = mask3([1, 1, 1, 1, I, 1, 1, 1, 1]);
        let sp = SuperpixelMap::new(3, 3, vec![0, 0, 1, 0, 0, 1, 0, 1, 1]).unwrap();
        let out = refine_with_superpixels(&m, &sp).unwrap();
        assert_eq!(out.get(1, 1), I);
    }

    #[test]
    fn frozen_copy_does_not_cascade() {
        // Row 0 fully labeled; only row 1 pixels with 5 labeled neighbors could fill,
        // and none has 5 since newly filled pixels do not vote.
        let mut labels = vec![I; 12];
        labels[..4].copy_from_slice(&[1, 1, 1, 1]);
        let m = LabelMask::new(3, 4, 2, labels).unwrap();
        let sp = SuperpixelMap::new(3, 4, vec![0; 12]).unwrap();
        let out = refine_with_superpixels(&m, &sp).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn vote_tie_goes_to_lowest_class() {
        let labels: Vec<u16> = vec![0, 0, 0, 1, I, 1, 1, 1, 0];
        let m = LabelMask::new(3, 3, 2, labels).unwrap();
        // 4 zeros vs 4 ones: no fill (4 is not > 4).
        let out = refine_with_superpixels(&m, &one_segment()).unwrap();
        assert_eq!(out.get(1, 1), I);
    }

    #[test]
    fn dimension_mismatch() {
        let m = LabelMask::ignored(2, 2, 2).unwrap();
        let sp = SuperpixelMap::new(3, 3, vec![0; 9]).unwrap();
        assert!(matches!(refine_with_superpixels(&m, &sp), Err(Error::DimensionMismatch(_))));
    }
}
