//! Handcrafted per-pixel features standing in for a convolutional backbone.
//!
//! Layout for a `C`-channel image (`D = 2C + 2`):
//! `[intensity_0..C, row, col, local_mean_0..C]`, where intensities and 3x3
//! local means (over in-bounds neighbors) are mapped from `[0, 255]` to
//! `[-1, 1]` and coordinates from `[0, H-1]` / `[0, W-1]` to `[-1, 1]`.

use alloc::vec::Vec;

use crate::types::{FeatureMap, Image};

pub fn feature_dim(channels: usize) -> usize {
    2 * channels + 2
}

#[inline]
fn scale_intensity(v: f64) -> f64 {
    v / 127.5 - 1.0
}

#[inline]
fn scale_coord(i: usize, n: usize) -> f64 {
    if n > 1 {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    } else {
        0.0
    }
}

pub fn pixel_features(img: &Image) -> FeatureMap {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let d = feature_dim(c);
    let mut data = Vec::with_capacity(h * w * d);
    for row in 0..h {
        for col in 0..w {
            for &v in img.pixel(row, col) {
                data.push(scale_intensity(v as f64));
            }
            data.push(scale_coord(row, h));
            data.push(scale_coord(col, w));
            let (r0, r1) = (row.saturating_sub(1), (row + 1).min(h - 1));
            let (c0, c1) = (col.saturating_sub(1), (col + 1).min(w - 1));
            let count = ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
            for ch in 0..c {
                let mut sum = 0.0;
                for r in r0..=r1 {
                    for cc in c0..=c1 {
                        sum += img.pixel(r, cc)[ch] as f64;
                    }
                }
                data.push(scale_intensity(sum / count));
            }
        }
    }
    FeatureMap::new(h, w, d, data).expect("features are finite and sized")
}
