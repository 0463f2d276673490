//! Backbone-independent pieces of weakly-supervised semantic transfer for
//! segmentation, plus a small hand-differentiated pipeline that runs the
//! whole self-training loop end to end.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line live in the `semtrans` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod losses;
pub mod metrics;
pub mod pseudo_label;
pub mod rng;
pub mod superpixel;
pub mod thresholds;
pub mod toy;
pub mod transfer;
pub mod types;

pub use error::{Error, Result};
pub use types::{argmax_map, max_map, FeatureMap, Image, ImageLabel, LabelMask, ProbMap, IGNORE};
