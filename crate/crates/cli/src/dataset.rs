//! On-disk dataset layout:
//!
//! ```text
//! manifest.json          class count and per-image labels
//! source/images/NNNN.tnsr
//! source/masks/NNNN.tnsr
//! target/images/NNNN.tnsr
//! eval/target_masks/NNNN.tnsr   held out; never read by training itself
//! ```

use std::path::Path;

use semtrans_core::toy::{SyntheticData, TrainData};
use semtrans_core::ImageLabel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_image, read_json, read_mask, tensor_name, write_image, write_json, write_mask};

pub const MANIFEST: &str = "manifest.json";
pub const SOURCE_IMAGES: &str = "source/images";
pub const SOURCE_MASKS: &str = "source/masks";
pub const TARGET_IMAGES: &str = "target/images";
pub const EVAL_MASKS: &str = "eval/target_masks";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub file: String,
    /// 0 = normal, 1 = lesion.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub num_classes: usize,
    pub source: Vec<Entry>,
    pub target: Vec<Entry>,
}

fn entries(labels: &[ImageLabel]) -> Vec<Entry> {
    labels.iter().enumerate().map(|(i, l)| Entry { file: tensor_name(i), label: l.value() }).collect()
}

pub fn write_dataset(dir: &Path, data: &SyntheticData) -> Result<Manifest> {
    let num_classes = data.source.masks.first().map_or(2, |m| m.num_classes());
    for (i, (img, mask)) in data.source.images.iter().zip(&data.source.masks).enumerate() {
        write_image(&dir.join(SOURCE_IMAGES).join(tensor_name(i)), img)?;
        write_mask(&dir.join(SOURCE_MASKS).join(tensor_name(i)), mask)?;
    }
    for (i, (img, mask)) in data.target.images.iter().zip(&data.target.masks).enumerate() {
        write_image(&dir.join(TARGET_IMAGES).join(tensor_name(i)), img)?;
        write_mask(&dir.join(EVAL_MASKS).join(tensor_name(i)), mask)?;
    }
    let manifest = Manifest { num_classes, source: entries(&data.source.labels), target: entries(&data.target.labels) };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn label(e: &Entry) -> Result<ImageLabel> {
    ImageLabel::try_from(e.label).map_err(|_| CliError::validation(format!("{}: image label must be 0 or 1", e.file)))
}

/// Loads a dataset. Evaluation masks are attached when the eval directory
/// holds one per target image.
pub fn read_dataset(dir: &Path) -> Result<TrainData> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let k = manifest.num_classes;
    if manifest.source.is_empty() || manifest.target.is_empty() {
        return Err(CliError::MissingFiles(format!("{}: manifest lists no source or no target images", dir.display())));
    }
    let mut data = TrainData {
        num_classes: k,
        source_images: Vec::new(),
        source_labels: Vec::new(),
        source_masks: Vec::new(),
        target_images: Vec::new(),
        target_labels: Vec::new(),
        target_eval_masks: None,
    };
    for e in &manifest.source {
        data.source_images.push(read_image(&dir.join(SOURCE_IMAGES).join(&e.file))?);
        data.source_masks.push(read_mask(&dir.join(SOURCE_MASKS).join(&e.file), k)?);
        data.source_labels.push(label(e)?);
    }
    for e in &manifest.target {
        data.target_images.push(read_image(&dir.join(TARGET_IMAGES).join(&e.file))?);
        data.target_labels.push(label(e)?);
    }
    let eval = dir.join(EVAL_MASKS);
    if eval.is_dir() {
        let masks = manifest.target.iter().map(|e| read_mask(&eval.join(&e.file), k)).collect::<Result<Vec<_>>>()?;
        data.target_eval_masks = Some(masks);
    }
    data.validate()?;
    Ok(data)
}
