//! Typed reading and writing of tensors, masks, images, superpixel maps,
//! model weights and centroid banks, plus JSON helpers. Every write goes to a
//! temporary sibling file that is then renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use semtrans_core::superpixel::SuperpixelMap;
use semtrans_core::transfer::CentroidBank;
use semtrans_core::{Image, LabelMask, ProbMap};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::tnsr::{Tensor, TensorData};

/// Largest superpixel id a mask-typed file can hold (65535 is the IGNORE value).
pub const MAX_SEGMENT_ID: u32 = u16::MAX as u32 - 1;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let name =
        path.file_name().ok_or_else(|| CliError::validation(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_atomic(path, &t.encode())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    Tensor::decode(&read_bytes(path)?).map_err(|e| format_error(path, e))
}

fn format_error(path: &Path, reason: impl ToString) -> CliError {
    CliError::Format { path: path.to_path_buf(), reason: reason.to_string() }
}

fn dim(v: usize, path: &Path) -> Result<u32> {
    u32::try_from(v).map_err(|_| format_error(path, format!("dimension {v} exceeds u32")))
}

fn to_f32(values: &[f64], what: &str) -> Result<Vec<f32>> {
    values
        .iter()
        .map(|&v| {
            let x = v as f32;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(CliError::Numeric(format!("{what} value {v} is not representable as f32")))
            }
        })
        .collect()
}

fn expect_rank<'a>(t: &'a Tensor, rank: usize, path: &Path) -> Result<&'a [u32]> {
    if t.dims().len() != rank {
        return Err(format_error(path, format!("expected rank {rank}, found {:?}", t.dims())));
    }
    Ok(t.dims())
}

pub fn prob_map_tensor(p: &ProbMap, path: &Path) -> Result<Tensor> {
    let dims = vec![dim(p.height(), path)?, dim(p.width(), path)?, dim(p.num_classes(), path)?];
    Tensor::new(dims, TensorData::F32(to_f32(p.data(), "probability")?)).map_err(|e| format_error(path, e))
}

/// `[H, W, K]` f32 probabilities. Values are widened to f64 and validated.
pub fn write_prob_map(path: &Path, p: &ProbMap) -> Result<()> {
    write_tensor(path, &prob_map_tensor(p, path)?)
}

pub fn read_prob_map(path: &Path) -> Result<ProbMap> {
    let t = read_tensor(path)?;
    let d = expect_rank(&t, 3, path)?.to_vec();
    let TensorData::F32(v) = t.into_data() else {
        return Err(format_error(path, "probability maps must be f32"));
    };
    let p = ProbMap::new(d[0] as usize, d[1] as usize, d[2] as usize, v.into_iter().map(f64::from).collect())?;
    p.validate()?;
    Ok(p)
}

pub fn mask_tensor(m: &LabelMask, path: &Path) -> Result<Tensor> {
    Tensor::new(vec![dim(m.height(), path)?, dim(m.width(), path)?], TensorData::U16(m.data().to_vec()))
        .map_err(|e| format_error(path, e))
}

/// `[H, W]` u16 labels with 65535 = IGNORE.
pub fn write_mask(path: &Path, m: &LabelMask) -> Result<()> {
    write_tensor(path, &mask_tensor(m, path)?)
}

/// Raw mask contents `(height, width, labels)` without a class count.
pub fn read_mask_raw(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let t = read_tensor(path)?;
    let d = expect_rank(&t, 2, path)?.to_vec();
    let TensorData::U16(v) = t.into_data() else {
        return Err(format_error(path, "masks must be u16"));
    };
    Ok((d[0] as usize, d[1] as usize, v))
}

pub fn read_mask(path: &Path, num_classes: usize) -> Result<LabelMask> {
    let (h, w, v) = read_mask_raw(path)?;
    LabelMask::new(h, w, num_classes, v).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// `[H, W, C]` u8.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let dims = vec![dim(img.height(), path)?, dim(img.width(), path)?, dim(img.channels(), path)?];
    write_tensor(path, &Tensor::new(dims, TensorData::U8(img.data().to_vec())).map_err(|e| format_error(path, e))?)
}

pub fn read_image(path: &Path) -> Result<Image> {
    let t = read_tensor(path)?;
    let d = expect_rank(&t, 3, path)?.to_vec();
    let TensorData::U8(v) = t.into_data() else {
        return Err(format_error(path, "images must be u8"));
    };
    Ok(Image::new(d[0] as usize, d[1] as usize, d[2] as usize, v)?)
}

/// `[H, W]` u16 segment ids.
pub fn write_superpixels(path: &Path, sp: &SuperpixelMap) -> Result<()> {
    if sp.num_segments() as u64 > MAX_SEGMENT_ID as u64 + 1 {
        return Err(CliError::validation(format!("{} segments do not fit a u16 map", sp.num_segments())));
    }
    let data = sp.data().iter().map(|&v| v as u16).collect();
    let t = Tensor::new(vec![dim(sp.height(), path)?, dim(sp.width(), path)?], TensorData::U16(data))
        .map_err(|e| format_error(path, e))?;
    write_tensor(path, &t)
}

pub fn read_superpixels(path: &Path) -> Result<SuperpixelMap> {
    let (h, w, v) = read_mask_raw(path)?;
    if v.iter().any(|&x| x as u32 > MAX_SEGMENT_ID) {
        return Err(format_error(path, "segment id 65535 is reserved"));
    }
    Ok(SuperpixelMap::new(h, w, v.into_iter().map(u32::from).collect())?)
}

pub fn weights_tensor(dims: &[usize], values: &[f64], path: &Path) -> Result<Tensor> {
    let dims = dims.iter().map(|&d| dim(d, path)).collect::<Result<Vec<_>>>()?;
    Tensor::new(dims, TensorData::F32(to_f32(values, "weight")?)).map_err(|e| format_error(path, e))
}

/// Weights as an f32 tensor of the given shape.
pub fn write_weights(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    write_tensor(path, &weights_tensor(dims, values, path)?)
}

pub fn read_weights(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let t = read_tensor(path)?;
    let dims = t.dims().iter().map(|&d| d as usize).collect();
    let TensorData::F32(v) = t.into_data() else {
        return Err(format_error(path, "weights must be f32"));
    };
    Ok((dims, v.into_iter().map(f64::from).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSidecar {
    pub gamma: f64,
    pub steps: u64,
}

/// Sidecar path of a bank tensor: `bank.tnsr` -> `bank.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `[K, D]` f32 centroids plus a JSON sidecar `{gamma, steps}`.
pub fn write_bank(path: &Path, bank: &CentroidBank) -> Result<()> {
    write_weights(path, &[bank.num_classes(), bank.dim()], bank.centroids())?;
    write_json(&sidecar_path(path), &BankSidecar { gamma: bank.gamma(), steps: bank.steps() })
}

pub fn read_bank(path: &Path) -> Result<CentroidBank> {
    let (dims, values) = read_weights(path)?;
    if dims.len() != 2 {
        return Err(format_error(path, format!("expected rank 2, found {dims:?}")));
    }
    let side: BankSidecar = read_json(&sidecar_path(path))?;
    Ok(CentroidBank::from_parts(dims[0], dims[1], values, side.gamma, side.steps)?)
}

/// Output files collected in memory, so a command can fail before anything
/// reaches the disk.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn bytes(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn tensor(&mut self, path: PathBuf, t: &Tensor) {
        self.bytes(path, t.encode());
    }

    pub fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) {
        self.bytes(path, json_bytes(value));
    }

    pub fn mask(&mut self, path: PathBuf, m: &LabelMask) -> Result<()> {
        let t = mask_tensor(m, &path)?;
        self.tensor(path, &t);
        Ok(())
    }

    pub fn prob_map(&mut self, path: PathBuf, p: &ProbMap) -> Result<()> {
        let t = prob_map_tensor(p, &path)?;
        self.tensor(path, &t);
        Ok(())
    }

    pub fn weights(&mut self, path: PathBuf, dims: &[usize], values: &[f64]) -> Result<()> {
        let t = weights_tensor(dims, values, &path)?;
        self.tensor(path, &t);
        Ok(())
    }

    pub fn bank(&mut self, path: PathBuf, bank: &CentroidBank) -> Result<()> {
        self.json(sidecar_path(&path), &BankSidecar { gamma: bank.gamma(), steps: bank.steps() });
        self.weights(path, &[bank.num_classes(), bank.dim()], bank.centroids())
    }

    /// Writes every file, each one atomically.
    pub fn commit(self) -> Result<()> {
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        Ok(())
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &json_bytes(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::json(path, e))
}

/// Sorted `*.tnsr` files of a directory.
pub fn list_tensors(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "tnsr") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn tensor_name(index: usize) -> String {
    format!("{index:04}.tnsr")
}

#[cfg(test)]
mod tests {
    use super::*;
    use semtrans_core::transfer::BatchCentroids;
    use semtrans_core::IGNORE;

    #[test]
    fn typed_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProbMap::new(1, 2, 2, vec![0.25, 0.75, 0.5, 0.5]).unwrap();
        let path = dir.path().join("p.tnsr");
        write_prob_map(&path, &p).unwrap();
        assert_eq!(read_prob_map(&path).unwrap(), p);

        let m = LabelMask::new(2, 2, 3, vec![0, 2, IGNORE, 1]).unwrap();
        write_mask(&dir.path().join("m.tnsr"), &m).unwrap();
        assert_eq!(read_mask(&dir.path().join("m.tnsr"), 3).unwrap(), m);
        assert!(read_mask(&dir.path().join("m.tnsr"), 2).is_err());

        let img = Image::new(1, 2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        write_image(&dir.path().join("i.tnsr"), &img).unwrap();
        assert_eq!(read_image(&dir.path().join("i.tnsr")).unwrap(), img);

        let sp = SuperpixelMap::new(1, 3, vec![0, 1, 1]).unwrap();
        write_superpixels(&dir.path().join("s.tnsr"), &sp).unwrap();
        assert_eq!(read_superpixels(&dir.path().join("s.tnsr")).unwrap(), sp);

        let mut bank = CentroidBank::new(2, 2, 0.7).unwrap();
        bank.update(&BatchCentroids::from_values(2, 2, vec![0.5, 0.25, -1.0, 2.0]).unwrap()).unwrap();
        let bp = dir.path().join("bank.tnsr");
        write_bank(&bp, &bank).unwrap();
        assert_eq!(read_bank(&bp).unwrap(), bank);
    }

    #[test]
    fn rewriting_a_read_file_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProbMap::new(1, 1, 3, vec![0.1, 0.2, 0.7]).unwrap();
        let a = dir.path().join("a.tnsr");
        let b = dir.path().join("b.tnsr");
        write_prob_map(&a, &p).unwrap();
        write_prob_map(&b, &read_prob_map(&a).unwrap()).unwrap();
        assert_eq!(read_bytes(&a).unwrap(), read_bytes(&b).unwrap());
    }

    #[test]
    fn wrong_dtype_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tnsr");
        write_mask(&path, &LabelMask::new(1, 1, 2, vec![0]).unwrap()).unwrap();
        assert!(matches!(read_image(&path), Err(CliError::Format { .. })));
        assert!(matches!(read_prob_map(&path), Err(CliError::Format { .. })));
    }

    #[test]
    fn no_temporary_files_remain() {
        let dir = tempfile::tempdir().unwrap();
        write_json(&dir.path().join("x.json"), &vec![1, 2]).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.json")]);
    }
}
