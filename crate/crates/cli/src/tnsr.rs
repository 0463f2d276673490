//! The TNSR container: a 4-byte magic `TNSR`, version byte `1`, a dtype byte
//! (1 = f32, 2 = u16, 3 = u8), a rank byte (1 to 4), the dimensions as
//! little-endian u32, then the row-major little-endian payload with no padding.

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u8 = 1;
pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    U16 = 2,
    U8 = 3,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U16 => 2,
            Dtype::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Dtype::F32),
            2 => Some(Dtype::U16),
            3 => Some(Dtype::U8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U16(Vec<u16>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::U16(_) => Dtype::U16,
            TensorData::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U16(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: TensorData,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("unknown dtype code {0}")]
    Dtype(u8),
    #[error("rank {0} outside 1..=4")]
    Rank(usize),
    #[error("truncated header")]
    Truncated,
    #[error("payload is {found} bytes, dims need {expected}")]
    PayloadSize { expected: usize, found: usize },
    #[error("element count overflows")]
    Overflow,
    #[error("dims {dims:?} hold {expected} elements, data has {found}")]
    Shape { dims: Vec<u32>, expected: usize, found: usize },
}

fn element_count(dims: &[u32]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(TensorError::Rank(dims.len()));
        }
        let expected = element_count(&dims).ok_or(TensorError::Overflow)?;
        if expected != data.len() {
            return Err(TensorError::Shape { dims, expected, found: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = 7 + 4 * self.dims.len();
        let mut out = Vec::with_capacity(header + self.data.len() * self.data.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.data.dtype() as u8);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < 7 {
            return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
                TensorError::BadMagic
            } else {
                TensorError::Truncated
            });
        }
        if &bytes[..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(TensorError::Version(bytes[4]));
        }
        let dtype = Dtype::from_code(bytes[5]).ok_or(TensorError::Dtype(bytes[5]))?;
        let rank = bytes[6] as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(TensorError::Rank(rank));
        }
        let header = 7 + 4 * rank;
        if bytes.len() < header {
            return Err(TensorError::Truncated);
        }
        let dims: Vec<u32> =
            bytes[7..header].chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let count = element_count(&dims).ok_or(TensorError::Overflow)?;
        let expected = count.checked_mul(dtype.size()).ok_or(TensorError::Overflow)?;
        let payload = &bytes[header..];
        if payload.len() != expected {
            return Err(TensorError::PayloadSize { expected, found: payload.len() });
        }
        let data = match dtype {
            Dtype::F32 => {
                TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
            }
            Dtype::U16 => TensorData::U16(payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
            Dtype::U8 => TensorData::U8(payload.to_vec()),
        };
        Ok(Self { dims, data })
    }
}
