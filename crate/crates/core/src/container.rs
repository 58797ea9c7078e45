//! Little-endian tensor container shared by checkpoints and patch sets.
//!
//! ```text
//! magic        8 bytes        identifies the payload kind
//! version      u32            FORMAT_VERSION
//! header_len   u32            followed by UTF-8 `key = value` lines
//! count        u32            number of tensors
//! table        count entries: u32 name_len, name bytes, u8 dtype
//!                             (1 = f32, 2 = f64), u8 rank, rank x u64 dims
//! payload      tensor data in table order, IEEE-754 little-endian
//! ```
//!
//! Nothing may follow the payload.

use std::collections::BTreeMap;

use crate::error::FormatError;
use crate::tensor::{DType, Scalar, Tensor};

pub const FORMAT_VERSION: u32 = 1;
const MAX_RANK: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    /// Converts when the stored precision differs from `T`.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Self {
        match T::DTYPE {
            DType::F32 => AnyTensor::F32(t.cast()),
            DType::F64 => AnyTensor::F64(t.cast()),
        }
    }

    fn write_data(&self, out: &mut Vec<u8>) {
        match self {
            AnyTensor::F32(t) => t.data().iter().for_each(|v| v.write_le(out)),
            AnyTensor::F64(t) => t.data().iter().for_each(|v| v.write_le(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: BTreeMap<String, String>,
    pub tensors: Vec<(String, AnyTensor)>,
}

impl Container {
    pub fn new() -> Self {
        Self {
            header: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&AnyTensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn encode(&self, magic: &[u8; 8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(magic);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let header: String = self.header.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.dtype().tag());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
        for (_, t) in &self.tensors {
            t.write_data(&mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8], magic: &[u8; 8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != magic {
            return Err(FormatError::CorruptHeader("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = r.u32()? as usize;
        let header_text = std::str::from_utf8(r.take(header_len)?)
            .map_err(|_| FormatError::CorruptHeader("header is not UTF-8".into()))?;
        let header = parse_header(header_text)?;

        let count = r.u32()? as usize;
        let mut table = Vec::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| FormatError::CorruptHeader("tensor name is not UTF-8".into()))?
                .to_string();
            let dtype = DType::from_tag(r.u8()?)
                .ok_or_else(|| FormatError::CorruptHeader(format!("unknown dtype for `{name}`")))?;
            let rank = r.u8()?;
            if rank == 0 || rank > MAX_RANK {
                return Err(FormatError::CorruptHeader(format!("rank {rank} for `{name}`")));
            }
            let mut dims = Vec::with_capacity(rank as usize);
            let mut numel: usize = 1;
            for _ in 0..rank {
                let d = usize::try_from(r.u64()?)
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| FormatError::CorruptHeader(format!("bad extent in `{name}`")))?;
                numel = numel
                    .checked_mul(d)
                    .ok_or_else(|| FormatError::CorruptHeader(format!("`{name}` is too large")))?;
                dims.push(d);
            }
            let bytes = numel
                .checked_mul(dtype.size())
                .ok_or_else(|| FormatError::CorruptHeader(format!("`{name}` is too large")))?;
            table.push((name, dtype, dims, bytes));
        }

        let payload = table
            .iter()
            .try_fold(0usize, |acc, e| acc.checked_add(e.3))
            .ok_or_else(|| FormatError::CorruptHeader("payload size overflows".into()))?;
        let remaining = r.remaining();
        if remaining < payload {
            return Err(FormatError::Truncated {
                needed: payload - remaining,
            });
        }
        if remaining > payload {
            return Err(FormatError::TrailingData(remaining - payload));
        }

        let mut tensors = Vec::with_capacity(table.len());
        for (name, dtype, dims, nbytes) in table {
            let raw = r.take(nbytes)?;
            let t = match dtype {
                DType::F32 => AnyTensor::F32(read_tensor(dims, raw)),
                DType::F64 => AnyTensor::F64(read_tensor(dims, raw)),
            };
            tensors.push((name, t));
        }
        Ok(Self { header, tensors })
    }
}

impl Default for Container {
    fn default() -> Self {
        Self::new()
    }
}

fn read_tensor<T: Scalar>(dims: Vec<usize>, raw: &[u8]) -> Tensor<T> {
    let data = raw.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    Tensor::new(dims, data).expect("extents validated while reading the table")
}

pub fn parse_header(text: &str) -> Result<BTreeMap<String, String>, FormatError> {
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::CorruptHeader(format!("header line without `=`: {line:?}")))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(FormatError::CorruptHeader(format!("duplicate header key `{}`", k.trim())));
        }
    }
    Ok(map)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                needed: n - self.remaining(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
