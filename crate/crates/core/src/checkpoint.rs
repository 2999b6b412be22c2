//! Binary tensor container and train-state checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "EDITCKPT"
//! version      u32
//! header_len   u32, then header_len bytes of UTF-8 text
//! count        u32
//! per tensor:  name_len u32, name, dtype u8 (1 = f32, 2 = f64),
//!              ndim u32, dims u64 × ndim, payload_len u64, payload
//! digest       32 bytes SHA-256 of everything above
//! ```

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use sha2::{Digest, Sha256};

use crate::error::{EditError, Result};

pub const MAGIC: &[u8; 8] = b"EDITCKPT";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dtype: DType,
    pub dims: Vec<usize>,
    /// Little-endian element bytes.
    pub payload: Vec<u8>,
}

impl TensorRecord {
    pub fn from_tensor(name: impl Into<String>, t: &Tensor) -> Result<Self> {
        let flat = t.flatten_all()?;
        let payload = match t.dtype() {
            DType::F32 => flat.to_vec1::<f32>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
            DType::F64 => flat.to_vec1::<f64>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
            other => return Err(EditError::Format(format!("unsupported dtype {other:?}"))),
        };
        Ok(Self {
            name: name.into(),
            dtype: t.dtype(),
            dims: t.dims().to_vec(),
            payload,
        })
    }

    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        let t = match self.dtype {
            DType::F32 => {
                let v: Vec<f32> = self
                    .payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(v, self.dims.as_slice(), device)?
            }
            DType::F64 => {
                let v: Vec<f64> = self
                    .payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(v, self.dims.as_slice(), device)?
            }
            other => return Err(EditError::Format(format!("unsupported dtype {other:?}"))),
        };
        Ok(t)
    }
}

fn dtype_tag(d: DType) -> u8 {
    match d {
        DType::F32 => 1,
        _ => 2,
    }
}

/// In-memory form of one container file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub header: String,
    pub tensors: Vec<TensorRecord>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| EditError::Integrity("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, v: u64) -> Result<usize> {
        usize::try_from(v).map_err(|_| EditError::Integrity("length overflow".into()))
    }
}

impl TensorFile {
    pub fn new(header: impl Into<String>) -> Self {
        Self {
            header: header.into(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, t: &Tensor) -> Result<()> {
        self.tensors.push(TensorRecord::from_tensor(name, t)?);
        Ok(())
    }

    pub fn record(&self, name: &str) -> Option<&TensorRecord> {
        self.tensors.iter().find(|r| r.name == name)
    }

    pub fn tensor(&self, name: &str, device: &Device) -> Result<Option<Tensor>> {
        self.record(name).map(|r| r.to_tensor(device)).transpose()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        out.extend_from_slice(self.header.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for r in &self.tensors {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.push(dtype_tag(r.dtype));
            out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
            for &d in &r.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&(r.payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&r.payload);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() + 4 {
            return Err(EditError::Integrity("file too short".into()));
        }
        if &buf[..MAGIC.len()] != MAGIC {
            return Err(EditError::Format("not a checkpoint container (bad magic)".into()));
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(EditError::Format(format!(
                "format version {version}, this build reads version {FORMAT_VERSION}"
            )));
        }
        if buf.len() < 12 + DIGEST_LEN {
            return Err(EditError::Integrity("file too short".into()));
        }
        let (body, digest) = buf.split_at(buf.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(EditError::Integrity("checksum mismatch (truncated or corrupt)".into()));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let header_len = r.u32()? as usize;
        let header = String::from_utf8(r.take(header_len)?.to_vec())
            .map_err(|_| EditError::Integrity("header is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| EditError::Integrity("tensor name is not UTF-8".into()))?;
            let (dtype, width) = match r.u8()? {
                1 => (DType::F32, 4),
                2 => (DType::F64, 8),
                t => return Err(EditError::Format(format!("unknown dtype tag {t}"))),
            };
            let ndim = r.u32()? as usize;
            let dims = (0..ndim)
                .map(|_| r.u64().and_then(|d| r.len(d)))
                .collect::<Result<Vec<_>>>()?;
            let payload_len = r.u64()?;
            let payload_len = r.len(payload_len)?;
            if payload_len != dims.iter().product::<usize>() * width {
                return Err(EditError::Integrity(format!("payload size mismatch for '{name}'")));
            }
            let payload = r.take(payload_len)?.to_vec();
            tensors.push(TensorRecord {
                name,
                dtype,
                dims,
                payload,
            });
        }
        if r.pos != body.len() {
            return Err(EditError::Integrity("trailing bytes after tensors".into()));
        }
        Ok(Self { header, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| EditError::data(path, e))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        let mut f = TensorFile::new("a = 1\n");
        let t = Tensor::new(&[[1.5f32, -2.0], [0.25, 3.0]], &Device::Cpu).unwrap();
        f.push("x.weight", &t).unwrap();
        let d = Tensor::new(&[1e-300f64, 7.0, -0.0], &Device::Cpu).unwrap();
        f.push("y", &d).unwrap();
        f
    }

    #[test]
    fn bytes_roundtrip_is_fixed_point() {
        let f = sample();
        let bytes = f.to_bytes();
        let back = TensorFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_bytes(), bytes);
        let y = back.tensor("y", &Device::Cpu).unwrap().unwrap();
        assert_eq!(y.to_vec1::<f64>().unwrap()[0], 1e-300);
    }

    #[test]
    fn wrong_version_is_format_error() {
        let mut bytes = sample().to_bytes();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(TensorFile::from_bytes(&bytes), Err(EditError::Format(_))));
    }

    #[test]
    fn truncation_and_corruption_are_integrity_errors() {
        let bytes = sample().to_bytes();
        for cut in [bytes.len() - 1, bytes.len() / 2, 20, 10] {
            assert!(
                matches!(TensorFile::from_bytes(&bytes[..cut]), Err(EditError::Integrity(_))),
                "cut at {cut}"
            );
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(matches!(TensorFile::from_bytes(&flipped), Err(EditError::Integrity(_))));
    }
}
