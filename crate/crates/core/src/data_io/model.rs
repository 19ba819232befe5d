//! Fitted-model files.
//!
//! ```text
//! magic     4 bytes  "TNSM"
//! version   u16 LE   1
//! sections  u16 LE   section count
//! section*  tag (4 bytes) | length u64 LE | payload
//! ```
//!
//! | tag    | payload                                   | models        |
//! |--------|-------------------------------------------|---------------|
//! | `METH` | one byte: 0 na, 1 pca, 2 ntsl, 3 taisl    | all (first)   |
//! | `SDIM` | u16 count, then u64 LE per mode           | na            |
//! | `PMEA` | TNSB tensor, dims `[D]`                   | pca           |
//! | `PBAS` | TNSB tensor, dims `[D, d]`                | pca           |
//! | `UFAC` | TNSB tensor `[n_k, d_k]`, one per mode    | ntsl, taisl   |
//! | `MALN` | TNSB tensor `[m_k, n_k]`, one per mode    | ntsl, taisl   |
//! | `LOSS` | u64 count, then (u64 iter, f64 loss) each | ntsl, taisl   |
//!
//! Matrices are stored column-major, which is mode-0-fastest for a
//! two-mode tensor.

use std::fs;
use std::path::Path;

use super::format::{decode_tensor, encode_tensor};
use crate::adapt::{AlignmentSet, PcaModel};
use crate::method::{FittedModel, Method};
use crate::tucker::TensorSubspace;
use crate::{DenseTensor, Error, Matrix, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"TNSM";
pub const MODEL_VERSION: u16 = 1;

fn method_code(m: Method) -> u8 {
    match m {
        Method::Na => 0,
        Method::Pca => 1,
        Method::Ntsl => 2,
        Method::Taisl => 3,
    }
}

fn matrix_bytes(m: &Matrix) -> Vec<u8> {
    let t = DenseTensor::from_dims(&[m.nrows(), m.ncols()], m.as_slice().to_vec()).expect("finite matrix");
    encode_tensor(&t)
}

fn bytes_matrix(bytes: &[u8]) -> Result<Matrix> {
    let t = decode_tensor(bytes)?;
    if t.order() != 2 {
        return Err(Error::Format(format!(
            "expected a matrix section, found shape {}",
            t.shape()
        )));
    }
    Ok(Matrix::from_column_slice(t.dims()[0], t.dims()[1], t.data()))
}

pub fn encode_model(model: &FittedModel) -> Vec<u8> {
    let mut sections: Vec<([u8; 4], Vec<u8>)> = vec![(*b"METH", vec![method_code(model.method())])];
    match model {
        FittedModel::Identity { sample_dims } => {
            let mut p = (sample_dims.len() as u16).to_le_bytes().to_vec();
            for &d in sample_dims {
                p.extend_from_slice(&(d as u64).to_le_bytes());
            }
            sections.push((*b"SDIM", p));
        }
        FittedModel::Pca(pca) => {
            let mean = DenseTensor::from_dims(&[pca.mean.len()], pca.mean.clone()).expect("finite mean");
            sections.push((*b"PMEA", encode_tensor(&mean)));
            sections.push((*b"PBAS", matrix_bytes(&pca.basis)));
        }
        FittedModel::Tensor {
            subspace,
            alignment,
            loss_trace,
            ..
        } => {
            for u in subspace.factors() {
                sections.push((*b"UFAC", matrix_bytes(u)));
            }
            for m in alignment.mats() {
                sections.push((*b"MALN", matrix_bytes(m)));
            }
            let mut p = (loss_trace.len() as u64).to_le_bytes().to_vec();
            for &(i, l) in loss_trace {
                p.extend_from_slice(&(i as u64).to_le_bytes());
                p.extend_from_slice(&l.to_le_bytes());
            }
            sections.push((*b"LOSS", p));
        }
    }
    let mut out = MODEL_MAGIC.to_vec();
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u16).to_le_bytes());
    for (tag, payload) in sections {
        out.extend_from_slice(&tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Truncated {
                expected: self.at as u64 + n as u64,
                found: self.bytes.len() as u64,
            })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} too large")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<FittedModel> {
    if bytes.len() < 4 || bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("missing TNSM magic".into()));
    }
    let mut r = Reader { bytes, at: 4 };
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(Error::Version(version));
    }
    let count = r.u16()?;
    let mut sections = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        let len = r.len()?;
        sections.push((tag, r.take(len)?));
    }
    if r.at != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let tagged = |tag: &[u8; 4]| -> Vec<&[u8]> { sections.iter().filter(|(t, _)| t == tag).map(|(_, p)| *p).collect() };
    let one = |tag: &[u8; 4]| -> Result<&[u8]> {
        match tagged(tag)[..] {
            [p] => Ok(p),
            _ => Err(Error::Format(format!(
                "expected exactly one {} section",
                String::from_utf8_lossy(tag)
            ))),
        }
    };
    let method = match one(b"METH")? {
        [0] => Method::Na,
        [1] => Method::Pca,
        [2] => Method::Ntsl,
        [3] => Method::Taisl,
        other => return Err(Error::Format(format!("unknown method code {other:?}"))),
    };
    let invalid = |e: Error| Error::Format(format!("inconsistent model: {e}"));
    match method {
        Method::Na => {
            let mut s = Reader {
                bytes: one(b"SDIM")?,
                at: 0,
            };
            let n = s.u16()?;
            let dims = (0..n).map(|_| s.len()).collect::<Result<Vec<_>>>()?;
            if s.at != s.bytes.len() || dims.is_empty() || dims.contains(&0) {
                return Err(Error::Format("malformed SDIM section".into()));
            }
            Ok(FittedModel::Identity { sample_dims: dims })
        }
        Method::Pca => {
            let mean = decode_tensor(one(b"PMEA")?)?;
            let basis = bytes_matrix(one(b"PBAS")?)?;
            if mean.order() != 1 || basis.nrows() != mean.data().len() {
                return Err(Error::Format("PCA mean and basis disagree".into()));
            }
            Ok(FittedModel::Pca(PcaModel {
                mean: mean.into_data(),
                basis,
            }))
        }
        Method::Ntsl | Method::Taisl => {
            let factors = tagged(b"UFAC")
                .into_iter()
                .map(bytes_matrix)
                .collect::<Result<Vec<_>>>()?;
            let mats = tagged(b"MALN")
                .into_iter()
                .map(bytes_matrix)
                .collect::<Result<Vec<_>>>()?;
            if factors.is_empty() || factors.len() != mats.len() {
                return Err(Error::Format("factor and alignment section counts differ".into()));
            }
            if factors.iter().zip(&mats).any(|(u, m)| u.nrows() != m.nrows()) {
                return Err(Error::Format(
                    "alignment output size does not match the subspace".into(),
                ));
            }
            let mut s = Reader {
                bytes: one(b"LOSS")?,
                at: 0,
            };
            let n = s.len()?;
            let mut loss_trace = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let i = s.len()?;
                loss_trace.push((i, f64::from_bits(s.u64()?)));
            }
            if s.at != s.bytes.len() {
                return Err(Error::Format("malformed LOSS section".into()));
            }
            Ok(FittedModel::Tensor {
                method,
                subspace: TensorSubspace::new(factors).map_err(invalid)?,
                alignment: AlignmentSet::new(mats).map_err(invalid)?,
                loss_trace,
            })
        }
    }
}

pub fn write_model(path: &Path, model: &FittedModel) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<FittedModel> {
    decode_model(&fs::read(path)?)
}
