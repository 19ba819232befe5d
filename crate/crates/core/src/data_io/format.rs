//! Fixed-layout binary tensor files.
//!
//! ```text
//! magic    4 bytes  "TNSB"
//! version  u16 LE   1
//! order    u16 LE   number of modes
//! dims     order x u64 LE
//! payload  prod(dims) x f64 LE, mode-0-fastest
//! ```
//!
//! Labels live in a companion UTF-8 file (`<data path>.labels`), one
//! integer per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::adapt::LabeledTensorSet;
use crate::{DenseTensor, Error, Result, Shape};

pub const MAGIC: [u8; 4] = *b"TNSB";
pub const VERSION: u16 = 1;

pub fn encode_tensor(x: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * x.order() + 8 * x.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(x.order() as u16).to_le_bytes());
    for &d in x.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = at
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or(Error::Truncated {
            expected: (*at + n) as u64,
            found: bytes.len() as u64,
        })?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::Format("missing TNSB magic".into()));
    }
    let mut at = 4;
    let version = u16::from_le_bytes(take(bytes, &mut at, 2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let order = u16::from_le_bytes(take(bytes, &mut at, 2)?.try_into().expect("2 bytes")) as usize;
    let mut dims = Vec::with_capacity(order);
    for _ in 0..order {
        let d = u64::from_le_bytes(take(bytes, &mut at, 8)?.try_into().expect("8 bytes"));
        dims.push(usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))?);
    }
    let shape = Shape::new(dims).map_err(|e| Error::Format(e.to_string()))?;
    let payload = shape
        .numel()
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let expected = (at + payload) as u64;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    if (bytes.len() as u64) > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() as u64 - expected
        )));
    }
    let data = bytes[at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_tensor(path: &Path, x: &DenseTensor) -> Result<()> {
    fs::write(path, encode_tensor(x))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    decode_tensor(&fs::read(path)?)
}

pub fn labels_path(data_path: &Path) -> PathBuf {
    let mut s = data_path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::Format(format!("label line {}: {l:?} is not an integer", i + 1)))
        })
        .collect()
}

/// Writes the data file and, when labelled, the companion labels file.
/// An existing stale labels file is removed for unlabelled sets.
pub fn write_set(path: &Path, set: &LabeledTensorSet) -> Result<()> {
    write_tensor(path, &set.data)?;
    let lp = labels_path(path);
    match &set.labels {
        Some(l) => write_labels(&lp, l)?,
        None if lp.exists() => fs::remove_file(lp)?,
        None => {}
    }
    Ok(())
}

pub fn read_set(path: &Path) -> Result<LabeledTensorSet> {
    let data = read_tensor(path)?;
    let lp = labels_path(path);
    let labels = if lp.exists() { Some(read_labels(&lp)?) } else { None };
    LabeledTensorSet::new(data, labels).map_err(|e| Error::Format(e.to_string()))
}

/// Plain-text dump for debugging: a `# shape` header, then one value per
/// line in linear order using the shortest round-trip representation.
pub fn write_text(out: &mut impl Write, x: &DenseTensor) -> Result<()> {
    writeln!(out, "# shape {}", x.shape())?;
    for v in x.data() {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}
