use std::fs;
use std::path::Path;

use promptfuse_autodiff::Tensor;

use crate::binio::Reader;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"PFFT";
pub const FEATURE_VERSION: u32 = 1;

/// Serializes sequences as `PFFT`, version, count, then per sequence its
/// length, width and row-major values. All integers and floats are 32-bit
/// little-endian.
pub fn encode_features(seqs: &[Tensor<f32>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(seqs.len() as u32).to_le_bytes());
    for t in seqs {
        let (len, width) = t.dims2("feature sequence")?;
        out.extend_from_slice(&(len as u32).to_le_bytes());
        out.extend_from_slice(&(width as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8], expected_width: usize) -> Result<Vec<Tensor<f32>>> {
    let mut r = Reader::new(bytes);
    let magic = r.magic()?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let count = r.u32("count")? as usize;
    let mut seqs = Vec::new();
    for i in 0..count {
        let len = r.u32("sequence length")? as usize;
        let width = r.u32("sequence width")? as usize;
        if width != expected_width {
            return Err(Error::WidthMismatch {
                expected: expected_width,
                actual: width,
                context: "feature file",
            });
        }
        if len == 0 || width == 0 {
            return Err(Error::Parse(format!("sequence {i} has an empty extent")));
        }
        let data = r.f32s(len * width, "feature values")?;
        seqs.push(Tensor::new(vec![len, width], data)?);
    }
    r.finish("the last sequence")?;
    Ok(seqs)
}

pub fn write_features(path: &Path, seqs: &[Tensor<f32>]) -> Result<()> {
    fs::write(path, encode_features(seqs)?).map_err(|e| Error::io(path, e))
}

pub fn load_precomputed_features(path: &Path, expected_width: usize) -> Result<Vec<Tensor<f32>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, expected_width)
}
