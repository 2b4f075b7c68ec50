use std::fs;
use std::path::Path;

use promptfuse_autodiff::Tensor;

use crate::binio::Reader;
use crate::error::{Error, Result};
use crate::params::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializes `PFCK`, version, config fingerprint (u64), tensor count, then
/// per tensor its name length and UTF-8 name, rank, dims and values. All
/// numbers are little-endian; counts and dims are u32, values f32. Tensors
/// are written in name order, so equal stores give equal bytes.
pub fn encode_checkpoint<'a>(
    fingerprint: u64,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor<f32>)>,
) -> Vec<u8> {
    let mut sorted: Vec<_> = tensors.into_iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&fingerprint.to_le_bytes());
    out.extend_from_slice(&(sorted.len() as u32).to_le_bytes());
    for (name, t) in sorted {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses a checkpoint, refusing it unless its fingerprint matches.
pub fn decode_checkpoint(bytes: &[u8], expected_fingerprint: u64) -> Result<ParamStore> {
    let mut r = Reader::new(bytes);
    let magic = r.magic()?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let fingerprint = r.u64("fingerprint")?;
    let count = r.u32("tensor count")?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|e| Error::Parse(format!("tensor name: {e}")))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32("dim")? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| Error::Parse(format!("{name}: size overflow")))?;
        let data = r.f32s(n, "tensor values")?;
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    r.finish("the last tensor")?;
    if fingerprint != expected_fingerprint {
        return Err(Error::FingerprintMismatch {
            found: fingerprint,
            expected: expected_fingerprint,
        });
    }
    Ok(store)
}

pub fn save_checkpoint<'a>(
    path: &Path,
    fingerprint: u64,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor<f32>)>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_checkpoint(fingerprint, tensors)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected_fingerprint: u64) -> Result<ParamStore> {
    if !path.exists() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expected_fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(
            "b",
            Tensor::new(vec![2, 2], vec![1.0, -0.0, f32::MIN_POSITIVE, 4.5]).unwrap(),
        )
        .unwrap();
        s.insert("a", Tensor::scalar(3.0)).unwrap();
        s
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.pfck"), dir.path().join("2.pfck"));
        save_checkpoint(&p1, 7, store().iter()).unwrap();
        let loaded = load_checkpoint(&p1, 7).unwrap();
        assert_eq!(loaded.digest(), store().digest());
        save_checkpoint(&p2, 7, loaded.iter()).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn distinct_errors() {
        let bytes = encode_checkpoint(7, store().iter());
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 1], 7),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(
            decode_checkpoint(&bytes, 8),
            Err(Error::FingerprintMismatch { .. })
        ));
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad, 7),
            Err(Error::BadMagic(_))
        ));
        let mut newer = bytes;
        newer[4] = 9;
        assert!(matches!(
            decode_checkpoint(&newer, 7),
            Err(Error::VersionMismatch { .. })
        ));
        let missing = Path::new("/nonexistent/x.pfck");
        assert!(matches!(
            load_checkpoint(missing, 7),
            Err(Error::MissingCheckpoint(_))
        ));
    }
}
