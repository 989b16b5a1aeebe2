//! Feature-vector sidecar files: a little-endian u32 length header followed
//! by that many little-endian f32 values.

use crate::error::{MindError, Result};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

pub fn write_feature_vec(path: impl AsRef<Path>, values: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| MindError::io(path, e))?;
    let mut buf = Vec::with_capacity(4 + values.len() * 4);
    buf.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf).map_err(|e| MindError::io(path, e))
}

pub fn read_feature_vec(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| MindError::io(path, e))?;
    let mut header = [0u8; 4];
    file.read_exact(&mut header)
        .map_err(|e| MindError::io(path, e))?;
    let len = u32::from_le_bytes(header) as usize;
    let mut body = vec![0u8; len * 4];
    file.read_exact(&mut body)
        .map_err(|e| MindError::io(path, e))?;
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Resolve a sample's feature reference to a vector of dimension `dim`.
///
/// An empty reference stands for a sample without an image and yields an
/// all-zeros vector. Relative references are resolved against `base_dir`.
pub fn resolve_feature(feature_ref: &str, dim: usize, base_dir: &Path) -> Result<Vec<f64>> {
    if feature_ref.is_empty() {
        return Ok(vec![0.0; dim]);
    }
    let path = base_dir.join(feature_ref);
    let values = read_feature_vec(&path)?;
    if values.len() != dim {
        return Err(MindError::Shape {
            expected: format!("feature dim {}", dim),
            got: format!("{} ({} values)", path.display(), values.len()),
        });
    }
    Ok(values.into_iter().map(f64::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let values = vec![1.5f32, -2.25, 0.0, 3.5];
        write_feature_vec(&path, &values).unwrap();
        assert_eq!(read_feature_vec(&path).unwrap(), values);
    }

    #[test]
    fn empty_ref_yields_zero_vector() {
        let dir = tempfile::tempdir().unwrap();
        let v = resolve_feature("", 5, dir.path()).unwrap();
        assert_eq!(v, vec![0.0; 5]);
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        write_feature_vec(dir.path().join("f.bin"), &[1.0, 2.0]).unwrap();
        let err = resolve_feature("f.bin", 3, dir.path()).unwrap_err();
        assert!(matches!(err, MindError::Shape { .. }));
    }
}
