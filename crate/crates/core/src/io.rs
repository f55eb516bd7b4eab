//! On-disk volume format.
//!
//! Layout, byte by byte, all integers little-endian:
//!
//! ```text
//! offset size  field
//! 0      4     magic "SEGV"
//! 4      1     format version (1)
//! 5      1     dtype code: 0 = u32 labels, 1 = f32 field
//! 6      1     dimension count (2 or 3)
//! 7      8*nd  extents, u64 each
//! ...    n*4   payload, row-major, little-endian
//! ```
//!
//! Round-trips are bit-exact; unknown magic, version, dtype or a payload of
//! the wrong size are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::volume::{FieldVolume, LabelVolume};
use crate::Result;

pub const MAGIC: [u8; 4] = *b"SEGV";
pub const FORMAT_VERSION: u8 = 1;
pub const DTYPE_LABELS: u8 = 0;
pub const DTYPE_FIELD: u8 = 1;

/// Either kind of volume the format can hold.
#[derive(Debug, Clone)]
pub enum Volume {
    Labels(LabelVolume),
    Field(FieldVolume),
}

fn write_header(w: &mut impl Write, dtype: u8, dims: &[usize]) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&[FORMAT_VERSION, dtype, dims.len() as u8])?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_labels(path: impl AsRef<Path>, v: &LabelVolume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, DTYPE_LABELS, v.dims())?;
    for &l in v.labels() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field(path: impl AsRef<Path>, v: &FieldVolume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, DTYPE_FIELD, v.dims())?;
    for &x in v.values() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_volume(path: impl AsRef<Path>, v: &Volume) -> Result<()> {
    match v {
        Volume::Labels(l) => write_labels(path, l),
        Volume::Field(f) => write_field(path, f),
    }
}

/// Reads either kind of volume, validating magic, version, dtype and payload
/// size.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head)?;
    let (version, dtype, ndims) = (head[0], head[1], head[2]);
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion(version));
    }
    if ndims != 2 && ndims != 3 {
        return Err(Error::InvalidDims(vec![ndims as usize]));
    }
    let mut dims = Vec::with_capacity(ndims as usize);
    for _ in 0..ndims {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    let n: usize = dims.iter().product();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * 4 {
        return Err(Error::PayloadSizeMismatch {
            expected: n * 4,
            got: payload.len(),
        });
    }
    match dtype {
        DTYPE_LABELS => {
            let labels = payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Volume::Labels(LabelVolume::new(dims, labels)?))
        }
        DTYPE_FIELD => {
            let values = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Volume::Field(FieldVolume::new(dims, values)?))
        }
        other => Err(Error::BadDtype(other)),
    }
}

/// Reads a volume that must contain labels.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    match read_volume(path)? {
        Volume::Labels(l) => Ok(l),
        Volume::Field(_) => Err(Error::WrongVolumeKind {
            expected: "label",
            got: "field",
        }),
    }
}

/// Reads a volume that must contain a scalar field.
pub fn read_field(path: impl AsRef<Path>) -> Result<FieldVolume> {
    match read_volume(path)? {
        Volume::Field(f) => Ok(f),
        Volume::Labels(_) => Err(Error::WrongVolumeKind {
            expected: "field",
            got: "label",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    #[test]
    fn label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.segv");
        let v = LabelVolume::new(vec![4, 4], (1..=16).collect()).unwrap();
        write_labels(&path, &v).unwrap();
        assert_eq!(read_labels(&path).unwrap(), v);
    }

    #[test]
    fn field_round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.segv");
        let mut rng = crate::rng::Xoshiro256StarStar::seed_from_u64(5);
        // Arbitrary finite bit patterns, including subnormals; all must
        // survive unchanged.
        let values: Vec<f32> = (0..24)
            .map(|_| f32::from_bits(rng.next_u32() % 0x7f80_0000))
            .collect();
        let v = FieldVolume::new(vec![2, 3, 4], values.clone()).unwrap();
        write_field(&path, &v).unwrap();
        let back = read_field(&path).unwrap();
        for (a, b) in back.values().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.segv");
        std::fs::write(&path, b"XXXX rest of a file").unwrap();
        assert!(matches!(read_volume(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.segv");
        let v = LabelVolume::new(vec![4, 4], vec![1; 16]).unwrap();
        write_labels(&path, &v).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::PayloadSizeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_version_and_dtype() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.segv");
        let v = LabelVolume::new(vec![2, 2], vec![1; 4]).unwrap();
        write_labels(&path, &v).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // version
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::BadVersion(9))));
        bytes[4] = FORMAT_VERSION;
        bytes[5] = 7; // dtype
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::BadDtype(7))));
    }

    #[test]
    fn kind_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.segv");
        let v = FieldVolume::new(vec![2, 2], vec![0.0; 4]).unwrap();
        write_field(&path, &v).unwrap();
        assert!(matches!(
            read_labels(&path),
            Err(Error::WrongVolumeKind { .. })
        ));
    }
}
