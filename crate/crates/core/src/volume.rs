//! Dense 2D/3D grids: label volumes, scalar fields and named probability
//! stacks. All payloads are row-major with the last axis fastest.

use crate::error::Error;
use crate::Result;

/// Standard channel names used by the segmentation pipeline, in the order the
/// feature extractor expects them.
pub const PIPELINE_CHANNELS: [&str; 4] = ["boundary", "cytoplasm", "mitochondria", "mito-boundary"];

pub(crate) fn validate_dims(dims: &[usize]) -> Result<()> {
    if (dims.len() == 2 || dims.len() == 3) && dims.iter().all(|&d| d > 0) {
        Ok(())
    } else {
        Err(Error::InvalidDims(dims.to_vec()))
    }
}

pub(crate) fn check_same_dims(a: &[usize], b: &[usize]) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimsMismatch(a.to_vec(), b.to_vec()))
    }
}

/// Row-major strides for `dims` (last axis has stride 1).
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Visits every face-adjacent voxel pair exactly once as `(lower, upper)`
/// linear indices. Face adjacency is the 4-neighborhood in 2D and the
/// 6-neighborhood in 3D.
pub(crate) fn for_each_face_pair(dims: &[usize], mut f: impl FnMut(usize, usize)) {
    let st = strides(dims);
    let n: usize = dims.iter().product();
    for i in 0..n {
        let mut rem = i;
        for (axis, (&extent, &stride)) in dims.iter().zip(&st).enumerate() {
            let coord = rem / stride;
            rem %= stride;
            let _ = axis;
            if coord + 1 < extent {
                f(i, i + stride);
            }
        }
    }
}

/// Face-adjacent neighbor indices of voxel `i`, in ascending order.
pub(crate) fn face_neighbors(dims: &[usize], st: &[usize], i: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut rem = i;
    // Collect in both directions; sort order follows from axis traversal.
    let mut lower = Vec::with_capacity(3);
    for (&extent, &stride) in dims.iter().zip(st) {
        let coord = rem / stride;
        rem %= stride;
        if coord > 0 {
            lower.push(i - stride);
        }
        if coord + 1 < extent {
            out.push(i + stride);
        }
    }
    out.extend(lower);
    out.sort_unstable();
}

/// Dense integer region labeling over a 2D/3D grid.
///
/// Label 0 is reserved for "unassigned" voxels and must not appear in a
/// completed segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Vec<usize>,
    labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(dims: Vec<usize>, labels: Vec<u32>) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims.iter().product();
        if labels.len() != n {
            return Err(Error::PayloadSizeMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        Ok(Self { dims, labels })
    }

    /// All-zero (unassigned) volume of the given shape.
    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::new(dims, vec![0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn get(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn contains_zero(&self) -> bool {
        self.labels.iter().any(|&l| l == 0)
    }

    /// Distinct labels in ascending order.
    pub fn distinct_labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.labels.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Dense scalar field over a 2D/3D grid (one probability channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVolume {
    dims: Vec<usize>,
    values: Vec<f32>,
}

impl FieldVolume {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::PayloadSizeMismatch {
                expected: n,
                got: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f32 {
        self.values[i]
    }
}

/// A set of named probability channels sharing one grid, all values in [0, 1].
#[derive(Debug, Clone)]
pub struct ProbabilityStack {
    dims: Vec<usize>,
    names: Vec<String>,
    channels: Vec<Vec<f32>>,
}

impl ProbabilityStack {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        validate_dims(&dims)?;
        Ok(Self {
            dims,
            names: Vec::new(),
            channels: Vec::new(),
        })
    }

    pub fn push_channel(&mut self, name: &str, field: FieldVolume) -> Result<()> {
        check_same_dims(&self.dims, field.dims())?;
        if self.names.iter().any(|n| n == name) {
            return Err(Error::DuplicateChannel(name.to_string()));
        }
        for &v in field.values() {
            if !(0.0..=1.0).contains(&(v as f64)) {
                return Err(Error::ValueOutOfRange(v as f64));
            }
        }
        self.names.push(name.to_string());
        self.channels.push(field.values);
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn channel(&self, idx: usize) -> &[f32] {
        &self.channels[idx]
    }

    pub fn channel_by_name(&self, name: &str) -> Result<&[f32]> {
        Ok(self.channel(self.channel_index(name)?))
    }

    /// Extracts one channel as a standalone field.
    pub fn to_field(&self, name: &str) -> Result<FieldVolume> {
        let idx = self.channel_index(name)?;
        FieldVolume::new(self.dims.clone(), self.channels[idx].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        assert_eq!(strides(&[4, 5]), vec![5, 1]);
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
    }

    #[test]
    fn face_pairs_count_2d() {
        // 2x3 grid: 2*(3-1) horizontal + 3*(2-1) vertical = 7 pairs.
        let mut count = 0;
        for_each_face_pair(&[2, 3], |a, b| {
            assert!(a < b);
            count += 1;
        });
        assert_eq!(count, 7);
    }

    #[test]
    fn face_pairs_count_3d() {
        let dims = [3, 4, 5];
        let expected = 2 * 4 * 5 + 3 * 3 * 5 + 3 * 4 * 4;
        let mut count = 0;
        for_each_face_pair(&dims, |_, _| count += 1);
        assert_eq!(count, expected);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(LabelVolume::new(vec![4], vec![0; 4]).is_err());
        assert!(LabelVolume::new(vec![2, 0], vec![]).is_err());
        assert!(LabelVolume::new(vec![2, 2, 2, 2], vec![0; 16]).is_err());
        assert!(LabelVolume::new(vec![2, 2], vec![0; 3]).is_err());
    }

    #[test]
    fn stack_rejects_out_of_range_and_duplicates() {
        let mut stack = ProbabilityStack::new(vec![2, 2]).unwrap();
        let ok = FieldVolume::new(vec![2, 2], vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        stack.push_channel("boundary", ok.clone()).unwrap();
        assert!(matches!(
            stack.push_channel("boundary", ok),
            Err(Error::DuplicateChannel(_))
        ));
        let bad = FieldVolume::new(vec![2, 2], vec![0.0, 1.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            stack.push_channel("other", bad),
            Err(Error::ValueOutOfRange(_))
        ));
    }

    #[test]
    fn neighbors_2d_corner_and_center() {
        let dims = [3, 3];
        let st = strides(&dims);
        let mut out = Vec::new();
        face_neighbors(&dims, &st, 0, &mut out);
        assert_eq!(out, vec![1, 3]);
        face_neighbors(&dims, &st, 4, &mut out);
        assert_eq!(out, vec![1, 3, 5, 7]);
    }
}
