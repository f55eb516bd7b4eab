//! Marker-based watershed over-segmentation.
//!
//! Seeds are the face-connected components of voxels whose boundary
//! probability falls below a threshold; every remaining voxel is assigned by
//! priority flooding in ascending probability. There are no watershed-line
//! voxels: the output is a total partition, which the region graph requires.
//!
//! The flood order is fully deterministic: entries are popped by ascending
//! (probability, linear voxel index, claiming seed label).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Error;
use crate::volume::{face_neighbors, strides, FieldVolume, LabelVolume};
use crate::Result;

#[derive(PartialEq)]
struct FloodEntry {
    prob: f32,
    index: usize,
    label: u32,
}

impl Eq for FloodEntry {}

impl Ord for FloodEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.prob
            .total_cmp(&other.prob)
            .then(self.index.cmp(&other.index))
            .then(self.label.cmp(&other.label))
    }
}

impl PartialOrd for FloodEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Labels the face-connected components of `{v : prob(v) < theta_seed}` with
/// 1, 2, ... in scan order of their first voxel; other voxels stay 0.
fn seed_components(field: &FieldVolume, theta_seed: f64, labels: &mut [u32]) -> u32 {
    let dims = field.dims();
    let st = strides(dims);
    let mut next_label = 0u32;
    let mut stack = Vec::new();
    let mut nbrs = Vec::new();
    for i in 0..field.len() {
        if labels[i] != 0 || (field.get(i) as f64) >= theta_seed {
            continue;
        }
        next_label += 1;
        labels[i] = next_label;
        stack.push(i);
        while let Some(j) = stack.pop() {
            face_neighbors(dims, &st, j, &mut nbrs);
            for &k in &nbrs {
                if labels[k] == 0 && (field.get(k) as f64) < theta_seed {
                    labels[k] = next_label;
                    stack.push(k);
                }
            }
        }
    }
    next_label
}

/// Floods `boundary_prob` from seed components `{v : prob(v) < theta_seed}`.
/// Errors if the threshold leaves no seeds.
pub fn watershed(boundary_prob: &FieldVolume, theta_seed: f64) -> Result<LabelVolume> {
    for &v in boundary_prob.values() {
        if !(0.0..=1.0).contains(&(v as f64)) {
            return Err(Error::ValueOutOfRange(v as f64));
        }
    }
    let dims = boundary_prob.dims().to_vec();
    let st = strides(&dims);
    let n = boundary_prob.len();
    let mut labels = vec![0u32; n];
    if seed_components(boundary_prob, theta_seed, &mut labels) == 0 {
        return Err(Error::NoSeeds);
    }

    let mut heap: BinaryHeap<Reverse<FloodEntry>> = BinaryHeap::new();
    let mut nbrs = Vec::new();
    for i in 0..n {
        if labels[i] == 0 {
            continue;
        }
        face_neighbors(&dims, &st, i, &mut nbrs);
        for &k in &nbrs {
            if labels[k] == 0 {
                heap.push(Reverse(FloodEntry {
                    prob: boundary_prob.get(k),
                    index: k,
                    label: labels[i],
                }));
            }
        }
    }
    while let Some(Reverse(entry)) = heap.pop() {
        if labels[entry.index] != 0 {
            continue;
        }
        labels[entry.index] = entry.label;
        face_neighbors(&dims, &st, entry.index, &mut nbrs);
        for &k in &nbrs {
            if labels[k] == 0 {
                heap.push(Reverse(FloodEntry {
                    prob: boundary_prob.get(k),
                    index: k,
                    label: entry.label,
                }));
            }
        }
    }

    LabelVolume::new(dims, labels)
}
