//! Segmentation error measures: split variation of information and split
//! Rand error, both computed from a joint region-overlap contingency table.
//!
//! Under- and over-segmentation are reported separately because false merges
//! are costlier to proofread than false splits.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::volume::{check_same_dims, LabelVolume};
use crate::Result;

/// Joint voxel-overlap counts between a ground-truth labeling and a
/// segmentation.
#[derive(Debug, Clone, Default)]
pub struct ContingencyTable {
    /// (gt id, seg id) -> |g_i ∩ r_j|, nonzero entries only.
    counts: BTreeMap<(u32, u32), u64>,
    gt_sums: BTreeMap<u32, u64>,
    seg_sums: BTreeMap<u32, u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn counts(&self) -> &BTreeMap<(u32, u32), u64> {
        &self.counts
    }

    pub fn gt_sums(&self) -> &BTreeMap<u32, u64> {
        &self.gt_sums
    }

    pub fn seg_sums(&self) -> &BTreeMap<u32, u64> {
        &self.seg_sums
    }

    /// Total voxel count Z.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Table with ground truth and segmentation swapped.
    pub fn transposed(&self) -> Self {
        Self {
            counts: self
                .counts
                .iter()
                .map(|(&(g, r), &c)| ((r, g), c))
                .collect(),
            gt_sums: self.seg_sums.clone(),
            seg_sums: self.gt_sums.clone(),
            total: self.total,
        }
    }
}

/// Builds the contingency table of `seg` against `gt`. With `exclude_zero`
/// set, voxels labeled 0 in either volume are left out of the counts.
pub fn contingency(seg: &LabelVolume, gt: &LabelVolume, exclude_zero: bool) -> Result<ContingencyTable> {
    check_same_dims(seg.dims(), gt.dims())?;
    let mut t = ContingencyTable::default();
    for (&r, &g) in seg.labels().iter().zip(gt.labels()) {
        if exclude_zero && (r == 0 || g == 0) {
            continue;
        }
        *t.counts.entry((g, r)).or_insert(0) += 1;
        *t.gt_sums.entry(g).or_insert(0) += 1;
        *t.seg_sums.entry(r).or_insert(0) += 1;
        t.total += 1;
    }
    Ok(t)
}

/// Split variation of information, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitVi {
    /// Under-segmentation term: conditional entropy of the ground truth
    /// partition within each segment.
    pub under: f64,
    /// Over-segmentation term: conditional entropy of the segmentation
    /// within each ground-truth region.
    pub over: f64,
}

/// Computes the split-VI terms from a contingency table. The convention:
/// `over` charges fragmentation of ground-truth regions,
/// `-Σ (|g∩r|/Z) log2(|g∩r|/|g|)`, and `under` charges false merges,
/// `-Σ (|g∩r|/Z) log2(|g∩r|/|r|)`. `0·log 0` is taken as 0 (zero entries
/// never appear in the sparse table).
pub fn split_vi(t: &ContingencyTable) -> Result<SplitVi> {
    if t.total == 0 {
        return Err(Error::EmptyTable);
    }
    let z = t.total as f64;
    let mut over = 0.0;
    let mut under = 0.0;
    for (&(g, r), &c) in &t.counts {
        let c = c as f64;
        over -= c / z * (c / t.gt_sums[&g] as f64).log2();
        under -= c / z * (c / t.seg_sums[&r] as f64).log2();
    }
    // Clamp the -0.0 that exact agreement produces.
    Ok(SplitVi {
        under: under.max(0.0),
        over: over.max(0.0),
    })
}

/// Split Rand error as fractions of all unordered voxel pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRand {
    /// Fraction of pairs in the same segment but different ground-truth
    /// regions (false merges).
    pub under: f64,
    /// Fraction of pairs in the same ground-truth region but different
    /// segments (false splits).
    pub over: f64,
}

impl SplitRand {
    /// Display values as percentages.
    pub fn percent(&self) -> (f64, f64) {
        (self.under * 100.0, self.over * 100.0)
    }

    /// Display values as percentages in units of 1e-5, the scale used for
    /// plotting sweep curves.
    pub fn percent_1e5(&self) -> (f64, f64) {
        (self.under * 100.0 * 1e5, self.over * 100.0 * 1e5)
    }
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * (n - 1) / 2
}

/// Computes split Rand error in closed form from the table: pair counts are
/// sums of C(n, 2) over entries, rows and columns, never pair enumeration.
pub fn split_re(t: &ContingencyTable) -> Result<SplitRand> {
    if t.total < 2 {
        return Err(Error::TooFewVoxels(t.total));
    }
    let same_both: u128 = t.counts.values().map(|&c| pairs(c)).sum();
    let same_gt: u128 = t.gt_sums.values().map(|&c| pairs(c)).sum();
    let same_seg: u128 = t.seg_sums.values().map(|&c| pairs(c)).sum();
    let total_pairs = pairs(t.total) as f64;
    Ok(SplitRand {
        under: (same_seg - same_both) as f64 / total_pairs,
        over: (same_gt - same_both) as f64 / total_pairs,
    })
}
