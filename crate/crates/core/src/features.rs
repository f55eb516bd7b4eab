//! Per-edge feature vectors for the boundary predictor.
//!
//! For every probability channel an edge contributes four blocks of six
//! statistics (mean, standard deviation, q25, q50, q75, q100): the boundary
//! samples, the larger region, the smaller region, and the elementwise
//! absolute difference of the two region blocks. Ordering regions by voxel
//! count (ties broken toward the lower id) makes the encoding invariant to
//! endpoint permutation.

use crate::error::Error;
use crate::rag::{EdgeKey, RegionGraph};
use crate::Result;

/// Statistics per block: mean, std, q25, q50, q75, q100.
pub const STATS_PER_BLOCK: usize = 6;

/// Blocks per channel: edge, larger region, smaller region, |difference|.
pub const BLOCKS_PER_CHANNEL: usize = 4;

/// Feature vector length for a graph with `n_channels` channels.
pub fn feature_len(n_channels: usize) -> usize {
    n_channels * BLOCKS_PER_CHANNEL * STATS_PER_BLOCK
}

/// Computes the feature vector of a live edge.
pub fn edge_features(g: &RegionGraph, e: EdgeKey) -> Result<Vec<f64>> {
    let edge = g.edge(e).ok_or(Error::MissingEdge(e.lo(), e.hi()))?;
    let a = g.node(e.lo()).ok_or(Error::UnknownRegion(e.lo()))?;
    let b = g.node(e.hi()).ok_or(Error::UnknownRegion(e.hi()))?;
    // Larger region first; ties go to the lower id, which is `a`.
    let (larger, smaller) = if b.voxel_count() > a.voxel_count() {
        (b, a)
    } else {
        (a, b)
    };

    let n_channels = g.channel_names().len();
    let mut out = Vec::with_capacity(feature_len(n_channels));
    for c in 0..n_channels {
        let edge_stats = edge.channel_hists()[c].stats()?;
        let large_stats = larger.channel_hists()[c].stats()?;
        let small_stats = smaller.channel_hists()[c].stats()?;
        out.extend_from_slice(&edge_stats);
        out.extend_from_slice(&large_stats);
        out.extend_from_slice(&small_stats);
        for i in 0..STATS_PER_BLOCK {
            out.push((large_stats[i] - small_stats[i]).abs());
        }
    }
    Ok(out)
}
