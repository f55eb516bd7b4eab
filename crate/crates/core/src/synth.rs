//! Deterministic synthetic volume generator.
//!
//! Produces a Voronoi cell partition as ground truth, plants elliptical
//! mitochondria blobs strictly inside cells, and renders the four probability
//! channels a multiclass pixel detector would emit: boundary, cytoplasm,
//! mitochondria and mitochondria boundary. Like a real membrane detector, the
//! boundary channel also responds on mitochondria rims — that ambiguity is
//! what the two-phase pipeline exists to resolve.
//!
//! All randomness comes from one seeded xoshiro256\*\* stream, so output is
//! byte-identical across runs and platforms for the same parameters.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hist;
use crate::rng::Xoshiro256StarStar;
use crate::volume::{
    face_neighbors, for_each_face_pair, strides, validate_dims, FieldVolume, LabelVolume,
    ProbabilityStack, PIPELINE_CHANNELS,
};
use crate::Result;

/// Generator parameters; accepted as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub dims: Vec<usize>,
    /// Number of Voronoi sites (cells).
    pub n_cells: usize,
    /// Inclusive range of mitochondria blobs per cell.
    pub mito_per_cell: (usize, usize),
    /// Inclusive range of blob semi-axes, in voxels.
    pub mito_radius: (f64, f64),
    pub boundary_blur_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            dims: vec![128, 128],
            n_cells: 12,
            mito_per_cell: (1, 3),
            mito_radius: (2.5, 5.0),
            boundary_blur_sigma: 1.0,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.dims)?;
        let n: usize = self.dims.iter().product();
        if self.n_cells == 0 || self.n_cells > n {
            return Err(Error::InvalidSynthParams(format!(
                "n_cells {} out of range for {} voxels",
                self.n_cells, n
            )));
        }
        if self.mito_per_cell.0 > self.mito_per_cell.1 {
            return Err(Error::InvalidSynthParams(
                "mito_per_cell range is reversed".into(),
            ));
        }
        if !(self.mito_radius.0 > 0.0 && self.mito_radius.0 <= self.mito_radius.1) {
            return Err(Error::InvalidSynthParams("bad mito_radius range".into()));
        }
        if self.boundary_blur_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::InvalidSynthParams("negative sigma".into()));
        }
        Ok(())
    }
}

/// Everything the generator knows about the instance it planted.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Ground-truth cell partition.
    pub cells: LabelVolume,
    /// Planted mitochondria: one label per blob, 0 elsewhere. Nonzero voxels
    /// form the mitochondria mask.
    pub mito_blobs: LabelVolume,
    /// The four probability channels.
    pub channels: ProbabilityStack,
    /// Blob id -> enclosing cell label.
    pub blob_cells: BTreeMap<u32, u32>,
}

/// Smooth multiplicative field in [lo, 1]: uniform randoms on a coarse
/// lattice, multilinearly interpolated. Scales the membrane indicator so
/// boundaries have weak and strong stretches, the way a real pixel detector's
/// response varies along a membrane.
fn value_noise_field(
    dims: &[usize],
    rng: &mut Xoshiro256StarStar,
    spacing: usize,
    lo: f64,
) -> Vec<f64> {
    let lattice_dims: Vec<usize> = dims.iter().map(|&d| d.div_ceil(spacing) + 1).collect();
    let lattice_n: usize = lattice_dims.iter().product();
    let lattice: Vec<f64> = (0..lattice_n)
        .map(|_| rng.random_range(lo..=1.0))
        .collect();
    let lattice_st = strides(&lattice_dims);
    let st = strides(dims);
    let n: usize = dims.iter().product();
    let mut out = vec![0.0; n];
    for (i, v) in out.iter_mut().enumerate() {
        // Cell coordinates and in-cell fractions per axis.
        let mut base = Vec::with_capacity(dims.len());
        let mut frac = Vec::with_capacity(dims.len());
        for ((&extent, &stride), &ld) in dims.iter().zip(&st).zip(&lattice_dims) {
            let c = (i / stride) % extent;
            let cell = (c / spacing).min(ld - 2);
            base.push(cell);
            frac.push(c as f64 / spacing as f64 - cell as f64);
        }
        // Multilinear interpolation over the 2^rank lattice corners.
        let corners = 1usize << dims.len();
        let mut acc = 0.0;
        for corner in 0..corners {
            let mut w = 1.0;
            let mut idx = 0;
            for axis in 0..dims.len() {
                let bit = (corner >> axis) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                idx += (base[axis] + bit) * lattice_st[axis];
            }
            acc += w * lattice[idx];
        }
        *v = acc;
    }
    out
}

/// Separable Gaussian blur with a truncated (3 sigma), renormalized kernel
/// and clamp-to-edge borders. A no-op for sigma = 0.
fn gaussian_blur(dims: &[usize], data: &mut Vec<f64>, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for d in -radius..=radius {
        kernel.push((-(d as f64) * (d as f64) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= norm;
    }

    let st = strides(dims);
    let n = data.len();
    let mut out = vec![0.0; n];
    for (&extent, &stride) in dims.iter().zip(&st) {
        for i in 0..n {
            let coord = (i / stride) % extent;
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                let c = (coord as isize + d).clamp(0, extent as isize - 1);
                let j = (i as isize + (c - coord as isize) * stride as isize) as usize;
                acc += kernel[ki] * data[j];
            }
            out[i] = acc;
        }
        std::mem::swap(data, &mut out);
    }
}

fn voxel_coords(dims: &[usize], st: &[usize], i: usize) -> Vec<usize> {
    dims.iter()
        .zip(st)
        .map(|(&extent, &stride)| (i / stride) % extent)
        .collect()
}

/// Attempts to stamp one axis-aligned elliptical blob centered at `center`
/// with the given semi-axes. Succeeds only if every member voxel lies in
/// `cell` and is not already part of another blob.
fn try_stamp_blob(
    dims: &[usize],
    st: &[usize],
    cells: &LabelVolume,
    blobs: &mut LabelVolume,
    center: usize,
    semi_axes: &[f64],
    cell: u32,
    blob_id: u32,
) -> bool {
    let c = voxel_coords(dims, st, center);
    let mut member_voxels = Vec::new();
    let lo_hi: Vec<(usize, usize)> = dims
        .iter()
        .zip(&c)
        .zip(semi_axes)
        .map(|((&extent, &cc), &a)| {
            let r = a.ceil() as usize;
            (cc.saturating_sub(r), (cc + r).min(extent - 1))
        })
        .collect();

    let mut cursor: Vec<usize> = lo_hi.iter().map(|&(lo, _)| lo).collect();
    'scan: loop {
        let mut dist = 0.0;
        for ((&x, &cc), &a) in cursor.iter().zip(&c).zip(semi_axes) {
            let d = x as f64 - cc as f64;
            dist += (d / a) * (d / a);
        }
        if dist <= 1.0 {
            let idx: usize = cursor.iter().zip(st).map(|(&x, &s)| x * s).sum();
            if cells.get(idx) != cell || blobs.get(idx) != 0 {
                return false;
            }
            member_voxels.push(idx);
        }
        // Advance the bounding-box cursor, last axis fastest.
        for axis in (0..dims.len()).rev() {
            if cursor[axis] < lo_hi[axis].1 {
                cursor[axis] += 1;
                continue 'scan;
            }
            cursor[axis] = lo_hi[axis].0;
        }
        break;
    }
    if member_voxels.is_empty() {
        return false;
    }
    for idx in member_voxels {
        blobs.labels_mut()[idx] = blob_id;
    }
    true
}

/// Generates a synthetic instance. Deterministic given `params.seed`.
pub fn synth_generate(params: &SynthParams) -> Result<SynthOutput> {
    params.validate()?;
    let dims = params.dims.clone();
    let st = strides(&dims);
    let n: usize = dims.iter().product();
    let mut rng = Xoshiro256StarStar::seed_from_u64(params.seed);

    // Distinct Voronoi sites.
    let mut sites: Vec<Vec<usize>> = Vec::with_capacity(params.n_cells);
    let mut used = std::collections::HashSet::new();
    while sites.len() < params.n_cells {
        let idx = rng.random_range(0..n);
        if used.insert(idx) {
            sites.push(voxel_coords(&dims, &st, idx));
        }
    }

    // Nearest-site partition, ties to the lower site index.
    let mut cell_labels = vec![0u32; n];
    for (i, label) in cell_labels.iter_mut().enumerate() {
        let c = voxel_coords(&dims, &st, i);
        let mut best = 0usize;
        let mut best_d = u64::MAX;
        for (s, site) in sites.iter().enumerate() {
            let d: u64 = site
                .iter()
                .zip(&c)
                .map(|(&a, &b)| {
                    let d = a as i64 - b as i64;
                    (d * d) as u64
                })
                .sum();
            if d < best_d {
                best_d = d;
                best = s;
            }
        }
        *label = best as u32 + 1;
    }
    let cells = LabelVolume::new(dims.clone(), cell_labels)?;

    // Plant elliptical mitochondria blobs, one pass per cell in label order.
    let mut cell_voxels: Vec<Vec<usize>> = vec![Vec::new(); params.n_cells];
    for (i, &l) in cells.labels().iter().enumerate() {
        cell_voxels[(l - 1) as usize].push(i);
    }
    let mut blobs = LabelVolume::zeros(dims.clone())?;
    let mut blob_cells = BTreeMap::new();
    let mut next_blob = 0u32;
    for (cell_idx, voxels) in cell_voxels.iter().enumerate() {
        let cell = cell_idx as u32 + 1;
        let count = rng.random_range(params.mito_per_cell.0..=params.mito_per_cell.1);
        for _ in 0..count {
            let mut placed = false;
            let mut shrink = 1.0;
            for attempt in 0..12 {
                if attempt >= 4 {
                    shrink *= 0.7;
                }
                let center = voxels[rng.random_range(0..voxels.len())];
                let semi_axes: Vec<f64> = dims
                    .iter()
                    .map(|_| {
                        (rng.random_range(params.mito_radius.0..=params.mito_radius.1) * shrink)
                            .max(0.5)
                    })
                    .collect();
                if try_stamp_blob(
                    &dims,
                    &st,
                    &cells,
                    &mut blobs,
                    center,
                    &semi_axes,
                    cell,
                    next_blob + 1,
                ) {
                    placed = true;
                    break;
                }
            }
            if placed {
                next_blob += 1;
                blob_cells.insert(next_blob, cell);
            }
            // A blob that cannot fit anywhere is dropped rather than allowed
            // to cross a cell boundary.
        }
    }

    // Indicator fields.
    let mut cell_boundary = vec![0.0f64; n];
    for_each_face_pair(&dims, |a, b| {
        if cells.get(a) != cells.get(b) {
            cell_boundary[a] = 1.0;
            cell_boundary[b] = 1.0;
        }
    });
    let mut mito_interior = vec![0.0f64; n];
    let mut mito_rim = vec![0.0f64; n];
    let mut nbrs = Vec::new();
    for i in 0..n {
        if blobs.get(i) == 0 {
            continue;
        }
        mito_interior[i] = 1.0;
        face_neighbors(&dims, &st, i, &mut nbrs);
        if nbrs.iter().any(|&k| blobs.get(k) == 0) {
            mito_rim[i] = 1.0;
        }
    }
    // A membrane detector cannot tell mitochondria rims from cell membrane;
    // the boundary channel fires on both. Membrane response varies smoothly
    // along cell boundaries, down to outright gaps; rims respond at full
    // strength.
    let strength = value_noise_field(&dims, &mut rng, 8, 0.0);
    let mut boundary = cell_boundary;
    for ((b, &r), &s) in boundary.iter_mut().zip(&mito_rim).zip(&strength) {
        *b = (*b * s).max(r);
    }

    gaussian_blur(&dims, &mut boundary, params.boundary_blur_sigma);
    gaussian_blur(&dims, &mut mito_interior, params.boundary_blur_sigma);
    gaussian_blur(&dims, &mut mito_rim, params.boundary_blur_sigma);

    // Noise on the boundary and mitochondria channels, then clip, quantize
    // and derive cytoplasm from the final values.
    let mut add_noise = |data: &mut Vec<f64>| {
        for v in data.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = hist::quantize((*v + params.noise_sigma * z).clamp(0.0, 1.0));
        }
    };
    add_noise(&mut boundary);
    add_noise(&mut mito_interior);
    for v in mito_rim.iter_mut() {
        *v = hist::quantize(v.clamp(0.0, 1.0));
    }
    let cytoplasm: Vec<f64> = boundary
        .iter()
        .zip(&mito_interior)
        .map(|(&b, &m)| hist::quantize((1.0 - (b + m)).clamp(0.0, 1.0)))
        .collect();

    let mut channels = ProbabilityStack::new(dims.clone())?;
    let fields = [
        (PIPELINE_CHANNELS[0], &boundary),
        (PIPELINE_CHANNELS[1], &cytoplasm),
        (PIPELINE_CHANNELS[2], &mito_interior),
        (PIPELINE_CHANNELS[3], &mito_rim),
    ];
    for (name, data) in fields {
        let values: Vec<f32> = data.iter().map(|&v| v as f32).collect();
        channels.push_channel(name, FieldVolume::new(dims.clone(), values)?)?;
    }

    Ok(SynthOutput {
        cells,
        mito_blobs: blobs,
        channels,
        blob_cells,
    })
}
