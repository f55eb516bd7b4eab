//! Per-plane color overlays: every region id gets a seed-deterministic
//! random color, written as binary PPM (P6), one image per z-plane.

use std::io::Write;
use std::path::Path;

use aggloseg::LabelVolume;

use crate::errors::{CliError, CliResult};

/// Mixes a label and seed into a stable RGB color.
fn label_color(seed: u64, label: u32) -> [u8; 3] {
    let mut z = seed ^ (label as u64).wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    // Keep channels away from pure black so regions stay visible.
    [
        64 + (z & 0xBF) as u8,
        64 + ((z >> 8) & 0xBF) as u8,
        64 + ((z >> 16) & 0xBF) as u8,
    ]
}

/// Writes `plane_####.ppm` files into `dir`; returns the file count.
pub fn write_overlays(labels: &LabelVolume, dir: &Path, seed: u64) -> CliResult<usize> {
    let dims = labels.dims();
    let (planes, height, width) = match dims {
        [h, w] => (1, *h, *w),
        [z, h, w] => (*z, *h, *w),
        _ => unreachable!("volumes are 2D or 3D"),
    };
    for plane in 0..planes {
        let path = dir.join(format!("plane_{plane:04}.ppm"));
        let file = std::fs::File::create(&path).map_err(|e| CliError::io_at(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let header = format!("P6\n{width} {height}\n255\n");
        let offset = plane * height * width;
        (|| -> std::io::Result<()> {
            w.write_all(header.as_bytes())?;
            for i in 0..height * width {
                w.write_all(&label_color(seed, labels.get(offset + i)))?;
            }
            w.flush()
        })()
        .map_err(|e| CliError::io_at(&path, e))?;
    }
    Ok(planes)
}
