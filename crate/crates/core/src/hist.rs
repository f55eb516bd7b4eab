//! Constant-time-mergeable statistics over probability values.
//!
//! A [`MomentHistogram`] summarizes a multiset of values in [0, 1] by count,
//! sum, sum of squares and 25 fixed bins. Merging two histograms is a
//! fieldwise sum, so region and boundary statistics stay current in O(1)
//! when regions merge.
//!
//! Sums are kept as integer accumulators over a fixed-point grid of
//! 2^20 steps. Floating-point addition is not associative, and graph merges
//! combine summaries in arbitrary order; integer accumulators make
//! `merge(merge(a, b), c) == merge(a, merge(b, c))` hold exactly, and make a
//! mutated graph bit-identical to one rebuilt from scratch. The grid
//! resolution (~1e-6) is far below anything a probability map carries.

use crate::error::Error;
use crate::Result;

/// Number of fixed bins over [0, 1].
pub const HIST_BINS: usize = 25;

/// Fixed-point quantization: values are snapped to multiples of 2^-20.
pub const QUANT_STEPS: u64 = 1 << 20;

const QUANT_SCALE: f64 = QUANT_STEPS as f64;

/// Snaps `v` in [0, 1] to the accumulation grid.
pub fn quantize(v: f64) -> f64 {
    (v * QUANT_SCALE).round() / QUANT_SCALE
}

/// Mergeable summary of values in [0, 1]: count, fixed-point sum and sum of
/// squares, and 25 equal-width bins (last bin closed).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MomentHistogram {
    count: u64,
    sum_q: u64,
    sum_sq_q: u128,
    bins: [u64; HIST_BINS],
}

impl MomentHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one value. Bin `b` covers [b/25, (b+1)/25); the last bin is
    /// closed so 1.0 lands in bin 24.
    pub fn accumulate(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::ValueOutOfRange(v));
        }
        let k = (v * QUANT_SCALE).round() as u64;
        self.count += 1;
        self.sum_q += k;
        self.sum_sq_q += (k as u128) * (k as u128);
        let bin = ((k * HIST_BINS as u64) >> 20).min(HIST_BINS as u64 - 1);
        self.bins[bin as usize] += 1;
        Ok(())
    }

    /// Fieldwise sum of `other` into `self`; O(HIST_BINS) regardless of the
    /// number of samples either side holds.
    pub fn merge_from(&mut self, other: &Self) {
        self.count += other.count;
        self.sum_q += other.sum_q;
        self.sum_sq_q += other.sum_sq_q;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// Fieldwise sum returning a new histogram.
    pub fn merged(&self, other: &Self) -> Self {
        let mut h = self.clone();
        h.merge_from(other);
        h
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Sum of the accumulated values (exact on the quantization grid).
    pub fn sum(&self) -> f64 {
        self.sum_q as f64 / QUANT_SCALE
    }

    /// Sum of squared values.
    pub fn sum_sq(&self) -> f64 {
        self.sum_sq_q as f64 / (QUANT_SCALE * QUANT_SCALE)
    }

    pub fn bins(&self) -> &[u64; HIST_BINS] {
        &self.bins
    }

    pub fn mean(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(self.sum() / self.count as f64)
    }

    /// Population variance, computed from the integer moments so it is never
    /// negative.
    pub fn variance(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.count as u128;
        // n * sum_sq - sum^2 >= 0 by Cauchy-Schwarz, exactly, in integers.
        let num = n * self.sum_sq_q - (self.sum_q as u128) * (self.sum_q as u128);
        let denom = QUANT_SCALE * QUANT_SCALE * (self.count as f64) * (self.count as f64);
        Ok(num as f64 / denom)
    }

    pub fn std_dev(&self) -> Result<f64> {
        Ok(self.variance()?.sqrt())
    }

    /// Quartile estimate from the bins: linear interpolation of the empirical
    /// CDF inside the containing bin. `q` is one of 25, 50, 75, 100; 100
    /// returns the upper edge of the highest occupied bin. Estimates are
    /// within one bin width (0.04) of the exact order statistic.
    pub fn quartile(&self, q: u8) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyHistogram);
        }
        if !matches!(q, 25 | 50 | 75 | 100) {
            return Err(Error::InvalidQuartile(q));
        }
        if q == 100 {
            let top = self
                .bins
                .iter()
                .rposition(|&c| c > 0)
                .expect("count > 0 implies an occupied bin");
            return Ok((top as f64 + 1.0) / HIST_BINS as f64);
        }
        let target = self.count as f64 * q as f64 / 100.0;
        let mut cum = 0u64;
        for (b, &c) in self.bins.iter().enumerate() {
            cum += c;
            if cum as f64 >= target && c > 0 {
                let before = (cum - c) as f64;
                let frac = (target - before) / c as f64;
                return Ok((b as f64 + frac) / HIST_BINS as f64);
            }
        }
        // Unreachable: target <= count and cum reaches count.
        Ok(1.0)
    }

    /// The six summary statistics fed to the feature vector, in order:
    /// mean, standard deviation, q25, q50, q75, q100.
    pub fn stats(&self) -> Result<[f64; 6]> {
        Ok([
            self.mean()?,
            self.std_dev()?,
            self.quartile(25)?,
            self.quartile(50)?,
            self.quartile(75)?,
            self.quartile(100)?,
        ])
    }
}
