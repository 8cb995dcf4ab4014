//! Boolean map representation.
//!
//! A feature vector `phi` in `[0, 1]^d` is thresholded at the fixed levels
//! `delta, 2*delta, ..., 1 - delta` (with `delta = 1/c`), giving `c - 1`
//! nested binary maps. The maps are stacked and scaled by `1/sqrt(c)` so that
//! their inner product equals the intersection kernel of the quantised
//! features; dividing by the l2 norm yields the explicit map of the
//! normalised kernel.

use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq)]
pub struct BmrVector {
    stacked: Vec<f64>,
    c: usize,
    normalized: bool,
}

impl BmrVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.stacked
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.stacked
    }

    pub fn len(&self) -> usize {
        self.stacked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacked.is_empty()
    }

    /// Divisor `c`; the step is `1/c` and there are `c - 1` maps.
    pub fn divisor(&self) -> usize {
        self.c
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.c as f64
    }

    pub fn levels(&self) -> usize {
        self.c - 1
    }

    /// Length `d` of the encoded feature vector.
    pub fn feature_len(&self) -> usize {
        self.stacked.len() / self.levels()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The `j`-th Boolean map (0-based) as a slice of the stacked vector.
    pub fn map(&self, j: usize) -> &[f64] {
        let d = self.feature_len();
        &self.stacked[j * d..(j + 1) * d]
    }

    pub fn dot(&self, other: &BmrVector) -> Result<f64> {
        dot(&self.stacked, &other.stacked)
    }
}

/// Thresholds `i/c` for `i = 1..c`.
pub fn thresholds(c: usize) -> impl Iterator<Item = f64> {
    (1..c).map(move |i| i as f64 / c as f64)
}

pub fn encode(phi: &FeatureVector, c: usize) -> Result<BmrVector> {
    encode_slice(phi.as_slice(), c)
}

pub fn encode_slice(phi: &[f64], c: usize) -> Result<BmrVector> {
    if c < 2 {
        return Err(Error::invalid(format!("BMR divisor must be at least 2, got {c}")));
    }
    if let Some(bad) = phi.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "BMR input must lie in [0, 1], found {bad}"
        )));
    }
    let on = 1.0 / (c as f64).sqrt();
    let mut stacked = Vec::with_capacity((c - 1) * phi.len());
    for theta in thresholds(c) {
        stacked.extend(phi.iter().map(|&v| if v >= theta { on } else { 0.0 }));
    }
    Ok(BmrVector {
        stacked,
        c,
        normalized: false,
    })
}

/// Projects onto the unit sphere; the zero vector stays zero.
pub fn normalize(b: BmrVector) -> BmrVector {
    let mut stacked = b.stacked;
    let norm = stacked.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        stacked.iter_mut().for_each(|v| *v /= norm);
    }
    BmrVector {
        stacked,
        c: b.c,
        normalized: true,
    }
}

/// Quantised features recovered from the maps: `count_k / c`.
pub fn reconstruct(b: &BmrVector) -> Result<Vec<f64>> {
    if b.normalized {
        return Err(Error::invalid("reconstruction needs the unnormalised maps"));
    }
    let d = b.feature_len();
    let on = 1.0 / (b.c as f64).sqrt();
    let mut counts = vec![0usize; d];
    for j in 0..b.levels() {
        for (count, &v) in counts.iter_mut().zip(b.map(j)) {
            if v >= 0.5 * on {
                *count += 1;
            }
        }
    }
    Ok(counts.into_iter().map(|n| n as f64 / b.c as f64).collect())
}

/// Exact intersection kernel `sum_k min(x_k, y_k)`.
pub fn intersection_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "kernel inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a.min(*b)).sum())
}

pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(dot_unchecked(x, y))
}

/// Inner product with eight independent accumulators; `x` and `y` must have
/// equal length.
pub(crate) fn dot_unchecked(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0; 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
