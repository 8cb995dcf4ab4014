//! Appearance features of a canonical patch: a subsampled colour (CIE LAB) or
//! intensity block followed by a 31-channel HOG block, each min-max
//! normalised and then rescaled jointly to `[0, 1]`.
//!
//! The HOG is the Felzenszwalb variant as implemented by Dollár's toolbox
//! (`fhog`): 8x8 cells, 18 contrast-sensitive and 9 contrast-insensitive
//! orientation channels summed over four block normalisations, plus four
//! texture channels. Gradients use centred differences, the colour channel
//! with the largest magnitude wins, orientations are hard-binned and votes are
//! spread bilinearly over neighbouring cells.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{srgb_to_lab, Image};

pub const HOG_CELL: usize = 8;
pub const HOG_ORIENTS: usize = 9;
pub const HOG_CHANNELS: usize = 31;
pub const HOG_CLIP: f64 = 0.2;
const TEXTURE_WEIGHT: f64 = 0.2357;

/// Whether appearance is described by LAB colour or by raw intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    Gray,
    Color,
}

impl ColorMode {
    pub fn color_channels(self) -> usize {
        match self {
            ColorMode::Gray => 1,
            ColorMode::Color => 3,
        }
    }

    /// Feature dimension for a `canonical x canonical` patch.
    pub fn feature_dim(self, canonical: usize) -> usize {
        let n_col = canonical / 2;
        let n_hog = canonical / HOG_CELL;
        self.color_channels() * n_col * n_col + HOG_CHANNELS * n_hog * n_hog
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    data: Vec<f64>,
    mode: ColorMode,
}

impl FeatureVector {
    pub fn new(data: Vec<f64>, mode: ColorMode) -> Self {
        Self { data, mode }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mode(&self) -> ColorMode {
        self.mode
    }
}

/// `cells_y x cells_x x 31` HOG features, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HogTensor {
    pub cells_x: usize,
    pub cells_y: usize,
    data: Vec<f64>,
}

impl HogTensor {
    pub fn get(&self, cx: usize, cy: usize, ch: usize) -> f64 {
        self.data[(ch * self.cells_y + cy) * self.cells_x + cx]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Splits an image into per-channel planes scaled to `[0, 1]`.
fn planes(img: &Image) -> Vec<Vec<f64>> {
    let ch = img.channels();
    (0..ch)
        .map(|c| {
            img.data()
                .iter()
                .skip(c)
                .step_by(ch)
                .map(|&v| f64::from(v) / 255.0)
                .collect()
        })
        .collect()
}

fn check_hog_size(w: usize, h: usize) -> Result<()> {
    if w % HOG_CELL != 0 || h % HOG_CELL != 0 || w < 2 * HOG_CELL || h < 2 * HOG_CELL {
        return Err(Error::invalid(format!(
            "HOG needs a patch whose sides are multiples of {HOG_CELL} and at least {}, got {w}x{h}",
            2 * HOG_CELL
        )));
    }
    Ok(())
}

/// Centred-difference derivative along a line, one-sided at the ends.
#[inline]
fn diff(prev: f64, next: f64, at_edge: bool) -> f64 {
    if at_edge {
        next - prev
    } else {
        0.5 * (next - prev)
    }
}

/// Per-pixel `(gx, gy)` of the channel with maximal gradient magnitude.
fn dominant_gradients(planes: &[Vec<f64>], w: usize, h: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (yp, yn) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let y_edge = y == 0 || y == h - 1;
        for x in 0..w {
            let (xp, xn) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let x_edge = x == 0 || x == w - 1;
            let mut best = (-1.0, 0.0, 0.0);
            for p in planes {
                let gx = diff(p[y * w + xp], p[y * w + xn], x_edge);
                let gy = diff(p[yp * w + x], p[yn * w + x], y_edge);
                let m2 = gx * gx + gy * gy;
                if m2 > best.0 {
                    best = (m2, gx, gy);
                }
            }
            out.push((best.1, best.2));
        }
    }
    out
}

/// Per-pixel gradient magnitude and orientation in `[0, 2pi)`, taking the
/// channel of maximal magnitude.
pub fn gradient_field(planes: &[Vec<f64>], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    dominant_gradients(planes, w, h)
        .into_iter()
        .map(|(gx, gy)| {
            let o = gy.atan2(gx);
            ((gx * gx + gy * gy).sqrt(), if o < 0.0 { o + 2.0 * PI } else { o })
        })
        .unzip()
}

fn bin_directions() -> &'static [(f64, f64); HOG_ORIENTS] {
    static DIRS: OnceLock<[(f64, f64); HOG_ORIENTS]> = OnceLock::new();
    DIRS.get_or_init(|| {
        std::array::from_fn(|k| {
            let a = k as f64 * PI / HOG_ORIENTS as f64;
            (a.cos(), a.sin())
        })
    })
}

/// Nearest of the `2 * HOG_ORIENTS` bin centres `k * pi / HOG_ORIENTS`,
/// found by projection instead of an arctangent.
#[inline]
fn orientation_bin(gx: f64, gy: f64, dirs: &[(f64, f64); HOG_ORIENTS]) -> usize {
    let (mut best, mut bin) = (gx, 0);
    for (k, &(c, s)) in dirs.iter().enumerate() {
        let v = gx * c + gy * s;
        if v > best {
            best = v;
            bin = k;
        }
        if -v > best {
            best = -v;
            bin = k + HOG_ORIENTS;
        }
    }
    bin
}

/// Unnormalised contrast-sensitive histograms, `2 * HOG_ORIENTS` channels,
/// channel-major over the cell grid.
fn cell_histograms(mag: &[f64], bins: &[usize], w: usize, h: usize) -> Vec<f64> {
    let n_bins = 2 * HOG_ORIENTS;
    let (wb, hb) = (w / HOG_CELL, h / HOG_CELL);
    let nb = wb * hb;
    let mut hist = vec![0.0; n_bins * nb];
    let inv_bin = 1.0 / HOG_CELL as f64;
    let norm = inv_bin * inv_bin;

    let cell_coord = |p: usize| {
        let b = (p as f64 + 0.5) * inv_bin - 0.5;
        let b0 = b.floor();
        (b0 as i64, b - b0)
    };

    for y in 0..h {
        let (yb0, yd) = cell_coord(y);
        for x in 0..w {
            let (xb0, xd) = cell_coord(x);
            let i = y * w + x;
            let o = bins[i];
            let m = mag[i] * norm;
            let plane = &mut hist[o * nb..(o + 1) * nb];
            for (dy, wy) in [(0, 1.0 - yd), (1, yd)] {
                let cy = yb0 + dy;
                if cy < 0 || cy >= hb as i64 {
                    continue;
                }
                for (dx, wx) in [(0, 1.0 - xd), (1, xd)] {
                    let cx = xb0 + dx;
                    if cx < 0 || cx >= wb as i64 {
                        continue;
                    }
                    plane[cy as usize * wb + cx as usize] += wx * wy * m;
                }
            }
        }
    }

    // Boundary cells only collect 7/8 of the interior weight; corners are
    // compensated twice, as in the reference implementation.
    let boost = 8.0 / 7.0;
    for plane in hist.chunks_exact_mut(nb) {
        for cy in 0..hb {
            plane[cy * wb] *= boost;
            plane[cy * wb + wb - 1] *= boost;
        }
        for cx in 0..wb {
            plane[cx] *= boost;
            plane[(hb - 1) * wb + cx] *= boost;
        }
    }
    hist
}

fn hog_from_planes(planes: &[Vec<f64>], w: usize, h: usize) -> HogTensor {
    let dirs = bin_directions();
    let (mag, bins): (Vec<f64>, Vec<usize>) = dominant_gradients(planes, w, h)
        .into_iter()
        .map(|(gx, gy)| ((gx * gx + gy * gy).sqrt(), orientation_bin(gx, gy, dirs)))
        .unzip();
    let sensitive = cell_histograms(&mag, &bins, w, h);
    let (wb, hb) = (w / HOG_CELL, h / HOG_CELL);
    let nb = wb * hb;

    let mut insensitive = vec![0.0; HOG_ORIENTS * nb];
    for o in 0..HOG_ORIENTS {
        for k in 0..nb {
            insensitive[o * nb + k] = sensitive[o * nb + k] + sensitive[(o + HOG_ORIENTS) * nb + k];
        }
    }

    // Inverse block norms over 2x2 cells of contrast-insensitive energy.
    let eps = 1e-4 / 4.0 / (HOG_CELL as f64).powi(4);
    let mut energy = vec![0.0; nb];
    for plane in insensitive.chunks_exact(nb) {
        for (e, v) in energy.iter_mut().zip(plane) {
            *e += v * v;
        }
    }
    let (bw, bh) = (wb - 1, hb - 1);
    let mut block_norm = vec![0.0; bw * bh];
    for by in 0..bh {
        for bx in 0..bw {
            let s = energy[by * wb + bx]
                + energy[by * wb + bx + 1]
                + energy[(by + 1) * wb + bx]
                + energy[(by + 1) * wb + bx + 1];
            block_norm[by * bw + bx] = 1.0 / (s + eps).sqrt();
        }
    }
    // The four blocks containing cell (cx, cy), clamped onto the valid range.
    let norms_of = |cx: usize, cy: usize| -> [f64; 4] {
        let at = |bx: i64, by: i64| {
            let bx = bx.clamp(0, bw as i64 - 1) as usize;
            let by = by.clamp(0, bh as i64 - 1) as usize;
            block_norm[by * bw + bx]
        };
        let (x, y) = (cx as i64, cy as i64);
        [at(x, y), at(x, y - 1), at(x - 1, y), at(x - 1, y - 1)]
    };

    let mut out = vec![0.0; HOG_CHANNELS * nb];
    for cy in 0..hb {
        for cx in 0..wb {
            let k = cy * wb + cx;
            let norms = norms_of(cx, cy);
            for o in 0..2 * HOG_ORIENTS {
                let r = sensitive[o * nb + k];
                for (c, n) in norms.iter().enumerate() {
                    let t = (r * n).min(HOG_CLIP);
                    out[o * nb + k] += 0.5 * t;
                    out[(2 * HOG_ORIENTS + HOG_ORIENTS + c) * nb + k] += TEXTURE_WEIGHT * t;
                }
            }
            for o in 0..HOG_ORIENTS {
                let r = insensitive[o * nb + k];
                for n in &norms {
                    out[(2 * HOG_ORIENTS + o) * nb + k] += 0.5 * (r * n).min(HOG_CLIP);
                }
            }
        }
    }
    HogTensor {
        cells_x: wb,
        cells_y: hb,
        data: out,
    }
}

/// 31-channel HOG of a gray or RGB patch.
pub fn compute_hog(patch: &Image) -> Result<HogTensor> {
    check_hog_size(patch.width(), patch.height())?;
    Ok(hog_from_planes(&planes(patch), patch.width(), patch.height()))
}

fn check_square(patch: &Image) -> Result<()> {
    if patch.width() != patch.height() || patch.width() % HOG_CELL != 0 {
        return Err(Error::invalid(format!(
            "feature extraction needs a square patch with side a multiple of {HOG_CELL}, got {}x{}",
            patch.width(),
            patch.height()
        )));
    }
    Ok(())
}

/// 2x2 box average of one channel sampled from `values` (stride `ch`).
fn half_plane(values: &[f64], w: usize, h: usize, ch: usize, c: usize) -> Vec<f64> {
    let (hw, hh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(hw * hh);
    for y in 0..hh {
        for x in 0..hw {
            let at = |xx: usize, yy: usize| values[(yy * w + xx) * ch + c];
            out.push(
                0.25 * (at(2 * x, 2 * y)
                    + at(2 * x + 1, 2 * y)
                    + at(2 * x, 2 * y + 1)
                    + at(2 * x + 1, 2 * y + 1)),
            );
        }
    }
    out
}

/// Half-resolution colour block: planar L, a, b (colour) or intensity (gray).
pub fn compute_color_block(patch: &Image, mode: ColorMode) -> Result<Vec<f64>> {
    check_square(patch)?;
    let (w, h) = (patch.width(), patch.height());
    match mode {
        ColorMode::Gray => Ok(half_plane(&patch.intensity(), w, h, 1, 0)),
        ColorMode::Color => {
            if !patch.is_color() {
                return Err(Error::invalid("colour features need an RGB patch"));
            }
            let raw: Vec<f64> = patch.data().iter().map(|&v| f64::from(v)).collect();
            let rgb: Vec<Vec<f64>> = (0..3).map(|c| half_plane(&raw, w, h, 3, c)).collect();
            let n = rgb[0].len();
            let mut out = vec![0.0; 3 * n];
            for i in 0..n {
                let lab = srgb_to_lab([rgb[0][i], rgb[1][i], rgb[2][i]]);
                for (c, v) in lab.into_iter().enumerate() {
                    out[c * n + i] = v;
                }
            }
            Ok(out)
        }
    }
}

/// Min-max rescale to `[0, 1]` in place; a constant input becomes all zeros.
pub fn rescale_unit(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values.iter_mut() {
        *v = ((*v - lo) / range).clamp(0.0, 1.0);
    }
}

pub fn build_feature_vector(patch: &Image, mode: ColorMode) -> Result<FeatureVector> {
    check_square(patch)?;
    check_hog_size(patch.width(), patch.height())?;
    let mut color = compute_color_block(patch, mode)?;
    let hog_planes = match mode {
        ColorMode::Color => planes(patch),
        ColorMode::Gray if patch.is_color() => {
            vec![patch.intensity().into_iter().map(|v| v / 255.0).collect()]
        }
        ColorMode::Gray => planes(patch),
    };
    let mut hog = hog_from_planes(&hog_planes, patch.width(), patch.height()).into_vec();
    rescale_unit(&mut color);
    rescale_unit(&mut hog);
    color.append(&mut hog);
    rescale_unit(&mut color);
    Ok(FeatureVector::new(color, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(side: usize, period: usize) -> Image {
        Image::from_fn(side, side, 3, |x, y| {
            if (x / period + y / period) % 2 == 0 {
                [220, 40, 30]
            } else {
                [20, 90, 200]
            }
        })
        .unwrap()
    }

    #[test]
    fn hog_shape_is_4x4x31() {
        let hog = compute_hog(&checker(32, 4)).unwrap();
        assert_eq!((hog.cells_x, hog.cells_y), (4, 4));
        assert_eq!(hog.as_slice().len(), 496);
        assert!(hog.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn hog_rejects_wrong_size() {
        let img = Image::filled(30, 30, &[0]).unwrap();
        assert!(matches!(compute_hog(&img), Err(Error::InvalidArgument(_))));
        assert!(build_feature_vector(&img, ColorMode::Gray).is_err());
    }

    #[test]
    fn constant_patch_has_no_orientation_energy() {
        let hog = compute_hog(&Image::filled(32, 32, &[77, 77, 77]).unwrap()).unwrap();
        assert!(hog.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge_votes_horizontal_gradient() {
        let img = Image::from_fn(32, 32, 1, |x, _| if x < 16 { [0; 3] } else { [255; 3] }).unwrap();
        // Independent check of the gradient: +x, orientation 0 -> sensitive bin 0.
        let hog = compute_hog(&img).unwrap();
        let mut totals = [0.0; 18];
        for (o, t) in totals.iter_mut().enumerate() {
            for cy in 0..4 {
                for cx in 0..4 {
                    *t += hog.get(cx, cy, o);
                }
            }
        }
        let argmax = (0..18).max_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
        assert_eq!(argmax, 0);
        // Symmetric along the edge: every row of cells carries the same energy.
        for cx in 0..4 {
            let first = hog.get(cx, 0, 0);
            for cy in 1..4 {
                assert!((hog.get(cx, cy, 0) - first).abs() < 1e-12);
            }
        }
        // Mirror symmetry across the edge for the insensitive channel.
        for cy in 0..4 {
            assert!((hog.get(1, cy, 18) - hog.get(2, cy, 18)).abs() < 1e-12);
        }
    }

    #[test]
    fn color_block_lengths() {
        let img = checker(32, 4);
        assert_eq!(compute_color_block(&img, ColorMode::Color).unwrap().len(), 768);
        assert_eq!(compute_color_block(&img, ColorMode::Gray).unwrap().len(), 256);
        let gray = Image::filled(32, 32, &[5]).unwrap();
        assert!(compute_color_block(&gray, ColorMode::Color).is_err());
    }

    #[test]
    fn constant_gray_patch_gives_constant_intensity_block() {
        let block = compute_color_block(&Image::filled(32, 32, &[42]).unwrap(), ColorMode::Gray).unwrap();
        assert!(block.iter().all(|&v| v == 42.0));
    }

    #[test]
    fn red_patch_matches_lab_conversion() {
        let block =
            compute_color_block(&Image::filled(32, 32, &[255, 0, 0]).unwrap(), ColorMode::Color).unwrap();
        let lab = srgb_to_lab([255.0, 0.0, 0.0]);
        for c in 0..3 {
            assert!(block[c * 256..(c + 1) * 256].iter().all(|&v| (v - lab[c]).abs() < 1e-12));
        }
    }

    #[test]
    fn feature_vector_range_and_length() {
        let fv = build_feature_vector(&checker(32, 4), ColorMode::Color).unwrap();
        assert_eq!(fv.len(), 1264);
        let (lo, hi) = fv.as_slice().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert_eq!((lo, hi), (0.0, 1.0));
        let fv = build_feature_vector(&checker(32, 4), ColorMode::Gray).unwrap();
        assert_eq!(fv.len(), 752);
        assert_eq!(ColorMode::Gray.feature_dim(32), 752);
        assert_eq!(ColorMode::Color.feature_dim(32), 1264);
    }

    #[test]
    fn projection_bins_match_rounded_angle() {
        let dirs = bin_directions();
        for i in 0..3600 {
            let a = (i as f64 + 0.37) * 2.0 * PI / 3600.0;
            for r in [1e-3, 0.5, 3.0] {
                let (gx, gy) = (r * a.cos(), r * a.sin());
                let o = gy.atan2(gx).rem_euclid(2.0 * PI);
                let want = ((o * 18.0 / (2.0 * PI) + 0.5) as usize) % 18;
                assert_eq!(orientation_bin(gx, gy, dirs), want, "angle {a}");
            }
        }
    }

    #[test]
    fn constant_patch_gives_zero_vector() {
        for img in [
            Image::filled(32, 32, &[90]).unwrap(),
            Image::filled(32, 32, &[90, 10, 10]).unwrap(),
        ] {
            let fv = build_feature_vector(&img, ColorMode::Gray).unwrap();
            assert!(fv.as_slice().iter().all(|&v| v == 0.0));
        }
        // In colour mode a flat patch keeps only its L/a/b offsets.
        let fv = build_feature_vector(&Image::filled(32, 32, &[90, 10, 10]).unwrap(), ColorMode::Color)
            .unwrap();
        assert!(fv.as_slice()[768..].iter().all(|&v| v == 0.0));
        let block = &fv.as_slice()[..768];
        assert!(block[..256].iter().all(|&v| v == block[0]));
    }

    #[test]
    fn intensity_block_is_invariant_to_gain() {
        let base = Image::from_fn(32, 32, 1, |x, y| [((x * 7 + y * 3) % 120) as u8; 3]).unwrap();
        let doubled =
            Image::new(32, 32, 1, base.data().iter().map(|&v| v * 2).collect()).unwrap();
        let mut a = compute_color_block(&base, ColorMode::Gray).unwrap();
        let mut b = compute_color_block(&doubled, ColorMode::Gray).unwrap();
        rescale_unit(&mut a);
        rescale_unit(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
