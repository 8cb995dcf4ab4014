//! Frame geometry: bilinear resizing, sRGB to CIE L*a*b* conversion and
//! state-driven patch extraction.
//!
//! Resampling uses pixel-centre alignment, `src = (dst + 0.5) * scale - 0.5`,
//! with coordinates clamped to the source so the border is replicated.
//! Samples are converted back to 8 bits with round-half-away-from-zero.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit image with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "image data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single value per channel.
    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data)
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> [u8; 3],
    {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                data.extend_from_slice(&px[..channels]);
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    /// Sample at `(x, y)`, channel `c`. Panics when out of range.
    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// True when an RGB image has identical R, G and B samples everywhere.
    pub fn is_effectively_gray(&self) -> bool {
        self.channels == 1
            || self
                .data
                .chunks_exact(3)
                .all(|px| px[0] == px[1] && px[1] == px[2])
    }

    /// Per-pixel intensity on the 0..=255 scale (ITU-R BT.601 luma for RGB).
    pub fn intensity(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| f64::from(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|px| {
                    0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2])
                })
                .collect(),
        }
    }

    /// Copies the sub-rectangle with top-left `(x, y)`; it must lie inside the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::invalid("crop rectangle exceeds image bounds"));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Image::new(w, h, self.channels, data)
    }
}

/// Tracked target state: centre `(x, y)` in pixels and isotropic scale `s`
/// relative to the initial box size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub s: f64,
}

impl TargetState {
    pub fn new(x: f64, y: f64, s: f64) -> Self {
        Self { x, y, s }
    }
}

/// Axis-aligned box in corner format: top-left `(x, y)` plus size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

/// Per-axis scaling between original video coordinates and working coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScale {
    pub fx: f64,
    pub fy: f64,
}

impl FrameScale {
    pub const IDENTITY: FrameScale = FrameScale { fx: 1.0, fy: 1.0 };

    /// Scale taking a `from` = (width, height) frame onto `to`.
    pub fn between(from: (usize, usize), to: (usize, usize)) -> Self {
        Self {
            fx: to.0 as f64 / from.0 as f64,
            fy: to.1 as f64 / from.1 as f64,
        }
    }

    pub fn forward(&self, b: &BBox) -> BBox {
        BBox::new(b.x * self.fx, b.y * self.fy, b.w * self.fx, b.h * self.fy)
    }

    pub fn inverse(&self, b: &BBox) -> BBox {
        BBox::new(b.x / self.fx, b.y / self.fy, b.w / self.fx, b.h / self.fy)
    }
}

/// Per-pixel CIE L*a*b* samples, three interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabPatch {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

// sRGB primaries, D65 reference white.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// Exact inverse of [`SRGB_TO_XYZ`], so the two conversions round-trip.
fn xyz_to_srgb() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| {
        let m = &SRGB_TO_XYZ;
        let cof = |r: usize, c: usize| {
            let (r0, r1) = ((r + 1) % 3, (r + 2) % 3);
            let (c0, c1) = ((c + 1) % 3, (c + 2) % 3);
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
        let mut inv = [[0.0; 3]; 3];
        for (r, row) in inv.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = cof(c, r) / det;
            }
        }
        inv
    })
}

/// White point taken as the image of sRGB white so that (255,255,255) lands on a=b=0.
const WHITE: [f64; 3] = [
    SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2],
    SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2],
    SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2],
];

const LAB_EPS: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPS {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > LAB_EPS {
        t
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

/// Linearised sRGB for every quarter step of `0..=255`, i.e. for averages of
/// four 8-bit samples.
fn quarter_step_linear() -> &'static [f64] {
    static LUT: OnceLock<Vec<f64>> = OnceLock::new();
    LUT.get_or_init(|| (0..=1020).map(|q| srgb_to_linear(f64::from(q) / 4.0 / 255.0)).collect())
}

#[inline]
fn linearize(c: f64) -> f64 {
    let q = c * 4.0;
    if (0.0..=1020.0).contains(&q) && q == f64::from(q as u32) {
        quarter_step_linear()[q as usize]
    } else {
        srgb_to_linear(c / 255.0)
    }
}

/// Converts one sRGB pixel with components on the 0..=255 scale to L*a*b*.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(linearize);
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(SRGB_TO_XYZ.iter()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`srgb_to_lab`]; output on the 0..=255 scale, not clamped.
pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let mut rgb = [0.0; 3];
    for (out, row) in rgb.iter_mut().zip(xyz_to_srgb().iter()) {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        *out = linear_to_srgb(lin) * 255.0;
    }
    rgb
}

pub fn rgb_to_lab(img: &Image) -> Result<LabPatch> {
    if img.channels() != 3 {
        return Err(Error::invalid(
            "LAB conversion needs an RGB image; use the intensity path for gray input",
        ));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| srgb_to_lab([f64::from(px[0]), f64::from(px[1]), f64::from(px[2])]))
        .collect();
    Ok(LabPatch {
        width: img.width(),
        height: img.height(),
        data,
    })
}

/// Round half away from zero onto `0..=255` without a libm call.
#[inline]
fn to_u8(v: f64) -> u8 {
    if !(v > 0.0) {
        return 0;
    }
    if v >= 255.0 {
        return 255;
    }
    let i = v as u32;
    (if v - i as f64 >= 0.5 { i + 1 } else { i }) as u8
}

/// One bilinear tap: two source indices and the weight of the second.
#[derive(Clone, Copy)]
struct Tap {
    i0: usize,
    i1: usize,
    frac: f64,
}

/// Taps mapping `out_len` output samples onto the virtual window
/// `[origin, origin + win_len)`, with window coordinates clamped to the window
/// and window pixels clamped to `[0, src_len)`.
fn taps(origin: i64, win_len: usize, src_len: usize, out_len: usize) -> Vec<Tap> {
    let scale = win_len as f64 / out_len as f64;
    let last = (win_len - 1) as f64;
    let clamp_src = |i: i64| i.clamp(0, src_len as i64 - 1) as usize;
    (0..out_len)
        .map(|d| {
            let u = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let u0 = u.floor();
            let k0 = u0 as i64;
            let k1 = (k0 + 1).min(win_len as i64 - 1);
            Tap {
                i0: clamp_src(origin + k0),
                i1: clamp_src(origin + k1),
                frac: u - u0,
            }
        })
        .collect()
}

/// Bilinearly resamples the window `(left, top, win_w, win_h)` of `src`
/// (which may extend past the image, see [`taps`]) into `out_w x out_h`.
fn sample_window(
    src: &Image,
    left: i64,
    top: i64,
    win_w: usize,
    win_h: usize,
    out_w: usize,
    out_h: usize,
) -> Image {
    let xs = taps(left, win_w, src.width, out_w);
    let ys = taps(top, win_h, src.height, out_h);
    let ch = src.channels;
    let stride = src.width * ch;
    let mut data = vec![0u8; out_w * out_h * ch];
    let mut out = data.chunks_exact_mut(ch);
    for ty in &ys {
        let row0 = &src.data[ty.i0 * stride..(ty.i0 + 1) * stride];
        let row1 = &src.data[ty.i1 * stride..(ty.i1 + 1) * stride];
        for tx in &xs {
            let (a, b) = (tx.i0 * ch, tx.i1 * ch);
            let (a0, b0) = (&row0[a..a + ch], &row0[b..b + ch]);
            let (a1, b1) = (&row1[a..a + ch], &row1[b..b + ch]);
            let px = out.next().expect("output sized to the taps");
            for c in 0..ch {
                let p00 = f64::from(a0[c]);
                let p01 = f64::from(b0[c]);
                let p10 = f64::from(a1[c]);
                let p11 = f64::from(b1[c]);
                let top_v = p00 + (p01 - p00) * tx.frac;
                let bot_v = p10 + (p11 - p10) * tx.frac;
                px[c] = to_u8(top_v + (bot_v - top_v) * ty.frac);
            }
        }
    }
    Image {
        width: out_w,
        height: out_h,
        channels: ch,
        data,
    }
}

pub fn resize_image(img: &Image, w: usize, h: usize) -> Result<Image> {
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {w}x{h}"
        )));
    }
    if w == img.width && h == img.height {
        return Ok(img.clone());
    }
    Ok(sample_window(img, 0, 0, img.width, img.height, w, h))
}

/// Integer window `(left, top, width, height)` covered by `state` for a
/// target whose unscaled size is `init_wh`.
pub fn patch_window(state: &TargetState, init_wh: (f64, f64)) -> (i64, i64, usize, usize) {
    let ww = (state.s * init_wh.0).round().max(1.0);
    let hh = (state.s * init_wh.1).round().max(1.0);
    let left = (state.x - ww / 2.0).round() as i64;
    let top = (state.y - hh / 2.0).round() as i64;
    (left, top, ww as usize, hh as usize)
}

/// Crops the `(s*w0, s*h0)` window centred on `state`, replicating edge
/// pixels outside the frame, and resizes it to `canonical x canonical`.
pub fn extract_patch(
    frame: &Image,
    state: &TargetState,
    init_wh: (f64, f64),
    canonical: usize,
) -> Result<Image> {
    if !(state.s > 0.0) || !state.x.is_finite() || !state.y.is_finite() {
        return Err(Error::invalid(format!("invalid target state {state:?}")));
    }
    if canonical == 0 {
        return Err(Error::invalid("canonical patch size must be positive"));
    }
    let (left, top, ww, hh) = patch_window(state, init_wh);
    let (fw, fh) = (frame.width as i64, frame.height as i64);
    if left >= fw || top >= fh || left + ww as i64 <= 0 || top + hh as i64 <= 0 {
        return Err(Error::OutOfView);
    }
    Ok(sample_window(frame, left, top, ww, hh, canonical, canonical))
}
