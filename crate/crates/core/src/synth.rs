//! Synthetic sequences with exact ground truth, for tests and demos.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgproc::{BBox, Image};

#[derive(Debug, Clone)]
pub struct MovingSquare {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub side: usize,
    pub start: (f64, f64),
    /// Pixels per frame; each axis reflects off the frame border.
    pub velocity: (f64, f64),
    pub seed: u64,
}

impl Default for MovingSquare {
    fn default() -> Self {
        Self {
            frames: 100,
            width: 320,
            height: 240,
            side: 40,
            start: (200.0, 100.0),
            velocity: (3.0, 0.0),
            seed: 7,
        }
    }
}

fn hash(x: u64, y: u64, seed: u64) -> u64 {
    let mut h = x.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ y.wrapping_mul(0xc2b2_ae3d_27d4_eb4f) ^ seed;
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

fn bounce(p0: f64, v: f64, t: usize, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    let period = 2.0 * hi;
    let p = (p0 + v * t as f64).rem_euclid(period);
    if p <= hi {
        p
    } else {
        period - p
    }
}

impl MovingSquare {
    /// Top-left corner of the square at frame `t`.
    pub fn position(&self, t: usize) -> (f64, f64) {
        let side = self.side as f64;
        (
            bounce(self.start.0, self.velocity.0, t, self.width as f64 - side).round(),
            bounce(self.start.1, self.velocity.1, t, self.height as f64 - side).round(),
        )
    }

    pub fn groundtruth(&self) -> Vec<BBox> {
        let side = self.side as f64;
        (0..self.frames)
            .map(|t| {
                let (x, y) = self.position(t);
                BBox::new(x, y, side, side)
            })
            .collect()
    }

    /// Frame `t`: a red square with fine-grain noise texture that moves with
    /// it, over a greenish background of 6-px blotches with faint fine noise.
    pub fn frame(&self, t: usize) -> Image {
        let (px, py) = self.position(t);
        let (px, py) = (px as usize, py as usize);
        let side = self.side;
        let seed = self.seed;
        Image::from_fn(self.width, self.height, 3, |x, y| {
            if x >= px && x < px + side && y >= py && y < py + side {
                let n = (hash((x - px) as u64, (y - py) as u64, seed ^ 0xabc) % 30) as u8;
                [215 + n, 30 + n, 25]
            } else {
                let n = (hash(x as u64, y as u64, seed) % 90) as u8;
                let blotch = (hash(x as u64 / 6, y as u64 / 6, seed ^ 1) % 100) as u8;
                [20 + n / 6, 50 + blotch + n / 6, 40 + blotch / 2]
            }
        })
        .expect("valid synthetic frame")
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<Image>> + '_ {
        (0..self.frames).map(|t| Ok(self.frame(t)))
    }

    /// Writes `img/0001.png..` and `groundtruth_rect.txt` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let img_dir = dir.join("img");
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        for t in 0..self.frames {
            let f = self.frame(t);
            let path = img_dir.join(format!("{:04}.png", t + 1));
            image::RgbImage::from_raw(f.width() as u32, f.height() as u32, f.into_data())
                .expect("buffer matches dimensions")
                .save(&path)
                .map_err(|e| Error::Decode {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
        }
        let gt: String = self
            .groundtruth()
            .iter()
            .map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h))
            .collect();
        let gt_path = dir.join("groundtruth_rect.txt");
        fs::write(&gt_path, gt).map_err(|e| Error::io(&gt_path, e))
    }
}
