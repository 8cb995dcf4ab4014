//! Run configuration. Every constant of the tracker lives here with its
//! published default; JSON files may override any subset of fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{PatchEncoder, SamplerConfig};
use crate::error::{Error, Result};
use crate::features::{ColorMode, HOG_CELL};
use crate::tracker::MotionModel;

/// Colour handling requested by the user; `Auto` inspects the first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColorSetting {
    #[default]
    Auto,
    Gray,
    Color,
}

impl ColorSetting {
    pub fn resolve(self, first_frame_is_color: bool) -> ColorMode {
        match self {
            ColorSetting::Auto if first_frame_is_color => ColorMode::Color,
            ColorSetting::Auto => ColorMode::Gray,
            ColorSetting::Gray => ColorMode::Gray,
            ColorSetting::Color => ColorMode::Color,
        }
    }
}

/// How the patch window follows scale changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    /// Window is the frame-1 box size times the absolute scale `s`.
    #[default]
    Absolute,
    /// Window size is re-based on every frame and `s` restarts at 1.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Working frame size `[width, height]`.
    pub working_size: [usize; 2],
    pub canonical: usize,
    pub n_col: usize,
    pub n_hog: usize,
    /// BMR divisor; thresholds step by `1/c`.
    pub c: usize,
    pub alpha: f64,
    pub inner_frac: f64,
    pub beta: f64,
    pub neg_step: usize,
    /// Motion standard deviations `[x, y, s]`.
    pub sigma: [f64; 3],
    pub n_particles: usize,
    pub rho: f64,
    pub iters: usize,
    pub color_mode: ColorSetting,
    pub seed: u64,
    /// Scoring threads; 0 uses the global rayon pool.
    pub workers: usize,
    pub bmr_enabled: bool,
    pub prior_in_score: bool,
    pub scale_mode: ScaleMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            working_size: [320, 240],
            canonical: 32,
            n_col: 16,
            n_hog: 4,
            c: 4,
            alpha: 3.0,
            inner_frac: 0.3,
            beta: 100.0,
            neg_step: 5,
            sigma: [6.0, 6.0, 0.01],
            n_particles: 400,
            rho: 0.9,
            iters: 20,
            color_mode: ColorSetting::Auto,
            seed: 0,
            workers: 0,
            bmr_enabled: true,
            prior_in_score: true,
            scale_mode: ScaleMode::Absolute,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.working_size.iter().any(|&v| v == 0) {
            return fail("working_size entries must be positive".into());
        }
        if self.canonical == 0 || self.canonical % HOG_CELL != 0 || self.canonical < 2 * HOG_CELL {
            return fail(format!(
                "canonical must be a positive multiple of {HOG_CELL} of at least {}",
                2 * HOG_CELL
            ));
        }
        if self.n_col * 2 != self.canonical {
            return fail(format!("n_col must be canonical/2 = {}", self.canonical / 2));
        }
        if self.n_hog * HOG_CELL != self.canonical {
            return fail(format!("n_hog must be canonical/{HOG_CELL} = {}", self.canonical / HOG_CELL));
        }
        if self.c < 2 {
            return fail("c must be at least 2".into());
        }
        self.sampler().validate()?;
        if self.sigma.iter().any(|&s| !(s > 0.0)) {
            return fail("sigma entries must be positive".into());
        }
        if self.n_particles == 0 {
            return fail("n_particles must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail("rho must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            alpha: self.alpha,
            inner_frac: self.inner_frac,
            beta: self.beta,
            neg_step: self.neg_step,
        }
    }

    pub fn motion(&self) -> MotionModel {
        MotionModel {
            sigma_x: self.sigma[0],
            sigma_y: self.sigma[1],
            sigma_s: self.sigma[2],
        }
    }

    pub fn encoder(&self, mode: ColorMode) -> PatchEncoder {
        PatchEncoder {
            canonical: self.canonical,
            mode,
            divisor: self.c,
            bmr_enabled: self.bmr_enabled,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
