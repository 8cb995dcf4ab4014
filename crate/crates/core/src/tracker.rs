//! Particle-filter localisation with the classifier as observation model.
//!
//! Each frame draws `n_p` particles from a Gaussian around the previous MAP
//! state, scores every particle with the classifier confidence (optionally
//! times the Gaussian prior density), and keeps the best one. The classifier
//! is retrained, warm-started, only when the chosen particle's confidence
//! falls below `rho`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{build_training_set, predict, train, ClassifierState, PatchEncoder};
use crate::config::{RunConfig, ScaleMode};
use crate::error::{Error, Result};
use crate::features::ColorMode;
use crate::imgproc::{resize_image, BBox, FrameScale, Image, TargetState};

pub const MIN_SCALE: f64 = 0.05;
pub const MAX_SCALE: f64 = 20.0;

/// Random-walk standard deviations of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_s: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            sigma_x: 6.0,
            sigma_y: 6.0,
            sigma_s: 0.01,
        }
    }
}

impl MotionModel {
    /// Density of `state` under independent Gaussians centred on `mean`.
    pub fn density(&self, state: &TargetState, mean: &TargetState) -> f64 {
        let zx = (state.x - mean.x) / self.sigma_x;
        let zy = (state.y - mean.y) / self.sigma_y;
        let zs = (state.s - mean.s) / self.sigma_s;
        let norm = (2.0 * PI).powf(1.5) * self.sigma_x * self.sigma_y * self.sigma_s;
        (-0.5 * (zx * zx + zy * zy + zs * zs)).exp() / norm
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub states: Vec<TargetState>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `n_p` states around `prev`; scale is clamped to `[MIN_SCALE, MAX_SCALE]`.
/// Weights start at zero.
pub fn sample_particles(
    prev: &TargetState,
    mm: &MotionModel,
    n_p: usize,
    rng: &mut ChaCha8Rng,
) -> ParticleSet {
    let mut states = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        let zs: f64 = StandardNormal.sample(rng);
        states.push(TargetState {
            x: prev.x + mm.sigma_x * zx,
            y: prev.y + mm.sigma_y * zy,
            s: (prev.s + mm.sigma_s * zs).clamp(MIN_SCALE, MAX_SCALE),
        });
    }
    ParticleSet {
        weights: vec![0.0; n_p],
        states,
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// One logged frame, box in original video coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Classifier confidence of the chosen state before any update.
    pub confidence: f64,
    pub updated: bool,
    pub lost: bool,
}

/// Everything that happened during one [`Tracker::step`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: TargetState,
    pub previous: TargetState,
    pub confidence: f64,
    pub updated: bool,
    /// Particles with their classifier confidences as weights.
    pub particles: ParticleSet,
    /// `confidence * prior` (or plain confidence) used for the argmax.
    pub posterior: Vec<f64>,
    pub chosen: usize,
}

pub struct Tracker {
    config: RunConfig,
    encoder: PatchEncoder,
    classifier: ClassifierState,
    current: TargetState,
    init_wh: (f64, f64),
    scale: FrameScale,
    rng: ChaCha8Rng,
    pool: Option<Arc<rayon::ThreadPool>>,
    frame_index: usize,
}

impl std::fmt::Debug for Tracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracker")
            .field("current", &self.current)
            .field("init_wh", &self.init_wh)
            .field("frame_index", &self.frame_index)
            .finish_non_exhaustive()
    }
}

impl Tracker {
    /// Resizes the first frame to the working size, trains the classifier
    /// from zero on samples around `init_box` (original coordinates) and
    /// returns the tracker with the frame-1 record.
    pub fn init(frame: &Image, init_box: BBox, config: &RunConfig) -> Result<(Self, FrameRecord)> {
        config.validate()?;
        if !(init_box.w >= 1.0 && init_box.h >= 1.0)
            || !init_box.x.is_finite()
            || !init_box.y.is_finite()
        {
            return Err(Error::invalid(format!("degenerate initial box {init_box:?}")));
        }
        let (cx, cy) = init_box.center();
        if cx < 0.0 || cy < 0.0 || cx >= frame.width() as f64 || cy >= frame.height() as f64 {
            return Err(Error::invalid(format!(
                "initial box centre ({cx:.1}, {cy:.1}) lies outside the {}x{} frame",
                frame.width(),
                frame.height()
            )));
        }
        let mode = config
            .color_mode
            .resolve(frame.is_color() && !frame.is_effectively_gray());
        if mode == ColorMode::Color && !frame.is_color() {
            return Err(Error::invalid("colour mode requested for a grayscale sequence"));
        }
        let work = (config.working_size[0], config.working_size[1]);
        let scale = FrameScale::between((frame.width(), frame.height()), work);
        let working = scale.forward(&init_box);
        let (wx, wy) = working.center();

        let pool = match config.workers {
            0 => None,
            n => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?,
            )),
        };
        let encoder = config.encoder(mode);
        let mut tracker = Tracker {
            config: config.clone(),
            encoder,
            classifier: ClassifierState::zeros(encoder.dim()),
            current: TargetState::new(wx, wy, 1.0),
            init_wh: (working.w, working.h),
            scale,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pool,
            frame_index: 0,
        };

        let frame = tracker.to_working(frame)?;
        let confidence = tracker.confidence_at(&frame, &tracker.current.clone())?;
        tracker.retrain(&frame)?;
        let record = FrameRecord {
            frame: 0,
            bbox: init_box,
            confidence,
            updated: true,
            lost: false,
        };
        Ok((tracker, record))
    }

    pub fn current(&self) -> TargetState {
        self.current
    }

    pub fn classifier(&self) -> &ClassifierState {
        &self.classifier
    }

    pub fn encoder(&self) -> &PatchEncoder {
        &self.encoder
    }

    pub fn color_mode(&self) -> ColorMode {
        self.encoder.mode
    }

    /// Reference target size in working coordinates.
    pub fn init_wh(&self) -> (f64, f64) {
        self.init_wh
    }

    pub fn frame_scale(&self) -> FrameScale {
        self.scale
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Box of `state` in working coordinates.
    pub fn working_box(&self, state: &TargetState) -> BBox {
        BBox::from_center(state.x, state.y, state.s * self.init_wh.0, state.s * self.init_wh.1)
    }

    /// Box of `state` in original video coordinates.
    pub fn original_box(&self, state: &TargetState) -> BBox {
        self.scale.inverse(&self.working_box(state))
    }

    /// Resizes an original-resolution frame to the working size.
    pub fn to_working(&self, frame: &Image) -> Result<Image> {
        if self.encoder.mode == ColorMode::Color && !frame.is_color() {
            return Err(Error::invalid("grayscale frame in a colour sequence"));
        }
        resize_image(frame, self.config.working_size[0], self.config.working_size[1])
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    fn confidence_at(&self, working: &Image, state: &TargetState) -> Result<f64> {
        let b = self.encoder.describe(working, state, self.init_wh)?;
        predict(&self.classifier, &b)
    }

    fn retrain(&mut self, working: &Image) -> Result<()> {
        let sampler = self.config.sampler();
        let (state, init_wh, encoder) = (self.current, self.init_wh, self.encoder);
        let set = self.install(|| build_training_set(working, &state, init_wh, &sampler, &encoder))?;
        self.classifier = train(&self.classifier, &set, self.config.iters)?;
        Ok(())
    }

    /// Classifier confidence of every particle; out-of-view particles get 0.
    /// Returns the confidences and the number of in-view particles.
    pub fn score_particles(&self, working: &Image, particles: &ParticleSet) -> (Vec<f64>, usize) {
        let scored: Vec<Option<f64>> = self.install(|| {
            particles
                .states
                .par_iter()
                .map(|st| self.confidence_at(working, st).ok())
                .collect()
        });
        let in_view = scored.iter().filter(|s| s.is_some()).count();
        (scored.into_iter().map(|s| s.unwrap_or(0.0)).collect(), in_view)
    }

    /// Processes the next original-resolution frame.
    pub fn step(&mut self, frame: &Image) -> Result<StepOutcome> {
        self.frame_index += 1;
        let working = self.to_working(frame)?;
        let previous = self.current;
        let mm = self.config.motion();
        let mut particles = sample_particles(&previous, &mm, self.config.n_particles, &mut self.rng);
        let (scores, in_view) = self.score_particles(&working, &particles);
        if in_view == 0 {
            return Err(Error::TrackingLost {
                frame: self.frame_index,
                last_state: previous,
            });
        }
        particles.weights = scores;
        let posterior: Vec<f64> = if self.config.prior_in_score {
            particles
                .states
                .iter()
                .zip(&particles.weights)
                .map(|(st, f)| f * mm.density(st, &previous))
                .collect()
        } else {
            particles.weights.clone()
        };
        let chosen = argmax(&posterior).expect("at least one particle");
        let confidence = particles.weights[chosen];
        self.current = particles.states[chosen];

        let updated = confidence < self.config.rho;
        if updated {
            self.retrain(&working)?;
        }
        let state = self.current;
        if self.config.scale_mode == ScaleMode::Relative {
            self.init_wh = (self.init_wh.0 * state.s, self.init_wh.1 * state.s);
            self.current.s = 1.0;
        }
        Ok(StepOutcome {
            state,
            previous,
            confidence,
            updated,
            particles,
            posterior,
            chosen,
        })
    }

    /// Step that turns a lost target into a flagged record at the last state.
    pub fn step_record(&mut self, frame: &Image) -> Result<FrameRecord> {
        match self.step(frame) {
            Ok(out) => {
                let bbox = match self.config.scale_mode {
                    ScaleMode::Absolute => self.original_box(&out.state),
                    ScaleMode::Relative => self.original_box(&self.current),
                };
                Ok(FrameRecord {
                    frame: self.frame_index,
                    bbox,
                    confidence: out.confidence,
                    updated: out.updated,
                    lost: false,
                })
            }
            Err(Error::TrackingLost { frame, last_state }) => Ok(FrameRecord {
                frame,
                bbox: self.original_box(&last_state),
                confidence: 0.0,
                updated: false,
                lost: true,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Tracks `init_box` through `frames`, one record per frame.
pub fn track_sequence<I>(frames: I, init_box: BBox, config: &RunConfig) -> Result<Vec<FrameRecord>>
where
    I: IntoIterator<Item = Result<Image>>,
{
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::invalid("sequence has no frames"))??;
    let (mut tracker, record) = Tracker::init(&first, init_box, config)?;
    drop(first);
    let mut records = vec![record];
    for frame in frames {
        records.push(tracker.step_record(&frame?)?);
    }
    Ok(records)
}
