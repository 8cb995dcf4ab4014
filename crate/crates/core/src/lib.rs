//! Visual object tracking with Boolean map features, logistic regression and
//! a particle filter, plus an OTB-style benchmark harness.

pub mod benchio;
pub mod bmr;
pub mod classifier;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod imgproc;
pub mod selftest;
pub mod synth;
pub mod tracker;

pub use benchio::{load_sequence, Attribute, EvalBox, Sequence};
pub use config::{ColorSetting, RunConfig, ScaleMode};
pub use error::{Error, Result};
pub use features::ColorMode;
pub use imgproc::{BBox, Image, TargetState};
pub use tracker::{track_sequence, FrameRecord, Tracker};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
