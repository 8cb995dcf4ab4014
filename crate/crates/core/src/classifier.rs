//! Online logistic regression on patch representations, and construction of
//! its training sets from dense positive and ring-shaped negative sampling
//! around the target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmr;
use crate::error::{Error, Result};
use crate::features::{build_feature_vector, ColorMode};
use crate::imgproc::{extract_patch, Image, TargetState};

/// Linear classifier weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    pub w: Vec<f64>,
}

impl ClassifierState {
    pub fn zeros(dim: usize) -> Self {
        Self { w: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<Sample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Radius of the dense positive disk, pixels.
    pub alpha: f64,
    /// Inner negative radius as a fraction of `min(w, h)` of the target.
    pub inner_frac: f64,
    /// Outer negative radius, pixels.
    pub beta: f64,
    /// Grid step of the negative ring, pixels.
    pub neg_step: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            inner_frac: 0.3,
            beta: 100.0,
            neg_step: 5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.inner_frac > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("sampler radii must be positive".into()));
        }
        if self.neg_step == 0 {
            return Err(Error::Config("negative sampling step must be at least 1".into()));
        }
        Ok(())
    }

    pub fn inner_radius(&self, target_wh: (f64, f64)) -> f64 {
        self.inner_frac * target_wh.0.min(target_wh.1)
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_set(w: &ClassifierState, data: &TrainingSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if let Some(s) = data.samples.iter().find(|s| s.features.len() != w.dim()) {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match classifier dimension {}",
            s.features.len(),
            w.dim()
        )));
    }
    Ok(())
}

fn margin(w: &[f64], b: &[f64]) -> f64 {
    bmr::dot_unchecked(w, b)
}

/// Classifier confidence `1 / (1 + exp(-w.b))`.
pub fn predict(w: &ClassifierState, b: &[f64]) -> Result<f64> {
    if b.len() != w.dim() {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match classifier dimension {}",
            b.len(),
            w.dim()
        )));
    }
    Ok(sigmoid(margin(&w.w, b)))
}

/// Mean logistic negative log-likelihood.
pub fn loss(w: &ClassifierState, data: &TrainingSet) -> Result<f64> {
    check_set(w, data)?;
    let total: f64 = data
        .samples
        .iter()
        .map(|s| softplus(-s.label.sign() * margin(&w.w, &s.features)))
        .sum();
    Ok(total / data.len() as f64)
}

pub fn gradient(w: &ClassifierState, data: &TrainingSet) -> Result<Vec<f64>> {
    check_set(w, data)?;
    Ok(gradient_unchecked(&w.w, data))
}

fn gradient_unchecked(w: &[f64], data: &TrainingSet) -> Vec<f64> {
    let n = data.len() as f64;
    let mut grad = vec![0.0; w.len()];
    for s in &data.samples {
        let y = s.label.sign();
        // d/dz log(1 + e^{-yz}) = -y * sigmoid(-yz)
        let coef = -y * sigmoid(-y * margin(w, &s.features)) / n;
        if coef != 0.0 {
            for (g, b) in grad.iter_mut().zip(&s.features) {
                *g += coef * b;
            }
        }
    }
    grad
}

/// Unit-step gradient descent, warm-started from `w0`.
pub fn train(w0: &ClassifierState, data: &TrainingSet, iters: usize) -> Result<ClassifierState> {
    if iters == 0 {
        return Ok(w0.clone());
    }
    check_set(w0, data)?;
    let mut w = w0.w.clone();
    for _ in 0..iters {
        let grad = gradient_unchecked(&w, data);
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= gi;
        }
    }
    Ok(ClassifierState { w })
}

/// Positive and negative sample centres around a target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleLocations {
    pub positives: Vec<(f64, f64)>,
    pub negatives: Vec<(f64, f64)>,
}

/// Dense positives `|l - c| < alpha` on the integer lattice, and negatives
/// on a `neg_step` grid with `zeta < |l - c| < beta`. Centres outside the
/// `frame_wh` frame are dropped.
pub fn generate_sample_locations(
    center: (f64, f64),
    cfg: &SamplerConfig,
    target_wh: (f64, f64),
    frame_wh: (usize, usize),
) -> Result<SampleLocations> {
    if !(target_wh.0 > 0.0 && target_wh.1 > 0.0) {
        return Err(Error::invalid("target size must be positive"));
    }
    cfg.validate()?;
    let inside = |(x, y): (f64, f64)| {
        x >= 0.0 && y >= 0.0 && x < frame_wh.0 as f64 && y < frame_wh.1 as f64
    };

    let reach = cfg.alpha.ceil() as i64;
    let mut positives = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let r2 = (dx * dx + dy * dy) as f64;
            if r2 < cfg.alpha * cfg.alpha {
                let loc = (center.0 + dx as f64, center.1 + dy as f64);
                if inside(loc) {
                    positives.push(loc);
                }
            }
        }
    }

    let zeta = cfg.inner_radius(target_wh);
    let step = cfg.neg_step as i64;
    let reach = (cfg.beta / step as f64).ceil() as i64;
    let mut negatives = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let (dx, dy) = ((i * step) as f64, (j * step) as f64);
            let r = dx.hypot(dy);
            if r > zeta && r < cfg.beta {
                let loc = (center.0 + dx, center.1 + dy);
                if inside(loc) {
                    negatives.push(loc);
                }
            }
        }
    }

    if positives.is_empty() {
        return Err(Error::Sampling("no positive location inside the frame".into()));
    }
    if negatives.is_empty() {
        return Err(Error::Sampling(format!(
            "no negative location between radius {zeta:.2} and {} fits in the {}x{} frame",
            cfg.beta, frame_wh.0, frame_wh.1
        )));
    }
    Ok(SampleLocations {
        positives,
        negatives,
    })
}

/// Patch-to-vector pipeline shared by training and particle scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchEncoder {
    pub canonical: usize,
    pub mode: ColorMode,
    /// BMR divisor `c`.
    pub divisor: usize,
    /// When false the rescaled LAB/intensity+HOG vector is used directly.
    pub bmr_enabled: bool,
}

impl PatchEncoder {
    pub fn dim(&self) -> usize {
        let d = self.mode.feature_dim(self.canonical);
        if self.bmr_enabled {
            d * (self.divisor - 1)
        } else {
            d
        }
    }

    pub fn encode_patch(&self, patch: &Image) -> Result<Vec<f64>> {
        let phi = build_feature_vector(patch, self.mode)?;
        if !self.bmr_enabled {
            return Ok(phi.into_vec());
        }
        Ok(bmr::normalize(bmr::encode(&phi, self.divisor)?).into_vec())
    }

    /// Extracts the patch for `state` and encodes it.
    pub fn describe(&self, frame: &Image, state: &TargetState, init_wh: (f64, f64)) -> Result<Vec<f64>> {
        let patch = extract_patch(frame, state, init_wh, self.canonical)?;
        self.encode_patch(&patch)
    }
}

/// Labelled samples for `state` on `frame`; patches use the state's scale.
/// Encoding runs on the current rayon pool and keeps location order.
pub fn build_training_set(
    frame: &Image,
    state: &TargetState,
    init_wh: (f64, f64),
    cfg: &SamplerConfig,
    encoder: &PatchEncoder,
) -> Result<TrainingSet> {
    let target_wh = (state.s * init_wh.0, state.s * init_wh.1);
    let locs = generate_sample_locations(
        (state.x, state.y),
        cfg,
        target_wh,
        (frame.width(), frame.height()),
    )?;
    let labelled: Vec<((f64, f64), Label)> = locs
        .positives
        .iter()
        .map(|&l| (l, Label::Positive))
        .chain(locs.negatives.iter().map(|&l| (l, Label::Negative)))
        .collect();
    let samples = labelled
        .par_iter()
        .map(|&((x, y), label)| {
            let st = TargetState::new(x, y, state.s);
            encoder
                .describe(frame, &st, init_wh)
                .map(|features| Sample { features, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet::new(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f64>, label: Label) -> Sample {
        Sample { features, label }
    }

    #[test]
    fn predict_closed_forms() {
        let w = ClassifierState::zeros(3);
        assert_eq!(predict(&w, &[0.3, 0.1, 0.9]).unwrap(), 0.5);
        let w = ClassifierState { w: vec![3f64.ln(), 0.0] };
        assert!((predict(&w, &[1.0, 0.7]).unwrap() - 0.75).abs() < 1e-15);
        assert!(predict(&w, &[1.0]).is_err());
        let mut last = 0.0;
        for z in [-30.0, -1.0, 0.0, 1.0, 30.0] {
            let p = sigmoid(z);
            assert!(p > last);
            last = p;
        }
        assert_eq!(sigmoid(1e6), 1.0);
        assert_eq!(sigmoid(-1e6), 0.0);
    }

    #[test]
    fn loss_at_zero_is_log_two() {
        let data = TrainingSet::new(vec![
            sample(vec![1.0, 0.0], Label::Positive),
            sample(vec![0.2, 0.9], Label::Negative),
        ]);
        let w = ClassifierState::zeros(2);
        assert_eq!(loss(&w, &data).unwrap(), std::f64::consts::LN_2);
        let flipped = TrainingSet::new(
            data.samples
                .iter()
                .map(|s| sample(s.features.clone(), match s.label {
                    Label::Positive => Label::Negative,
                    Label::Negative => Label::Positive,
                }))
                .collect(),
        );
        assert_eq!(loss(&w, &flipped).unwrap(), loss(&w, &data).unwrap());
        assert!(loss(&w, &TrainingSet::default()).is_err());
    }

    #[test]
    fn loss_single_large_margin() {
        let data = TrainingSet::new(vec![sample(vec![1.0], Label::Positive)]);
        let w = ClassifierState { w: vec![10.0] };
        // High-precision value of log(1 + e^-10).
        assert!((loss(&w, &data).unwrap() - 4.539_889_921_687_05e-5).abs() < 1e-17);
        // No overflow far out in either direction.
        let w = ClassifierState { w: vec![-1000.0] };
        assert!((loss(&w, &data).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_pair_cancels_at_zero() {
        let b = vec![0.3, 0.4, 0.5];
        let data = TrainingSet::new(vec![
            sample(b.clone(), Label::Positive),
            sample(b, Label::Negative),
        ]);
        let g = gradient(&ClassifierState::zeros(3), &data).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_margins_give_small_gradient() {
        let data = TrainingSet::new(vec![
            sample(vec![1.0, 0.0], Label::Positive),
            sample(vec![0.0, 1.0], Label::Negative),
        ]);
        let w = ClassifierState { w: vec![10.0, -10.0] };
        let g = gradient(&w, &data).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "{norm}");
    }

    #[test]
    fn zero_iterations_is_identity() {
        let data = TrainingSet::new(vec![sample(vec![1.0], Label::Positive)]);
        let w0 = ClassifierState { w: vec![0.25] };
        assert_eq!(train(&w0, &data, 0).unwrap(), w0);
    }

    #[test]
    fn training_is_deterministic_and_warm_startable() {
        let data = TrainingSet::new(vec![
            sample(vec![0.8, 0.6], Label::Positive),
            sample(vec![0.6, 0.8], Label::Negative),
        ]);
        let w0 = ClassifierState::zeros(2);
        let a = train(&w0, &data, 20).unwrap();
        let b = train(&w0, &data, 20).unwrap();
        assert_eq!(a, b);
        // Running 10 + 10 with a warm start equals 20 from scratch.
        let half = train(&w0, &data, 10).unwrap();
        assert_eq!(train(&half, &data, 10).unwrap(), a);
        assert!(loss(&a, &data).unwrap() < loss(&w0, &data).unwrap());
    }

    #[test]
    fn positive_disk_has_25_lattice_points() {
        // Brute-force: integer (dx, dy) with dx^2 + dy^2 < 9.
        let expected = (-3i32..=3)
            .flat_map(|x| (-3i32..=3).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y < 9)
            .count();
        assert_eq!(expected, 25);
        let locs = generate_sample_locations(
            (160.0, 120.0),
            &SamplerConfig::default(),
            (40.0, 40.0),
            (320, 240),
        )
        .unwrap();
        assert_eq!(locs.positives.len(), expected);
        assert!(locs.positives.contains(&(160.0, 120.0)));
    }

    #[test]
    fn negatives_lie_in_ring_and_frame() {
        let cfg = SamplerConfig::default();
        let center = (5.0, 7.0);
        let locs = generate_sample_locations(center, &cfg, (40.0, 30.0), (320, 240)).unwrap();
        let zeta = 0.3 * 30.0;
        assert!(!locs.negatives.is_empty());
        for &(x, y) in locs.negatives.iter().chain(&locs.positives) {
            assert!((0.0..320.0).contains(&x) && (0.0..240.0).contains(&y));
        }
        for &(x, y) in &locs.negatives {
            let r = (x - center.0).hypot(y - center.1);
            assert!(r > zeta && r < cfg.beta);
        }
    }

    #[test]
    fn tiny_frame_has_no_negatives() {
        let err = generate_sample_locations((2.0, 2.0), &SamplerConfig::default(), (20.0, 20.0), (5, 5))
            .unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
    }

    #[test]
    fn training_set_matches_locations() {
        let frame = Image::from_fn(120, 100, 3, |x, y| {
            [(x * 2) as u8, (y * 2) as u8, ((x * y) % 251) as u8]
        })
        .unwrap();
        let state = TargetState::new(60.0, 50.0, 1.0);
        let cfg = SamplerConfig {
            beta: 30.0,
            ..SamplerConfig::default()
        };
        let enc = PatchEncoder {
            canonical: 32,
            mode: ColorMode::Color,
            divisor: 4,
            bmr_enabled: true,
        };
        let set = build_training_set(&frame, &state, (20.0, 20.0), &cfg, &enc).unwrap();
        let locs = generate_sample_locations((60.0, 50.0), &cfg, (20.0, 20.0), (120, 100)).unwrap();
        assert_eq!(set.count(Label::Positive), locs.positives.len());
        assert_eq!(set.count(Label::Negative), locs.negatives.len());
        assert_eq!(set.samples[0].label, Label::Positive);
        assert_eq!(set.samples.last().unwrap().label, Label::Negative);
        for s in &set.samples {
            assert_eq!(s.features.len(), 3792);
            let n = s.features.iter().map(|v| v * v).sum::<f64>();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
        }
    }
}
