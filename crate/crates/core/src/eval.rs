//! Benchmark metrics and protocols.
//!
//! Success curves count frames with overlap strictly above each threshold on
//! a 21-point grid over `[0, 1]`; precision curves count frames whose centre
//! error is at most each integer threshold in `0..=50` pixels. AUC is the
//! mean of the success curve.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchio::{Attribute, EvalBox, Sequence};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::tracker::{track_sequence, FrameRecord};

pub const SUCCESS_STEPS: usize = 20;
pub const PRECISION_MAX_PX: usize = 50;
pub const PRECISION_HEADLINE_PX: usize = 20;
pub const TRE_SEGMENTS: usize = 20;

pub fn overlap(bt: &EvalBox, bg: &EvalBox) -> f64 {
    let ix = (bt.x + bt.w).min(bg.x + bg.w) - bt.x.max(bg.x);
    let iy = (bt.y + bt.h).min(bg.y + bg.h) - bt.y.max(bg.y);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = bt.area() + bg.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn center_error(bt: &EvalBox, bg: &EvalBox) -> f64 {
    let (ax, ay) = bt.center();
    let (bx, by) = bg.center();
    (ax - bx).hypot(ay - by)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// Value at the grid point equal to `t`, if there is one.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&x| (x - t).abs() < 1e-12)
            .map(|i| self.values[i])
    }

    /// Pointwise mean of curves sharing one grid.
    pub fn mean_of(curves: &[Curve]) -> Result<Curve> {
        let first = curves.first().ok_or_else(|| Error::invalid("no curves to average"))?;
        let mut values = vec![0.0; first.values.len()];
        for c in curves {
            if c.thresholds != first.thresholds {
                return Err(Error::invalid("curves use different threshold grids"));
            }
            for (v, x) in values.iter_mut().zip(&c.values) {
                *v += x;
            }
        }
        values.iter_mut().for_each(|v| *v /= curves.len() as f64);
        Ok(Curve {
            thresholds: first.thresholds.clone(),
            values,
        })
    }
}

fn fraction(n: usize, total: usize) -> f64 {
    n as f64 / total as f64
}

pub fn success_curve(overlaps: &[f64]) -> Result<Curve> {
    if overlaps.is_empty() {
        return Err(Error::invalid("success curve needs at least one frame"));
    }
    let thresholds: Vec<f64> = (0..=SUCCESS_STEPS)
        .map(|i| i as f64 / SUCCESS_STEPS as f64)
        .collect();
    let values = thresholds
        .iter()
        .map(|&t| fraction(overlaps.iter().filter(|&&o| o > t).count(), overlaps.len()))
        .collect();
    Ok(Curve { thresholds, values })
}

pub fn precision_curve(errors: &[f64]) -> Result<Curve> {
    if errors.is_empty() {
        return Err(Error::invalid("precision curve needs at least one frame"));
    }
    let thresholds: Vec<f64> = (0..=PRECISION_MAX_PX).map(|t| t as f64).collect();
    let values = thresholds
        .iter()
        .map(|&t| fraction(errors.iter().filter(|&&e| e <= t).count(), errors.len()))
        .collect();
    Ok(Curve { thresholds, values })
}

pub fn auc(curve: &Curve) -> f64 {
    if curve.values.is_empty() {
        return 0.0;
    }
    curve.values.iter().sum::<f64>() / curve.values.len() as f64
}

/// Anything that can produce per-frame boxes for a sequence.
pub trait SequenceTracker: Sync {
    fn name(&self) -> &str;

    /// Runs from frame `start` (0-based) initialised with `init_box`; one
    /// record per frame from `start` to the end.
    fn run(&self, seq: &Sequence, start: usize, init_box: EvalBox, seed: u64) -> Result<Vec<FrameRecord>>;
}

/// The Boolean-map tracker under a fixed configuration.
#[derive(Debug, Clone)]
pub struct BmrTracker {
    pub config: RunConfig,
}

impl SequenceTracker for BmrTracker {
    fn name(&self) -> &str {
        "BMR"
    }

    fn run(&self, seq: &Sequence, start: usize, init_box: EvalBox, seed: u64) -> Result<Vec<FrameRecord>> {
        let cfg = RunConfig {
            seed,
            ..self.config.clone()
        };
        let mut records = track_sequence(seq.frames_from(start), init_box, &cfg)?;
        for r in &mut records {
            r.frame += start;
        }
        Ok(records)
    }
}

/// Replays the ground truth; an upper bound for every metric.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleTracker;

impl SequenceTracker for OracleTracker {
    fn name(&self) -> &str {
        "oracle"
    }

    fn run(&self, seq: &Sequence, start: usize, _init: EvalBox, _seed: u64) -> Result<Vec<FrameRecord>> {
        Ok(seq.groundtruth[start..]
            .iter()
            .enumerate()
            .map(|(i, b)| FrameRecord {
                frame: start + i,
                bbox: *b,
                confidence: 1.0,
                updated: false,
                lost: false,
            })
            .collect())
    }
}

/// Never moves from the initial box.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticTracker;

impl SequenceTracker for StaticTracker {
    fn name(&self) -> &str {
        "static"
    }

    fn run(&self, seq: &Sequence, start: usize, init: EvalBox, _seed: u64) -> Result<Vec<FrameRecord>> {
        Ok((start..seq.len())
            .map(|frame| FrameRecord {
                frame,
                bbox: init,
                confidence: 1.0,
                updated: false,
                lost: false,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    OPE,
    TRE,
    SRE,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::OPE => "OPE",
            Protocol::TRE => "TRE",
            Protocol::SRE => "SRE",
        })
    }
}

/// How several runs of one sequence are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Curves over the union of all evaluated frames.
    #[default]
    Frame,
    /// Mean of the per-run curves.
    Run,
}

/// Initial-box perturbation for spatial robustness runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    /// Shift by fractions of the box width and height.
    Shift { dx: f64, dy: f64 },
    /// Scale about the box centre.
    Scale(f64),
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation::Shift { dx: 0.0, dy: 0.0 };

    /// Eight shifts by 10% of the box size and four scale factors.
    pub fn standard() -> Vec<Perturbation> {
        let mut out = Vec::with_capacity(12);
        for (dx, dy) in [
            (-0.1, 0.0),
            (0.1, 0.0),
            (0.0, -0.1),
            (0.0, 0.1),
            (-0.1, -0.1),
            (0.1, -0.1),
            (-0.1, 0.1),
            (0.1, 0.1),
        ] {
            out.push(Perturbation::Shift { dx, dy });
        }
        for f in [0.8, 0.9, 1.1, 1.2] {
            out.push(Perturbation::Scale(f));
        }
        out
    }

    pub fn apply(&self, b: &EvalBox) -> EvalBox {
        match *self {
            Perturbation::Shift { dx, dy } => EvalBox::new(b.x + dx * b.w, b.y + dy * b.h, b.w, b.h),
            Perturbation::Scale(f) => {
                let (cx, cy) = b.center();
                EvalBox::from_center(cx, cy, b.w * f, b.h * f)
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Perturbation::Shift { dx, dy } => format!("shift({dx:+.2},{dy:+.2})"),
            Perturbation::Scale(f) => format!("scale({f:.2})"),
        }
    }
}

/// Clips a box to a `(width, height)` frame; returns whether it changed.
pub fn clip_to_frame(b: &EvalBox, frame: (usize, usize)) -> (EvalBox, bool) {
    let (fw, fh) = (frame.0 as f64, frame.1 as f64);
    let x0 = b.x.clamp(0.0, fw - 1.0);
    let y0 = b.y.clamp(0.0, fh - 1.0);
    let x1 = (b.x + b.w).clamp(x0 + 1.0, fw);
    let y1 = (b.y + b.h).clamp(y0 + 1.0, fh);
    let clipped = EvalBox::new(x0, y0, x1 - x0, y1 - y0);
    (clipped, clipped != *b)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub start_frame: usize,
    pub init_box: EvalBox,
    pub perturbation: Option<String>,
    pub seed: u64,
    pub frames: usize,
    pub auc: f64,
    pub precision_at_20: f64,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub records: Vec<FrameRecord>,
    #[serde(skip)]
    pub overlaps: Vec<f64>,
    #[serde(skip)]
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub sequence: String,
    pub tracker: String,
    pub protocol: Protocol,
    pub pooling: Pooling,
    pub seed: u64,
    pub attributes: Vec<Attribute>,
    pub frames_evaluated: usize,
    pub auc: f64,
    pub precision_at_20: f64,
    pub success_curve: Curve,
    pub precision_curve: Curve,
    pub flags: Vec<String>,
    pub runs: Vec<RunOutcome>,
}

impl EvalReport {
    /// Per-frame records of every run, in run order.
    pub fn records(&self) -> impl Iterator<Item = &FrameRecord> {
        self.runs.iter().flat_map(|r| r.records.iter())
    }
}

struct RunPlan {
    start: usize,
    init_box: EvalBox,
    perturbation: Option<String>,
    seed: u64,
    flags: Vec<String>,
}

fn execute(seq: &Sequence, tracker: &dyn SequenceTracker, plan: RunPlan) -> Result<RunOutcome> {
    let expected = seq.len() - plan.start;
    let mut flags = plan.flags;
    let records = match tracker.run(seq, plan.start, plan.init_box, plan.seed) {
        Ok(r) if r.len() == expected => r,
        Ok(r) => {
            return Err(Error::invalid(format!(
                "tracker {} returned {} records for {expected} frames",
                tracker.name(),
                r.len()
            )))
        }
        Err(e) => {
            flags.push(format!("tracker failed: {e}"));
            Vec::new()
        }
    };
    let lost = records.iter().filter(|r| r.lost).count();
    if lost > 0 {
        flags.push(format!("target lost on {lost} frame(s)"));
    }
    let (overlaps, errors): (Vec<f64>, Vec<f64>) = if records.is_empty() {
        // A failed run scores as a miss on every frame.
        (vec![0.0; expected], vec![f64::INFINITY; expected])
    } else {
        records
            .iter()
            .zip(&seq.groundtruth[plan.start..])
            .map(|(r, gt)| (overlap(&r.bbox, gt), center_error(&r.bbox, gt)))
            .unzip()
    };
    let s = success_curve(&overlaps)?;
    let p = precision_curve(&errors)?;
    Ok(RunOutcome {
        start_frame: plan.start,
        init_box: plan.init_box,
        perturbation: plan.perturbation,
        seed: plan.seed,
        frames: overlaps.len(),
        auc: auc(&s),
        precision_at_20: p.value_at(PRECISION_HEADLINE_PX as f64).unwrap_or(0.0),
        flags,
        records,
        overlaps,
        errors,
    })
}

fn assemble(
    seq: &Sequence,
    tracker: &dyn SequenceTracker,
    protocol: Protocol,
    pooling: Pooling,
    seed: u64,
    mut flags: Vec<String>,
    plans: Vec<RunPlan>,
) -> Result<EvalReport> {
    let runs = plans
        .into_par_iter()
        .map(|plan| execute(seq, tracker, plan))
        .collect::<Result<Vec<_>>>()?;
    let (success, precision) = match pooling {
        Pooling::Frame => {
            let overlaps: Vec<f64> = runs.iter().flat_map(|r| r.overlaps.iter().copied()).collect();
            let errors: Vec<f64> = runs.iter().flat_map(|r| r.errors.iter().copied()).collect();
            (success_curve(&overlaps)?, precision_curve(&errors)?)
        }
        Pooling::Run => {
            let s: Vec<Curve> = runs.iter().map(|r| success_curve(&r.overlaps)).collect::<Result<_>>()?;
            let p: Vec<Curve> = runs.iter().map(|r| precision_curve(&r.errors)).collect::<Result<_>>()?;
            (Curve::mean_of(&s)?, Curve::mean_of(&p)?)
        }
    };
    for r in &runs {
        flags.extend(r.flags.iter().map(|f| format!("run@{}: {f}", r.start_frame)));
    }
    Ok(EvalReport {
        sequence: seq.name.clone(),
        tracker: tracker.name().to_string(),
        protocol,
        pooling,
        seed,
        attributes: seq.attributes.clone(),
        frames_evaluated: runs.iter().map(|r| r.frames).sum(),
        auc: auc(&success),
        precision_at_20: precision.value_at(PRECISION_HEADLINE_PX as f64).unwrap_or(0.0),
        success_curve: success,
        precision_curve: precision,
        flags,
        runs,
    })
}

fn require_frames(seq: &Sequence) -> Result<()> {
    if seq.is_empty() || seq.groundtruth.len() != seq.len() {
        return Err(Error::invalid(format!(
            "sequence {} has {} frames and {} boxes",
            seq.name,
            seq.len(),
            seq.groundtruth.len()
        )));
    }
    Ok(())
}

/// One pass from the frame-1 ground truth.
pub fn run_ope(seq: &Sequence, tracker: &dyn SequenceTracker, seed: u64) -> Result<EvalReport> {
    require_frames(seq)?;
    let plan = RunPlan {
        start: 0,
        init_box: seq.groundtruth[0],
        perturbation: None,
        seed,
        flags: Vec::new(),
    };
    assemble(seq, tracker, Protocol::OPE, Pooling::Frame, seed, Vec::new(), vec![plan])
}

/// First frames of `segments` evenly spaced temporal segments.
pub fn segment_starts(len: usize, segments: usize) -> Vec<usize> {
    (0..segments).map(|i| i * len / segments).collect()
}

/// Restarts at evenly spaced frames, each from that frame's ground truth.
pub fn run_tre(
    seq: &Sequence,
    tracker: &dyn SequenceTracker,
    segments: usize,
    seed: u64,
    pooling: Pooling,
) -> Result<EvalReport> {
    require_frames(seq)?;
    if segments == 0 {
        return Err(Error::invalid("TRE needs at least one segment"));
    }
    let mut flags = Vec::new();
    let used = if seq.len() < segments {
        flags.push(format!(
            "sequence has {} frames; using {} segments instead of {segments}",
            seq.len(),
            seq.len()
        ));
        seq.len()
    } else {
        segments
    };
    let plans = segment_starts(seq.len(), used)
        .into_iter()
        .enumerate()
        .map(|(i, start)| RunPlan {
            start,
            init_box: seq.groundtruth[start],
            perturbation: None,
            seed: seed.wrapping_add(i as u64),
            flags: Vec::new(),
        })
        .collect();
    assemble(seq, tracker, Protocol::TRE, pooling, seed, flags, plans)
}

/// Spatially perturbed initialisations of frame 1 with the standard set.
pub fn run_sre(seq: &Sequence, tracker: &dyn SequenceTracker, seed: u64, pooling: Pooling) -> Result<EvalReport> {
    run_sre_with(seq, tracker, &Perturbation::standard(), seed, pooling)
}

pub fn run_sre_with(
    seq: &Sequence,
    tracker: &dyn SequenceTracker,
    perturbations: &[Perturbation],
    seed: u64,
    pooling: Pooling,
) -> Result<EvalReport> {
    require_frames(seq)?;
    if perturbations.is_empty() {
        return Err(Error::invalid("SRE needs at least one perturbation"));
    }
    let plans = perturbations
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (init_box, clipped) = clip_to_frame(&p.apply(&seq.groundtruth[0]), seq.frame_size);
            RunPlan {
                start: 0,
                init_box,
                perturbation: Some(p.label()),
                seed: seed.wrapping_add(i as u64),
                flags: if clipped {
                    vec!["initial box clipped to the frame".to_string()]
                } else {
                    Vec::new()
                },
            }
        })
        .collect();
    assemble(seq, tracker, Protocol::SRE, pooling, seed, Vec::new(), plans)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub name: String,
    pub auc: f64,
    pub precision_at_20: f64,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub attribute: Attribute,
    pub sequences: usize,
    pub auc: f64,
    pub precision_at_20: f64,
}

/// Dataset-level summary: unweighted means over sequences, overall and per attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tracker: String,
    pub protocol: Protocol,
    pub sequences: Vec<SequenceSummary>,
    pub auc: f64,
    pub precision_at_20: f64,
    pub attributes: Vec<AttributeSummary>,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or_else(|| Error::invalid("no reports to aggregate"))?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let sequences: Vec<SequenceSummary> = reports
        .iter()
        .map(|r| SequenceSummary {
            name: r.sequence.clone(),
            auc: r.auc,
            precision_at_20: r.precision_at_20,
            attributes: r.attributes.clone(),
        })
        .collect();
    let mut by_attr: BTreeMap<Attribute, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in &sequences {
        for &a in &s.attributes {
            let e = by_attr.entry(a).or_default();
            e.0.push(s.auc);
            e.1.push(s.precision_at_20);
        }
    }
    Ok(AggregateReport {
        tracker: first.tracker.clone(),
        protocol: first.protocol,
        auc: mean(&sequences.iter().map(|s| s.auc).collect::<Vec<_>>()),
        precision_at_20: mean(&sequences.iter().map(|s| s.precision_at_20).collect::<Vec<_>>()),
        attributes: by_attr
            .into_iter()
            .map(|(attribute, (a, p))| AttributeSummary {
                attribute,
                sequences: a.len(),
                auc: mean(&a),
                precision_at_20: mean(&p),
            })
            .collect(),
        sequences,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn curve_csv(curve: &Curve) -> String {
    let mut out = String::from("threshold,value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

/// `frame,x,y,w,h,confidence,updated`, 1-based frames, integer boxes.
pub fn boxes_csv(records: &[FrameRecord]) -> String {
    let mut out = String::from("frame,x,y,w,h,confidence,updated\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{}\n",
            r.frame + 1,
            r.bbox.x.round(),
            r.bbox.y.round(),
            r.bbox.w.round(),
            r.bbox.h.round(),
            r.confidence,
            u8::from(r.updated)
        ));
    }
    out
}

pub fn write_boxes_csv(path: &Path, records: &[FrameRecord]) -> Result<()> {
    write_file(path, &boxes_csv(records))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

/// `report.json`, `success_curve.csv`, `precision_curve.csv` and, for a
/// single-run report, `boxes.csv` under `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("report.json"), report)?;
    write_file(&dir.join("success_curve.csv"), &curve_csv(&report.success_curve))?;
    write_file(&dir.join("precision_curve.csv"), &curve_csv(&report.precision_curve))?;
    if let [run] = report.runs.as_slice() {
        write_boxes_csv(&dir.join("boxes.csv"), &run.records)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::FrameScale;
    use std::path::PathBuf;

    fn b(x: f64, y: f64, w: f64, h: f64) -> EvalBox {
        EvalBox::new(x, y, w, h)
    }

    #[test]
    fn overlap_hand_cases() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(overlap(&a, &a), 1.0);
        assert_eq!(overlap(&a, &b(20.0, 0.0, 5.0, 5.0)), 0.0);
        assert!((overlap(&a, &b(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap(&b(0.0, 0.0, 0.0, 0.0), &b(0.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn center_error_hand_cases() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(center_error(&a, &a), 0.0);
        let c = b(3.0, 4.0, 10.0, 10.0);
        assert_eq!(center_error(&a, &c), 5.0);
        assert_eq!(center_error(&c, &a), 5.0);
    }

    #[test]
    fn success_curve_is_strict() {
        let c = success_curve(&[1.0, 1.0]).unwrap();
        assert_eq!(c.thresholds.len(), 21);
        assert!(c.values[..20].iter().all(|&v| v == 1.0));
        assert_eq!(c.values[20], 0.0);
        let c = success_curve(&[0.3, 0.7]).unwrap();
        assert_eq!(c.value_at(0.5), Some(0.5));
        assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(success_curve(&[]).is_err());
    }

    #[test]
    fn precision_curve_is_inclusive() {
        let c = precision_curve(&[0.0, 10.0, 30.0]).unwrap();
        assert!((c.value_at(20.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.value_at(10.0), Some(2.0 / 3.0));
        assert!(c.values.windows(2).all(|w| w[1] >= w[0]));
        let z = precision_curve(&[0.0; 4]).unwrap();
        assert!(z.values.iter().all(|&v| v == 1.0));
        assert!(precision_curve(&[]).is_err());
    }

    #[test]
    fn auc_hand_cases() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let curve = |values: Vec<f64>| Curve {
            thresholds: grid.clone(),
            values,
        };
        assert_eq!(auc(&curve(vec![0.5; 21])), 0.5);
        assert_eq!(auc(&curve(vec![1.0; 21])), 1.0);
        let linear = curve(grid.iter().map(|t| 1.0 - t).collect());
        assert!((auc(&linear) - 0.5).abs() < 1e-15);
    }

    fn toy_sequence(n: usize) -> Sequence {
        Sequence {
            name: "toy".into(),
            dir: PathBuf::new(),
            frames: (0..n).map(|i| PathBuf::from(format!("{i}.png"))).collect(),
            groundtruth: (0..n).map(|i| b(10.0 + 4.0 * i as f64, 20.0, 20.0, 20.0)).collect(),
            attributes: vec![Attribute::FM],
            color: true,
            frame_size: (320, 240),
            scale: FrameScale::IDENTITY,
        }
    }

    #[test]
    fn oracle_bounds_static() {
        let seq = toy_sequence(30);
        let oracle = run_ope(&seq, &OracleTracker, 0).unwrap();
        let stat = run_ope(&seq, &StaticTracker, 0).unwrap();
        assert!((oracle.auc - 20.0 / 21.0).abs() < 1e-15);
        assert_eq!(oracle.precision_at_20, 1.0);
        assert!(stat.auc < oracle.auc);
        assert_eq!(oracle.records().count(), 30);
    }

    #[test]
    fn tre_single_segment_equals_ope() {
        let seq = toy_sequence(25);
        let ope = run_ope(&seq, &StaticTracker, 0).unwrap();
        let tre = run_tre(&seq, &StaticTracker, 1, 0, Pooling::Frame).unwrap();
        assert_eq!(ope.success_curve, tre.success_curve);
        assert_eq!(ope.precision_curve, tre.precision_curve);
    }

    #[test]
    fn tre_pools_by_frame() {
        let seq = toy_sequence(10);
        let tre = run_tre(&seq, &StaticTracker, 2, 0, Pooling::Frame).unwrap();
        assert_eq!(segment_starts(10, 2), vec![0, 5]);
        assert_eq!(tre.frames_evaluated, 10 + 5);
        // Hand pooling of the two segments.
        let mut overlaps = Vec::new();
        for start in [0, 5] {
            for i in start..10 {
                overlaps.push(overlap(&seq.groundtruth[start], &seq.groundtruth[i]));
            }
        }
        assert_eq!(tre.success_curve, success_curve(&overlaps).unwrap());
        let run_avg = run_tre(&seq, &StaticTracker, 2, 0, Pooling::Run).unwrap();
        let manual = Curve::mean_of(&[
            success_curve(&overlaps[..10]).unwrap(),
            success_curve(&overlaps[10..]).unwrap(),
        ])
        .unwrap();
        assert_eq!(run_avg.success_curve, manual);
    }

    #[test]
    fn tre_short_sequence_is_flagged() {
        let seq = toy_sequence(5);
        let tre = run_tre(&seq, &StaticTracker, 20, 0, Pooling::Frame).unwrap();
        assert_eq!(tre.runs.len(), 5);
        assert!(!tre.flags.is_empty());
    }

    #[test]
    fn sre_runs_and_perturbations() {
        let seq = toy_sequence(8);
        let sre = run_sre(&seq, &StaticTracker, 3, Pooling::Frame).unwrap();
        assert_eq!(sre.runs.len(), 12);
        let gt = seq.groundtruth[0];
        let right = Perturbation::Shift { dx: 0.1, dy: 0.0 }.apply(&gt);
        assert!((right.x - gt.x - 0.1 * gt.w).abs() < 1e-12);
        let down = Perturbation::Shift { dx: 0.0, dy: 0.1 }.apply(&gt);
        assert!((down.y - gt.y - 0.1 * gt.h).abs() < 1e-12);
        let big = Perturbation::Scale(1.2).apply(&gt);
        assert_eq!(big.center(), gt.center());
        assert!((big.w - 1.2 * gt.w).abs() < 1e-12);

        let zero = run_sre_with(&seq, &StaticTracker, &[Perturbation::NONE], 3, Pooling::Frame).unwrap();
        let ope = run_ope(&seq, &StaticTracker, 3).unwrap();
        assert_eq!(zero.success_curve, ope.success_curve);
        assert_eq!(zero.auc, ope.auc);
    }

    #[test]
    fn clipping_flags_boxes_leaving_frame() {
        let (clipped, changed) = clip_to_frame(&b(-5.0, 10.0, 20.0, 20.0), (100, 100));
        assert!(changed);
        assert_eq!(clipped, b(0.0, 10.0, 15.0, 20.0));
        let (same, changed) = clip_to_frame(&b(5.0, 10.0, 20.0, 20.0), (100, 100));
        assert!(!changed);
        assert_eq!(same, b(5.0, 10.0, 20.0, 20.0));
    }

    #[test]
    fn aggregate_means_over_sequences() {
        let mut s1 = toy_sequence(10);
        s1.name = "a".into();
        let mut s2 = toy_sequence(12);
        s2.name = "b".into();
        s2.attributes = vec![Attribute::OCC];
        let r1 = run_ope(&s1, &StaticTracker, 0).unwrap();
        let r2 = run_ope(&s2, &StaticTracker, 0).unwrap();
        let agg = aggregate(&[r1.clone(), r2.clone()]).unwrap();
        assert!((agg.auc - (r1.auc + r2.auc) / 2.0).abs() < 1e-15);
        assert_eq!(agg.attributes.len(), 2);
    }

    #[test]
    fn boxes_csv_layout() {
        let rec = FrameRecord {
            frame: 0,
            bbox: b(1.4, 2.6, 30.0, 40.5),
            confidence: 0.5,
            updated: true,
            lost: false,
        };
        assert_eq!(
            boxes_csv(&[rec]),
            "frame,x,y,w,h,confidence,updated\n1,1,3,30,41,0.500000,1\n"
        );
    }
}
