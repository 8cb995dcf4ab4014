//! Built-in property suites behind the `selftest` command.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchio::{EvalBox, Sequence};
use crate::bmr::{self, BmrVector};
use crate::classifier::{gradient, loss, ClassifierState, Label, Sample, TrainingSet};
use crate::eval::{auc, center_error, overlap, run_ope, Curve, OracleTracker};
use crate::imgproc::FrameScale;

/// Deliberate defects for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Shifts features down by 0.3 before encoding.
    EncodeShift,
}

#[derive(Debug, Clone)]
pub struct SelfTestOptions {
    pub seed: u64,
    pub bound_cases: usize,
    pub kernel_cases: usize,
    pub norm_cases: usize,
    pub gradient_cases: usize,
    pub fault: Option<Fault>,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            bound_cases: 10_000,
            kernel_cases: 1_000,
            norm_cases: 1_000,
            gradient_cases: 100,
            fault: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub seconds: f64,
    pub detail: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct SelfTestReport {
    pub results: Vec<PropertyResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(PropertyResult::passed)
    }
}

impl fmt::Display for SelfTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<26} {:>8} {:>9} {:>9}  status", "property", "cases", "failures", "seconds")?;
        for r in &self.results {
            writeln!(
                f,
                "{:<26} {:>8} {:>9} {:>9.3}  {}",
                r.name,
                r.cases,
                r.failures,
                r.seconds,
                if r.passed() { "PASS" } else { "FAIL" }
            )?;
            if let Some(d) = &r.detail {
                writeln!(f, "    first failure: {d}")?;
            }
        }
        Ok(())
    }
}

struct Tally {
    cases: usize,
    failures: usize,
    detail: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            cases: 0,
            failures: 0,
            detail: None,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(detail());
            }
        }
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Tally) -> PropertyResult {
    let t0 = Instant::now();
    let t = f();
    PropertyResult {
        name,
        cases: t.cases,
        failures: t.failures,
        seconds: t0.elapsed().as_secs_f64(),
        detail: t.detail,
    }
}

const C: usize = 4;

fn encode_with(phi: &[f64], fault: Option<Fault>) -> BmrVector {
    let shifted: Vec<f64>;
    let input = match fault {
        Some(Fault::EncodeShift) => {
            shifted = phi.iter().map(|v| (v - 0.3).max(0.0)).collect();
            &shifted
        }
        None => phi,
    };
    bmr::encode_slice(input, C).expect("inputs lie in [0, 1]")
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn random_grid(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0..C) as f64 / C as f64).collect()
}

/// `0 <= phi - phi_hat <= 1/c`, strictly below `1/c` unless `phi == 1`.
pub fn check_quantization_bound(opts: &SelfTestOptions) -> PropertyResult {
    timed("quantization bound", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let delta = 1.0 / C as f64;
        let mut t = Tally::new();
        for case in 0..opts.bound_cases {
            let mut phi = random_unit(&mut rng, 64);
            // Exercise the grid points and both ends.
            phi[0] = 0.0;
            phi[1] = 1.0;
            phi[2] = rng.random_range(0..=C) as f64 / C as f64;
            let hat = bmr::reconstruct(&encode_with(&phi, opts.fault)).expect("unnormalised");
            let bad = phi.iter().zip(&hat).position(|(&p, &h)| {
                let e = p - h;
                !(e >= 0.0 && e <= delta && (p >= 1.0 || e < delta))
            });
            t.check(bad.is_none(), || {
                let k = bad.unwrap();
                format!("case {case}, entry {k}: phi={} phi_hat={}", phi[k], hat[k])
            });
        }
        t
    })
}

/// Explicit-map inner product against the intersection kernel.
pub fn check_kernel_equivalence(opts: &SelfTestOptions) -> PropertyResult {
    timed("kernel equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6b65_726e);
        let d = 64;
        let mut t = Tally::new();
        for case in 0..opts.kernel_cases {
            let (x, y) = (random_grid(&mut rng, d), random_grid(&mut rng, d));
            let explicit = encode_with(&x, opts.fault).dot(&encode_with(&y, opts.fault)).unwrap();
            let exact = bmr::intersection_kernel(&x, &y).unwrap();
            t.check((explicit - exact).abs() < 1e-12, || {
                format!("on-grid case {case}: {explicit} vs {exact}")
            });

            let (x, y) = (random_unit(&mut rng, d), random_unit(&mut rng, d));
            let explicit = encode_with(&x, opts.fault).dot(&encode_with(&y, opts.fault)).unwrap();
            let exact = bmr::intersection_kernel(&x, &y).unwrap();
            let bound = d as f64 / C as f64;
            t.check((explicit - exact).abs() <= bound, || {
                format!("off-grid case {case}: |{explicit} - {exact}| > {bound}")
            });
        }
        t
    })
}

/// Normalised nonzero encodings have unit norm.
pub fn check_normalization(opts: &SelfTestOptions) -> PropertyResult {
    timed("map normalization", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6e6f_726d);
        let mut t = Tally::new();
        for case in 0..opts.norm_cases {
            let d = rng.random_range(1..=128);
            let phi = random_unit(&mut rng, d);
            let b = bmr::normalize(encode_with(&phi, opts.fault));
            let sq: f64 = b.as_slice().iter().map(|v| v * v).sum();
            if sq == 0.0 {
                continue;
            }
            t.check((sq - 1.0).abs() <= 1e-12, || format!("case {case}: squared norm {sq}"));
        }
        t
    })
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt())
        .max(1e-12);
    diff / scale
}

/// Analytic gradient against central finite differences.
pub fn check_gradient(opts: &SelfTestOptions) -> PropertyResult {
    timed("loss gradient", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6772_6164);
        let mut t = Tally::new();
        let h = 1e-6;
        for case in 0..opts.gradient_cases {
            let dim = rng.random_range(1..=50);
            let n = rng.random_range(1..=30);
            let samples = (0..n)
                .map(|_| Sample {
                    features: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    label: if rng.random::<bool>() { Label::Positive } else { Label::Negative },
                })
                .collect();
            let data = TrainingSet::new(samples);
            let w = ClassifierState {
                w: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            let analytic = gradient(&w, &data).unwrap();
            let numeric: Vec<f64> = (0..dim)
                .map(|k| {
                    let mut plus = w.clone();
                    let mut minus = w.clone();
                    plus.w[k] += h;
                    minus.w[k] -= h;
                    (loss(&plus, &data).unwrap() - loss(&minus, &data).unwrap()) / (2.0 * h)
                })
                .collect();
            let err = relative_error(&analytic, &numeric);
            t.check(err < 1e-5, || format!("case {case} (dim {dim}): relative error {err:e}"));
        }
        t
    })
}

/// Hand-computed overlap, centre error and AUC values, plus an oracle run.
pub fn check_metric_oracles(_opts: &SelfTestOptions) -> PropertyResult {
    timed("metric oracles", || {
        let mut t = Tally::new();
        let a = EvalBox::new(0.0, 0.0, 10.0, 10.0);
        let cases = [
            (overlap(&a, &a), 1.0),
            (overlap(&a, &EvalBox::new(20.0, 20.0, 5.0, 5.0)), 0.0),
            (overlap(&a, &EvalBox::new(5.0, 0.0, 10.0, 10.0)), 50.0 / 150.0),
            (center_error(&a, &EvalBox::new(3.0, 4.0, 10.0, 10.0)), 5.0),
        ];
        for (i, (got, want)) in cases.into_iter().enumerate() {
            t.check((got - want).abs() < 1e-15, || format!("hand case {i}: {got} vs {want}"));
        }
        let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let flat = Curve {
            thresholds: thresholds.clone(),
            values: vec![0.5; 21],
        };
        t.check(auc(&flat) == 0.5, || "constant curve AUC".into());

        let n = 25;
        let seq = Sequence {
            name: "oracle".into(),
            dir: PathBuf::new(),
            frames: vec![PathBuf::new(); n],
            groundtruth: (0..n)
                .map(|i| EvalBox::new(5.0 + 2.0 * i as f64, 8.0, 30.0, 20.0))
                .collect(),
            attributes: Vec::new(),
            color: false,
            frame_size: (320, 240),
            scale: FrameScale::IDENTITY,
        };
        match run_ope(&seq, &OracleTracker, 0) {
            Ok(r) => {
                t.check(r.precision_at_20 == 1.0, || format!("oracle precision {}", r.precision_at_20));
                let below_one = r
                    .success_curve
                    .thresholds
                    .iter()
                    .zip(&r.success_curve.values)
                    .all(|(&th, &v)| th >= 1.0 || v == 1.0);
                t.check(below_one, || "oracle success below 1 at a threshold < 1".into());
            }
            Err(e) => t.check(false, || format!("oracle run failed: {e}")),
        }
        t
    })
}

pub fn run_all(opts: &SelfTestOptions) -> SelfTestReport {
    SelfTestReport {
        results: vec![
            check_quantization_bound(opts),
            check_kernel_equivalence(opts),
            check_normalization(opts),
            check_gradient(opts),
            check_metric_oracles(opts),
        ],
    }
}
