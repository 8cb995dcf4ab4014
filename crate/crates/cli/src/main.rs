use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bmrtrack::benchio::{decode_image, list_frames, list_sequences, load_sequence, read_manifest};
use bmrtrack::eval::{
    aggregate, run_ope, run_sre, run_tre, write_boxes_csv, write_json, write_report, BmrTracker, EvalReport,
    OracleTracker, Pooling, SequenceTracker, StaticTracker, TRE_SEGMENTS,
};
use bmrtrack::selftest::{run_all, Fault, SelfTestOptions};
use bmrtrack::{track_sequence, BBox, RunConfig, VERSION};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

const DATASET_ENV: &str = "BMRTRACK_DATASET";

#[derive(Parser, Debug)]
#[command(name = "bmrtrack", version, about = "Boolean-map particle-filter tracker and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track a target through one sequence directory.
    Track(TrackArgs),
    /// Run a benchmark protocol over dataset sequences.
    Eval(EvalArgs),
    /// Run the built-in property suites.
    Selftest(SelftestArgs),
    /// Print the effective configuration as JSON.
    Config(ConfigArgs),
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args, Debug)]
struct TrackArgs {
    /// Sequence directory with an `img/` folder.
    #[arg(long)]
    seq: PathBuf,
    /// Initial box `x,y,w,h`; defaults to the first ground-truth box.
    #[arg(long, value_parser = parse_box)]
    init: Option<BBox>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "bmrtrack-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Ope,
    Tre,
    Sre,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrackerKind {
    Bmr,
    Oracle,
    Static,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolingArg {
    Frame,
    Run,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    /// Dataset root holding one directory per sequence.
    #[arg(long, env = DATASET_ENV)]
    root: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Comma-separated sequence names; all sequences when omitted.
    #[arg(long, value_delimiter = ',')]
    seqs: Vec<String>,
    #[arg(long, value_enum, default_value = "bmr")]
    tracker: TrackerKind,
    /// How TRE/SRE runs are pooled into one curve.
    #[arg(long, value_enum, default_value = "frame")]
    pooling: PoolingArg,
    #[arg(long, default_value_t = TRE_SEGMENTS)]
    segments: usize,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "bmrtrack-eval")]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test hook: corrupts the encoder so the bound check must fail.
    #[arg(long, hide = true)]
    inject_encode_fault: bool,
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    /// Configuration file to validate and echo.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_box(s: &str) -> Result<BBox, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected x,y,w,h: {e}"))?;
    match parts.as_slice() {
        &[x, y, w, h] if w >= 1.0 && h >= 1.0 => Ok(BBox::new(x, y, w, h)),
        &[_, _, _, _] => Err("box width and height must be at least 1".into()),
        _ => Err(format!("expected 4 comma-separated numbers, got {}", parts.len())),
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    sequence: String,
    frames: usize,
    init_box: BBox,
    seed: u64,
    config: &'a RunConfig,
}

fn cmd_track(args: &TrackArgs) -> Result<()> {
    let cfg = args.overrides.resolve()?;
    let (frames, init) = match args.init {
        Some(b) => (list_frames(&args.seq, &read_manifest(&args.seq)?)?, b),
        None => {
            let seq = load_sequence(&args.seq)?;
            let first = seq.groundtruth[0];
            (seq.frames, first)
        }
    };
    let records = track_sequence(frames.iter().map(|p| decode_image(p)), init, &cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_boxes_csv(&args.out.join("boxes.csv"), &records)?;
    let manifest = RunManifest {
        version: VERSION,
        sequence: args.seq.display().to_string(),
        frames: records.len(),
        init_box: init,
        seed: cfg.seed,
        config: &cfg,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    let lost = records.iter().filter(|r| r.lost).count();
    let updates = records.iter().filter(|r| r.updated).count();
    println!(
        "tracked {} frames ({updates} updates, {lost} lost) -> {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn select_sequences(root: &Path, wanted: &[String]) -> Result<Vec<String>> {
    let available = list_sequences(root)?;
    if available.is_empty() {
        bail!("no sequences under {}", root.display());
    }
    if wanted.is_empty() {
        return Ok(available);
    }
    for name in wanted {
        if !available.contains(name) {
            bail!("sequence not found: {name}; available: {}", available.join(", "));
        }
    }
    Ok(wanted.to_vec())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.overrides.resolve()?;
    let names = select_sequences(&args.root, &args.seqs)?;
    let tracker: Box<dyn SequenceTracker> = match args.tracker {
        TrackerKind::Bmr => Box::new(BmrTracker { config: cfg.clone() }),
        TrackerKind::Oracle => Box::new(OracleTracker),
        TrackerKind::Static => Box::new(StaticTracker),
    };
    let pooling = match args.pooling {
        PoolingArg::Frame => Pooling::Frame,
        PoolingArg::Run => Pooling::Run,
    };
    let mut reports: Vec<EvalReport> = Vec::with_capacity(names.len());
    for name in &names {
        let seq = load_sequence(&args.root.join(name))?;
        let report = match args.mode {
            Mode::Ope => run_ope(&seq, tracker.as_ref(), cfg.seed)?,
            Mode::Tre => run_tre(&seq, tracker.as_ref(), args.segments, cfg.seed, pooling)?,
            Mode::Sre => run_sre(&seq, tracker.as_ref(), cfg.seed, pooling)?,
        };
        write_report(&args.out.join(name), &report)?;
        println!(
            "{:<20} {} AUC {:.4}  P@20 {:.4}{}",
            name,
            report.protocol,
            report.auc,
            report.precision_at_20,
            if report.flags.is_empty() { "" } else { "  (flagged)" }
        );
        reports.push(report);
    }
    let agg = aggregate(&reports)?;
    write_json(&args.out.join("aggregate.json"), &agg)?;
    println!(
        "{:<20} {} AUC {:.4}  P@20 {:.4}",
        "mean",
        agg.protocol,
        agg.auc,
        agg.precision_at_20
    );
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> Result<bool> {
    let opts = SelfTestOptions {
        seed: args.seed,
        fault: args.inject_encode_fault.then_some(Fault::EncodeShift),
        ..SelfTestOptions::default()
    };
    let report = run_all(&opts);
    print!("{report}");
    Ok(report.passed())
}

fn cmd_config(args: &ConfigArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    println!("{}", cfg.to_json());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Track(a) => cmd_track(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Selftest(a) => cmd_selftest(a),
        Command::Config(a) => cmd_config(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
