//! Subcommands. Outputs go to `--out` when given, otherwise to stdout.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcmot_core::geometry::{compose_ceiling_to_angled, estimate_dlt, reprojection_error, RansacParams};
use mcmot_core::global_tracker::{AlignParams, Camera, GlobalConfig, RegistryConfig};
use mcmot_core::local_tracker::{track_stream, TrackRecord, TrackerConfig};
use mcmot_core::metrics::{cha, evaluate, AnnotatedBox, ChaInput, IdentityScope, MetricsError, DEFAULT_IOU_THRESHOLD};
use mcmot_core::simulator::{simulate, PenConfig};

use crate::config::load_pen;
use crate::error::{CliError, Result};
use crate::formats;
use crate::io::{self, write_text};
use crate::pipeline;
use crate::report::render_metrics;

#[derive(Debug, Parser)]
#[command(name = "mcmot", version, about = "Two-camera multi-object tracking with homography handover")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic pen into a scene bundle.
    Simulate(SimulateArgs),
    /// Fit the ceiling→angled homography to a correspondence file.
    EstimateHomography(EstimateArgs),
    /// Build ceiling→angled from two top-view rectifications and their registration.
    ComposeHomography(ComposeArgs),
    /// Local tracking of one detection stream.
    Track(TrackArgs),
    /// Cross-view matching and global IDs for two local track files.
    Align(AlignArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Run every stage from one config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Pen description (TOML); defaults apply without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ransac,
    Dlt,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Lines of `src_x src_y dst_x dst_y`.
    pub correspondences: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Ransac)]
    pub method: Method,
    #[arg(long, default_value_t = RansacParams::DEFAULT_THRESHOLD_PX)]
    pub ransac_threshold: f64,
    #[arg(long, default_value_t = RansacParams::DEFAULT_ITERATIONS)]
    pub ransac_iters: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub ceiling_to_top: PathBuf,
    #[arg(long)]
    pub angled_to_top: PathBuf,
    /// Registration of the ceiling top view onto the angled top view.
    #[arg(long)]
    pub top_to_top: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    pub detections: PathBuf,
    /// Appearance vectors, one line per detection.
    #[arg(long)]
    pub appearance: Option<PathBuf>,
    #[arg(long)]
    pub confirm_hits: Option<u32>,
    #[arg(long)]
    pub max_age: Option<u32>,
    #[arg(long)]
    pub gate: Option<f64>,
    #[arg(long)]
    pub appearance_weight: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub ceiling: PathBuf,
    #[arg(long)]
    pub angled: PathBuf,
    /// Ceiling→angled homography file.
    #[arg(long)]
    pub homography: PathBuf,
    /// Angled frame `f + offset` is aligned with ceiling frame `f`.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub offset: i64,
    /// Overlaps below this area (px²) are ignored.
    #[arg(long, default_value_t = 0.0)]
    pub min_area: f64,
    /// Also retire the ceiling row after each match.
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long)]
    pub solo_grace: Option<u32>,
    #[arg(long)]
    pub expiry: Option<u32>,
    /// Global track CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub matches: Option<PathBuf>,
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    PerCamera,
    Global,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground truth (`camera,frame,identity,...`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Global track CSV. Without it the local track files are scored
    /// with per-camera identities.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub ceiling_tracks: Option<PathBuf>,
    #[arg(long)]
    pub angled_tracks: Option<PathBuf>,
    /// Cross-view matches; enables CHA.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub gt_offset: i64,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    #[arg(long, value_enum)]
    pub scope: Option<Scope>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        }),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::EstimateHomography(a) => run_estimate(a),
        Command::ComposeHomography(a) => run_compose(a),
        Command::Track(a) => run_track(a),
        Command::Align(a) => run_align(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Pipeline(a) => run_pipeline(a),
    }
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let mut pen = match &a.config {
        Some(p) => load_pen(p)?,
        None => PenConfig::default(),
    };
    if let Some(s) = a.seed {
        pen.seed = s;
    }
    let bundle = simulate(&pen).map_err(|e| CliError::Config(e.to_string()))?;
    io::write_bundle(&a.out, &bundle, &pen)?;
    Ok(())
}

fn run_estimate(a: &EstimateArgs) -> Result<()> {
    if !(a.ransac_threshold > 0.0) || a.ransac_iters == 0 {
        return Err(CliError::Config("--ransac-threshold and --ransac-iters must be positive".into()));
    }
    let pairs = io::load_correspondences(&a.correspondences)?;
    let params = RansacParams {
        threshold_px: a.ransac_threshold,
        iterations: a.ransac_iters,
        seed: a.seed,
    };
    let (h, n) = match a.method {
        Method::Ransac => pipeline::estimate(&pairs, &params)?,
        Method::Dlt => {
            let h = estimate_dlt(&pairs).map_err(|e| CliError::Estimation(e.to_string()))?;
            let n = pairs.iter().filter(|p| reprojection_error(&h, p) <= a.ransac_threshold).count();
            (h, n)
        }
    };
    let note = format!("inliers {n}/{}", pairs.len());
    emit(a.out.as_deref(), &formats::write_homography(&h, Some(&note)))
}

fn run_compose(a: &ComposeArgs) -> Result<()> {
    let h = compose_ceiling_to_angled(
        &io::load_homography(&a.ceiling_to_top)?,
        &io::load_homography(&a.angled_to_top)?,
        &io::load_homography(&a.top_to_top)?,
    )
    .map_err(|e| CliError::Estimation(e.to_string()))?;
    emit(a.out.as_deref(), &formats::write_homography(&h, None))
}

fn run_track(a: &TrackArgs) -> Result<()> {
    let d = TrackerConfig::default();
    let cfg = TrackerConfig {
        confirm_hits: a.confirm_hits.unwrap_or(d.confirm_hits),
        max_age: a.max_age.unwrap_or(d.max_age),
        gate: a.gate.unwrap_or(d.gate),
        appearance_weight: a.appearance_weight.unwrap_or(d.appearance_weight),
        ..d
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let dets = io::load_detections(&a.detections, a.appearance.as_deref())?;
    let tracks = track_stream(&dets, &cfg).map_err(|e| CliError::Invalid(e.to_string()))?;
    emit(a.out.as_deref(), &formats::write_tracks(&tracks))
}

fn run_align(a: &AlignArgs) -> Result<()> {
    if !(a.min_area >= 0.0) {
        return Err(CliError::Config("--min-area must be non-negative".into()));
    }
    let r = RegistryConfig::default();
    let cfg = GlobalConfig {
        align: AlignParams {
            min_area_px2: a.min_area,
            symmetric: a.symmetric,
        },
        registry: RegistryConfig {
            solo_grace: a.solo_grace.unwrap_or(r.solo_grace),
            expiry: a.expiry.unwrap_or(r.expiry),
        },
        audit: a.audit.is_some(),
    };
    let tracks = [io::load_tracks(&a.ceiling)?, io::load_tracks(&a.angled)?];
    let h = io::load_homography(&a.homography)?;
    let run = pipeline::align(&tracks, &h, a.offset, &cfg)?;
    if let Some(p) = &a.matches {
        write_text(p, &formats::write_matches(&run.matches))?;
    }
    if let Some(p) = &a.audit {
        write_text(p, &run.audit)?;
    }
    emit(a.out.as_deref(), &formats::write_global(&run.records))
}

fn annotate(camera: Camera, tracks: &[TrackRecord]) -> impl Iterator<Item = AnnotatedBox> + '_ {
    tracks.iter().map(move |t| AnnotatedBox {
        camera,
        frame: t.frame,
        identity: t.local_id.0,
        bbox: t.bbox,
    })
}

fn run_evaluate(a: &EvaluateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.iou_threshold) {
        return Err(CliError::Config("--iou-threshold must be in [0, 1]".into()));
    }
    let gt = io::load_annotated(&a.gt)?;
    let load = |p: &Option<PathBuf>| p.as_deref().map(io::load_tracks).transpose().map(Option::unwrap_or_default);
    let ceiling = load(&a.ceiling_tracks)?;
    let angled = load(&a.angled_tracks)?;
    let (pred, default_scope) = match &a.pred {
        Some(p) => (io::load_annotated(p)?, Scope::Global),
        None if a.ceiling_tracks.is_none() && a.angled_tracks.is_none() => {
            return Err(CliError::Config("give --pred or local track files".into()))
        }
        None => {
            let mut v: Vec<_> = annotate(Camera::Ceiling, &ceiling).chain(annotate(Camera::Angled, &angled)).collect();
            v.sort_by_key(|b| (b.camera, b.frame, b.identity));
            (v, Scope::PerCamera)
        }
    };
    let scope = match a.scope.unwrap_or(default_scope) {
        Scope::PerCamera => IdentityScope::PerCamera,
        Scope::Global => IdentityScope::Global,
    };
    let mut report = evaluate(&gt, &pred, a.iou_threshold, scope).map_err(|e| CliError::Invalid(format!("{}: {e}", a.gt.display())))?;
    if let Some(m) = &a.matches {
        let matches = io::load_matches(m)?;
        report.cha = match cha(&ChaInput {
            gt: &gt,
            ceiling_tracks: &ceiling,
            angled_tracks: &angled,
            matches: &matches,
            gt_offset: a.gt_offset,
            iou_threshold: a.iou_threshold,
        }) {
            Ok(r) => Some(r),
            Err(MetricsError::NoGroundTruthPairs) => None,
            Err(e) => return Err(CliError::Invalid(e.to_string())),
        };
    }
    emit(a.out.as_deref(), &render_metrics(&report))
}

fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let report = pipeline::run_file(&a.config, a.out.as_deref())?;
    eprint!("{}", report.render_timings());
    emit(None, &report.render())
}
