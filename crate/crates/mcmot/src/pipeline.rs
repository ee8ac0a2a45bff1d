//! simulate or ingest → track per camera → align → evaluate → report.

use std::path::Path;
use std::thread;
use std::time::Instant;

use mcmot_core::geometry::{estimate_ransac, Correspondence, Homography, RansacParams};
use mcmot_core::global_tracker::{run_global, GlobalConfig, GlobalRun, StreamAlignment};
use mcmot_core::local_tracker::{track_stream, Detection, TrackRecord, TrackerConfig};
use mcmot_core::metrics::{cha, evaluate, AnnotatedBox, ChaInput, MetricsError, MetricsReport};
use mcmot_core::simulator::simulate;

use crate::config::{MetricsConfig, PipelineConfig};
use crate::error::{CliError, Result};
use crate::formats;
use crate::io::{self, write_text};
use crate::report::{RunReport, StageCounts};

pub const SCENE_DIR: &str = "scene";
pub const HOMOGRAPHY_FILE: &str = "homography.txt";
pub const CEILING_TRACKS: &str = "ceiling_tracks.csv";
pub const ANGLED_TRACKS: &str = "angled_tracks.csv";
pub const GLOBAL_TRACKS: &str = "global_tracks.csv";
pub const MATCHES: &str = "matches.csv";
pub const AUDIT: &str = "audit.txt";
pub const REPORT: &str = "report.txt";

struct Inputs {
    detections: [Vec<Detection>; 2],
    ground_truth: Option<Vec<AnnotatedBox>>,
    gt_offset: i64,
    correspondences: Option<Vec<Correspondence>>,
    exact: Option<Homography>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    if let Some(pen) = &cfg.simulate {
        let mut pen = pen.clone();
        if let Some(seed) = cfg.seed {
            pen.seed = seed;
        }
        let bundle = simulate(&pen).map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        io::write_bundle(&cfg.output_dir.join(SCENE_DIR), &bundle, &pen)?;
        return Ok(Inputs {
            detections: [bundle.ceiling_detections, bundle.angled_detections],
            ground_truth: Some(bundle.ground_truth),
            gt_offset: pen.angled_frame_offset,
            correspondences: Some(bundle.correspondences),
            exact: Some(bundle.h_ceiling_to_angled),
        });
    }
    let s = cfg.streams.as_ref().ok_or_else(|| CliError::Config("missing input".into()))?;
    Ok(Inputs {
        detections: [
            io::load_detections(&s.ceiling, s.ceiling_appearance.as_deref())?,
            io::load_detections(&s.angled, s.angled_appearance.as_deref())?,
        ],
        ground_truth: s.ground_truth.as_deref().map(io::load_annotated).transpose()?,
        gt_offset: s.gt_offset,
        correspondences: None,
        exact: None,
    })
}

/// RANSAC fit with the inlier count, mapped to exit code 3 on failure.
pub fn estimate(pairs: &[Correspondence], params: &RansacParams) -> Result<(Homography, usize)> {
    let est = estimate_ransac(pairs, params).map_err(|e| CliError::Estimation(e.to_string()))?;
    let n = est.inlier_count();
    Ok((est.homography, n))
}

fn homography(cfg: &PipelineConfig, inputs: &Inputs) -> Result<(Homography, Option<(usize, usize)>)> {
    let h = cfg.homography.clone().unwrap_or_default();
    if let Some(f) = &h.file {
        return Ok((io::load_homography(f)?, None));
    }
    let pairs = match (&h.correspondences, &inputs.correspondences, inputs.exact) {
        (Some(p), _, _) => io::load_correspondences(p)?,
        (None, _, Some(exact)) if h.exact => return Ok((exact, None)),
        (None, Some(p), _) => p.clone(),
        _ => return Err(CliError::Config("homography: no homography file and no correspondences".into())),
    };
    let (hm, n) = estimate(&pairs, &cfg.ransac())?;
    Ok((hm, Some((n, pairs.len()))))
}

/// Tracks both cameras, each on its own thread.
pub fn track_both(detections: &[Vec<Detection>; 2], cfg: &TrackerConfig) -> Result<[Vec<TrackRecord>; 2]> {
    let [c, a] = thread::scope(|s| {
        let jobs = detections.each_ref().map(|d| s.spawn(move || track_stream(d, cfg)));
        jobs.map(|j| j.join().expect("tracking thread panicked"))
    });
    let fail = |e: mcmot_core::local_tracker::TrackerError| CliError::Invalid(e.to_string());
    Ok([c.map_err(fail)?, a.map_err(fail)?])
}

pub fn align(tracks: &[Vec<TrackRecord>; 2], h: &Homography, offset: i64, cfg: &GlobalConfig) -> Result<GlobalRun> {
    run_global(&tracks[0], &tracks[1], h, StreamAlignment { frame_offset: offset }, cfg).map_err(|e| CliError::Invalid(e.to_string()))
}

/// Full metric set. CHA is left out when the ground truth has no
/// cross-view pairs; an empty ground truth yields `None`.
pub fn score(
    gt: &[AnnotatedBox],
    run: &GlobalRun,
    tracks: &[Vec<TrackRecord>; 2],
    gt_offset: i64,
    m: &MetricsConfig,
) -> Result<Option<MetricsReport>> {
    let pred: Vec<AnnotatedBox> = run.records.iter().copied().map(Into::into).collect();
    let mut report = match evaluate(gt, &pred, m.iou_threshold, m.scope) {
        Ok(r) => r,
        Err(MetricsError::EmptyGroundTruth) => return Ok(None),
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    report.cha = cha(&ChaInput {
        gt,
        ceiling_tracks: &tracks[0],
        angled_tracks: &tracks[1],
        matches: &run.matches,
        gt_offset,
        iou_threshold: m.iou_threshold,
    })
    .ok();
    Ok(Some(report))
}

fn frames(d: &[Detection]) -> u32 {
    d.last().map_or(0, |x| x.frame + 1)
}

fn distinct_ids(t: &[TrackRecord]) -> usize {
    t.iter().map(|r| r.local_id).collect::<std::collections::BTreeSet<_>>().len()
}

/// Runs every stage and writes all artifacts under `cfg.output_dir`.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    let out = cfg.output_dir.as_path();
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str| {
        let now = Instant::now();
        timings.push((stage, now - clock));
        clock = now;
    };

    let inputs = load_inputs(cfg)?;
    lap("input");

    let (h, inliers) = homography(cfg, &inputs)?;
    let note = inliers.map(|(n, of)| format!("inliers {n}/{of}"));
    write_text(&out.join(HOMOGRAPHY_FILE), &formats::write_homography(&h, note.as_deref()))?;
    lap("homography");

    let tracks = track_both(&inputs.detections, &cfg.tracker)?;
    write_text(&out.join(CEILING_TRACKS), &formats::write_tracks(&tracks[0]))?;
    write_text(&out.join(ANGLED_TRACKS), &formats::write_tracks(&tracks[1]))?;
    lap("track");

    let global = GlobalConfig {
        audit: cfg.audit,
        ..cfg.global
    };
    let run = align(&tracks, &h, cfg.frame_offset, &global)?;
    write_text(&out.join(GLOBAL_TRACKS), &formats::write_global(&run.records))?;
    write_text(&out.join(MATCHES), &formats::write_matches(&run.matches))?;
    if cfg.audit {
        write_text(&out.join(AUDIT), &run.audit)?;
    }
    lap("align");

    let metrics = match &inputs.ground_truth {
        Some(gt) => score(gt, &run, &tracks, inputs.gt_offset, &cfg.metrics)?,
        None => None,
    };
    lap("evaluate");

    let d = &inputs.detections;
    let report = RunReport {
        counts: StageCounts {
            frames: [frames(&d[0]), frames(&d[1])],
            detections: [d[0].len(), d[1].len()],
            local_tracks: [distinct_ids(&tracks[0]), distinct_ids(&tracks[1])],
            track_records: [tracks[0].len(), tracks[1].len()],
            global_ids: run.issued,
            global_records: run.records.len(),
            matched_pairs: run.matches.iter().map(|m| m.matches.len()).sum(),
            homography_inliers: inliers,
        },
        timings,
        metrics,
    };
    write_text(&out.join(REPORT), &report.render())?;
    Ok(report)
}

/// Loads `path` and runs it, with `output_dir` optionally overridden.
pub fn run_file(path: &Path, output_dir: Option<&Path>) -> Result<RunReport> {
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(o) = output_dir {
        cfg.output_dir = o.to_owned();
    }
    run(&cfg)
}
