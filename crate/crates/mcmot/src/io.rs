//! Reading and writing the formats on disk.

use std::fs;
use std::path::{Path, PathBuf};

use mcmot_core::geometry::{Correspondence, Homography};
use mcmot_core::global_tracker::FrameMatches;
use mcmot_core::local_tracker::{Detection, TrackRecord};
use mcmot_core::metrics::AnnotatedBox;
use mcmot_core::simulator::{PenConfig, SceneBundle};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::{self, FormatError};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| CliError::Write {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

fn load<T>(path: &Path, parse: impl FnOnce(&str) -> Result<T, FormatError>) -> Result<T> {
    parse(&read_text(path)?).map_err(|e| CliError::malformed(path, e))
}

pub fn load_detections(path: &Path, appearance: Option<&Path>) -> Result<Vec<Detection>> {
    let mut dets = load(path, formats::read_detections)?;
    if let Some(a) = appearance {
        load(a, |t| formats::read_appearance(t, &mut dets))?;
    }
    Ok(dets)
}

pub fn load_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    load(path, formats::read_tracks)
}

pub fn load_annotated(path: &Path) -> Result<Vec<AnnotatedBox>> {
    load(path, formats::read_annotated)
}

pub fn load_matches(path: &Path) -> Result<Vec<FrameMatches>> {
    load(path, formats::read_matches)
}

pub fn load_homography(path: &Path) -> Result<Homography> {
    load(path, formats::read_homography)
}

pub fn load_correspondences(path: &Path) -> Result<Vec<Correspondence>> {
    load(path, formats::read_correspondences)
}

/// Relative paths of the bundle members, as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFiles {
    pub ceiling_detections: PathBuf,
    pub angled_detections: PathBuf,
    pub ground_truth: PathBuf,
    pub h_ceiling_to_angled: PathBuf,
    pub correspondences: PathBuf,
}

impl Default for BundleFiles {
    fn default() -> Self {
        Self {
            ceiling_detections: "ceiling_detections.csv".into(),
            angled_detections: "angled_detections.csv".into(),
            ground_truth: "ground_truth.csv".into(),
            h_ceiling_to_angled: "h_ceiling_to_angled.txt".into(),
            correspondences: "correspondences.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub n_agents: usize,
    pub duration: u32,
    /// Angled frame `f + angled_frame_offset` shows ceiling frame `f`.
    pub angled_frame_offset: i64,
    pub files: BundleFiles,
}

pub const MANIFEST: &str = "manifest.toml";

/// Writes the five bundle members and the manifest into `dir`.
pub fn write_bundle(dir: &Path, bundle: &SceneBundle, cfg: &PenConfig) -> Result<Manifest> {
    let files = BundleFiles::default();
    write_text(&dir.join(&files.ceiling_detections), &formats::write_detections(&bundle.ceiling_detections))?;
    write_text(&dir.join(&files.angled_detections), &formats::write_detections(&bundle.angled_detections))?;
    write_text(&dir.join(&files.ground_truth), &formats::write_annotated(&bundle.ground_truth))?;
    write_text(
        &dir.join(&files.h_ceiling_to_angled),
        &formats::write_homography(&bundle.h_ceiling_to_angled, Some("true ceiling -> angled floor homography")),
    )?;
    write_text(&dir.join(&files.correspondences), &formats::write_correspondences(&bundle.correspondences))?;
    let manifest = Manifest {
        seed: cfg.seed,
        n_agents: cfg.n_agents,
        duration: cfg.duration,
        angled_frame_offset: cfg.angled_frame_offset,
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&dir.join(MANIFEST), &text)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
