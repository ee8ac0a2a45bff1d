//! TOML configuration for `simulate` and `pipeline`.

use std::path::{Path, PathBuf};

use mcmot_core::geometry::RansacParams;
use mcmot_core::global_tracker::GlobalConfig;
use mcmot_core::local_tracker::TrackerConfig;
use mcmot_core::metrics::{IdentityScope, DEFAULT_IOU_THRESHOLD};
use mcmot_core::simulator::PenConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::read_text;

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

/// Reads a pen description. Missing fields take their defaults.
pub fn load_pen(path: &Path) -> Result<PenConfig> {
    parse(path)
}

/// Detection streams on disk, used instead of a simulated pen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamPaths {
    pub ceiling: PathBuf,
    pub angled: PathBuf,
    pub ceiling_appearance: Option<PathBuf>,
    pub angled_appearance: Option<PathBuf>,
    /// Enables the metrics stage.
    pub ground_truth: Option<PathBuf>,
    /// True angled frame of ceiling frame `f` is `f + gt_offset` in the
    /// ground truth.
    #[serde(default)]
    pub gt_offset: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomographyConfig {
    /// Ready-made ceiling→angled homography file.
    pub file: Option<PathBuf>,
    /// Correspondence file to estimate from.
    pub correspondences: Option<PathBuf>,
    /// With a simulated pen and neither of the above: take the exact
    /// homography instead of estimating from the simulated correspondences.
    pub exact: bool,
    pub ransac_threshold: f64,
    pub ransac_iterations: u32,
}

impl Default for HomographyConfig {
    fn default() -> Self {
        Self {
            file: None,
            correspondences: None,
            exact: false,
            ransac_threshold: RansacParams::DEFAULT_THRESHOLD_PX,
            ransac_iterations: RansacParams::DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub iou_threshold: f64,
    pub scope: IdentityScope,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            scope: IdentityScope::Global,
        }
    }
}

/// One file drives a whole run. Relative paths are taken from the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    /// Seeds RANSAC and, when set, overrides `simulate.seed`.
    pub seed: Option<u64>,
    /// Angled frame `f + frame_offset` is aligned with ceiling frame `f`.
    pub frame_offset: i64,
    /// Write the per-frame match audit.
    pub audit: bool,
    pub simulate: Option<PenConfig>,
    pub streams: Option<StreamPaths>,
    pub homography: Option<HomographyConfig>,
    pub tracker: TrackerConfig,
    pub global: GlobalConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            seed: None,
            frame_offset: 0,
            audit: false,
            simulate: None,
            streams: None,
            homography: None,
            tracker: TrackerConfig::default(),
            global: GlobalConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses `path` and resolves every relative path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = parse(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(s) = &mut self.streams {
            fix(&mut s.ceiling);
            fix(&mut s.angled);
            for p in [&mut s.ceiling_appearance, &mut s.angled_appearance, &mut s.ground_truth].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(h) = &mut self.homography {
            for p in [&mut h.file, &mut h.correspondences].into_iter().flatten() {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(CliError::Config(m.to_owned()));
        match (&self.simulate, &self.streams) {
            (Some(_), Some(_)) => return cfg("give either [simulate] or [streams], not both"),
            (None, None) => return cfg("missing input: give [simulate] or [streams]"),
            _ => {}
        }
        if let Some(p) = &self.simulate {
            p.validate().map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        }
        self.tracker.validate().map_err(|e| CliError::Config(format!("tracker: {e}")))?;
        let h = self.homography.as_ref();
        match (h.and_then(|h| h.file.as_ref()), h.and_then(|h| h.correspondences.as_ref())) {
            (Some(_), Some(_)) => return cfg("homography: give either `file` or `correspondences`, not both"),
            (None, None) if self.streams.is_some() => {
                return cfg("homography: streams need a homography `file` or a `correspondences` file")
            }
            _ => {}
        }
        if let Some(h) = h {
            if !(h.ransac_threshold > 0.0) || h.ransac_iterations == 0 {
                return cfg("homography: ransac_threshold and ransac_iterations must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.metrics.iou_threshold) {
            return cfg("metrics.iou_threshold must be in [0, 1]");
        }
        Ok(())
    }

    pub fn ransac(&self) -> RansacParams {
        let h = self.homography.clone().unwrap_or_default();
        RansacParams {
            threshold_px: h.ransac_threshold,
            iterations: h.ransac_iterations,
            seed: self.seed.unwrap_or(0),
        }
    }
}
