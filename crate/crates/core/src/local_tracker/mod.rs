//! Per-camera tracking by detection.
//!
//! Each [`Tracker`] keeps Kalman-filtered tracks for one camera stream and
//! links incoming detections to them by optimal assignment on a gated
//! `1 − IoU` cost, optionally blended with an appearance distance.

mod assignment;
mod kalman;

pub use assignment::{hungarian, CostMatrix};
pub use kalman::{KalmanParams, Measurement, StateMatrix, StateVector, TrackState};

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::polygons::{iou, BoundingBox};

/// Tracker errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("frame {frame} is not after frame {last}")]
    OutOfOrderFrame { frame: u32, last: u32 },
    #[error("non-positive or non-finite box")]
    NonPositiveBox,
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("appearance vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("appearance dimension {got} differs from stream dimension {expected}")]
    AppearanceDimension { expected: usize, got: usize },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(&'static str),
}

/// Track identifier, unique within one camera stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalId(pub u32);

impl fmt::Display for LocalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub appearance: Option<Vec<f64>>,
}

impl Detection {
    pub fn new(frame: u32, bbox: BoundingBox, confidence: f64) -> Result<Self, TrackerError> {
        bbox.validate().map_err(|_| TrackerError::NonPositiveBox)?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(TrackerError::InvalidConfidence(confidence));
        }
        Ok(Self {
            frame,
            bbox,
            confidence,
            appearance: None,
        })
    }

    /// Attaches an appearance vector, which must have norm 1 ± 1e-6.
    pub fn with_appearance(mut self, v: Vec<f64>) -> Result<Self, TrackerError> {
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(TrackerError::NotUnitNorm(norm));
        }
        self.appearance = Some(v);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrackerConfig {
    pub kalman: KalmanParams,
    /// Hits needed to confirm a track.
    pub confirm_hits: u32,
    /// Frames a track may go unmatched before deletion.
    pub max_age: u32,
    /// Costs above this are forbidden.
    pub gate: f64,
    /// Weight of `1 − IoU` against appearance distance.
    pub appearance_weight: f64,
    pub gallery_capacity: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            kalman: KalmanParams::default(),
            confirm_hits: 3,
            max_age: 30,
            gate: 0.7,
            appearance_weight: 1.0,
            gallery_capacity: 100,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let k = &self.kalman;
        if !(k.std_weight_position > 0.0 && k.std_weight_position.is_finite()) {
            return Err(TrackerError::InvalidConfig("kalman.std_weight_position must be positive"));
        }
        if !(k.std_weight_velocity > 0.0 && k.std_weight_velocity.is_finite()) {
            return Err(TrackerError::InvalidConfig("kalman.std_weight_velocity must be positive"));
        }
        if !(k.measurement_noise_scale > 0.0 && k.measurement_noise_scale.is_finite()) {
            return Err(TrackerError::InvalidConfig("kalman.measurement_noise_scale must be positive"));
        }
        if self.confirm_hits == 0 {
            return Err(TrackerError::InvalidConfig("confirm_hits must be at least 1"));
        }
        if !(self.gate >= 0.0 && self.gate.is_finite()) {
            return Err(TrackerError::InvalidConfig("gate must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.appearance_weight) {
            return Err(TrackerError::InvalidConfig("appearance_weight must be in [0, 1]"));
        }
        if self.gallery_capacity == 0 {
            return Err(TrackerError::InvalidConfig("gallery_capacity must be at least 1"));
        }
        Ok(())
    }
}

/// One local track.
#[derive(Debug, Clone)]
pub struct Track {
    pub local_id: LocalId,
    pub state: TrackState,
    pub status: TrackStatus,
    pub hits: u32,
    pub time_since_update: u32,
    pub gallery: VecDeque<Vec<f64>>,
    /// Box of the most recent matched detection.
    pub last_box: BoundingBox,
    /// Boxes observed before confirmation, released once confirmed.
    tentative_history: Vec<(u32, BoundingBox)>,
}

impl Track {
    fn new(local_id: LocalId, d: &Detection, cfg: &TrackerConfig) -> Self {
        let mut t = Self {
            local_id,
            state: TrackState::initiate(&d.bbox, &cfg.kalman),
            status: TrackStatus::Tentative,
            hits: 1,
            time_since_update: 0,
            gallery: VecDeque::new(),
            last_box: d.bbox,
            tentative_history: Vec::new(),
        };
        t.push_appearance(d, cfg.gallery_capacity);
        if t.hits >= cfg.confirm_hits {
            t.status = TrackStatus::Confirmed;
        } else {
            t.tentative_history.push((d.frame, d.bbox));
        }
        t
    }

    fn push_appearance(&mut self, d: &Detection, capacity: usize) {
        if let Some(v) = &d.appearance {
            if self.gallery.len() == capacity {
                self.gallery.pop_front();
            }
            self.gallery.push_back(v.clone());
        }
    }

    /// Advances the motion model by one frame.
    pub fn predict(&mut self, p: &KalmanParams) {
        debug_assert!(self.status != TrackStatus::Deleted);
        self.state.predict(p);
        self.time_since_update += 1;
    }

    /// Folds in a matched detection.
    pub fn update(&mut self, d: &Detection, cfg: &TrackerConfig) -> Result<(), TrackerError> {
        debug_assert!(self.status != TrackStatus::Deleted);
        self.state
            .update(&d.bbox, &cfg.kalman)
            .map_err(|_| TrackerError::NonPositiveBox)?;
        self.hits += 1;
        self.time_since_update = 0;
        self.last_box = d.bbox;
        self.push_appearance(d, cfg.gallery_capacity);
        if self.status == TrackStatus::Tentative {
            if self.hits >= cfg.confirm_hits {
                self.status = TrackStatus::Confirmed;
            } else {
                self.tentative_history.push((d.frame, d.bbox));
            }
        }
        Ok(())
    }

    /// Predicted box, if the state still describes a valid box.
    pub fn predicted_box(&self) -> Option<BoundingBox> {
        self.state.to_box().ok()
    }

    /// Smallest cosine distance between `v` and the gallery.
    pub fn appearance_distance(&self, v: &[f64]) -> Option<f64> {
        self.gallery
            .iter()
            .map(|g| 1.0 - g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .min_by(f64::total_cmp)
    }
}

/// Matching cost of a track against a detection, `None` when gated out.
pub fn match_cost(track: &Track, d: &Detection, cfg: &TrackerConfig) -> Option<f64> {
    let pred = track.predicted_box()?;
    let motion = 1.0 - iou(&pred, &d.bbox);
    let cost = match (&d.appearance, track.gallery.is_empty()) {
        (Some(v), false) => {
            let a = cfg.appearance_weight;
            a * motion + (1.0 - a) * track.appearance_distance(v)?
        }
        _ => motion,
    };
    (cost <= cfg.gate).then_some(cost)
}

/// Result of [`assign`]: indices into the track and detection slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Optimal gated assignment of detections to tracks.
pub fn assign(tracks: &[Track], detections: &[Detection], cfg: &TrackerConfig) -> Assignment {
    let costs = CostMatrix::from_fn(tracks.len(), detections.len(), |r, c| {
        match_cost(&tracks[r], &detections[c], cfg)
    });
    let matches = hungarian(&costs);
    let mut track_used = alloc::vec![false; tracks.len()];
    let mut det_used = alloc::vec![false; detections.len()];
    for &(t, d) in &matches {
        track_used[t] = true;
        det_used[d] = true;
    }
    Assignment {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|&i| !track_used[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&i| !det_used[i]).collect(),
    }
}

/// One line of local track output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub local_id: LocalId,
    pub bbox: BoundingBox,
}

/// Tracker for one camera stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u32,
    last_frame: Option<u32>,
    appearance_dim: Option<usize>,
    backfill: Vec<TrackRecord>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            appearance_dim: None,
            backfill: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live (tentative or confirmed) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Number of local IDs issued so far.
    pub fn issued(&self) -> u32 {
        self.next_id - 1
    }

    /// Processes one frame. Frames must strictly increase; skipped frames
    /// are advanced with no detections. Returns the boxes of confirmed
    /// tracks matched in this frame, sorted by ID.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<(LocalId, BoundingBox)>, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::OutOfOrderFrame { frame, last });
            }
            for skipped in last + 1..frame {
                self.advance(skipped, &[])?;
            }
        }
        self.advance(frame, detections)
    }

    fn advance(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<(LocalId, BoundingBox)>, TrackerError> {
        for d in detections {
            d.bbox.validate().map_err(|_| TrackerError::NonPositiveBox)?;
            if let Some(v) = &d.appearance {
                match self.appearance_dim {
                    None => self.appearance_dim = Some(v.len()),
                    Some(n) if n != v.len() => {
                        return Err(TrackerError::AppearanceDimension { expected: n, got: v.len() })
                    }
                    _ => {}
                }
            }
        }
        self.last_frame = Some(frame);
        for t in &mut self.tracks {
            t.predict(&self.cfg.kalman);
        }
        let a = assign(&self.tracks, detections, &self.cfg);
        for &(ti, di) in &a.matches {
            let t = &mut self.tracks[ti];
            let was_tentative = t.status == TrackStatus::Tentative;
            t.update(&detections[di], &self.cfg)?;
            if was_tentative && t.status == TrackStatus::Confirmed {
                let id = t.local_id;
                self.backfill.extend(
                    t.tentative_history
                        .drain(..)
                        .map(|(frame, bbox)| TrackRecord { frame, local_id: id, bbox }),
                );
            }
        }
        for &di in &a.unmatched_detections {
            let id = LocalId(self.next_id);
            self.next_id += 1;
            self.tracks.push(Track::new(id, &detections[di], &self.cfg));
        }
        let max_age = self.cfg.max_age;
        for t in &mut self.tracks {
            if t.time_since_update > max_age {
                t.status = TrackStatus::Deleted;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Deleted);

        let mut out: Vec<_> = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.time_since_update == 0)
            .map(|t| (t.local_id, t.last_box))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    /// Drains records from earlier frames that belong to tracks confirmed
    /// since the last call.
    pub fn take_confirmed_history(&mut self) -> Vec<TrackRecord> {
        core::mem::take(&mut self.backfill)
    }
}

/// Runs a tracker over a whole detection stream (sorted by frame) and
/// returns every confirmed record, including the pre-confirmation frames of
/// each confirmed track, sorted by `(frame, local_id)`.
pub fn track_stream(detections: &[Detection], cfg: &TrackerConfig) -> Result<Vec<TrackRecord>, TrackerError> {
    let mut tracker = Tracker::new(*cfg)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < detections.len() {
        let frame = detections[i].frame;
        let mut j = i;
        while j < detections.len() && detections[j].frame == frame {
            j += 1;
        }
        if j < detections.len() && detections[j].frame < frame {
            return Err(TrackerError::OutOfOrderFrame {
                frame: detections[j].frame,
                last: frame,
            });
        }
        for (local_id, bbox) in tracker.step(frame, &detections[i..j])? {
            out.push(TrackRecord { frame, local_id, bbox });
        }
        out.extend(tracker.take_confirmed_history());
        i = j;
    }
    out.sort_by_key(|r| (r.frame, r.local_id));
    Ok(out)
}
