//! Cross-camera identity handover between a ceiling and an angled view.
//!
//! Each aligned frame, ceiling boxes are projected into the angled view and
//! matched greedily by overlap area ([`greedy_pop`]); the matches feed a
//! [`Registry`] that binds local tracks of both cameras to persistent
//! global IDs.

mod greedy;
mod registry;

pub use greedy::{align_frame, greedy_pop, AlignParams, IntersectionMatrix, MatchSet, Pop};
pub use registry::{GlobalIdentity, LocalKey, Registry, RegistryConfig, RegistryEvent};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use thiserror::Error;

use crate::geometry::Homography;
use crate::local_tracker::{LocalId, TrackRecord};
use crate::polygons::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Camera {
    Ceiling,
    Angled,
}

impl Camera {
    pub const ALL: [Camera; 2] = [Camera::Ceiling, Camera::Angled];

    pub fn as_str(self) -> &'static str {
        match self {
            Camera::Ceiling => "ceiling",
            Camera::Angled => "angled",
        }
    }
}

impl fmt::Display for Camera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown camera {0:?}, expected \"ceiling\" or \"angled\"")]
pub struct UnknownCamera(pub String);

impl FromStr for Camera {
    type Err = UnknownCamera;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ceiling" => Ok(Camera::Ceiling),
            "angled" => Ok(Camera::Angled),
            other => Err(UnknownCamera(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GlobalId(pub u32);

impl fmt::Display for GlobalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One local track box at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTrackSnapshot {
    pub camera: Camera,
    pub frame: u32,
    pub local_id: LocalId,
    pub bbox: BoundingBox,
}

/// Constant frame offset between the streams: angled frame = ceiling frame + offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamAlignment {
    pub frame_offset: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GlobalConfig {
    pub align: AlignParams,
    pub registry: RegistryConfig,
    /// Record the matrix and pop sequence of every frame.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub audit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlobalError {
    #[error("{camera} stream is not sorted: frame {frame} after {last}")]
    OutOfOrderFrame { camera: Camera, frame: u32, last: u32 },
}

/// One line of global track output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalRecord {
    pub camera: Camera,
    pub frame: u32,
    pub global_id: GlobalId,
    pub bbox: BoundingBox,
}

/// Matches of one aligned frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatches {
    pub ceiling_frame: i64,
    pub angled_frame: i64,
    pub matches: MatchSet,
}

#[derive(Debug, Clone, Default)]
pub struct GlobalRun {
    /// Sorted by `(camera, frame, global_id)`.
    pub records: Vec<GlobalRecord>,
    /// Non-empty match sets in frame order.
    pub matches: Vec<FrameMatches>,
    /// Global IDs issued, retired ones included.
    pub issued: u32,
    /// Line-oriented audit text, empty unless requested.
    pub audit: String,
}

fn check_sorted(camera: Camera, recs: &[TrackRecord]) -> Result<(), GlobalError> {
    for w in recs.windows(2) {
        if w[1].frame < w[0].frame {
            return Err(GlobalError::OutOfOrderFrame {
                camera,
                frame: w[1].frame,
                last: w[0].frame,
            });
        }
    }
    Ok(())
}

fn by_frame(recs: &[TrackRecord]) -> BTreeMap<u32, Vec<(LocalId, BoundingBox)>> {
    let mut m: BTreeMap<u32, Vec<(LocalId, BoundingBox)>> = BTreeMap::new();
    for r in recs {
        m.entry(r.frame).or_default().push((r.local_id, r.bbox));
    }
    m
}

fn write_audit(out: &mut String, t: i64, offset: i64, m: &IntersectionMatrix, pops: &[Pop], events: &[RegistryEvent]) {
    let _ = writeln!(out, "frame {} angled {} rows {} cols {}", t, t + offset, m.rows(), m.cols());
    if m.rows() > 0 && m.cols() > 0 {
        let _ = write!(out, "  cols");
        for a in &m.angled {
            let _ = write!(out, " {a}");
        }
        let _ = writeln!(out);
        for (i, c) in m.ceiling.iter().enumerate() {
            let _ = write!(out, "  row {c}:");
            for j in 0..m.cols() {
                let _ = write!(out, " {:.3}", m.get(i, j));
            }
            let _ = writeln!(out);
        }
    }
    for p in pops {
        let verdict = if p.accepted { "match" } else { "skip" };
        let _ = writeln!(out, "  pop ceiling {} angled {} area {:.3} {}", p.ceiling, p.angled, p.value, verdict);
    }
    for e in events {
        let _ = writeln!(out, "  {e:?}");
    }
}

/// Runs greedy matching and the registry over two frame-sorted local track
/// streams. Aligned time is the ceiling frame; angled frame `k` is aligned
/// to `k − offset`.
///
/// Records of a local that is still waiting for its first binding are held
/// back and emitted with the ID it eventually receives.
pub fn run_global(
    ceiling: &[TrackRecord],
    angled: &[TrackRecord],
    h: &Homography,
    alignment: StreamAlignment,
    cfg: &GlobalConfig,
) -> Result<GlobalRun, GlobalError> {
    check_sorted(Camera::Ceiling, ceiling)?;
    check_sorted(Camera::Angled, angled)?;
    let offset = alignment.frame_offset;
    let cf = by_frame(ceiling);
    let af = by_frame(angled);
    let mut times: Vec<i64> = cf.keys().map(|&f| i64::from(f)).collect();
    times.extend(af.keys().map(|&k| i64::from(k) - offset));
    times.sort_unstable();
    times.dedup();

    let mut registry = Registry::new(cfg.registry);
    let mut run = GlobalRun::default();
    let mut held: BTreeMap<LocalKey, Vec<(u32, BoundingBox)>> = BTreeMap::new();
    let empty = Vec::new();

    for &t in &times {
        let c = u32::try_from(t).ok().and_then(|f| cf.get(&f)).unwrap_or(&empty);
        let a = u32::try_from(t + offset).ok().and_then(|k| af.get(&k)).unwrap_or(&empty);
        let m = IntersectionMatrix::build(c, a, h);
        let (matches, pops) = greedy_pop(&m, cfg.align.min_area_px2, cfg.align.symmetric);
        let c_ids: Vec<LocalId> = c.iter().map(|x| x.0).collect();
        let a_ids: Vec<LocalId> = a.iter().map(|x| x.0).collect();
        let bound = registry.update(t, &matches, &c_ids, &a_ids);
        let events = registry.take_events();
        if cfg.audit {
            write_audit(&mut run.audit, t, offset, &m, &pops, &events);
        }
        for (camera, boxes, frame) in [(Camera::Ceiling, c, t), (Camera::Angled, a, t + offset)] {
            for &(l, bbox) in boxes {
                let frame = frame as u32;
                match bound.get(&(camera, l)) {
                    Some(&global_id) => run.records.push(GlobalRecord { camera, frame, global_id, bbox }),
                    None => held.entry((camera, l)).or_default().push((frame, bbox)),
                }
            }
        }
        flush_held(&mut held, &registry, &mut run.records);
        if !matches.is_empty() {
            run.matches.push(FrameMatches {
                ceiling_frame: t,
                angled_frame: t + offset,
                matches,
            });
        }
    }
    registry.finalize(times.last().copied().unwrap_or(0));
    flush_held(&mut held, &registry, &mut run.records);
    debug_assert!(held.is_empty());

    run.records.sort_by_key(|r| (r.camera, r.frame, r.global_id));
    run.issued = registry.issued();
    Ok(run)
}

fn flush_held(held: &mut BTreeMap<LocalKey, Vec<(u32, BoundingBox)>>, registry: &Registry, out: &mut Vec<GlobalRecord>) {
    held.retain(|&(camera, l), boxes| match registry.lookup(camera, l) {
        Some(global_id) => {
            out.extend(boxes.iter().map(|&(frame, bbox)| GlobalRecord { camera, frame, global_id, bbox }));
            false
        }
        None => true,
    });
}
