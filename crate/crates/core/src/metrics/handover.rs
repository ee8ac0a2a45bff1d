//! Camera handover accuracy.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{index, match_frame, AnnotatedBox, FrameIndex, MetricsError};
use crate::global_tracker::{Camera, FrameMatches};
use crate::local_tracker::{LocalId, TrackRecord};

/// Everything CHA needs: ground truth of both views, the local tracks the
/// matches refer to, and the predicted matches.
#[derive(Debug, Clone, Copy)]
pub struct ChaInput<'a> {
    pub gt: &'a [AnnotatedBox],
    pub ceiling_tracks: &'a [TrackRecord],
    pub angled_tracks: &'a [TrackRecord],
    pub matches: &'a [FrameMatches],
    /// True angled frame of ceiling frame `f` is `f + gt_offset`.
    pub gt_offset: i64,
    pub iou_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaResult {
    pub cha: f64,
    pub correct: u64,
    pub gt_pairs: u64,
    pub predicted: u64,
}

/// Maps each local track visible at a frame to the GT identity it matches.
struct LocalToGt {
    gt: FrameIndex,
    tracks: [BTreeMap<u32, Vec<(u32, crate::polygons::BoundingBox)>>; 2],
    threshold: f64,
    cache: BTreeMap<(Camera, u32), BTreeMap<u32, u32>>,
}

impl LocalToGt {
    fn new(input: &ChaInput<'_>) -> Self {
        let by_frame = |recs: &[TrackRecord]| {
            let mut m: BTreeMap<u32, Vec<_>> = BTreeMap::new();
            for r in recs {
                m.entry(r.frame).or_default().push((r.local_id.0, r.bbox));
            }
            m
        };
        Self {
            gt: index(input.gt),
            tracks: [by_frame(input.ceiling_tracks), by_frame(input.angled_tracks)],
            threshold: input.iou_threshold,
            cache: BTreeMap::new(),
        }
    }

    fn frame_map(&mut self, camera: Camera, frame: u32) -> &BTreeMap<u32, u32> {
        let threshold = self.threshold;
        let (gt, tracks) = (&self.gt, &self.tracks);
        self.cache.entry((camera, frame)).or_insert_with(|| {
            let empty = Vec::new();
            let g = gt.get(&(camera, frame)).unwrap_or(&empty);
            let t = tracks[camera as usize].get(&frame).unwrap_or(&empty);
            match_frame(g, t, threshold, &BTreeMap::new())
                .into_iter()
                .map(|m| (t[m.pred].0, g[m.gt].0))
                .collect()
        })
    }

    fn identity(&mut self, camera: Camera, frame: i64, local: LocalId) -> Option<u32> {
        let frame = u32::try_from(frame).ok()?;
        self.frame_map(camera, frame).get(&local.0).copied()
    }
}

fn ids_at(gt: &FrameIndex, camera: Camera, frame: i64) -> BTreeSet<u32> {
    u32::try_from(frame)
        .ok()
        .and_then(|f| gt.get(&(camera, f)))
        .map(|v| v.iter().map(|x| x.0).collect())
        .unwrap_or_default()
}

/// Ground-truth cross-view pairs per ceiling frame: identities present in
/// the ceiling view at `f` and the angled view at `f + gt_offset`.
fn gt_pairs(gt: &FrameIndex, offset: i64) -> BTreeMap<u32, BTreeSet<u32>> {
    let mut out = BTreeMap::new();
    for &(camera, f) in gt.keys() {
        if camera != Camera::Ceiling {
            continue;
        }
        let c = ids_at(gt, Camera::Ceiling, i64::from(f));
        let a = ids_at(gt, Camera::Angled, i64::from(f) + offset);
        let both: BTreeSet<u32> = c.intersection(&a).copied().collect();
        if !both.is_empty() {
            out.insert(f, both);
        }
    }
    out
}

/// Per-frame CHA: correct predicted matches over GT cross-view pairs. A
/// predicted pair is correct when both locals match GT boxes of the same
/// identity and that identity is a GT pair at that ceiling frame.
pub fn cha(input: &ChaInput<'_>) -> Result<ChaResult, MetricsError> {
    let mut lookup = LocalToGt::new(input);
    let pairs = gt_pairs(&lookup.gt, input.gt_offset);
    let total: u64 = pairs.values().map(|s| s.len() as u64).sum();
    if total == 0 {
        return Err(MetricsError::NoGroundTruthPairs);
    }
    let mut correct = 0;
    let mut predicted = 0;
    for fm in input.matches {
        let expected = u32::try_from(fm.ceiling_frame).ok().and_then(|f| pairs.get(&f));
        for (c, a) in fm.matches.iter() {
            predicted += 1;
            let Some(expected) = expected else { continue };
            let ci = lookup.identity(Camera::Ceiling, fm.ceiling_frame, c);
            let ai = lookup.identity(Camera::Angled, fm.angled_frame, a);
            if let (Some(ci), Some(ai)) = (ci, ai) {
                if ci == ai && expected.contains(&ci) {
                    correct += 1;
                }
            }
        }
    }
    Ok(ChaResult {
        cha: correct as f64 / total as f64,
        correct,
        gt_pairs: total,
        predicted,
    })
}

fn majority(votes: &BTreeMap<u32, u64>) -> Option<u32> {
    // Ties go to the smallest identity.
    votes.iter().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0))).map(|(&id, _)| id)
}

/// Per-track CHA: each local track is labelled with its majority GT
/// identity; an identity counts as handed over when some predicted pair
/// joins a ceiling and an angled track both labelled with it. The
/// denominator is the number of identities that ever form a GT pair.
pub fn cha_per_track(input: &ChaInput<'_>) -> Result<ChaResult, MetricsError> {
    let mut lookup = LocalToGt::new(input);
    let pairs = gt_pairs(&lookup.gt, input.gt_offset);
    let identities: BTreeSet<u32> = pairs.values().flatten().copied().collect();
    if identities.is_empty() {
        return Err(MetricsError::NoGroundTruthPairs);
    }
    let mut votes: [BTreeMap<u32, BTreeMap<u32, u64>>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for (camera, recs) in [(Camera::Ceiling, input.ceiling_tracks), (Camera::Angled, input.angled_tracks)] {
        for r in recs {
            if let Some(id) = lookup.identity(camera, i64::from(r.frame), r.local_id) {
                *votes[camera as usize].entry(r.local_id.0).or_default().entry(id).or_default() += 1;
            }
        }
    }
    let label = |camera: Camera, l: LocalId| votes[camera as usize].get(&l.0).and_then(majority);
    let mut handed: BTreeSet<u32> = BTreeSet::new();
    let mut unique: BTreeSet<(LocalId, LocalId)> = BTreeSet::new();
    for fm in input.matches {
        unique.extend(fm.matches.iter());
    }
    for &(c, a) in &unique {
        if let (Some(ci), Some(ai)) = (label(Camera::Ceiling, c), label(Camera::Angled, a)) {
            if ci == ai && identities.contains(&ci) {
                handed.insert(ci);
            }
        }
    }
    Ok(ChaResult {
        cha: handed.len() as f64 / identities.len() as f64,
        correct: handed.len() as u64,
        gt_pairs: identities.len() as u64,
        predicted: unique.len() as u64,
    })
}
