//! Tracking evaluation: CLEAR-MOT (MOTA, MOTP, precision, recall),
//! identity metrics (IDF1, IDP, IDR) and camera handover accuracy (CHA).

mod handover;
mod identity;

pub use handover::{cha, cha_per_track, ChaInput, ChaResult};
pub use identity::{id_metrics, IdMetrics, IdentityScope};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::AddAssign;

use thiserror::Error;

use crate::global_tracker::{Camera, GlobalRecord};
use crate::local_tracker::{hungarian, CostMatrix};
use crate::polygons::{iou, BoundingBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("no matched pairs")]
    NoMatches,
    #[error("no ground-truth cross-view pairs")]
    NoGroundTruthPairs,
}

/// A labelled box: ground truth (identity = true global ID) or prediction
/// (identity = predicted ID).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedBox {
    pub camera: Camera,
    pub frame: u32,
    pub identity: u32,
    pub bbox: BoundingBox,
}

impl From<GlobalRecord> for AnnotatedBox {
    fn from(r: GlobalRecord) -> Self {
        Self {
            camera: r.camera,
            frame: r.frame,
            identity: r.global_id.0,
            bbox: r.bbox,
        }
    }
}

/// A matched pair of indices into the frame's GT and prediction lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatch {
    pub gt: usize,
    pub pred: usize,
    pub iou: f64,
}

/// Maximum-cardinality, IoU-maximizing matching on a precomputed IoU
/// matrix (`ious[g][p]`), pairs below `threshold` excluded. Pairs in
/// `forced` are taken first when they clear the threshold.
pub fn match_ious(ious: &[Vec<f64>], threshold: f64, forced: &[(usize, usize)]) -> Vec<FrameMatch> {
    let n_gt = ious.len();
    let n_pred = ious.first().map_or(0, Vec::len);
    let mut gt_used = alloc::vec![false; n_gt];
    let mut pred_used = alloc::vec![false; n_pred];
    let mut out = Vec::new();
    for &(g, p) in forced {
        if !gt_used[g] && !pred_used[p] && ious[g][p] >= threshold {
            gt_used[g] = true;
            pred_used[p] = true;
            out.push(FrameMatch { gt: g, pred: p, iou: ious[g][p] });
        }
    }
    let rest_g: Vec<usize> = (0..n_gt).filter(|&g| !gt_used[g]).collect();
    let rest_p: Vec<usize> = (0..n_pred).filter(|&p| !pred_used[p]).collect();
    let costs = CostMatrix::from_fn(rest_g.len(), rest_p.len(), |r, c| {
        let v = ious[rest_g[r]][rest_p[c]];
        (v >= threshold).then_some(1.0 - v)
    });
    for (r, c) in hungarian(&costs) {
        let (g, p) = (rest_g[r], rest_p[c]);
        out.push(FrameMatch { gt: g, pred: p, iou: ious[g][p] });
    }
    out.sort_by_key(|m| m.gt);
    out
}

/// Matches the boxes of one `(camera, frame)`. `previous` maps GT identity
/// to the predicted identity it was matched with in the previous frame;
/// those pairs are kept first when still above the threshold.
pub fn match_frame(
    gt: &[(u32, BoundingBox)],
    pred: &[(u32, BoundingBox)],
    iou_threshold: f64,
    previous: &BTreeMap<u32, u32>,
) -> Vec<FrameMatch> {
    let ious: Vec<Vec<f64>> = gt.iter().map(|(_, g)| pred.iter().map(|(_, p)| iou(g, p)).collect()).collect();
    let mut forced = Vec::new();
    for (gi, (gid, _)) in gt.iter().enumerate() {
        if let Some(&pid) = previous.get(gid) {
            if let Some(pi) = pred.iter().position(|(id, _)| *id == pid) {
                forced.push((gi, pi));
            }
        }
    }
    match_ious(&ious, iou_threshold, &forced)
}

/// Additive CLEAR-MOT counters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsAccumulator {
    pub fn_count: u64,
    pub fp: u64,
    pub idsw: u64,
    pub gt: u64,
    pub pred: u64,
    pub matched_overlap_sum: f64,
    pub matched_count: u64,
}

impl AddAssign for MetricsAccumulator {
    fn add_assign(&mut self, o: Self) {
        self.fn_count += o.fn_count;
        self.fp += o.fp;
        self.idsw += o.idsw;
        self.gt += o.gt;
        self.pred += o.pred;
        self.matched_overlap_sum += o.matched_overlap_sum;
        self.matched_count += o.matched_count;
    }
}

impl MetricsAccumulator {
    /// `1 − (FN + FP + IDSW) / GT`.
    pub fn mota(&self) -> Result<f64, MetricsError> {
        if self.gt == 0 {
            return Err(MetricsError::EmptyGroundTruth);
        }
        Ok(1.0 - (self.fn_count + self.fp + self.idsw) as f64 / self.gt as f64)
    }

    /// Mean IoU of matched pairs.
    pub fn motp(&self) -> Result<f64, MetricsError> {
        if self.matched_count == 0 {
            return Err(MetricsError::NoMatches);
        }
        Ok(self.matched_overlap_sum / self.matched_count as f64)
    }

    pub fn recall(&self) -> Result<f64, MetricsError> {
        if self.gt == 0 {
            return Err(MetricsError::EmptyGroundTruth);
        }
        Ok(self.matched_count as f64 / self.gt as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.pred > 0).then(|| self.matched_count as f64 / self.pred as f64)
    }
}

pub(crate) type FrameIndex = BTreeMap<(Camera, u32), Vec<(u32, BoundingBox)>>;

pub(crate) fn index(boxes: &[AnnotatedBox]) -> FrameIndex {
    let mut m: FrameIndex = BTreeMap::new();
    for b in boxes {
        m.entry((b.camera, b.frame)).or_default().push((b.identity, b.bbox));
    }
    m
}

/// Runs CLEAR-MOT matching over every camera sequence.
pub fn clear_mot(gt: &[AnnotatedBox], pred: &[AnnotatedBox], iou_threshold: f64) -> MetricsAccumulator {
    let gi = index(gt);
    let pi = index(pred);
    let mut keys: Vec<(Camera, u32)> = gi.keys().chain(pi.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let empty = Vec::new();
    let mut acc = MetricsAccumulator::default();
    let mut camera = None;
    let mut prev: BTreeMap<u32, u32> = BTreeMap::new();
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    for key in keys {
        if camera != Some(key.0) {
            camera = Some(key.0);
            prev.clear();
            last.clear();
        }
        let g = gi.get(&key).unwrap_or(&empty);
        let p = pi.get(&key).unwrap_or(&empty);
        let matches = match_frame(g, p, iou_threshold, &prev);
        acc.gt += g.len() as u64;
        acc.pred += p.len() as u64;
        acc.fn_count += (g.len() - matches.len()) as u64;
        acc.fp += (p.len() - matches.len()) as u64;
        prev.clear();
        for m in &matches {
            let (gid, pid) = (g[m.gt].0, p[m.pred].0);
            if last.get(&gid).is_some_and(|&x| x != pid) {
                acc.idsw += 1;
            }
            last.insert(gid, pid);
            prev.insert(gid, pid);
            acc.matched_overlap_sum += m.iou;
            acc.matched_count += 1;
        }
    }
    acc
}

pub fn mota(gt: &[AnnotatedBox], pred: &[AnnotatedBox], iou_threshold: f64) -> Result<f64, MetricsError> {
    clear_mot(gt, pred, iou_threshold).mota()
}

pub fn motp(gt: &[AnnotatedBox], pred: &[AnnotatedBox], iou_threshold: f64) -> Result<f64, MetricsError> {
    clear_mot(gt, pred, iou_threshold).motp()
}

/// Everything reported for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub counts: MetricsAccumulator,
    pub mota: f64,
    pub motp: Option<f64>,
    pub precision: Option<f64>,
    pub recall: f64,
    pub id: IdMetrics,
    pub cha: Option<ChaResult>,
}

/// CLEAR-MOT plus identity metrics for one prediction set.
pub fn evaluate(gt: &[AnnotatedBox], pred: &[AnnotatedBox], iou_threshold: f64, scope: IdentityScope) -> Result<MetricsReport, MetricsError> {
    let counts = clear_mot(gt, pred, iou_threshold);
    Ok(MetricsReport {
        counts,
        mota: counts.mota()?,
        motp: counts.motp().ok(),
        precision: counts.precision(),
        recall: counts.recall()?,
        id: id_metrics(gt, pred, iou_threshold, scope)?,
        cha: None,
    })
}
