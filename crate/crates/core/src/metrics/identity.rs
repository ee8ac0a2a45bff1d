//! IDF1, IDP and IDR from a global one-to-one identity matching.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{index, AnnotatedBox, MetricsError};
use crate::global_tracker::Camera;
use crate::local_tracker::{hungarian, CostMatrix};
use crate::polygons::iou;

/// Whether an identity spans cameras or is separate per camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum IdentityScope {
    /// IDs are only meaningful within one camera (local tracks).
    PerCamera,
    /// One ID names the same object in every camera (global tracks).
    #[default]
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdMetrics {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: u64,
    pub gt_count: u64,
    pub pred_count: u64,
}

type Key = (Option<Camera>, u32);

fn key(scope: IdentityScope, camera: Camera, id: u32) -> Key {
    match scope {
        IdentityScope::PerCamera => (Some(camera), id),
        IdentityScope::Global => (None, id),
    }
}

/// Frame counts where a GT identity and a predicted identity overlap with
/// IoU at or above `threshold`.
pub fn overlap_counts(gt: &[AnnotatedBox], pred: &[AnnotatedBox], threshold: f64, scope: IdentityScope) -> BTreeMap<(Key, Key), u64> {
    let pi = index(pred);
    let mut counts = BTreeMap::new();
    for ((camera, frame), g) in index(gt) {
        let Some(p) = pi.get(&(camera, frame)) else { continue };
        for &(gid, gb) in &g {
            for &(pid, pb) in p {
                if iou(&gb, &pb) >= threshold {
                    *counts.entry((key(scope, camera, gid), key(scope, camera, pid))).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// Identity precision, recall and F1. IDTP is the total weight of the
/// maximum-weight one-to-one matching between GT and predicted identities,
/// where an edge weighs the number of frames the two overlap.
pub fn id_metrics(gt: &[AnnotatedBox], pred: &[AnnotatedBox], threshold: f64, scope: IdentityScope) -> Result<IdMetrics, MetricsError> {
    if gt.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let counts = overlap_counts(gt, pred, threshold, scope);
    let mut gids: Vec<Key> = counts.keys().map(|k| k.0).collect();
    let mut pids: Vec<Key> = counts.keys().map(|k| k.1).collect();
    gids.sort_unstable();
    gids.dedup();
    pids.sort_unstable();
    pids.dedup();
    let cost = CostMatrix::from_fn(gids.len(), pids.len(), |r, c| {
        Some(-(counts.get(&(gids[r], pids[c])).copied().unwrap_or(0) as f64))
    });
    let idtp: u64 = hungarian(&cost)
        .into_iter()
        .map(|(r, c)| counts.get(&(gids[r], pids[c])).copied().unwrap_or(0))
        .sum();
    let (ng, np) = (gt.len() as u64, pred.len() as u64);
    let idp = if np == 0 { 0.0 } else { idtp as f64 / np as f64 };
    let idr = idtp as f64 / ng as f64;
    Ok(IdMetrics {
        idf1: 2.0 * idtp as f64 / (ng + np) as f64,
        idp,
        idr,
        idtp,
        gt_count: ng,
        pred_count: np,
    })
}
