//! Intersection matrix and the greedy max-pop matcher.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Homography;
use crate::local_tracker::LocalId;
use crate::polygons::{intersection_area, project_box, BoundingBox};

/// Ceiling → angled local ID pairs for one frame, injective both ways.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSet {
    pairs: BTreeMap<LocalId, LocalId>,
}

impl MatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pair; refuses it if either side is already used.
    pub fn insert(&mut self, ceiling: LocalId, angled: LocalId) -> bool {
        if self.pairs.contains_key(&ceiling) || self.contains_angled(angled) {
            return false;
        }
        self.pairs.insert(ceiling, angled);
        true
    }

    pub fn get(&self, ceiling: LocalId) -> Option<LocalId> {
        self.pairs.get(&ceiling).copied()
    }

    pub fn contains_angled(&self, angled: LocalId) -> bool {
        self.pairs.values().any(|&a| a == angled)
    }

    /// Pairs in ceiling-ID order.
    pub fn iter(&self) -> impl Iterator<Item = (LocalId, LocalId)> + '_ {
        self.pairs.iter().map(|(&c, &a)| (c, a))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl FromIterator<(LocalId, LocalId)> for MatchSet {
    fn from_iter<I: IntoIterator<Item = (LocalId, LocalId)>>(iter: I) -> Self {
        let mut m = MatchSet::new();
        for (c, a) in iter {
            m.insert(c, a);
        }
        m
    }
}

/// Overlap areas (px²) between projected ceiling boxes (rows) and angled
/// boxes (columns), both sorted by local ID.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionMatrix {
    pub ceiling: Vec<LocalId>,
    pub angled: Vec<LocalId>,
    pub values: Vec<f64>,
}

impl IntersectionMatrix {
    /// A matrix with explicit values, row-major.
    pub fn from_values(ceiling: Vec<LocalId>, angled: Vec<LocalId>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), ceiling.len() * angled.len());
        Self { ceiling, angled, values }
    }

    /// Builds the matrix from boxes. A ceiling box that cannot be projected
    /// (it straddles the horizon of `h`) gets an all-zero row.
    pub fn build(ceiling: &[(LocalId, BoundingBox)], angled: &[(LocalId, BoundingBox)], h: &Homography) -> Self {
        let mut c: Vec<_> = ceiling.to_vec();
        let mut a: Vec<_> = angled.to_vec();
        c.sort_by_key(|x| x.0);
        a.sort_by_key(|x| x.0);
        let mut values = vec![0.0; c.len() * a.len()];
        for (i, (_, cb)) in c.iter().enumerate() {
            if let Ok(q) = project_box(h, cb) {
                for (j, (_, ab)) in a.iter().enumerate() {
                    values[i * a.len() + j] = intersection_area(&q, ab);
                }
            }
        }
        Self {
            ceiling: c.into_iter().map(|x| x.0).collect(),
            angled: a.into_iter().map(|x| x.0).collect(),
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.ceiling.len()
    }

    pub fn cols(&self) -> usize {
        self.angled.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }
}

/// One iteration of the greedy loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pop {
    pub ceiling: LocalId,
    pub angled: LocalId,
    pub value: f64,
    /// False when the ceiling ID was already matched.
    pub accepted: bool,
}

/// Greedy matching: repeatedly take the largest positive entry (first in
/// row-major order on ties), zero its angled column and record the pair
/// unless its ceiling ID is already matched. Entries below `min_area` are
/// zeroed up front. `symmetric` also zeroes the ceiling row of each pop.
pub fn greedy_pop(m: &IntersectionMatrix, min_area: f64, symmetric: bool) -> (MatchSet, Vec<Pop>) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut v: Vec<f64> = m
        .values
        .iter()
        .map(|&x| if x >= min_area && x > 0.0 { x } else { 0.0 })
        .collect();
    let mut out = MatchSet::new();
    let mut pops = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in 0..rows {
            for c in 0..cols {
                let x = v[r * cols + c];
                if x > 0.0 && best.is_none_or(|(_, _, b)| x > b) {
                    best = Some((r, c, x));
                }
            }
        }
        let Some((r, c, value)) = best else { break };
        for rr in 0..rows {
            v[rr * cols + c] = 0.0;
        }
        if symmetric {
            for cc in 0..cols {
                v[r * cols + cc] = 0.0;
            }
        }
        let accepted = out.insert(m.ceiling[r], m.angled[c]);
        pops.push(Pop {
            ceiling: m.ceiling[r],
            angled: m.angled[c],
            value,
            accepted,
        });
    }
    (out, pops)
}

/// Matching knobs for [`align_frame`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AlignParams {
    /// Overlaps below this area (px²) are ignored.
    pub min_area_px2: f64,
    /// Also zero the ceiling row after each pop.
    pub symmetric: bool,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            min_area_px2: 0.0,
            symmetric: false,
        }
    }
}

/// Matches one frame's ceiling tracks to angled tracks through `h`
/// (ceiling → angled).
pub fn align_frame(ceiling: &[(LocalId, BoundingBox)], angled: &[(LocalId, BoundingBox)], h: &Homography, params: &AlignParams) -> MatchSet {
    let m = IntersectionMatrix::build(ceiling, angled, h);
    greedy_pop(&m, params.min_area_px2, params.symmetric).0
}
