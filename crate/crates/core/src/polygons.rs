//! Boxes, projected quadrilaterals and their overlap areas.
//!
//! A ceiling-view box is pushed through the ceiling→angled homography into a
//! quadrilateral, which is then clipped against an angled-view box
//! (Sutherland–Hodgman, one pass per box edge) and measured with the
//! shoelace formula.

use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{GeometryError, Homography, PixelPoint};

/// Tolerance for classifying a vertex as on the inside of a clip edge.
pub const CLIP_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
}

/// Axis-aligned box in pixels, `x_min < x_max`, `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, PolygonError> {
        let b = Self { x_min, y_min, x_max, y_max };
        b.validate()?;
        Ok(b)
    }

    /// From the `x_min, y_min, width, height` layout used by the CSV formats.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, PolygonError> {
        Self::new(x, y, x + w, y + h)
    }

    /// From centre, aspect ratio (width / height) and height.
    pub fn from_xyah(cx: f64, cy: f64, aspect: f64, height: f64) -> Result<Self, PolygonError> {
        let w = aspect * height;
        Self::new(cx - w / 2.0, cy - height / 2.0, cx + w / 2.0, cy + height / 2.0)
    }

    pub fn validate(&self) -> Result<(), PolygonError> {
        let vals = [self.x_min, self.y_min, self.x_max, self.y_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(PolygonError::InvalidBox("non-finite coordinate"));
        }
        if !(self.x_min < self.x_max) {
            return Err(PolygonError::InvalidBox("x_min must be below x_max"));
        }
        if !(self.y_min < self.y_max) {
            return Err(PolygonError::InvalidBox("y_min must be below y_max"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// `(cx, cy, width / height, height)`.
    pub fn to_xyah(&self) -> [f64; 4] {
        let c = self.center();
        [c.x, c.y, self.width() / self.height(), self.height()]
    }

    /// Corners in TL, TR, BR, BL order (image coordinates, y down).
    pub fn corners(&self) -> [PixelPoint; 4] {
        [
            PixelPoint::new(self.x_min, self.y_min),
            PixelPoint::new(self.x_max, self.y_min),
            PixelPoint::new(self.x_max, self.y_max),
            PixelPoint::new(self.x_min, self.y_max),
        ]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Smallest box containing both.
    pub fn union_hull(&self, other: &BoundingBox) -> Self {
        Self {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Axis-aligned hull of a point set; `None` when it has no interior.
    pub fn hull_of(points: &[PixelPoint]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Self {
            x_min: first.x,
            y_min: first.y,
            x_max: first.x,
            y_max: first.y,
        };
        for p in &points[1..] {
            b.x_min = b.x_min.min(p.x);
            b.y_min = b.y_min.min(p.y);
            b.x_max = b.x_max.max(p.x);
            b.y_max = b.y_max.max(p.y);
        }
        b.validate().ok().map(|_| b)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Image of a box under a homography, vertices in the box's corner order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrilateral {
    pub vertices: [PixelPoint; 4],
}

impl Quadrilateral {
    pub fn area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            vertices: self.vertices.map(|p| PixelPoint::new(p.x + dx, p.y + dy)),
        }
    }
}

impl From<BoundingBox> for Quadrilateral {
    fn from(b: BoundingBox) -> Self {
        Self { vertices: b.corners() }
    }
}

/// Maps each corner of `b` through `h`.
///
/// Fails with [`GeometryError::PointAtInfinity`] when a corner lands at
/// infinity or the corners fall on both sides of the horizon line of `h`,
/// where the image of the box is unbounded.
pub fn project_box(h: &Homography, b: &BoundingBox) -> Result<Quadrilateral, GeometryError> {
    let corners = b.corners();
    let mut sign = 0.0;
    let mut vertices = [PixelPoint::default(); 4];
    for (out, c) in vertices.iter_mut().zip(corners.iter()) {
        let hp = h.apply_homogeneous(&(*c).into());
        if sign == 0.0 {
            sign = libm::copysign(1.0, hp.w);
        } else if libm::copysign(1.0, hp.w) != sign {
            return Err(GeometryError::PointAtInfinity { w: hp.w });
        }
        *out = hp.to_pixel()?;
    }
    Ok(Quadrilateral { vertices })
}

fn shoelace(vertices: &[PixelPoint]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        twice += a.x * b.y - b.x * a.y;
    }
    libm::fabs(twice) / 2.0
}

/// `|shoelace sum| / 2` of a simple polygon.
pub fn polygon_area(vertices: &[PixelPoint]) -> Result<f64, PolygonError> {
    if vertices.len() < 3 {
        return Err(PolygonError::TooFewVertices(vertices.len()));
    }
    Ok(shoelace(vertices))
}

/// One Sutherland–Hodgman pass. `inside` is a signed distance, non-negative
/// (up to [`CLIP_EPSILON`]) on the kept side; the edge is assumed straight so
/// the crossing is found by linear interpolation of that distance.
fn clip_pass(poly: &[PixelPoint], dist: impl Fn(&PixelPoint) -> f64) -> Vec<PixelPoint> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let (ds, de) = (dist(&s), dist(&e));
        let (s_in, e_in) = (ds >= -CLIP_EPSILON, de >= -CLIP_EPSILON);
        if s_in != e_in {
            let t = ds / (ds - de);
            if t.is_finite() {
                out.push(PixelPoint::new(s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t));
            }
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Clips a polygon to the inside of an axis-aligned box.
pub fn clip_to_box(poly: &[PixelPoint], b: &BoundingBox) -> Vec<PixelPoint> {
    let mut out = clip_pass(poly, |p| p.x - b.x_min);
    out = clip_pass(&out, |p| b.x_max - p.x);
    out = clip_pass(&out, |p| p.y - b.y_min);
    clip_pass(&out, |p| b.y_max - p.y)
}

/// Clips `subject` against every edge half-plane of a convex `clip` polygon
/// (either orientation).
pub fn clip_convex(subject: &[PixelPoint], clip: &[PixelPoint]) -> Vec<PixelPoint> {
    let n = clip.len();
    if n < 3 {
        return Vec::new();
    }
    let mut twice = 0.0;
    for i in 0..n {
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        twice += a.x * b.y - b.x * a.y;
    }
    let orient = if twice >= 0.0 { 1.0 } else { -1.0 };
    let mut out = subject.to_vec();
    for i in 0..n {
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let len = libm::hypot(b.x - a.x, b.y - a.y);
        if len == 0.0 {
            continue;
        }
        out = clip_pass(&out, |p| orient * ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len);
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Area of `q ∩ b` in square pixels; zero when disjoint.
pub fn intersection_area(q: &Quadrilateral, b: &BoundingBox) -> f64 {
    let clipped = clip_to_box(&q.vertices, b);
    if clipped.len() < 3 {
        return 0.0;
    }
    shoelace(&clipped)
}
