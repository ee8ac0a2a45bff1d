//! Planar projective geometry: points, homographies, and robust estimation
//! of the map between two views of the same floor plane.

mod estimate;
mod homography;

pub use estimate::{
    compose_ceiling_to_angled, estimate_dlt, estimate_ransac, reprojection_error, RansacEstimate,
    RansacParams,
};
pub use homography::{canonical_distance, Homography, SINGULAR_TOLERANCE};

use thiserror::Error;

/// Errors raised by homography construction, application and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point maps to infinity (|w| = {w:e})")]
    PointAtInfinity { w: f64 },
    #[error("matrix is singular (|det| = {det:e})")]
    Singular { det: f64 },
    #[error("composition produced a singular matrix (|det| = {det:e})")]
    SingularResult { det: f64 },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("too few correspondences: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("no consensus: best inlier set has {best} points, need 4")]
    NoConsensus { best: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
}

/// A point in image coordinates (pixels, y down).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Homogeneous image point `(u, v, w)`, defined up to a non-zero scale.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousPoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl HomogeneousPoint {
    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    /// Divides through by `w`.
    pub fn to_pixel(&self) -> Result<PixelPoint, GeometryError> {
        if !(libm::fabs(self.w) >= SINGULAR_TOLERANCE) {
            return Err(GeometryError::PointAtInfinity { w: self.w });
        }
        Ok(PixelPoint::new(self.u / self.w, self.v / self.w))
    }

    /// Equality up to scale, compared after dehomogenization.
    pub fn approx_eq(&self, other: &HomogeneousPoint, tol: f64) -> bool {
        match (self.to_pixel(), other.to_pixel()) {
            (Ok(a), Ok(b)) => a.distance(&b) <= tol,
            _ => false,
        }
    }
}

impl From<PixelPoint> for HomogeneousPoint {
    fn from(p: PixelPoint) -> Self {
        Self::new(p.x, p.y, 1.0)
    }
}

/// A matched pair of image points, `src` in the source view and `dst` in the
/// destination view.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Correspondence {
    pub src: PixelPoint,
    pub dst: PixelPoint,
}

impl Correspondence {
    pub fn new(src: PixelPoint, dst: PixelPoint) -> Self {
        Self { src, dst }
    }

    pub fn is_finite(&self) -> bool {
        self.src.is_finite() && self.dst.is_finite()
    }
}
