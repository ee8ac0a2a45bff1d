//! Pinhole cameras over the floor plane `Z = 0`.

use nalgebra::{Matrix3, Vector3};

use super::SimError;
use crate::geometry::{Homography, PixelPoint};

/// A 3-D point in pen coordinates (metres, `Z` up, floor at `Z = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn floor(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }
}

/// Intrinsics `k`, world→camera rotation `r` and translation `t`, plus the
/// image size used for visibility tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub image_width: f64,
    pub image_height: f64,
}

impl CameraModel {
    pub fn new(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>, image_width: f64, image_height: f64) -> Result<Self, SimError> {
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(SimError::invalid("camera.focal_px", "focal length must be positive"));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(ortho < 1e-9) || !((r.determinant() - 1.0).abs() < 1e-9) {
            return Err(SimError::invalid("camera.rotation", "rotation must be orthonormal with det +1"));
        }
        if !(image_width > 0.0 && image_height > 0.0) {
            return Err(SimError::invalid("camera.image_size", "image size must be positive"));
        }
        Ok(Self {
            k,
            r,
            t,
            image_width,
            image_height,
        })
    }

    /// Depth of a point along the optical axis.
    pub fn depth(&self, p: &WorldPoint) -> f64 {
        (self.r * Vector3::new(p.x, p.y, p.z) + self.t).z
    }

    pub fn in_image(&self, p: &PixelPoint) -> bool {
        (0.0..=self.image_width).contains(&p.x) && (0.0..=self.image_height).contains(&p.y)
    }

    /// Camera centre in world coordinates, `−Rᵀ t`.
    pub fn center(&self) -> WorldPoint {
        let c = -(self.r.transpose() * self.t);
        WorldPoint::new(c.x, c.y, c.z)
    }
}

/// Physical placement of a camera, from which the model is derived.
///
/// `tilt_deg` is the angle of the optical axis from straight down and
/// `yaw_deg` the compass direction (from +X towards +Y) the axis leans
/// towards. The image x axis stays parallel to the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CameraMount {
    pub position: [f64; 3],
    pub tilt_deg: f64,
    pub yaw_deg: f64,
    pub focal_px: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraMount {
    /// Overhead camera at 4 m above the drinker half of the pen.
    pub fn default_ceiling() -> Self {
        Self {
            position: [3.0, 3.9, 4.0],
            tilt_deg: 0.0,
            yaw_deg: 90.0,
            focal_px: 1000.0,
            image_width: 3840,
            image_height: 2160,
        }
    }

    /// Oblique camera at 2.2 m on the far wall looking back over the feeder half.
    pub fn default_angled() -> Self {
        Self {
            position: [3.0, 12.5, 2.2],
            tilt_deg: 35.0,
            yaw_deg: -90.0,
            focal_px: 1250.0,
            image_width: 3840,
            image_height: 2160,
        }
    }

    pub fn model(&self) -> Result<CameraModel, SimError> {
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(SimError::invalid("camera.position", "must be finite"));
        }
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(SimError::invalid("camera.focal_px", "focal length must be positive"));
        }
        if !(0.0..90.0).contains(&self.tilt_deg) {
            return Err(SimError::invalid("camera.tilt_deg", "tilt must be in [0, 90)"));
        }
        if !self.yaw_deg.is_finite() {
            return Err(SimError::invalid("camera.yaw_deg", "must be finite"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(SimError::invalid("camera.image_width", "image size must be positive"));
        }
        let (st, ct) = (libm::sin(self.tilt_deg.to_radians()), libm::cos(self.tilt_deg.to_radians()));
        let (sy, cy) = (libm::sin(self.yaw_deg.to_radians()), libm::cos(self.yaw_deg.to_radians()));
        let z = Vector3::new(st * cy, st * sy, -ct);
        let x = Vector3::new(sy, -cy, 0.0);
        let y = z.cross(&x);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let c = Vector3::from(self.position);
        let (w, h) = (f64::from(self.image_width), f64::from(self.image_height));
        let k = Matrix3::new(self.focal_px, 0.0, w / 2.0, 0.0, self.focal_px, h / 2.0, 0.0, 0.0, 1.0);
        CameraModel::new(k, r, -(r * c), w, h)
    }
}

/// Pinhole projection `K [R | t] P`, dehomogenized.
pub fn project_world(cam: &CameraModel, p: &WorldPoint) -> Result<PixelPoint, SimError> {
    let pc = cam.r * Vector3::new(p.x, p.y, p.z) + cam.t;
    if !(pc.z > 0.0) {
        return Err(SimError::BehindCamera);
    }
    let q = cam.k * pc;
    Ok(PixelPoint::new(q.x / q.z, q.y / q.z))
}

/// Homography taking floor coordinates `(X, Y, 1)` to pixels:
/// `K [r₁ r₂ t]`.
pub fn ground_plane_homography(cam: &CameraModel) -> Result<Homography, SimError> {
    let mut m = Matrix3::zeros();
    m.set_column(0, &cam.r.column(0));
    m.set_column(1, &cam.r.column(1));
    m.set_column(2, &cam.t);
    Homography::new(cam.k * m).map_err(|_| SimError::DegenerateCamera)
}
