use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, HomogeneousPoint, PixelPoint};

/// Threshold on `|det|` of the canonical matrix and on `|w|` when dehomogenizing.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Invertible 3×3 projective map between two image planes.
///
/// The matrix is always stored in canonical form: unit Frobenius norm, with
/// the element of largest magnitude positive (first such element in
/// row-major order on ties). Two homographies that differ only by a non-zero
/// scale therefore compare equal element-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    /// Builds a homography from a matrix, normalizing it to canonical form.
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let m = canonicalize(m)?;
        let det = m.determinant();
        if !(libm::fabs(det) > SINGULAR_TOLERANCE) {
            return Err(GeometryError::Singular { det });
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity()).expect("identity is invertible")
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::from_rows([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
            .expect("translation is invertible")
    }

    /// The canonical matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// `H · (u, v, w)`.
    pub fn apply_homogeneous(&self, p: &HomogeneousPoint) -> HomogeneousPoint {
        let q = self.m * Vector3::new(p.u, p.v, p.w);
        HomogeneousPoint::new(q.x, q.y, q.z)
    }

    /// Maps an image point, failing when it lands on the line at infinity.
    pub fn apply(&self, p: PixelPoint) -> Result<PixelPoint, GeometryError> {
        self.apply_homogeneous(&p.into()).to_pixel()
    }

    /// `self ∘ inner`: applies `inner` first, then `self`.
    pub fn compose(&self, inner: &Homography) -> Result<Homography, GeometryError> {
        Homography::new(self.m * inner.m).map_err(|e| match e {
            GeometryError::Singular { det } => GeometryError::SingularResult { det },
            other => other,
        })
    }

    pub fn invert(&self) -> Result<Homography, GeometryError> {
        let det = self.m.determinant();
        let inv = self
            .m
            .try_inverse()
            .ok_or(GeometryError::Singular { det })?;
        Homography::new(inv)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonicalize(m: Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let norm = m.norm();
    if !(norm > 0.0) {
        return Err(GeometryError::Singular { det: 0.0 });
    }
    // Rescaling a matrix that is already unit-norm could move its last bits,
    // so canonical input is kept as is and `new(h.rows())` reproduces `h`.
    let mut scaled = if libm::fabs(norm - 1.0) <= 4.0 * f64::EPSILON { m } else { m / norm };
    // Row-major scan so ties resolve to the first element in reading order.
    let mut pivot = scaled[(0, 0)];
    for r in 0..3 {
        for c in 0..3 {
            if libm::fabs(scaled[(r, c)]) > libm::fabs(pivot) {
                pivot = scaled[(r, c)];
            }
        }
    }
    if pivot < 0.0 {
        scaled = -scaled;
    }
    Ok(scaled)
}

/// Frobenius distance between the canonical matrices of two homographies.
pub fn canonical_distance(a: &Homography, b: &Homography) -> f64 {
    (a.m - b.m).norm()
}
