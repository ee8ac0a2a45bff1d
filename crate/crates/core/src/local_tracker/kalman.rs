//! Constant-velocity Kalman filter over `(cx, cy, aspect, height)` and their
//! velocities. Noise terms scale with the box height.

use nalgebra::{SMatrix, SVector};

use crate::polygons::{BoundingBox, PolygonError};

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
type MeasMatrix = SMatrix<f64, 4, 4>;
type ObsMatrix = SMatrix<f64, 4, 8>;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct KalmanParams {
    /// Position noise per unit of box height.
    pub std_weight_position: f64,
    /// Velocity noise per unit of box height.
    pub std_weight_velocity: f64,
    /// Multiplier on the measurement covariance.
    pub measurement_noise_scale: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            measurement_noise_scale: 1.0,
        }
    }
}

fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> ObsMatrix {
    ObsMatrix::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
}

/// Kalman state of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl TrackState {
    /// State for a freshly detected box, with zero velocity.
    pub fn initiate(b: &BoundingBox, p: &KalmanParams) -> Self {
        let z = b.to_xyah();
        let h = z[3];
        let (sp, sv) = (p.std_weight_position, p.std_weight_velocity);
        let std = [
            2.0 * sp * h,
            2.0 * sp * h,
            1e-2,
            2.0 * sp * h,
            10.0 * sv * h,
            10.0 * sv * h,
            1e-5,
            10.0 * sv * h,
        ];
        let mut mean = StateVector::zeros();
        for i in 0..4 {
            mean[i] = z[i];
        }
        Self {
            mean,
            covariance: StateMatrix::from_diagonal(&StateVector::from_fn(|i, _| std[i] * std[i])),
        }
    }

    /// Process noise for the current height.
    pub fn process_noise(&self, p: &KalmanParams) -> StateMatrix {
        let h = self.mean[3];
        let (sp, sv) = (p.std_weight_position, p.std_weight_velocity);
        let std = [sp * h, sp * h, 1e-2, sp * h, sv * h, sv * h, 1e-5, sv * h];
        StateMatrix::from_diagonal(&StateVector::from_fn(|i, _| std[i] * std[i]))
    }

    pub fn measurement_noise(&self, p: &KalmanParams) -> MeasMatrix {
        let h = self.mean[3];
        let sp = p.std_weight_position;
        let std = [sp * h, sp * h, 1e-1, sp * h];
        MeasMatrix::from_diagonal(&Measurement::from_fn(|i, _| std[i] * std[i] * p.measurement_noise_scale))
    }

    /// One constant-velocity step: `x ← F x`, `P ← F P Fᵀ + Q`.
    pub fn predict(&mut self, p: &KalmanParams) {
        // Keep aspect and height positive.
        for (i, v) in [(2, 6), (3, 7)] {
            if self.mean[i] + self.mean[v] <= 0.0 {
                self.mean[v] = 0.0;
            }
        }
        let q = self.process_noise(p);
        let f = transition();
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + q;
        self.symmetrize();
    }

    /// Measurement update with a box, Joseph form.
    pub fn update(&mut self, b: &BoundingBox, p: &KalmanParams) -> Result<(), PolygonError> {
        b.validate()?;
        let z = Measurement::from(b.to_xyah());
        let hm = observation();
        let r = self.measurement_noise(p);
        let s = hm * self.covariance * hm.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or(PolygonError::InvalidBox("singular innovation covariance"))?;
        let k = self.covariance * hm.transpose() * s_inv;
        self.mean += k * (z - hm * self.mean);
        let i_kh = StateMatrix::identity() - k * hm;
        self.covariance = i_kh * self.covariance * i_kh.transpose() + k * r * k.transpose();
        self.symmetrize();
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;
    }

    /// Current box estimate.
    pub fn to_box(&self) -> Result<BoundingBox, PolygonError> {
        BoundingBox::from_xyah(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}
