//! Multi-camera multi-object tracking over a shared floor plane.
//!
//! Per-camera detection streams are tracked locally ([`local_tracker`]),
//! bound across views through the ceiling→angled floor homography
//! ([`geometry`], [`polygons`], [`global_tracker`]) and scored with CLEAR-MOT,
//! identity and handover metrics ([`metrics`]). [`simulator`] generates
//! synthetic pens with exact ground truth.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod geometry;
pub mod polygons;
pub mod local_tracker;
pub mod global_tracker;
pub mod metrics;
pub mod simulator;
