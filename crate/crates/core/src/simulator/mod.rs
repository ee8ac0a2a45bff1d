//! Synthetic two-camera pen: agents walking on the floor, seen by an
//! overhead and an oblique pinhole camera, with exact ground truth and
//! optional detector-style noise.
//!
//! The default camera mounts are plausible stand-ins for a pen of about
//! 6 m × 12 m; real intrinsics are not known.

mod camera;

pub use camera::{ground_plane_homography, project_world, CameraModel, CameraMount, WorldPoint};

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use crate::geometry::{Correspondence, GeometryError, Homography, PixelPoint};
use crate::global_tracker::Camera;
use crate::local_tracker::Detection;
use crate::metrics::AnnotatedBox;
use crate::polygons::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: &'static str, reason: &'static str },
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("camera lies on the floor plane")]
    DegenerateCamera,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl SimError {
    pub(crate) fn invalid(field: &'static str, reason: &'static str) -> Self {
        Self::ConfigInvalid { field, reason }
    }
}

/// Detector failure knobs. Each knob draws from its own random stream, so
/// changing one leaves the draws of the others untouched.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseConfig {
    /// Probability that a visible agent yields no detection.
    pub dropout_prob: f64,
    /// Standard deviation of independent per-edge box noise, in pixels.
    pub jitter_sigma: f64,
    /// Mean number of spurious boxes per camera frame.
    pub false_positive_rate: f64,
    /// Probability that an agent is fused with its nearest overlapping neighbour.
    pub merge_prob: f64,
    /// Probability that an agent is emitted as two half boxes.
    pub split_prob: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("noise.dropout_prob", self.dropout_prob),
            ("noise.merge_prob", self.merge_prob),
            ("noise.split_prob", self.split_prob),
        ];
        for (field, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::invalid(field, "probability must be in [0, 1]"));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(SimError::invalid("noise.jitter_sigma", "must be finite and non-negative"));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err(SimError::invalid("noise.false_positive_rate", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PenConfig {
    /// Floor extent along X, metres.
    pub floor_width: f64,
    /// Floor extent along Y, metres.
    pub floor_depth: f64,
    pub n_agents: usize,
    /// Footprint length along the heading, metres.
    pub footprint_length: f64,
    pub footprint_width: f64,
    pub fps: f64,
    /// Frames emitted per camera.
    pub duration: u32,
    /// Speed cap, metres per second.
    pub max_speed: f64,
    /// Standard deviation of the per-frame heading change, radians.
    pub heading_noise: f64,
    /// Body rotation cap, radians per second. The body turns towards the
    /// walking direction no faster than this.
    pub max_turn_rate: f64,
    /// Agent centres never come closer than this, metres.
    pub min_separation: f64,
    /// Optional `[x_min, y_min, x_max, y_max]` for initial placement.
    pub spawn_region: Option<[f64; 4]>,
    pub ceiling: CameraMount,
    pub angled: CameraMount,
    /// Angled frame `f + offset` shows the same instant as ceiling frame `f`.
    pub angled_frame_offset: i64,
    /// Spacing of the floor grid sampled for correspondences, metres.
    pub grid_spacing: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for PenConfig {
    fn default() -> Self {
        Self {
            floor_width: 6.0,
            floor_depth: 12.0,
            n_agents: 17,
            footprint_length: 1.0,
            footprint_width: 0.4,
            fps: 15.0,
            duration: 1800,
            max_speed: 0.5,
            heading_noise: 0.1,
            max_turn_rate: 0.75,
            min_separation: 1.6,
            spawn_region: None,
            ceiling: CameraMount::default_ceiling(),
            angled: CameraMount::default_angled(),
            angled_frame_offset: 0,
            grid_spacing: 0.5,
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

impl PenConfig {
    /// Distance from an agent centre to its farthest footprint corner.
    pub fn wall_margin(&self) -> f64 {
        0.5 * libm::hypot(self.footprint_length, self.footprint_width)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("floor_width", self.floor_width),
            ("floor_depth", self.floor_depth),
            ("footprint_length", self.footprint_length),
            ("footprint_width", self.footprint_width),
            ("fps", self.fps),
            ("grid_spacing", self.grid_spacing),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::invalid(field, "must be positive and finite"));
            }
        }
        let non_negative = [
            ("max_speed", self.max_speed),
            ("heading_noise", self.heading_noise),
            ("max_turn_rate", self.max_turn_rate),
            ("min_separation", self.min_separation),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::invalid(field, "must be non-negative and finite"));
            }
        }
        let m = self.wall_margin();
        if self.floor_width <= 2.0 * m || self.floor_depth <= 2.0 * m {
            return Err(SimError::invalid("footprint_length", "footprint does not fit in the pen"));
        }
        if let Some([x0, y0, x1, y1]) = self.spawn_region {
            let inside = x0 >= m && y0 >= m && x1 <= self.floor_width - m && y1 <= self.floor_depth - m;
            if !(x0 <= x1 && y0 <= y1 && inside) {
                return Err(SimError::invalid("spawn_region", "must be a box inside the pen, a footprint away from the walls"));
            }
        }
        if self.angled_frame_offset.unsigned_abs() > u64::from(u32::MAX - self.duration) {
            return Err(SimError::invalid("angled_frame_offset", "offset overflows the frame counter"));
        }
        self.noise.validate()?;
        self.ceiling.model()?;
        self.angled.model()?;
        Ok(())
    }

    /// World step shown by frame `frame` of `camera`.
    pub fn world_step(&self, camera: Camera, frame: u32) -> usize {
        let o = self.angled_frame_offset;
        let shift = match camera {
            Camera::Ceiling => o.max(0),
            Camera::Angled => (-o).max(0),
        };
        frame as usize + shift as usize
    }

    fn world_steps(&self) -> usize {
        self.duration as usize + self.angled_frame_offset.unsigned_abs() as usize
    }
}

/// Floor position of one agent at one instant, with its walking direction
/// and the direction its body's long axis points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub orientation: f64,
}

impl AgentPose {
    pub fn footprint(&self, length: f64, width: f64) -> [WorldPoint; 4] {
        let (s, c) = (libm::sin(self.orientation), libm::cos(self.orientation));
        let (hl, hw) = (length / 2.0, width / 2.0);
        [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)].map(|(dx, dy)| WorldPoint::floor(self.x + dx * c - dy * s, self.y + dx * s + dy * c))
    }
}

/// Everything one simulation run emits.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub ceiling_detections: Vec<Detection>,
    pub angled_detections: Vec<Detection>,
    /// Sorted by camera, frame, identity. The identity of agent `i` is `i + 1`.
    pub ground_truth: Vec<AnnotatedBox>,
    pub h_floor_to_ceiling: Homography,
    pub h_floor_to_angled: Homography,
    pub h_ceiling_to_angled: Homography,
    /// Ceiling pixel → angled pixel for floor grid points seen by both cameras.
    pub correspondences: Vec<Correspondence>,
    /// `trajectories[step][agent]`, one row per world step.
    pub trajectories: Vec<Vec<AgentPose>>,
}

impl SceneBundle {
    pub fn detections(&self, camera: Camera) -> &[Detection] {
        match camera {
            Camera::Ceiling => &self.ceiling_detections,
            Camera::Angled => &self.angled_detections,
        }
    }
}

// Stream layout: one ChaCha stream per purpose so knobs do not perturb each other.
const STREAM_MOTION: u64 = 1;
const STREAM_NOISE_BASE: u64 = 16;

#[derive(Clone, Copy)]
enum NoiseStream {
    Dropout,
    Split,
    Jitter,
    Merge,
    FalsePositive,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn noise_stream(seed: u64, camera: Camera, kind: NoiseStream) -> ChaCha8Rng {
    stream(seed, STREAM_NOISE_BASE + 8 * camera as u64 + kind as u64)
}

fn wrap_angle(a: f64) -> f64 {
    libm::remainder(a, 2.0 * PI)
}

fn too_close(x: f64, y: f64, others: impl Iterator<Item = (f64, f64)>, min_sep: f64) -> bool {
    others.into_iter().any(|(ox, oy)| libm::hypot(x - ox, y - oy) < min_sep)
}

fn place_agents(cfg: &PenConfig, rng: &mut ChaCha8Rng) -> Result<Vec<AgentPose>, SimError> {
    let m = cfg.wall_margin();
    let [x0, y0, x1, y1] = cfg.spawn_region.unwrap_or([m, m, cfg.floor_width - m, cfg.floor_depth - m]);
    let mut agents: Vec<AgentPose> = Vec::with_capacity(cfg.n_agents);
    const ATTEMPTS: usize = 20_000;
    for _ in 0..cfg.n_agents {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let x = x0 + (x1 - x0) * rng.random::<f64>();
            let y = y0 + (y1 - y0) * rng.random::<f64>();
            let heading = 2.0 * PI * rng.random::<f64>() - PI;
            if !too_close(x, y, agents.iter().map(|a| (a.x, a.y)), cfg.min_separation) {
                agents.push(AgentPose { x, y, heading, orientation: heading });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::invalid("n_agents", "agents do not fit at the requested separation"));
        }
    }
    Ok(agents)
}

fn reflect(v: f64, lo: f64, hi: f64) -> (f64, bool) {
    if v < lo {
        ((2.0 * lo - v).min(hi), true)
    } else if v > hi {
        ((2.0 * hi - v).max(lo), true)
    } else {
        (v, false)
    }
}

/// Bounded random walk with heading persistence. Walls reflect; a step
/// that would bring an agent within `min_separation` of another is
/// refused and the agent turns around.
pub fn simulate_motion(cfg: &PenConfig) -> Result<Vec<Vec<AgentPose>>, SimError> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, STREAM_MOTION);
    let mut agents = place_agents(cfg, &mut rng)?;
    let speeds: Vec<f64> = (0..cfg.n_agents).map(|_| cfg.max_speed * (0.3 + 0.7 * rng.random::<f64>())).collect();
    let m = cfg.wall_margin();
    let steps = cfg.world_steps();
    let mut out = Vec::with_capacity(steps);
    for step in 0..steps {
        if step > 0 {
            for i in 0..agents.len() {
                let turn: f64 = StandardNormal.sample(&mut rng);
                let mut a = agents[i];
                a.heading = wrap_angle(a.heading + cfg.heading_noise * turn);
                let d = speeds[i] / cfg.fps;
                let (x, bx) = reflect(a.x + d * libm::cos(a.heading), m, cfg.floor_width - m);
                let (y, by) = reflect(a.y + d * libm::sin(a.heading), m, cfg.floor_depth - m);
                if bx {
                    a.heading = wrap_angle(PI - a.heading);
                }
                if by {
                    a.heading = wrap_angle(-a.heading);
                }
                let others = agents.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| (o.x, o.y));
                if too_close(x, y, others, cfg.min_separation) {
                    a.heading = wrap_angle(a.heading + PI);
                } else {
                    a.x = x;
                    a.y = y;
                }
                // The footprint is symmetric, so the body aligns modulo π.
                let lag = libm::remainder(a.heading - a.orientation, PI);
                let cap = cfg.max_turn_rate / cfg.fps;
                a.orientation = wrap_angle(a.orientation + lag.clamp(-cap, cap));
                agents[i] = a;
            }
        }
        out.push(agents.clone());
    }
    Ok(out)
}

/// Image box of a footprint, or `None` unless every corner is in front of
/// the camera and inside the image.
pub fn visible_box(cam: &CameraModel, corners: &[WorldPoint; 4]) -> Option<BoundingBox> {
    let mut px = [PixelPoint::default(); 4];
    for (p, w) in px.iter_mut().zip(corners) {
        *p = project_world(cam, w).ok()?;
        if !cam.in_image(p) {
            return None;
        }
    }
    BoundingBox::hull_of(&px)
}

fn floor_grid(cfg: &PenConfig, ceiling: &CameraModel, angled: &CameraModel) -> Vec<Correspondence> {
    let mut out = Vec::new();
    let nx = libm::floor(cfg.floor_width / cfg.grid_spacing) as usize;
    let ny = libm::floor(cfg.floor_depth / cfg.grid_spacing) as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = WorldPoint::floor(i as f64 * cfg.grid_spacing, j as f64 * cfg.grid_spacing);
            let (Ok(a), Ok(b)) = (project_world(ceiling, &p), project_world(angled, &p)) else { continue };
            if ceiling.in_image(&a) && angled.in_image(&b) {
                out.push(Correspondence::new(a, b));
            }
        }
    }
    out
}

struct NoiseStreams {
    dropout: ChaCha8Rng,
    split: ChaCha8Rng,
    jitter: ChaCha8Rng,
    merge: ChaCha8Rng,
    fp: ChaCha8Rng,
}

impl NoiseStreams {
    fn new(seed: u64, camera: Camera) -> Self {
        Self {
            dropout: noise_stream(seed, camera, NoiseStream::Dropout),
            split: noise_stream(seed, camera, NoiseStream::Split),
            jitter: noise_stream(seed, camera, NoiseStream::Jitter),
            merge: noise_stream(seed, camera, NoiseStream::Merge),
            fp: noise_stream(seed, camera, NoiseStream::FalsePositive),
        }
    }
}

fn jitter(b: &BoundingBox, e: [f64; 4], cam: &CameraModel) -> BoundingBox {
    let clamp_x = |v: f64| v.clamp(0.0, cam.image_width);
    let clamp_y = |v: f64| v.clamp(0.0, cam.image_height);
    let x_min = clamp_x(b.x_min + e[0]);
    let y_min = clamp_y(b.y_min + e[1]);
    let x_max = clamp_x(b.x_max + e[2]).max(x_min + 1.0);
    let y_max = clamp_y(b.y_max + e[3]).max(y_min + 1.0);
    BoundingBox { x_min, y_min, x_max, y_max }
}

fn halves(b: &BoundingBox) -> [BoundingBox; 2] {
    if b.width() >= b.height() {
        let mid = (b.x_min + b.x_max) / 2.0;
        [BoundingBox { x_max: mid, ..*b }, BoundingBox { x_min: mid, ..*b }]
    } else {
        let mid = (b.y_min + b.y_max) / 2.0;
        [BoundingBox { y_max: mid, ..*b }, BoundingBox { y_min: mid, ..*b }]
    }
}

fn detection(frame: u32, bbox: BoundingBox, confidence: f64) -> Detection {
    Detection {
        frame,
        bbox,
        confidence,
        appearance: None,
    }
}

/// Turns the true boxes of one camera frame into detector output. `truth`
/// has one slot per agent, `None` where the agent is not visible. Draws
/// are taken for every agent slot whether or not it is visible.
fn noisy_frame(frame: u32, truth: &[Option<BoundingBox>], noise: &NoiseConfig, cam: &CameraModel, rng: &mut NoiseStreams) -> Vec<Detection> {
    struct Slot {
        bbox: BoundingBox,
        split: bool,
        merge: bool,
    }
    let mut slots: Vec<Option<Slot>> = Vec::with_capacity(truth.len());
    for t in truth {
        let drop = rng.dropout.random::<f64>() < noise.dropout_prob;
        let split = rng.split.random::<f64>() < noise.split_prob;
        let e: [f64; 4] = core::array::from_fn(|_| {
            let z: f64 = StandardNormal.sample(&mut rng.jitter);
            noise.jitter_sigma * z
        });
        let merge = rng.merge.random::<f64>() < noise.merge_prob;
        slots.push(match t {
            Some(b) if !drop => Some(Slot {
                bbox: if noise.jitter_sigma > 0.0 { jitter(b, e, cam) } else { *b },
                split,
                merge,
            }),
            _ => None,
        });
    }
    // Merges: the agent absorbs its most-overlapping surviving neighbour.
    let mut out = Vec::new();
    for i in 0..slots.len() {
        let Some(s) = &slots[i] else { continue };
        if s.merge {
            let partner = (0..slots.len())
                .filter(|&j| j != i)
                .filter_map(|j| slots[j].as_ref().map(|o| (j, s.bbox.intersection_area(&o.bbox))))
                .filter(|&(_, a)| a > 0.0)
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
            if let Some((j, _)) = partner {
                let fused = s.bbox.union_hull(&slots[j].as_ref().expect("partner survives").bbox);
                slots[j] = None;
                slots[i] = None;
                out.push(detection(frame, fused, 1.0));
                continue;
            }
        }
        if s.split {
            for h in halves(&s.bbox) {
                out.push(detection(frame, h, 1.0));
            }
        } else {
            out.push(detection(frame, s.bbox, 1.0));
        }
        slots[i] = None;
    }
    if noise.false_positive_rate > 0.0 {
        let n = Poisson::new(noise.false_positive_rate).expect("rate validated").sample(&mut rng.fp) as u64;
        for _ in 0..n {
            let w = 60.0 + 240.0 * rng.fp.random::<f64>();
            let h = 60.0 + 240.0 * rng.fp.random::<f64>();
            let x = (cam.image_width - w).max(0.0) * rng.fp.random::<f64>();
            let y = (cam.image_height - h).max(0.0) * rng.fp.random::<f64>();
            let bbox = BoundingBox {
                x_min: x,
                y_min: y,
                x_max: x + w,
                y_max: y + h,
            };
            out.push(detection(frame, bbox, 0.5));
        }
    }
    out
}

/// Runs the pen and renders both cameras.
pub fn simulate(cfg: &PenConfig) -> Result<SceneBundle, SimError> {
    cfg.validate()?;
    let cams = [cfg.ceiling.model()?, cfg.angled.model()?];
    let h_floor_to_ceiling = ground_plane_homography(&cams[0])?;
    let h_floor_to_angled = ground_plane_homography(&cams[1])?;
    let h_ceiling_to_angled = h_floor_to_angled.compose(&h_floor_to_ceiling.invert()?)?;
    let trajectories = simulate_motion(cfg)?;

    let mut ground_truth = Vec::new();
    let mut dets: [Vec<Detection>; 2] = [Vec::new(), Vec::new()];
    for camera in Camera::ALL {
        let cam = &cams[camera as usize];
        let mut rng = NoiseStreams::new(cfg.seed, camera);
        for frame in 0..cfg.duration {
            let poses = &trajectories[cfg.world_step(camera, frame)];
            let truth: Vec<Option<BoundingBox>> = poses
                .iter()
                .map(|p| visible_box(cam, &p.footprint(cfg.footprint_length, cfg.footprint_width)))
                .collect();
            for (i, b) in truth.iter().enumerate() {
                if let Some(b) = b {
                    ground_truth.push(AnnotatedBox {
                        camera,
                        frame,
                        identity: i as u32 + 1,
                        bbox: *b,
                    });
                }
            }
            dets[camera as usize].extend(noisy_frame(frame, &truth, &cfg.noise, cam, &mut rng));
        }
    }
    let [ceiling_detections, angled_detections] = dets;
    Ok(SceneBundle {
        ceiling_detections,
        angled_detections,
        ground_truth,
        h_floor_to_ceiling,
        h_floor_to_angled,
        h_ceiling_to_angled,
        correspondences: floor_grid(cfg, &cams[0], &cams[1]),
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_distance, estimate_dlt};
    use crate::polygons::{intersection_area, project_box};
    use proptest::prelude::*;

    fn small(n_agents: usize, duration: u32) -> PenConfig {
        PenConfig {
            n_agents,
            duration,
            ..PenConfig::default()
        }
    }

    #[test]
    fn one_agent_ten_frames() {
        let cfg = PenConfig {
            spawn_region: Some([2.5, 5.5, 3.5, 6.5]),
            ..small(1, 10)
        };
        let s = simulate(&cfg).unwrap();
        assert_eq!(s.ceiling_detections.len(), 10);
        assert_eq!(s.angled_detections.len(), 10);
        assert!(s.ground_truth.iter().all(|g| g.identity == 1));
        assert_eq!(s.ground_truth.len(), 20);
    }

    #[test]
    fn full_dropout_leaves_ground_truth() {
        let mut cfg = small(6, 30);
        cfg.noise.dropout_prob = 1.0;
        let s = simulate(&cfg).unwrap();
        assert!(s.ceiling_detections.is_empty() && s.angled_detections.is_empty());
        assert_eq!(s.ground_truth, simulate(&small(6, 30)).unwrap().ground_truth);
        assert!(!s.ground_truth.is_empty());
    }

    #[test]
    fn rerun_is_identical() {
        let mut cfg = small(10, 60);
        cfg.noise = NoiseConfig {
            dropout_prob: 0.1,
            jitter_sigma: 3.0,
            false_positive_rate: 0.5,
            merge_prob: 0.1,
            split_prob: 0.1,
        };
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        cfg.seed = 1;
        assert_ne!(simulate(&cfg).unwrap().trajectories, simulate(&small(10, 60)).unwrap().trajectories);
    }

    #[test]
    fn clean_detections_equal_ground_truth() {
        let s = simulate(&small(17, 40)).unwrap();
        for camera in Camera::ALL {
            let gt: Vec<_> = s.ground_truth.iter().filter(|g| g.camera == camera).map(|g| (g.frame, g.bbox)).collect();
            let det: Vec<_> = s.detections(camera).iter().map(|d| (d.frame, d.bbox)).collect();
            assert_eq!(gt, det);
        }
    }

    #[test]
    fn correspondences_recover_true_homography() {
        let s = simulate(&small(0, 1)).unwrap();
        assert!(s.correspondences.len() > 20);
        let h = estimate_dlt(&s.correspondences).unwrap();
        assert!(canonical_distance(&h, &s.h_ceiling_to_angled) < 1e-6);
    }

    #[test]
    fn dropout_is_monotone_in_probability() {
        // Common random numbers: a higher rate drops a superset.
        let mut cfg = small(12, 50);
        let count = |p: f64, cfg: &mut PenConfig| {
            cfg.noise.dropout_prob = p;
            let s = simulate(cfg).unwrap();
            s.ceiling_detections.len() + s.angled_detections.len()
        };
        let counts: Vec<_> = [0.0, 0.1, 0.2, 0.3].iter().map(|&p| count(p, &mut cfg)).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn desync_shifts_one_stream() {
        let base = simulate(&small(5, 30)).unwrap();
        let mut cfg = small(5, 30);
        cfg.angled_frame_offset = 7;
        let s = simulate(&cfg).unwrap();
        // Ceiling frame f shows world step f + 7; angled frame f + 7 shows the same.
        assert_eq!(cfg.world_step(Camera::Ceiling, 3), 10);
        assert_eq!(cfg.world_step(Camera::Angled, 10), 10);
        assert_eq!(base.trajectories[..30], s.trajectories[..30]);
        let ang = |b: &SceneBundle, f: u32| -> Vec<_> { b.ground_truth.iter().filter(|g| g.camera == Camera::Angled && g.frame == f).map(|g| (g.identity, g.bbox)).collect() };
        assert_eq!(ang(&s, 12), ang(&base, 12));
        cfg.angled_frame_offset = -7;
        assert_eq!(cfg.world_step(Camera::Angled, 3), 10);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let field = |cfg: PenConfig| match simulate(&cfg) {
            Err(SimError::ConfigInvalid { field, .. }) => field,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        };
        assert_eq!(field(PenConfig { fps: 0.0, ..small(1, 1) }), "fps");
        assert_eq!(field(PenConfig { n_agents: 200, ..small(1, 1) }), "n_agents");
        let mut cfg = small(1, 1);
        cfg.noise.merge_prob = 1.5;
        assert_eq!(field(cfg), "noise.merge_prob");
        let mut cfg = small(1, 1);
        cfg.angled.tilt_deg = 95.0;
        assert_eq!(field(cfg), "camera.tilt_deg");
    }

    #[test]
    fn default_cameras_cover_the_pen() {
        // Every floor position a footprint can occupy is fully seen by at
        // least one camera, whatever its heading.
        let cfg = PenConfig::default();
        let cams = [cfg.ceiling.model().unwrap(), cfg.angled.model().unwrap()];
        let m = cfg.wall_margin();
        let (mut both_min, mut both_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=60 {
            for i in 0..=20 {
                let x = m + (cfg.floor_width - 2.0 * m) * i as f64 / 20.0;
                let y = m + (cfg.floor_depth - 2.0 * m) * j as f64 / 60.0;
                let seen = |c: &CameraModel| {
                    (0..8).all(|k| {
                        let p = AgentPose { x, y, heading: 0.0, orientation: PI * k as f64 / 8.0 };
                        visible_box(c, &p.footprint(1.0, 0.4)).is_some()
                    })
                };
                let (c, a) = (seen(&cams[0]), seen(&cams[1]));
                assert!(c || a, "hole at ({x}, {y})");
                if c && a {
                    both_min = both_min.min(y);
                    both_max = both_max.max(y);
                }
            }
        }
        // An overlap band of roughly 30% of the depth.
        let band = (both_max - both_min) / cfg.floor_depth;
        assert!((0.2..0.4).contains(&band), "{band}");
    }

    #[test]
    fn own_agent_wins_the_projected_overlap() {
        let cfg = small(17, 300);
        let s = simulate(&cfg).unwrap();
        let at = |camera: Camera, f: u32| -> Vec<(u32, BoundingBox)> {
            s.ground_truth.iter().filter(|g| g.camera == camera && g.frame == f).map(|g| (g.identity, g.bbox)).collect()
        };
        let mut checked = 0;
        for f in 0..cfg.duration {
            let (c, a) = (at(Camera::Ceiling, f), at(Camera::Angled, f));
            for (id, cb) in &c {
                let Some((_, own)) = a.iter().find(|(j, _)| j == id) else { continue };
                let q = project_box(&s.h_ceiling_to_angled, cb).unwrap();
                let mine = intersection_area(&q, own);
                for (j, other) in &a {
                    if j != id {
                        assert!(mine > intersection_area(&q, other), "frame {f} agent {id} vs {j}");
                    }
                }
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn agents_stay_inside_and_apart(seed in any::<u64>(), n in 1usize..18) {
            let cfg = PenConfig { seed, n_agents: n, duration: 150, ..PenConfig::default() };
            let m = cfg.wall_margin();
            for poses in simulate_motion(&cfg).unwrap() {
                for (i, p) in poses.iter().enumerate() {
                    for q in p.footprint(cfg.footprint_length, cfg.footprint_width) {
                        prop_assert!(q.x >= -1e-9 && q.x <= cfg.floor_width + 1e-9);
                        prop_assert!(q.y >= -1e-9 && q.y <= cfg.floor_depth + 1e-9);
                    }
                    prop_assert!(p.x >= m && p.y >= m);
                    for o in &poses[i + 1..] {
                        prop_assert!(libm::hypot(p.x - o.x, p.y - o.y) >= cfg.min_separation);
                    }
                }
            }
        }

        #[test]
        fn per_frame_speed_is_capped(seed in any::<u64>()) {
            let cfg = PenConfig { seed, n_agents: 8, duration: 100, ..PenConfig::default() };
            let t = simulate_motion(&cfg).unwrap();
            for w in t.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    prop_assert!(libm::hypot(a.x - b.x, a.y - b.y) <= cfg.max_speed / cfg.fps + 1e-12);
                    let turn = libm::remainder(b.orientation - a.orientation, PI).abs();
                    prop_assert!(turn <= cfg.max_turn_rate / cfg.fps + 1e-12);
                }
            }
        }
    }
}
