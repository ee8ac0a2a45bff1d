use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Correspondence, GeometryError, Homography, PixelPoint};

type Mat9 = SMatrix<f64, 9, 9>;
type Vec9 = SVector<f64, 9>;

/// Relative eigenvalue gap below which the DLT null space is considered
/// more than one-dimensional.
const RANK_TOLERANCE: f64 = 1e-10;
/// Collinearity threshold on twice the triangle area, in normalized units.
const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Forward reprojection error `‖H·src − dst‖` in pixels. Points mapped to
/// infinity yield `f64::INFINITY`.
pub fn reprojection_error(h: &Homography, pair: &Correspondence) -> f64 {
    match h.apply(pair.src) {
        Ok(p) => p.distance(&pair.dst),
        Err(_) => f64::INFINITY,
    }
}

/// Isotropic normalization: centroid to the origin, mean distance √2.
fn normalizer<'a>(points: impl Iterator<Item = &'a PixelPoint> + Clone) -> Option<Matrix3<f64>> {
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in points.clone() {
        sx += p.x;
        sy += p.y;
        n += 1.0;
    }
    let (cx, cy) = (sx / n, sy / n);
    let mean = points.map(|p| libm::hypot(p.x - cx, p.y - cy)).sum::<f64>() / n;
    if !(mean > 1e-12) || !mean.is_finite() {
        return None;
    }
    let s = core::f64::consts::SQRT_2 / mean;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: &PixelPoint) -> (f64, f64) {
    (t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

fn any_three_collinear(points: &[(f64, f64)]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if libm::fabs(cross) < COLLINEAR_TOLERANCE {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized direct linear transform over all given correspondences.
///
/// The result minimizes the algebraic residual `‖A·h‖` subject to `‖h‖ = 1`
/// in Hartley-normalized coordinates, then is mapped back to pixels.
pub fn estimate_dlt(pairs: &[Correspondence]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPoints {
            needed: 4,
            got: pairs.len(),
        });
    }
    if pairs.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let t_src = normalizer(pairs.iter().map(|p| &p.src))
        .ok_or(GeometryError::DegenerateConfiguration("coincident source points"))?;
    let t_dst = normalizer(pairs.iter().map(|p| &p.dst))
        .ok_or(GeometryError::DegenerateConfiguration("coincident destination points"))?;

    let src: Vec<(f64, f64)> = pairs.iter().map(|p| transform(&t_src, &p.src)).collect();
    let dst: Vec<(f64, f64)> = pairs.iter().map(|p| transform(&t_dst, &p.dst)).collect();
    if pairs.len() == 4 && (any_three_collinear(&src) || any_three_collinear(&dst)) {
        return Err(GeometryError::DegenerateConfiguration("three collinear points in minimal sample"));
    }

    // Accumulate AᵀA directly; two rows per correspondence.
    let mut ata = Mat9::zeros();
    for (&(x, y), &(u, v)) in src.iter().zip(dst.iter()) {
        let r1 = Vec9::from_column_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        let r2 = Vec9::from_column_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
        ata += r1 * r1.transpose() + r2 * r2.transpose();
    }

    let eig = SymmetricEigen::new(ata);
    let mut order: [usize; 9] = core::array::from_fn(|i| i);
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[8]];
    let second = eig.eigenvalues[order[1]];
    if !(second > RANK_TOLERANCE * largest) {
        return Err(GeometryError::DegenerateConfiguration("correspondences do not determine a unique homography"));
    }
    let h = eig.eigenvectors.column(order[0]);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or(GeometryError::DegenerateConfiguration("normalizer not invertible"))?;
    Homography::new(t_dst_inv * h_norm * t_src).map_err(|e| match e {
        GeometryError::Singular { .. } => GeometryError::DegenerateConfiguration("estimate is singular"),
        other => other,
    })
}

/// RANSAC settings; the seed is mandatory so every run is reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RansacParams {
    pub threshold_px: f64,
    pub iterations: u32,
    pub seed: u64,
}

impl RansacParams {
    pub const DEFAULT_THRESHOLD_PX: f64 = 3.0;
    pub const DEFAULT_ITERATIONS: u32 = 1000;

    pub fn with_seed(seed: u64) -> Self {
        Self {
            threshold_px: Self::DEFAULT_THRESHOLD_PX,
            iterations: Self::DEFAULT_ITERATIONS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacEstimate {
    pub homography: Homography,
    /// `inliers[i]` is true when pair `i` reprojects within the threshold.
    pub inliers: Vec<bool>,
}

impl RansacEstimate {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

fn inlier_mask(h: &Homography, pairs: &[Correspondence], threshold: f64) -> Vec<bool> {
    pairs.iter().map(|p| reprojection_error(h, p) <= threshold).collect()
}

fn select(pairs: &[Correspondence], mask: &[bool]) -> Vec<Correspondence> {
    pairs
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(p, _)| *p)
        .collect()
}

/// Robust homography estimation: 4-point DLT hypotheses scored by inlier
/// count, the best consensus set refit with [`estimate_dlt`].
pub fn estimate_ransac(pairs: &[Correspondence], params: &RansacParams) -> Result<RansacEstimate, GeometryError> {
    if !(params.threshold_px > 0.0) {
        return Err(GeometryError::InvalidParameter("threshold_px must be positive"));
    }
    if params.iterations == 0 {
        return Err(GeometryError::InvalidParameter("iterations must be at least 1"));
    }
    if pairs.len() < 4 {
        return Err(GeometryError::NoConsensus { best: 0 });
    }
    if pairs.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vec<bool>)> = None;
    for _ in 0..params.iterations {
        let sample = rand::seq::index::sample(&mut rng, pairs.len(), 4);
        let minimal: [Correspondence; 4] = core::array::from_fn(|i| pairs[sample.index(i)]);
        let Ok(h) = estimate_dlt(&minimal) else {
            continue;
        };
        let mask = inlier_mask(&h, pairs, params.threshold_px);
        let count = mask.iter().filter(|&&b| b).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            let all = count == pairs.len();
            best = Some((count, mask));
            if all {
                break;
            }
        }
    }

    let (count, mut mask) = best.unwrap_or((0, Vec::new()));
    if count < 4 {
        return Err(GeometryError::NoConsensus { best: count });
    }
    let mut homography = estimate_dlt(&select(pairs, &mask))?;
    // Refit until the consensus set stops changing.
    for _ in 0..4 {
        let refined = inlier_mask(&homography, pairs, params.threshold_px);
        if refined == mask || refined.iter().filter(|&&b| b).count() < 4 {
            break;
        }
        match estimate_dlt(&select(pairs, &refined)) {
            Ok(h) => {
                homography = h;
                mask = refined;
            }
            Err(_) => break,
        }
    }
    let inliers = inlier_mask(&homography, pairs, params.threshold_px);
    Ok(RansacEstimate { homography, inliers })
}

/// Ceiling→angled map assembled from the two top-down rectifications and
/// the top-view registration: `H_angled→top⁻¹ ∘ H_top→top ∘ H_ceiling→top`.
pub fn compose_ceiling_to_angled(
    h_ceiling_to_top: &Homography,
    h_angled_to_top: &Homography,
    h_topceiling_to_topangled: &Homography,
) -> Result<Homography, GeometryError> {
    let to_angled_top = h_topceiling_to_topangled.compose(h_ceiling_to_top)?;
    h_angled_to_top.invert()?.compose(&to_angled_top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::canonical_distance;
    use alloc::vec;
    use rand::Rng;

    fn planted(seed: u64) -> Homography {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let m = Matrix3::from_fn(|r, c| {
                let base = if r == c { 1.0 } else { 0.0 };
                match (r, c) {
                    (2, 0) | (2, 1) => 2e-4 * (rng.random::<f64>() - 0.5),
                    (0, 2) | (1, 2) => 400.0 * (rng.random::<f64>() - 0.5),
                    _ => base + 0.4 * (rng.random::<f64>() - 0.5),
                }
            });
            if let Ok(h) = Homography::new(m) {
                return h;
            }
        }
    }

    fn exact_pairs(h: &Homography, n: usize, seed: u64) -> Vec<Correspondence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let src = PixelPoint::new(rng.random_range(0.0..3840.0), rng.random_range(0.0..2160.0));
                Correspondence::new(src, h.apply(src).unwrap())
            })
            .collect()
    }

    fn square(dx: f64, dy: f64) -> Vec<Correspondence> {
        [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| Correspondence::new(PixelPoint::new(x, y), PixelPoint::new(x + dx, y + dy)))
            .collect()
    }

    #[test]
    fn unit_square_gives_identity_and_translation() {
        let h = estimate_dlt(&square(0.0, 0.0)).unwrap();
        assert!(canonical_distance(&h, &Homography::identity()) < 1e-12);
        let h = estimate_dlt(&square(5.0, 0.0)).unwrap();
        assert!(canonical_distance(&h, &Homography::translation(5.0, 0.0)) < 1e-12);
    }

    #[test]
    fn dlt_recovers_planted_homography() {
        for seed in 0..25 {
            let h = planted(seed);
            let pairs = exact_pairs(&h, 8, seed + 100);
            let est = estimate_dlt(&pairs).unwrap();
            assert!(canonical_distance(&est, &h) < 1e-6, "seed {seed}");
            let worst = pairs.iter().map(|p| reprojection_error(&est, p)).fold(0.0, f64::max);
            assert!(worst < 1e-6, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn dlt_rejects_degenerate_inputs() {
        assert_eq!(
            estimate_dlt(&square(0.0, 0.0)[..3]),
            Err(GeometryError::TooFewPoints { needed: 4, got: 3 })
        );
        let collinear: Vec<_> = (0..6)
            .map(|i| {
                let p = PixelPoint::new(i as f64, 2.0 * i as f64);
                Correspondence::new(p, p)
            })
            .collect();
        assert!(matches!(estimate_dlt(&collinear), Err(GeometryError::DegenerateConfiguration(_))));
        let mut three = square(0.0, 0.0);
        three[2].src = PixelPoint::new(2.0, 0.0);
        assert!(matches!(estimate_dlt(&three), Err(GeometryError::DegenerateConfiguration(_))));
        let same = vec![Correspondence::new(PixelPoint::new(1.0, 1.0), PixelPoint::new(2.0, 2.0)); 5];
        assert!(matches!(estimate_dlt(&same), Err(GeometryError::DegenerateConfiguration(_))));
    }

    #[test]
    fn ransac_without_outliers_equals_dlt() {
        let h = planted(3);
        let pairs = exact_pairs(&h, 15, 9);
        let est = estimate_ransac(&pairs, &RansacParams::with_seed(1)).unwrap();
        assert!(est.inliers.iter().all(|&b| b));
        assert_eq!(est.homography, estimate_dlt(&pairs).unwrap());
    }

    #[test]
    fn ransac_ignores_planted_outliers() {
        let h = planted(11);
        let clean = exact_pairs(&h, 20, 4);
        let mut dirty = clean.clone();
        for i in 0..6 {
            let mut p = clean[i * 3];
            p.dst.x += 100.0;
            p.dst.y -= 100.0 * (i % 2) as f64;
            dirty.push(p);
        }
        let a = estimate_ransac(&clean, &RansacParams::with_seed(5)).unwrap();
        let b = estimate_ransac(&dirty, &RansacParams::with_seed(5)).unwrap();
        assert!(canonical_distance(&a.homography, &b.homography) < 1e-6);
        assert!(b.inliers[..20].iter().all(|&x| x));
        assert!(b.inliers[20..].iter().all(|&x| !x));
    }

    #[test]
    fn ransac_no_consensus() {
        assert_eq!(
            estimate_ransac(&square(0.0, 0.0)[..3], &RansacParams::with_seed(0)),
            Err(GeometryError::NoConsensus { best: 0 })
        );
        let collinear: Vec<_> = (0..8)
            .map(|i| Correspondence::new(PixelPoint::new(i as f64, 0.0), PixelPoint::new(0.0, i as f64)))
            .collect();
        assert_eq!(
            estimate_ransac(&collinear, &RansacParams::with_seed(0)),
            Err(GeometryError::NoConsensus { best: 0 })
        );
        let bad = RansacParams { threshold_px: 0.0, ..RansacParams::with_seed(0) };
        assert!(matches!(estimate_ransac(&square(0.0, 0.0), &bad), Err(GeometryError::InvalidParameter(_))));
    }

    #[test]
    fn ransac_is_deterministic() {
        let h = planted(21);
        let mut pairs = exact_pairs(&h, 30, 2);
        for p in pairs.iter_mut().step_by(4) {
            p.dst.y += 57.0;
        }
        let params = RansacParams { threshold_px: 2.0, iterations: 200, seed: 99 };
        let a = estimate_ransac(&pairs, &params).unwrap();
        let b = estimate_ransac(&pairs, &params).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.homography.matrix().iter().zip(b.homography.matrix().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn three_step_chain() {
        let id = Homography::identity();
        let t = Homography::translation(1.0, 0.0);
        assert!(canonical_distance(&compose_ceiling_to_angled(&id, &id, &id).unwrap(), &id) < 1e-12);
        assert!(canonical_distance(&compose_ceiling_to_angled(&t, &id, &id).unwrap(), &t) < 1e-12);

        let (a, b, c) = (planted(1), planted(2), planted(3));
        let chain = compose_ceiling_to_angled(&a, &b, &c).unwrap();
        let b_inv = b.invert().unwrap();
        for i in 0..10 {
            let p = PixelPoint::new(100.0 + 250.0 * i as f64, 1800.0 - 150.0 * i as f64);
            let seq = b_inv.apply(c.apply(a.apply(p).unwrap()).unwrap()).unwrap();
            assert!(chain.apply(p).unwrap().distance(&seq) <= 1e-9, "point {i}");
        }
    }
}
