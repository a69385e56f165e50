//! RANSAC over FPFH correspondences.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::linalg::fit_rigid;
use crate::spatial::SpatialIndex;

use super::fpfh::{compute_fpfh, FpfhFeature};
use super::{evaluate, RegistrationParams, RegistrationResult};

/// Hypotheses drawn per batch. Batches are scored in parallel and reduced in
/// draw order, so results do not depend on the thread count.
const BATCH: usize = 256;
const EDGE_SIMILARITY: f64 = 0.9;

/// For every source feature, the index of the nearest target feature.
pub fn match_features(source: &[FpfhFeature], target: &[FpfhFeature]) -> Vec<(usize, usize)> {
    if target.is_empty() {
        return Vec::new();
    }
    source
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut best = (f64::INFINITY, 0usize);
            for (j, g) in target.iter().enumerate() {
                let d = f.distance_squared(g);
                if d < best.0 {
                    best = (d, j);
                }
            }
            (i, best.1)
        })
        .collect()
}

fn edges_compatible(s: &[Point3; 3], t: &[Point3; 3]) -> bool {
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let ds = (s[a] - s[b]).norm();
        let dt = (t[a] - t[b]).norm();
        if ds < EDGE_SIMILARITY * dt || dt < EDGE_SIMILARITY * ds {
            return false;
        }
    }
    true
}

struct Hypothesis {
    transform: RigidTransform,
    inliers: usize,
    sq_error: f64,
}

fn score(
    transform: RigidTransform,
    src: &[Point3],
    dst: &[Point3],
    corr: &[(usize, usize)],
    limit_sq: f64,
) -> Hypothesis {
    let mut inliers = 0;
    let mut sq_error = 0.0;
    for &(i, j) in corr {
        let d = (transform.apply_point(&src[i]) - dst[j]).norm_squared();
        if d < limit_sq {
            inliers += 1;
            sq_error += d;
        }
    }
    Hypothesis {
        transform,
        inliers,
        sq_error,
    }
}

fn better(a: &Hypothesis, b: &Hypothesis) -> bool {
    a.inliers > b.inliers || (a.inliers == b.inliers && a.inliers > 0 && a.sq_error < b.sq_error)
}

/// Global registration of `source` onto `target` (both with normals) from
/// FPFH matches. Deterministic for a given seed.
pub fn global_registration(
    source: &PointCloud,
    target: &PointCloud,
    params: &RegistrationParams,
    seed: u64,
) -> Result<RegistrationResult> {
    params.validate()?;
    let fs = compute_fpfh(source, params.feature_radius, params.feature_max_neighbors)?;
    let ft = compute_fpfh(target, params.feature_radius, params.feature_max_neighbors)?;
    let corr = match_features(&fs.features, &ft.features);
    ransac_correspondences(source.points(), target.points(), &corr, params, seed)
}

/// RANSAC over explicit putative correspondences `(source, target)`.
pub fn ransac_correspondences(
    src: &[Point3],
    dst: &[Point3],
    corr: &[(usize, usize)],
    params: &RegistrationParams,
    seed: u64,
) -> Result<RegistrationResult> {
    if corr.len() < 3 {
        return Err(Error::InsufficientMatches(corr.len()));
    }
    let threshold = params.ransac_distance_threshold;
    let limit_sq = threshold * threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Hypothesis> = None;
    let mut budget = params.ransac_iterations;
    let mut drawn = 0usize;
    while drawn < budget {
        let n = BATCH.min(budget - drawn);
        let draws: Vec<[usize; 3]> = (0..n)
            .map(|_| {
                let s = sample(&mut rng, corr.len(), 3);
                [s.index(0), s.index(1), s.index(2)]
            })
            .collect();
        drawn += n;
        let results: Vec<Option<Hypothesis>> = draws
            .par_iter()
            .map(|pick| {
                let s = pick.map(|k| src[corr[k].0]);
                let t = pick.map(|k| dst[corr[k].1]);
                if !edges_compatible(&s, &t) {
                    return None;
                }
                let tf = fit_rigid(&s, &t)?;
                if s.iter().zip(&t).any(|(a, b)| (tf.apply_point(a) - b).norm_squared() > limit_sq) {
                    return None;
                }
                Some(score(tf, src, dst, corr, limit_sq))
            })
            .collect();
        for h in results.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| better(&h, b)) {
                best = Some(h);
            }
        }
        if let Some(b) = &best {
            let inlier_ratio = b.inliers as f64 / corr.len() as f64;
            if let Some(k) = required_iterations(inlier_ratio, params.ransac_confidence) {
                budget = budget.min(k.max(drawn));
            }
        }
    }
    let Some(best) = best else {
        log::debug!("no RANSAC hypothesis passed the checks");
        return Ok(RegistrationResult {
            transform: RigidTransform::identity(),
            fitness: 0.0,
            inlier_rmse: 0.0,
        });
    };

    // Refit on every inlier correspondence of the best hypothesis.
    let inliers: Vec<(Point3, Point3)> = corr
        .iter()
        .map(|&(i, j)| (src[i], dst[j]))
        .filter(|(a, b)| (best.transform.apply_point(a) - b).norm_squared() < limit_sq)
        .collect();
    let (s, t): (Vec<Point3>, Vec<Point3>) = inliers.into_iter().unzip();
    let refined = fit_rigid(&s, &t)
        .map(|tf| score(tf, src, dst, corr, limit_sq))
        .filter(|h| h.inliers >= best.inliers)
        .unwrap_or(best);
    let index = SpatialIndex::new(dst);
    Ok(evaluate(src, &index, &refined.transform, threshold))
}

/// Draws needed to see one all-inlier triple with the given confidence.
fn required_iterations(inlier_ratio: f64, confidence: f64) -> Option<usize> {
    let p = inlier_ratio.powi(3);
    if p <= 0.0 {
        return None;
    }
    if p >= 1.0 {
        return Some(1);
    }
    let k = (1.0 - confidence).ln() / (1.0 - p).ln();
    k.is_finite().then(|| k.ceil().max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_transform, Mat3, Vec3};
    use crate::normals::{estimate_normals, NormalParams, OrientationReference};
    use rand::Rng;

    fn lumpy_surface(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                let v = loop {
                    let v = Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    if v.norm() > 0.2 && v.norm() < 1.0 {
                        break v.normalize();
                    }
                };
                let r = 1.0 + 0.25 * (3.0 * v.x).sin() + 0.2 * (2.0 * v.y + 1.0).cos() * v.z;
                Point3::from(v.component_mul(&Vec3::new(1.6, 1.0, 0.7)) * r)
            })
            .collect();
        let params = NormalParams {
            neighbor_count: 20,
            orientation: OrientationReference::Centroid,
        };
        estimate_normals(&PointCloud::new(pts).unwrap(), &params).unwrap().cloud
    }

    fn test_params() -> RegistrationParams {
        let mut p = RegistrationParams::from_spacing(0.06);
        p.ransac_iterations = 200_000;
        p
    }

    #[test]
    fn recovers_planted_transform() {
        let src = lumpy_surface(1500, 1);
        let planted = RigidTransform::from_axis_angle(&Vec3::new(0.2, 1.0, -0.4).normalize(), 1.3, Vec3::new(0.5, -2.0, 1.0));
        let dst = apply_transform(&src, &planted);
        let r = global_registration(&src, &dst, &test_params(), 7).unwrap();
        assert!(r.fitness > 0.99, "fitness {}", r.fitness);
        assert!((r.transform.rotation - planted.rotation).norm() < 1e-3);
        let diag = crate::geometry::bounding_box(&src).unwrap().diagonal();
        assert!((r.transform.translation - planted.translation).norm() < 1e-3 * diag);
        assert!(r.transform.is_valid());
    }

    #[test]
    fn identical_clouds_register_to_identity() {
        let c = lumpy_surface(1200, 2);
        let r = global_registration(&c, &c, &test_params(), 3).unwrap();
        assert!(r.fitness > 0.99);
        assert!((r.transform.rotation - Mat3::identity()).norm() < 1e-6);
    }

    #[test]
    fn unrelated_clouds_have_low_fitness() {
        let a = lumpy_surface(800, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cube: Vec<Point3> = (0..800)
            .map(|_| Point3::new(rng.random_range(30.0..30.3), rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)))
            .collect();
        let params = NormalParams {
            neighbor_count: 10,
            orientation: OrientationReference::Centroid,
        };
        let b = estimate_normals(&PointCloud::new(cube).unwrap(), &params).unwrap().cloud;
        let r = global_registration(&a, &b, &test_params(), 5).unwrap();
        assert!(r.fitness < 0.3);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let src = lumpy_surface(900, 6);
        let dst = apply_transform(&src, &RigidTransform::from_axis_angle(&Vec3::x(), 0.8, Vec3::zeros()));
        let a = global_registration(&src, &dst, &test_params(), 11).unwrap();
        let b = global_registration(&src, &dst, &test_params(), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_matches() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        let err = ransac_correspondences(&pts, &pts, &[(0, 0), (1, 1)], &test_params(), 0).unwrap_err();
        assert_eq!(err.to_string(), "insufficient feature matches: 2 (need at least 3)");
    }

    #[test]
    fn iteration_estimate() {
        assert_eq!(required_iterations(1.0, 0.999), Some(1));
        assert_eq!(required_iterations(0.0, 0.999), None);
        let k = required_iterations(0.5, 0.999).unwrap();
        assert!(1.0 - (1.0 - 0.125f64).powi(k as i32) >= 0.999);
        assert!(1.0 - (1.0 - 0.125f64).powi(k as i32 - 1) < 0.999);
    }
}
