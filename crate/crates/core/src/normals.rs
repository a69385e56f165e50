//! Surface normal estimation by local plane fitting over k-nearest
//! neighborhoods, and consistent orientation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mass_center, Point3, PointCloud, Vec3};
use crate::linalg::{point_covariance, symmetric_eigen3};
use crate::spatial::SpatialIndex;

/// Which way normals should face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationReference {
    /// Normals face the given point.
    Viewpoint(Point3),
    /// Normals have a non-negative component along the given unit axis.
    Axis(Vec3),
    /// Normals face the mass center of the cloud being oriented.
    Centroid,
}

impl Default for OrientationReference {
    fn default() -> Self {
        OrientationReference::Axis(Vec3::z())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalParams {
    pub neighbor_count: usize,
    pub orientation: OrientationReference,
}

impl Default for NormalParams {
    fn default() -> Self {
        Self {
            neighbor_count: 30,
            orientation: OrientationReference::default(),
        }
    }
}

impl NormalParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbor_count < 3 {
            return Err(Error::InvalidConfig(format!(
                "neighbor_count must be at least 3, got {}",
                self.neighbor_count
            )));
        }
        if let OrientationReference::Axis(a) = self.orientation {
            if ((a.norm() - 1.0).abs()) > 1e-9 {
                return Err(Error::InvalidConfig("orientation axis must be unit length".into()));
            }
        }
        Ok(())
    }
}

/// Confidence of a fitted normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalQuality {
    Good,
    /// The two smallest eigenvalues tie (locally linear data); the normal is a
    /// deterministic pick from the tied eigenspace.
    LowConfidence,
    /// All neighborhood points coincide; the normal defaults to `+z`.
    Degenerate,
}

/// Output of [`estimate_normals`].
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub low_confidence: Vec<usize>,
    pub degenerate: Vec<usize>,
}

const TIE_REL: f64 = 1e-6;

/// Unit normal of the best-fit plane through `neighborhood`: the covariance
/// eigenvector with the smallest eigenvalue. Not oriented.
pub fn fit_normal(neighborhood: &[Point3]) -> (Vec3, NormalQuality) {
    let Some((_, cov)) = point_covariance(neighborhood) else {
        return (Vec3::z(), NormalQuality::Degenerate);
    };
    let eig = symmetric_eigen3(&cov);
    let [l0, l1, l2] = eig.values;
    if !(l0 > f64::MIN_POSITIVE) {
        return (Vec3::z(), NormalQuality::Degenerate);
    }
    if l1 - l2 <= TIE_REL * l0 {
        return (lexicographic_orthogonal(&eig.vectors[0]), NormalQuality::LowConfidence);
    }
    (eig.vectors[2], NormalQuality::Good)
}

/// The unit vector orthogonal to `d` with lexicographically largest
/// components.
fn lexicographic_orthogonal(d: &Vec3) -> Vec3 {
    for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
        let v = axis - d * axis.dot(d);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
    Vec3::z()
}

pub fn estimate_normals(cloud: &PointCloud, params: &NormalParams) -> Result<NormalEstimate> {
    params.validate()?;
    let k = params.neighbor_count;
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::from_cloud(cloud);
    let pts = cloud.points();
    let fitted: Vec<(Vec3, NormalQuality)> = pts
        .par_iter()
        .map(|p| {
            let hood: Vec<Point3> = index.nearest(p, k).iter().map(|n| pts[n.index]).collect();
            fit_normal(&hood)
        })
        .collect();
    let mut low_confidence = Vec::new();
    let mut degenerate = Vec::new();
    let mut normals = Vec::with_capacity(fitted.len());
    for (i, (n, q)) in fitted.into_iter().enumerate() {
        match q {
            NormalQuality::Good => {}
            NormalQuality::LowConfidence => low_confidence.push(i),
            NormalQuality::Degenerate => degenerate.push(i),
        }
        normals.push(n);
    }
    if !degenerate.is_empty() {
        log::debug!("{} points with degenerate neighborhoods", degenerate.len());
    }
    let unoriented = PointCloud::from_parts_unchecked(pts.to_vec(), Some(normals));
    let cloud = orient_normals(&unoriented, &params.orientation)?;
    Ok(NormalEstimate {
        cloud,
        low_confidence,
        degenerate,
    })
}

/// Flips normals to agree with `reference`. Idempotent.
pub fn orient_normals(cloud: &PointCloud, reference: &OrientationReference) -> Result<PointCloud> {
    let normals = cloud.normals().ok_or(Error::MissingNormals)?;
    let view = match reference {
        OrientationReference::Centroid => Some(mass_center(cloud)?),
        OrientationReference::Viewpoint(v) => Some(*v),
        OrientationReference::Axis(_) => None,
    };
    let oriented = cloud
        .points()
        .iter()
        .zip(normals)
        .map(|(x, n)| {
            let s = match (view, reference) {
                (Some(v), _) => n.dot(&(v - x)),
                (None, OrientationReference::Axis(a)) => n.dot(a),
                _ => 0.0,
            };
            if s < 0.0 {
                -n
            } else {
                *n
            }
        })
        .collect();
    Ok(PointCloud::from_parts_unchecked(cloud.points().to_vec(), Some(oriented)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_patch(n: usize, noise: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        if noise > 0.0 { rng.random_range(-noise..noise) } else { 0.0 },
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn planar_patch_normals_are_vertical() {
        let est = estimate_normals(
            &plane_patch(500, 0.0, 1),
            &NormalParams {
                neighbor_count: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for n in est.cloud.normals().unwrap() {
            assert!(n.dot(&Vec3::z()).abs().min(1.0).acos() < 1e-3);
            assert!(n.z > 0.0);
        }
    }

    #[test]
    fn noisy_plane_within_one_degree() {
        let est = estimate_normals(&plane_patch(800, 1e-4, 2), &NormalParams::default()).unwrap();
        for n in est.cloud.normals().unwrap() {
            assert!(n.z.min(1.0).acos() < 1f64.to_radians());
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_normals_face_viewpoint() {
        // Fibonacci lattice: near-uniform sphere sampling.
        let n = 24000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Point3> = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let t = golden * i as f64;
                Point3::new(r * t.cos(), y, r * t.sin())
            })
            .collect();
        let est = estimate_normals(
            &PointCloud::new(pts).unwrap(),
            &NormalParams {
                neighbor_count: 10,
                orientation: OrientationReference::Viewpoint(Point3::origin()),
            },
        )
        .unwrap();
        for (p, n) in est.cloud.points().iter().zip(est.cloud.normals().unwrap()) {
            let inward = -p.coords.normalize();
            assert!(n.dot(&inward).min(1.0).acos() < 1e-2, "{n:?} vs {inward:?}");
        }
    }

    #[test]
    fn matches_dense_eigensolver_per_neighborhood() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3> = (0..400)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                Point3::new(x, y, 0.3 * (2.0 * x).sin() + 0.2 * y * y)
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let params = NormalParams {
            neighbor_count: 15,
            ..Default::default()
        };
        let est = estimate_normals(&cloud, &params).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let mut d: Vec<(f64, usize)> = pts.iter().enumerate().map(|(j, q)| ((p - q).norm_squared(), j)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let hood: Vec<Vec3> = d[..15].iter().map(|&(_, j)| pts[j].coords).collect();
            let mean = hood.iter().sum::<Vec3>() / 15.0;
            let cov = hood.iter().map(|v| (v - mean) * (v - mean).transpose()).sum::<nalgebra::Matrix3<f64>>() / 15.0;
            let e = nalgebra::SymmetricEigen::new(cov);
            let imin = e.eigenvalues.imin();
            let reference: Vec3 = e.eigenvectors.column(imin).into();
            let ours = est.cloud.normals().unwrap()[i];
            assert!((ours.dot(&reference).abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn orientation_by_axis_and_idempotence() {
        let pts: Vec<Point3> = (0..200).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let normals: Vec<Vec3> = (0..200).map(|i| if i % 3 == 0 { -Vec3::z() } else { Vec3::z() }).collect();
        let c = PointCloud::with_normals(pts, normals).unwrap();
        let once = orient_normals(&c, &OrientationReference::Axis(Vec3::z())).unwrap();
        assert!(once.normals().unwrap().iter().all(|n| *n == Vec3::z()));
        let twice = orient_normals(&once, &OrientationReference::Axis(Vec3::z())).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn random_normals_orientation_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3> = (0..200).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let ns: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize())
            .collect();
        let c = PointCloud::with_normals(pts, ns).unwrap();
        for r in [
            OrientationReference::Viewpoint(Point3::new(0.5, 0.5, 3.0)),
            OrientationReference::Centroid,
            OrientationReference::Axis(Vec3::y()),
        ] {
            let once = orient_normals(&c, &r).unwrap();
            assert_eq!(orient_normals(&once, &r).unwrap(), once);
        }
    }

    #[test]
    fn errors_and_degenerate_cases() {
        let small = plane_patch(10, 0.0, 5);
        assert!(matches!(
            estimate_normals(&small, &NormalParams::default()),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            orient_normals(&small, &OrientationReference::Centroid),
            Err(Error::MissingNormals)
        ));
        let same = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0); 8]).unwrap();
        let est = estimate_normals(&same, &NormalParams { neighbor_count: 4, ..Default::default() }).unwrap();
        assert_eq!(est.degenerate.len(), 8);
        assert!(est.cloud.normals().unwrap().iter().all(|n| *n == Vec3::z()));

        let line = PointCloud::new((0..20).map(|i| Point3::new(0.0, i as f64, 0.0)).collect()).unwrap();
        let est = estimate_normals(&line, &NormalParams { neighbor_count: 5, ..Default::default() }).unwrap();
        assert_eq!(est.low_confidence.len(), 20);
        // Orthogonal to the line direction, largest x component first.
        assert!(est.cloud.normals().unwrap().iter().all(|n| (n - Vec3::x()).norm() < 1e-12));
    }
}
