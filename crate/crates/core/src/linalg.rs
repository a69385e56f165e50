//! Small dense linear algebra: 3x3 symmetric eigen-decomposition, covariance
//! accumulation and closed-form rigid fitting.

use crate::geometry::{Mat3, Point3, RigidTransform, Vec3};

/// Eigenpairs of a symmetric 3x3 matrix, eigenvalues in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

/// Off-diagonal entries smaller than this fraction of the largest entry are
/// treated as exact zeros.
const NEGLIGIBLE: f64 = 1e-13;

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix.
///
/// Only the upper triangle is read. Off-diagonal entries that are negligible
/// relative to the matrix scale are zeroed instead of rotated, so a matrix that
/// is diagonal up to rounding keeps the coordinate axes as eigenvectors.
pub fn symmetric_eigen3(m: &Mat3) -> SymmetricEigen3 {
    let mut a = Mat3::from_fn(|i, j| if i <= j { m[(i, j)] } else { m[(j, i)] });
    let mut v = Mat3::identity();
    let scale = a.abs().max();
    if scale > 0.0 && scale.is_finite() {
        let tiny = NEGLIGIBLE * scale;
        for _sweep in 0..64 {
            let mut rotated = false;
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                if apq.abs() <= tiny {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let r = 3 - p - q;
                let arp = a[(r, p)];
                let arq = a[(r, q)];
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                a[(r, p)] = c * arp - s * arq;
                a[(p, r)] = a[(r, p)];
                a[(r, q)] = s * arp + c * arq;
                a[(q, r)] = a[(r, q)];
                for k in 0..3 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
            if !rotated {
                break;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.map(|i| a[(i, i)]);
    let vectors = order.map(|i| {
        let col: Vec3 = v.column(i).into();
        col / col.norm()
    });
    SymmetricEigen3 { values, vectors }
}

/// Mean and population covariance `(1/n) sum (x - mean)(x - mean)^T`.
///
/// Returns `None` for an empty input.
pub fn mean_and_covariance<'a, I>(vectors: I) -> Option<(Vec3, Mat3)>
where
    I: IntoIterator<Item = &'a Vec3>,
    I::IntoIter: Clone,
{
    let iter = vectors.into_iter();
    let mut n = 0usize;
    let mut sum = Vec3::zeros();
    for v in iter.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let mean = sum / n as f64;
    let mut cov = Mat3::zeros();
    for v in iter {
        let d = v - mean;
        cov += d * d.transpose();
    }
    Some((mean, cov / n as f64))
}

/// Covariance of a set of points.
pub fn point_covariance(points: &[Point3]) -> Option<(Point3, Mat3)> {
    let coords: Vec<Vec3> = points.iter().map(|p| p.coords).collect();
    mean_and_covariance(&coords).map(|(m, c)| (Point3::from(m), c))
}

/// Least-squares rigid motion taking `src[i]` onto `dst[i]` (SVD / Kabsch),
/// minimizing `sum |dst_i - R src_i - t|^2` over proper rotations.
///
/// Returns `None` if the slices are empty or of different length.
pub fn fit_rigid(src: &[Point3], dst: &[Point3]) -> Option<RigidTransform> {
    if src.is_empty() || src.len() != dst.len() {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant();
    let mut fix = Mat3::identity();
    if d < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rotation = v * fix * u.transpose();
    let translation = cd - rotation * cs;
    Some(RigidTransform {
        rotation,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng) -> Mat3 {
        let b = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        b + b.transpose()
    }

    #[test]
    fn eigen_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_symmetric(&mut rng);
            let ours = symmetric_eigen3(&m);
            let mut reference: Vec<(f64, Vec3)> = {
                let e = nalgebra::SymmetricEigen::new(m);
                (0..3).map(|i| (e.eigenvalues[i], e.eigenvectors.column(i).into())).collect()
            };
            reference.sort_by(|a, b| b.0.total_cmp(&a.0));
            for i in 0..3 {
                assert!((ours.values[i] - reference[i].0).abs() < 1e-10);
                let align = ours.vectors[i].dot(&reference[i].1).abs();
                assert!((align - 1.0).abs() < 1e-8, "eigvec {i} misaligned: {align}");
            }
        }
    }

    #[test]
    fn eigen_residual_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = random_symmetric(&mut rng);
            let e = symmetric_eigen3(&m);
            for i in 0..3 {
                assert!((m * e.vectors[i] - e.vectors[i] * e.values[i]).norm() < 1e-10);
                for j in (i + 1)..3 {
                    assert!(e.vectors[i].dot(&e.vectors[j]).abs() < 1e-10);
                }
            }
            assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        }
    }

    #[test]
    fn nearly_diagonal_keeps_axes() {
        let mut m = Mat3::identity() / 3.0;
        m[(0, 1)] = 1e-18;
        m[(1, 0)] = 1e-18;
        let e = symmetric_eigen3(&m);
        for v in e.vectors {
            let axis_aligned = v.iter().filter(|c| c.abs() == 1.0).count();
            assert_eq!(axis_aligned, 1);
        }
    }

    #[test]
    fn zero_matrix() {
        let e = symmetric_eigen3(&Mat3::zeros());
        assert_eq!(e.values, [0.0; 3]);
    }

    #[test]
    fn fit_rigid_recovers_planted_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = RigidTransform::from_axis_angle(&Vec3::new(0.2, 1.0, -0.4), 1.1, Vec3::new(3.0, -1.0, 0.5));
        let src: Vec<Point3> = (0..50)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let dst: Vec<Point3> = src.iter().map(|p| t.apply_point(p)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!((fit.rotation - t.rotation).abs().max() < 1e-10);
        assert!((fit.translation - t.translation).norm() < 1e-10);
        assert!(fit.is_valid());
    }

    #[test]
    fn fit_rigid_never_returns_reflection() {
        // Mirror-image correspondences would be fit best by a reflection.
        let src = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
    }
}
