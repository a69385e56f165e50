//! Brute-force reference implementations checked against the indexed and
//! parallel code paths on small random instances. Each check panics on the
//! first mismatch.

use nalgebra::{Matrix4, SymmetricEigen, UnitQuaternion, Quaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symcomplete::geometry::{Mat3, Point3, PointCloud, RigidTransform, Vec3};
use symcomplete::metrics::{balanced_distance, chamfer_distance, cube_counts, BalanceConfig};
use symcomplete::registration::{compute_fpfh, find_correspondences, fit_correspondences, truncated_objective};
use symcomplete::spatial::SpatialIndex;

pub const INSTANCES: u64 = 120;
const MAX_POINTS: usize = 500;

const BD_TOL: f64 = 1e-12;
const CD_REL_TOL: f64 = 1e-12;
const KNN_DIST_TOL: f64 = 1e-12;
const FPFH_TOL: f64 = 1e-9;
const FIT_TOL: f64 = 1e-9;

fn rng(case: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(case.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn random_points(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(
                r.random_range(-scale..scale),
                r.random_range(-scale..scale),
                r.random_range(-scale..scale),
            )
        })
        .collect()
}

fn random_unit(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_rotation(r: &mut ChaCha8Rng) -> Mat3 {
    let axis = random_unit(r);
    let angle = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

fn sized_points(r: &mut ChaCha8Rng, scale: f64) -> Vec<Point3> {
    let n = r.random_range(1..=MAX_POINTS);
    random_points(r, n, scale)
}

fn dist_sq(a: &Point3, b: &Point3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

fn brute_cube_count(pts: &[Point3], c: &Point3, side: f64) -> usize {
    let h = side / 2.0;
    pts.iter()
        .filter(|p| (p.x - c.x).abs() <= h && (p.y - c.y).abs() <= h && (p.z - c.z).abs() <= h)
        .count()
}

fn brute_bd(p: &[Point3], q: &[Point3], side: f64, eps: f64) -> f64 {
    let balanced = |x: &Point3| {
        let a = brute_cube_count(p, x, side) as f64;
        let b = brute_cube_count(q, x, side) as f64;
        a + b > 0.0 && (a - b).abs() / (a + b) <= eps
    };
    let count = p.iter().filter(|x| balanced(x)).count() + q.iter().filter(|x| balanced(x)).count();
    1.0 - count as f64 / (p.len() + q.len()) as f64
}

fn brute_directed(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| dist_sq(x, y)).fold(f64::INFINITY, f64::min).sqrt())
        .sum::<f64>()
        / a.len() as f64
}

fn brute_knn(pts: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, dist_sq(p, q))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn cube_counts_match_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 1);
        let p = sized_points(&mut r, 1.0);
        let q = sized_points(&mut r, 1.0);
        let side = r.random_range(0.05..1.5);
        let (ip, iq) = (SpatialIndex::new(&p), SpatialIndex::new(&q));
        for x in p.iter().chain(&q).take(100) {
            let c = cube_counts(x, &ip, &iq, side);
            assert_eq!(c.own, brute_cube_count(&p, x, side), "case {case}");
            assert_eq!(c.mirror, brute_cube_count(&q, x, side), "case {case}");
            let mut ids = ip.collect_in_cube(x, side);
            ids.dedup();
            assert_eq!(ids.len(), c.own);
        }
    }
}

pub fn balanced_distance_matches_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 2);
        let p = sized_points(&mut r, 1.0);
        let mut q: Vec<Point3> = p.iter().map(|x| Point3::new(-x.x, x.y, x.z)).collect();
        q.truncate(r.random_range(1..=q.len()));
        let q: Vec<Point3> = q.into_iter().map(|x| x + Vec3::new(r.random_range(-0.05..0.05), 0.0, 0.0)).collect();
        let side = r.random_range(0.1..1.0);
        let eps = r.random_range(0.05..0.95);
        let got = balanced_distance(
            &PointCloud::new(p.clone()).unwrap(),
            &PointCloud::new(q.clone()).unwrap(),
            &BalanceConfig::new(side, eps).unwrap(),
        )
        .unwrap();
        let want = brute_bd(&p, &q, side, eps);
        assert!((got - want).abs() <= BD_TOL, "case {case}: {got} vs {want}");
    }
}

pub fn chamfer_distance_matches_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 3);
        let a = sized_points(&mut r, 2.0);
        let b = sized_points(&mut r, 1.0);
        let got = chamfer_distance(&PointCloud::new(a.clone()).unwrap(), &PointCloud::new(b.clone()).unwrap()).unwrap();
        let want = brute_directed(&a, &b) + brute_directed(&b, &a);
        assert!((got - want).abs() <= CD_REL_TOL * want, "case {case}: {got} vs {want}");
    }
}

pub fn knn_and_radius_queries_match_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 4);
        let pts = sized_points(&mut r, 1.0);
        let index = SpatialIndex::new(&pts);
        let queries = random_points(&mut r, 20, 1.2);
        for q in &queries {
            let k = r.random_range(1..=pts.len().min(40));
            let got = index.nearest(q, k);
            let want = brute_knn(&pts, q, k);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.index, w.0, "case {case}");
                assert!((g.dist_sq - w.1).abs() <= KNN_DIST_TOL * w.1.max(1.0));
            }
            let radius = r.random_range(0.0..0.6);
            let got: Vec<usize> = index.within_radius(q, radius).iter().map(|n| n.index).collect();
            let want: Vec<usize> = brute_knn(&pts, q, pts.len())
                .into_iter()
                .filter(|(_, d)| *d <= radius * radius)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(got, want, "case {case}");
        }
    }
}

/// Angle features of an oriented point pair, written out in components:
/// source frame `u`, `v = (p_t - p_s) x u / |.|`, `w = u x v`.
fn oracle_pair(p1: &Point3, n1: &Vec3, p2: &Point3, n2: &Vec3) -> Option<(f64, f64, f64)> {
    let d = [p2.x - p1.x, p2.y - p1.y, p2.z - p1.z];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len == 0.0 {
        return None;
    }
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = |a: &[f64; 3], b: &[f64; 3]| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };
    let a = [n1.x, n1.y, n1.z];
    let b = [n2.x, n2.y, n2.z];
    let c1 = dot(&a, &d) / len;
    let c2 = dot(&b, &d) / len;
    let (u, t, line, theta) = if c1.abs().min(1.0) < c2.abs().min(1.0) {
        (b, a, [-d[0], -d[1], -d[2]], -c2)
    } else {
        (a, b, d, c1)
    };
    let v = cross(&line, &u);
    let vn = dot(&v, &v).sqrt();
    if vn == 0.0 {
        return None;
    }
    let v = [v[0] / vn, v[1] / vn, v[2] / vn];
    let w = cross(&u, &v);
    Some((dot(&w, &t).atan2(dot(&u, &t)), dot(&v, &t), theta))
}

fn oracle_bin(x: f64, lo: f64, hi: f64) -> usize {
    let i = (11.0 * (x - lo) / (hi - lo)).floor();
    i.clamp(0.0, 10.0) as usize
}

fn oracle_fpfh(pts: &[Point3], normals: &[Vec3], radius: f64, cap: usize) -> Vec<[f64; 33]> {
    let hoods: Vec<Vec<(usize, f64)>> = pts
        .iter()
        .map(|q| {
            let mut h: Vec<(usize, f64)> = brute_knn(pts, q, pts.len())
                .into_iter()
                .filter(|(_, d)| *d <= radius * radius)
                .collect();
            h.truncate(cap);
            h
        })
        .collect();
    let spfh: Vec<[f64; 33]> = (0..pts.len())
        .map(|i| {
            let mut h = [0.0; 33];
            let others: Vec<usize> = hoods[i].iter().map(|x| x.0).filter(|&j| j != i).collect();
            if hoods[i].len() <= 1 {
                return h;
            }
            let step = 100.0 / (hoods[i].len() - 1) as f64;
            for j in others {
                let (alpha, phi, theta) = oracle_pair(&pts[i], &normals[i], &pts[j], &normals[j]).unwrap_or((0.0, 0.0, 0.0));
                h[oracle_bin(alpha, -std::f64::consts::PI, std::f64::consts::PI)] += step;
                h[11 + oracle_bin(phi, -1.0, 1.0)] += step;
                h[22 + oracle_bin(theta, -1.0, 1.0)] += step;
            }
            h
        })
        .collect();
    (0..pts.len())
        .map(|i| {
            let mut f = [0.0; 33];
            if hoods[i].len() <= 1 {
                return f;
            }
            let mut block = [0.0; 3];
            for &(j, d) in &hoods[i] {
                if j == i || d == 0.0 {
                    continue;
                }
                for b in 0..33 {
                    f[b] += spfh[j][b] / d;
                    block[b / 11] += spfh[j][b] / d;
                }
            }
            for b in 0..33 {
                if block[b / 11] != 0.0 {
                    f[b] *= 100.0 / block[b / 11];
                }
                f[b] += spfh[i][b];
            }
            f
        })
        .collect()
}

pub fn fpfh_matches_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 5);
        let n = r.random_range(2..=200);
        let pts = random_points(&mut r, n, 1.0);
        let normals: Vec<Vec3> = (0..n).map(|_| random_unit(&mut r)).collect();
        let radius = r.random_range(0.2..0.9);
        let cap = r.random_range(2..=40);
        let cloud = PointCloud::with_normals(pts.clone(), normals.clone()).unwrap();
        let got = compute_fpfh(&cloud, radius, cap).unwrap();
        let want = oracle_fpfh(&pts, &normals, radius, cap);
        for (i, (g, w)) in got.features.iter().zip(&want).enumerate() {
            for b in 0..33 {
                assert!(
                    (g.0[b] - w[b]).abs() <= FPFH_TOL * w[b].abs().max(1.0),
                    "case {case} point {i} bin {b}: {} vs {}",
                    g.0[b],
                    w[b]
                );
            }
        }
    }
}

/// Least-squares rigid fit by Horn's unit-quaternion method.
fn horn_fit(src: &[Point3], dst: &[Point3]) -> (Mat3, Vec3) {
    let n = src.len() as f64;
    let cs = src.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let cd = dst.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let mut s = Mat3::zeros();
    for (a, b) in src.iter().zip(dst) {
        s += (a.coords - cs) * (b.coords - cd).transpose();
    }
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    let k = Matrix4::new(
        sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
    );
    let e = SymmetricEigen::new(k);
    let best = e.eigenvalues.imax();
    let q = e.eigenvectors.column(best);
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    let r = *rot.to_rotation_matrix().matrix();
    (r, cd - r * cs)
}

pub fn icp_step_matches_brute_force() {
    for case in 0..INSTANCES {
        let mut r = rng(case, 6);
        let n = r.random_range(4..=MAX_POINTS);
        let target = random_points(&mut r, n, 1.0);
        let truth = RigidTransform::new(random_rotation(&mut r), Vec3::new(0.3, -0.2, 0.1)).unwrap();
        let source: Vec<Point3> = target
            .iter()
            .map(|p| truth.inverse().apply_point(p) + Vec3::new(r.random_range(-0.02..0.02), 0.0, r.random_range(-0.02..0.02)))
            .collect();
        let nudge = RigidTransform::from_axis_angle(&random_unit(&mut r), r.random_range(0.0..0.15), Vec3::new(0.02, 0.0, -0.03));
        let current = nudge.compose(&truth);
        let tau = r.random_range(0.1..0.5);
        let index = SpatialIndex::new(&target);

        let corr = find_correspondences(&source, &index, &current, tau);
        let mut want_pairs = Vec::new();
        for (i, p) in source.iter().enumerate() {
            let x = current.apply_point(p);
            let (j, d) = brute_knn(&target, &x, 1)[0];
            if d <= tau * tau {
                want_pairs.push((i, j));
            }
        }
        let got_pairs: Vec<(usize, usize)> = corr.iter().map(|c| (c.source, c.target)).collect();
        assert_eq!(got_pairs, want_pairs, "case {case}");

        let objective = truncated_objective(&source, &index, &current, tau);
        let want_obj = source
            .iter()
            .map(|p| brute_knn(&target, &current.apply_point(p), 1)[0].1.min(tau * tau))
            .sum::<f64>()
            / source.len() as f64;
        assert!((objective - want_obj).abs() <= 1e-12 * want_obj.max(1e-12), "case {case}");

        if want_pairs.len() < 3 {
            continue;
        }
        let fit = fit_correspondences(&source, &target, &corr).unwrap();
        let s: Vec<Point3> = want_pairs.iter().map(|p| source[p.0]).collect();
        let t: Vec<Point3> = want_pairs.iter().map(|p| target[p.1]).collect();
        let (rot, trans) = horn_fit(&s, &t);
        let sse = |rm: &Mat3, tv: &Vec3| -> f64 {
            s.iter().zip(&t).map(|(a, b)| (rm * a.coords + tv - b.coords).norm_squared()).sum()
        };
        let (got_sse, want_sse) = (sse(&fit.rotation, &fit.translation), sse(&rot, &trans));
        assert!(got_sse <= want_sse + FIT_TOL * want_sse.max(1.0), "case {case}: {got_sse} vs {want_sse}");
        if want_pairs.len() >= 10 {
            assert!((fit.rotation - rot).norm() <= 1e-6, "case {case}");
            assert!((fit.translation - trans).norm() <= 1e-6, "case {case}");
        }
    }
}

pub const ORACLES: [(&str, fn()); 6] = [
    ("cube counts", cube_counts_match_brute_force),
    ("balanced distance", balanced_distance_matches_brute_force),
    ("chamfer distance", chamfer_distance_matches_brute_force),
    ("knn and radius queries", knn_and_radius_queries_match_brute_force),
    ("fpfh", fpfh_matches_brute_force),
    ("icp step", icp_step_matches_brute_force),
];
