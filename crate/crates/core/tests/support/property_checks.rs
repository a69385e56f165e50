//! Property checks run through a proptest runner with `CASES` successful
//! cases each. Each check panics with the shrunk counterexample on failure.

use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

use symcomplete::augment::{damage, DamageSpec};
use symcomplete::fixtures::{carve_ball, generate, ShapeKind, ShapeSpec};
use symcomplete::geometry::{Mat3, Plane, Point3, PointCloud, RigidTransform, Vec3};
use symcomplete::io::parse_cloud;
use symcomplete::linalg::fit_rigid;
use symcomplete::registration::{icp_refine_traced, ransac_correspondences, RegistrationParams};
use symcomplete::{balanced_distance, complete, reflect, BalanceConfig, CompletionConfig};

pub const CASES: u32 = 1000;

fn check<S>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>)
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    if let Err(e) = runner.run(&strategy, test) {
        panic!("{name}: {e}");
    }
}

fn coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn point() -> impl Strategy<Value = Point3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(x, y, z)| (x * x + y * y + z * z).sqrt() > 0.05)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
}

fn plane() -> impl Strategy<Value = Plane> {
    (point(), unit()).prop_map(|(p, n)| Plane::new(p, n).unwrap())
}

fn rigid() -> impl Strategy<Value = RigidTransform> {
    (unit(), -3.2..3.2f64, (coord(), coord(), coord()))
        .prop_map(|(axis, angle, (x, y, z))| RigidTransform::from_axis_angle(&axis, angle, Vec3::new(x, y, z)))
}

fn cloud(min: usize, max: usize, scale: f64) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Point3::new(x, y, z)),
        min..=max,
    )
}

fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).abs().max().max((r.determinant() - 1.0).abs())
}

pub fn reflection_is_an_involution() {
    check("reflection involution", (plane(), point()), |(pl, x)| {
        let back = pl.reflect_point(&pl.reflect_point(&x));
        let scale = 1.0 + x.coords.norm() + pl.anchor.coords.norm();
        prop_assert!((back - x).norm() <= 1e-12 * scale);
        let once = pl.reflect_point(&x);
        prop_assert!((pl.signed_distance(&once) + pl.signed_distance(&x)).abs() <= 1e-12 * scale);
        prop_assert!(((once - pl.anchor).norm() - (x - pl.anchor).norm()).abs() <= 1e-12 * scale);
        Ok(())
    });
}

pub fn cloud_reflection_is_an_involution() {
    check("cloud reflection involution", (plane(), cloud(1, 40, 50.0)), |(pl, pts)| {
        let c = PointCloud::new(pts).unwrap();
        let twice = reflect(&reflect(&c, &pl).unwrap(), &pl).unwrap();
        for (a, b) in twice.points().iter().zip(c.points()) {
            prop_assert!((a - b).norm() <= 1e-11 * (1.0 + b.coords.norm() + pl.anchor.coords.norm()));
        }
        let m = pl.reflection_matrix();
        prop_assert!((m * m - Mat3::identity()).abs().max() <= 1e-12);
        prop_assert!((m.determinant() + 1.0).abs() <= 1e-12);
        Ok(())
    });
}

pub fn rigid_transforms_stay_orthonormal() {
    check("rigid orthonormality", (rigid(), rigid(), rigid()), |(a, b, c)| {
        let chain = a.compose(&b).compose(&c).compose(&a.inverse());
        prop_assert!(chain.is_valid());
        prop_assert!(orthonormality_error(&chain.rotation) <= 1e-12);
        let id = chain.compose(&chain.inverse());
        prop_assert!((id.rotation - Mat3::identity()).abs().max() <= 1e-12);
        prop_assert!(id.translation.norm() <= 1e-9);
        Ok(())
    });
}

pub fn fitted_rotations_are_proper() {
    check("fitted rotations proper", (cloud(1, 30, 10.0), rigid(), cloud(30, 30, 0.5)), |(src, t, noise)| {
        let dst: Vec<Point3> = src.iter().zip(&noise).map(|(p, e)| t.apply_point(p) + e.coords).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        prop_assert!(orthonormality_error(&fit.rotation) <= 1e-9);
        prop_assert!(fit.is_valid());
        Ok(())
    });
}

pub fn balanced_distance_is_a_fraction() {
    let strategy = (cloud(1, 60, 1.0), cloud(1, 60, 1.0), 0.01..3.0f64, 0.01..0.99f64);
    check("BD in [0, 1]", strategy, |(p, q, side, eps)| {
        let cfg = BalanceConfig::new(side, eps).unwrap();
        let bd = balanced_distance(&PointCloud::new(p.clone()).unwrap(), &PointCloud::new(q).unwrap(), &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&bd));
        let c = PointCloud::new(p).unwrap();
        prop_assert_eq!(balanced_distance(&c, &c, &cfg).unwrap(), 0.0);
        Ok(())
    });
}

pub fn icp_objective_never_increases() {
    let strategy = (
        cloud(10, 60, 1.0),
        unit(),
        -0.4..0.4f64,
        (-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64),
        0.05..1.0f64,
    );
    check("ICP monotone objective", strategy, |(target, axis, angle, shift, tau)| {
        let source: Vec<Point3> = target.iter().map(|p| Point3::new(p.x * 1.01, p.y, p.z - 0.01)).collect();
        let init = RigidTransform::from_axis_angle(&axis, angle, Vec3::new(shift.0, shift.1, shift.2));
        let mut params = RegistrationParams::from_spacing(0.1);
        params.icp_distance_threshold = tau;
        params.icp_max_iterations = 30;
        params.icp_convergence_delta = f64::MIN_POSITIVE;
        let (res, trace) = icp_refine_traced(
            &PointCloud::new(source).unwrap(),
            &PointCloud::new(target).unwrap(),
            &init,
            &params,
        )
        .unwrap();
        for w in trace.objective.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", trace.objective);
        }
        prop_assert!(res.transform.is_valid());
        Ok(())
    });
}

pub fn seeded_damage_is_deterministic() {
    check("damage determinism", (any::<u64>(), 0.05..0.45f64, 0u64..1000), |(seed, rate, fixture_seed)| {
        let f = generate(&ShapeSpec::new(ShapeKind::Ellipsoid, 400, fixture_seed)).unwrap();
        let again = generate(&ShapeSpec::new(ShapeKind::Ellipsoid, 400, fixture_seed)).unwrap();
        prop_assert_eq!(f.cloud.points(), again.cloud.points());
        let spec = DamageSpec::new(rate, seed).unwrap();
        let a = damage(&f.cloud, &spec).unwrap();
        let b = damage(&f.cloud, &spec).unwrap();
        prop_assert_eq!(&a.removed_indices, &b.removed_indices);
        prop_assert_eq!(a.damaged.points(), b.damaged.points());
        Ok(())
    });
}

pub fn seeded_ransac_is_deterministic() {
    check("RANSAC determinism", (cloud(12, 40, 1.0), rigid(), any::<u64>()), |(pts, t, seed)| {
        let dst: Vec<Point3> = pts.iter().map(|p| t.apply_point(p)).collect();
        let corr: Vec<(usize, usize)> = (0..pts.len()).map(|i| (i, (i * 7) % pts.len())).collect();
        let mut params = RegistrationParams::from_spacing(0.05);
        params.ransac_iterations = 200;
        let a = ransac_correspondences(&pts, &dst, &corr, &params, seed);
        let b = ransac_correspondences(&pts, &dst, &corr, &params, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed"),
        }
        Ok(())
    });
}

pub fn seeded_completion_is_deterministic() {
    let strategy = (prop::sample::select(ShapeKind::ALL.to_vec()), 0u64..10_000, any::<u64>(), 0usize..150);
    check("completion determinism", strategy, |(kind, fixture_seed, seed, hole)| {
        let f = generate(&ShapeSpec::new(kind, 180, fixture_seed).with_random_pose()).unwrap();
        let (carved, _) = carve_ball(&f.cloud, &f.cloud.points()[hole], 0.3);
        prop_assume!(carved.len() >= 100);
        let cfg = CompletionConfig {
            seed,
            ..CompletionConfig::default()
        };
        let a = complete(&carved, &cfg).unwrap();
        let b = complete(&carved, &cfg).unwrap();
        prop_assert_eq!(a.completed.points(), b.completed.points());
        prop_assert_eq!(a.plane, b.plane);
        prop_assert_eq!(a.skipped, b.skipped);
        Ok(())
    });
}

pub fn parser_never_panics_on_bytes() {
    check("parser fuzz, raw bytes", prop::collection::vec(any::<u8>(), 0..512), |bytes| {
        let _ = parse_cloud(&bytes, std::path::Path::new("fuzz.ply"));
        let _ = parse_cloud(&bytes, std::path::Path::new("fuzz.xyz"));
        Ok(())
    });
}

pub fn parser_never_panics_on_mangled_headers() {
    let property = prop::sample::select(vec![
        "float x",
        "double y",
        "float z",
        "uchar red",
        "list uchar int idx",
        "float nx",
        "int x",
    ]);
    let format = prop::sample::select(vec!["ascii 1.0", "binary_little_endian 1.0", "binary_big_endian 1.0", "bogus"]);
    let strategy = (
        0usize..6,
        prop::collection::vec(property, 0..6),
        format,
        prop::collection::vec(any::<u8>(), 0..96),
    );
    check("parser fuzz, headers", strategy, |(count, props, format, body)| {
        let mut text = format!("ply\nformat {format}\nelement vertex {count}\n");
        for p in &props {
            text.push_str(&format!("property {p}\n"));
        }
        text.push_str("end_header\n");
        let mut bytes = text.into_bytes();
        bytes.extend(body);
        let _ = parse_cloud(&bytes, std::path::Path::new("fuzz.ply"));
        Ok(())
    });
}

/// The invariants counted by the acceptance run: reflection involution, ICP
/// monotone objective, rigid orthonormality, BD range, seeded determinism.
pub const INVARIANTS: [(&str, fn()); 9] = [
    ("reflection involution", reflection_is_an_involution),
    ("cloud reflection involution", cloud_reflection_is_an_involution),
    ("ICP monotone objective", icp_objective_never_increases),
    ("rigid orthonormality", rigid_transforms_stay_orthonormal),
    ("fitted rotations proper", fitted_rotations_are_proper),
    ("BD in [0, 1]", balanced_distance_is_a_fraction),
    ("damage determinism", seeded_damage_is_deterministic),
    ("RANSAC determinism", seeded_ransac_is_deterministic),
    ("completion determinism", seeded_completion_is_deterministic),
];
