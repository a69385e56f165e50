//! Deterministic synthetic shapes with known symmetry planes.
//!
//! Symmetric kinds are sampled on the half `x >= 0` of their local frame and
//! mirrored across `x = 0`, so every point has an exact mirror partner before
//! the pose is applied. An odd point count adds one point on the plane.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_transform, bounding_box, Plane, Point3, PointCloud, RigidTransform, Vec3};
use crate::metrics::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    /// Box surface, half-extents 1.0 x 0.7 x 0.4.
    Box,
    /// Isosceles triangular prism.
    Wedge,
    /// Ellipsoid surface, semi-axes 1.5 x 1.0 x 0.6.
    Ellipsoid,
    /// Ellipsoid body with two knobs on its mirror plane; one plane only.
    CompositeSymmetric,
    /// Sphere with random radial bumps; no symmetry.
    AsymmetricBlob,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Box,
        ShapeKind::Wedge,
        ShapeKind::Ellipsoid,
        ShapeKind::CompositeSymmetric,
        ShapeKind::AsymmetricBlob,
    ];
    pub const SYMMETRIC: [ShapeKind; 4] = [
        ShapeKind::Box,
        ShapeKind::Wedge,
        ShapeKind::Ellipsoid,
        ShapeKind::CompositeSymmetric,
    ];

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, ShapeKind::AsymmetricBlob)
    }

    /// Unit normals of every symmetry plane through the local origin. The
    /// planted plane `x = 0` comes first.
    pub fn local_plane_normals(&self) -> Vec<Vec3> {
        match self {
            ShapeKind::Box | ShapeKind::Ellipsoid => vec![Vec3::x(), Vec3::y(), Vec3::z()],
            ShapeKind::Wedge => vec![Vec3::x(), Vec3::y()],
            ShapeKind::CompositeSymmetric => vec![Vec3::x()],
            ShapeKind::AsymmetricBlob => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub point_count: usize,
    pub pose: RigidTransform,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, point_count: usize, seed: u64) -> Self {
        Self {
            kind,
            point_count,
            pose: RigidTransform::identity(),
            seed,
        }
    }

    /// Same spec under a pose drawn from `seed`.
    pub fn with_random_pose(mut self) -> Self {
        self.pose = random_pose(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        self
    }

    /// The planted plane `x = 0` moved by the pose; `None` for asymmetric
    /// kinds.
    pub fn plane(&self) -> Option<Plane> {
        self.all_planes().first().copied()
    }

    pub fn all_planes(&self) -> Vec<Plane> {
        all_symmetry_planes(self.kind, &self.pose)
    }
}

/// Every symmetry plane of `kind` placed by `pose`.
pub fn all_symmetry_planes(kind: ShapeKind, pose: &RigidTransform) -> Vec<Plane> {
    kind.local_plane_normals()
        .into_iter()
        .map(|n| pose.apply_plane(&Plane { anchor: Point3::origin(), normal: n }))
        .collect()
}

/// Uniformly random rotation with a translation in `[-5, 5]^3`.
pub fn random_pose(seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = random_unit(&mut rng);
    // Angle density proportional to 1 - cos(angle) gives a uniform rotation.
    let angle = loop {
        let a = rng.random_range(0.0..PI);
        if rng.random::<f64>() * 2.0 <= 1.0 - a.cos() {
            break a;
        }
    };
    let t = Vec3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    RigidTransform::from_axis_angle(&axis, angle, t)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A generated cloud with its planted plane (if any).
#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: ShapeSpec,
    pub cloud: PointCloud,
    pub plane: Option<Plane>,
}

impl Fixture {
    /// Every symmetry plane of the shape with the cloud's bounding box.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        Ok(GroundTruth {
            planes: self.spec.all_planes(),
            bounds: bounding_box(&self.cloud)?,
        })
    }
}

pub const MIN_POINTS: usize = 100;

pub fn generate(spec: &ShapeSpec) -> Result<Fixture> {
    if spec.point_count < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: spec.point_count,
        });
    }
    if !spec.pose.is_valid() {
        return Err(Error::InvalidConfig("fixture pose is not a rigid transform".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let local = match spec.kind {
        ShapeKind::AsymmetricBlob => blob(&mut rng, spec.point_count),
        kind => mirror_paired(&mut rng, kind, spec.point_count),
    };
    let cloud = apply_transform(&PointCloud::new(local)?, &spec.pose);
    Ok(Fixture {
        spec: *spec,
        cloud,
        plane: spec.plane(),
    })
}

fn mirror_paired(rng: &mut ChaCha8Rng, kind: ShapeKind, n: usize) -> Vec<Point3> {
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let p = sample_half(rng, kind);
        pts.push(p);
        pts.push(Point3::new(-p.x, p.y, p.z));
    }
    if n % 2 == 1 {
        let p = loop {
            let p = sample_half(rng, kind);
            if p.x < 0.02 {
                break p;
            }
        };
        pts.push(Point3::new(0.0, p.y, p.z));
    }
    pts
}

/// One area-uniform surface sample with `x >= 0`.
fn sample_half(rng: &mut ChaCha8Rng, kind: ShapeKind) -> Point3 {
    match kind {
        ShapeKind::Box => box_half(rng, Vec3::new(1.0, 0.7, 0.4)),
        ShapeKind::Wedge => wedge_half(rng),
        ShapeKind::Ellipsoid => {
            let p = ellipsoid_point(rng, &Vec3::new(1.5, 1.0, 0.6));
            Point3::new(p.x.abs(), p.y, p.z)
        }
        ShapeKind::CompositeSymmetric => composite_half(rng),
        ShapeKind::AsymmetricBlob => unreachable!("blobs are not mirror-paired"),
    }
}

fn box_half(rng: &mut ChaCha8Rng, h: Vec3) -> Point3 {
    // Faces of the half box x in [0, hx]: +x, +-y, +-z.
    let areas = [4.0 * h.y * h.z, 2.0 * h.x * h.z, 2.0 * h.x * h.z, 2.0 * h.x * h.y, 2.0 * h.x * h.y];
    let x = rng.random_range(0.0..h.x);
    let y = rng.random_range(-h.y..h.y);
    let z = rng.random_range(-h.z..h.z);
    match pick(rng, &areas) {
        0 => Point3::new(h.x, y, z),
        1 => Point3::new(x, h.y, z),
        2 => Point3::new(x, -h.y, z),
        3 => Point3::new(x, y, h.z),
        _ => Point3::new(x, y, -h.z),
    }
}

fn wedge_half(rng: &mut ChaCha8Rng) -> Point3 {
    let (w, h, len): (f64, f64, f64) = (1.0, 1.4, 2.6);
    let slant = w.hypot(h);
    let areas = [w * len, slant * len, w * h / 2.0, w * h / 2.0];
    let y = rng.random_range(-len / 2.0..len / 2.0);
    let t: f64 = rng.random();
    match pick(rng, &areas) {
        0 => Point3::new(w * t, y, 0.0),
        1 => Point3::new(w * (1.0 - t), y, h * t),
        k => {
            // Uniform in the right triangle (0,0), (w,0), (0,h).
            let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            let side = if k == 2 { len / 2.0 } else { -len / 2.0 };
            Point3::new(w * a, side, h * b)
        }
    }
}

fn ellipsoid_point(rng: &mut ChaCha8Rng, axes: &Vec3) -> Point3 {
    let (a, b, c) = (axes.x, axes.y, axes.z);
    let g_max = (b * c).max(a * c).max(a * b);
    loop {
        let u = random_unit(rng);
        let g = ((b * c * u.x).powi(2) + (a * c * u.y).powi(2) + (a * b * u.z).powi(2)).sqrt();
        if rng.random::<f64>() * g_max <= g {
            return Point3::from(u.component_mul(axes));
        }
    }
}

struct Sphere {
    center: Point3,
    radius: f64,
}

const BODY_AXES: Vec3 = Vec3::new(1.2, 1.0, 0.8);

fn composite_knobs() -> [Sphere; 2] {
    [
        Sphere {
            center: Point3::new(0.0, 0.95, 0.45),
            radius: 0.45,
        },
        Sphere {
            center: Point3::new(0.0, -0.5, -0.75),
            radius: 0.35,
        },
    ]
}

fn inside_body(p: &Point3) -> bool {
    (p.coords.component_div(&BODY_AXES)).norm_squared() < 1.0
}

fn composite_half(rng: &mut ChaCha8Rng) -> Point3 {
    let knobs = composite_knobs();
    // Thomsen's approximation of the ellipsoid surface area.
    let pw = 1.6075;
    let (a, b, c) = (BODY_AXES.x, BODY_AXES.y, BODY_AXES.z);
    let body_area = 4.0 * PI * (((a * b).powf(pw) + (a * c).powf(pw) + (b * c).powf(pw)) / 3.0).powf(1.0 / pw);
    let areas = [
        body_area,
        4.0 * PI * knobs[0].radius.powi(2),
        4.0 * PI * knobs[1].radius.powi(2),
    ];
    loop {
        let k = pick(rng, &areas);
        let p = if k == 0 {
            ellipsoid_point(rng, &BODY_AXES)
        } else {
            let s = &knobs[k - 1];
            s.center + random_unit(rng) * s.radius
        };
        let hidden = (k != 0 && inside_body(&p))
            || knobs
                .iter()
                .enumerate()
                .any(|(j, s)| j + 1 != k && (p - s.center).norm() < s.radius);
        if !hidden {
            return Point3::new(p.x.abs(), p.y, p.z);
        }
    }
}

fn blob(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    let bumps: Vec<(Vec3, f64)> = (0..4)
        .map(|_| (random_unit(rng), rng.random_range(1.2..2.0)))
        .collect();
    let stretch = Vec3::new(
        rng.random_range(0.8..1.4),
        rng.random_range(0.8..1.4),
        rng.random_range(0.8..1.4),
    );
    (0..n)
        .map(|_| {
            let u = random_unit(rng);
            let r = 1.0
                + bumps
                    .iter()
                    .map(|(c, a)| a * (-(u - c).norm_squared() / 0.25).exp())
                    .sum::<f64>();
            Point3::from((u * r).component_mul(&stretch))
        })
        .collect()
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Removes every point within `radius` of `center`. Returns the kept cloud
/// and the removed indices (ascending).
pub fn carve_ball(cloud: &PointCloud, center: &Point3, radius: f64) -> (PointCloud, Vec<usize>) {
    let (removed, kept): (Vec<usize>, Vec<usize>) =
        (0..cloud.len()).partition(|&i| (cloud.points()[i] - center).norm() <= radius);
    (cloud.select(&kept), removed)
}

/// One manifest row per fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub name: String,
    pub spec: ShapeSpec,
    pub planes: Vec<Plane>,
}

impl FixtureEntry {
    pub fn new(name: impl Into<String>, spec: ShapeSpec) -> Self {
        Self {
            name: name.into(),
            planes: spec.all_planes(),
            spec,
        }
    }
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[FixtureEntry]) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(entries)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<FixtureEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
