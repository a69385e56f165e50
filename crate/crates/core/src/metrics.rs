//! Distance and quality measures: balanced points and balanced distance,
//! Chamfer distance, and symmetry-plane accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Plane, Point3, PointCloud, Vec3};
use crate::spatial::{average_nn_distance_with, SpatialIndex};

/// Cube side `d` and balance threshold `epsilon` used by the balance tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub cube_side: f64,
    pub epsilon: f64,
}

impl BalanceConfig {
    pub const DEFAULT_EPSILON: f64 = 0.3;
    /// Default cube side as a multiple of the average nearest-neighbor spacing.
    pub const DEFAULT_CUBE_FACTOR: f64 = 4.0;

    pub fn new(cube_side: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { cube_side, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default config for a cloud: `d = 4 s` where `s` is its average
    /// nearest-neighbor distance.
    pub fn for_cloud(cloud: &PointCloud) -> Result<Self> {
        let s = crate::spatial::average_nn_distance(cloud)?;
        Self::new(Self::DEFAULT_CUBE_FACTOR * s, Self::DEFAULT_EPSILON)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cube_side > 0.0 && self.cube_side.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cube_side must be a positive finite number, got {}",
                self.cube_side
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Cube counts around a point: `own = |Q ∩ P|`, `mirror = |Q ∩ P'|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BalanceCounts {
    pub own: usize,
    pub mirror: usize,
}

impl BalanceCounts {
    /// `|a - b| / (a + b)`, or `None` for an empty cube.
    pub fn ratio(&self) -> Option<f64> {
        let total = self.own + self.mirror;
        (total > 0).then(|| self.own.abs_diff(self.mirror) as f64 / total as f64)
    }

    /// An empty cube counts as unbalanced.
    pub fn is_balanced(&self, epsilon: f64) -> bool {
        self.ratio().is_some_and(|r| r <= epsilon)
    }
}

pub fn cube_counts(x: &Point3, own: &SpatialIndex, mirror: &SpatialIndex, cube_side: f64) -> BalanceCounts {
    BalanceCounts {
        own: own.count_in_cube(x, cube_side),
        mirror: mirror.count_in_cube(x, cube_side),
    }
}

/// Balance test for one point against indexes over `P` and `P'`.
pub fn is_balanced(
    x: &Point3,
    own: &SpatialIndex,
    mirror: &SpatialIndex,
    cfg: &BalanceConfig,
) -> (bool, BalanceCounts) {
    let counts = cube_counts(x, own, mirror, cfg.cube_side);
    (counts.is_balanced(cfg.epsilon), counts)
}

/// Cube counts for every query point, in order.
pub fn cube_counts_all(
    queries: &[Point3],
    own: &SpatialIndex,
    mirror: &SpatialIndex,
    cube_side: f64,
) -> Vec<BalanceCounts> {
    queries
        .par_iter()
        .map(|x| cube_counts(x, own, mirror, cube_side))
        .collect()
}

/// `BD = 1 - B / (|P| + |P'|)` where `B` counts balanced points over both
/// clouds.
pub fn balanced_distance(p: &PointCloud, q: &PointCloud, cfg: &BalanceConfig) -> Result<f64> {
    p.ensure_non_empty()?;
    q.ensure_non_empty()?;
    cfg.validate()?;
    let ip = SpatialIndex::from_cloud(p);
    let iq = SpatialIndex::from_cloud(q);
    Ok(balanced_distance_indexed(p.points(), &ip, q.points(), &iq, cfg))
}

pub fn balanced_distance_indexed(
    p: &[Point3],
    ip: &SpatialIndex,
    q: &[Point3],
    iq: &SpatialIndex,
    cfg: &BalanceConfig,
) -> f64 {
    let count = |pts: &[Point3]| -> usize {
        pts.par_iter()
            .filter(|x| is_balanced(x, ip, iq, cfg).0)
            .count()
    };
    let balanced = count(p) + count(q);
    1.0 - balanced as f64 / (p.len() + q.len()) as f64
}

/// Mean distance from each point of `src` to its nearest point in `dst`.
pub fn directed_mean_distance(src: &[Point3], dst: &SpatialIndex) -> f64 {
    if src.is_empty() {
        return 0.0;
    }
    let d: Vec<f64> = src
        .par_iter()
        .map(|x| dst.nearest_one(x).map_or(f64::INFINITY, |n| n.distance()))
        .collect();
    d.iter().sum::<f64>() / src.len() as f64
}

/// Symmetric Chamfer distance with plain (non-squared) Euclidean distances.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.ensure_non_empty()?;
    b.ensure_non_empty()?;
    let ia = SpatialIndex::from_cloud(a);
    let ib = SpatialIndex::from_cloud(b);
    Ok(directed_mean_distance(a.points(), &ib) + directed_mean_distance(b.points(), &ia))
}

/// `CD(P, P*) / s` where `s` is the average nearest-neighbor distance of `P`.
pub fn scaled_chamfer(original: &PointCloud, completed: &PointCloud) -> Result<f64> {
    if original.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: original.len(),
        });
    }
    let io = SpatialIndex::from_cloud(original);
    let s = average_nn_distance_with(original.points(), &io);
    let cd = chamfer_distance(original, completed)?;
    Ok(if s > 0.0 { cd / s } else if cd == 0.0 { 0.0 } else { f64::INFINITY })
}

/// Angle and center thresholds for judging a predicted symmetry plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryEvalConfig {
    /// Maximum angle between normals, radians.
    pub angle_threshold: f64,
    /// Maximum distance from the predicted reference point to the
    /// ground-truth plane patch, model units.
    pub center_threshold: f64,
}

impl SymmetryEvalConfig {
    pub const DEFAULT_ANGLE: f64 = 0.2;
    pub const DEFAULT_CENTER_FRACTION: f64 = 1.0 / 20.0;

    /// `theta = 0.2`, `tau = diagonal / 20`.
    pub fn scaled_to(bounds: &BoundingBox) -> Self {
        Self {
            angle_threshold: Self::DEFAULT_ANGLE,
            center_threshold: bounds.diagonal() * Self::DEFAULT_CENTER_FRACTION,
        }
    }
}

/// Closest point of the polygon `plane ∩ box` to `c`, and its distance. When
/// the plane misses the box the unrestricted projection is used.
pub fn plane_patch_distance(c: &Point3, plane: &Plane, bounds: &BoundingBox) -> f64 {
    let polygon = plane_box_polygon(plane, bounds);
    let q = plane.project(c);
    match polygon.len() {
        0 => (c - q).norm(),
        1 => (c - polygon[0]).norm(),
        _ => {
            if polygon.len() >= 3 && inside_convex(&q, &polygon, &plane.normal) {
                return (c - q).norm();
            }
            let mut best = f64::INFINITY;
            for i in 0..polygon.len() {
                let a = polygon[i];
                let b = polygon[(i + 1) % polygon.len()];
                best = best.min(point_segment_distance(c, &a, &b));
            }
            best
        }
    }
}

fn point_segment_distance(c: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((c - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (c - (a + ab * t)).norm()
}

fn inside_convex(q: &Point3, poly: &[Point3], normal: &Vec3) -> bool {
    let mut sign = 0.0f64;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let s = (b - a).cross(&(q - a)).dot(normal);
        if s.abs() < 1e-15 {
            continue;
        }
        if sign == 0.0 {
            sign = s.signum();
        } else if s.signum() != sign {
            return false;
        }
    }
    true
}

/// Vertices of the convex polygon where `plane` cuts the box, in angular
/// order around their centroid.
fn plane_box_polygon(plane: &Plane, bounds: &BoundingBox) -> Vec<Point3> {
    let corners = bounds.corners();
    let dist: Vec<f64> = corners.iter().map(|c| plane.signed_distance(c)).collect();
    let mut pts: Vec<Point3> = Vec::new();
    let mut push = |p: Point3| {
        if !pts.iter().any(|q| (q - p).norm() < 1e-12 * (1.0 + p.coords.norm())) {
            pts.push(p);
        }
    };
    for i in 0..8usize {
        for bit in [1usize, 2, 4] {
            let j = i | bit;
            if j == i {
                continue;
            }
            let (da, db) = (dist[i], dist[j]);
            if da == 0.0 {
                push(corners[i]);
            }
            if db == 0.0 {
                push(corners[j]);
            }
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                let t = da / (da - db);
                push(corners[i] + (corners[j] - corners[i]) * t);
            }
        }
    }
    if pts.len() < 3 {
        return pts;
    }
    let center = pts.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
    let u = (pts[0].coords - center).normalize();
    let v = plane.normal.cross(&u);
    pts.sort_by(|a, b| {
        let aa = (a.coords - center).dot(&v).atan2((a.coords - center).dot(&u));
        let bb = (b.coords - center).dot(&v).atan2((b.coords - center).dot(&u));
        aa.total_cmp(&bb)
    });
    pts
}

/// Whether `pred` matches `gt`: normal angle (sign-free) within `theta` and
/// the predicted anchor within `tau` of the ground-truth plane patch.
pub fn symmetry_correct(pred: &Plane, gt: &Plane, gt_bounds: &BoundingBox, cfg: &SymmetryEvalConfig) -> bool {
    let cos = pred.normal.dot(&gt.normal).abs() / (pred.normal.norm() * gt.normal.norm());
    let angle = cos.min(1.0).acos();
    angle <= cfg.angle_threshold
        && plane_patch_distance(&pred.anchor, gt, gt_bounds) <= cfg.center_threshold
}

/// Ground truth for one object: its symmetry planes and bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planes: Vec<Plane>,
    pub bounds: BoundingBox,
}

/// How thresholds are chosen per object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    Fixed(SymmetryEvalConfig),
    /// Angle threshold fixed; center threshold is a fraction of the object's
    /// bounding-box diagonal.
    Scaled { angle_threshold: f64, center_fraction: f64 },
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Scaled {
            angle_threshold: SymmetryEvalConfig::DEFAULT_ANGLE,
            center_fraction: SymmetryEvalConfig::DEFAULT_CENTER_FRACTION,
        }
    }
}

impl ThresholdRule {
    pub fn resolve(&self, bounds: &BoundingBox) -> SymmetryEvalConfig {
        match *self {
            ThresholdRule::Fixed(cfg) => cfg,
            ThresholdRule::Scaled {
                angle_threshold,
                center_fraction,
            } => SymmetryEvalConfig {
                angle_threshold,
                center_threshold: bounds.diagonal() * center_fraction,
            },
        }
    }
}

/// Whether a prediction matches any of the object's ground-truth planes.
pub fn prediction_correct(pred: &Plane, gt: &GroundTruth, rule: &ThresholdRule) -> bool {
    let cfg = rule.resolve(&gt.bounds);
    gt.planes.iter().any(|g| symmetry_correct(pred, g, &gt.bounds, &cfg))
}

/// Fraction of objects whose prediction matches at least one ground-truth
/// plane.
pub fn accuracy(preds: &[Plane], gts: &[GroundTruth], rule: &ThresholdRule) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gts.len(),
        });
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    let correct = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| prediction_correct(p, g, rule))
        .count();
    Ok(correct as f64 / preds.len() as f64)
}
