//! Core geometric types: point clouds, planes, rigid transforms and
//! axis-aligned bounding boxes, plus the mirror reflection map.
//!
//! Bounding boxes are axis-aligned, so their centroid depends on the pose of
//! the input cloud. Callers that need pose-independent anchors should use
//! [`mass_center`] instead.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on per-point normal length.
pub const NORMAL_UNIT_TOL: f64 = 1e-6;
/// Tolerance on plane normal length.
pub const PLANE_UNIT_TOL: f64 = 1e-9;

/// An ordered list of 3D points with optional per-point unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    /// Builds a cloud without normals. Every coordinate must be finite.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            points,
            normals: None,
        })
    }

    /// Builds a cloud with normals; lengths must agree and each normal must be
    /// unit length within [`NORMAL_UNIT_TOL`].
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vec3>) -> Result<Self> {
        check_finite(&points)?;
        check_normals(points.len(), &normals)?;
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    /// Internal constructor for values produced by our own (finite-preserving)
    /// operations.
    pub(crate) fn from_parts_unchecked(points: Vec<Point3>, normals: Option<Vec<Vec3>>) -> Self {
        debug_assert!(normals.as_ref().is_none_or(|n| n.len() == points.len()));
        Self { points, normals }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn into_parts(self) -> (Vec<Point3>, Option<Vec<Vec3>>) {
        (self.points, self.normals)
    }

    /// Replaces the normals, validating them.
    pub fn set_normals(&mut self, normals: Vec<Vec3>) -> Result<()> {
        check_normals(self.points.len(), &normals)?;
        self.normals = Some(normals);
        Ok(())
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    /// New cloud made of the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let normals = self
            .normals
            .as_ref()
            .map(|n| indices.iter().map(|&i| n[i]).collect());
        Self { points, normals }
    }

    /// Concatenates `other` after `self`. Normals survive only if both clouds
    /// carry them.
    pub fn concat(&self, other: &PointCloud) -> Self {
        let mut points = Vec::with_capacity(self.len() + other.len());
        points.extend_from_slice(&self.points);
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => {
                let mut n = Vec::with_capacity(a.len() + b.len());
                n.extend_from_slice(a);
                n.extend_from_slice(b);
                Some(n)
            }
            _ => None,
        };
        Self { points, normals }
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }
}

fn check_finite(points: &[Point3]) -> Result<()> {
    match points
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_normals(points: usize, normals: &[Vec3]) -> Result<()> {
    if normals.len() != points {
        return Err(Error::NormalCountMismatch {
            points,
            normals: normals.len(),
        });
    }
    for (index, n) in normals.iter().enumerate() {
        let norm = n.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORMAL_UNIT_TOL {
            return Err(Error::NonUnitNormal { index, norm });
        }
    }
    Ok(())
}

/// A plane through `anchor` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub anchor: Point3,
    pub normal: Vec3,
}

impl Plane {
    /// Normalizes `normal`; fails on a zero or non-finite normal.
    pub fn new(anchor: Point3, normal: Vec3) -> Result<Self> {
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::NonUnitPlaneNormal(norm));
        }
        Ok(Self {
            anchor,
            normal: normal / norm,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.normal.norm();
        if (norm - 1.0).abs() > PLANE_UNIT_TOL || !norm.is_finite() {
            return Err(Error::NonUnitPlaneNormal(norm));
        }
        Ok(())
    }

    /// Plane offset `c` in `<x, n> = c`.
    pub fn offset(&self) -> f64 {
        self.anchor.coords.dot(&self.normal)
    }

    pub fn signed_distance(&self, x: &Point3) -> f64 {
        (x - self.anchor).dot(&self.normal)
    }

    pub fn project(&self, x: &Point3) -> Point3 {
        x - self.normal * self.signed_distance(x)
    }

    /// `T x = x - 2 <x - p, n> n`.
    pub fn reflect_point(&self, x: &Point3) -> Point3 {
        x - self.normal * (2.0 * self.signed_distance(x))
    }

    /// Reflection of a free vector (no translation part).
    pub fn reflect_vector(&self, v: &Vec3) -> Vec3 {
        v - self.normal * (2.0 * v.dot(&self.normal))
    }

    /// Unsigned angle between the two plane normals, in `[0, pi/2]`.
    pub fn normal_angle(&self, other: &Plane) -> f64 {
        self.normal.dot(&other.normal).abs().min(1.0).acos()
    }

    /// Matrix of the linear part of the reflection, `I - 2 n n^T`.
    pub fn reflection_matrix(&self) -> Mat3 {
        Mat3::identity() - self.normal * self.normal.transpose() * 2.0
    }

    /// Same plane with the anchor moved to the projection of `x`.
    pub fn reanchored(&self, x: &Point3) -> Plane {
        Plane {
            anchor: self.project(x),
            normal: self.normal,
        }
    }
}

/// Proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Validating constructor: `R^T R = I` and `det R = +1` within
    /// [`Self::ORTHONORMAL_TOL`].
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        if !t.is_valid() {
            return Err(Error::InvalidConfig(
                "rotation is not orthonormal with det +1".into(),
            ));
        }
        Ok(t)
    }

    /// Rotation of `angle` radians about `axis` followed by a translation.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    pub fn is_valid(&self) -> bool {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
        ortho <= Self::ORTHONORMAL_TOL
            && (r.determinant() - 1.0).abs() <= Self::ORTHONORMAL_TOL
            && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn apply_point(&self, x: &Point3) -> Point3 {
        Point3::from(self.rotation * x.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Moves a plane along with the space it lives in.
    pub fn apply_plane(&self, plane: &Plane) -> Plane {
        let n = self.apply_vector(&plane.normal);
        Plane {
            anchor: self.apply_point(&plane.anchor),
            normal: n / n.norm(),
        }
    }

    /// Rotation angle of the linear part, in radians.
    pub fn rotation_angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn of_points(points: &[Point3]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn centroid(&self) -> Point3 {
        bbox_centroid(self)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// The eight corners, `x` varying fastest.
    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [self.min; 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Point3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            );
        }
        out
    }
}

pub fn bounding_box(cloud: &PointCloud) -> Result<BoundingBox> {
    BoundingBox::of_points(cloud.points())
}

pub fn bbox_centroid(b: &BoundingBox) -> Point3 {
    Point3::new(
        (b.max.x + b.min.x) / 2.0,
        (b.max.y + b.min.y) / 2.0,
        (b.max.z + b.min.z) / 2.0,
    )
}

/// Arithmetic mean of the points.
pub fn mass_center(cloud: &PointCloud) -> Result<Point3> {
    cloud.ensure_non_empty()?;
    let sum = cloud
        .points()
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Ok(Point3::from(sum / cloud.len() as f64))
}

/// Mirror image of the cloud about `plane`. Normals are reflected as free
/// vectors.
pub fn reflect(cloud: &PointCloud, plane: &Plane) -> Result<PointCloud> {
    plane.validate()?;
    let points = cloud.points().iter().map(|p| plane.reflect_point(p)).collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| plane.reflect_vector(n)).collect());
    Ok(PointCloud::from_parts_unchecked(points, normals))
}

/// `x -> R x + t`; normals are rotated only.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    let points = cloud.points().iter().map(|p| t.apply_point(p)).collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect());
    PointCloud::from_parts_unchecked(points, normals)
}
