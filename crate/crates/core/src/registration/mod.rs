//! Self-registration of a cloud against its mirror image, and recovery of a
//! refined symmetry plane from the result.
//!
//! The mirrored cloud `P' = T(P)` is aligned back onto `P` by a rigid motion
//! `G` (coarse RANSAC on FPFH matches, then point-to-point ICP). The
//! composite `M = G o T` is an improper isometry; when the initial plane was
//! close to a true symmetry plane it is close to a reflection, whose mirror
//! plane is the refined estimate.

mod fpfh;
mod icp;
mod ransac;

pub use fpfh::{compute_fpfh, pair_features, FpfhFeature, FpfhFeatures, FPFH_BINS};
pub use icp::{
    find_correspondences, fit_correspondences, icp_refine, icp_refine_traced, truncated_objective, Correspondence,
    IcpTrace,
};
pub use ransac::{global_registration, match_features, ransac_correspondences};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reflect, Mat3, Plane, Point3, PointCloud, RigidTransform, Vec3};
use crate::linalg::symmetric_eigen3;
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationParams {
    pub voxel_size: f64,
    pub feature_radius: f64,
    pub feature_max_neighbors: usize,
    pub ransac_iterations: usize,
    pub ransac_confidence: f64,
    pub ransac_distance_threshold: f64,
    pub icp_max_iterations: usize,
    pub icp_distance_threshold: f64,
    pub icp_convergence_delta: f64,
}

impl RegistrationParams {
    pub const VOXEL_FACTOR: f64 = 2.5;
    pub const FEATURE_RADIUS_FACTOR: f64 = 5.0;
    pub const RANSAC_THRESHOLD_FACTOR: f64 = 1.5;
    pub const ICP_THRESHOLD_FACTOR: f64 = 1.0;

    /// Defaults scaled to a cloud whose average nearest-neighbor distance is
    /// `spacing`.
    pub fn from_spacing(spacing: f64) -> Self {
        let voxel = Self::VOXEL_FACTOR * spacing;
        Self {
            voxel_size: voxel,
            feature_radius: Self::FEATURE_RADIUS_FACTOR * voxel,
            feature_max_neighbors: 100,
            ransac_iterations: 4_000_000,
            ransac_confidence: 0.999,
            ransac_distance_threshold: Self::RANSAC_THRESHOLD_FACTOR * voxel,
            icp_max_iterations: 50,
            icp_distance_threshold: Self::ICP_THRESHOLD_FACTOR * voxel,
            icp_convergence_delta: 1e-10 * spacing * spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("voxel_size", self.voxel_size),
            ("feature_radius", self.feature_radius),
            ("ransac_distance_threshold", self.ransac_distance_threshold),
            ("icp_distance_threshold", self.icp_distance_threshold),
            ("icp_convergence_delta", self.icp_convergence_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("registration.{name} must be positive, got {v}")));
            }
        }
        if !(self.ransac_confidence > 0.0 && self.ransac_confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "registration.ransac_confidence must be in (0, 1), got {}",
                self.ransac_confidence
            )));
        }
        for (name, v) in [
            ("feature_max_neighbors", self.feature_max_neighbors),
            ("ransac_iterations", self.ransac_iterations),
            ("icp_max_iterations", self.icp_max_iterations),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("registration.{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    /// Fraction of source points with a target point within the threshold.
    pub fitness: f64,
    /// RMS distance over those inlier points.
    pub inlier_rmse: f64,
}

pub(crate) fn evaluate(src: &[Point3], index: &SpatialIndex, transform: &RigidTransform, threshold: f64) -> RegistrationResult {
    let corr = find_correspondences(src, index, transform, threshold);
    let fitness = if src.is_empty() {
        0.0
    } else {
        corr.len() as f64 / src.len() as f64
    };
    let inlier_rmse = if corr.is_empty() {
        0.0
    } else {
        (corr.iter().map(|c| c.dist_sq).sum::<f64>() / corr.len() as f64).sqrt()
    };
    RegistrationResult {
        transform: *transform,
        fitness,
        inlier_rmse,
    }
}

/// One point per occupied voxel: the centroid of its members, with the
/// renormalized mean normal. Voxels are emitted in grid order.
pub fn downsample_voxel(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    cloud.ensure_non_empty()?;
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::InvalidConfig(format!("voxel size must be positive, got {voxel_size}")));
    }
    let min = crate::geometry::bounding_box(cloud)?.min;
    let normals = cloud.normals();
    let mut cells: BTreeMap<[i64; 3], (Vec3, Vec3, usize)> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = [0, 1, 2].map(|k| ((p[k] - min[k]) / voxel_size).floor() as i64);
        let cell = cells.entry(key).or_insert((Vec3::zeros(), Vec3::zeros(), 0));
        cell.0 += p.coords;
        if let Some(ns) = normals {
            cell.1 += ns[i];
        }
        cell.2 += 1;
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut out_normals = Vec::with_capacity(cells.len());
    for (sum, nsum, count) in cells.into_values() {
        points.push(Point3::from(sum / count as f64));
        let n = nsum.norm();
        out_normals.push(if n > 1e-12 { nsum / n } else { Vec3::z() });
    }
    Ok(PointCloud::from_parts_unchecked(points, normals.map(|_| out_normals)))
}

/// Largest allowed distance of the composite's symmetric-part eigenvalues
/// from those of a pure reflection, `(-1, 1, 1)`.
pub const REFLECTION_TOLERANCE: f64 = 0.1;

/// Mirror plane of the improper isometry `x -> A x + b`, via the nearest
/// pure reflection: the normal is the eigenvector of `(A + A^T)/2` with the
/// smallest eigenvalue.
///
/// `reference` fixes the normal's sign and supplies the anchor (projected
/// onto the extracted plane). Fails when the map is not close to a
/// reflection.
pub fn reflection_plane(linear: &Mat3, offset: &Vec3, reference: &Plane) -> Result<(Plane, [f64; 3])> {
    let det = linear.determinant();
    if (det + 1.0).abs() > 1e-6 {
        return Err(Error::ReflectionLost(format!("linear part has determinant {det:.6}")));
    }
    let sym = (linear + linear.transpose()) * 0.5;
    let eig = symmetric_eigen3(&sym);
    let [l0, l1, l2] = eig.values;
    if (l2 + 1.0).abs() > REFLECTION_TOLERANCE
        || (l1 - 1.0).abs() > REFLECTION_TOLERANCE
        || (l0 - 1.0).abs() > REFLECTION_TOLERANCE
    {
        return Err(Error::ReflectionLost(format!(
            "composite eigenvalues ({l0:.4}, {l1:.4}, {l2:.4}) are not close to (1, 1, -1)"
        )));
    }
    let mut n = eig.vectors[2];
    if n.dot(&reference.normal) < 0.0 {
        n = -n;
    }
    let c = offset.dot(&n) / 2.0;
    let p = reference.anchor;
    let anchor = p - n * (p.coords.dot(&n) - c);
    Ok((Plane { anchor, normal: n }, eig.values))
}

/// Outcome of [`refine_symmetry_plane`].
#[derive(Debug, Clone, Serialize)]
pub struct PlaneRefinement {
    pub plane: Plane,
    pub initial: Plane,
    /// Coarse alignment of the mirrored cloud, if it could run.
    pub global: Option<RegistrationResult>,
    /// Final alignment `G` of the mirrored cloud onto the original.
    pub registration: RegistrationResult,
    /// Eigenvalues of the symmetric part of the composite's linear map.
    pub composite_eigenvalues: [f64; 3],
    pub diagnostics: Vec<String>,
}

/// Registers `reflect(P, initial)` onto `P` and extracts the refined plane.
///
/// ICP runs from both the RANSAC estimate and the identity; the start whose
/// composite is reflection-like and reaches the lower truncated objective
/// wins. `cloud` must carry normals.
pub fn refine_symmetry_plane(
    cloud: &PointCloud,
    initial: &Plane,
    params: &RegistrationParams,
    seed: u64,
) -> Result<PlaneRefinement> {
    params.validate()?;
    initial.validate()?;
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    let mirrored = reflect(cloud, initial)?;
    let mut diagnostics = Vec::new();

    let global = downsample_voxel(&mirrored, params.voxel_size)
        .and_then(|src| Ok((src, downsample_voxel(cloud, params.voxel_size)?)))
        .and_then(|(src, dst)| global_registration(&src, &dst, params, seed));
    let global = match global {
        Ok(g) => Some(g),
        Err(e) => {
            diagnostics.push(format!("global registration failed: {e}"));
            None
        }
    };

    let index = SpatialIndex::from_cloud(cloud);
    let h = initial.reflection_matrix();
    let b_h = initial.normal * (2.0 * initial.offset());
    let mut starts = vec![RigidTransform::identity()];
    if let Some(g) = &global {
        starts.insert(0, g.transform);
    }
    let mut best: Option<(f64, RegistrationResult, Plane, [f64; 3])> = None;
    for start in starts {
        let (reg, trace) = icp::icp_indexed(mirrored.points(), cloud.points(), &index, &start, params);
        let energy = *trace.objective.last().expect("objective recorded");
        let g = reg.transform;
        let linear = g.rotation * h;
        let offset = g.rotation * b_h + g.translation;
        match reflection_plane(&linear, &offset, initial) {
            Ok((plane, eig)) => {
                if best.as_ref().is_none_or(|b| energy < b.0) {
                    best = Some((energy, reg, plane, eig));
                }
            }
            Err(e) => diagnostics.push(format!("ICP start rejected: {e}")),
        }
    }
    let Some((_, registration, plane, composite_eigenvalues)) = best else {
        return Err(Error::ReflectionLost(diagnostics.join("; ")));
    };
    Ok(PlaneRefinement {
        plane,
        initial: *initial,
        global,
        registration,
        composite_eigenvalues,
        diagnostics,
    })
}
