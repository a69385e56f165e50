//! Symmetry plane candidates from two direction sets, and selection by
//! balanced distance.
//!
//! Both generators build a set of unit directions, run [`pca`] on it and
//! emit one plane per principal axis through a common center (normally the
//! bounding-box centroid). [`select_best_candidate`] keeps the plane whose
//! reflection best overlaps the original cloud.

mod hull;

pub use hull::{convex_hull, ConvexHull};

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bbox_centroid, bounding_box, Plane, Point3, PointCloud, Vec3};
use crate::linalg::{mean_and_covariance, symmetric_eigen3};
use crate::metrics::{balanced_distance_indexed, BalanceConfig};
use crate::normals::{estimate_normals, NormalParams, OrientationReference};
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSource {
    Normals,
    HullEdges,
}

/// Unit vectors on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    directions: Vec<Vec3>,
    source: DirectionSource,
}

const DIRECTION_UNIT_TOL: f64 = 1e-9;

impl DirectionSet {
    pub fn new(directions: Vec<Vec3>, source: DirectionSource) -> Result<Self> {
        for d in &directions {
            let n = d.norm();
            if !n.is_finite() || (n - 1.0).abs() > DIRECTION_UNIT_TOL {
                return Err(Error::InvalidConfig(format!("direction {d:?} is not unit length")));
            }
        }
        Ok(Self { directions, source })
    }

    /// The cloud's normals, as given.
    pub fn from_normals(cloud: &PointCloud) -> Result<Self> {
        let normals = cloud.normals().ok_or(Error::MissingNormals)?;
        Ok(Self {
            directions: normals.to_vec(),
            source: DirectionSource::Normals,
        })
    }

    /// Both signs of every hull edge direction, one pair per edge.
    pub fn from_hull_edges(points: &[Point3], hull: &ConvexHull) -> Self {
        let mut directions = Vec::with_capacity(2 * hull.edges.len());
        for &(a, b) in &hull.edges {
            let u = (points[b] - points[a]).normalize();
            directions.push(u);
            directions.push(-u);
        }
        Self {
            directions,
            source: DirectionSource::HullEdges,
        }
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn source(&self) -> DirectionSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Principal axes of a direction set, eigenvalues descending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [Vec3; 3],
}

/// Relative size below which an eigenvalue counts as zero.
const RANK_TOL: f64 = 1e-10;

fn pca_any(dirs: &DirectionSet) -> Option<PcaResult> {
    let (_, cov) = mean_and_covariance(dirs.directions.iter())?;
    let eig = symmetric_eigen3(&cov);
    Some(PcaResult {
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
    })
}

fn numerical_rank(r: &PcaResult) -> usize {
    let top = r.eigenvalues[0];
    if !(top > f64::MIN_POSITIVE) {
        return 0;
    }
    r.eigenvalues.iter().filter(|&&l| l > RANK_TOL * top).count()
}

/// Eigen-decomposition of the mean-centered covariance of the directions.
pub fn pca(dirs: &DirectionSet) -> Result<PcaResult> {
    if dirs.len() < 3 {
        return Err(Error::DegenerateDirections);
    }
    let r = pca_any(dirs).ok_or(Error::DegenerateDirections)?;
    if numerical_rank(&r) <= 1 {
        return Err(Error::DegenerateDirections);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    NormalsPca,
    HullPca,
}

/// An unscored candidate plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlane {
    pub plane: Plane,
    pub source: CandidateSource,
}

/// A candidate with its balanced-distance score in `[0, 1]`, lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCandidate {
    pub plane: Plane,
    pub source: CandidateSource,
    pub score: f64,
}

/// Candidates from one generator, plus a note when fewer than three were
/// produced.
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub candidates: Vec<CandidatePlane>,
    pub diagnostics: Vec<String>,
}

fn planes_through(center: &Point3, axes: &[Vec3], source: CandidateSource) -> Vec<CandidatePlane> {
    axes.iter()
        .map(|n| CandidatePlane {
            plane: Plane {
                anchor: *center,
                normal: n.normalize(),
            },
            source,
        })
        .collect()
}

/// Planes through `center` normal to the principal axes of the cloud's
/// normals. The cloud must carry normals.
///
/// A rank-deficient normal distribution yields fewer planes and a diagnostic
/// rather than an error.
pub fn normal_direction_candidates(cloud: &PointCloud, center: &Point3) -> Result<CandidateSet> {
    let dirs = DirectionSet::from_normals(cloud)?;
    let mut set = CandidateSet::default();
    let Some(r) = (dirs.len() >= 3).then(|| pca_any(&dirs)).flatten() else {
        set.diagnostics
            .push(format!("normals PCA: {}", Error::DegenerateDirections));
        return Ok(set);
    };
    let rank = numerical_rank(&r);
    let usable = match rank {
        0 => 0,
        1 => 1,
        _ => 3,
    };
    if usable < 3 {
        set.diagnostics.push(format!(
            "normals PCA: {} (rank {rank}); {usable} candidate(s)",
            Error::DegenerateDirections
        ));
    }
    set.candidates = planes_through(center, &r.eigenvectors[..usable], CandidateSource::NormalsPca);
    Ok(set)
}

/// Planes through `center` normal to the principal axes of the signed hull
/// edge directions.
pub fn hull_direction_candidates(cloud: &PointCloud, center: &Point3) -> Result<Vec<CandidatePlane>> {
    let hull = convex_hull(cloud.points())?;
    let dirs = DirectionSet::from_hull_edges(cloud.points(), &hull);
    let r = pca(&dirs)?;
    Ok(planes_through(center, &r.eigenvectors, CandidateSource::HullPca))
}

/// Runs both generators around the bounding-box centroid. Normals are
/// estimated (facing the mass center) when the cloud has none.
///
/// Normals-PCA candidates come first. A failing generator is recorded in the
/// diagnostics; only when both fail is an error returned.
pub fn generate_candidates(cloud: &PointCloud, normal_params: &NormalParams) -> Result<CandidateSet> {
    let center = bbox_centroid(&bounding_box(cloud)?);
    let mut out = CandidateSet::default();

    let with_normals = if cloud.has_normals() {
        Ok(Cow::Borrowed(cloud))
    } else {
        let params = NormalParams {
            orientation: OrientationReference::Centroid,
            ..*normal_params
        };
        estimate_normals(cloud, &params).map(|e| Cow::Owned(e.cloud))
    };
    match with_normals.and_then(|c| normal_direction_candidates(&c, &center)) {
        Ok(set) => {
            out.candidates.extend(set.candidates);
            out.diagnostics.extend(set.diagnostics);
        }
        Err(e) => out.diagnostics.push(format!("normals candidates unavailable: {e}")),
    }
    match hull_direction_candidates(cloud, &center) {
        Ok(c) => out.candidates.extend(c),
        Err(e) => out.diagnostics.push(format!("hull candidates unavailable: {e}")),
    }
    for d in &out.diagnostics {
        log::warn!("{d}");
    }
    if out.candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(out)
}

/// Balanced distance between the cloud and its reflection about each
/// candidate, in candidate order.
pub fn score_candidates(
    cloud: &PointCloud,
    candidates: &[CandidatePlane],
    cfg: &BalanceConfig,
) -> Result<Vec<SymmetryCandidate>> {
    cloud.ensure_non_empty()?;
    cfg.validate()?;
    let index = SpatialIndex::from_cloud(cloud);
    candidates
        .iter()
        .map(|c| {
            c.plane.validate()?;
            let mirrored: Vec<Point3> = cloud.points().iter().map(|x| c.plane.reflect_point(x)).collect();
            let mirror_index = SpatialIndex::new(&mirrored);
            let score = balanced_distance_indexed(cloud.points(), &index, &mirrored, &mirror_index, cfg);
            Ok(SymmetryCandidate {
                plane: c.plane,
                source: c.source,
                score,
            })
        })
        .collect()
}

/// Lowest score wins; ties go to the earlier candidate.
pub fn best_scored(scored: &[SymmetryCandidate]) -> Result<SymmetryCandidate> {
    scored
        .iter()
        .copied()
        .reduce(|best, c| if c.score < best.score { c } else { best })
        .ok_or(Error::NoCandidates)
}

pub fn select_best_candidate(
    cloud: &PointCloud,
    candidates: &[CandidatePlane],
    cfg: &BalanceConfig,
) -> Result<SymmetryCandidate> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    best_scored(&score_candidates(cloud, candidates, cfg)?)
}

/// Candidates, their scores, and the winner.
#[derive(Debug, Clone)]
pub struct Detection {
    pub best: SymmetryCandidate,
    pub scored: Vec<SymmetryCandidate>,
    pub diagnostics: Vec<String>,
}

/// Generate, score and select in one call.
pub fn detect_plane(cloud: &PointCloud, normal_params: &NormalParams, cfg: &BalanceConfig) -> Result<Detection> {
    let set = generate_candidates(cloud, normal_params)?;
    let scored = score_candidates(cloud, &set.candidates, cfg)?;
    Ok(Detection {
        best: best_scored(&scored)?,
        scored,
        diagnostics: set.diagnostics,
    })
}
