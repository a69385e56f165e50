//! Point-to-point ICP.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::linalg::fit_rigid;
use crate::spatial::SpatialIndex;

use super::{evaluate, RegistrationParams, RegistrationResult};

/// Pairs `(source index, target index)` with their squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub dist_sq: f64,
}

/// Nearest target point for every transformed source point within
/// `max_distance`.
pub fn find_correspondences(
    source: &[Point3],
    target_index: &SpatialIndex,
    transform: &RigidTransform,
    max_distance: f64,
) -> Vec<Correspondence> {
    let limit = max_distance * max_distance;
    let found: Vec<Option<Correspondence>> = source
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nb = target_index.nearest_one(&transform.apply_point(p))?;
            (nb.dist_sq <= limit).then_some(Correspondence {
                source: i,
                target: nb.index,
                dist_sq: nb.dist_sq,
            })
        })
        .collect();
    found.into_iter().flatten().collect()
}

/// Closed-form rigid fit over a correspondence set, in original source
/// coordinates.
pub fn fit_correspondences(source: &[Point3], target: &[Point3], corr: &[Correspondence]) -> Option<RigidTransform> {
    let s: Vec<Point3> = corr.iter().map(|c| source[c.source]).collect();
    let t: Vec<Point3> = corr.iter().map(|c| target[c.target]).collect();
    fit_rigid(&s, &t)
}

/// `(1/N) sum_i min(d_i^2, tau^2)` over all source points, where `d_i` is
/// the distance to the nearest target point. Non-increasing across ICP
/// iterations.
pub fn truncated_objective(
    source: &[Point3],
    target_index: &SpatialIndex,
    transform: &RigidTransform,
    max_distance: f64,
) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let cap = max_distance * max_distance;
    let parts: Vec<f64> = source
        .par_iter()
        .map(|p| {
            target_index
                .nearest_one(&transform.apply_point(p))
                .map_or(cap, |n| n.dist_sq.min(cap))
        })
        .collect();
    parts.iter().sum::<f64>() / source.len() as f64
}

/// Per-iteration record of an ICP run.
#[derive(Debug, Clone, Default)]
pub struct IcpTrace {
    /// Truncated objective before the first step and after every step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    params: &RegistrationParams,
) -> Result<RegistrationResult> {
    icp_refine_traced(source, target, init, params).map(|(r, _)| r)
}

/// ICP with the objective history. The transform maps `source` onto
/// `target`.
pub fn icp_refine_traced(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    params: &RegistrationParams,
) -> Result<(RegistrationResult, IcpTrace)> {
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    params.validate()?;
    let index = SpatialIndex::from_cloud(target);
    Ok(icp_indexed(source.points(), target.points(), &index, init, params))
}

pub(crate) fn icp_indexed(
    src: &[Point3],
    dst: &[Point3],
    index: &SpatialIndex,
    init: &RigidTransform,
    params: &RegistrationParams,
) -> (RegistrationResult, IcpTrace) {
    let tau = params.icp_distance_threshold;
    let mut trace = IcpTrace::default();
    let mut current = *init;
    let mut energy = truncated_objective(src, index, &current, tau);
    trace.objective.push(energy);
    for _ in 0..params.icp_max_iterations {
        let corr = find_correspondences(src, index, &current, tau);
        let Some(next) = fit_correspondences(src, dst, &corr) else {
            break;
        };
        let next_energy = truncated_objective(src, index, &next, tau);
        trace.iterations += 1;
        if next_energy > energy {
            // Rounding-level increase; keep the better transform.
            trace.objective.push(energy);
            trace.converged = true;
            break;
        }
        let decrease = energy - next_energy;
        current = next;
        energy = next_energy;
        trace.objective.push(energy);
        if decrease < params.icp_convergence_delta {
            trace.converged = true;
            break;
        }
    }
    (evaluate(src, index, &current, tau), trace)
}
