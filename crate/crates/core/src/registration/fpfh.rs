//! Fast Point Feature Histograms.
//!
//! Each point gets three 11-bin histograms of the Darboux-frame angles
//! `(alpha, phi, theta)` against its radius neighbors (SPFH); the final
//! feature adds the distance-weighted SPFHs of the neighbors, normalized per
//! block, to the point's own SPFH.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vec3};
use crate::spatial::{Neighbor, SpatialIndex};

pub const FPFH_BINS: usize = 33;
const BINS_PER_ANGLE: usize = 11;

/// A 33-bin FPFH descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhFeature(pub [f64; FPFH_BINS]);

impl FpfhFeature {
    pub fn zero() -> Self {
        Self([0.0; FPFH_BINS])
    }

    pub fn histogram(&self) -> &[f64; FPFH_BINS] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn distance_squared(&self, other: &FpfhFeature) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct FpfhFeatures {
    pub features: Vec<FpfhFeature>,
    /// Points with no neighbor inside the radius; their features are zero.
    pub isolated: Vec<usize>,
}

/// The pair feature `(alpha, phi, theta, distance)` for two oriented points.
///
/// The source of the Darboux frame is whichever point's normal makes the
/// smaller angle with the connecting line. Coincident points and parallel
/// configurations give all zeros.
pub fn pair_features(p1: &Point3, n1: &Vec3, p2: &Point3, n2: &Vec3) -> [f64; 4] {
    let mut dp = p2 - p1;
    let f4 = dp.norm();
    if f4 == 0.0 {
        return [0.0; 4];
    }
    let angle1 = n1.dot(&dp) / f4;
    let angle2 = n2.dot(&dp) / f4;
    let (s, t, f3) = if angle1.abs().min(1.0).acos() > angle2.abs().min(1.0).acos() {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(s);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return [0.0; 4];
    }
    let v = v / v_norm;
    let w = s.cross(&v);
    let f2 = v.dot(t);
    let f1 = w.dot(t).atan2(s.dot(t));
    [f1, f2, f3, f4]
}

fn bin(value: f64, lo: f64, width: f64) -> usize {
    let i = (BINS_PER_ANGLE as f64 * (value - lo) / width).floor();
    if i < 0.0 {
        0
    } else {
        (i as usize).min(BINS_PER_ANGLE - 1)
    }
}

fn spfh(i: usize, points: &[Point3], normals: &[Vec3], hood: &[Neighbor]) -> [f64; FPFH_BINS] {
    let mut h = [0.0; FPFH_BINS];
    if hood.len() <= 1 {
        return h;
    }
    let incr = 100.0 / (hood.len() - 1) as f64;
    for nb in hood {
        if nb.index == i {
            continue;
        }
        let f = pair_features(&points[i], &normals[i], &points[nb.index], &normals[nb.index]);
        h[bin(f[0], -PI, 2.0 * PI)] += incr;
        h[BINS_PER_ANGLE + bin(f[1], -1.0, 2.0)] += incr;
        h[2 * BINS_PER_ANGLE + bin(f[2], -1.0, 2.0)] += incr;
    }
    h
}

/// Neighbors within `radius`, closest first, at most `max_neighbors` of them
/// (the query point itself included).
fn hybrid_neighbors(index: &SpatialIndex, q: &Point3, radius: f64, max_neighbors: usize) -> Vec<Neighbor> {
    let mut hood = index.within_radius(q, radius);
    hood.truncate(max_neighbors);
    hood
}

/// FPFH for every point of a cloud with normals.
pub fn compute_fpfh(cloud: &PointCloud, radius: f64, max_neighbors: usize) -> Result<FpfhFeatures> {
    let normals = cloud.normals().ok_or(Error::MissingNormals)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidConfig(format!("feature radius must be positive, got {radius}")));
    }
    if max_neighbors < 2 {
        return Err(Error::InvalidConfig("feature neighbor cap must be at least 2".into()));
    }
    let points = cloud.points();
    let index = SpatialIndex::new(points);
    let hoods: Vec<Vec<Neighbor>> = points
        .par_iter()
        .map(|p| hybrid_neighbors(&index, p, radius, max_neighbors))
        .collect();
    let spfhs: Vec<[f64; FPFH_BINS]> = (0..points.len())
        .into_par_iter()
        .map(|i| spfh(i, points, normals, &hoods[i]))
        .collect();
    let features: Vec<FpfhFeature> = (0..points.len())
        .into_par_iter()
        .map(|i| FpfhFeature(combine(i, &hoods[i], &spfhs)))
        .collect();
    let isolated: Vec<usize> = hoods
        .iter()
        .enumerate()
        .filter(|(i, h)| !h.iter().any(|n| n.index != *i))
        .map(|(i, _)| i)
        .collect();
    if !isolated.is_empty() {
        log::debug!("{} isolated points have zero FPFH features", isolated.len());
    }
    Ok(FpfhFeatures { features, isolated })
}

fn combine(i: usize, hood: &[Neighbor], spfhs: &[[f64; FPFH_BINS]]) -> [f64; FPFH_BINS] {
    let mut out = [0.0; FPFH_BINS];
    if hood.len() <= 1 {
        return out;
    }
    let mut sums = [0.0; 3];
    for nb in hood {
        if nb.index == i || nb.dist_sq == 0.0 {
            continue;
        }
        for (f, v) in spfhs[nb.index].iter().enumerate() {
            let w = v / nb.dist_sq;
            sums[f / BINS_PER_ANGLE] += w;
            out[f] += w;
        }
    }
    for f in 0..FPFH_BINS {
        let s = sums[f / BINS_PER_ANGLE];
        if s != 0.0 {
            out[f] *= 100.0 / s;
        }
        out[f] += spfhs[i][f];
    }
    out
}
