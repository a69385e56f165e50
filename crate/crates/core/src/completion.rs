//! The completion pipeline: detect a symmetry plane, refine it by
//! self-registration, add the mirrored points that fall into holes, and
//! discard the result if it strays too far from the input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reflect, Plane, Point3, PointCloud};
use crate::metrics::{chamfer_distance, is_balanced, BalanceConfig};
use crate::normals::{estimate_normals, orient_normals, NormalParams, OrientationReference};
use crate::registration::{refine_symmetry_plane, RegistrationParams, RegistrationResult};
use crate::spatial::{average_nn_distance, SpatialIndex};
use crate::symmetry::{best_scored, generate_candidates, score_candidates, SymmetryCandidate};

pub const MIN_CLOUD_SIZE: usize = 100;
pub const DEFAULT_SKIP_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionConfig {
    /// Balance threshold `epsilon`.
    pub epsilon: f64,
    /// Cube side `d`; `None` uses `cube_factor` times the average
    /// nearest-neighbor distance of the input.
    pub cube_side: Option<f64>,
    pub cube_factor: f64,
    /// Explicit registration parameters; `None` derives them from the
    /// input's point spacing.
    pub registration: Option<RegistrationParams>,
    pub normal_params: NormalParams,
    /// Scaled Chamfer threshold `d*` above which a completion is discarded.
    pub skip_threshold: f64,
    pub skip_validation: bool,
    /// Number of detect-and-fill rounds with the refined plane.
    pub passes: usize,
    pub seed: u64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            epsilon: BalanceConfig::DEFAULT_EPSILON,
            cube_side: None,
            cube_factor: BalanceConfig::DEFAULT_CUBE_FACTOR,
            registration: None,
            normal_params: NormalParams {
                orientation: OrientationReference::Centroid,
                ..NormalParams::default()
            },
            skip_threshold: DEFAULT_SKIP_THRESHOLD,
            skip_validation: true,
            passes: 1,
            seed: 0,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        let probe = BalanceConfig {
            cube_side: self.cube_side.unwrap_or(1.0),
            epsilon: self.epsilon,
        };
        probe.validate()?;
        if !(self.cube_factor > 0.0 && self.cube_factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("cube_factor must be positive, got {}", self.cube_factor)));
        }
        if let Some(r) = &self.registration {
            r.validate()?;
        }
        self.normal_params.validate()?;
        if !(self.skip_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "skip_threshold must be non-negative, got {}",
                self.skip_threshold
            )));
        }
        if self.passes == 0 {
            return Err(Error::InvalidConfig("passes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn balance_for(&self, spacing: f64) -> Result<BalanceConfig> {
        BalanceConfig::new(self.cube_side.unwrap_or(self.cube_factor * spacing), self.epsilon)
    }

    pub fn registration_for(&self, spacing: f64) -> RegistrationParams {
        self.registration.unwrap_or_else(|| RegistrationParams::from_spacing(spacing))
    }
}

/// Where the plane used for filling came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneSource {
    Refined,
    InitialCandidate,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletionDiagnostics {
    pub spacing: f64,
    pub cube_side: f64,
    pub candidates: Vec<SymmetryCandidate>,
    pub selected: Option<SymmetryCandidate>,
    pub plane_source: PlaneSource,
    pub global_registration: Option<RegistrationResult>,
    pub registration: Option<RegistrationResult>,
    /// Points added in each pass.
    pub holes_per_pass: Vec<usize>,
    /// `CD(P, P*) / s`, when a completion was produced.
    pub scaled_chamfer: Option<f64>,
    pub skip_reason: Option<String>,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub completed: PointCloud,
    pub added_points: PointCloud,
    pub plane: Option<Plane>,
    pub skipped: bool,
    pub diagnostics: CompletionDiagnostics,
}

/// Indices of the points `x'` of `mirror` that are unbalanced and whose cube
/// holds strictly more mirror points than original points.
pub fn detect_hole_indices(
    original_index: &SpatialIndex,
    mirror: &[Point3],
    mirror_index: &SpatialIndex,
    cfg: &BalanceConfig,
) -> Vec<usize> {
    let flags: Vec<bool> = mirror
        .par_iter()
        .map(|x| {
            let (balanced, counts) = is_balanced(x, original_index, mirror_index, cfg);
            !balanced && counts.mirror > counts.own
        })
        .collect();
    flags
        .iter()
        .enumerate()
        .filter_map(|(i, &hole)| hole.then_some(i))
        .collect()
}

/// The subset of `mirror` that fills holes of `original`.
pub fn detect_holes(original: &PointCloud, mirror: &PointCloud, cfg: &BalanceConfig) -> Result<PointCloud> {
    original.ensure_non_empty()?;
    mirror.ensure_non_empty()?;
    cfg.validate()?;
    let io = SpatialIndex::from_cloud(original);
    let im = SpatialIndex::from_cloud(mirror);
    let idx = detect_hole_indices(&io, mirror.points(), &im, cfg);
    Ok(mirror.select(&idx))
}

/// `P` followed by the hole points.
pub fn fill(original: &PointCloud, holes: &PointCloud) -> PointCloud {
    if holes.is_empty() {
        return original.clone();
    }
    original.concat(holes)
}

/// `CD(P, P*) / s` with `s` the average nearest-neighbor distance of `P`.
pub fn scaled_chamfer(original: &PointCloud, completed: &PointCloud) -> Result<f64> {
    crate::metrics::scaled_chamfer(original, completed)
}

/// Keep decision for a known scaled Chamfer distance. A threshold of zero
/// discards every completion.
pub fn keeps(scaled: f64, threshold: f64) -> bool {
    threshold > 0.0 && scaled <= threshold
}

/// True when the completion should be kept: `CD(P, P*) / s <= d*`.
pub fn skip_validate(original: &PointCloud, completed: &PointCloud, threshold: f64) -> Result<bool> {
    if threshold <= 0.0 {
        return Ok(false);
    }
    Ok(keeps(scaled_chamfer(original, completed)?, threshold))
}

/// `cloud` with normals: existing ones reoriented, otherwise estimated.
pub fn with_normals(cloud: &PointCloud, params: &NormalParams) -> Result<PointCloud> {
    if cloud.has_normals() {
        orient_normals(cloud, &params.orientation)
    } else {
        Ok(estimate_normals(cloud, params)?.cloud)
    }
}

/// Runs the full pipeline on `cloud`.
///
/// Detection failures do not error: the input comes back with
/// `skipped = true` and a reason. Inputs below [`MIN_CLOUD_SIZE`] points
/// are rejected.
pub fn complete(cloud: &PointCloud, cfg: &CompletionConfig) -> Result<CompletionResult> {
    cfg.validate()?;
    if cloud.len() < MIN_CLOUD_SIZE {
        return Err(Error::TooFewPoints {
            needed: MIN_CLOUD_SIZE,
            got: cloud.len(),
        });
    }
    let spacing = average_nn_distance(cloud)?;
    let balance = cfg.balance_for(spacing)?;
    let mut diag = CompletionDiagnostics {
        spacing,
        cube_side: balance.cube_side,
        candidates: Vec::new(),
        selected: None,
        plane_source: PlaneSource::None,
        global_registration: None,
        registration: None,
        holes_per_pass: Vec::new(),
        scaled_chamfer: None,
        skip_reason: None,
        messages: Vec::new(),
    };

    let oriented = with_normals(cloud, &cfg.normal_params)?;
    let detection = generate_candidates(&oriented, &cfg.normal_params)
        .and_then(|set| Ok((score_candidates(&oriented, &set.candidates, &balance)?, set.diagnostics)));
    let (scored, notes) = match detection {
        Ok(d) => d,
        Err(e) => return Ok(unchanged(cloud, None, diag, format!("no usable symmetry candidate: {e}"))),
    };
    diag.messages.extend(notes);
    let best = best_scored(&scored)?;
    diag.candidates = scored;
    diag.selected = Some(best);

    let params = cfg.registration_for(spacing);
    let plane = match refine_symmetry_plane(&oriented, &best.plane, &params, cfg.seed) {
        Ok(r) => {
            diag.messages.extend(r.diagnostics);
            diag.global_registration = r.global;
            diag.registration = Some(r.registration);
            diag.plane_source = PlaneSource::Refined;
            r.plane
        }
        Err(e) => {
            diag.messages.push(format!("plane refinement failed, using initial candidate: {e}"));
            diag.plane_source = PlaneSource::InitialCandidate;
            best.plane
        }
    };

    let mut completed = cloud.clone();
    for _ in 0..cfg.passes {
        let mirror = reflect(&completed, &plane)?;
        let holes = detect_holes(&completed, &mirror, &balance)?;
        diag.holes_per_pass.push(holes.len());
        if holes.is_empty() {
            break;
        }
        completed = fill(&completed, &holes);
    }

    let scaled = scaled_chamfer(cloud, &completed)?;
    diag.scaled_chamfer = Some(scaled);
    if cfg.skip_validation && !keeps(scaled, cfg.skip_threshold) {
        let reason = format!(
            "scaled Chamfer distance {scaled:.4} exceeds threshold {}",
            cfg.skip_threshold
        );
        return Ok(unchanged(cloud, Some(plane), diag, reason));
    }
    let added: Vec<usize> = (cloud.len()..completed.len()).collect();
    Ok(CompletionResult {
        added_points: completed.select(&added),
        completed,
        plane: Some(plane),
        skipped: false,
        diagnostics: diag,
    })
}

fn unchanged(cloud: &PointCloud, plane: Option<Plane>, mut diag: CompletionDiagnostics, reason: String) -> CompletionResult {
    log::info!("completion skipped: {reason}");
    diag.skip_reason = Some(reason);
    let empty = cloud.select(&[]);
    CompletionResult {
        completed: cloud.clone(),
        added_points: empty,
        plane,
        skipped: true,
        diagnostics: diag,
    }
}

/// Chamfer distance between a completion and a reference cloud; a
/// convenience for evaluation code.
pub fn completion_error(result: &CompletionResult, reference: &PointCloud) -> Result<f64> {
    chamfer_distance(&result.completed, reference)
}
