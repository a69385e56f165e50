use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::report::{
    accuracy_table, cd_table, match_pairs, write_accuracy_table, write_cd_objects, write_cd_table, write_sweep,
    write_symmetry_objects, EvalReport, ObjectCd, ObjectSymmetry, SweepRow, CD_SCALE, EVAL_SCHEMA,
};
use super::{
    AugmentArgs, CliError, CliResult, CompleteArgs, DetectArgs, EvalArgs, RunConfig, SweepArgs, EXIT_FAILURE, EXIT_OK,
};
use crate::augment::{damage_batch, read_manifest};
use crate::completion::{self, keeps, with_normals, CompletionConfig, CompletionResult, PlaneSource};
use crate::geometry::{Plane, PointCloud};
use crate::io::{list_cloud_files, load_cloud, save_cloud, CloudFormat};
use crate::metrics::{chamfer_distance, prediction_correct, GroundTruth, ThresholdRule};
use crate::registration::{refine_symmetry_plane, RegistrationResult};
use crate::spatial::average_nn_distance;
use crate::symmetry::{best_scored, generate_candidates, score_candidates, SymmetryCandidate};

pub const DIAGNOSTICS_SCHEMA: &str = "symcomplete/diagnostics/v1";
pub const DETECT_SCHEMA: &str = "symcomplete/detect-plane/v1";

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes a line to stdout; a closed pipe is not an error.
fn print_stdout(text: &str) -> CliResult<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Runtime(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn output_format(output: &Path, input: CloudFormat, ascii: bool) -> CloudFormat {
    match CloudFormat::from_path(output).unwrap_or(input) {
        CloudFormat::PlyBinaryLe | CloudFormat::PlyAscii if ascii => CloudFormat::PlyAscii,
        CloudFormat::PlyAscii => CloudFormat::PlyBinaryLe,
        f => f,
    }
}

#[derive(Debug, Serialize)]
struct DiagnosticsReport<'a> {
    schema: &'static str,
    input: &'a Path,
    output: &'a Path,
    input_points: usize,
    output_points: usize,
    added_points: usize,
    skipped: bool,
    skip_reason: Option<&'a str>,
    skip_threshold: f64,
    scaled_chamfer: Option<f64>,
    seed: u64,
    plane: Option<Plane>,
    plane_source: PlaneSource,
    spacing: f64,
    cube_side: f64,
    candidates: &'a [SymmetryCandidate],
    selected: Option<SymmetryCandidate>,
    global_registration: Option<RegistrationResult>,
    registration: Option<RegistrationResult>,
    holes_per_pass: &'a [usize],
    messages: &'a [String],
}

impl<'a> DiagnosticsReport<'a> {
    fn new(input: &'a Path, output: &'a Path, r: &'a CompletionResult, cfg: &CompletionConfig) -> Self {
        let d = &r.diagnostics;
        Self {
            schema: DIAGNOSTICS_SCHEMA,
            input,
            output,
            input_points: r.completed.len() - r.added_points.len(),
            output_points: r.completed.len(),
            added_points: r.added_points.len(),
            skipped: r.skipped,
            skip_reason: d.skip_reason.as_deref(),
            skip_threshold: cfg.skip_threshold,
            scaled_chamfer: d.scaled_chamfer,
            seed: cfg.seed,
            plane: r.plane,
            plane_source: d.plane_source,
            spacing: d.spacing,
            cube_side: d.cube_side,
            candidates: &d.candidates,
            selected: d.selected,
            global_registration: d.global_registration,
            registration: d.registration,
            holes_per_pass: &d.holes_per_pass,
            messages: &d.messages,
        }
    }
}

fn complete_one(
    input: &Path,
    output: &Path,
    diagnostics: Option<&Path>,
    ascii: bool,
    cfg: &CompletionConfig,
) -> CliResult<CompletionResult> {
    let file = load_cloud(input)?;
    let result = completion::complete(&file.cloud, cfg)?;
    save_cloud(&result.completed, output, output_format(output, file.format, ascii))?;
    if let Some(d) = diagnostics {
        write_json(d, &DiagnosticsReport::new(input, output, &result, cfg))?;
    }
    if let Some(reason) = &result.diagnostics.skip_reason {
        eprintln!("{}: skipped ({reason})", input.display());
    }
    Ok(result)
}

pub fn complete(a: &CompleteArgs, cfg: &RunConfig) -> CliResult<i32> {
    if !a.input.is_dir() {
        let r = complete_one(&a.input, &a.output, a.diagnostics.as_deref(), a.ascii, &cfg.completion)?;
        eprintln!(
            "{}: {} points in, {} added",
            a.input.display(),
            r.completed.len() - r.added_points.len(),
            r.added_points.len()
        );
        return Ok(EXIT_OK);
    }
    create_dir(&a.output)?;
    if let Some(d) = &a.diagnostics {
        create_dir(d)?;
    }
    let files = list_cloud_files(&a.input)?;
    let outcomes: Vec<(PathBuf, CliResult<bool>)> = files
        .par_iter()
        .map(|f| {
            let name = f.file_name().unwrap_or_default();
            let out = a.output.join(name);
            let diag = a
                .diagnostics
                .as_ref()
                .map(|d| d.join(Path::new(name).with_extension("json")));
            let r = complete_one(f, &out, diag.as_deref(), a.ascii, &cfg.completion).map(|r| r.skipped);
            (f.clone(), r)
        })
        .collect();
    let mut failed = 0;
    let mut skipped = 0;
    for (f, r) in &outcomes {
        match r {
            Ok(true) => skipped += 1,
            Ok(false) => {}
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", f.display());
            }
        }
    }
    eprintln!(
        "{} files: {} completed, {skipped} skipped, {failed} failed",
        outcomes.len(),
        outcomes.len() - skipped - failed
    );
    Ok(if failed > 0 { EXIT_FAILURE } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct DetectReport<'a> {
    schema: &'static str,
    input: &'a Path,
    points: usize,
    candidates: Vec<SymmetryCandidate>,
    selected: SymmetryCandidate,
    plane: Plane,
    plane_source: PlaneSource,
    global_registration: Option<RegistrationResult>,
    registration: Option<RegistrationResult>,
    messages: Vec<String>,
}

pub fn detect_plane(a: &DetectArgs, cfg: &RunConfig) -> CliResult<i32> {
    let c = &cfg.completion;
    let cloud = load_cloud(&a.input)?.cloud;
    let spacing = average_nn_distance(&cloud)?;
    let balance = c.balance_for(spacing)?;
    let oriented = with_normals(&cloud, &c.normal_params)?;
    let set = generate_candidates(&oriented, &c.normal_params)?;
    let scored = score_candidates(&oriented, &set.candidates, &balance)?;
    let selected = best_scored(&scored)?;
    let mut report = DetectReport {
        schema: DETECT_SCHEMA,
        input: &a.input,
        points: cloud.len(),
        candidates: scored,
        selected,
        plane: selected.plane,
        plane_source: PlaneSource::InitialCandidate,
        global_registration: None,
        registration: None,
        messages: set.diagnostics,
    };
    if !a.candidates_only {
        match refine_symmetry_plane(&oriented, &selected.plane, &c.registration_for(spacing), c.seed) {
            Ok(r) => {
                report.plane = r.plane;
                report.plane_source = PlaneSource::Refined;
                report.global_registration = r.global;
                report.registration = Some(r.registration);
                report.messages.extend(r.diagnostics);
            }
            Err(e) => report
                .messages
                .push(format!("plane refinement failed, using initial candidate: {e}")),
        }
    }
    match &a.output {
        Some(p) => write_json(p, &report)?,
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
            print_stdout(&text)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn augment(a: &AugmentArgs) -> CliResult<i32> {
    let manifest = damage_batch(&a.input_dir, &a.output_dir, &a.rates, a.seed)?;
    let entries = read_manifest(&manifest)?;
    let failed: Vec<_> = entries.iter().filter(|e| e.error.is_some()).collect();
    for e in &failed {
        eprintln!(
            "{} at rate {}: {}",
            e.input.display(),
            e.rate,
            e.error.as_deref().unwrap_or_default()
        );
    }
    eprintln!(
        "{} outputs written, {} failed; manifest {}",
        entries.len() - failed.len(),
        failed.len(),
        manifest.display()
    );
    Ok(EXIT_OK)
}

fn list_json_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let bytes = fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// The `plane` field of a diagnostics or detect-plane report.
fn read_predicted_plane(path: &Path) -> CliResult<Plane> {
    let v = read_json(path)?;
    let plane = v
        .get("plane")
        .filter(|p| !p.is_null())
        .ok_or_else(|| CliError::Runtime(format!("{}: no plane", path.display())))?;
    let plane: Plane =
        serde_json::from_value(plane.clone()).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    plane.validate()?;
    Ok(plane)
}

fn read_ground_truth(path: &Path) -> CliResult<GroundTruth> {
    serde_json::from_value(read_json(path)?).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn emit<F>(path: Option<&Path>, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    match path {
        Some(p) => {
            let mut f = fs::File::create(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            write(&mut f)
        }
        None => {
            let mut buf = Vec::new();
            write(&mut buf)?;
            print_stdout(String::from_utf8_lossy(&buf).trim_end_matches('\n'))
        }
    }
}

pub fn eval(a: &EvalArgs) -> CliResult<i32> {
    if !(a.theta >= 0.0) || !(a.tau_fraction >= 0.0) {
        return Err(CliError::Config("theta and tau-fraction must be non-negative".into()));
    }
    let (preds, gts) = if a.symmetry {
        (list_json_files(&a.pred_dir)?, list_json_files(&a.gt_dir)?)
    } else {
        (list_cloud_files(&a.pred_dir)?, list_cloud_files(&a.gt_dir)?)
    };
    let (pairs, orphans, unused) = match_pairs(&preds, &gts);
    for p in &orphans {
        eprintln!("unmatched prediction: {}", p.display());
    }
    for g in &unused {
        eprintln!("ground truth without prediction: {}", g.display());
    }
    if (!orphans.is_empty() || !unused.is_empty()) && !a.allow_partial {
        eprintln!("unmatched files; pass --allow-partial to evaluate the matched ones");
        return Ok(EXIT_FAILURE);
    }
    if pairs.is_empty() {
        return Err(CliError::Runtime("no matched files".into()));
    }

    let mut report = EvalReport {
        schema: EVAL_SCHEMA.into(),
        mode: if a.symmetry { "symmetry" } else { "chamfer" }.into(),
        theta: a.symmetry.then_some(a.theta),
        tau_fraction: a.symmetry.then_some(a.tau_fraction),
        objects_cd: Vec::new(),
        objects_symmetry: Vec::new(),
        table_cd: Vec::new(),
        table_accuracy: Vec::new(),
        unmatched_predictions: orphans,
        unmatched_ground_truth: unused,
    };
    let mut failures = 0;
    if a.symmetry {
        let rule = ThresholdRule::Scaled {
            angle_threshold: a.theta,
            center_fraction: a.tau_fraction,
        };
        let rows: Vec<CliResult<ObjectSymmetry>> = pairs
            .par_iter()
            .map(|m| {
                let plane = read_predicted_plane(&m.pred)?;
                let gt = read_ground_truth(&m.gt)?;
                let angle = gt.planes.iter().map(|g| plane.normal_angle(g)).fold(f64::INFINITY, f64::min);
                Ok(ObjectSymmetry {
                    pred: m.pred.clone(),
                    gt: m.gt.clone(),
                    rate: m.rate,
                    correct: prediction_correct(&plane, &gt, &rule),
                    angle,
                })
            })
            .collect();
        for r in rows {
            match r {
                Ok(o) => report.objects_symmetry.push(o),
                Err(e) => {
                    failures += 1;
                    eprintln!("{e}");
                }
            }
        }
        report.table_accuracy = accuracy_table(&report.objects_symmetry);
        emit(None, |w| write_accuracy_table(&report.table_accuracy, w))?;
        if let Some(p) = &a.csv {
            emit(Some(p), |w| write_accuracy_table(&report.table_accuracy, w))?;
        }
        if let Some(p) = &a.objects_csv {
            emit(Some(p), |w| write_symmetry_objects(&report.objects_symmetry, w))?;
        }
    } else {
        let rows: Vec<CliResult<ObjectCd>> = pairs
            .par_iter()
            .map(|m| {
                let pred = load_cloud(&m.pred)?.cloud;
                let gt = load_cloud(&m.gt)?.cloud;
                Ok(ObjectCd {
                    pred: m.pred.clone(),
                    gt: m.gt.clone(),
                    rate: m.rate,
                    cd_x1e4: chamfer_distance(&pred, &gt)? * CD_SCALE,
                    pred_points: pred.len(),
                    gt_points: gt.len(),
                })
            })
            .collect();
        for r in rows {
            match r {
                Ok(o) => report.objects_cd.push(o),
                Err(e) => {
                    failures += 1;
                    eprintln!("{e}");
                }
            }
        }
        report.table_cd = cd_table(&report.objects_cd);
        emit(None, |w| write_cd_table(&report.table_cd, w))?;
        if let Some(p) = &a.csv {
            emit(Some(p), |w| write_cd_table(&report.table_cd, w))?;
        }
        if let Some(p) = &a.objects_csv {
            emit(Some(p), |w| write_cd_objects(&report.objects_cd, w))?;
        }
    }
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    Ok(if failures > 0 { EXIT_FAILURE } else { EXIT_OK })
}

/// Thresholds requested by the sweep flags.
pub fn sweep_values(a: &SweepArgs) -> CliResult<Vec<f64>> {
    let values = match &a.values {
        Some(v) => v.clone(),
        None => {
            if !(a.step > 0.0) || !a.from.is_finite() || !a.to.is_finite() {
                return Err(CliError::Config("range needs finite bounds and a positive step".into()));
            }
            let n = ((a.to - a.from) / a.step + 1e-9).floor();
            if n < 0.0 {
                Vec::new()
            } else {
                (0..=n as usize).map(|k| a.from + k as f64 * a.step).collect()
            }
        }
    };
    if values.is_empty() {
        return Err(CliError::Config("empty threshold range".into()));
    }
    if values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(CliError::Config("thresholds must be non-negative".into()));
    }
    Ok(values)
}

struct SweepSample {
    damaged_cd: f64,
    completed_cd: f64,
    scaled: Option<f64>,
}

fn sweep_one(damaged: &Path, gt: &Path, cfg: &CompletionConfig) -> CliResult<SweepSample> {
    let p = load_cloud(damaged)?.cloud;
    let truth: PointCloud = load_cloud(gt)?.cloud;
    let r = completion::complete(&p, cfg)?;
    Ok(SweepSample {
        damaged_cd: chamfer_distance(&p, &truth)?,
        completed_cd: chamfer_distance(&r.completed, &truth)?,
        scaled: if r.skipped { None } else { r.diagnostics.scaled_chamfer },
    })
}

pub fn sweep_threshold(a: &SweepArgs, cfg: &RunConfig) -> CliResult<i32> {
    let thresholds = sweep_values(a)?;
    let (pairs, orphans, _) = match_pairs(&list_cloud_files(&a.damaged_dir)?, &list_cloud_files(&a.gt_dir)?);
    for p in &orphans {
        eprintln!("no ground truth for {}", p.display());
    }
    if pairs.is_empty() {
        return Err(CliError::Runtime("no damaged/ground-truth pairs".into()));
    }
    let run_cfg = CompletionConfig {
        skip_validation: false,
        ..cfg.completion
    };
    let results: Vec<CliResult<SweepSample>> = pairs.par_iter().map(|m| sweep_one(&m.pred, &m.gt, &run_cfg)).collect();
    let mut samples = Vec::new();
    let mut failures = 0;
    for (m, r) in pairs.iter().zip(results) {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", m.pred.display());
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::Runtime("every file failed".into()));
    }
    let rows: Vec<SweepRow> = thresholds
        .iter()
        .map(|&t| {
            let mut total = 0.0;
            let mut kept = 0;
            for s in &samples {
                if s.scaled.is_some_and(|v| keeps(v, t)) {
                    kept += 1;
                    total += s.completed_cd;
                } else {
                    total += s.damaged_cd;
                }
            }
            SweepRow {
                threshold: t,
                mean_cd_x1e4: total / samples.len() as f64 * CD_SCALE,
                kept,
                skipped: samples.len() - kept,
            }
        })
        .collect();
    emit(a.output.as_deref(), |w| write_sweep(&rows, w))?;
    Ok(if failures > 0 { EXIT_FAILURE } else { EXIT_OK })
}
