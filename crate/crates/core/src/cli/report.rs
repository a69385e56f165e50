//! Pairing of prediction and ground-truth files, and report rows. Chamfer
//! distances are stored raw and scaled by 1e4 only when written.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, CliResult};

pub const CD_SCALE: f64 = 1e4;
pub const EVAL_SCHEMA: &str = "symcomplete/eval-report/v1";

/// Splits a trailing `_drNN` damage-rate tag off a file stem.
pub fn split_rate(stem: &str) -> (&str, Option<f64>) {
    if let Some(pos) = stem.rfind("_dr") {
        let digits = &stem[pos + 3..];
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(pct) = digits.parse::<u32>() {
                return (&stem[..pos], Some(pct as f64 / 100.0));
            }
        }
    }
    (stem, None)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatch {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub rate: Option<f64>,
}

/// Matches each prediction to the ground truth with the same stem after
/// removing a `_drNN` tag. Returns the pairs (sorted by prediction path),
/// unmatched predictions, and ground truths without any prediction.
pub fn match_pairs(preds: &[PathBuf], gts: &[PathBuf]) -> (Vec<PairMatch>, Vec<PathBuf>, Vec<PathBuf>) {
    let by_stem: BTreeMap<String, &PathBuf> = gts.iter().map(|g| (stem(g), g)).collect();
    let mut used = std::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    let mut orphans = Vec::new();
    let mut sorted = preds.to_vec();
    sorted.sort();
    for p in sorted {
        let s = stem(&p);
        let hit = by_stem
            .get(&s)
            .map(|g| (*g, None))
            .or_else(|| {
                let (base, rate) = split_rate(&s);
                by_stem.get(base).map(|g| (*g, rate))
            });
        match hit {
            Some((g, rate)) => {
                used.insert(g.clone());
                pairs.push(PairMatch {
                    pred: p,
                    gt: g.clone(),
                    rate,
                });
            }
            None => orphans.push(p),
        }
    }
    let unused = gts.iter().filter(|g| !used.contains(*g)).cloned().collect();
    (pairs, orphans, unused)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCd {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub rate: Option<f64>,
    pub cd_x1e4: f64,
    pub pred_points: usize,
    pub gt_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdRow {
    pub rate: Option<f64>,
    pub count: usize,
    pub mean_cd_x1e4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSymmetry {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub rate: Option<f64>,
    pub correct: bool,
    /// Smallest unsigned normal angle to any ground-truth plane, radians.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub rate: Option<f64>,
    pub count: usize,
    pub accuracy_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub mode: String,
    pub theta: Option<f64>,
    pub tau_fraction: Option<f64>,
    pub objects_cd: Vec<ObjectCd>,
    pub objects_symmetry: Vec<ObjectSymmetry>,
    pub table_cd: Vec<CdRow>,
    pub table_accuracy: Vec<AccuracyRow>,
    pub unmatched_predictions: Vec<PathBuf>,
    pub unmatched_ground_truth: Vec<PathBuf>,
}

fn rate_key(rate: Option<f64>) -> i64 {
    rate.map_or(-1, |r| (r * 1e6).round() as i64)
}

pub fn cd_table(objects: &[ObjectCd]) -> Vec<CdRow> {
    let mut groups: BTreeMap<i64, (Option<f64>, Vec<f64>)> = BTreeMap::new();
    for o in objects {
        groups.entry(rate_key(o.rate)).or_insert((o.rate, Vec::new())).1.push(o.cd_x1e4);
    }
    groups
        .into_values()
        .map(|(rate, v)| CdRow {
            rate,
            count: v.len(),
            mean_cd_x1e4: v.iter().sum::<f64>() / v.len() as f64,
        })
        .collect()
}

pub fn accuracy_table(objects: &[ObjectSymmetry]) -> Vec<AccuracyRow> {
    let mut groups: BTreeMap<i64, (Option<f64>, usize, usize)> = BTreeMap::new();
    for o in objects {
        let g = groups.entry(rate_key(o.rate)).or_insert((o.rate, 0, 0));
        g.1 += 1;
        g.2 += o.correct as usize;
    }
    groups
        .into_values()
        .map(|(rate, n, ok)| AccuracyRow {
            rate,
            count: n,
            accuracy_percent: 100.0 * ok as f64 / n as f64,
        })
        .collect()
}

fn rate_label(rate: Option<f64>) -> String {
    rate.map_or_else(|| "original".to_string(), |r| format!("{:.0}%", r * 100.0))
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("csv: {e}"))
}

pub fn write_cd_table<W: Write>(rows: &[CdRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["damage_rate", "count", "mean_cd_x1e4"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([rate_label(r.rate), r.count.to_string(), format!("{:.4}", r.mean_cd_x1e4)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_accuracy_table<W: Write>(rows: &[AccuracyRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["damage_rate", "count", "accuracy_percent"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([rate_label(r.rate), r.count.to_string(), format!("{:.2}", r.accuracy_percent)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_cd_objects<W: Write>(rows: &[ObjectCd], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prediction", "ground_truth", "damage_rate", "cd_x1e4", "pred_points", "gt_points"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.pred.display().to_string(),
            r.gt.display().to_string(),
            rate_label(r.rate),
            format!("{:.4}", r.cd_x1e4),
            r.pred_points.to_string(),
            r.gt_points.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_symmetry_objects<W: Write>(rows: &[ObjectSymmetry], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prediction", "ground_truth", "damage_rate", "correct", "angle_rad"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.pred.display().to_string(),
            r.gt.display().to_string(),
            rate_label(r.rate),
            r.correct.to_string(),
            format!("{:.6}", r.angle),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// One point of the skip-threshold curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub mean_cd_x1e4: f64,
    pub kept: usize,
    pub skipped: usize,
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d_star", "mean_cd_x1e4", "kept", "skipped"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            format!("{:.4}", r.mean_cd_x1e4),
            r.kept.to_string(),
            r.skipped.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_suffix() {
        assert_eq!(split_rate("box_dr05"), ("box", Some(0.05)));
        assert_eq!(split_rate("a_dr_b_dr45"), ("a_dr_b", Some(0.45)));
        assert_eq!(split_rate("box"), ("box", None));
        assert_eq!(split_rate("box_dr"), ("box_dr", None));
        assert_eq!(split_rate("box_drx1"), ("box_drx1", None));
    }

    #[test]
    fn pairing() {
        let p = |s: &str| PathBuf::from(s);
        let preds = vec![p("o/b_dr05.ply"), p("o/a.ply"), p("o/zz.ply"), p("o/b_dr45.xyz")];
        let gts = vec![p("g/a.ply"), p("g/b.ply"), p("g/c.ply")];
        let (pairs, orphans, unused) = match_pairs(&preds, &gts);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].pred, p("o/a.ply"));
        assert_eq!(pairs[0].rate, None);
        assert_eq!(pairs[1].rate, Some(0.05));
        assert_eq!(pairs[2].gt, p("g/b.ply"));
        assert_eq!(orphans, vec![p("o/zz.ply")]);
        assert_eq!(unused, vec![p("g/c.ply")]);
    }

    #[test]
    fn tables_group_by_rate() {
        let o = |r: Option<f64>, cd: f64| ObjectCd {
            pred: PathBuf::new(),
            gt: PathBuf::new(),
            rate: r,
            cd_x1e4: cd,
            pred_points: 1,
            gt_points: 1,
        };
        let rows = cd_table(&[o(Some(0.45), 3.0), o(Some(0.05), 1.0), o(Some(0.05), 2.0), o(None, 0.0)]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].rate, None);
        assert_eq!((rows[1].count, rows[1].mean_cd_x1e4), (2, 1.5));
        let mut buf = Vec::new();
        write_cd_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "5%,2,1.5000");
    }
}
