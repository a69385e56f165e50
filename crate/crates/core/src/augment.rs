//! Synthetic damage: remove a fraction of a cloud as a random number of
//! localized holes, keeping the removed indices as ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::io::{list_cloud_files, load_cloud, serialize_cloud};

/// Allowed absolute deviation of the achieved removal fraction.
pub const RATE_TOLERANCE: f64 = 0.02;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    /// Fraction of points to remove, in `(0, 1)`.
    pub damage_rate: f64,
    pub seed: u64,
}

impl DamageSpec {
    pub fn new(damage_rate: f64, seed: u64) -> Result<Self> {
        let spec = Self { damage_rate, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damage_rate > 0.0 && self.damage_rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "damage rate must lie in (0, 1), got {}",
                self.damage_rate
            )));
        }
        Ok(())
    }

    /// The rate as a percentage number, e.g. 20 for 0.2.
    pub fn rate_percent(&self) -> f64 {
        (self.damage_rate * 100.0 * 1e9).round() / 1e9
    }

    /// `(floor(0.7 * pct), ceil(0.95 * pct))`, with the lower end at least 1.
    pub fn region_count_bounds(&self) -> (usize, usize) {
        let pct = self.rate_percent();
        let low = ((0.7 * pct + 1e-9).floor() as usize).max(1);
        let high = ((0.95 * pct - 1e-9).ceil() as usize).max(low);
        (low, high)
    }

    /// Number of points to remove from a cloud of `n` points.
    pub fn removal_budget(&self, n: usize) -> usize {
        (self.damage_rate * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageRegion {
    pub center: Point3,
    /// Distance from the center to the farthest removed point.
    pub radius: f64,
    /// Removed indices into the original cloud, ascending.
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageRecord {
    pub damaged: PointCloud,
    /// Ascending and distinct.
    pub removed_indices: Vec<usize>,
    pub region_centers: Vec<Point3>,
    pub regions: Vec<DamageRegion>,
}

impl DamageRecord {
    pub fn removed_fraction(&self, original_len: usize) -> f64 {
        self.removed_indices.len() as f64 / original_len as f64
    }
}

/// Region sizes from a flat Dirichlet split of `budget`, each at least 1.
fn region_targets(rng: &mut ChaCha8Rng, h: usize, budget: usize) -> Vec<usize> {
    let draws: Vec<f64> = (0..h).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let spare = budget - h;
    let mut targets: Vec<usize> = draws
        .iter()
        .map(|w| 1 + (w / total * spare as f64).floor() as usize)
        .collect();
    let mut short = budget - targets.iter().sum::<usize>();
    let mut k = 0;
    while short > 0 {
        targets[k % h] += 1;
        short -= 1;
        k += 1;
    }
    targets
}

/// Carves `round(DR * |P|)` points out of `cloud` as `h` holes grown
/// around random seed points, one point per region per round.
pub fn damage(cloud: &PointCloud, spec: &DamageSpec) -> Result<DamageRecord> {
    spec.validate()?;
    let n = cloud.len();
    let budget = spec.removal_budget(n);
    let (low, high) = spec.region_count_bounds();
    if budget < low {
        return Err(Error::InfeasibleDamage(format!(
            "{budget} removable points cannot form {low} regions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = rng.random_range(low..=high.min(budget));
    let seeds: Vec<usize> = sample(&mut rng, n, h).into_vec();
    let targets = region_targets(&mut rng, h, budget);

    let pts = cloud.points();
    let orders: Vec<Vec<usize>> = seeds
        .par_iter()
        .map(|&s| {
            let c = pts[s];
            let mut order: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - c).norm_squared(), i)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.into_iter().map(|(_, i)| i).collect()
        })
        .collect();

    let mut taken = vec![false; n];
    let mut cursor = vec![0usize; h];
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); h];
    let mut removed = 0;
    while removed < budget {
        for j in 0..h {
            if owned[j].len() >= targets[j] {
                continue;
            }
            while taken[orders[j][cursor[j]]] {
                cursor[j] += 1;
            }
            let i = orders[j][cursor[j]];
            taken[i] = true;
            owned[j].push(i);
            removed += 1;
        }
    }

    let regions: Vec<DamageRegion> = seeds
        .iter()
        .zip(owned)
        .map(|(&s, mut idx)| {
            let center = pts[s];
            let radius = idx.iter().map(|&i| (pts[i] - center).norm()).fold(0.0, f64::max);
            idx.sort_unstable();
            DamageRegion {
                center,
                radius,
                removed: idx,
            }
        })
        .collect();
    let removed_indices: Vec<usize> = (0..n).filter(|&i| taken[i]).collect();
    let kept: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    Ok(DamageRecord {
        damaged: cloud.select(&kept),
        removed_indices,
        region_centers: regions.iter().map(|r| r.center).collect(),
        regions,
    })
}

/// Seed for one (file, rate) pair derived from the master seed.
pub fn derive_seed(master: u64, file_name: &str, rate: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(file_name.as_bytes());
    h.update(rate.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub rate: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub original_count: usize,
    pub removed_count: usize,
    pub regions: Vec<DamageRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub input: PathBuf,
    pub rate: f64,
    pub output: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    /// SHA-256 of the damaged file, hex encoded.
    pub checksum: Option<String>,
    pub error: Option<String>,
}

fn output_stem(input: &Path, rate: f64) -> String {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
    format!("{stem}_dr{:02}", (rate * 100.0).round() as u32)
}

fn damage_one(input: &Path, dir_out: &Path, rate: f64, master: u64) -> ManifestEntry {
    let name = input.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let seed = derive_seed(master, name, rate);
    let mut entry = ManifestEntry {
        input: input.to_path_buf(),
        rate,
        output: None,
        sidecar: None,
        checksum: None,
        error: None,
    };
    let run = || -> Result<(PathBuf, PathBuf, String)> {
        let file = load_cloud(input)?;
        let spec = DamageSpec::new(rate, seed)?;
        let record = damage(&file.cloud, &spec)?;
        let stem = output_stem(input, rate);
        let output = dir_out.join(format!("{stem}.{}", file.format.extension()));
        let bytes = serialize_cloud(&record.damaged, file.format);
        fs::write(&output, &bytes).map_err(|e| Error::io(&output, e))?;
        let sidecar = dir_out.join(format!("{stem}.json"));
        let meta = Sidecar {
            rate,
            seed,
            tolerance: RATE_TOLERANCE,
            original_count: file.cloud.len(),
            removed_count: record.removed_indices.len(),
            regions: record.regions,
        };
        fs::write(&sidecar, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&sidecar, e))?;
        Ok((output, sidecar, sha256_hex(&bytes)))
    };
    match run() {
        Ok((output, sidecar, checksum)) => {
            entry.output = Some(output);
            entry.sidecar = Some(sidecar);
            entry.checksum = Some(checksum);
        }
        Err(e) => {
            log::warn!("skipping {} at rate {rate}: {e}", input.display());
            entry.error = Some(e.to_string());
        }
    }
    entry
}

/// Damages every cloud file in `dir_in` at every rate, writing clouds and
/// JSON sidecars to `dir_out` plus a manifest. Files that fail are recorded
/// in the manifest with their error. Returns the manifest path.
pub fn damage_batch(dir_in: &Path, dir_out: &Path, rates: &[f64], seed: u64) -> Result<PathBuf> {
    for &r in rates {
        DamageSpec::new(r, 0)?;
    }
    let inputs = list_cloud_files(dir_in)?;
    fs::create_dir_all(dir_out).map_err(|e| Error::io(dir_out, e))?;
    let jobs: Vec<(&PathBuf, f64)> = inputs.iter().flat_map(|p| rates.iter().map(move |&r| (p, r))).collect();
    let entries: Vec<ManifestEntry> = jobs.par_iter().map(|(p, r)| damage_one(p, dir_out, *r, seed)).collect();
    let manifest = dir_out.join(MANIFEST_NAME);
    fs::write(&manifest, serde_json::to_vec_pretty(&entries)?).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
