//! Write a small fixture set: clouds, ground-truth plane files and a
//! manifest. Pass a directory to keep the output.

use std::path::PathBuf;

use symcomplete::fixtures::{generate, write_manifest, FixtureEntry, ShapeKind, ShapeSpec};
use symcomplete::{save_cloud, CloudFormat};

pub fn write_set(dir: &std::path::Path, per_kind: u64) -> symcomplete::Result<Vec<FixtureEntry>> {
    std::fs::create_dir_all(dir.join("clouds")).map_err(|e| symcomplete::Error::Io { path: dir.into(), source: e })?;
    std::fs::create_dir_all(dir.join("planes")).map_err(|e| symcomplete::Error::Io { path: dir.into(), source: e })?;
    let mut entries = Vec::new();
    for kind in ShapeKind::ALL {
        for seed in 0..per_kind {
            let spec = ShapeSpec::new(kind, 2048, seed).with_random_pose();
            let fixture = generate(&spec)?;
            let name = format!("{kind:?}_{seed}").to_lowercase();
            save_cloud(&fixture.cloud, dir.join("clouds").join(format!("{name}.ply")), CloudFormat::PlyBinaryLe)?;
            if kind.is_symmetric() {
                let gt = serde_json::to_string_pretty(&fixture.ground_truth()?)?;
                let path = dir.join("planes").join(format!("{name}.json"));
                std::fs::write(&path, gt).map_err(|e| symcomplete::Error::Io { path, source: e })?;
            }
            entries.push(FixtureEntry::new(name, spec));
        }
    }
    write_manifest(dir.join("fixtures.json"), &entries)?;
    Ok(entries)
}

pub fn run_example() -> symcomplete::Result<()> {
    let keep = std::env::args().nth(1).map(PathBuf::from);
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = keep.clone().unwrap_or_else(|| tmp.path().to_path_buf());
    let entries = write_set(&dir, 2)?;
    for e in &entries {
        println!("{:14} {:?} with {} planes", e.name, e.spec.kind, e.planes.len());
    }
    println!("wrote {} fixtures to {}", entries.len(), dir.display());
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
