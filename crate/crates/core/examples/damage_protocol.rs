//! Carve holes at every damage rate and check counts and fractions; then
//! run the batch writer on a small directory.

use symcomplete::augment::{damage_batch, read_manifest};
use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::{damage, save_cloud, CloudFormat, DamageSpec};

pub fn run_example() -> symcomplete::Result<()> {
    let cloud = generate(&ShapeSpec::new(ShapeKind::Ellipsoid, 4096, 6))?.cloud;
    for pct in (5..=45).step_by(5) {
        let spec = DamageSpec::new(pct as f64 / 100.0, pct)?;
        let record = damage(&cloud, &spec)?;
        let (low, high) = spec.region_count_bounds();
        println!(
            "DR {pct:2}%: removed {:5.2}%, {:2} regions in [{low}, {high}]",
            100.0 * record.removed_fraction(cloud.len()),
            record.regions.len()
        );
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let (input, output) = (dir.path().join("clean"), dir.path().join("damaged"));
    std::fs::create_dir_all(&input).expect("create dir");
    for (i, kind) in [ShapeKind::Box, ShapeKind::Wedge].into_iter().enumerate() {
        let c = generate(&ShapeSpec::new(kind, 2048, i as u64))?.cloud;
        save_cloud(&c, input.join(format!("shape{i}.ply")), CloudFormat::PlyBinaryLe)?;
    }
    let manifest = damage_batch(&input, &output, &[0.1, 0.3], 99)?;
    for entry in read_manifest(&manifest)? {
        println!(
            "{} -> {} ({})",
            entry.input.file_name().unwrap_or_default().to_string_lossy(),
            entry.output.as_ref().and_then(|p| p.file_name()).unwrap_or_default().to_string_lossy(),
            &entry.checksum.unwrap_or_default()[..12]
        );
    }
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
