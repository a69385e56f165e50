//! Damage a symmetric shape, complete it, and compare both against the
//! undamaged cloud.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::{chamfer_distance, complete, damage, CompletionConfig, DamageSpec};

pub fn run_example() -> symcomplete::Result<()> {
    let fixture = generate(&ShapeSpec::new(ShapeKind::Box, 6000, 5).with_random_pose())?;
    let record = damage(&fixture.cloud, &DamageSpec::new(0.15, 11)?)?;
    let result = complete(&record.damaged, &CompletionConfig::default())?;

    let before = chamfer_distance(&record.damaged, &fixture.cloud)?;
    let after = chamfer_distance(&result.completed, &fixture.cloud)?;
    println!(
        "removed {} points in {} regions, added back {}",
        record.removed_indices.len(),
        record.regions.len(),
        result.added_points.len()
    );
    println!("CD x 1e4: damaged {:.2}, completed {:.2}", before * 1e4, after * 1e4);
    println!(
        "plane source {:?}, scaled CD {:.3}, skipped {}",
        result.diagnostics.plane_source,
        result.diagnostics.scaled_chamfer.unwrap_or(f64::NAN),
        result.skipped
    );
    assert!(after < before);
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
