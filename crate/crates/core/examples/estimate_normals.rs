//! Estimate normals on a posed ellipsoid and orient them toward its center.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::geometry::mass_center;
use symcomplete::{estimate_normals, NormalParams, OrientationReference};

pub fn run_example() -> symcomplete::Result<()> {
    let fixture = generate(&ShapeSpec::new(ShapeKind::Ellipsoid, 4000, 2).with_random_pose())?;
    let params = NormalParams {
        neighbor_count: 20,
        orientation: OrientationReference::Centroid,
    };
    let est = estimate_normals(&fixture.cloud, &params)?;
    let center = mass_center(&est.cloud)?;
    let normals = est.cloud.normals().expect("estimated");
    let inward = est
        .cloud
        .points()
        .iter()
        .zip(normals)
        .filter(|(p, n)| n.dot(&(center - *p)) >= 0.0)
        .count();
    println!(
        "{} normals, {} facing the center, {} low confidence, {} degenerate",
        normals.len(),
        inward,
        est.low_confidence.len(),
        est.degenerate.len()
    );
    assert_eq!(inward, normals.len());
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
