//! Score the six candidate planes of a posed shape and report the winner.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::{detect_plane, BalanceConfig, NormalParams, OrientationReference};

pub fn run_example() -> symcomplete::Result<()> {
    let fixture = generate(&ShapeSpec::new(ShapeKind::CompositeSymmetric, 6000, 3).with_random_pose())?;
    let truth = fixture.plane.expect("symmetric fixture");
    let balance = BalanceConfig::for_cloud(&fixture.cloud)?;
    let params = NormalParams {
        orientation: OrientationReference::Centroid,
        ..NormalParams::default()
    };
    let detection = detect_plane(&fixture.cloud, &params, &balance)?;

    for c in &detection.scored {
        println!(
            "{:?}  BD {:.4}  angle to truth {:5.1} deg",
            c.source,
            c.score,
            c.plane.normal_angle(&truth).to_degrees()
        );
    }
    let best = detection.best;
    println!("selected {:?} with BD {:.4}", best.source, best.score);
    for note in &detection.diagnostics {
        println!("note: {note}");
    }
    assert!(best.plane.normal_angle(&truth) < 0.2);
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
