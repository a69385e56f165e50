//! Balanced distance, Chamfer distance and symmetry accuracy on fixtures.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::metrics::{accuracy, ThresholdRule};
use symcomplete::{balanced_distance, chamfer_distance, reflect, BalanceConfig, Plane, Vec3};

pub fn run_example() -> symcomplete::Result<()> {
    let fixture = generate(&ShapeSpec::new(ShapeKind::Box, 3000, 7).with_random_pose())?;
    let truth = fixture.plane.expect("symmetric fixture");
    let cfg = BalanceConfig::for_cloud(&fixture.cloud)?;

    let mirror = reflect(&fixture.cloud, &truth)?;
    let wrong = Plane::new(truth.anchor, (truth.normal + Vec3::new(0.3, 0.2, 0.1)).normalize())?;
    let bad_mirror = reflect(&fixture.cloud, &wrong)?;
    println!("BD about the true plane  {:.4}", balanced_distance(&fixture.cloud, &mirror, &cfg)?);
    println!("BD about a tilted plane  {:.4}", balanced_distance(&fixture.cloud, &bad_mirror, &cfg)?);
    println!("CD to own mirror x 1e4   {:.4}", chamfer_distance(&fixture.cloud, &mirror)? * 1e4);
    println!("CD to tilted mirror x 1e4 {:.4}", chamfer_distance(&fixture.cloud, &bad_mirror)? * 1e4);

    let gt = fixture.ground_truth()?;
    let acc = accuracy(&[truth, wrong], &[gt.clone(), gt], &ThresholdRule::default())?;
    println!("accuracy over [true, tilted] = {:.0}%", acc * 100.0);
    assert_eq!(acc, 0.5);
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
