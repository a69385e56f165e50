//! Tilt a known symmetry plane and let self-registration correct it.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::geometry::bbox_centroid;
use symcomplete::geometry::bounding_box;
use symcomplete::spatial::average_nn_distance;
use symcomplete::{estimate_normals, refine_symmetry_plane, NormalParams, OrientationReference, Plane, RegistrationParams, RigidTransform};

pub fn run_example() -> symcomplete::Result<()> {
    let fixture = generate(&ShapeSpec::new(ShapeKind::Wedge, 5000, 4).with_random_pose())?;
    let truth = fixture.plane.expect("symmetric fixture");
    let params = NormalParams {
        orientation: OrientationReference::Centroid,
        ..NormalParams::default()
    };
    let cloud = estimate_normals(&fixture.cloud, &params)?.cloud;

    let axis = truth.normal.cross(&symcomplete::Vec3::x()).normalize();
    let tilt = RigidTransform::from_axis_angle(&axis, 8f64.to_radians(), symcomplete::Vec3::zeros());
    let center = bbox_centroid(&bounding_box(&cloud)?);
    let initial = Plane::new(center, tilt.apply_vector(&truth.normal))?;

    let spacing = average_nn_distance(&cloud)?;
    let refined = refine_symmetry_plane(&cloud, &initial, &RegistrationParams::from_spacing(spacing), 7)?;
    let before = initial.normal_angle(&truth).to_degrees();
    let after = refined.plane.normal_angle(&truth).to_degrees();
    println!("initial error {before:.2} deg, refined error {after:.3} deg");
    println!(
        "ICP fitness {:.3}, inlier RMSE {:.2e}",
        refined.registration.fitness, refined.registration.inlier_rmse
    );
    assert!(after < before);
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
