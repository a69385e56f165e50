//! Write a cloud as binary PLY, ASCII PLY and XYZ, then read each back.

use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::{estimate_normals, load_cloud, save_cloud, CloudFormat, NormalParams};

pub fn run_example() -> symcomplete::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let cloud = generate(&ShapeSpec::new(ShapeKind::Box, 2000, 1))?.cloud;
    let cloud = estimate_normals(&cloud, &NormalParams::default())?.cloud;

    for (name, format) in [
        ("box.ply", CloudFormat::PlyBinaryLe),
        ("box_ascii.ply", CloudFormat::PlyAscii),
        ("box.xyz", CloudFormat::Xyz),
    ] {
        let path = dir.path().join(name);
        save_cloud(&cloud, &path, format)?;
        let back = load_cloud(&path)?;
        let worst = cloud
            .points()
            .iter()
            .zip(back.cloud.points())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!(
            "{name:14} {:?}: {} points, normals {}, max deviation {worst:.2e}",
            back.format,
            back.cloud.len(),
            back.had_normals
        );
        assert_eq!(back.cloud.len(), cloud.len());
        if format == CloudFormat::PlyBinaryLe {
            assert_eq!(back.cloud, cloud);
        }
    }
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
