//! The skip-threshold curve: mean Chamfer distance to ground truth when
//! completions with scaled CD above d* are replaced by the damaged input.

use symcomplete::completion::keeps;
use symcomplete::fixtures::{generate, ShapeKind, ShapeSpec};
use symcomplete::{chamfer_distance, complete, damage, CompletionConfig, DamageSpec};

pub fn run_example() -> symcomplete::Result<()> {
    let cfg = CompletionConfig {
        skip_validation: false,
        ..CompletionConfig::default()
    };
    let mut samples = Vec::new();
    for (i, kind) in [ShapeKind::Box, ShapeKind::Ellipsoid, ShapeKind::AsymmetricBlob].into_iter().enumerate() {
        let fixture = generate(&ShapeSpec::new(kind, 3000, 20 + i as u64).with_random_pose())?;
        let record = damage(&fixture.cloud, &DamageSpec::new(0.2, i as u64)?)?;
        let result = complete(&record.damaged, &cfg)?;
        let scaled = result.diagnostics.scaled_chamfer.unwrap_or(f64::INFINITY);
        let d = chamfer_distance(&record.damaged, &fixture.cloud)?;
        let c = chamfer_distance(&result.completed, &fixture.cloud)?;
        println!("{kind:?}: scaled CD {scaled:.2}, CD x 1e4 damaged {:.1} completed {:.1}", d * 1e4, c * 1e4);
        samples.push((scaled, d, c));
    }
    println!("d*    mean CD x 1e4");
    for t in [0.0, 1.0, 2.0, 3.0, 4.0, f64::INFINITY] {
        let mean = samples
            .iter()
            .map(|&(s, d, c)| if keeps(s, t) { c } else { d })
            .sum::<f64>()
            / samples.len() as f64;
        println!("{t:<5} {:.2}", mean * 1e4);
    }
    Ok(())
}

fn main() -> symcomplete::Result<()> {
    run_example()
}
