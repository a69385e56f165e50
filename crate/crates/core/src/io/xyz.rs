use std::fmt::Write as _;
use std::path::Path;

use super::{assemble, CloudFile, CloudFormat};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vec3};

/// Whitespace-separated rows of 3 (`x y z`) or 6 (`x y z nx ny nz`) columns.
/// Lines starting with `#` and blank lines are ignored.
pub fn parse_xyz(bytes: &[u8], path: &Path) -> Result<CloudFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("byte {}", e.valid_up_to()),
        message: "file is not valid UTF-8 text".into(),
    })?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut vals = [0.0f64; 6];
        let mut n = 0;
        for tok in line.split_whitespace() {
            if n == 6 {
                return Err(err(line_no, "more than 6 columns".into()));
            }
            vals[n] = tok
                .parse()
                .map_err(|_| err(line_no, format!("cannot parse number '{tok}'")))?;
            n += 1;
        }
        if n != 3 && n != 6 {
            return Err(err(line_no, format!("expected 3 or 6 columns, found {n}")));
        }
        match columns {
            None => columns = Some(n),
            Some(c) if c != n => {
                return Err(err(line_no, format!("column count changed from {c} to {n}")))
            }
            _ => {}
        }
        if !vals[..3].iter().all(|v| v.is_finite()) {
            return Err(err(line_no, "non-finite coordinate".into()));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2]));
        if n == 6 {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    let had = columns == Some(6);
    let cloud = assemble(points, had.then_some(normals), path)?;
    Ok(CloudFile {
        format: CloudFormat::Xyz,
        had_normals: had && cloud.has_normals(),
        cloud,
    })
}

pub fn write_xyz(cloud: &PointCloud) -> Vec<u8> {
    let mut out = String::with_capacity(cloud.len() * 40);
    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(ns) = normals {
            let _ = write!(out, " {} {} {}", ns[i].x, ns[i].y, ns[i].z);
        }
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_normals() {
        let f = parse_xyz(b"# header\n\n1 2 3 0 0 1\n4 5 6 1 0 0\n", Path::new("a.xyz")).unwrap();
        assert!(f.had_normals);
        assert_eq!(f.cloud.len(), 2);
    }

    #[test]
    fn bad_rows() {
        let p = Path::new("a.xyz");
        assert!(parse_xyz(b"1 2\n", p).unwrap_err().to_string().contains("line 1"));
        assert!(parse_xyz(b"1 2 3\n1 2 3 0 0 1\n", p).unwrap_err().to_string().contains("line 2"));
        assert!(parse_xyz(b"1 2 x\n", p).is_err());
        assert!(parse_xyz(b"1 2 inf\n", p).is_err());
    }
}
