//! Point cloud file formats: PLY (ASCII and binary little-endian) and plain
//! XYZ text.
//!
//! Only the `vertex` element of a PLY file is read; other elements (faces,
//! edges, ...) are parsed past and dropped with a warning. Binary files are
//! written with `double` properties, so a binary round trip is bit-exact.

mod ply;
mod xyz;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vec3};

pub use ply::{parse_ply, write_ply};
pub use xyz::{parse_xyz, write_xyz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    Xyz,
}

impl CloudFormat {
    /// Format implied by a file extension: `.ply` maps to binary PLY,
    /// `.xyz`/`.txt`/`.pts` to XYZ.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(CloudFormat::PlyBinaryLe),
            "xyz" | "txt" | "pts" => Some(CloudFormat::Xyz),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => "ply",
            CloudFormat::Xyz => "xyz",
        }
    }
}

/// A loaded cloud together with the format it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudFile {
    pub format: CloudFormat,
    pub cloud: PointCloud,
    pub had_normals: bool,
}

fn is_ply(bytes: &[u8]) -> bool {
    bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n")
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<CloudFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&bytes, path)
}

/// Parses an in-memory file. `path` is used for format sniffing by extension
/// and in error messages.
pub fn parse_cloud(bytes: &[u8], path: &Path) -> Result<CloudFile> {
    if is_ply(bytes) {
        return parse_ply(bytes, path);
    }
    match CloudFormat::from_path(path) {
        Some(CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe) => Err(Error::Parse {
            path: path.to_path_buf(),
            location: "byte 0".into(),
            message: "missing 'ply' magic line".into(),
        }),
        Some(CloudFormat::Xyz) => parse_xyz(bytes, path),
        None => {
            if bytes.starts_with(b"ply") {
                parse_ply(bytes, path)
            } else {
                parse_xyz(bytes, path)
            }
        }
    }
}

/// Files in `dir` with a recognized cloud extension, sorted by path.
pub fn list_cloud_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && CloudFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = serialize_cloud(cloud, format);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn serialize_cloud(cloud: &PointCloud, format: CloudFormat) -> Vec<u8> {
    match format {
        CloudFormat::PlyAscii => write_ply(cloud, false),
        CloudFormat::PlyBinaryLe => write_ply(cloud, true),
        CloudFormat::Xyz => write_xyz(cloud),
    }
}

/// Builds a cloud from parsed columns. Normals within 1e-9 of unit length are
/// kept verbatim, others are renormalized; if any normal is zero or not finite
/// the normals are dropped.
pub(crate) fn assemble(points: Vec<Point3>, normals: Option<Vec<Vec3>>, path: &Path) -> Result<PointCloud> {
    let normals = normals.and_then(|ns| {
        let mut out = Vec::with_capacity(ns.len());
        for n in ns {
            let norm = n.norm();
            if !norm.is_finite() || norm < 1e-12 {
                log::warn!(
                    "{}: degenerate normal in file; normals dropped",
                    path.display()
                );
                return None;
            }
            out.push(if (norm - 1.0).abs() <= 1e-9 { n } else { n / norm });
        }
        Some(out)
    });
    match normals {
        Some(ns) => PointCloud::with_normals(points, ns),
        None => PointCloud::new(points),
    }
}
