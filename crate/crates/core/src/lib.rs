//! Training-free completion of mirror-symmetric point clouds.
//!
//! The pipeline estimates normals, proposes symmetry planes from principal
//! directions of the normals and of convex hull edges, picks the plane with
//! the lowest balanced distance, refines it by registering the cloud to its
//! own reflection, and fills holes with reflected points that land in
//! under-populated regions. A scaled Chamfer check discards completions that
//! stray too far from the input.
//!
//! ```no_run
//! use symcomplete::{complete, load_cloud, CompletionConfig};
//!
//! let input = load_cloud("scan.ply")?.cloud;
//! let result = complete(&input, &CompletionConfig::default())?;
//! println!("added {} points", result.added_points.len());
//! # Ok::<(), symcomplete::Error>(())
//! ```

pub mod augment;
pub mod cli;
pub mod completion;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod normals;
pub mod registration;
pub mod spatial;
pub mod symmetry;

pub use augment::{damage, damage_batch, DamageRecord, DamageSpec};
pub use completion::{complete, CompletionConfig, CompletionResult};
pub use error::{Error, Result};
pub use geometry::{reflect, Plane, Point3, PointCloud, RigidTransform, Vec3};
pub use io::{load_cloud, save_cloud, CloudFormat};
pub use metrics::{balanced_distance, chamfer_distance, BalanceConfig};
pub use normals::{estimate_normals, NormalParams, OrientationReference};
pub use registration::{refine_symmetry_plane, RegistrationParams};
pub use symmetry::{detect_plane, generate_candidates};
