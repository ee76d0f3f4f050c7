//! Ground-truth labels and the on-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json          palette, sensor echo, frame list, CRC32 per file
//! <dir>/points/NNNNNN.bin      f32 LE records (x, y, z, intensity), sensor frame
//! <dir>/labels/NNNNNN.txt      class cx cy cz dx dy dz yaw track_id num_points
//! <dir>/semantic/NNNNNN.bin    u32 LE semantic id per point
//! <dir>/instance/NNNNNN.bin    u32 LE instance id per point (0 = static scene)
//! ```

mod io;
mod labels;

pub use io::{atomic_write, read_dataset, read_manifest, write_dataset, DatasetMeta, FileEntry, FrameEntry, Manifest, FORMAT_NAME, FORMAT_VERSION};
pub use labels::{label_frame, point_in_box, Box3D, LabeledFrame};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("frame time {frame_time} does not match actor snapshot time {actor_time}")]
    SnapshotMismatch { frame_time: f64, actor_time: f64 },
    #[error("actor {track_id} has class '{class}' missing from the catalog or palette")]
    UnknownActorClass { track_id: u32, class: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dataset incomplete: {} is missing", .0.display())]
    IncompleteDataset(PathBuf),
    #[error("dataset corrupt: checksum mismatch for {}", .0.display())]
    CorruptDataset(PathBuf),
    #[error("{}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.into(), source }
    }
}
