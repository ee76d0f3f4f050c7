use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Box3D, DatasetError, LabeledFrame};
use crate::palette::{PaletteEntry, SemanticPalette};
use crate::sensor::{SensorPose, SensorSpec};

pub const FORMAT_NAME: &str = "dtsim-openpcdet";
pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const SUBDIRS: [&str; 4] = ["points", "labels", "semantic", "instance"];

/// What the manifest records about the emitting sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sensor_name: String,
    pub spec: SensorSpec,
    /// world pose; points and boxes are stored relative to it
    pub pose: SensorPose,
    pub palette: SemanticPalette,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    /// CRC32 (IEEE) of the file contents, lowercase hex
    pub crc32: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    pub index: u64,
    pub time: f64,
    pub num_points: usize,
    pub num_boxes: usize,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub sensor_name: String,
    pub sensor_spec: SensorSpec,
    pub sensor_pose: SensorPose,
    pub palette: Vec<PaletteEntry>,
    pub frames: Vec<FrameEntry>,
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| DatasetError::io(path, e))
}

fn frame_id(index: u64) -> String {
    format!("{index:06}")
}

fn encode_points(points: &[[f32; 4]]) -> Vec<u8> {
    points.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
}

fn encode_ids(ids: &[u32]) -> Vec<u8> {
    ids.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn encode_labels(boxes: &[Box3D]) -> Vec<u8> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {}\n",
            b.class, b.center[0], b.center[1], b.center[2], b.dims[0], b.dims[1], b.dims[2], b.yaw, b.track_id, b.num_points
        ));
    }
    out.into_bytes()
}

fn crc_hex(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

/// Writes every frame, then the manifest. Output bytes depend only on the input.
pub fn write_dataset(frames: &[LabeledFrame], out_dir: &Path, meta: &DatasetMeta) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    if !frames.is_empty() {
        for sub in SUBDIRS {
            let d = out_dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| DatasetError::io(&d, e))?;
        }
    }
    let entries: Vec<FrameEntry> = frames
        .par_iter()
        .map(|f| {
            let id = frame_id(f.frame);
            let files = [
                (format!("points/{id}.bin"), encode_points(&f.points)),
                (format!("labels/{id}.txt"), encode_labels(&f.boxes)),
                (format!("semantic/{id}.bin"), encode_ids(&f.semantic)),
                (format!("instance/{id}.bin"), encode_ids(&f.instance)),
            ];
            let mut listed = Vec::with_capacity(files.len());
            for (rel, bytes) in files {
                atomic_write(&out_dir.join(&rel), &bytes)?;
                listed.push(FileEntry { path: rel, bytes: bytes.len() as u64, crc32: crc_hex(&bytes) });
            }
            Ok(FrameEntry { id, index: f.frame, time: f.time, num_points: f.points.len(), num_boxes: f.boxes.len(), files: listed })
        })
        .collect::<Result<_, DatasetError>>()?;

    let manifest = Manifest {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        sensor_name: meta.sensor_name.clone(),
        sensor_spec: meta.spec.clone(),
        sensor_pose: meta.pose,
        palette: meta.palette.entries().to_vec(),
        frames: entries,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    atomic_write(&out_dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(DatasetError::IncompleteDataset(path)),
        Err(e) => return Err(DatasetError::io(path, e)),
    };
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| DatasetError::Malformed { path: path.clone(), message: e.to_string() })?;
    if manifest.format != FORMAT_NAME || manifest.version != FORMAT_VERSION {
        return Err(DatasetError::Malformed {
            path,
            message: format!("unsupported format {} v{}", manifest.format, manifest.version),
        });
    }
    SemanticPalette::from_entries(manifest.palette.clone())
        .map_err(|message| DatasetError::Malformed { path: dir.join(MANIFEST), message })?;
    Ok(manifest)
}

fn read_checked(dir: &Path, entry: &FileEntry) -> Result<Vec<u8>, DatasetError> {
    let path = dir.join(&entry.path);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(DatasetError::IncompleteDataset(path)),
        Err(e) => return Err(DatasetError::io(path, e)),
    };
    if bytes.len() as u64 != entry.bytes || crc_hex(&bytes) != entry.crc32 {
        return Err(DatasetError::CorruptDataset(path));
    }
    Ok(bytes)
}

fn malformed(path: PathBuf, message: impl Into<String>) -> DatasetError {
    DatasetError::Malformed { path, message: message.into() }
}

fn decode_u32s(bytes: &[u8], path: &Path) -> Result<Vec<u32>, DatasetError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(malformed(path.into(), "length is not a multiple of 4"));
    }
    Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn decode_points(bytes: &[u8], path: &Path) -> Result<Vec<[f32; 4]>, DatasetError> {
    if !bytes.len().is_multiple_of(16) {
        return Err(malformed(path.into(), "length is not a multiple of 16"));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]);
            [f(0), f(4), f(8), f(12)]
        })
        .collect())
}

fn decode_labels(bytes: &[u8], path: &Path) -> Result<Vec<Box3D>, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|_| malformed(path.into(), "not UTF-8"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| malformed(path.into(), format!("line {}: {what}", i + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 10 {
                return Err(bad("expected 10 fields"));
            }
            let num = |s: &str| s.parse::<f32>().map_err(|_| bad("bad number"));
            let int = |s: &str| s.parse::<u32>().map_err(|_| bad("bad integer"));
            Ok(Box3D {
                class: f[0].to_string(),
                center: [num(f[1])?, num(f[2])?, num(f[3])?],
                dims: [num(f[4])?, num(f[5])?, num(f[6])?],
                yaw: num(f[7])?,
                track_id: int(f[8])?,
                num_points: int(f[9])?,
            })
        })
        .collect()
}

/// Inverse of [`write_dataset`]. Every file is checked against the manifest
/// before it is decoded.
pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<LabeledFrame>), DatasetError> {
    let manifest = read_manifest(dir)?;
    let frames = manifest
        .frames
        .par_iter()
        .map(|entry| {
            let find = |prefix: &str| {
                entry
                    .files
                    .iter()
                    .find(|f| f.path.starts_with(prefix))
                    .ok_or_else(|| DatasetError::IncompleteDataset(dir.join(format!("{prefix}/{}", entry.id))))
            };
            let (pe, le, se, ie) = (find("points/")?, find("labels/")?, find("semantic/")?, find("instance/")?);
            let points = decode_points(&read_checked(dir, pe)?, &dir.join(&pe.path))?;
            let boxes = decode_labels(&read_checked(dir, le)?, &dir.join(&le.path))?;
            let semantic = decode_u32s(&read_checked(dir, se)?, &dir.join(&se.path))?;
            let instance = decode_u32s(&read_checked(dir, ie)?, &dir.join(&ie.path))?;
            if semantic.len() != points.len() || instance.len() != points.len() {
                return Err(malformed(dir.join(&pe.path), "point, semantic and instance counts differ"));
            }
            Ok(LabeledFrame { frame: entry.index, time: entry.time, points, semantic, instance, boxes })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            sensor_name: "top".into(),
            spec: crate::sensor::tests::spec(4, 1.0, [-10.0, 10.0]),
            pose: SensorPose::default(),
            palette: SemanticPalette::default(),
        }
    }

    fn frame() -> LabeledFrame {
        LabeledFrame {
            frame: 0,
            time: 0.1,
            points: vec![[1.0, 2.0, 3.0, 0.5], [-1.5, 0.25, 0.0, 1.0], [1e-7, -0.0, 7.3, 0.0]],
            semantic: vec![1, 2, 0],
            instance: vec![0, 4, 0],
            boxes: vec![Box3D {
                class: "car".into(),
                center: [1.1, -2.2, 0.75],
                dims: [4.5, 1.9, 1.5],
                yaw: 0.3,
                track_id: 4,
                num_points: 1,
            }],
        }
    }

    #[test]
    fn three_points_make_48_bytes() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&[frame()], dir.path(), &meta()).unwrap();
        assert_eq!(fs::metadata(dir.path().join("points/000000.bin")).unwrap().len(), 48);
        let labels = fs::read_to_string(dir.path().join("labels/000000.txt")).unwrap();
        assert_eq!(labels, "car 1.1 -2.2 0.75 4.5 1.9 1.5 0.3 4 1\n");
    }

    #[test]
    fn empty_frame_has_boxes_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = LabeledFrame::empty(3, 0.3);
        f.boxes = frame().boxes;
        f.boxes[0].num_points = 0;
        write_dataset(&[f.clone()], dir.path(), &meta()).unwrap();
        assert_eq!(fs::metadata(dir.path().join("points/000003.bin")).unwrap().len(), 0);
        let (_, back) = read_dataset(dir.path()).unwrap();
        assert!(back[0].bit_eq(&f));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&[frame()], dir.path(), &meta()).unwrap();
        let (manifest, back) = read_dataset(dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), 1);
        assert!(back[0].bit_eq(&frame()));
    }

    #[test]
    fn corruption_and_missing_files_detected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&[frame()], dir.path(), &meta()).unwrap();
        fs::write(dir.path().join("semantic/000000.bin"), [9u8; 12]).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::CorruptDataset(_))));
        fs::remove_file(dir.path().join("labels/000000.txt")).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::IncompleteDataset(_)) | Err(DatasetError::CorruptDataset(_))));
        fs::remove_file(dir.path().join("manifest.json")).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::IncompleteDataset(p)) if p.ends_with("manifest.json")));
    }

    #[test]
    fn output_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_dataset(&[frame()], a.path(), &meta()).unwrap();
        write_dataset(&[frame()], b.path(), &meta()).unwrap();
        for rel in ["manifest.json", "points/000000.bin", "labels/000000.txt", "semantic/000000.bin", "instance/000000.bin"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }
}
