//! On-disk formats.
//!
//! Trajectories, priors and velocity fields share one container: a magic
//! line, a TOML manifest, a `---` separator line and a little-endian `f32`
//! payload.

mod netpbm;
mod text;

pub use netpbm::{
    frame_file_name, load_depth_dir, load_mask_dir, parse_pbm, parse_pgm_depth, parse_ppm, read_frame_dir, read_ppm,
    write_frame_dir, write_pbm, write_pgm_depth, write_ppm,
};
pub use text::{
    format_cameras, format_indices, format_loss_csv, format_metrics_csv, parse_cameras, parse_indices,
    parse_label_seeds, parse_labels, parse_tracks_csv, read_cameras, read_indices, read_label_seeds, read_labels,
    read_tracks_csv,
};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::geometry::{nearest_rotation, Mat3, RigidTransform, Vec3};
use crate::prior::SpatPrior;
use crate::trajectory::TrajectorySet;

pub const FORMAT_VERSION: u32 = 1;
const SEPARATOR: &[u8] = b"\n---\n";

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_container(magic: &str, manifest: &impl Serialize, payload: impl IntoIterator<Item = f64>) -> Result<Vec<u8>> {
    let text = toml::to_string(manifest).map_err(|e| Error::InvalidParameter(format!("manifest: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(text.trim_end().as_bytes());
    out.extend_from_slice(SEPARATOR);
    for x in payload {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

fn read_container<M: DeserializeOwned>(magic: &str, bytes: &[u8]) -> Result<(M, Vec<f64>)> {
    let head = magic.len() + 1;
    if bytes.len() < head || &bytes[..magic.len()] != magic.as_bytes() || bytes[magic.len()] != b'\n' {
        return Err(Error::parse("byte offset 0", format!("missing {magic} magic line")));
    }
    let sep = bytes[head - 1..]
        .windows(SEPARATOR.len())
        .position(|w| w == SEPARATOR)
        .map(|p| p + head - 1)
        .ok_or_else(|| Error::parse(format!("byte offset {head}"), "manifest separator '---' not found"))?;
    let text = std::str::from_utf8(&bytes[head..sep]).map_err(|e| {
        Error::parse(
            format!("byte offset {}", head + e.valid_up_to()),
            "manifest is not UTF-8",
        )
    })?;
    let manifest = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 2).unwrap_or(2);
        Error::parse(format!("line {line}"), e.message().to_string())
    })?;
    let start = sep + SEPARATOR.len();
    let payload = &bytes[start..];
    if !payload.len().is_multiple_of(4) {
        return Err(Error::parse(
            format!("byte offset {}", start + payload.len() / 4 * 4),
            "payload length is not a multiple of 4",
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok((manifest, values))
}

fn expect_len(values: &[f64], want: usize, what: &str) -> Result<()> {
    if values.len() != want {
        return Err(Error::parse(
            "payload",
            format!("{what}: expected {want} floats, found {}", values.len()),
        ));
    }
    Ok(())
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::parse("line 2", format!("unsupported version {version}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectorySource {
    /// Kept after foreground masking.
    Masked,
    /// Every input trajectory.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryManifest {
    version: u32,
    #[serde(rename = "K")]
    trajectories: usize,
    #[serde(rename = "T")]
    frames: usize,
    component_labels: Vec<usize>,
    scale: f64,
    source: TrajectorySource,
}

/// A trajectory set with the normalization factor applied to it.
#[derive(Debug, Clone)]
pub struct TrajectoryFile {
    pub trajectories: TrajectorySet,
    pub scale: f64,
    pub source: TrajectorySource,
}

pub fn encode_trajectories(file: &TrajectoryFile) -> Result<Vec<u8>> {
    let t = &file.trajectories;
    let manifest = TrajectoryManifest {
        version: FORMAT_VERSION,
        trajectories: t.len(),
        frames: t.frames(),
        component_labels: t.labels().to_vec(),
        scale: file.scale,
        source: file.source,
    };
    write_container("MMTJ", &manifest, t.positions().iter().flat_map(|p| [p.x, p.y, p.z]))
}

pub fn decode_trajectories(bytes: &[u8]) -> Result<TrajectoryFile> {
    let (m, values): (TrajectoryManifest, _) = read_container("MMTJ", bytes)?;
    check_version(m.version)?;
    expect_len(&values, m.trajectories * m.frames * 3, "trajectories")?;
    if m.component_labels.len() != m.trajectories {
        return Err(Error::parse(
            "manifest",
            format!(
                "{} labels for {} trajectories",
                m.component_labels.len(),
                m.trajectories
            ),
        ));
    }
    let positions = values.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    Ok(TrajectoryFile {
        trajectories: TrajectorySet::new(positions, m.component_labels, m.frames)?,
        scale: m.scale,
        source: m.source,
    })
}

pub fn save_trajectories(path: impl AsRef<Path>, file: &TrajectoryFile) -> Result<()> {
    write_file(path.as_ref(), &encode_trajectories(file)?)
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryFile> {
    decode_trajectories(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PriorManifest {
    version: u32,
    #[serde(rename = "T")]
    frames: usize,
    components: usize,
    anchors: Vec<[f64; 3]>,
    scale: f64,
}

/// A prior with the scene normalization factor it was extracted under.
#[derive(Debug, Clone)]
pub struct PriorFile {
    pub prior: SpatPrior,
    pub scale: f64,
}

pub fn encode_prior(file: &PriorFile) -> Result<Vec<u8>> {
    let p = &file.prior;
    let manifest = PriorManifest {
        version: FORMAT_VERSION,
        frames: p.frames(),
        components: p.component_count(),
        anchors: p.anchors().iter().map(|a| [a.x, a.y, a.z]).collect(),
        scale: file.scale,
    };
    let mut payload = Vec::with_capacity((p.frames() - 1) * p.component_count() * 12);
    for t in 0..p.frames() - 1 {
        for c in 0..p.component_count() {
            let s = &p.steps(c)[t];
            for r in 0..3 {
                for col in 0..3 {
                    payload.push(s.rotation[(r, col)]);
                }
            }
            payload.extend_from_slice(s.translation.as_slice());
        }
    }
    write_container("MMSP", &manifest, payload)
}

/// Rotations are projected back onto SO(3) after the round trip through `f32`.
pub fn decode_prior(bytes: &[u8]) -> Result<PriorFile> {
    let (m, values): (PriorManifest, _) = read_container("MMSP", bytes)?;
    check_version(m.version)?;
    if m.frames < 2 || m.anchors.len() != m.components {
        return Err(Error::parse(
            "manifest",
            format!(
                "T = {}, {} anchors for {} components",
                m.frames,
                m.anchors.len(),
                m.components
            ),
        ));
    }
    expect_len(&values, (m.frames - 1) * m.components * 12, "prior")?;
    let mut components = vec![Vec::with_capacity(m.frames - 1); m.components];
    for (i, chunk) in values.chunks_exact(12).enumerate() {
        let rotation = nearest_rotation(&Mat3::from_row_slice(&chunk[..9]));
        let translation = Vec3::new(chunk[9], chunk[10], chunk[11]);
        components[i % m.components].push(RigidTransform::new(rotation, translation));
    }
    let anchors = m.anchors.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect();
    Ok(PriorFile {
        prior: SpatPrior::new(components, anchors, m.frames)?,
        scale: m.scale,
    })
}

pub fn save_prior(path: impl AsRef<Path>, file: &PriorFile) -> Result<()> {
    write_file(path.as_ref(), &encode_prior(file)?)
}

pub fn load_prior(path: impl AsRef<Path>) -> Result<PriorFile> {
    decode_prior(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FieldManifest {
    version: u32,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "T")]
    frames: usize,
}

pub fn encode_field(field: &VelocityField) -> Result<Vec<u8>> {
    let manifest = FieldManifest {
        version: FORMAT_VERSION,
        points: field.points(),
        frames: field.frames(),
    };
    write_container("MMVF", &manifest, field.data().iter().flat_map(|v| [v.x, v.y, v.z]))
}

pub fn decode_field(bytes: &[u8]) -> Result<VelocityField> {
    let (m, values): (FieldManifest, _) = read_container("MMVF", bytes)?;
    check_version(m.version)?;
    if m.frames < 1 {
        return Err(Error::parse("manifest", "T must be >= 1"));
    }
    expect_len(&values, (m.frames - 1) * m.points * 3, "velocity field")?;
    let data = values.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    VelocityField::new(m.points, m.frames - 1, data)
}

pub fn save_field(path: impl AsRef<Path>, field: &VelocityField) -> Result<()> {
    write_file(path.as_ref(), &encode_field(field)?)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<VelocityField> {
    decode_field(&read_file(path.as_ref())?)
}
