//! Line-oriented text formats: camera files, index and label lists, track
//! CSVs and report CSVs.

use std::fmt::Write as _;
use std::path::Path;

use super::read_file;
use crate::error::{Error, Result};
use crate::geometry::{nearest_rotation, CameraModel, Mat3, RigidTransform, Vec3};
use crate::metrics::FrameScore;
use crate::refine::RefineTrace;
use crate::trajectory::Track2DSet;

/// Rotations further than this from orthonormal are rejected rather than
/// projected onto SO(3).
const CAMERA_ORTHO_SLACK: f64 = 1e-3;

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Non-blank lines that are not `#` comments, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn number<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("cannot parse '{token}'")))
}

/// One camera per line: `fx fy cx cy` then a row-major 3x4 camera-to-world matrix.
pub fn parse_cameras(text: &str, width: usize, height: usize) -> Result<Vec<CameraModel>> {
    content_lines(text)
        .map(|(line, l)| {
            let values: Vec<f64> = l
                .split_ascii_whitespace()
                .map(|t| number(t, line))
                .collect::<Result<_>>()?;
            if values.len() != 16 {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("expected 16 numbers, found {}", values.len()),
                ));
            }
            let m = &values[4..];
            let raw = Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
            let rotation = nearest_rotation(&raw);
            if (rotation - raw).amax() > CAMERA_ORTHO_SLACK {
                return Err(Error::InvalidCamera(format!(
                    "line {line}: pose rotation is not orthonormal"
                )));
            }
            let pose = RigidTransform::new(rotation, Vec3::new(m[3], m[7], m[11]));
            CameraModel::new(values[0], values[1], values[2], values[3], pose, width, height)
        })
        .collect()
}

pub fn format_cameras(cameras: &[CameraModel]) -> String {
    let mut out = String::new();
    for c in cameras {
        let (r, t) = (&c.pose.rotation, &c.pose.translation);
        let _ = write!(out, "{} {} {} {}", c.fx, c.fy, c.cx, c.cy);
        for row in 0..3 {
            let _ = write!(out, " {} {} {} {}", r[(row, 0)], r[(row, 1)], r[(row, 2)], t[row]);
        }
        out.push('\n');
    }
    out
}

pub fn read_cameras(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Vec<CameraModel>> {
    parse_cameras(&read_text(path.as_ref())?, width, height)
}

/// One non-negative integer per line.
pub fn parse_indices(text: &str) -> Result<Vec<usize>> {
    content_lines(text).map(|(line, l)| number(l, line)).collect()
}

pub fn format_indices(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

pub fn read_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_indices(&read_text(path.as_ref())?)
}

/// Per-point labels, one per line; the count must equal `points`.
pub fn parse_labels(text: &str, points: usize) -> Result<Vec<usize>> {
    let labels = parse_indices(text)?;
    if labels.len() != points {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {points} points",
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn read_labels(path: impl AsRef<Path>, points: usize) -> Result<Vec<usize>> {
    parse_labels(&read_text(path.as_ref())?, points)
}

/// `point component` pairs, one per line.
pub fn parse_label_seeds(text: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(line, l)| {
            let parts: Vec<&str> = l.split_ascii_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::parse(format!("line {line}"), "expected 'index component'"));
            }
            Ok((number(parts[0], line)?, number(parts[1], line)?))
        })
        .collect()
}

pub fn read_label_seeds(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    parse_label_seeds(&read_text(path.as_ref())?)
}

/// `track,frame,u,v,visible` rows after a header line. Missing samples are
/// treated as invisible.
pub fn parse_tracks_csv(text: &str, width: usize, height: usize) -> Result<Track2DSet> {
    let mut rows = Vec::new();
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "track,frame,u,v,visible" => {}
        Some((line, _)) => {
            return Err(Error::parse(
                format!("line {line}"),
                "expected header 'track,frame,u,v,visible'",
            ))
        }
        None => return Err(Error::parse("line 1", "empty track file")),
    }
    for (line, l) in lines {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(
                format!("line {line}"),
                format!("expected 5 fields, found {}", f.len()),
            ));
        }
        let visible = match f[4] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("bad visibility '{other}'"),
                ))
            }
        };
        rows.push((
            number::<usize>(f[0], line)?,
            number::<usize>(f[1], line)?,
            [number::<f64>(f[2], line)?, number::<f64>(f[3], line)?],
            visible,
        ));
    }
    let tracks = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let frames = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let mut coords = vec![[0.0, 0.0]; tracks * frames];
    let mut visible = vec![false; tracks * frames];
    for (k, t, c, vis) in rows {
        coords[k * frames + t] = c;
        visible[k * frames + t] = vis;
    }
    Track2DSet::new(coords, visible, tracks, frames, width, height)
}

pub fn read_tracks_csv(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Track2DSet> {
    parse_tracks_csv(&read_text(path.as_ref())?, width, height)
}

/// `sweep,t,L_kin,L_topo,L_total`; sweep 0 is the unrefined field, `t` is 1-based.
pub fn format_loss_csv(trace: &RefineTrace) -> String {
    let mut out = String::from("sweep,t,L_kin,L_topo,L_total\n");
    for (sweep, s) in trace.sweeps.iter().enumerate() {
        for (t, l) in s.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{sweep},{},{:e},{:e},{:e}",
                t + 1,
                l.kinematic,
                l.topological,
                l.total
            );
        }
    }
    out
}

pub fn format_metrics_csv(scores: &[FrameScore]) -> String {
    let mut out = String::from("frame,psnr_db,ssim\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{:.6},{:.6}", s.psnr, s.ssim);
    }
    out
}
