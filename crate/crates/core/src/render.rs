//! Point-splat rasterizer: each point becomes a depth-tested disk.

use rayon::prelude::*;

use crate::cloud::TargetCloud;
use crate::error::{Error, Result};
use crate::geometry::{centroid, CameraModel, RigidTransform, Vec3};
use crate::trajectory::bbox_diagonal;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const DEFAULT_WIDTH: usize = 512;
pub const DEFAULT_HEIGHT: usize = 512;

/// An 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} RGB frame",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let o = (y * self.width + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        let o = (y * self.width + x) * 3;
        self.pixels[o..o + 3].copy_from_slice(&color);
    }
}

/// One camera per frame, sharing intrinsics and resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPath {
    cameras: Vec<CameraModel>,
}

impl CameraPath {
    pub fn new(cameras: Vec<CameraModel>) -> Result<Self> {
        if let Some(first) = cameras.first() {
            for (t, c) in cameras.iter().enumerate() {
                c.validate()?;
                if (c.fx, c.fy, c.cx, c.cy, c.width, c.height)
                    != (first.fx, first.fy, first.cx, first.cy, first.width, first.height)
                {
                    return Err(Error::InvalidCamera(format!(
                        "frame {t}: intrinsics differ from frame 0"
                    )));
                }
            }
        }
        Ok(Self { cameras })
    }

    pub fn fixed(camera: CameraModel, frames: usize) -> Result<Self> {
        Self::new(vec![camera; frames])
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn cameras(&self) -> &[CameraModel] {
        &self.cameras
    }
}

/// A camera looking down +z at the points, far enough back to frame them.
pub fn default_camera(points: &[Vec3], width: usize, height: usize) -> Result<CameraModel> {
    let (center, diag) = if points.is_empty() {
        (Vec3::zeros(), 1.0)
    } else {
        let d = bbox_diagonal(points);
        (centroid(points), if d > 0.0 { d } else { 1.0 })
    };
    let f = 0.9 * width.min(height) as f64;
    CameraModel::new(
        f,
        f,
        width as f64 / 2.0,
        height as f64 / 2.0,
        RigidTransform::from_translation(center - Vec3::new(0.0, 0.0, 2.0 * diag)),
        width,
        height,
    )
}

pub fn color_to_rgb(c: &[f64; 3]) -> Rgb {
    c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Renders frame `t` of `positions` with camera `t` of `path`.
pub fn render(positions: &[Vec<Vec3>], cloud: &TargetCloud, path: &CameraPath, background: Rgb) -> Result<Vec<Frame>> {
    if positions.is_empty() {
        return Err(Error::EmptySequence);
    }
    if path.len() != positions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} cameras for {} frames",
            path.len(),
            positions.len()
        )));
    }
    if let Some((t, f)) = positions.iter().enumerate().find(|(_, f)| f.len() != cloud.len()) {
        return Err(Error::DimensionMismatch(format!(
            "frame {t} has {} points, cloud has {}",
            f.len(),
            cloud.len()
        )));
    }
    let colors: Vec<Rgb> = cloud.colors.iter().map(color_to_rgb).collect();
    Ok(positions
        .par_iter()
        .zip(path.cameras().par_iter())
        .map(|(points, cam)| rasterize(points, &cloud.radii, &colors, cam, background))
        .collect())
}

fn rasterize(points: &[Vec3], radii: &[f64], colors: &[Rgb], cam: &CameraModel, background: Rgb) -> Frame {
    let (w, h) = (cam.width, cam.height);
    let mut frame = Frame::filled(w, h, background);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut owner = vec![u32::MAX; w * h];
    let mut plot = |x: i64, y: i64, z: f64, i: usize| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            return;
        }
        let o = y as usize * w + x as usize;
        // Strict test in index order: the lowest index wins equal depths.
        if z < depth[o] {
            depth[o] = z;
            owner[o] = i as u32;
        }
    };
    for (i, p) in points.iter().enumerate() {
        let Ok(proj) = cam.project(p) else { continue };
        let (u, v, z) = (proj.u, proj.v, proj.depth);
        if !(u.is_finite() && v.is_finite()) {
            continue;
        }
        let r = cam.fx * radii[i] / z;
        let r2 = r * r;
        let y0 = (v - r).ceil().max(0.0);
        let y1 = (v + r).floor().min(h as f64 - 1.0);
        let mut covered = r >= 1.0;
        let mut y = y0;
        while y <= y1 {
            let half = (r2 - (y - v) * (y - v)).max(0.0).sqrt();
            let x0 = (u - half).ceil().max(0.0);
            let x1 = (u + half).floor().min(w as f64 - 1.0);
            let mut x = x0;
            while x <= x1 {
                if (x - u) * (x - u) + (y - v) * (y - v) <= r2 {
                    plot(x as i64, y as i64, z, i);
                    covered = true;
                }
                x += 1.0;
            }
            y += 1.0;
        }
        if !covered && !covers_lattice_point(u, v, r2) {
            plot(u.round() as i64, v.round() as i64, z, i);
        }
    }
    for (o, &i) in owner.iter().enumerate() {
        if i != u32::MAX {
            frame.pixels[o * 3..o * 3 + 3].copy_from_slice(&colors[i as usize]);
        }
    }
    frame
}

/// Whether a disk of radius² `r2` around `(u, v)` holds any integer point,
/// ignoring image bounds. Only called for radii below one pixel.
fn covers_lattice_point(u: f64, v: f64, r2: f64) -> bool {
    let (fx, fy) = (u.floor(), v.floor());
    [(fx, fy), (fx + 1.0, fy), (fx, fy + 1.0), (fx + 1.0, fy + 1.0)]
        .iter()
        .any(|(x, y)| (x - u) * (x - u) + (y - v) * (y - v) <= r2)
}
