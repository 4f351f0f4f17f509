//! Points, rigid transforms, pinhole cameras and least-squares rigid alignment.
//!
//! Rotations are kept as 3x3 matrices throughout. The only factorization the
//! crate needs is a 3x3 SVD, provided here by a one-sided Jacobi routine so
//! results do not depend on an external LAPACK.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used for the SO(3) invariant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Orthonormality drift above which [`compose`] re-projects onto SO(3).
const REORTHONORMALIZE_DRIFT: f64 = 1e-12;

/// Relative threshold on the two smaller singular values of the cross-covariance.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Mat3::identity(), translation)
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Rotation by `angle` radians about `axis` (normalized internally), via Rodrigues' formula.
    pub fn axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::from_rotation(rotation_about(axis, angle))
    }

    /// Rotation by `angle` radians about `axis` passing through `pivot`.
    pub fn rotation_about_point(axis: &Vec3, angle: f64, pivot: &Vec3) -> Self {
        let r = rotation_about(axis, angle);
        Self::new(r, pivot - r * pivot)
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).amax()
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

/// `a ∘ b`: applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let mut out = RigidTransform::new(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
    if out.orthonormality_error() > REORTHONORMALIZE_DRIFT {
        out.rotation = nearest_rotation(&out.rotation);
    }
    out
}

pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Mat3::identity();
    }
    let k = axis / n;
    let (s, c) = angle.sin_cos();
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + kx * s + kx * kx * (1.0 - c)
}

pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Closest proper rotation in the Frobenius norm.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = svd3(m);
    let d = (svd.u * svd.v.transpose()).determinant().signum();
    svd.u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * svd.v.transpose()
}

/// Thin SVD `m = u · diag(σ) · vᵀ` with σ sorted descending.
#[derive(Debug, Clone, Copy)]
pub struct Svd3 {
    pub u: Mat3,
    pub singular_values: Vec3,
    pub v: Mat3,
}

/// One-sided (Hestenes) Jacobi SVD of a 3x3 matrix.
///
/// Columns of `m` are rotated pairwise until mutually orthogonal; the
/// accumulated rotations form `v`, the column norms are the singular values
/// and the normalized columns form `u`. Orthogonality is enforced relative to
/// column norms, so small singular values keep full relative accuracy.
pub fn svd3(m: &Mat3) -> Svd3 {
    let mut a = *m;
    let mut v = Mat3::identity();
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

    for _sweep in 0..64 {
        let mut rotated = false;
        for &(p, q) in &PAIRS {
            let alpha = a.column(p).norm_squared();
            let beta = a.column(q).norm_squared();
            let gamma = a.column(p).dot(&a.column(q));
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            for mat in [&mut a, &mut v] {
                for r in 0..3 {
                    let xp = mat[(r, p)];
                    let xq = mat[(r, q)];
                    mat[(r, p)] = c * xp - s * xq;
                    mat[(r, q)] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order = [0usize, 1, 2];
    let norms = [a.column(0).norm(), a.column(1).norm(), a.column(2).norm()];
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma = Vec3::new(norms[order[0]], norms[order[1]], norms[order[2]]);
    let mut u = Mat3::zeros();
    let mut v_sorted = Mat3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.set_column(dst, &v.column(src));
        u.set_column(dst, &a.column(src));
    }

    // Normalize u columns; complete the basis where singular values vanish.
    let tiny = sigma[0] * f64::EPSILON * 8.0;
    if sigma[0] == 0.0 {
        u = Mat3::identity();
    } else {
        let u0 = u.column(0) / sigma[0];
        u.set_column(0, &u0);
        let u1 = if sigma[1] > tiny {
            u.column(1) / sigma[1]
        } else {
            any_orthogonal(&u0)
        };
        u.set_column(1, &u1);
        let u2 = if sigma[2] > tiny {
            u.column(2) / sigma[2]
        } else {
            u0.cross(&u1)
        };
        u.set_column(2, &u2);
    }

    Svd3 {
        u,
        singular_values: sigma,
        v: v_sorted,
    }
}

fn any_orthogonal(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    n.cross(&helper).normalize()
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]` (no scale).
///
/// Builds the cross-covariance `H = Σ (srcᵢ − s̄)(dstᵢ − d̄)ᵀ`, factors
/// `H = UΣVᵀ` and returns `R = V·diag(1, 1, det(VUᵀ))·Uᵀ`, `δ = d̄ − R·s̄`.
pub fn umeyama_align(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source points vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints { found: src.len() });
    }

    let src_mean = centroid(src);
    let dst_mean = centroid(dst);
    let mut h = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - src_mean) * (d - dst_mean).transpose();
    }

    let svd = svd3(&h);
    let sv = svd.singular_values;
    let threshold = DEGENERACY_THRESHOLD * sv[0].max(1.0);
    if sv[1] < threshold && sv[2] < threshold {
        return Err(Error::DegenerateConfiguration {
            singular_values: [sv[0], sv[1], sv[2]],
        });
    }

    let d = (svd.v * svd.u.transpose()).determinant().signum();
    let rotation = svd.v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * svd.u.transpose();
    let translation = dst_mean - rotation * src_mean;
    Ok(RigidTransform::new(rotation, translation))
}

/// Pinhole camera: intrinsics, camera-to-world pose and image size.
///
/// Camera frame convention: x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub pose: RigidTransform,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, pose: RigidTransform, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            pose,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        if !self.pose.is_proper(ROTATION_TOLERANCE) {
            return Err(Error::InvalidCamera("pose rotation is not in SO(3)".into()));
        }
        Ok(())
    }

    pub fn with_pose(&self, pose: RigidTransform) -> Self {
        Self { pose, ..*self }
    }

    /// Camera-frame coordinates of a world point.
    #[inline]
    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.pose.rotation.transpose() * (world - self.pose.translation)
    }

    pub fn project(&self, world: &Vec3) -> Result<Projection> {
        let p = self.to_camera(world);
        if p.z <= 0.0 {
            return Err(Error::BehindCamera { depth: p.z });
        }
        Ok(Projection {
            u: self.fx * p.x / p.z + self.cx,
            v: self.fy * p.y / p.z + self.cy,
            depth: p.z,
        })
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Vec3> {
        if depth.is_nan() || depth <= 0.0 {
            return Err(Error::NonPositiveDepth { depth });
        }
        let p = Vec3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth);
        Ok(self.pose.apply(&p))
    }
}
