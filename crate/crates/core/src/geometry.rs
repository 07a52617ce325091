//! Pinhole camera model, rigid poses and cross-view point transfer.
//!
//! Camera frames are right-handed with +X right, +Y down and +Z forward, so a
//! camera-frame point projects to `u = fx * x / z + cx`, `v = fy * y / z + cy`.
//! Depth is z-depth (distance along the optical axis), not ray length.
//!
//! Poses are stored camera-to-world. A [`RelativePose`] maps coordinates in
//! the camera frame of view *i* to coordinates in the camera frame of view *j*.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("intrinsics", "raster must be at least 1x1"));
        }
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::invalid(
                "intrinsics",
                format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid(
                "intrinsics",
                format!("cx={} outside [0, {})", self.cx, self.width),
            ));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(
                "intrinsics",
                format!("cy={} outside [0, {})", self.cy, self.height),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }
}

fn check_rotation(what: &'static str, r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(what, "rotation has non-finite entries"));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > ORTHO_TOL {
        return Err(Error::invalid(
            what,
            format!("rotation is not orthonormal (max |R^T R - I| = {err:e})"),
        ));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHO_TOL {
        return Err(Error::invalid(what, format!("rotation determinant {det} != +1")));
    }
    Ok(())
}

fn check_translation(what: &'static str, t: &Vector3<f64>) -> Result<()> {
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(what, "translation has non-finite entries"));
    }
    Ok(())
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation("pose", &rotation)?;
        check_translation("pose", &translation)?;
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a row-major homogeneous 4x4 matrix.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        let mat = Matrix4::from_row_slice(m);
        let bottom = [mat[(3, 0)], mat[(3, 1)], mat[(3, 2)], mat[(3, 3)]];
        let expected = [0.0, 0.0, 0.0, 1.0];
        if bottom
            .iter()
            .zip(expected)
            .any(|(a, b)| !((a - b).abs() <= ORTHO_TOL))
        {
            return Err(Error::invalid(
                "pose",
                format!("bottom row {bottom:?} is not (0, 0, 0, 1)"),
            ));
        }
        let rotation = mat.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = mat.fixed_view::<3, 1>(0, 3).into_owned();
        Pose::new(rotation, translation)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0],
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1],
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2],
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// World-to-camera mapping of a world point.
    pub fn world_to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }

    /// The pose reached by applying a camera-local motion to this pose.
    pub fn then_move(&self, motion: &RelativePose) -> Pose {
        // motion maps i-frame to j-frame; the j camera in i's frame is its inverse
        let m = motion.inverse();
        Pose {
            rotation: self.rotation * m.rotation,
            translation: self.rotation * m.translation + self.translation,
        }
    }
}

/// Rigid transform taking camera-i coordinates to camera-j coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RelativePose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation("relative pose", &rotation)?;
        check_translation("relative pose", &translation)?;
        Ok(RelativePose {
            rotation,
            translation,
        })
    }

    /// Constructs without validation; callers guarantee a proper rotation.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RelativePose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts(Matrix3::identity(), Vector3::zeros())
    }

    /// The relative pose for a camera that moves by `displacement` (expressed
    /// in its starting frame) and ends with orientation `R_yaw(yaw) * R_pitch(pitch)`
    /// relative to where it started.
    pub fn from_camera_motion(yaw_deg: f64, pitch_deg: f64, displacement: Vector3<f64>) -> Self {
        let orientation = yaw_rotation(yaw_deg) * pitch_rotation(pitch_deg);
        CameraMotion {
            orientation,
            position: displacement,
        }
        .to_relative()
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> RelativePose {
        let rt = self.rotation.transpose();
        Self::from_parts(rt, -(rt * self.translation))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &RelativePose) -> RelativePose {
        Self::from_parts(
            self.rotation * first.rotation,
            self.rotation * first.translation + self.translation,
        )
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Where camera j sits, and how it is oriented, in camera i's frame.
    pub fn camera_motion(&self) -> CameraMotion {
        let inv = self.inverse();
        CameraMotion {
            orientation: inv.rotation,
            position: inv.translation,
        }
    }

    pub fn translation_error(&self, other: &RelativePose) -> f64 {
        (self.translation - other.translation).norm()
    }

    pub fn rotation_error_deg(&self, other: &RelativePose) -> f64 {
        rotation_angle_deg(&self.rotation, &other.rotation)
    }
}

/// Pose of the destination camera expressed in the source camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMotion {
    pub orientation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl CameraMotion {
    pub fn to_relative(&self) -> RelativePose {
        let rt = self.orientation.transpose();
        RelativePose::from_parts(rt, -(rt * self.position))
    }
}

/// Rotation that swings the view direction to the right by `deg`
/// (about the camera +Y axis, which points down).
pub fn yaw_rotation(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation that swings the view direction upward by `deg`
/// (about the camera +X axis).
pub fn pitch_rotation(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the optical axis.
pub fn roll_rotation(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Per-pixel depth raster in meters. Pixels with a non-positive or
/// non-finite value are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("depth map", "raster must be at least 1x1"));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "depth map has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f32) -> Self {
        DepthMap {
            width,
            height,
            values: vec![depth; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major values, top row first.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn raw(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    /// Depth at an in-bounds pixel, or `None` when the pixel is invalid.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.raw(u, v);
        (d.is_finite() && d > 0.0).then_some(d as f64)
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| d.is_finite() && **d > 0.0).count()
    }
}

/// Geometric identity of one image: calibration, pose and depth.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    intrinsics: Intrinsics,
    pose: Pose,
    depth: DepthMap,
    frame: String,
}

impl CameraView {
    /// `frame` names the world coordinate system the pose is expressed in;
    /// only views sharing a frame can be related.
    pub fn new(
        intrinsics: Intrinsics,
        pose: Pose,
        depth: DepthMap,
        frame: impl Into<String>,
    ) -> Result<Self> {
        intrinsics.validate()?;
        if depth.width != intrinsics.width || depth.height != intrinsics.height {
            return Err(Error::DimensionMismatch(format!(
                "depth raster {}x{} does not match intrinsics {}x{}",
                depth.width, depth.height, intrinsics.width, intrinsics.height
            )));
        }
        Ok(CameraView {
            intrinsics,
            pose,
            depth,
            frame: frame.into(),
        })
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn depth(&self) -> &DepthMap {
        &self.depth
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }
}

/// Back-projects an integer pixel to a camera-frame point using its depth.
pub fn unproject(u: i64, v: i64, view: &CameraView) -> Result<Option<Vector3<f64>>> {
    let k = &view.intrinsics;
    if !k.contains(u, v) {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(view
        .depth
        .get(u as usize, v as usize)
        .map(|z| unproject_with_depth(u as f64, v as f64, z, k)))
}

#[inline]
pub(crate) fn unproject_with_depth(u: f64, v: f64, z: f64, k: &Intrinsics) -> Vector3<f64> {
    Vector3::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)
}

pub fn to_world(point: &Vector3<f64>, pose: &Pose) -> Vector3<f64> {
    pose.rotation * point + pose.translation
}

/// Projects a camera-frame point. Returns `None` for points at or behind the
/// camera plane; the returned pixel may lie outside the raster.
pub fn project(point: &Vector3<f64>, k: &Intrinsics) -> Option<(Vector2<f64>, f64)> {
    let z = point.z;
    if !(z > 0.0) {
        return None;
    }
    let pixel = Vector2::new(k.fx * point.x / z + k.cx, k.fy * point.y / z + k.cy);
    Some((pixel, z))
}

/// `pose_j⁻¹ ∘ pose_i`.
pub fn relative_pose(pose_i: &Pose, pose_j: &Pose) -> RelativePose {
    let rjt = pose_j.rotation.transpose();
    RelativePose::from_parts(
        rjt * pose_i.rotation,
        rjt * (pose_i.translation - pose_j.translation),
    )
}

/// Geodesic angle between two rotations, in degrees within [0, 180].
pub fn rotation_angle_deg(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> f64 {
    // atan2 keeps precision near 0 where acos of the trace loses it
    let m = r1 * r2.transpose();
    let sin2 = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
    sin2.atan2(m.trace() - 1.0).to_degrees()
}

/// Inclusive depth agreement test.
pub fn depth_consistent(projected: f64, observed: f64, threshold: f64) -> bool {
    (projected - observed).abs() <= threshold
}
