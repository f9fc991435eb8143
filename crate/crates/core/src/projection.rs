//! Pinhole back-projection of labeled depth pixels onto the agent's ground
//! plane.
//!
//! Frames: the camera frame is x right, y down, z along the optical axis. The
//! agent frame uses the same axis directions with its origin on the ground;
//! `(x, z)` span the ground plane and `y` (height, positive down) is dropped
//! after projection.

use serde::{Deserialize, Serialize};

use crate::class::SemanticClass;
use crate::error::{Error, Result};
use crate::image::{DepthMap, SemanticImage};
use crate::scalar::Scalar;

/// Half-open pixel rectangle `[u_min, u_max) × [v_min, v_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crop {
    pub u_min: usize,
    pub u_max: usize,
    pub v_min: usize,
    pub v_max: usize,
}

impl Crop {
    #[inline]
    pub fn contains(&self, u: usize, v: usize) -> bool {
        u >= self.u_min && u < self.u_max && v >= self.v_min && v < self.v_max
    }
}

/// Intrinsics, extrinsic pose relative to the agent and an optional sensor
/// crop.
///
/// `yaw`, `pitch` and `roll` are rotations about the z, y and x axes
/// composed as `Rz(yaw)·Ry(pitch)·Rx(roll)`. In the x-right/y-down/z-forward
/// frame, tilting the optical axis towards the ground is a negative `roll`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub fx: T,
    pub fy: T,
    pub u0: T,
    pub v0: T,
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
    pub tx: T,
    pub ty: T,
    pub tz: T,
    #[serde(default)]
    pub crop: Option<Crop>,
}

impl<T: Scalar> CameraModel<T> {
    /// Camera at the agent origin looking along +z.
    pub fn identity(fx: T, fy: T, u0: T, v0: T) -> Self {
        let z = T::zero();
        Self { fx, fy, u0, v0, yaw: z, pitch: z, roll: z, tx: z, ty: z, tz: z, crop: None }
    }

    /// Forward-looking camera `height` meters above the agent origin, tilted
    /// down by `tilt` radians.
    pub fn forward(fx: T, fy: T, u0: T, v0: T, height: T, tilt: T) -> Self {
        Self { roll: -tilt, ty: -height, ..Self::identity(fx, fy, u0, v0) }
    }

    pub fn with_crop(mut self, crop: Option<Crop>) -> Self {
        self.crop = crop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.fx) && ok(self.fy) && self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        let all = [self.u0, self.v0, self.yaw, self.pitch, self.roll, self.tx, self.ty, self.tz];
        if !all.into_iter().all(ok) {
            return Err(Error::InvalidArgument("non-finite camera parameter".into()));
        }
        Ok(())
    }

    /// Camera-to-agent rotation.
    pub fn rotation(&self) -> [[T; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    #[inline]
    pub fn translation(&self) -> [T; 3] {
        [self.tx, self.ty, self.tz]
    }

    /// `R·K⁻¹·(u, v, 1)ᵀ`: agent-frame direction of the pixel ray, scaled so a
    /// unit step advances one meter along the optical axis.
    #[inline]
    pub fn ray(&self, u: T, v: T) -> [T; 3] {
        let c = [(u - self.u0) / self.fx, (v - self.v0) / self.fy, T::one()];
        mat_vec(&self.rotation(), c)
    }

    /// Agent-frame 3D point of pixel `(u, v)` at z-depth `depth`.
    #[inline]
    pub fn pixel_to_agent(&self, u: T, v: T, depth: T) -> [T; 3] {
        let r = self.ray(u, v);
        [r[0] * depth + self.tx, r[1] * depth + self.ty, r[2] * depth + self.tz]
    }

    #[inline]
    pub fn sees(&self, u: usize, v: usize) -> bool {
        self.crop.is_none_or(|c| c.contains(u, v))
    }
}

#[inline]
fn mat_vec<T: Scalar>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// A labeled point on the agent's ground plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundPoint<T> {
    pub x: T,
    pub z: T,
    pub class: SemanticClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticPointCloud<T> {
    pub points: Vec<GroundPoint<T>>,
    pub timestamp: f64,
}

impl<T> SemanticPointCloud<T> {
    pub fn empty(timestamp: f64) -> Self {
        Self { points: Vec::new(), timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Projects every valid pixel (known label, valid depth, inside the crop) to
/// the ground plane, in row-major pixel order.
pub fn project_to_pointcloud<T: Scalar>(
    image: &SemanticImage,
    depth: &DepthMap,
    camera: &CameraModel<T>,
    timestamp: f64,
) -> Result<SemanticPointCloud<T>> {
    if image.width != depth.width || image.height != depth.height {
        return Err(Error::DimensionMismatch(format!(
            "labels {}x{} vs depth {}x{}",
            image.width, image.height, depth.width, depth.height
        )));
    }
    camera.validate()?;
    let rot = camera.rotation();
    let mut points = Vec::new();
    for v in 0..image.height {
        for u in 0..image.width {
            if !camera.sees(u, v) {
                continue;
            }
            let Some(class) = image.label(u, v) else { continue };
            let Some(d) = depth.get(u, v) else { continue };
            let d = T::of(d);
            let c = [(T::of(u as f64) - camera.u0) / camera.fx, (T::of(v as f64) - camera.v0) / camera.fy, T::one()];
            let r = mat_vec(&rot, c);
            points.push(GroundPoint { x: r[0] * d + camera.tx, z: r[2] * d + camera.tz, class });
        }
    }
    Ok(SemanticPointCloud { points, timestamp })
}
