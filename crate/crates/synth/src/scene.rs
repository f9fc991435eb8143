//! Scene description: a curved road with lanes and sidewalks, box-shaped
//! objects placed in road coordinates, the ego trajectory and the camera rig.

use serde::{Deserialize, Serialize};

use semgrid_core::{Camera, SemanticClass};

use crate::error::{Error, Result};

/// Curvatures below this are treated as a straight road.
const STRAIGHT_EPS: f64 = 1e-9;

/// Road centered on the ego lane. `offset` is the signed lateral distance to
/// the right of the ego lane center, `s` the arc length along it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    /// 1/m, positive bends left.
    pub curvature: f64,
    pub lane_width: f64,
    pub lanes_left: u32,
    pub lanes_right: u32,
    /// Width of the curbside strip holding poles, trees and pedestrians.
    pub sidewalk_width: f64,
}

impl Default for RoadSpec {
    fn default() -> Self {
        Self { curvature: 0.0, lane_width: 3.5, lanes_left: 1, lanes_right: 0, sidewalk_width: 3.0 }
    }
}

impl RoadSpec {
    pub fn left_edge(&self) -> f64 {
        -(self.lanes_left as f64 + 0.5) * self.lane_width
    }

    pub fn right_edge(&self) -> f64 {
        (self.lanes_right as f64 + 0.5) * self.lane_width
    }

    fn is_straight(&self) -> bool {
        self.curvature.abs() < STRAIGHT_EPS
    }

    /// World position of road coordinates `(s, offset)`.
    pub fn point(&self, s: f64, offset: f64) -> [f64; 2] {
        if self.is_straight() {
            return [offset, s];
        }
        let k = self.curvature;
        let (sin, cos) = (k * s).sin_cos();
        [(cos - 1.0) / k + offset * cos, sin / k + offset * sin]
    }

    /// Heading of the road tangent at `s`, in the same sense as the ego yaw.
    pub fn heading(&self, s: f64) -> f64 {
        self.curvature * s
    }

    /// Lateral offset of a world point.
    pub fn offset_of(&self, p: [f64; 2]) -> f64 {
        if self.is_straight() {
            return p[0];
        }
        let r = 1.0 / self.curvature;
        let d = (p[0] + r).hypot(p[1]);
        self.curvature.signum() * (d - r.abs())
    }

    /// Class of the bare ground at a lateral offset: road between the
    /// curbs, paved sidewalk everywhere else.
    pub fn ground_class_at(&self, offset: f64) -> SemanticClass {
        if (self.left_edge()..=self.right_edge()).contains(&offset) {
            SemanticClass::Road
        } else {
            SemanticClass::Sidewalk
        }
    }

    /// Class of the bare ground at a world point.
    pub fn ground_class(&self, p: [f64; 2]) -> SemanticClass {
        self.ground_class_at(self.offset_of(p))
    }
}

/// Box standing on the ground, moving linearly in road coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: SemanticClass,
    pub s: f64,
    pub offset: f64,
    /// Extent across the object's heading.
    pub width: f64,
    /// Extent along the object's heading.
    pub length: f64,
    pub height: f64,
    /// Heading relative to the road tangent.
    #[serde(default)]
    pub yaw: f64,
    /// `(ds/dt, d offset/dt)` in m/s.
    #[serde(default)]
    pub velocity: [f64; 2],
}

/// Object footprint in the world at some time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub class: SemanticClass,
    pub center: [f64; 2],
    pub heading: f64,
    pub half_width: f64,
    pub half_length: f64,
    pub height: f64,
}

impl SceneObject {
    pub fn placement(&self, road: &RoadSpec, t: f64) -> Placement {
        let s = self.s + self.velocity[0] * t;
        let offset = self.offset + self.velocity[1] * t;
        Placement {
            class: self.class,
            center: road.point(s, offset),
            heading: road.heading(s) + self.yaw,
            half_width: 0.5 * self.width,
            half_length: 0.5 * self.length,
            height: self.height,
        }
    }
}

/// Ego drives along the ego lane center at constant speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub speed: f64,
}

/// Gaussian perturbation of the reported egomotion rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoNoise {
    pub yaw_rate_std: f64,
    pub speed_std: f64,
}

/// Cameras sharing one image size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub width: usize,
    pub height: usize,
    pub cameras: Vec<Camera>,
}

/// Pose of the ego agent in the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
}

impl Pose {
    pub fn to_world(&self, x: f64, z: f64) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        [self.position[0] + c * x - s * z, self.position[1] + s * x + c * z]
    }

    pub fn to_agent(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        let (dx, dz) = (p[0] - self.position[0], p[1] - self.position[1]);
        [c * dx + s * dz, -s * dx + c * dz]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    /// Objects must start within this distance of the origin (m).
    pub extent: f64,
    pub road: RoadSpec,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    pub ego: EgoSpec,
    pub rig: Rig,
    /// Hz.
    pub frame_rate: f64,
    #[serde(default)]
    pub ego_noise: Option<EgoNoise>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::EmptyWorld(self.extent));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::Config(format!("frame rate must be positive, got {}", self.frame_rate)));
        }
        if !(self.road.lane_width > 0.0 && self.road.sidewalk_width >= 0.0) {
            return Err(Error::Config("lane width must be positive and sidewalk width non-negative".into()));
        }
        if self.rig.cameras.is_empty() || self.rig.width == 0 || self.rig.height == 0 {
            return Err(Error::Config("rig needs at least one camera and a non-empty image".into()));
        }
        for (index, cam) in self.rig.cameras.iter().enumerate() {
            cam.validate().map_err(|e| Error::DegenerateCamera { index, reason: e.to_string() })?;
            if cam.ty >= 0.0 {
                return Err(Error::DegenerateCamera { index, reason: "camera must be above the ground".into() });
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let p = self.road.point(o.s, o.offset);
            if p[0].hypot(p[1]) > self.extent {
                return Err(Error::Config(format!("object {i} lies outside the world extent")));
            }
            if !(o.width > 0.0 && o.length > 0.0 && o.height > 0.0) {
                return Err(Error::Config(format!("object {i} has a non-positive size")));
            }
        }
        Ok(())
    }

    pub fn time(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate
    }

    pub fn ego_pose(&self, t: f64) -> Pose {
        let s = self.ego.speed * t;
        Pose { position: self.road.point(s, 0.0), heading: self.road.heading(s) }
    }

    /// True egomotion rates (constant along the lane).
    pub fn ego_rates(&self) -> (f64, [f64; 2]) {
        (self.ego.speed * self.road.curvature, [0.0, self.ego.speed])
    }

    pub fn placements(&self, t: f64) -> Vec<Placement> {
        self.objects.iter().map(|o| o.placement(&self.road, t)).collect()
    }
}
