//! Random scene generation from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use semgrid_core::{Camera, SemanticClass};

use crate::scene::{EgoNoise, EgoSpec, Rig, RoadSpec, SceneObject, SceneSpec};

/// Forward-looking camera mounted on the agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigSpec {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    /// Mounting height above the ground (m).
    pub mount_height: f64,
    /// Downward tilt (rad).
    pub tilt: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self { width: 512, height: 256, fx: 400.0, fy: 400.0, u0: 256.0, v0: 128.0, mount_height: 1.4, tilt: 0.04 }
    }
}

impl RigSpec {
    pub fn camera(&self) -> Camera {
        Camera::forward(self.fx, self.fy, self.u0, self.v0, self.mount_height, self.tilt)
    }

    pub fn rig(&self) -> Rig {
        Rig { width: self.width, height: self.height, cameras: vec![self.camera()] }
    }
}

/// Distributions the generator draws scenes from. Ranges are `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub extent: f64,
    pub frame_rate: f64,
    pub rig: RigSpec,
    pub straight_probability: f64,
    pub max_curvature: f64,
    pub lane_width: f64,
    pub sidewalk_width: [f64; 2],
    pub ego_speed: [f64; 2],
    pub stationary_probability: f64,
    /// Range of arc length populated with objects, relative to the start.
    pub populate: [f64; 2],
    pub building_probability: f64,
    pub tree_spacing: f64,
    pub pole_spacing: f64,
    pub parked_car_probability: f64,
    pub lead_cars: [usize; 2],
    pub oncoming_cars: [usize; 2],
    pub bus_probability: f64,
    pub pedestrians: [usize; 2],
    pub crossing_probability: f64,
    pub cyclists: [usize; 2],
    pub ego_noise: Option<EgoNoise>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            extent: 200.0,
            frame_rate: 17.0,
            rig: RigSpec::default(),
            straight_probability: 0.5,
            max_curvature: 0.012,
            lane_width: 3.5,
            sidewalk_width: [2.0, 4.0],
            ego_speed: [4.0, 12.0],
            stationary_probability: 0.1,
            populate: [-25.0, 90.0],
            building_probability: 0.75,
            tree_spacing: 9.0,
            pole_spacing: 18.0,
            parked_car_probability: 0.5,
            lead_cars: [0, 2],
            oncoming_cars: [1, 4],
            bus_probability: 0.3,
            pedestrians: [2, 10],
            crossing_probability: 0.3,
            cyclists: [0, 2],
            ego_noise: None,
        }
    }
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn count(rng: &mut impl Rng, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1].max(r[0]))
}

fn object(class: SemanticClass, s: f64, offset: f64, size: [f64; 3]) -> SceneObject {
    SceneObject { class, s, offset, width: size[0], length: size[1], height: size[2], yaw: 0.0, velocity: [0.0, 0.0] }
}

const CAR: [f64; 3] = [1.8, 4.4, 1.5];
const BUS: [f64; 3] = [2.5, 11.0, 3.2];
const PERSON: [f64; 3] = [0.6, 0.6, 1.75];
const BICYCLE: [f64; 3] = [0.6, 1.8, 1.7];
const POLE: [f64; 3] = [0.3, 0.3, 4.0];

/// Draws a scene; the same `(params, seed)` always yields the same scene.
pub fn generate_scene(params: &SceneParams, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curvature = if rng.random_bool(params.straight_probability.clamp(0.0, 1.0)) {
        0.0
    } else {
        uniform(&mut rng, [-params.max_curvature, params.max_curvature])
    };
    let road = RoadSpec {
        curvature,
        lane_width: params.lane_width,
        lanes_left: rng.random_range(1..=2),
        lanes_right: rng.random_range(0..=1),
        sidewalk_width: uniform(&mut rng, params.sidewalk_width),
    };
    let speed = if rng.random_bool(params.stationary_probability.clamp(0.0, 1.0)) {
        0.0
    } else {
        uniform(&mut rng, params.ego_speed)
    };
    let (left, right) = (road.left_edge(), road.right_edge());
    let sw = road.sidewalk_width;
    let [s_lo, s_hi] = params.populate;
    let mut objects = Vec::new();

    // Building rows beyond both sidewalks, with random gaps.
    for side in [-1.0, 1.0] {
        let curb = if side < 0.0 { left - sw } else { right + sw };
        let mut s = s_lo + uniform(&mut rng, [0.0, 10.0]);
        while s < s_hi {
            let len = uniform(&mut rng, [8.0, 25.0]);
            if rng.random_bool(params.building_probability) {
                let depth = uniform(&mut rng, [8.0, 15.0]);
                let setback = uniform(&mut rng, [0.0, 4.0]);
                let offset = curb + side * (setback + 0.5 * depth);
                let h = uniform(&mut rng, [6.0, 20.0]);
                objects.push(object(SemanticClass::Building, s + 0.5 * len, offset, [depth, len, h]));
                if setback > 2.0 && rng.random_bool(0.3) {
                    let hedge = [uniform(&mut rng, [0.6, 1.2]), 0.8 * len, uniform(&mut rng, [0.8, 1.6])];
                    objects.push(object(SemanticClass::Vegetation, s + 0.5 * len, curb + side * 0.5 * setback, hedge));
                }
            } else {
                // Gap: a hedge and a couple of trees instead.
                if rng.random_bool(0.5) {
                    let hedge = [uniform(&mut rng, [0.8, 1.5]), 0.8 * len, uniform(&mut rng, [0.8, 1.6])];
                    let offset = curb + side * uniform(&mut rng, [0.5, 3.0]);
                    objects.push(object(SemanticClass::Vegetation, s + 0.5 * len, offset, hedge));
                }
                for _ in 0..rng.random_range(0..=2) {
                    let d = uniform(&mut rng, [1.5, 4.0]);
                    let offset = curb + side * uniform(&mut rng, [1.0, 6.0]);
                    let ts = s + uniform(&mut rng, [0.0, len]);
                    objects.push(object(SemanticClass::Vegetation, ts, offset, [d, d, uniform(&mut rng, [3.0, 7.0])]));
                }
            }
            s += len + uniform(&mut rng, [0.0, 6.0]);
        }
    }

    // Street furniture along the curbs.
    for side in [-1.0, 1.0] {
        let curb = if side < 0.0 { left } else { right };
        let mut s = s_lo + uniform(&mut rng, [0.0, params.pole_spacing]);
        while s < s_hi {
            objects.push(object(SemanticClass::PoleSign, s, curb + side * 0.5, POLE));
            s += params.pole_spacing * uniform(&mut rng, [0.6, 1.4]);
        }
        let mut s = s_lo + uniform(&mut rng, [0.0, params.tree_spacing]);
        while s < s_hi {
            if rng.random_bool(0.5) {
                let d = uniform(&mut rng, [1.0, 2.5]);
                let offset = curb + side * (sw - 0.5 * d).max(0.5 * d);
                objects.push(object(SemanticClass::Vegetation, s, offset, [d, d, uniform(&mut rng, [2.5, 6.0])]));
            }
            s += params.tree_spacing * uniform(&mut rng, [0.6, 1.4]);
        }
    }

    // Parked cars along the outer lanes.
    let parking_sides: Vec<f64> = [(road.lanes_right >= 1, 1.0), (road.lanes_left >= 2, -1.0)]
        .iter()
        .filter(|(has, _)| *has)
        .map(|&(_, side)| side)
        .collect();
    for side in parking_sides {
        let edge = if side < 0.0 { left } else { right };
        let mut s = s_lo + uniform(&mut rng, [0.0, 6.0]);
        while s < s_hi {
            if rng.random_bool(params.parked_car_probability) {
                let mut car = object(SemanticClass::Car, s, edge - side * 1.2, CAR);
                car.yaw = uniform(&mut rng, [-0.05, 0.05]);
                objects.push(car);
            }
            s += uniform(&mut rng, [5.5, 8.0]);
        }
    }

    // Traffic in the ego lane ahead, keeping pace with the ego.
    let mut s = uniform(&mut rng, [10.0, 18.0]);
    for _ in 0..count(&mut rng, params.lead_cars) {
        let bus = rng.random_bool(params.bus_probability * 0.5);
        let mut v = object(
            if bus { SemanticClass::LargeVehicle } else { SemanticClass::Car },
            s,
            0.0,
            if bus { BUS } else { CAR },
        );
        v.velocity = [(speed + uniform(&mut rng, [-1.0, 4.0])).max(0.0), 0.0];
        objects.push(v);
        s += uniform(&mut rng, [14.0, 30.0]);
    }

    // Oncoming traffic in the first left lane.
    for _ in 0..count(&mut rng, params.oncoming_cars) {
        let bus = rng.random_bool(params.bus_probability);
        let s = uniform(&mut rng, [5.0, 80.0]);
        let size = if bus { BUS } else { CAR };
        let mut v =
            object(if bus { SemanticClass::LargeVehicle } else { SemanticClass::Car }, s, -params.lane_width, size);
        v.velocity = [-uniform(&mut rng, [5.0, 13.0]), 0.0];
        objects.push(v);
    }

    // Pedestrians on the sidewalks, some crossing the road.
    for _ in 0..count(&mut rng, params.pedestrians) {
        let s = uniform(&mut rng, [s_lo.max(-5.0), 60.0]);
        let walk = uniform(&mut rng, [0.8, 1.8]) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut p = if rng.random_bool(params.crossing_probability) {
            let from_left = rng.random_bool(0.5);
            let offset = if from_left { left - 0.5 * sw } else { right + 0.5 * sw };
            let mut p = object(SemanticClass::Person, s.max(12.0), offset, PERSON);
            p.velocity = [0.0, if from_left { walk.abs() } else { -walk.abs() }];
            p
        } else {
            let side_left = rng.random_bool(0.5);
            let offset = if side_left {
                left - uniform(&mut rng, [0.3, sw - 0.3])
            } else {
                right + uniform(&mut rng, [0.3, sw - 0.3])
            };
            let mut p = object(SemanticClass::Person, s, offset, PERSON);
            p.velocity = [walk, 0.0];
            p
        };
        p.yaw = uniform(&mut rng, [-0.3, 0.3]);
        objects.push(p);
    }

    // Cyclists riding with traffic near the right curb.
    for _ in 0..count(&mut rng, params.cyclists) {
        let s = uniform(&mut rng, [3.0, 50.0]);
        let mut b = object(SemanticClass::Bicycle, s, right - 0.6, BICYCLE);
        b.velocity = [uniform(&mut rng, [3.0, 7.0]), 0.0];
        objects.push(b);
    }

    SceneSpec {
        seed,
        extent: params.extent,
        road,
        objects,
        ego: EgoSpec { speed },
        rig: params.rig.rig(),
        frame_rate: params.frame_rate,
        ego_noise: params.ego_noise,
    }
}
