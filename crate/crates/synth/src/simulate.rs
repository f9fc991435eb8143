//! Raycasting renderer producing labeled depth frames, exact egomotion and
//! an oracle top-down grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use semgrid_core::{Camera, DepthMap, EgoSample, GridGeometry, SemanticClass, SemanticGrid, SemanticImage};

use crate::error::Result;
use crate::scene::{Placement, Pose, SceneSpec};

/// Boxes whose corners come closer than this to the image plane are tested
/// against every pixel instead of their projected bounding rectangle.
const NEAR_PLANE: f64 = 0.05;

/// One camera's labeled depth image.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView {
    pub camera: Camera,
    pub image: SemanticImage,
    pub depth: DepthMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    pub index: usize,
    pub t: f64,
    pub views: Vec<CameraView>,
    /// Reported egomotion at `t` (noisy when the scene enables noise).
    pub ego: EgoSample,
    /// True world state around the agent at `t`, in the agent's own frame.
    pub ground_truth_topdown: SemanticGrid,
}

/// Box in the agent frame at one instant.
#[derive(Clone, Copy, Debug)]
struct AgentBox {
    class: SemanticClass,
    center: [f64; 2],
    cos: f64,
    sin: f64,
    half_width: f64,
    half_length: f64,
    height: f64,
}

impl AgentBox {
    fn new(p: &Placement, pose: &Pose) -> Self {
        let center = pose.to_agent(p.center);
        let (sin, cos) = (p.heading - pose.heading).sin_cos();
        Self {
            class: p.class,
            center,
            cos,
            sin,
            half_width: p.half_width,
            half_length: p.half_length,
            height: p.height,
        }
    }

    /// Agent-frame `(x, z)` into box-local `(across, along)`.
    fn local(&self, x: f64, z: f64) -> [f64; 2] {
        let (dx, dz) = (x - self.center[0], z - self.center[1]);
        [self.cos * dx + self.sin * dz, -self.sin * dx + self.cos * dz]
    }

    /// Separating-axis test of the footprint against an axis-aligned square;
    /// touching edges do not count.
    fn overlaps_square(&self, cx: f64, cz: f64, half: f64) -> bool {
        const EPS: f64 = 1e-9;
        let (c, s) = (self.cos.abs(), self.sin.abs());
        let (dx, dz) = (self.center[0] - cx, self.center[1] - cz);
        let l = self.local(cx, cz);
        dx.abs() + EPS < self.half_width * c + self.half_length * s + half
            && dz.abs() + EPS < self.half_width * s + self.half_length * c + half
            && l[0].abs() + EPS < self.half_width + half * (c + s)
            && l[1].abs() + EPS < self.half_length + half * (c + s)
    }

    fn corners(&self) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for a in [-self.half_width, self.half_width] {
            for b in [-self.half_length, self.half_length] {
                let x = self.center[0] + self.cos * a - self.sin * b;
                let z = self.center[1] + self.sin * a + self.cos * b;
                for y in [0.0, -self.height] {
                    out[i] = [x, y, z];
                    i += 1;
                }
            }
        }
        out
    }

    /// Ray parameter of the first intersection in front of the origin.
    fn intersect(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
        let o = self.local(origin[0], origin[2]);
        let d = [self.cos * dir[0] + self.sin * dir[2], -self.sin * dir[0] + self.cos * dir[2]];
        let slabs = [
            (o[0], d[0], -self.half_width, self.half_width),
            (origin[1], dir[1], -self.height, 0.0),
            (o[1], d[1], -self.half_length, self.half_length),
        ];
        let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
        for (o, d, lo, hi) in slabs {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let (a, b) = ((lo - o) / d, (hi - o) / d);
            near = near.max(a.min(b));
            far = far.min(a.max(b));
        }
        (near <= far && near > 0.0).then_some(near)
    }
}

/// Renders frames of one scene.
pub struct Simulator<'a> {
    spec: &'a SceneSpec,
    /// Per camera, agent-frame ray directions with unit camera-z, row-major.
    rays: Vec<Vec<[f64; 3]>>,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a SceneSpec) -> Result<Self> {
        spec.validate()?;
        let (w, h) = (spec.rig.width, spec.rig.height);
        let rays = spec
            .rig
            .cameras
            .iter()
            .map(|cam| {
                let mut r = Vec::with_capacity(w * h);
                for v in 0..h {
                    for u in 0..w {
                        r.push(cam.ray(u as f64, v as f64));
                    }
                }
                r
            })
            .collect();
        Ok(Self { spec, rays })
    }

    pub fn spec(&self) -> &SceneSpec {
        self.spec
    }

    fn boxes(&self, t: f64, pose: &Pose) -> Vec<AgentBox> {
        self.spec.placements(t).iter().map(|p| AgentBox::new(p, pose)).collect()
    }

    /// Labeled depth images of every camera at frame `index`.
    pub fn render(&self, index: usize) -> Vec<CameraView> {
        let t = self.spec.time(index);
        let pose = self.spec.ego_pose(t);
        let boxes = self.boxes(t, &pose);
        self.spec
            .rig
            .cameras
            .iter()
            .zip(&self.rays)
            .map(|(cam, rays)| self.render_camera(cam, rays, &pose, &boxes))
            .collect()
    }

    fn render_camera(&self, cam: &Camera, rays: &[[f64; 3]], pose: &Pose, boxes: &[AgentBox]) -> CameraView {
        let (w, h) = (self.spec.rig.width, self.spec.rig.height);
        let origin = cam.translation();
        let mut image = SemanticImage::invalid(w, h);
        let mut depth = DepthMap::invalid(w, h);
        let mut zbuf = vec![f64::INFINITY; w * h];
        let mut labels: Vec<Option<SemanticClass>> = vec![None; w * h];
        for (i, d) in rays.iter().enumerate() {
            if d[1] > 0.0 {
                let lambda = -origin[1] / d[1];
                let x = origin[0] + lambda * d[0];
                let z = origin[2] + lambda * d[2];
                zbuf[i] = lambda;
                labels[i] = Some(self.spec.road.ground_class(pose.to_world(x, z)));
            }
        }
        for b in boxes {
            let (u0, u1, v0, v1) = pixel_bounds(cam, b, w, h);
            for v in v0..v1 {
                for u in u0..u1 {
                    let i = v * w + u;
                    if let Some(lambda) = b.intersect(origin, rays[i]) {
                        if lambda < zbuf[i] {
                            zbuf[i] = lambda;
                            labels[i] = Some(b.class);
                        }
                    }
                }
            }
        }
        for v in 0..h {
            for u in 0..w {
                let i = v * w + u;
                if let Some(c) = labels[i] {
                    image.set(u, v, Some(c));
                    depth.set(u, v, zbuf[i]);
                }
            }
        }
        CameraView { camera: *cam, image, depth }
    }

    /// Egomotion reported at frame `index`.
    pub fn egomotion(&self, index: usize) -> EgoSample {
        let (mut yaw_rate, mut velocity) = self.spec.ego_rates();
        if let Some(noise) = self.spec.ego_noise {
            let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(index as u64);
            if noise.yaw_rate_std > 0.0 {
                yaw_rate += Normal::new(0.0, noise.yaw_rate_std).expect("finite std").sample(&mut rng);
            }
            if noise.speed_std > 0.0 {
                velocity[1] += Normal::new(0.0, noise.speed_std).expect("finite std").sample(&mut rng);
            }
        }
        EgoSample { t: self.spec.time(index), yaw_rate, velocity }
    }

    /// Agent-centric top-down oracle at frame `index`: each cell takes the
    /// highest-priority class among everything whose footprint intersects it.
    pub fn topdown(&self, index: usize, geometry: &GridGeometry) -> Result<SemanticGrid> {
        geometry.validate()?;
        let t = self.spec.time(index);
        let pose = self.spec.ego_pose(t);
        let boxes = self.boxes(t, &pose);
        let half = 0.5 * geometry.cell_size as f64;
        let road = &self.spec.road;
        let mut grid = SemanticGrid::unknown(*geometry, t);
        for row in 0..geometry.height {
            for col in 0..geometry.width {
                let (cx, cz) = geometry.cell_center(col, row);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (dx, dz) in [(0.0, 0.0), (-half, -half), (-half, half), (half, -half), (half, half)] {
                    let o = road.offset_of(pose.to_world(cx + dx, cz + dz));
                    lo = lo.min(o);
                    hi = hi.max(o);
                }
                let mut best = if lo < road.left_edge() || hi > road.right_edge() {
                    SemanticClass::Sidewalk
                } else {
                    SemanticClass::Road
                };
                for b in &boxes {
                    if b.class.priority_key() > best.priority_key() && b.overlaps_square(cx, cz, half) {
                        best = b.class;
                    }
                }
                grid.set(col, row, best);
            }
        }
        Ok(grid)
    }

    pub fn frame(&self, index: usize, geometry: &GridGeometry) -> Result<FrameBundle> {
        Ok(FrameBundle {
            index,
            t: self.spec.time(index),
            views: self.render(index),
            ego: self.egomotion(index),
            ground_truth_topdown: self.topdown(index, geometry)?,
        })
    }
}

/// Pixel rectangle `[u0, u1) × [v0, v1)` that can contain the box.
fn pixel_bounds(cam: &Camera, b: &AgentBox, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let r = cam.rotation();
    let t = cam.translation();
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut behind = 0;
    for p in b.corners() {
        let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
        // Camera frame = Rᵀ·(p − t).
        let c: [f64; 3] = std::array::from_fn(|i| r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2]);
        if c[2] < NEAR_PLANE {
            behind += 1;
            continue;
        }
        let u = cam.fx * c[0] / c[2] + cam.u0;
        let v = cam.fy * c[1] / c[2] + cam.v0;
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    if behind == 8 {
        return (0, 0, 0, 0);
    }
    if behind > 0 {
        return (0, w, 0, h);
    }
    let clamp = |x: f64, n: usize| x.max(0.0).min(n as f64) as usize;
    (clamp(umin.floor(), w), clamp(umax.ceil() + 1.0, w), clamp(vmin.floor(), h), clamp(vmax.ceil() + 1.0, h))
}

/// Renders `n_frames` consecutive frames with oracle grids in `geometry`.
pub fn simulate(spec: &SceneSpec, n_frames: usize, geometry: &GridGeometry) -> Result<Vec<FrameBundle>> {
    let sim = Simulator::new(spec)?;
    (0..n_frames).map(|i| sim.frame(i, geometry)).collect()
}
