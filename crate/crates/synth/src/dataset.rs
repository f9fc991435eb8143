//! Building grid-sequence datasets from simulated clips and storing them as a
//! directory of grid files plus a JSON manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use semgrid_core::io::{read_grid, write_grid};
use semgrid_core::{
    align_cloud, project_to_pointcloud, Camera, EgoSample, EgomotionTrack, GridGeometry, GridSequence,
    GridSequenceDataset, HorizonTarget, MorphProfile, PointCloud, SemanticGrid, Split,
};

use crate::error::{io_err, Error, Result};
use crate::generate::{generate_scene, SceneParams};
use crate::sampling::SequenceLayout;
use crate::simulate::{FrameBundle, Simulator};
use crate::split::SplitMode;

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "semgrid-dataset";
const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub cells: usize,
    /// Side length in meters.
    pub extent: f32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { cells: 64, extent: 50.0 }
    }
}

impl GridSpec {
    pub fn geometry(&self) -> GridGeometry {
        GridGeometry::square(self.cells, self.extent)
    }
}

/// Morphology given by preset name or explicit kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MorphConfig {
    Named(String),
    Custom(MorphProfile),
}

impl Default for MorphConfig {
    fn default() -> Self {
        MorphConfig::Named("closing".into())
    }
}

impl MorphConfig {
    pub fn profile(&self) -> Result<MorphProfile> {
        let p = match self {
            MorphConfig::Named(name) => MorphProfile::named(name)?,
            MorphConfig::Custom(p) => *p,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub clip_frames: usize,
    pub n: usize,
    pub step: usize,
    pub horizons: Vec<usize>,
    pub train_scenes: usize,
    /// Random, possibly overlapping sequences drawn per training clip.
    pub train_per_scene: usize,
    pub validation_scenes: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            clip_frames: 30,
            n: 2,
            step: 5,
            horizons: vec![1],
            train_scenes: 100,
            train_per_scene: 10,
            validation_scenes: 50,
        }
    }
}

impl SamplingSpec {
    /// Validation sequences carry every horizon; training only the first.
    pub fn layouts(&self) -> (SequenceLayout, SequenceLayout) {
        let train = SequenceLayout { n: self.n, step: self.step, horizons: vec![self.horizons[0]] };
        let validation = SequenceLayout { n: self.n, step: self.step, horizons: self.horizons.clone() };
        (train, validation)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub seed: u64,
    pub scene: SceneParams,
    pub grid: GridSpec,
    pub morphology: MorphConfig,
    pub split: SplitMode,
    pub sampling: SamplingSpec,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.geometry().validate()?;
        self.morphology.profile()?;
        if self.sampling.horizons.is_empty() {
            return Err(Error::Config("at least one horizon is required".into()));
        }
        let (train, val) = self.sampling.layouts();
        train.validate()?;
        val.validate()?;
        if self.sampling.clip_frames < val.span() {
            return Err(Error::SequenceTooShort { frames: self.sampling.clip_frames, span: val.span() });
        }
        Ok(())
    }
}

/// Point clouds of one frame: one per sensor and one for the full camera.
#[derive(Clone, Debug)]
pub struct FrameClouds {
    pub sensors: Vec<PointCloud>,
    pub full: PointCloud,
}

/// Distance beyond which a point can never land in the grid, whatever the
/// rotation.
fn grid_reach(geometry: &GridGeometry) -> f64 {
    let cs = geometry.cell_size as f64;
    let dx = geometry.agent_col.max(geometry.width - 1 - geometry.agent_col) as f64 + 0.5;
    let dz = geometry.agent_row.max(geometry.height - 1 - geometry.agent_row) as f64 + 0.5;
    cs * dx.hypot(dz) + cs
}

impl FrameClouds {
    /// Projects a single-camera bundle, cropping per sensor for `split`.
    pub fn from_bundle(bundle: &FrameBundle, split: SplitMode, geometry: &GridGeometry) -> Result<Self> {
        let [view] = bundle.views.as_slice() else {
            return Err(Error::Config(format!("expected one camera, got {}", bundle.views.len())));
        };
        let reach2 = grid_reach(geometry).powi(2);
        let project = |cam: &Camera| -> Result<PointCloud> {
            let mut cloud = project_to_pointcloud(&view.image, &view.depth, cam, bundle.t)?;
            cloud.points.retain(|p| p.x * p.x + p.z * p.z <= reach2);
            Ok(cloud)
        };
        let full = project(&view.camera.with_crop(None))?;
        let sensors = if split == SplitMode::None {
            vec![full.clone()]
        } else {
            split
                .crops(view.image.width, view.image.height)
                .into_iter()
                .map(|crop| project(&view.camera.with_crop(crop)))
                .collect::<Result<_>>()?
        };
        Ok(Self { sensors, full })
    }
}

/// Everything needed to turn frames of one clip into sequences.
pub struct SequenceBuilder<'a> {
    pub geometry: GridGeometry,
    pub profile: MorphProfile,
    pub layout: &'a SequenceLayout,
    pub scene: u64,
}

impl SequenceBuilder<'_> {
    /// Frames whose clouds a sequence at `offset` reads.
    pub fn needed_frames(&self, offset: usize) -> Vec<usize> {
        let mut v = self.layout.input_frames(offset);
        v.extend(self.layout.horizons.iter().map(|&h| self.layout.target_frame(offset, h)));
        v
    }

    /// Grids of one sequence. `ego[i]` is the egomotion of clip frame `i`.
    pub fn build(
        &self,
        offset: usize,
        clouds: &BTreeMap<usize, FrameClouds>,
        ego: &[EgoSample],
    ) -> Result<GridSequence> {
        let last = self.layout.target_frame(offset, self.layout.max_horizon());
        if last >= ego.len() {
            return Err(Error::SequenceTooShort { frames: ego.len(), span: last + 1 });
        }
        let track = EgomotionTrack::new(ego[offset..=last].to_vec())?;
        let inputs = self.layout.input_frames(offset);
        let t0 = ego[offset].t;
        let get = |i: usize| clouds.get(&i).ok_or_else(|| Error::Dataset(format!("frame {i} was not rendered")));
        let n_sensors = get(inputs[0])?.sensors.len();
        let mut sensors = vec![Vec::with_capacity(inputs.len()); n_sensors];
        for &i in &inputs {
            for (s, cloud) in get(i)?.sensors.iter().enumerate() {
                sensors[s].push(align_cloud(cloud, &track, t0, &self.geometry, &self.profile)?);
            }
        }
        let mut targets = Vec::with_capacity(self.layout.horizons.len());
        for &h in &self.layout.horizons {
            let i = self.layout.target_frame(offset, h);
            let grid = align_cloud(&get(i)?.full, &track, t0, &self.geometry, &self.profile)?;
            targets.push(HorizonTarget { horizon: h, tau: ego[i].t, grid });
        }
        Ok(GridSequence {
            scene: self.scene,
            offset,
            frame_times: inputs.iter().map(|&i| ego[i].t).collect(),
            sensors,
            targets,
            track,
        })
    }
}

/// Sequences from already simulated frames of one clip. With `overlap` up to
/// `count` random offsets are drawn with `seed`; otherwise disjoint offsets
/// are packed from the clip start.
#[allow(clippy::too_many_arguments)]
pub fn sample_sequences(
    frames: &[FrameBundle],
    layout: &SequenceLayout,
    split: SplitMode,
    overlap: bool,
    count: usize,
    seed: u64,
    geometry: &GridGeometry,
    profile: &MorphProfile,
) -> Result<Vec<GridSequence>> {
    let offsets = if overlap {
        layout.overlapping_offsets(frames.len(), count, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else {
        layout.disjoint_offsets(frames.len())?
    };
    let builder = SequenceBuilder { geometry: *geometry, profile: *profile, layout, scene: seed };
    let needed: BTreeSet<usize> = offsets.iter().flat_map(|&o| builder.needed_frames(o)).collect();
    let clouds = needed
        .into_iter()
        .map(|i| Ok((i, FrameClouds::from_bundle(&frames[i], split, geometry)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let ego: Vec<EgoSample> = frames.iter().map(|f| f.ego).collect();
    offsets.iter().map(|&o| builder.build(o, &clouds, &ego)).collect()
}

/// Stateless seed derivation (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn clip_sequences(
    config: &DatasetConfig,
    layout: &SequenceLayout,
    scene_seed: u64,
    offsets: &[usize],
) -> Result<Vec<GridSequence>> {
    let spec = generate_scene(&config.scene, scene_seed);
    let sim = Simulator::new(&spec)?;
    let geometry = config.grid.geometry();
    let builder = SequenceBuilder { geometry, profile: config.morphology.profile()?, layout, scene: scene_seed };
    let needed: BTreeSet<usize> = offsets.iter().flat_map(|&o| builder.needed_frames(o)).collect();
    let mut clouds = BTreeMap::new();
    for i in needed {
        let bundle = FrameBundle {
            index: i,
            t: spec.time(i),
            views: sim.render(i),
            ego: sim.egomotion(i),
            ground_truth_topdown: SemanticGrid::unknown(geometry, spec.time(i)),
        };
        clouds.insert(i, FrameClouds::from_bundle(&bundle, config.split, &geometry)?);
    }
    let ego: Vec<EgoSample> = (0..config.sampling.clip_frames).map(|i| sim.egomotion(i)).collect();
    offsets.iter().map(|&o| builder.build(o, &clouds, &ego)).collect()
}

/// Simulates every clip of the configuration and samples its sequences.
/// `progress` is called after each clip with `(done, total)`.
pub fn build_dataset(config: &DatasetConfig, mut progress: impl FnMut(usize, usize)) -> Result<GridSequenceDataset> {
    config.validate()?;
    let s = &config.sampling;
    let (train_layout, val_layout) = s.layouts();
    let total = s.train_scenes + s.validation_scenes;
    let mut train = Vec::new();
    for i in 0..s.train_scenes {
        let scene_seed = derive_seed(config.seed, 0, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2, i as u64));
        let offsets = train_layout.overlapping_offsets(s.clip_frames, s.train_per_scene, &mut rng)?;
        train.extend(clip_sequences(config, &train_layout, scene_seed, &offsets)?);
        progress(i + 1, total);
    }
    let mut validation = Vec::new();
    for i in 0..s.validation_scenes {
        let scene_seed = derive_seed(config.seed, 1, i as u64);
        let offsets = val_layout.disjoint_offsets(s.clip_frames)?;
        validation.extend(clip_sequences(config, &val_layout, scene_seed, &offsets)?);
        progress(s.train_scenes + i + 1, total);
    }
    Ok(GridSequenceDataset {
        geometry: config.grid.geometry(),
        n_sensors: config.split.n_sensors(),
        n_frames: s.n,
        step: s.step,
        horizons: s.horizons.clone(),
        train,
        validation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub horizon: usize,
    pub tau: f64,
    pub grid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: usize,
    pub split: Split,
    pub scene: u64,
    pub offset: usize,
    pub frame_times: Vec<f64>,
    pub egomotion: EgomotionTrack,
    /// `inputs[sensor][frame]`, paths relative to the dataset directory.
    pub inputs: Vec<Vec<String>>,
    pub targets: Vec<TargetEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: DatasetConfig,
    pub geometry: GridGeometry,
    pub n_sensors: usize,
    pub n_frames: usize,
    pub step: usize,
    pub horizons: Vec<usize>,
    /// Virtual sensor cameras, in input order.
    pub cameras: Vec<Camera>,
    /// Camera the targets are generated from.
    pub target_camera: Camera,
    pub sequences: Vec<SequenceEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::Dataset(format!("unsupported manifest {} v{}", m.format, m.version)));
        }
        Ok(m)
    }
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Validation => "validation",
    }
}

/// Writes grids under `grids/` and the manifest. Existing files are replaced.
pub fn write_dataset(dir: &Path, config: &DatasetConfig, dataset: &GridSequenceDataset) -> Result<Manifest> {
    let rig = config.scene.rig;
    let target_camera = rig.camera();
    let cameras = config.split.crops(rig.width, rig.height).into_iter().map(|c| target_camera.with_crop(c)).collect();
    let mut sequences = Vec::new();
    for split in [Split::Train, Split::Validation] {
        let sub = Path::new("grids").join(split_name(split));
        fs::create_dir_all(dir.join(&sub)).map_err(io_err(dir.join(&sub)))?;
        for seq in dataset.split(split) {
            let id = sequences.len();
            let write = |name: String, grid: &SemanticGrid| -> Result<String> {
                let rel = sub.join(name);
                write_grid(grid, dir.join(&rel))?;
                Ok(rel.to_string_lossy().replace('\\', "/"))
            };
            let mut inputs = Vec::with_capacity(seq.sensors.len());
            for (s, frames) in seq.sensors.iter().enumerate() {
                inputs.push(
                    frames
                        .iter()
                        .enumerate()
                        .map(|(f, g)| write(format!("{id:06}_s{s}_f{f}.sgrd"), g))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            let targets = seq
                .targets
                .iter()
                .map(|t| {
                    Ok(TargetEntry {
                        horizon: t.horizon,
                        tau: t.tau,
                        grid: write(format!("{id:06}_h{}.sgrd", t.horizon), &t.grid)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sequences.push(SequenceEntry {
                id,
                split,
                scene: seq.scene,
                offset: seq.offset,
                frame_times: seq.frame_times.clone(),
                egomotion: seq.track.clone(),
                inputs,
                targets,
            });
        }
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        config: config.clone(),
        geometry: dataset.geometry,
        n_sensors: dataset.n_sensors,
        n_frames: dataset.n_frames,
        step: dataset.step,
        horizons: dataset.horizons.clone(),
        cameras,
        target_camera,
        sequences,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json { path: path.clone(), source })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// Loads a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(Manifest, GridSequenceDataset)> {
    let manifest = Manifest::read(dir)?;
    let load = |rel: &str| -> Result<SemanticGrid> {
        let g = read_grid(dir.join(rel))?;
        if g.geometry != manifest.geometry {
            return Err(Error::Dataset(format!("{rel}: grid geometry differs from the manifest")));
        }
        Ok(g)
    };
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for e in &manifest.sequences {
        if e.inputs.len() != manifest.n_sensors || e.inputs.iter().any(|f| f.len() != manifest.n_frames) {
            return Err(Error::Dataset(format!("sequence {} has the wrong number of input grids", e.id)));
        }
        let seq = GridSequence {
            scene: e.scene,
            offset: e.offset,
            frame_times: e.frame_times.clone(),
            sensors: e
                .inputs
                .iter()
                .map(|frames| frames.iter().map(|p| load(p)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
            targets: e
                .targets
                .iter()
                .map(|t| Ok(HorizonTarget { horizon: t.horizon, tau: t.tau, grid: load(&t.grid)? }))
                .collect::<Result<_>>()?,
            track: e.egomotion.clone(),
        };
        match e.split {
            Split::Train => train.push(seq),
            Split::Validation => validation.push(seq),
        }
    }
    let dataset = GridSequenceDataset {
        geometry: manifest.geometry,
        n_sensors: manifest.n_sensors,
        n_frames: manifest.n_frames,
        step: manifest.step,
        horizons: manifest.horizons.clone(),
        train,
        validation,
    };
    Ok((manifest, dataset))
}
