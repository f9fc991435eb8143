//! Orientation alignment, discretization, temporal translation and sequence
//! synchronization of semantic grids.

use serde::{Deserialize, Serialize};

use crate::class::SemanticClass;
use crate::egomotion::EgomotionTrack;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, SemanticGrid};
use crate::image::{DepthMap, SemanticImage};
use crate::morphology::{morphological_filter, MorphProfile};
use crate::projection::{project_to_pointcloud, CameraModel, GroundPoint, SemanticPointCloud};
use crate::scalar::Scalar;

/// Rotates every ground point by `alpha`:
/// `x' = x·cos α − z·sin α`, `z' = x·sin α + z·cos α`.
pub fn rotate_pointcloud<T: Scalar>(cloud: &SemanticPointCloud<T>, alpha: T) -> SemanticPointCloud<T> {
    let (s, c) = alpha.sin_cos();
    SemanticPointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| GroundPoint { x: c * p.x - s * p.z, z: s * p.x + c * p.z, class: p.class })
            .collect(),
        timestamp: cloud.timestamp,
    }
}

/// Rasterizes points into cells; when several classes hit one cell the
/// larger [`SemanticClass::priority_key`] wins. Out-of-grid points are
/// dropped and untouched cells stay unknown.
pub fn discretize<T: Scalar>(cloud: &SemanticPointCloud<T>, geometry: &GridGeometry) -> SemanticGrid {
    let mut grid = SemanticGrid::unknown(*geometry, cloud.timestamp);
    for p in &cloud.points {
        let Some((col, row)) = geometry.cell_of(p.x.to_f64_lossless(), p.z.to_f64_lossless()) else {
            continue;
        };
        let i = geometry.index(col, row);
        if p.class.priority_key() >= grid.cells[i].priority_key() {
            grid.cells[i] = p.class;
        }
    }
    grid
}

/// Integer cell shift for an agent displacement `q` (meters, aligned frame).
pub fn cell_shift(q: [f64; 2], cell_size: f32) -> (isize, isize) {
    let cs = cell_size as f64;
    ((q[0] / cs).round() as isize, (q[1] / cs).round() as isize)
}

/// Moves grid contents opposite to the agent displacement `q`, so that the
/// grid is centered on the agent's new position. Vacated cells are unknown.
pub fn translate_grid(grid: &SemanticGrid, q: [f64; 2]) -> SemanticGrid {
    let (kx, kz) = cell_shift(q, grid.geometry.cell_size);
    if kx == 0 && kz == 0 {
        return grid.clone();
    }
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    let mut out = SemanticGrid::unknown(grid.geometry, grid.timestamp);
    for row in 0..h {
        let src_row = row - kz;
        if src_row < 0 || src_row >= h {
            continue;
        }
        for col in 0..w {
            let src_col = col + kx;
            if src_col < 0 || src_col >= w {
                continue;
            }
            out.cells[(row * w + col) as usize] = grid.cells[(src_row * w + src_col) as usize];
        }
    }
    out
}

/// Settings for turning sensor frames into synchronized grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncOptions {
    pub geometry: GridGeometry,
    pub profile: MorphProfile,
    /// Apply the egomotion translation to `tau`; off reproduces the
    /// no-translation ablation.
    pub translate: bool,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self { geometry: GridGeometry::default(), profile: MorphProfile::stereo(), translate: true }
    }
}

/// One camera observation to be synchronized.
#[derive(Clone, Copy, Debug)]
pub struct SensorFrame<'a, T> {
    pub image: &'a SemanticImage,
    pub depth: &'a DepthMap,
    pub camera: CameraModel<T>,
    pub t: f64,
}

/// Rotate by the heading accumulated since `t0`, discretize and filter.
pub fn align_cloud<T: Scalar>(
    cloud: &SemanticPointCloud<T>,
    track: &EgomotionTrack,
    t0: f64,
    geometry: &GridGeometry,
    profile: &MorphProfile,
) -> Result<SemanticGrid> {
    let alpha = track.integrate_orientation(t0, cloud.timestamp)?;
    let rotated = rotate_pointcloud(cloud, T::of(alpha));
    morphological_filter(&discretize(&rotated, geometry), profile)
}

/// Translates an aligned grid recorded at `ti` to time `tau`. `aligned_track`
/// must already be expressed in the sequence's reference orientation
/// (see [`EgomotionTrack::aligned`]).
pub fn translate_to(grid: &SemanticGrid, aligned_track: &EgomotionTrack, ti: f64, tau: f64) -> Result<SemanticGrid> {
    let q = aligned_track.integrate_translation(ti, tau)?;
    let mut out = translate_grid(grid, q);
    out.timestamp = tau;
    Ok(out)
}

/// Builds `[g(t_1 → τ), …, g(t_n → τ)]`. The first frame fixes the reference
/// orientation.
pub fn synchronize_sequence<T: Scalar>(
    frames: &[SensorFrame<'_, T>],
    track: &EgomotionTrack,
    tau: f64,
    options: &SyncOptions,
) -> Result<Vec<SemanticGrid>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidArgument("no frames to synchronize".into()));
    };
    if frames.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidArgument("frame times must be strictly increasing".into()));
    }
    let last = frames[frames.len() - 1].t;
    if last > tau {
        return Err(Error::InvalidArgument(format!("last frame {last} is after tau {tau}")));
    }
    options.geometry.validate()?;
    let t0 = first.t;
    let aligned_track = track.aligned(t0)?;
    frames
        .iter()
        .map(|f| {
            let cloud = project_to_pointcloud(f.image, f.depth, &f.camera, f.t)?;
            let grid = align_cloud(&cloud, track, t0, &options.geometry, &options.profile)?;
            if options.translate {
                translate_to(&grid, &aligned_track, f.t, tau)
            } else {
                Ok(grid)
            }
        })
        .collect()
}

/// Cells that are not unknown, used in invariant checks.
pub fn known_classes(grid: &SemanticGrid) -> Vec<SemanticClass> {
    grid.cells.iter().copied().filter(|&c| c != SemanticClass::Unknown).collect()
}
