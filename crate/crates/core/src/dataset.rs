//! Sequences of aligned grids with their targets, ready for training and
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::alignment::translate_to;
use crate::class::NUM_CLASSES;
use crate::egomotion::EgomotionTrack;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, SemanticGrid};
use crate::metrics::{loss_mask, LossMask};
use crate::scalar::Scalar;

/// Ground truth at `tau`, `horizon` steps after the last input frame.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonTarget {
    pub horizon: usize,
    pub tau: f64,
    pub grid: SemanticGrid,
}

/// One input sequence: per-sensor grids rotated into the orientation of the
/// first frame but not yet translated, plus one target per horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSequence {
    pub scene: u64,
    pub offset: usize,
    pub frame_times: Vec<f64>,
    /// `sensors[s][i]` is sensor `s` at `frame_times[i]`.
    pub sensors: Vec<Vec<SemanticGrid>>,
    pub targets: Vec<HorizonTarget>,
    /// Egomotion from the first input frame up to the last target.
    pub track: EgomotionTrack,
}

/// Network-ready view of a sequence for one horizon.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    /// Grids fed to the network, sensor-major.
    pub inputs: Vec<SemanticGrid>,
    pub target: SemanticGrid,
    pub mask: LossMask,
}

impl GridSequence {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn last_time(&self) -> f64 {
        self.frame_times[self.frame_times.len() - 1]
    }

    pub fn target(&self, horizon: usize) -> Result<&HorizonTarget> {
        self.targets
            .iter()
            .find(|t| t.horizon == horizon)
            .ok_or_else(|| Error::InvalidArgument(format!("sequence has no target for horizon {horizon}")))
    }

    /// Every sensor's grids translated to `tau`.
    pub fn synchronized(&self, tau: f64) -> Result<Vec<Vec<SemanticGrid>>> {
        let aligned = self.track.aligned(self.frame_times[0])?;
        self.sensors
            .iter()
            .map(|frames| {
                frames.iter().zip(&self.frame_times).map(|(g, &t)| translate_to(g, &aligned, t, tau)).collect()
            })
            .collect()
    }

    /// Inputs, target and loss mask for `horizon`. With `translate` off the
    /// inputs stay at their recording times; the mask is always computed from
    /// the translated grids so both variants are scored on the same cells.
    pub fn prepare(&self, horizon: usize, translate: bool, bottom_exclude: usize) -> Result<PreparedSample> {
        let target = self.target(horizon)?;
        let synced: Vec<SemanticGrid> = self.synchronized(target.tau)?.into_iter().flatten().collect();
        let refs: Vec<&SemanticGrid> = synced.iter().collect();
        let mask = loss_mask(&target.grid, &refs, bottom_exclude)?;
        let inputs = if translate { synced } else { self.sensors.iter().flatten().cloned().collect() };
        Ok(PreparedSample { inputs, target: target.grid.clone(), mask })
    }
}

/// Stacks grids as one-hot channels, channel-major (`[grid][class][row][col]`).
pub fn stack_one_hot<T: Scalar>(grids: &[SemanticGrid]) -> Vec<T> {
    let Some(first) = grids.first() else { return Vec::new() };
    let hw = first.geometry.len();
    let mut out = vec![T::zero(); grids.len() * NUM_CLASSES * hw];
    for (g, grid) in grids.iter().enumerate() {
        for (i, &c) in grid.cells.iter().enumerate() {
            out[(g * NUM_CLASSES + c.index()) * hw + i] = T::one();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSequenceDataset {
    pub geometry: GridGeometry,
    pub n_sensors: usize,
    pub n_frames: usize,
    /// Frames between consecutive inputs.
    pub step: usize,
    pub horizons: Vec<usize>,
    pub train: Vec<GridSequence>,
    pub validation: Vec<GridSequence>,
}

impl GridSequenceDataset {
    pub fn split(&self, split: Split) -> &[GridSequence] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
        }
    }

    /// Channels of the stacked network input.
    pub fn in_channels(&self) -> usize {
        self.n_sensors * self.n_frames * NUM_CLASSES
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::SemanticClass;

    fn seq() -> GridSequence {
        let geo = GridGeometry::square(8, 8.0);
        let mut g = SemanticGrid::unknown(geo, 0.0);
        g.set(4, 2, SemanticClass::Car);
        let mut g2 = g.clone();
        g2.timestamp = 0.5;
        let times = [0.0, 0.5, 1.0, 1.5];
        let track = EgomotionTrack::constant(&times, 0.0, [0.0, 2.0]).unwrap();
        let mut target = SemanticGrid::unknown(geo, 1.0);
        target.set(4, 4, SemanticClass::Car);
        GridSequence {
            scene: 0,
            offset: 0,
            frame_times: vec![0.0, 0.5],
            sensors: vec![vec![g, g2]],
            targets: vec![HorizonTarget { horizon: 1, tau: 1.0, grid: target }],
            track,
        }
    }

    #[test]
    fn synchronized_translates_by_integrated_motion() {
        let s = seq();
        let synced = s.synchronized(1.0).unwrap();
        // 2 m forward in 1 s from t=0 → two rows towards the agent.
        assert_eq!(synced[0][0].get(4, 4), SemanticClass::Car);
        assert_eq!(synced[0][1].get(4, 3), SemanticClass::Car);
        let p = s.prepare(1, true, 0).unwrap();
        assert_eq!(p.inputs.len(), 2);
        // Cell (4,3) is seen by an input but unknown in the target.
        assert!(p.mask.mask.get(4, 3));
        let nt = s.prepare(1, false, 0).unwrap();
        assert_eq!(nt.inputs[0].get(4, 2), SemanticClass::Car);
        assert_eq!(nt.mask, p.mask);
        assert!(s.prepare(2, true, 0).is_err());
    }

    #[test]
    fn one_hot_stack_layout() {
        let s = seq();
        let x: Vec<f32> = stack_one_hot(&s.sensors[0]);
        assert_eq!(x.len(), 2 * NUM_CLASSES * 64);
        let idx = |g: usize, c: usize, i: usize| (g * NUM_CLASSES + c) * 64 + i;
        assert_eq!(x[idx(0, 6, 2 * 8 + 4)], 1.0);
        assert_eq!(x[idx(0, 0, 2 * 8 + 4)], 0.0);
        assert_eq!(x[idx(1, 0, 0)], 1.0);
        let per_cell: f32 = (0..2 * NUM_CLASSES).map(|c| x[c * 64 + 5]).sum();
        assert_eq!(per_cell, 2.0);
    }
}
