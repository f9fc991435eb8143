//! Choosing input and target frames inside a clip.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` inputs spaced `step` frames apart, with targets `h` steps after the
/// last input for each horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLayout {
    pub n: usize,
    pub step: usize,
    pub horizons: Vec<usize>,
}

impl SequenceLayout {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.step == 0 || self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("sequence length, step and horizons must be positive".into()));
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    /// Frames covered from the first input to the farthest target.
    pub fn span(&self) -> usize {
        self.target_frame(0, self.max_horizon()) + 1
    }

    pub fn input_frames(&self, offset: usize) -> Vec<usize> {
        (0..self.n).map(|k| offset + k * self.step).collect()
    }

    pub fn target_frame(&self, offset: usize, horizon: usize) -> usize {
        offset + self.n * self.step + (horizon - 1) * self.step
    }

    fn max_offset(&self, clip_frames: usize) -> Result<usize> {
        self.validate()?;
        let span = self.span();
        if clip_frames < span {
            return Err(Error::SequenceTooShort { frames: clip_frames, span });
        }
        Ok(clip_frames - span)
    }

    /// Non-overlapping sequences packed from the start of the clip.
    pub fn disjoint_offsets(&self, clip_frames: usize) -> Result<Vec<usize>> {
        let last = self.max_offset(clip_frames)?;
        Ok((0..=last).step_by(self.span()).collect())
    }

    /// Up to `count` distinct random offsets, sorted; sequences may overlap.
    pub fn overlapping_offsets(&self, clip_frames: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        let available = self.max_offset(clip_frames)? + 1;
        let mut out = index::sample(rng, available, count.min(available)).into_vec();
        out.sort_unstable();
        Ok(out)
    }
}
