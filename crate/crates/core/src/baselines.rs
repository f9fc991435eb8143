//! Model-driven prediction baselines.

use serde::{Deserialize, Serialize};

use crate::alignment::translate_to;
use crate::class::SemanticClass;
use crate::dataset::GridSequence;
use crate::egomotion::EgomotionTrack;
use crate::error::{Error, Result};
use crate::grid::SemanticGrid;

/// Repeats the last input grid.
pub fn bl_nt(inputs: &[SemanticGrid]) -> Result<SemanticGrid> {
    inputs.last().cloned().ok_or_else(|| Error::InvalidArgument("baseline needs at least one input grid".into()))
}

/// Translates the last input grid by the egomotion between `t_n` and `tau`.
/// `track` must start at the first input frame, whose orientation the grids
/// are aligned to.
pub fn bl_dc(inputs: &[SemanticGrid], track: &EgomotionTrack, t_n: f64, tau: f64) -> Result<SemanticGrid> {
    let last = bl_nt(inputs)?;
    let aligned = track.aligned(track.start())?;
    translate_to(&last, &aligned, t_n, tau)
}

/// Lower sensor's class wherever it knows the cell, the upper sensor's
/// otherwise.
pub fn bl_overlay(lower: &SemanticGrid, upper: &SemanticGrid) -> Result<SemanticGrid> {
    lower.ensure_same_geometry(upper)?;
    let mut out = lower.clone();
    for (o, &u) in out.cells.iter_mut().zip(&upper.cells) {
        if *o == SemanticClass::Unknown {
            *o = u;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Last frame, no translation.
    Nt,
    /// Last frame translated by egomotion.
    Dc,
    /// Sensor overlay, then translated by egomotion.
    Sp,
}

impl Baseline {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nt" => Ok(Baseline::Nt),
            "dc" => Ok(Baseline::Dc),
            "sp" => Ok(Baseline::Sp),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Nt => "nt",
            Baseline::Dc => "dc",
            Baseline::Sp => "sp",
        }
    }

    /// Prediction for `seq` at `horizon`. Multi-sensor sequences are always
    /// overlaid first (sensor 0 has precedence).
    pub fn predict(self, seq: &GridSequence, horizon: usize) -> Result<SemanticGrid> {
        let tau = seq.target(horizon)?.tau;
        let mut frames: Vec<SemanticGrid> = Vec::with_capacity(seq.n_frames());
        for i in 0..seq.n_frames() {
            let mut g = seq.sensors[0][i].clone();
            for sensor in &seq.sensors[1..] {
                g = bl_overlay(&g, &sensor[i])?;
            }
            frames.push(g);
        }
        match self {
            Baseline::Nt => bl_nt(&frames),
            Baseline::Dc | Baseline::Sp => bl_dc(&frames, &seq.track, seq.last_time(), tau),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    fn grid(seed: u64) -> SemanticGrid {
        let geo = GridGeometry::square(6, 6.0);
        let mut s = seed;
        let cells = (0..36)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                SemanticClass::ALL[((s >> 33) % 10) as usize]
            })
            .collect();
        SemanticGrid::from_cells(geo, cells, 0.0).unwrap()
    }

    #[test]
    fn nt_returns_last() {
        let a = grid(1);
        let b = grid(2);
        assert_eq!(bl_nt(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(bl_nt(&[a, b.clone()]).unwrap(), b);
        assert!(bl_nt(&[]).is_err());
    }

    #[test]
    fn dc_zero_shift_equals_nt() {
        let inputs = [grid(3), grid(4)];
        let track = EgomotionTrack::constant(&[0.0, 0.3, 0.6], 0.0, [0.0, 5.0]).unwrap();
        assert_eq!(bl_dc(&inputs, &track, 0.3, 0.3).unwrap().cells, bl_nt(&inputs).unwrap().cells);
        let still = EgomotionTrack::constant(&[0.0, 0.3, 0.6], 0.0, [0.0, 0.0]).unwrap();
        assert_eq!(bl_dc(&inputs, &still, 0.3, 0.6).unwrap().cells, bl_nt(&inputs).unwrap().cells);
    }

    #[test]
    fn dc_forward_shift_two_cells() {
        let geo = GridGeometry::square(64, 50.0);
        let mut g = SemanticGrid::unknown(geo, 0.0);
        g.set(10, 10, SemanticClass::Car);
        let track = EgomotionTrack::constant(&[0.0, 0.3], 0.0, [0.0, 5.0]).unwrap();
        let out = bl_dc(&[g], &track, 0.0, 0.3).unwrap();
        // 1.5 m / 0.78125 m = 1.92 → 2 cells.
        assert_eq!(out.get(10, 12), SemanticClass::Car);
        assert_eq!(out.count(SemanticClass::Car), 1);
    }

    #[test]
    fn overlay_precedence() {
        let a = grid(5);
        let u = SemanticGrid::unknown(a.geometry, 0.0);
        assert_eq!(bl_overlay(&a, &u).unwrap(), a);
        assert_eq!(bl_overlay(&u, &a).unwrap().cells, a.cells);
        let b = grid(6);
        let o = bl_overlay(&a, &b).unwrap();
        for i in 0..36 {
            let want = if a.cells[i] == SemanticClass::Unknown { b.cells[i] } else { a.cells[i] };
            assert_eq!(o.cells[i], want);
        }
    }
}
