//! Cropping one camera into several virtual sensors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use semgrid_core::Crop;

use crate::error::{Error, Result};
use crate::simulate::{CameraView, FrameBundle};

/// Reference resolution the split boundaries are defined for.
const REF_WIDTH: f64 = 512.0;
const REF_HEIGHT: f64 = 256.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitMode {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Lower rows `[130, 256)`, upper rows `[0, 130)`.
    #[serde(rename = "1")]
    One,
    /// 40 px side margins, lower rows `[145, 256)`, upper rows `[0, 125)`.
    #[serde(rename = "2")]
    Two,
}

impl FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "0" => Ok(SplitMode::None),
            "1" | "split1" => Ok(SplitMode::One),
            "2" | "split2" => Ok(SplitMode::Two),
            other => Err(Error::Config(format!("unknown split {other:?}, expected none, 1 or 2"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::None => "none",
            SplitMode::One => "1",
            SplitMode::Two => "2",
        })
    }
}

impl SplitMode {
    pub fn n_sensors(self) -> usize {
        match self {
            SplitMode::None => 1,
            SplitMode::One | SplitMode::Two => 2,
        }
    }

    /// Sensor crops for a `width × height` image, lower sensor first.
    /// `None` means the full image.
    pub fn crops(self, width: usize, height: usize) -> Vec<Option<Crop>> {
        let row = |r: f64| ((r * height as f64 / REF_HEIGHT).round() as usize).min(height);
        let col = |c: f64| ((c * width as f64 / REF_WIDTH).round() as usize).min(width);
        match self {
            SplitMode::None => vec![None],
            SplitMode::One => {
                let cut = row(130.0);
                vec![
                    Some(Crop { u_min: 0, u_max: width, v_min: cut, v_max: height }),
                    Some(Crop { u_min: 0, u_max: width, v_min: 0, v_max: cut }),
                ]
            }
            SplitMode::Two => {
                let margin = col(40.0);
                let (u_min, u_max) = (margin, width.saturating_sub(margin));
                vec![
                    Some(Crop { u_min, u_max, v_min: row(145.0), v_max: height }),
                    Some(Crop { u_min, u_max, v_min: 0, v_max: row(125.0) }),
                ]
            }
        }
    }
}

/// Replaces a single-camera bundle's view with one cropped view per sensor.
pub fn apply_split(bundle: &FrameBundle, mode: SplitMode) -> Result<FrameBundle> {
    let [view] = bundle.views.as_slice() else {
        return Err(Error::Config(format!("splits need exactly one camera, got {}", bundle.views.len())));
    };
    let views = mode
        .crops(view.image.width, view.image.height)
        .into_iter()
        .map(|crop| CameraView { camera: view.camera.with_crop(crop), ..view.clone() })
        .collect();
    Ok(FrameBundle { views, ..bundle.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_resolution_boundaries() {
        let c = SplitMode::One.crops(512, 256);
        assert_eq!(c[0], Some(Crop { u_min: 0, u_max: 512, v_min: 130, v_max: 256 }));
        assert_eq!(c[1], Some(Crop { u_min: 0, u_max: 512, v_min: 0, v_max: 130 }));
        let c = SplitMode::Two.crops(512, 256);
        assert_eq!(c[0], Some(Crop { u_min: 40, u_max: 472, v_min: 145, v_max: 256 }));
        assert_eq!(c[1], Some(Crop { u_min: 40, u_max: 472, v_min: 0, v_max: 125 }));
    }

    #[test]
    fn split_two_leaves_blind_band() {
        let crops: Vec<Crop> = SplitMode::Two.crops(512, 256).into_iter().flatten().collect();
        for v in 125..145 {
            assert!(crops.iter().all(|c| !c.contains(256, v)));
        }
        assert!(crops.iter().any(|c| c.contains(256, 124)));
        assert!(crops.iter().any(|c| c.contains(256, 145)));
    }

    #[test]
    fn split_one_partitions_any_resolution() {
        for (w, h) in [(512, 256), (256, 128), (100, 37)] {
            let crops: Vec<Crop> = SplitMode::One.crops(w, h).into_iter().flatten().collect();
            for v in 0..h {
                for u in 0..w {
                    assert_eq!(crops.iter().filter(|c| c.contains(u, v)).count(), 1);
                }
            }
        }
    }

    #[test]
    fn crops_scale_with_resolution() {
        let c = SplitMode::Two.crops(256, 128);
        assert_eq!(c[0], Some(Crop { u_min: 20, u_max: 236, v_min: 73, v_max: 128 }));
        assert_eq!("2".parse::<SplitMode>().unwrap(), SplitMode::Two);
        assert!("3".parse::<SplitMode>().is_err());
    }
}
