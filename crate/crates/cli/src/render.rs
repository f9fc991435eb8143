//! PNG strips of inputs, prediction, target and certainty.

use std::path::Path;

use semgrid_core::render::RgbImage;
use semgrid_core::{certainty_map, PreparedSample, ProbabilisticGrid, SemanticGrid};

use crate::error::{io_err, CliError, Result};

/// Pixels per grid cell in rendered strips.
pub const SCALE: usize = 4;

pub fn upscale(img: &RgbImage, k: usize) -> RgbImage {
    let mut out = RgbImage::new(img.width * k, img.height * k, [0, 0, 0]);
    for y in 0..out.height {
        for x in 0..out.width {
            out.pixels[y * out.width + x] = img.pixel(x / k, y / k);
        }
    }
    out
}

/// Inputs as fed to the predictor, then the prediction, then the target
/// with masked cells painted white, and the certainty map when given.
pub fn strip(sample: &PreparedSample, prediction: &SemanticGrid, scores: Option<&ProbabilisticGrid<f32>>) -> RgbImage {
    let mut tiles: Vec<RgbImage> = sample.inputs.iter().map(RgbImage::from_grid).collect();
    tiles.push(RgbImage::from_grid(prediction));
    tiles.push(RgbImage::from_grid(&sample.target).overlay_mask(&sample.mask.mask));
    if let Some(p) = scores {
        let c: Vec<f64> = certainty_map(p).into_iter().map(f64::from).collect();
        tiles.push(RgbImage::heat(p.geometry.width, p.geometry.height, &c, 0.1));
    }
    let tiles: Vec<RgbImage> = tiles.iter().map(|t| upscale(t, SCALE)).collect();
    RgbImage::hstack(&tiles, 2 * SCALE)
}

pub fn write(img: &RgbImage, dir: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    img.write_png(dir.join(name)).map_err(|e| CliError::Data(format!("writing {name}: {e}")))
}
