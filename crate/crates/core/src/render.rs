//! PNG rendering of grids, masks and certainty maps.

use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;
use crate::grid::{Mask, ProbabilisticGrid, SemanticGrid};
use crate::scalar::Scalar;

/// Plain 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    /// One pixel per cell, colored by class.
    pub fn from_grid(grid: &SemanticGrid) -> Self {
        Self { width: grid.width(), height: grid.height(), pixels: grid.cells.iter().map(|c| c.color()).collect() }
    }

    /// Paints masked cells white.
    pub fn overlay_mask(mut self, mask: &Mask) -> Self {
        for (p, &m) in self.pixels.iter_mut().zip(&mask.bits) {
            if m {
                *p = [255, 255, 255];
            }
        }
        self
    }

    /// Green (uncertain) to red (certain) ramp over values in `[lo, 1]`.
    pub fn heat(width: usize, height: usize, values: &[f64], lo: f64) -> Self {
        let pixels = values
            .iter()
            .map(|&v| {
                let t = ((v - lo) / (1.0 - lo)).clamp(0.0, 1.0);
                [(255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8, 0]
            })
            .collect();
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Side-by-side concatenation separated by `gap` gray columns.
    pub fn hstack(images: &[RgbImage], gap: usize) -> Self {
        let height = images.iter().map(|i| i.height).max().unwrap_or(0);
        let width = images.iter().map(|i| i.width).sum::<usize>() + gap * images.len().saturating_sub(1);
        let mut out = RgbImage::new(width, height, [128, 128, 128]);
        let mut x0 = 0;
        for img in images {
            for y in 0..img.height {
                for x in 0..img.width {
                    out.pixels[y * width + x0 + x] = img.pixel(x, y);
                }
            }
            x0 += img.width + gap;
        }
        out
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        let data: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        writer.write_image_data(&data)?;
        writer.finish()?;
        Ok(())
    }
}

/// Writes one pixel per cell using the class color table.
pub fn render_png(grid: &SemanticGrid, path: impl AsRef<Path>) -> Result<()> {
    RgbImage::from_grid(grid).write_png(path)
}

/// Renders the argmax class of every cell.
pub fn render_probabilistic_png<T: Scalar>(grid: &ProbabilisticGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    render_png(&grid.argmax(0.0), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::SemanticClass;
    use crate::grid::GridGeometry;

    fn decode(path: &Path) -> (usize, usize, Vec<u8>) {
        let decoder = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info.width as usize, info.height as usize, buf)
    }

    #[test]
    fn pixels_follow_color_table() {
        let geo = GridGeometry::square(3, 3.0);
        let mut grid = SemanticGrid::unknown(geo, 0.0);
        grid.set(0, 0, SemanticClass::Road);
        grid.set(1, 0, SemanticClass::Sidewalk);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        render_png(&grid, &path).unwrap();
        let (w, h, buf) = decode(&path);
        assert_eq!((w, h), (3, 3));
        assert_eq!(&buf[0..3], &[128, 64, 128]);
        assert_eq!(&buf[3..6], &[244, 32, 232]);
        assert_eq!(&buf[6..9], &[0, 0, 0]);
    }

    #[test]
    fn probabilistic_renders_argmax() {
        let geo = GridGeometry::square(2, 2.0);
        let grid = SemanticGrid::filled(geo, SemanticClass::Road, 0.0);
        let p = ProbabilisticGrid::<f32>::one_hot(&grid);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        render_probabilistic_png(&p, &path).unwrap();
        let (_, _, buf) = decode(&path);
        assert!(buf.chunks(3).all(|px| px == [128, 64, 128]));
    }

    #[test]
    fn unwritable_path_errors() {
        let grid = SemanticGrid::unknown(GridGeometry::square(2, 2.0), 0.0);
        assert!(render_png(&grid, "/nonexistent-dir/x/y.png").is_err());
    }
}
