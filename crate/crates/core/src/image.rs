//! Per-pixel semantic labels and metric depth.

use crate::class::SemanticClass;
use crate::error::{Error, Result};

/// Label byte for pixels that must never be projected (sky, out-of-taxonomy).
pub const INVALID_LABEL: u8 = 255;

/// Argmax-collapsed semantic segmentation, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticImage {
    pub width: usize,
    pub height: usize,
    labels: Vec<u8>,
}

impl SemanticImage {
    /// Image where every pixel is invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![INVALID_LABEL; width * height] }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} labels for {width}x{height} image", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l != INVALID_LABEL && SemanticClass::from_id(l).is_none()) {
            return Err(Error::InvalidClass(bad));
        }
        Ok(Self { width, height, labels })
    }

    #[inline]
    pub fn label(&self, u: usize, v: usize) -> Option<SemanticClass> {
        SemanticClass::from_id(self.labels[v * self.width + u])
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, class: Option<SemanticClass>) {
        self.labels[v * self.width + u] = class.map_or(INVALID_LABEL, |c| c.id());
    }

    pub fn raw(&self) -> &[u8] {
        &self.labels
    }
}

/// Metric z-depth along the optical axis, row-major. Invalid pixels hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    depth: Vec<f64>,
}

impl DepthMap {
    pub const INVALID: f64 = f64::NAN;

    pub fn invalid(width: usize, height: usize) -> Self {
        Self { width, height, depth: vec![Self::INVALID; width * height] }
    }

    pub fn from_values(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} depths for {width}x{height} image", depth.len())));
        }
        Ok(Self { width, height, depth })
    }

    #[inline]
    pub fn is_valid(d: f64) -> bool {
        d.is_finite() && d > 0.0
    }

    /// Depth at a pixel, `None` when invalid.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.depth[v * self.width + u];
        Self::is_valid(d).then_some(d)
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        self.depth[v * self.width + u] = d;
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_validated() {
        assert!(SemanticImage::from_labels(2, 1, vec![1, 255]).is_ok());
        assert!(matches!(SemanticImage::from_labels(2, 1, vec![1, 12]), Err(Error::InvalidClass(12))));
        assert!(SemanticImage::from_labels(2, 2, vec![1, 2]).is_err());
    }

    #[test]
    fn depth_validity() {
        let mut d = DepthMap::invalid(2, 1);
        assert_eq!(d.get(0, 0), None);
        d.set(0, 0, 3.0);
        assert_eq!(d.get(0, 0), Some(3.0));
        d.set(1, 0, -1.0);
        assert_eq!(d.get(1, 0), None);
        d.set(1, 0, f64::INFINITY);
        assert_eq!(d.get(1, 0), None);
    }
}
