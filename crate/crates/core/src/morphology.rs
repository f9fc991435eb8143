//! Class-wise binary morphology on semantic grids.
//!
//! Each class is filtered as a binary mask by the sequence dilate, erode,
//! erode, dilate with square structuring elements, then the masks are painted
//! back in ascending priority so higher-priority classes win overlaps.
//! A `k × k` element covers offsets `-(k/2) ..= k-1-k/2` on each axis;
//! out-of-grid neighbors are ignored.

use serde::{Deserialize, Serialize};

use crate::class::{Category, SemanticClass};
use crate::error::{Error, Result};
use crate::grid::{Mask, SemanticGrid};

/// Kernel sizes `[dilate, erode, erode, dilate]` per category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphProfile {
    pub static_kernels: [usize; 4],
    pub small_static_kernels: [usize; 4],
    pub vehicle_kernels: [usize; 4],
    pub small_dynamic_kernels: [usize; 4],
}

impl MorphProfile {
    pub fn uniform(static_kernels: [usize; 4], others: [usize; 4]) -> Self {
        Self { static_kernels, small_static_kernels: others, vehicle_kernels: others, small_dynamic_kernels: others }
    }

    /// No-op filtering.
    pub fn identity() -> Self {
        Self::uniform([1; 4], [1; 4])
    }

    /// `3,2,4,4` for large static classes and `1,1,2,2` for the rest, tuned
    /// for noisy stereo depth.
    pub fn stereo() -> Self {
        Self::uniform([3, 2, 4, 4], [1, 1, 2, 2])
    }

    /// Gap closing for static classes only; thin object outlines survive.
    pub fn closing() -> Self {
        Self::uniform([3, 3, 1, 1], [1; 4])
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "identity" | "none" => Ok(Self::identity()),
            "stereo" => Ok(Self::stereo()),
            "closing" => Ok(Self::closing()),
            other => Err(Error::InvalidArgument(format!("unknown morphology profile {other:?}"))),
        }
    }

    pub fn kernels(&self, category: Category) -> [usize; 4] {
        match category {
            Category::Static => self.static_kernels,
            Category::SmallStatic => self.small_static_kernels,
            Category::Vehicles => self.vehicle_kernels,
            Category::SmallDynamic => self.small_dynamic_kernels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Category::ALL.iter().flat_map(|&c| self.kernels(c)).any(|k| k == 0) {
            return Err(Error::InvalidArgument("morphology kernel sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        Category::ALL.iter().flat_map(|&c| self.kernels(c)).all(|k| k == 1)
    }
}

impl Default for MorphProfile {
    fn default() -> Self {
        Self::stereo()
    }
}

#[derive(Clone, Copy)]
enum Op {
    Dilate,
    Erode,
}

/// One separable pass along rows (`horizontal`) or columns.
fn pass(mask: &Mask, k: usize, op: Op, horizontal: bool) -> Mask {
    let lo = (k / 2) as isize;
    let hi = (k - 1 - k / 2) as isize;
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut out = Mask::new(mask.width, mask.height, false);
    for r in 0..h {
        for c in 0..w {
            let mut acc = matches!(op, Op::Erode);
            for o in -lo..=hi {
                let (cc, rr) = if horizontal { (c + o, r) } else { (c, r + o) };
                if cc < 0 || rr < 0 || cc >= w || rr >= h {
                    continue;
                }
                let v = mask.bits[(rr * w + cc) as usize];
                match op {
                    Op::Dilate => acc |= v,
                    Op::Erode => acc &= v,
                }
            }
            out.bits[(r * w + c) as usize] = acc;
        }
    }
    out
}

fn apply(mask: &Mask, k: usize, op: Op) -> Mask {
    if k <= 1 {
        return mask.clone();
    }
    pass(&pass(mask, k, op, true), k, op, false)
}

pub fn dilate(mask: &Mask, k: usize) -> Mask {
    apply(mask, k, Op::Dilate)
}

pub fn erode(mask: &Mask, k: usize) -> Mask {
    apply(mask, k, Op::Erode)
}

/// dilate(k0) → erode(k1) → erode(k2) → dilate(k3).
pub fn filter_mask(mask: &Mask, kernels: [usize; 4]) -> Mask {
    let m = dilate(mask, kernels[0]);
    let m = erode(&m, kernels[1]);
    let m = erode(&m, kernels[2]);
    dilate(&m, kernels[3])
}

pub fn morphological_filter(grid: &SemanticGrid, profile: &MorphProfile) -> Result<SemanticGrid> {
    profile.validate()?;
    if profile.is_identity() {
        return Ok(grid.clone());
    }
    let (w, h) = (grid.width(), grid.height());
    let mut order: Vec<SemanticClass> = SemanticClass::ALL[1..].to_vec();
    order.sort_by_key(|c| c.priority_key());
    let mut out = SemanticGrid::unknown(grid.geometry, grid.timestamp);
    for class in order {
        let mask = Mask { width: w, height: h, bits: grid.cells.iter().map(|&c| c == class).collect() };
        if !mask.any() {
            continue;
        }
        let filtered = filter_mask(&mask, profile.kernels(class.category()));
        for (cell, &b) in out.cells.iter_mut().zip(&filtered.bits) {
            if b {
                *cell = class;
            }
        }
    }
    Ok(out)
}
