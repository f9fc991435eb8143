//! Loss masks, masked cross-entropy, IoU and certainty maps.

use serde::{Deserialize, Serialize};

use crate::class::{Category, SemanticClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::grid::{Mask, ProbabilisticGrid, SemanticGrid};
use crate::scalar::Scalar;

/// Tolerance on per-cell probability sums accepted by the loss.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// Cells whose class is not unknown.
pub fn known_mask(grid: &SemanticGrid) -> Mask {
    Mask {
        width: grid.width(),
        height: grid.height(),
        bits: grid.cells.iter().map(|&c| c != SemanticClass::Unknown).collect(),
    }
}

/// Cells seen somewhere in the sequence but unknown in the target.
/// `mask` is true where loss and IoU ignore the prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LossMask {
    pub mask: Mask,
    pub covered: Mask,
    pub target: Mask,
}

impl LossMask {
    /// Mask that ignores nothing.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            mask: Mask::new(width, height, false),
            covered: Mask::new(width, height, false),
            target: Mask::new(width, height, false),
        }
    }

    #[inline]
    pub fn ignored(&self, i: usize) -> bool {
        self.mask.bits[i]
    }
}

/// `covered = known(target) ∪ ⋃ known(input)`, `mask = covered ∖ known(target)`.
/// The bottom `bottom_exclude` rows are taken out of the mask so they are
/// always scored.
pub fn loss_mask(target: &SemanticGrid, inputs: &[&SemanticGrid], bottom_exclude: usize) -> Result<LossMask> {
    let target_known = known_mask(target);
    let mut covered = target_known.clone();
    for g in inputs {
        target.ensure_same_geometry(g)?;
        for (c, &k) in covered.bits.iter_mut().zip(&known_mask(g).bits) {
            *c |= k;
        }
    }
    let mut mask = Mask {
        width: target.width(),
        height: target.height(),
        bits: covered.bits.iter().zip(&target_known.bits).map(|(&c, &t)| c && !t).collect(),
    };
    let h = target.height();
    for row in h.saturating_sub(bottom_exclude)..h {
        for col in 0..target.width() {
            mask.set(col, row, false);
        }
    }
    Ok(LossMask { mask, covered, target: target_known })
}

fn check_shapes<T: Scalar>(pred: &ProbabilisticGrid<T>, target: &SemanticGrid, mask: &LossMask) -> Result<()> {
    if pred.geometry != target.geometry {
        return Err(Error::GeometryMismatch("prediction vs target".into()));
    }
    if mask.mask.width != target.width() || mask.mask.height != target.height() {
        return Err(Error::GeometryMismatch("mask vs target".into()));
    }
    Ok(())
}

/// Masked categorical cross-entropy and its gradient with respect to the
/// predicted probabilities.
///
/// Masked cells take the target's one-hot value before scoring, so they
/// contribute zero loss and exactly zero gradient. The loss is the mean over
/// all cells.
pub fn masked_cross_entropy<T: Scalar>(
    pred: &ProbabilisticGrid<T>,
    target: &SemanticGrid,
    mask: &LossMask,
) -> Result<(T, Vec<T>)> {
    check_shapes(pred, target, mask)?;
    let n = target.cells.len();
    let inv_n = T::one() / T::of(n as f64);
    let floor = T::min_positive_value();
    let mut grad = vec![T::zero(); pred.features.len()];
    let mut loss = T::zero();
    for (i, &class) in target.cells.iter().enumerate() {
        let p = pred.cell(i);
        let sum: T = p.iter().copied().sum();
        if (sum - T::one()).abs().to_f64_lossless() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized { cell: i, sum: sum.to_f64_lossless() });
        }
        if mask.ignored(i) {
            continue;
        }
        let pk = p[class.index()].max(floor);
        loss -= pk.ln();
        grad[i * NUM_CLASSES + class.index()] = -inv_n / pk;
    }
    Ok((loss * inv_n, grad))
}

/// Intersection and union counts per class, pooled over any number of grids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub intersection: [u64; NUM_CLASSES],
    pub union: [u64; NUM_CLASSES],
}

impl IouCounts {
    pub fn add(&mut self, pred: &SemanticGrid, target: &SemanticGrid, mask: Option<&LossMask>) -> Result<()> {
        pred.ensure_same_geometry(target)?;
        for (i, (&p, &t)) in pred.cells.iter().zip(&target.cells).enumerate() {
            if mask.is_some_and(|m| m.ignored(i)) {
                continue;
            }
            if p == t {
                self.intersection[p.index()] += 1;
                self.union[p.index()] += 1;
            } else {
                self.union[p.index()] += 1;
                self.union[t.index()] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &IouCounts) {
        for k in 0..NUM_CLASSES {
            self.intersection[k] += other.intersection[k];
            self.union[k] += other.union[k];
        }
    }

    /// Per-class IoU; `None` when a class never appears in either grid.
    pub fn per_class(&self) -> [Option<f64>; NUM_CLASSES] {
        std::array::from_fn(|k| (self.union[k] > 0).then(|| self.intersection[k] as f64 / self.union[k] as f64))
    }
}

/// Per-class IoU over non-masked cells.
pub fn class_iou(pred: &SemanticGrid, target: &SemanticGrid, mask: &LossMask) -> Result<[Option<f64>; NUM_CLASSES]> {
    let mut counts = IouCounts::default();
    counts.add(pred, target, Some(mask))?;
    Ok(counts.per_class())
}

/// Unweighted mean of the present member classes of each category.
pub fn category_miou(per_class: &[Option<f64>; NUM_CLASSES]) -> [Option<f64>; 4] {
    Category::ALL.map(|cat| {
        let vals: Vec<f64> = cat.members().filter_map(|c| per_class[c.index()]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    })
}

/// Mean over present classes.
pub fn mean_iou(per_class: &[Option<f64>; NUM_CLASSES]) -> Option<f64> {
    let vals: Vec<f64> = per_class.iter().flatten().copied().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Per-cell maximum class score.
pub fn certainty_map<T: Scalar>(pred: &ProbabilisticGrid<T>) -> Vec<T> {
    (0..pred.geometry.len()).map(|i| pred.cell(i).iter().copied().fold(T::neg_infinity(), T::max)).collect()
}
