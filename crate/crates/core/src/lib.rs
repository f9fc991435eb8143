//! Egocentric bird's-eye-view semantic grids.
//!
//! Labeled depth images are projected onto the ground plane, aligned to a
//! common orientation, rasterized, filtered and translated to a common time
//! so that several frames and sensors can be fused. The crate also provides
//! the loss mask, IoU metrics and the model-driven baselines.

pub mod alignment;
pub mod baselines;
pub mod class;
pub mod dataset;
pub mod egomotion;
pub mod error;
pub mod grid;
pub mod image;
pub mod io;
pub mod metrics;
pub mod morphology;
pub mod projection;
pub mod render;
pub mod scalar;

pub use alignment::{
    align_cloud, discretize, rotate_pointcloud, synchronize_sequence, translate_grid, translate_to, SensorFrame,
    SyncOptions,
};
pub use baselines::{bl_dc, bl_nt, bl_overlay, Baseline};
pub use class::{Category, SemanticClass, NUM_CLASSES};
pub use dataset::{stack_one_hot, GridSequence, GridSequenceDataset, HorizonTarget, PreparedSample, Split};
pub use egomotion::{EgoSample, EgomotionTrack};
pub use error::{Error, Result};
pub use grid::{GridGeometry, Mask, ProbabilisticGrid, SemanticGrid};
pub use image::{DepthMap, SemanticImage};
pub use metrics::{
    category_miou, certainty_map, class_iou, known_mask, loss_mask, masked_cross_entropy, mean_iou, IouCounts, LossMask,
};
pub use morphology::{morphological_filter, MorphProfile};
pub use projection::{project_to_pointcloud, CameraModel, Crop, GroundPoint, SemanticPointCloud};
pub use scalar::Scalar;

/// Double-precision camera, the default for geometry.
pub type Camera = CameraModel<f64>;
/// Double-precision ground point cloud.
pub type PointCloud = SemanticPointCloud<f64>;
/// Single-precision class scores, as produced by the fusion network.
pub type ScoreGrid = ProbabilisticGrid<f32>;
/// Double-precision class scores, used for gradient checks.
pub type ScoreGrid64 = ProbabilisticGrid<f64>;
