//! Deterministic box-world driving simulator.
//!
//! Scenes are drawn from a seed: a road with lanes and sidewalks, buildings,
//! trees, poles and moving road users. Each frame is raycast into a labeled
//! depth image per camera, together with the exact egomotion and a top-down
//! oracle of the world around the agent. Clips are then cut into grid
//! sequences for training and evaluation.

pub mod dataset;
pub mod error;
pub mod generate;
pub mod sampling;
pub mod scene;
pub mod simulate;
pub mod split;

pub use dataset::{
    build_dataset, read_dataset, sample_sequences, write_dataset, DatasetConfig, FrameClouds, GridSpec, Manifest,
    MorphConfig, SamplingSpec, SequenceBuilder, MANIFEST_FILE,
};
pub use error::{Error, Result};
pub use generate::{generate_scene, RigSpec, SceneParams};
pub use sampling::SequenceLayout;
pub use scene::{EgoNoise, EgoSpec, Pose, Rig, RoadSpec, SceneObject, SceneSpec};
pub use simulate::{simulate, CameraView, FrameBundle, Simulator};
pub use split::{apply_split, SplitMode};
