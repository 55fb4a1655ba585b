//! Sample-tube localization by gradient-orientation template matching.
//!
//! The crate covers the whole pipeline: rendering contour templates of a
//! capped-cylinder tube from sampled viewpoints, quantized orientation
//! response maps, sliding-window matching with non-maximum suppression and
//! a coarse 6D pose readout, COCO-style evaluation (AP, AR, PR curves, pose
//! errors), COCO-compatible annotation and detection files, and a synthetic
//! depot-scene generator with exact ground truth.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod library;
pub mod mask;
pub mod matching;

pub use error::{Error, Result};
pub use mask::{BBox, Mask};
