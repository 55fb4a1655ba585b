//! Gradient orientation features: Sobel gradients, quantized orientations
//! with a 3x3 majority vote, spreading, and per-bin response planes.

mod gradients;
mod quantize;
mod response;
mod spread;

pub use gradients::{compute_gradients, compute_gradients_gray, compute_gradients_rgb, gradients_interleaved, GradientImage};
pub use quantize::{orientation_bin, quantize_orientations, QuantizedOrientationImage, EMPTY_BIN};
pub use response::{bitset_lookup, build_response_maps, cos_table, ResponseMaps, MAX_LOOKUP_BINS};
pub use spread::{spread_orientations, SpreadOrientationImage};

use serde::{Deserialize, Serialize};

/// Feature extraction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    /// Orientation bins over `[0, 180)`.
    pub n0: usize,
    /// Spreading radius `T` in pixels.
    pub spread: u32,
    /// Minimum Sobel magnitude on the 0-255 scale.
    pub magnitude_threshold: f32,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            n0: 8,
            spread: 4,
            magnitude_threshold: 40.0,
        }
    }
}
