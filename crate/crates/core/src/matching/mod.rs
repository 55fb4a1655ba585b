//! Sliding-window template matching, suppression and pose readout.

mod detection;
mod linear;
mod matcher;
mod nms;
mod pose;
mod similarity;

pub use detection::{Detection, PoseEstimate};
pub use linear::LinearMemories;
pub use matcher::{match_templates, Candidate, MatchParams, Matcher, PreparedImage};
pub use nms::{greedy_suppress, nms, nms_with, Overlap};
pub use pose::pose_from_template;
pub use similarity::{normalize, similarity, similarity_naive, similarity_naive_sum, similarity_sum};
