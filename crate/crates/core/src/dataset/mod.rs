pub mod annotations;
pub mod detections;
pub mod plan;
pub mod rle;
pub mod synth;

pub use annotations::{load_annotations, write_annotations, AnnotationFile};
pub use detections::{load_detection_file, load_detections, write_detections, DetectionFile, DetectionHeader};
pub use plan::{FactorGrid, PlannedScene, SynthPlan};
pub use rle::Rle;
pub use synth::{render_scene, synth_scene, Scene, SceneSampler, SceneSpec, Terrain};
