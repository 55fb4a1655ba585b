//! Tube model, viewpoint sampling, silhouette rasterization and contour
//! templates.

mod camera;
pub mod raster;
mod template;
mod tube;
mod viewpoint;

pub use camera::CameraIntrinsics;
pub use raster::{render_shaded, render_silhouette, render_silhouette_posed, ShadedView};
pub use template::{build_library, build_template, extract_contour, Feature, Template, TemplateParams};
pub use tube::{Mesh, TubeHit, TubeModel};
pub use viewpoint::{
    axis_angle_deg, band_directions, distances, elevation_deg, in_plane_angles, in_plane_rotation,
    sample_viewpoints, end_symmetric_half, thin_uniform, Icosphere, ViewSampling, Viewpoint,
};
