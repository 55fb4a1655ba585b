use nalgebra::{UnitQuaternion, Vector3};

use super::{Detection, PoseEstimate};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Template};

/// Reads the coarse pose off the matched template.
///
/// The translation lies on the ray through the detection anchor at the
/// template's range. The template rotation, rendered with the tube on the
/// optical axis, is turned by the rotation carrying the optical axis onto
/// that ray.
pub fn pose_from_template(d: &Detection, templates: &[Template], k: &CameraIntrinsics) -> Result<PoseEstimate> {
    let id = d.template_id.ok_or(Error::InvalidTemplateId(usize::MAX))?;
    let t = templates.get(id).ok_or(Error::InvalidTemplateId(id))?;
    Ok(pose_at(t, d.location, k))
}

pub(crate) fn pose_at(t: &Template, c: (i32, i32), k: &CameraIntrinsics) -> PoseEstimate {
    let ray = k.ray(c.0 as f64, c.1 as f64);
    let to_ray = UnitQuaternion::rotation_between(&Vector3::z(), &ray).unwrap_or_else(UnitQuaternion::identity);
    PoseEstimate::new(to_ray * t.viewpoint.camera_from_body(), ray * t.viewpoint.distance)
}

#[cfg(test)]
mod tests {
    use nalgebra::Point3;

    use super::*;
    use crate::geometry::{Viewpoint, build_template, TubeModel, TemplateParams};
    use crate::features::FeatureParams;
    use crate::mask::Mask;

    fn template(distance: f64) -> Template {
        let vp = Viewpoint::look_from(&Vector3::new(0.3, 0.5, 0.8).normalize(), distance, 20.0);
        build_template(
            &TubeModel::default(),
            &vp,
            &CameraIntrinsics::default(),
            &FeatureParams::default(),
            &TemplateParams::default(),
        )
        .unwrap()
    }

    fn det_at(c: (i32, i32), id: usize) -> Detection {
        Detection {
            image_id: "a".into(),
            location: c,
            score: 1.0,
            template_id: Some(id),
            mask: Mask::empty(640, 480),
            pose: None,
        }
    }

    #[test]
    fn principal_point_gives_central_ray() {
        let k = CameraIntrinsics::default();
        let lib = vec![template(2.0)];
        let p = pose_from_template(&det_at((320, 240), 0), &lib, &k).unwrap();
        assert!((p.translation - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-12);
        assert!((p.axis_direction - lib[0].viewpoint.axis_direction()).norm() < 1e-12);
        assert!((p.axis_direction.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn horizontal_offset_follows_pinhole() {
        let k = CameraIntrinsics::default();
        let lib = vec![template(2.0)];
        let p = pose_from_template(&det_at((320 + 57, 240), 0), &lib, &k).unwrap();
        assert!((p.translation.x / p.translation.z - 57.0 / k.fx).abs() < 1e-12);
        assert!((p.translation.norm() - 2.0).abs() < 1e-12);
        let (u, v) = k.project(&Point3::from(p.translation)).unwrap();
        assert!((u - 377.0).abs() < 1.0 && (v - 240.0).abs() < 1.0);
    }

    #[test]
    fn invalid_template_id() {
        let k = CameraIntrinsics::default();
        assert!(matches!(
            pose_from_template(&det_at((1, 1), 3), &[template(2.0)], &k),
            Err(Error::InvalidTemplateId(3))
        ));
    }
}
