use nalgebra::Point3;
use proptest::prelude::*;
use stereobox::geometry::{
    project_box3d, project_point, viewpoint_from_pose, wrap_angle, Box3D, Eye, StereoCamera,
};

fn camera() -> StereoCamera {
    StereoCamera::kitti()
}

prop_compose! {
    fn box_in_front()(
        x in -15.0..15.0f64,
        y in 0.0..1.5f64,
        z in 6.0..60.0f64,
        theta in -3.14..3.14f64,
        w in 1.4..2.0f64,
        l in 3.0..5.0f64,
        h in 1.3..1.9f64,
    ) -> Box3D {
        Box3D { x, y, z, theta, w, l, h }
    }
}

/// Rigid rotation of the scene about the camera's vertical axis, in the same
/// sense as `Box3D::rotate`.
fn rotate_about_camera(b: &Box3D, psi: f64) -> Box3D {
    let (s, c) = psi.sin_cos();
    Box3D {
        x: b.x * c + b.z * s,
        z: -b.x * s + b.z * c,
        theta: wrap_angle(b.theta + psi),
        ..*b
    }
}

proptest! {
    #[test]
    fn heading_recovered_from_viewpoint(b in box_in_front()) {
        let alpha = viewpoint_from_pose(&b);
        let theta = alpha.heading_at(b.x, b.z);
        prop_assert!(wrap_angle(theta - b.theta).abs() < 1e-12);
    }

    #[test]
    fn rotation_about_camera_keeps_viewpoint_and_shifts_crop(b in box_in_front(), psi in -0.2..0.2f64) {
        let r = rotate_about_camera(&b, psi);
        prop_assume!(r.z > 4.0);
        let (pa, pb) = (project_box3d(&camera(), &b), project_box3d(&camera(), &r));
        prop_assume!(pa.is_ok() && pb.is_ok());
        let (pa, pb) = (pa.unwrap(), pb.unwrap());
        let da = viewpoint_from_pose(&b).alpha - viewpoint_from_pose(&r).alpha;
        prop_assert!(wrap_angle(da).abs() < 1e-9);
        // the angular extent of the crop moves rigidly by psi
        for (ua, ub) in [(pa.left.u_l, pb.left.u_l), (pa.left.u_r, pb.left.u_r)] {
            prop_assert!((ub.atan() - ua.atan() - psi).abs() < 1e-9);
        }
        let width = |p: &stereobox::geometry::BoxProjection| p.left.u_r.atan() - p.left.u_l.atan();
        prop_assert!((width(&pa) - width(&pb)).abs() < 1e-9);
    }

    #[test]
    fn hull_contains_every_corner(b in box_in_front()) {
        let cam = camera();
        let Ok(p) = project_box3d(&cam, &b) else { return Ok(()) };
        for (eye, hull) in [(Eye::Left, p.left), (Eye::Right, p.right)] {
            for c in b.corners() {
                let (u, v) = project_point(&cam, &c, eye).unwrap();
                prop_assert!(hull.u_l <= u && u <= hull.u_r);
                prop_assert!(hull.v_t <= v && v <= hull.v_b);
            }
        }
        if let Some(k) = p.keypoint {
            prop_assert!(k.corner < 4);
            prop_assert!(p.left.u_l < k.u && k.u < p.left.u_r);
        }
    }

    #[test]
    fn facing_box_between_side_planes_has_no_keypoint(
        frac in -0.99..0.99f64,
        z in 6.0..60.0f64,
        w in 1.4..2.0f64,
    ) {
        let b = Box3D { x: frac * w / 2.0, y: 0.8, z, theta: 0.0, w, l: 4.0, h: 1.5 };
        prop_assert!(project_box3d(&camera(), &b).unwrap().keypoint.is_none());
    }

    #[test]
    fn camera_center_projects_to_principal_point(z in 0.1..100.0f64) {
        let (u, v) = project_point(&camera(), &Point3::new(0.0, 0.0, z), Eye::Left).unwrap();
        prop_assert_eq!((u, v), (0.0, 0.0));
    }
}
