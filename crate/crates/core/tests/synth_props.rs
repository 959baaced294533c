use proptest::prelude::*;
use stereobox::geometry::{project_box3d, StereoCamera};
use stereobox::kitti::{parse_label_rows, serialize_rows, KittiLabelRow};
use stereobox::synth::{generate_scene, Scene, SceneSpec};

prop_compose! {
    fn spec()(
        seed in any::<u64>(),
        num_objects in 1usize..6,
        edge in 0.0..1.0f64,
        disparity in 0.0..1.0f64,
        truncation in any::<bool>(),
    ) -> SceneSpec {
        SceneSpec {
            seed,
            num_objects,
            edge_noise: edge,
            disparity_noise: disparity,
            allow_truncation: truncation,
            ..SceneSpec::default()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equal_seeds_give_identical_scenes(s in spec()) {
        let cam = StereoCamera::kitti();
        let a = generate_scene(&s, &cam).unwrap().to_text();
        let b = generate_scene(&s.clone(), &cam).unwrap().to_text();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(Scene::from_text(&a).unwrap().to_text(), a);
    }

    #[test]
    fn exact_detections_are_projections(s in spec()) {
        let cam = StereoCamera::kitti();
        for o in generate_scene(&s, &cam).unwrap().objects {
            let p = project_box3d(&cam, &o.truth).unwrap();
            prop_assert_eq!(o.exact.left, cam.pixel_box(&p.left));
            prop_assert_eq!(o.exact.right, cam.pixel_box(&p.right));
            prop_assert_eq!(o.exact.keypoint.map(|k| (k.u, k.corner)), p.keypoint.map(|k| (cam.pixel_u(k.u), k.corner)));
        }
    }

    #[test]
    fn label_rows_round_trip_at_six_decimals(
        values in prop::array::uniform12(-1000.0..1000.0f64),
        occluded in -1i32..4,
        score in prop::option::of(0.0..1.0f64),
    ) {
        let row = KittiLabelRow {
            kind: "Car".into(),
            truncated: values[0].abs() / 1000.0,
            occluded,
            alpha: values[1] / 400.0,
            bbox: [values[2], values[3], values[4], values[5]],
            dimensions: [values[6], values[7], values[8]],
            location: [values[9], values[10], values[11]],
            rotation_y: values[1] / 500.0,
            score,
        };
        let text = serialize_rows(std::slice::from_ref(&row));
        let back = &parse_label_rows(&text).unwrap()[0];
        let close = |a: f64, b: f64| (a - b).abs() <= 5e-7 + 1e-12 * a.abs();
        prop_assert!(close(back.truncated, row.truncated) && close(back.alpha, row.alpha));
        prop_assert!(back.bbox.iter().zip(&row.bbox).all(|(a, b)| close(*a, *b)));
        prop_assert!(back.dimensions.iter().zip(&row.dimensions).all(|(a, b)| close(*a, *b)));
        prop_assert!(back.location.iter().zip(&row.location).all(|(a, b)| close(*a, *b)));
        prop_assert_eq!(back.occluded, row.occluded);
        prop_assert_eq!(back.score.is_some(), row.score.is_some());
        // a second pass is exact
        prop_assert_eq!(serialize_rows(std::slice::from_ref(back)), text);
    }
}
