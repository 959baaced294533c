use proptest::prelude::*;
use stereobox::codec::{
    decode_dimension_offset, decode_stereo_delta, decode_viewpoint, encode_dimension_offset,
    encode_keypoint_target, encode_stereo_delta, encode_viewpoint, label_anchors, nms,
    nms_keep_both, AnchorLabel, StereoGroundTruth, KEYPOINT_BINS,
};
use stereobox::geometry::{wrap_angle, Box2D, Dimensions, Viewpoint};

prop_compose! {
    fn box2d()(u in -50.0..1200.0f64, v in -50.0..350.0f64, w in 2.0..400.0f64, h in 2.0..300.0f64) -> Box2D {
        Box2D { u_min: u, v_min: v, u_max: u + w, v_max: v + h }
    }
}

prop_compose! {
    fn stereo_gt()(left in box2d(), disparity in 0.0..120.0f64, dw in -0.3..0.3f64) -> StereoGroundTruth {
        let right = Box2D {
            u_min: left.u_min - disparity,
            u_max: left.u_min - disparity + left.width() * (1.0 + dw),
            ..left
        };
        StereoGroundTruth::new(left, right, 0)
    }
}

fn boxes_close(a: &Box2D, b: &Box2D, tol: f64) -> bool {
    (a.u_min - b.u_min).abs() < tol
        && (a.u_max - b.u_max).abs() < tol
        && (a.v_min - b.v_min).abs() < tol
        && (a.v_max - b.v_max).abs() < tol
}

proptest! {
    #[test]
    fn stereo_delta_round_trip(anchor in box2d(), gt in stereo_gt()) {
        let delta = encode_stereo_delta(&anchor, &gt).unwrap();
        let (l, r) = decode_stereo_delta(&anchor, &delta).unwrap();
        prop_assert!(boxes_close(&l, &gt.left, 1e-9));
        prop_assert!(boxes_close(&r, &gt.right, 1e-9));
    }

    #[test]
    fn dimension_round_trip(w in 0.3..3.0f64, l in 0.3..6.0f64, h in 0.3..3.0f64) {
        let prior = Dimensions { w: 1.6, l: 3.9, h: 1.56 };
        let gt = Dimensions { w, l, h };
        let back = decode_dimension_offset(&encode_dimension_offset(&gt, &prior).unwrap(), &prior).unwrap();
        prop_assert!((back.w - w).abs() < 1e-12 && (back.l - l).abs() < 1e-12 && (back.h - h).abs() < 1e-12);
    }

    #[test]
    fn viewpoint_round_trip(alpha in -10.0..10.0f64) {
        let (s, c) = encode_viewpoint(Viewpoint::new(alpha));
        prop_assert!(wrap_angle(decode_viewpoint(s, c).alpha - alpha).abs() < 1e-12);
    }

    #[test]
    fn positive_anchors_decode_to_their_boxes(
        gts in prop::collection::vec(stereo_gt(), 1..4),
        jitter in prop::collection::vec((-0.1..0.1f64, -0.1..0.1f64, 0.8..1.25f64), 1..30),
    ) {
        let gts: Vec<StereoGroundTruth> = gts
            .into_iter()
            .enumerate()
            .map(|(i, g)| StereoGroundTruth { object_id: i, ..g })
            .collect();
        // anchors near each union box, plus random ones
        let anchors: Vec<Box2D> = jitter
            .iter()
            .enumerate()
            .map(|(i, &(du, dv, s))| {
                let u = gts[i % gts.len()].union;
                let (cu, cv) = u.center();
                Box2D::from_center(cu + du * u.width(), cv + dv * u.height(), u.width() * s, u.height() * s)
            })
            .collect();
        for (anchor, label) in anchors.iter().zip(label_anchors(&anchors, &gts)) {
            if let AnchorLabel::Positive(g) = label {
                let gt = &gts[g];
                let (l, r) = decode_stereo_delta(anchor, &encode_stereo_delta(anchor, gt).unwrap()).unwrap();
                prop_assert!(boxes_close(&l, &gt.left, 1e-9) && boxes_close(&r, &gt.right, 1e-9));
                prop_assert!(stereobox::iou_2d(anchor, &gt.union) >= 0.7);
            }
        }
    }

    #[test]
    fn keep_both_is_subset_of_each_side(
        boxes in prop::collection::vec((box2d(), 0.0..80.0f64, 0.0..1.0f64), 1..40),
        thresh in 0.1..0.9f64,
    ) {
        let left: Vec<Box2D> = boxes.iter().map(|b| b.0).collect();
        let right: Vec<Box2D> = boxes.iter().map(|(b, d, _)| b.translate(-d, 0.0)).collect();
        let scores: Vec<f64> = boxes.iter().map(|b| b.2).collect();
        let kept = nms_keep_both(&left, &right, &scores, thresh, usize::MAX);
        let (l, r) = (nms(&left, &scores, thresh), nms(&right, &scores, thresh));
        prop_assert!(kept.iter().all(|i| l.contains(i) && r.contains(i)));
        let capped = nms_keep_both(&left, &right, &scores, thresh, 3);
        prop_assert_eq!(&capped[..], &kept[..kept.len().min(3)]);
    }

    #[test]
    fn keypoint_target_has_at_most_one_cell(
        b in box2d(),
        u in -100.0..1400.0f64,
        k in 0usize..6,
        bl in 0.0..1.0f64,
        br in 0.0..1.0f64,
    ) {
        let bounds = (b.u_min + bl * b.width(), b.u_min + br * b.width());
        let t = encode_keypoint_target(&b, Some((u, k)), bounds);
        let cells: u32 = t.perspective_grid().iter().flatten().map(|&c| c as u32).sum();
        prop_assert!(cells <= 1);
        prop_assert_eq!(cells == 1, k < 4 && (b.u_min..=b.u_max).contains(&u));
        prop_assert!(t.left_boundary < KEYPOINT_BINS && t.right_boundary < KEYPOINT_BINS);
    }
}
