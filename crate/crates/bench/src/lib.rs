//! Shared fixtures for the criterion benches.

use stereobox::align::{pixel_depth_offsets, valid_roi, ImagePatch, ValidRoi};
use stereobox::synth::render_stereo;
use stereobox::{generate_scene, RenderConfig, SceneSpec, StereoCamera, SyntheticObject};

/// Noise-free objects of one seeded scene.
pub fn objects(seed: u64, count: usize) -> Vec<SyntheticObject> {
    let spec = SceneSpec {
        seed,
        num_objects: count,
        depth_range: (8.0, 40.0),
        ..SceneSpec::default()
    };
    generate_scene(&spec, &StereoCamera::kitti()).expect("valid spec").objects
}

/// A rendered pair with the RoI and depth offsets of its true box.
pub struct AlignFixture {
    pub object: SyntheticObject,
    pub left: ImagePatch,
    pub right: ImagePatch,
    pub roi: ValidRoi,
    pub offsets: Vec<f64>,
}

pub fn align_fixture(seed: u64) -> AlignFixture {
    let camera = StereoCamera::kitti();
    let object = objects(seed, 1).remove(0);
    let pair = render_stereo(&object, &camera, object.texture_seed, &RenderConfig::default()).expect("renders");
    let mut roi = valid_roi(&camera, &object.truth, &object.exact.left, object.exact.boundary_or_box()).expect("roi");
    let offsets = pixel_depth_offsets(&camera, &object.truth, &mut roi);
    AlignFixture {
        object,
        left: pair.left,
        right: pair.right,
        roi,
        offsets,
    }
}
