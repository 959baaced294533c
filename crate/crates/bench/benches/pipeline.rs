use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stereobox::align::{align_depth, photometric_cost, AlignConfig};
use stereobox::{extract_measurements, iou_3d, iou_bev, solve_coarse, Box3D, StereoCamera};
use stereobox_bench::{align_fixture, objects};

fn solver(c: &mut Criterion) {
    let camera = StereoCamera::kitti();
    let sets: Vec<_> = objects(1, 16)
        .into_iter()
        .map(|o| (extract_measurements(&camera, &o.exact).unwrap(), o.exact.dims))
        .collect();
    assert!(sets.iter().all(|(m, d)| solve_coarse(m, *d, &camera, None).is_ok()));
    c.bench_function("solve_coarse/16 objects", |b| {
        b.iter(|| {
            for (meas, dims) in &sets {
                black_box(solve_coarse(meas, *dims, &camera, None).ok());
            }
        })
    });
}

fn alignment(c: &mut Criterion) {
    let camera = StereoCamera::kitti();
    let f = align_fixture(2);
    let config = AlignConfig::default();
    let z = f.object.truth.z;
    c.bench_function("photometric_cost/one depth", |b| {
        b.iter(|| {
            photometric_cost(&f.left, &f.right, &camera, &f.roi, &f.offsets, black_box(z), config.oob_penalty).unwrap()
        })
    });
    c.bench_function("align_depth/70 depths", |b| {
        b.iter(|| align_depth(&f.left, &f.right, &camera, &f.roi, &f.offsets, black_box(z + 0.3), &config).unwrap())
    });
}

fn overlap(c: &mut Criterion) {
    let boxes: Vec<Box3D> = objects(3, 8).into_iter().map(|o| o.truth).collect();
    let shifted: Vec<Box3D> = boxes
        .iter()
        .map(|b| Box3D::new(b.x + 0.4, b.y, b.z + 0.7, b.theta + 0.2, b.dims()).unwrap())
        .collect();
    c.bench_function("iou_bev/8x8", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for a in &boxes {
                for o in &shifted {
                    s += iou_bev(a, o);
                }
            }
            black_box(s)
        })
    });
    c.bench_function("iou_3d/8x8", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for a in &boxes {
                for o in &shifted {
                    s += iou_3d(a, o);
                }
            }
            black_box(s)
        })
    });
}

criterion_group!(benches, solver, alignment, overlap);
criterion_main!(benches);
