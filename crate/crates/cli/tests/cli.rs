use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stereobox");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// (left box u range, depth) per label row.
fn boxes(path: &Path) -> Vec<((f64, f64), f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<f64> = l.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect();
            ((f[3], f[5]), f[12])
        })
        .collect()
}

fn synth(dir: &Path, seed: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--seed", seed, "--out", p(dir), "--frames", "2", "--objects", "3"];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_solve_align_recovers_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "7", &["--edge-noise", "0.5", "--max-depth", "30"]);
    ok(&["solve", "--detections", p(&d.join("stereo_det")), "--calib", p(&d.join("calib")), "--out", p(&d.join("solved"))]);
    ok(&[
        "align",
        "--detections", p(&d.join("stereo_det")),
        "--calib", p(&d.join("calib")),
        "--left", p(&d.join("image_2")),
        "--right", p(&d.join("image_3")),
        "--out", p(&d.join("aligned")),
        "--costs", p(&d.join("costs")),
    ]);
    let mut checked = 0;
    for stem in ["000000.txt", "000001.txt"] {
        let truth = boxes(&d.join("label_2").join(stem));
        let aligned = boxes(&d.join("aligned").join(stem));
        assert_eq!(truth.len(), aligned.len());
        for (i, (((u0, u1), t), (_, a))) in truth.iter().zip(&aligned).enumerate() {
            // The photometric match has no occlusion model; skip objects behind a nearer box.
            let hidden = truth
                .iter()
                .any(|((v0, v1), z)| z < t && v0 < u1 && u0 < v1);
            if !hidden {
                checked += 1;
                assert!((t - a).abs() <= 0.05, "{stem} #{i}: aligned z {a} vs {t}");
            }
        }
    }
    assert!(checked >= 4, "only {checked} unoccluded objects");
    let costs = std::fs::read_to_string(d.join("costs").join("000000.csv")).unwrap();
    assert!(costs.starts_with("detection,stage,depth,cost\n"));
}

#[test]
fn eval_identity_and_empty_detections() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "11", &[]);
    let labels = d.join("label_2");
    let out = ok(&["eval", "--gt", p(&labels), "--det", p(&labels), "--calib", p(&d.join("calib"))]);
    let table = String::from_utf8(out.stdout).unwrap();
    let mut rows = table.lines();
    assert_eq!(rows.next(), Some("metric,iou,easy,moderate,hard"));
    for row in rows {
        for v in row.split(',').skip(2) {
            assert_eq!(v, "1.000000", "{row}");
        }
    }

    let empty = d.join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = ok(&["eval", "--gt", p(&labels), "--det", p(&empty)]);
    let table = String::from_utf8(out.stdout).unwrap();
    for row in table.lines().skip(1) {
        for v in row.split(',').skip(2) {
            assert_eq!(v, "0.000000", "{row}");
        }
    }
}

#[test]
fn outputs_are_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let outputs: Vec<Vec<Vec<u8>>> = ["a", "b"]
        .iter()
        .map(|name| {
            let d = tmp.path().join(name);
            synth(&d, "3", &["--edge-noise", "0.3", "--disparity-noise", "0.2"]);
            ok(&["solve", "--detections", p(&d.join("stereo_det")), "--calib", p(&d.join("calib")), "--out", p(&d.join("solved"))]);
            ok(&[
                "depth-curve",
                "--gt", p(&d.join("label_2")),
                "--det", p(&d.join("solved")),
                "--calib", p(&d.join("calib")),
                "--csv", p(&d.join("curve.csv")),
                "--svg", p(&d.join("curve.svg")),
            ]);
            [
                "scene/000001.txt",
                "stereo_det/000001.txt",
                "image_2/000000.png",
                "image_3/000001.png",
                "solved/000000.txt",
                "curve.csv",
                "curve.svg",
            ]
            .iter()
            .map(|f| std::fs::read(d.join(f)).unwrap())
            .collect()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes_follow_error_category() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "5", &[]);

    let missing = run(&["eval", "--gt", p(&d.join("nope")), "--det", p(&d.join("label_2"))]);
    assert_eq!(missing.status.code(), Some(3));

    // A label file is not a stereo detection file.
    let malformed = run(&[
        "solve",
        "--detections", p(&d.join("label_2/000000.txt")),
        "--calib", p(&d.join("calib/000000.txt")),
        "--out", p(&d.join("x.txt")),
    ]);
    assert_eq!(malformed.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&malformed.stderr).starts_with("error[input]"));

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "[solver]\nmax_iterations = \"many\"\n").unwrap();
    let config = run(&["--config", p(&bad), "eval", "--gt", p(&d.join("label_2")), "--det", p(&d.join("label_2"))]);
    assert_eq!(config.status.code(), Some(5));

    let usage = run(&["solve"]);
    assert_eq!(usage.status.code(), Some(2));
}
