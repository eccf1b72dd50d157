use std::path::Path;
use std::process::{Command, Output};

use defence::imaging::io;
use defence::pipeline::DEBUG_FILES;

fn defence(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defence"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_scene(dir: &Path) {
    let out = defence(&[
        "synth",
        "--out-dir",
        p(dir),
        "--set",
        "height=96",
        "--set",
        "width=128",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_run_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    for f in ["left.png", "right.png", "truth.png", "fence_left.pgm", "fence_right.pgm"] {
        assert!(scene.join(f).is_file(), "{f}");
    }
    let left = io::load_image(scene.join("left.png")).unwrap();
    assert_eq!((left.height(), left.width(), left.channels()), (96, 128, 3));

    let debug = tmp.path().join("debug");
    let result = tmp.path().join("out.png");
    let out = defence(&[
        "run",
        "--left",
        p(&scene.join("left.png")),
        "--right",
        p(&scene.join("right.png")),
        "--out",
        p(&result),
        "--debug-dir",
        p(&debug),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(result.is_file());

    // Exactly the documented debug files, nothing else.
    let mut found: Vec<String> = std::fs::read_dir(&debug)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    found.sort();
    let mut expected: Vec<String> = DEBUG_FILES.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(found, expected);
    let pfm = io::read_pfm(debug.join("disparity.pfm")).unwrap();
    assert_eq!((pfm.height, pfm.width, pfm.channels), (96, 128, 1));
    let flow = io::read_pfm(debug.join("flow.pfm")).unwrap();
    assert_eq!(flow.channels, 3);
    let csv = std::fs::read_to_string(debug.join("energy.csv")).unwrap();
    assert!(csv.starts_with("iteration,energy,relative_change\n"));

    let out = defence(&[
        "eval",
        "--result",
        p(&result),
        "--truth",
        p(&scene.join("truth.png")),
        "--mask",
        p(&scene.join("fence_left.pgm")),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let psnr: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("psnr "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(psnr.is_finite() && psnr > 0.0, "{text}");
}

#[test]
fn identical_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let result = tmp.path().join(format!("out{k}.png"));
        let out = defence(&[
            "run",
            "--left",
            p(&scene.join("left.png")),
            "--right",
            p(&scene.join("right.png")),
            "--out",
            p(&result),
        ]);
        assert!(out.status.success());
        outputs.push(std::fs::read(result).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    let (l, r) = (scene.join("left.png"), scene.join("right.png"));
    let result = tmp.path().join("out.png");
    let base = [
        "run",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--out",
        p(&result),
    ];
    for bad in ["mu=-1", "no_such_key=1", "d_max", "erode_radius=0"] {
        let mut args = base.to_vec();
        args.extend(["--set", bad]);
        let out = defence(&args);
        assert_eq!(out.status.code(), Some(2), "--set {bad}");
        assert!(!result.exists());
    }

    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nlambda = -3\n").unwrap();
    let mut args = base.to_vec();
    args.extend(["--config", p(&cfg)]);
    let out = defence(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    let cfg = tmp.path().join("run.cfg");
    // The file alone is invalid; the flag repairs it.
    std::fs::write(&cfg, "outer_iters = 0\nmu = 0.02\n").unwrap();
    let (l, r) = (scene.join("left.png"), scene.join("right.png"));
    let result = tmp.path().join("out.png");
    let args = [
        "run",
        "--left",
        p(&l),
        "--right",
        p(&r),
        "--out",
        p(&result),
        "--config",
        p(&cfg),
    ];
    assert_eq!(defence(&args).status.code(), Some(2));
    let mut fixed = args.to_vec();
    fixed.extend(["--set", "outer_iters=5"]);
    let out = defence(&fixed);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("5 solver iterations"));
}

#[test]
fn io_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.png");
    let out = defence(&[
        "run",
        "--left",
        p(&missing),
        "--right",
        p(&missing),
        "--out",
        p(&tmp.path().join("o.png")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = defence(&[
        "eval",
        "--result",
        p(&missing),
        "--truth",
        p(&missing),
        "--mask",
        p(&missing),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mismatched_pair_is_rejected_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    small_scene(&a);
    let out = defence(&["synth", "--out-dir", p(&b), "--set", "height=64", "--set", "width=128"]);
    assert!(out.status.success());
    let result = tmp.path().join("out.png");
    let debug = tmp.path().join("debug");
    let out = defence(&[
        "run",
        "--left",
        p(&a.join("left.png")),
        "--right",
        p(&b.join("right.png")),
        "--out",
        p(&result),
        "--debug-dir",
        p(&debug),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input"));
    assert!(!result.exists());
    assert!(!debug.exists());
}

#[test]
fn numerical_failure_exits_with_four() {
    // A featureless pair gives a constant disparity map and therefore no
    // fence layer to segment.
    let tmp = tempfile::tempdir().unwrap();
    let flat = defence::Image::filled(64, 96, 3, 0.5).unwrap();
    let l = tmp.path().join("l.png");
    io::save_image(&l, &flat).unwrap();
    let result = tmp.path().join("out.png");
    let out = defence(&["run", "--left", p(&l), "--right", p(&l), "--out", p(&result)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!result.exists());
}
