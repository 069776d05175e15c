//! CLI surface tests: exit codes, the bench counter contract, and the
//! dataset-synthesis command.

use std::path::Path;
use std::process::{Command, Output};

use hrwarp_core::{load_tensor, save_image, save_label_map, Image, LabelMap};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hrwarp")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_basic_inputs(dir: &Path, h: usize, w: usize) {
    let image = Image::from_fn(h, w, |y, x| {
        [
            y as f32 / (h - 1) as f32,
            x as f32 / (w - 1) as f32,
            0.25,
        ]
    });
    let labels = LabelMap::from_fn(h, w, |_, x| (x >= w / 2) as u8);
    save_image(&image, dir.join("x.png")).unwrap();
    save_label_map(&labels, dir.join("c.png")).unwrap();
}

#[test]
fn argument_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 8, 8);
    let x = dir.path().join("x.png");
    let out = dir.path().join("out.png");
    // No features and no label maps: nothing to build features from.
    let result = run(&[
        "dense-warp",
        "--image",
        x.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
}

#[test]
fn format_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 8, 8);
    let bad = dir.path().join("bad.hrt");
    std::fs::write(&bad, b"HRT0junk").unwrap();
    let result = run(&[
        "dense-warp",
        "--image",
        dir.path().join("x.png").to_str().unwrap(),
        "--features-src",
        bad.to_str().unwrap(),
        "--features-tgt",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out.png").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3), "{result:?}");
}

#[test]
fn ingestion_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 8, 8);
    let deep = dir.path().join("deep.png");
    image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(8, 8, image::Luma([300u16]))
        .save(&deep)
        .unwrap();
    let result = run(&[
        "dense-warp",
        "--image",
        dir.path().join("x.png").to_str().unwrap(),
        "--labels-src",
        deep.to_str().unwrap(),
        "--labels-tgt",
        dir.path().join("c.png").to_str().unwrap(),
        "--out",
        dir.path().join("out.png").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3), "{result:?}");
}

#[test]
fn size_cap_exits_4_and_force_dense_overrides() {
    let dir = tempfile::tempdir().unwrap();
    // 160x160 = 25,600 pixels, above the 16,384 dense cap.
    write_basic_inputs(dir.path(), 160, 160);
    let x = dir.path().join("x.png");
    let c = dir.path().join("c.png");
    let out = dir.path().join("out.png");
    let args_base = [
        "dense-warp",
        "--image",
        x.to_str().unwrap(),
        "--labels-src",
        c.to_str().unwrap(),
        "--labels-tgt",
        c.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let result = run(&args_base);
    assert_eq!(result.status.code(), Some(4), "{result:?}");

    let mut forced: Vec<&str> = args_base.to_vec();
    forced.push("--force-dense");
    let result = run(&forced);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
}

fn bench_lines(args: &[&str]) -> Vec<serde_json::Value> {
    let out = run(args);
    assert!(out.status.success(), "{out:?}");
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn bench_sparse_counts_scale_with_pixels() {
    let lines = bench_lines(&["bench", "--sizes", "64,128", "--mode", "sparse"]);
    assert_eq!(lines.len(), 2);
    let e64 = lines[0]["evaluations"].as_u64().unwrap() as f64;
    let e128 = lines[1]["evaluations"].as_u64().unwrap() as f64;
    let ratio = e128 / e64;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.05, "ratio {ratio}");
}

#[test]
fn bench_dense_64_is_exactly_all_pairs() {
    let lines = bench_lines(&["bench", "--sizes", "64", "--mode", "dense"]);
    assert_eq!(lines[0]["evaluations"].as_u64().unwrap(), 16_777_216);
    assert!(lines[0]["wall_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_1x1_degenerate_completes() {
    let lines = bench_lines(&["bench", "--sizes", "1", "--mode", "sparse"]);
    // Single pixel: no neighbors, pool of k+1=5 per iteration, 2 slots,
    // 14 iterations.
    assert_eq!(lines[0]["evaluations"].as_u64().unwrap(), 140);
}

#[test]
fn synth_dataset_emits_reproducible_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (h, w) = (48usize, 48);
    let image = Image::from_fn(h, w, |y, x| {
        [
            0.2 + 0.6 * y as f32 / (h - 1) as f32,
            0.2 + 0.6 * x as f32 / (w - 1) as f32,
            0.4,
        ]
    });
    // Disk on a quadrant-split background so the disk is the largest
    // component.
    let labels = LabelMap::from_fn(h, w, |y, x| {
        let dy = y as f64 - 24.0;
        let dx = x as f64 - 24.0;
        if (dy * dy + dx * dx).sqrt() <= 14.0 {
            1
        } else {
            2 + (y >= 24) as u8 * 2 + (x >= 24) as u8
        }
    });
    save_image(&image, dir.path().join("x.png")).unwrap();
    save_label_map(&labels, dir.path().join("c.png")).unwrap();

    let run_synth = |out: &str| {
        let outdir = dir.path().join(out);
        let result = run(&[
            "synth-dataset",
            "--image",
            dir.path().join("x.png").to_str().unwrap(),
            "--labels",
            dir.path().join("c.png").to_str().unwrap(),
            "--out-dir",
            outdir.to_str().unwrap(),
            "--count",
            "4",
            "--seed",
            "9",
        ]);
        assert!(result.status.success(), "{result:?}");
        outdir
    };
    let a = run_synth("a");
    let b = run_synth("b");

    let records = std::fs::read_to_string(a.join("records.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = records
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty(), "no pairs emitted");
    for line in &lines {
        let scale = line["affine"]["scale"].as_f64().unwrap();
        let rot = line["affine"]["rotation_deg"].as_f64().unwrap();
        assert!((1.2..=1.5).contains(&scale));
        assert!(rot.abs() <= 15.0);
        let img_name = line["image"].as_str().unwrap();
        assert!(a.join(img_name).exists());
        // Identical seeds give byte-identical artifacts.
        assert_eq!(
            std::fs::read(a.join(img_name)).unwrap(),
            std::fs::read(b.join(img_name)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.join("records.jsonl")).unwrap(),
        std::fs::read(b.join("records.jsonl")).unwrap()
    );
}

#[test]
fn sample_keys_dump_has_three_channels_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 12, 12);
    let dump = dir.path().join("keys.hrt");
    let result = run(&[
        "sample-keys",
        "--image",
        dir.path().join("x.png").to_str().unwrap(),
        "--labels-src",
        dir.path().join("c.png").to_str().unwrap(),
        "--labels-tgt",
        dir.path().join("c.png").to_str().unwrap(),
        "--iters",
        "4",
        "--dump-keys",
        dump.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let tensor = load_tensor(&dump).unwrap();
    assert_eq!(tensor.height(), 12);
    assert_eq!(tensor.width(), 12);
    assert_eq!(tensor.channels(), 3 * 2 * 4);
    // Weights of real slots are non-negative and sum to ~1; padding slots
    // carry coordinate -1 and weight 0.
    for y in 0..12 {
        for x in 0..12 {
            let v = tensor.at(y, x);
            let mut sum = 0.0f64;
            for slot in 0..8 {
                let (ky, kx, kw) = (v[3 * slot], v[3 * slot + 1], v[3 * slot + 2]);
                assert!(kw >= 0.0);
                if ky < 0.0 {
                    assert_eq!((kx, kw), (-1.0, 0.0));
                }
                sum += kw as f64;
            }
            assert!((sum - 1.0).abs() < 1e-5, "weight sum {sum}");
        }
    }
}

#[test]
fn warp_accepts_the_full_sampler_flag_surface() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 16, 16);
    let mask = dir.path().join("mask.png");
    hrwarp_core::save_mask(
        &hrwarp_core::Mask::from_fn(16, 16, |y, x| (4..12).contains(&y) && (4..12).contains(&x)),
        &mask,
    )
    .unwrap();
    let out = dir.path().join("out.png");
    let result = run(&[
        "warp",
        "--image",
        dir.path().join("x.png").to_str().unwrap(),
        "--labels-src",
        dir.path().join("c.png").to_str().unwrap(),
        "--labels-tgt",
        dir.path().join("c.png").to_str().unwrap(),
        "--mask",
        mask.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--prop-mode",
        "raw",
        "--label-penalty",
        "off",
        "--reconstruction",
        "--seed",
        "3",
        "--iters",
        "6",
        "--particles",
        "1",
        "--init-samples",
        "2",
        "--w0",
        "8",
        "--lambda",
        "0.3",
        "--cutoff",
        "4",
        "--extra-prop",
        "1",
        "--gamma",
        "50",
        "--penalty-value",
        "500",
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    assert!(out.exists());
}

#[test]
fn cycle_loss_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    write_basic_inputs(dir.path(), 16, 16);
    let result = run(&[
        "cycle-loss",
        "--image",
        dir.path().join("x.png").to_str().unwrap(),
        "--labels-src",
        dir.path().join("c.png").to_str().unwrap(),
        "--labels-tgt",
        dir.path().join("c.png").to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8(result.stdout).unwrap().trim()).unwrap();
    assert!(v["cycle_loss"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["height"].as_u64().unwrap(), 4);
}
