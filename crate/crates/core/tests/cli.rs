use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use cadeval::io::{read_records, sphere_mask, write_records, MaskContainer, PredictionRow};
use cadeval::model::Detection;
use serde_json::Value;

fn cadeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cadeval"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    cadeval(args).status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn synth(dir: &Path, seed: &str) -> String {
    let out = s(&dir.join("cohort"));
    assert_eq!(code(&["synth", "--seed", seed, "--out", &out]), 0);
    out
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["roc", "--help"]), 0);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["roc"]), 2);
    assert_eq!(
        code(&[
            "roc",
            "--cohort",
            "/nonexistent",
            "--out",
            "/tmp/x",
            "--orientation",
            "sideways"
        ]),
        2
    );
}

#[test]
fn missing_input_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("o"));
    assert_eq!(
        code(&["roc", "--cohort", &s(&dir.path().join("missing")), "--out", &out]),
        2
    );
}

#[test]
fn synth_cohort_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "1");
    let o = cadeval(&["validate", "--cohort", &cohort]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dangling_detection_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "1");
    let det_path = Path::new(&cohort).join("detections.ndrec");
    let mut dets: Vec<Detection> = read_records(&det_path).unwrap();
    dets[0].scan_id = "no-such-scan".into();
    write_records(&det_path, &dets).unwrap();
    let o = cadeval(&["validate", "--cohort", &cohort]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-scan"));
    let out = s(&dir.path().join("roc"));
    assert_eq!(code(&["roc", "--cohort", &cohort, "--out", &out]), 2);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "2");
    let mut digests = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("froc{threads}"));
        let args = [
            "froc",
            "--cohort",
            &cohort,
            "--boot",
            "100",
            "--seed",
            "9",
            "--threads",
            threads,
            "--out",
            &s(&out),
        ];
        assert_eq!(code(&args), 0);
        digests.push(std::fs::read(out.join("froc.json")).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
    let report = json(&dir.path().join("froc1/froc.json"));
    let cpm = report["cpm"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cpm));
}

#[test]
fn tabular_format_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "4");
    let out = dir.path().join("roc");
    let args = [
        "roc",
        "--cohort",
        &cohort,
        "--format",
        "tabular",
        "--plot",
        "--out",
        &s(&out),
    ];
    assert_eq!(code(&args), 0);
    for f in ["roc.csv", "roc_summary.csv", "roc.svg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let head = std::fs::read_to_string(out.join("roc_summary.csv")).unwrap();
    assert!(head.contains("auc"));
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "5");
    let out = dir.path().join("cpm");
    assert_eq!(code(&["cpm", "--cohort", &cohort, "--out", &s(&out)]), 0);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["timestamp"], 0);
    assert_eq!(m["command_line"][1], "cpm");
    assert!(m["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|i| i["path"].as_str().unwrap().ends_with("detections.ndrec")));
    assert!(m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o["path"].as_str().unwrap().ends_with("cpm.json")));
}

#[test]
fn compare_needs_two_predictions_and_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "6");
    let det = format!("{cohort}/detections.ndrec");
    let out = s(&dir.path().join("cmp"));
    assert_eq!(
        code(&["compare", "--cohort", &cohort, "--pred", &det, "--boot", "50", "--out", &out]),
        2
    );
    assert_eq!(
        code(&["compare", "--cohort", &cohort, "--pred", &det, "--pred", &det, "--out", &out]),
        2
    );
    let args = [
        "compare", "--cohort", &cohort, "--pred", &det, "--pred", &det, "--boot", "50", "--out", &out,
    ];
    assert_eq!(code(&args), 0);
    let r = json(&dir.path().join("cmp/compare.json"));
    assert_eq!(r["welch"]["p_value"].as_f64(), Some(0.5));
}

#[test]
fn growth_and_subgroup_run_on_synth() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "7");
    let g = dir.path().join("growth");
    assert_eq!(code(&["growth", "--cohort", &cohort, "--out", &s(&g)]), 0);
    for f in ["growth.json", "growth_roc.json", "growth_ranks.json"] {
        assert!(g.join(f).exists(), "{f}");
    }
    for axis in ["diameter_range", "manufacturer", "kernel_sharpness", "sex"] {
        let o = dir.path().join(axis);
        assert_eq!(
            code(&["subgroup", "--cohort", &cohort, "--axis", axis, "--out", &s(&o)]),
            0,
            "{axis}"
        );
    }
    assert_eq!(
        code(&["subgroup", "--cohort", &cohort, "--axis", "shoe_size", "--out", &s(&g)]),
        2
    );
}

fn rows(n: usize) -> Vec<PredictionRow> {
    (0..n)
        .map(|i| {
            let y = i % 3 == 0;
            let base = if y { 0.7 } else { 0.3 };
            let jitter = ((i * 37) % 17) as f64 / 40.0 - 0.2;
            PredictionRow {
                id: format!("p{i:03}"),
                label: Some(y),
                values: BTreeMap::from([
                    ("a:1".to_string(), (base + jitter).clamp(0.01, 0.99)),
                    ("a:2".to_string(), (base - jitter).clamp(0.01, 0.99)),
                    ("b:1".to_string(), (0.5 + jitter).clamp(0.01, 0.99)),
                ]),
            }
        })
        .collect()
}

#[test]
fn ensemble_then_calibrate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tune = dir.path().join("tune.ndrec");
    write_records(&tune, &rows(90)).unwrap();
    let fit = dir.path().join("fit");
    assert_eq!(
        code(&[
            "ensemble",
            "fit",
            "--classes",
            "a:,b:",
            "--tune",
            &s(&tune),
            "--out",
            &s(&fit)
        ]),
        0
    );
    let w = json(&fit.join("weights.json"));
    let sum: f64 = w["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((sum - 1.0).abs() < 1e-9);

    let app = dir.path().join("apply");
    let weights = s(&fit.join("weights.json"));
    assert_eq!(
        code(&[
            "ensemble",
            "apply",
            "--weights",
            &weights,
            "--pred",
            &s(&tune),
            "--out",
            &s(&app)
        ]),
        0
    );
    let blended = app.join("predictions.ndrec");
    assert_eq!(read_records::<PredictionRow>(&blended).unwrap().len(), 90);

    let cal = dir.path().join("cal");
    assert_eq!(
        code(&["calibrate", "fit", "--tune", &s(&blended), "--out", &s(&cal)]),
        0
    );
    let r = json(&cal.join("calibration_fit.json"));
    assert!(r["nll_after"].as_f64().unwrap() <= r["nll_before"].as_f64().unwrap());

    let done = dir.path().join("done");
    let params = s(&cal.join("calibration.json"));
    assert_eq!(
        code(&[
            "calibrate",
            "apply",
            "--params",
            &params,
            "--pred",
            &s(&blended),
            "--out",
            &s(&done)
        ]),
        0
    );
    let out: Vec<PredictionRow> = read_records(&done.join("predictions.ndrec")).unwrap();
    assert!(out.iter().all(|r| (0.0..=1.0).contains(&r.values["calibrated"])));

    assert_eq!(
        code(&[
            "ensemble",
            "fit",
            "--classes",
            "zz:",
            "--tune",
            &s(&tune),
            "--out",
            &s(&fit)
        ]),
        2
    );
}

#[test]
fn measure_reports_sphere_diameter() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ball.vmask");
    sphere_mask([0, 0, 0], 6.0, [1.0, 1.0, 1.0])
        .unwrap()
        .write_vmask(&p)
        .unwrap();
    let out = dir.path().join("m");
    for method in ["v1", "v2"] {
        assert_eq!(
            code(&["measure", "--mask", &s(&p), "--method", method, "--out", &s(&out)]),
            0
        );
        let r = json(&out.join("measure.json"));
        let mean = r["measurements"][0]["mean_mm"]
            .as_f64()
            .unwrap_or_else(|| panic!("{r}"));
        assert!((mean - 12.0).abs() <= 1.0, "{method}: {mean}");
    }
}

#[test]
fn dedup_merges_overlapping_masks() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth(dir.path(), "8");
    let det_path = Path::new(&cohort).join("detections.ndrec");
    let mut dets: Vec<Detection> = read_records(&det_path).unwrap();
    let scan = dets[0].scan_id.clone();
    let masks = Path::new(&cohort).join("masks");
    std::fs::create_dir_all(&masks).unwrap();
    let a = sphere_mask([20, 20, 20], 5.0, [1.0; 3]).unwrap();
    let b = sphere_mask([22, 20, 20], 5.0, [1.0; 3]).unwrap();
    for (name, m) in [("dup_a", &a), ("dup_b", &b)] {
        m.write_vmask(&masks.join(format!("{name}.vmask"))).unwrap();
        let mut d = dets[0].clone();
        d.detection_id = name.into();
        d.scan_id = scan.clone();
        d.bbox = m.bbox().unwrap();
        d.mask_ref = Some(name.into());
        d.score = if name == "dup_a" { 0.9 } else { 0.4 };
        dets.push(d);
    }
    write_records(&det_path, &dets).unwrap();
    let out = dir.path().join("dedup");
    let o = cadeval(&[
        "dedup",
        "--cohort",
        &cohort,
        "--min-mm",
        "4",
        "--max-mm",
        "40",
        "--out",
        &s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("dedup.json"));
    assert_eq!(r["n_with_mask"], 2);
    let kept: Vec<Detection> = read_records(&out.join("detections.ndrec")).unwrap();
    let masked: Vec<&Detection> = kept.iter().filter(|d| d.mask_ref.is_some()).collect();
    let voxels: Vec<Vec<[i64; 3]>> = masked
        .iter()
        .map(|d| {
            let m = MaskContainer::read_vmask(
                &out.join("masks")
                    .join(format!("{}.vmask", d.mask_ref.as_ref().unwrap())),
            );
            m.unwrap().global_voxels().collect()
        })
        .collect();
    for i in 0..voxels.len() {
        for j in i + 1..voxels.len() {
            assert!(voxels[i].iter().all(|v| !voxels[j].contains(v)));
        }
    }
    assert!(masked.iter().all(|d| d.derived_diameter.is_some()));
}

#[test]
fn readers_pooled_roc() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"n_patients": 60, "n_readers": 3}"#).unwrap();
    let cohort = s(&dir.path().join("cohort"));
    assert_eq!(
        code(&["synth", "--spec", &s(&spec), "--seed", "9", "--out", &cohort]),
        0
    );
    let out = dir.path().join("readers");
    let o = cadeval(&["readers", "--cohort", &cohort, "--plot", "--out", &s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("readers.svg").exists());
}
