use std::fs;
use std::path::Path;

use crackseg::pipeline::{run_pipeline, DatasetSource, PipelineConfig, Stage};
use crackseg::synth::{PhantomPreset, Recipe, StandardRecipe};
use sha2::{Digest, Sha256};

fn config(out: &Path, methods: &[&str]) -> PipelineConfig {
    PipelineConfig {
        dataset: DatasetSource::Recipe(Recipe::Standard(StandardRecipe {
            side_exp: 5,
            widths: vec![3],
            singles: 2,
            parallels: 2,
            orthogonals: 2,
            master_seed: 21,
            phantom: PhantomPreset::HighContrast,
            hurst: [0.5, 0.99],
            transition_sigma: None,
        })),
        methods: methods.iter().map(|s| s.to_string()).collect(),
        tolerances: vec![0, 1],
        out_dir: out.to_path_buf(),
        master_seed: 3,
        write_masks: true,
        evaluate_train: true,
    }
}

fn hashes(root: &Path, sub: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(root.join(sub))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex::encode(Sha256::digest(fs::read(&p).unwrap())))
        })
        .collect();
    out.sort();
    out
}

#[test]
fn full_run_writes_one_row_per_image_and_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&config(&dir.path().join("a"), &["frangi/w3/recall"])).unwrap();
    assert_eq!(out.rows.len(), 12);
    assert!(out.rows.iter().all(|r| r.width == 3 && r.method == "frangi/w3/recall"));
    assert_eq!(crackseg::eval::read_csv(&out.csv_path).unwrap(), out.rows);
    assert_eq!(out.provenance.status, "ok");
    let recall_at_1: Vec<f64> = out.rows.iter().filter(|r| r.tol == 1).map(|r| r.metrics.recall).collect();
    assert!(recall_at_1.iter().all(|&r| r > 0.5), "{recall_at_1:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&config(&a, &["sheet/w{w}/precision", "hp/w3/precision"])).unwrap();
    run_pipeline(&config(&b, &["sheet/w{w}/precision", "hp/w3/precision"])).unwrap();
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    for m in ["sheet-wX-precision", "hp-w3-precision"] {
        let (ha, hb) = (hashes(&a, &format!("masks/{m}")), hashes(&b, &format!("masks/{m}")));
        // header and payload per image
        assert_eq!(ha.len(), 12);
        assert_eq!(ha, hb);
    }
}

#[test]
fn unknown_preset_stops_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let err = run_pipeline(&config(&out, &["frangi/w3/recall", "sheet/w7/precision"])).unwrap_err();
    assert_eq!(err.stage, Stage::Validate);
    assert!(!out.join("data").exists());
}
