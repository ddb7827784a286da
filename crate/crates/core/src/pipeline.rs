//! Declarative end-to-end runs: obtain a dataset, train forests where
//! needed, segment every evaluated volume and score it.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! data/manifest.json        generated dataset (recipe runs only)
//! models/<label>-w<W>.json  forests trained during the run
//! masks/<label>/<id>.mask   predicted masks
//! results.csv               one row per (method, image, tol)
//! summary.json              per-group statistics
//! provenance.json           version, config hash, stage timings, status
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate, summarize, write_csv, ResultRow};
use crate::forest::{assemble_training, train_forest, Forest};
use crate::presets::{MethodConfig, RfConfig};
use crate::seed::derive_named;
use crate::synth::{generate_dataset, Manifest, Recipe, Split};
use crate::volume::{read_mask, read_volume, standardize, write_mask};

/// Placeholder in a method spec replaced by each image's crack width.
pub const WIDTH_PLACEHOLDER: &str = "{w}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Manifest(PathBuf),
    Recipe(Recipe),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    /// Preset names or method files; `{w}` expands to the image width,
    /// e.g. `frangi/w{w}/recall`.
    pub methods: Vec<String>,
    pub tolerances: Vec<u32>,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub write_masks: bool,
    /// Also score the training split (useful when no method trains).
    #[serde(default)]
    pub evaluate_train: bool,
}

fn default_true() -> bool {
    true
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Validate,
    Generate,
    Train,
    Segment,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Validate => "validate",
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Segment => "segment",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub timings: Vec<StageTiming>,
    /// `ok`, or `failed` with the failing stage and message.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Set when a failure left some artifacts written.
    pub partial: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub rows: Vec<ResultRow>,
    pub provenance: Provenance,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// A method spec resolved for every width it will run on.
struct PlannedMethod {
    label: String,
    per_width: BTreeMap<usize, MethodConfig>,
}

fn method_label(spec: &str) -> String {
    let path = Path::new(spec);
    if path.extension().is_some_and(|e| e == "json") {
        if let Some(stem) = path.file_stem() {
            return stem.to_string_lossy().into_owned();
        }
    }
    spec.replace(WIDTH_PLACEHOLDER, "X")
}

fn plan_methods(specs: &[String], widths: &BTreeSet<usize>) -> Result<Vec<PlannedMethod>> {
    if specs.is_empty() {
        return Err(Error::Config("pipeline needs at least one method".into()));
    }
    let mut labels = BTreeSet::new();
    specs
        .iter()
        .map(|spec| {
            let label = method_label(spec);
            if !labels.insert(label.clone()) {
                return Err(Error::Config(format!("method {spec:?} listed twice")));
            }
            let mut per_width = BTreeMap::new();
            for &w in widths {
                let cfg = MethodConfig::resolve(&spec.replace(WIDTH_PLACEHOLDER, &w.to_string()))?;
                if matches!(cfg, MethodConfig::Unet(_)) {
                    return Err(Error::Config(format!(
                        "method {spec:?} is the U-Net baseline; score its masks with `evaluate` instead"
                    )));
                }
                per_width.insert(w, cfg);
            }
            Ok(PlannedMethod { label, per_width })
        })
        .collect()
}

fn dataset_widths(cfg: &PipelineConfig) -> Result<BTreeSet<usize>> {
    Ok(match &cfg.dataset {
        DatasetSource::Manifest(p) => Manifest::load(p)?.entries.iter().map(|e| e.width).collect(),
        DatasetSource::Recipe(r) => r.entries()?.iter().map(|e| e.crack.width).collect(),
    })
}

/// Trains a forest on the training split, restricted to `width` if given.
pub fn train_rf(
    manifest: &Manifest,
    rf: &RfConfig,
    width: Option<usize>,
    seed: u64,
) -> Result<Forest> {
    let entries: Vec<_> = manifest
        .with_split(Split::Train)
        .filter(|e| width.map_or(true, |w| e.width == w))
        .collect();
    if entries.is_empty() {
        let which = width.map_or("".to_string(), |w| format!(" of width {w}"));
        return Err(Error::Config(format!(
            "no training volumes{which} in the manifest"
        )));
    }
    let pairs = entries
        .iter()
        .map(|e| {
            let gray = read_volume(&manifest.resolve(&e.gray_path))?;
            let truth = read_mask(&manifest.resolve(&e.truth_path))?;
            Ok((standardize(&gray), truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let ts = assemble_training(
        &pairs,
        &rf.bank,
        rf.crack_cap,
        rf.bg_ratio,
        derive_named(seed, "rf-sample"),
    )?;
    train_forest(
        &ts,
        &rf.bank,
        rf.n_trees,
        rf.max_depth,
        derive_named(seed, "rf-trees"),
    )
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    timings: Vec<StageTiming>,
    wrote_anything: bool,
}

impl Run<'_> {
    fn stage<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> std::result::Result<T, StageError> {
        let t = Instant::now();
        let r = f(self);
        self.timings.push(StageTiming {
            stage,
            seconds: t.elapsed().as_secs_f64(),
        });
        r.map_err(|error| StageError { stage, error })
    }

    fn provenance(&self, failure: Option<&StageError>) -> Provenance {
        Provenance {
            tool: "crackseg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: self.cfg.hash(),
            master_seed: self.cfg.master_seed,
            timings: self.timings.clone(),
            status: if failure.is_some() { "failed" } else { "ok" }.into(),
            failed_stage: failure.map(|f| f.stage),
            error: failure.map(|f| f.error.to_string()),
            partial: failure.is_some() && self.wrote_anything,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs every stage; on failure the provenance file still records the
/// failing stage before the error is returned.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<PipelineOutcome, StageError> {
    let mut run = Run {
        cfg,
        timings: Vec::new(),
        wrote_anything: false,
    };
    let result = execute(&mut run);
    let provenance = run.provenance(result.as_ref().err());
    let prov_path = cfg.out_dir.join("provenance.json");
    if cfg.out_dir.is_dir() {
        write_json(&prov_path, &provenance).map_err(|error| StageError {
            stage: Stage::Report,
            error,
        })?;
    }
    result.map(|(rows, csv_path, summary_path)| PipelineOutcome {
        rows,
        provenance,
        csv_path,
        summary_path,
    })
}

type Artifacts = (Vec<ResultRow>, PathBuf, PathBuf);

fn execute(run: &mut Run<'_>) -> std::result::Result<Artifacts, StageError> {
    let cfg = run.cfg;
    let plan = run.stage(Stage::Validate, |_| {
        if cfg.tolerances.is_empty() {
            return Err(Error::Config(
                "pipeline needs at least one tolerance".into(),
            ));
        }
        if let DatasetSource::Manifest(p) = &cfg.dataset {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "manifest {} does not exist",
                    p.display()
                )));
            }
        }
        let plan = plan_methods(&cfg.methods, &dataset_widths(cfg)?)?;
        create_dir(&cfg.out_dir)?;
        Ok(plan)
    })?;

    let manifest = run.stage(Stage::Generate, |run| match &cfg.dataset {
        DatasetSource::Manifest(p) => Manifest::load(p),
        DatasetSource::Recipe(r) => {
            run.wrote_anything = true;
            generate_dataset(&r.entries()?, &cfg.out_dir.join("data"))
        }
    })?;

    let forests = run.stage(Stage::Train, |run| {
        let mut forests: BTreeMap<(String, usize), Forest> = BTreeMap::new();
        for m in &plan {
            for (&w, mc) in &m.per_width {
                let MethodConfig::Rf(rf) = mc else { continue };
                let forest = match &rf.model {
                    Some(path) => Forest::load(path)?,
                    None => {
                        let f = train_rf(
                            &manifest,
                            rf,
                            Some(w),
                            derive_named(cfg.master_seed, &format!("{}-w{w}", m.label)),
                        )?;
                        let dir = cfg.out_dir.join("models");
                        create_dir(&dir)?;
                        run.wrote_anything = true;
                        f.save(&dir.join(format!("{}-w{w}.json", m.label.replace('/', "-"))))?;
                        f
                    }
                };
                forests.insert((m.label.clone(), w), forest);
            }
        }
        Ok(forests)
    })?;

    let rows = run.stage(Stage::Segment, |run| {
        let images: Vec<_> = manifest
            .entries
            .iter()
            .filter(|e| cfg.evaluate_train || e.split.is_evaluated())
            .collect();
        let mut rows = Vec::new();
        for m in &plan {
            let mask_dir = cfg.out_dir.join("masks").join(m.label.replace('/', "-"));
            if cfg.write_masks {
                create_dir(&mask_dir)?;
                run.wrote_anything = true;
            }
            let per_image: Vec<Vec<ResultRow>> = images
                .par_iter()
                .map(|e| {
                    let gray = read_volume(&manifest.resolve(&e.gray_path))?;
                    let truth = read_mask(&manifest.resolve(&e.truth_path))?;
                    let mc = &m.per_width[&e.width];
                    let mask = crate::presets::segment(
                        &gray,
                        mc,
                        forests.get(&(m.label.clone(), e.width)),
                    )?;
                    if cfg.write_masks {
                        write_mask(&mask_dir.join(format!("{}.mask", e.id)), &mask)?;
                    }
                    cfg.tolerances
                        .iter()
                        .map(|&tol| {
                            Ok(ResultRow {
                                method: m.label.clone(),
                                width: e.width,
                                image_id: e.id.clone(),
                                tol,
                                metrics: evaluate(&mask, &truth, tol)?,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            rows.extend(per_image.into_iter().flatten());
        }
        Ok(rows)
    })?;

    let (csv_path, summary_path) = run.stage(Stage::Report, |run| {
        run.wrote_anything = true;
        let csv_path = cfg.out_dir.join("results.csv");
        write_csv(&rows, &csv_path)?;
        let summary_path = cfg.out_dir.join("summary.json");
        if !rows.is_empty() {
            write_json(&summary_path, &summarize(&rows)?)?;
        }
        Ok((csv_path, summary_path))
    })?;
    Ok((rows, csv_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{PhantomPreset, StandardRecipe};

    fn small_recipe() -> Recipe {
        Recipe::Standard(StandardRecipe {
            side_exp: 5,
            widths: vec![3],
            singles: 2,
            parallels: 0,
            orthogonals: 0,
            master_seed: 3,
            phantom: PhantomPreset::HighContrast,
            hurst: [0.5, 0.99],
            transition_sigma: None,
        })
    }

    #[test]
    fn unknown_preset_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            dataset: DatasetSource::Recipe(small_recipe()),
            methods: vec!["frangi/w7/recall".into()],
            tolerances: vec![0],
            out_dir: dir.path().join("out"),
            master_seed: 1,
            write_masks: true,
            evaluate_train: false,
        };
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Validate);
        assert!(!cfg.out_dir.exists());
    }

    #[test]
    fn width_placeholder_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            dataset: DatasetSource::Recipe(small_recipe()),
            methods: vec!["sheet/w{w}/recall".into()],
            tolerances: vec![0, 1],
            out_dir: dir.path().to_path_buf(),
            master_seed: 1,
            write_masks: true,
            evaluate_train: false,
        };
        let out = run_pipeline(&cfg).unwrap();
        // one of the two singles trains, the other is evaluated
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.method == "sheet/wX/recall"));
        assert_eq!(out.provenance.status, "ok");
        assert!(dir.path().join("masks/sheet-wX-recall").is_dir());
        assert!(dir.path().join("provenance.json").is_file());
    }
}
