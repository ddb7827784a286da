//! `crackseg`: generate synthetic crack volumes, segment them, train the
//! random forest, score masks, tune parameters and run whole pipelines.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data error, 4 compute error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crackseg::eval::{
    coordinate_grid_search, evaluate, read_csv, summarize, GridSpec, Objective, ParamPoint,
};
use crackseg::forest::{assemble_training, train_forest_with, Forest, ForestOptions};
use crackseg::hessian::FeatureBankConfig;
use crackseg::paths::hessian_percolation;
use crackseg::pipeline::{run_pipeline, PipelineConfig};
use crackseg::presets::{segment, MethodConfig};
use crackseg::seed::derive_named;
use crackseg::synth::{generate_dataset, Manifest, PhantomPreset, Recipe, Split, StandardRecipe};
use crackseg::volume::{read_mask, read_volume, standardize, write_mask};
use crackseg::{BinaryMask, Error, Result};

#[derive(Parser)]
#[command(
    name = "crackseg",
    version,
    about = "Synthetic 3D crack volumes, crack segmentation and evaluation"
)]
struct Cli {
    /// Master seed for anything random.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and its manifest.
    Generate(GenerateArgs),
    /// Segment one gray volume.
    Segment(SegmentArgs),
    /// Train a random forest on the training split of a manifest.
    TrainRf(TrainRfArgs),
    /// Score a predicted mask against the truth.
    Evaluate(EvaluateArgs),
    /// Coordinate grid search on one manifest pair.
    Tune(TuneArgs),
    /// Summarize result CSVs.
    Report(ReportArgs),
    /// Run a declarative pipeline config.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomArg {
    Concrete,
    HighContrast,
}

#[derive(Args)]
struct GenerateArgs {
    /// Recipe JSON; without it the standard layout below is used.
    #[arg(long)]
    recipe: Option<PathBuf>,
    /// Volume side is 2^side_exp.
    #[arg(long, default_value_t = 8)]
    side_exp: u32,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    widths: Vec<usize>,
    /// Volumes per arrangement (single, parallel, orthogonal) and width.
    #[arg(long, default_value_t = 7)]
    per_arrangement: usize,
    #[arg(long, value_enum, default_value_t = PhantomArg::Concrete)]
    phantom: PhantomArg,
}

#[derive(Args)]
struct SegmentArgs {
    /// Preset name, method file, or bare method name used with --params.
    #[arg(long)]
    method: String,
    /// Parameter JSON for a bare method name.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Trained forest for `rf`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Percolation seeds taken from this mask instead of the Frangi preselection.
    #[arg(long, conflicts_with = "preselect_frangi")]
    preselect: Option<PathBuf>,
    /// Frangi parameter JSON for the percolation preselection.
    #[arg(long)]
    preselect_frangi: Option<PathBuf>,
    input: PathBuf,
    /// Output mask; `--out` works too.
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRfArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Feature bank JSON; the 60-feature default otherwise.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Only train on volumes of this crack width.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 50)]
    depth: usize,
    /// Features tried per split; floor(sqrt(d)) by default.
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    crack_cap: usize,
    #[arg(long, default_value_t = 4.0)]
    bg_ratio: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    tol: Vec<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Precision,
    Recall,
    F1,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Precision => Objective::Precision,
            ObjectiveArg::Recall => Objective::Recall,
            ObjectiveArg::F1 => Objective::F1,
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    /// Base configuration: preset name or method file.
    #[arg(long)]
    method: String,
    /// Grid JSON (`params`, `objective`, `min_complement`).
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Manifest entry id to tune on.
    #[arg(long)]
    pair: String,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, conflicts_with = "min_precision")]
    min_recall: Option<f64>,
    #[arg(long)]
    min_precision: Option<f64>,
    #[arg(long, default_value_t = 1)]
    tol: u32,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Result CSVs to merge.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        crackseg::error::ErrorClass::Config => 2,
        crackseg::error::ErrorClass::Data => 3,
        crackseg::error::ErrorClass::Compute => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(&cli, a),
        Command::Segment(a) => cmd_segment(&cli, a),
        Command::TrainRf(a) => cmd_train_rf(&cli, a),
        Command::Evaluate(a) => cmd_evaluate(&cli, a),
        Command::Tune(a) => cmd_tune(&cli, a),
        Command::Report(a) => cmd_report(&cli, a),
        Command::Pipeline(a) => match cmd_pipeline(&cli, a) {
            Ok(()) => Ok(()),
            Err(Failure::Stage(e)) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e.error));
            }
            Err(Failure::Plain(e)) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn required_out(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| Error::Config(format!("--out is required: {what}")))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Prints JSON to stdout, or writes it when `--out` is given.
fn emit(cli: &Cli, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &cli.out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let out = required_out(cli, "dataset directory")?;
    let entries = match &a.recipe {
        Some(p) => Recipe::load(p)?.entries()?,
        None => StandardRecipe {
            side_exp: a.side_exp,
            widths: a.widths.clone(),
            singles: a.per_arrangement,
            parallels: a.per_arrangement,
            orthogonals: a.per_arrangement,
            master_seed: cli.seed.unwrap_or(0),
            phantom: match a.phantom {
                PhantomArg::Concrete => PhantomPreset::Concrete,
                PhantomArg::HighContrast => PhantomPreset::HighContrast,
            },
            hurst: [0.5, 0.99],
            transition_sigma: None,
        }
        .entries()?,
    };
    let m = generate_dataset(&entries, &out)?;
    eprintln!(
        "generated {} volumes ({} train, {} val, {} eval) in {}",
        m.entries.len(),
        m.count(Split::Train),
        m.count(Split::Val),
        m.count(Split::Eval),
        out.display()
    );
    Ok(())
}

fn resolve_method(spec: &str, params: Option<&Path>) -> Result<MethodConfig> {
    match params {
        Some(p) => {
            let mut v = read_json(p)?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("{} is not a JSON object", p.display())))?;
            obj.insert("method".into(), Value::from(spec));
            MethodConfig::from_value(v)
        }
        None => MethodConfig::resolve(spec),
    }
}

fn load_forest(model: Option<&Path>, cfg: &MethodConfig) -> Result<Option<Forest>> {
    let path = match (model, cfg) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, MethodConfig::Rf(rf)) => rf.model.clone(),
        _ => None,
    };
    path.map(|p| Forest::load(&p)).transpose()
}

fn cmd_segment(cli: &Cli, a: &SegmentArgs) -> Result<()> {
    let output = a
        .output
        .clone()
        .or_else(|| cli.out.clone())
        .ok_or_else(|| Error::Config("segment needs an output mask path".into()))?;
    let mut cfg = resolve_method(&a.method, a.params.as_deref())?;
    let gray = read_volume(&a.input)?;
    if let (Some(p), MethodConfig::Percolation(hp)) = (&a.preselect_frangi, &mut cfg) {
        let mut v = read_json(p)?;
        v["method"] = Value::from("frangi");
        let MethodConfig::Frangi(f) = MethodConfig::from_value(v)? else {
            unreachable!("tagged frangi")
        };
        hp.preselect = f;
    }
    let mask = match (&a.preselect, &cfg) {
        (Some(p), MethodConfig::Percolation(hp)) => {
            cfg.validate()?;
            let pre: BinaryMask = read_mask(p)?;
            hessian_percolation(&standardize(&gray), &pre, &hp.params())?
        }
        (Some(_), _) => {
            return Err(Error::Config(
                "--preselect only applies to percolation".into(),
            ))
        }
        _ => {
            let forest = load_forest(a.model.as_deref(), &cfg)?;
            segment(&gray, &cfg, forest.as_ref())?
        }
    };
    write_mask(&output, &mask)?;
    eprintln!(
        "{}: {} crack voxels -> {}",
        cfg.name(),
        mask.count_ones(),
        output.display()
    );
    Ok(())
}

fn cmd_train_rf(cli: &Cli, a: &TrainRfArgs) -> Result<()> {
    let out = required_out(cli, "forest file")?;
    let manifest = Manifest::load(&a.pairs)?;
    let bank = match &a.bank {
        Some(p) => serde_json::from_value(read_json(p)?)
            .map_err(|e| Error::Config(format!("feature bank: {e}")))?,
        None => FeatureBankConfig::table1(),
    };
    let pairs = manifest
        .with_split(Split::Train)
        .filter(|e| a.width.map_or(true, |w| e.width == w))
        .map(|e| {
            let gray = read_volume(&manifest.resolve(&e.gray_path))?;
            Ok((
                standardize(&gray),
                read_mask(&manifest.resolve(&e.truth_path))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(Error::Config("no training volumes selected".into()));
    }
    let seed = cli.seed.unwrap_or(0);
    let ts = assemble_training(
        &pairs,
        &bank,
        a.crack_cap,
        a.bg_ratio,
        derive_named(seed, "rf-sample"),
    )?;
    let opts = ForestOptions {
        mtry: a.mtry,
        ..ForestOptions::new(a.trees, a.depth, derive_named(seed, "rf-trees"))
    };
    let forest = train_forest_with(&ts, &bank, &opts)?;
    forest.save(&out)?;
    eprintln!(
        "trained {} trees on {} rows ({} crack) -> {}",
        forest.trees.len(),
        ts.len(),
        ts.n_crack,
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let pred = read_mask(&a.pred)?;
    let truth = read_mask(&a.truth)?;
    let rows = a
        .tol
        .iter()
        .map(|&tol| {
            let m = evaluate(&pred, &truth, tol)?;
            Ok(json!({"tol": tol, "precision": m.precision, "recall": m.recall, "f1": m.f1}))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(cli, &Value::Array(rows))
}

fn cmd_tune(cli: &Cli, a: &TuneArgs) -> Result<()> {
    let base = MethodConfig::resolve(&a.method)?;
    let mut grid: GridSpec = serde_json::from_value(read_json(&a.grid)?)
        .map_err(|e| Error::Config(format!("grid: {e}")))?;
    if let Some(o) = a.objective {
        grid.objective = o.into();
    }
    if let Some(r) = a.min_recall {
        grid.min_complement = r;
    }
    if let Some(p) = a.min_precision {
        grid.min_complement = p;
    }
    grid.validate()?;
    let manifest = Manifest::load(&a.manifest)?;
    let entry = manifest
        .get(&a.pair)
        .ok_or_else(|| Error::Config(format!("manifest has no entry {:?}", a.pair)))?;
    let gray = read_volume(&manifest.resolve(&entry.gray_path))?;
    let truth = read_mask(&manifest.resolve(&entry.truth_path))?;
    let forest = load_forest(a.model.as_deref(), &base)?;
    let mut start = ParamPoint::new();
    for p in &grid.params {
        let v = base.param_value(&p.name).ok_or_else(|| {
            Error::Config(format!(
                "method {} has no parameter {:?}",
                base.name(),
                p.name
            ))
        })?;
        start.insert(p.name.clone(), v);
    }
    let result = coordinate_grid_search(
        |point| segment(&gray, &base.with_params(point)?, forest.as_ref()),
        &truth,
        &grid,
        &start,
        a.tol,
    )?;
    if !result.constraint_satisfied {
        eprintln!("warning: no grid point met the constraint; reporting the unconstrained best");
    }
    emit(cli, &serde_json::to_value(&result)?)
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.csv {
        rows.extend(read_csv(p)?);
    }
    let summary = summarize(&rows)?;
    emit(cli, &serde_json::to_value(&summary)?)
}

enum Failure {
    Stage(crackseg::pipeline::StageError),
    Plain(Error),
}

fn cmd_pipeline(cli: &Cli, a: &PipelineArgs) -> std::result::Result<(), Failure> {
    let mut cfg = PipelineConfig::load(&a.config).map_err(Failure::Plain)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    let outcome = run_pipeline(&cfg).map_err(Failure::Stage)?;
    eprintln!(
        "{} result rows -> {} ({})",
        outcome.rows.len(),
        outcome.csv_path.display(),
        outcome.summary_path.display()
    );
    Ok(())
}
