//! Random-forest voxel classifier over the feature bank: class-rebalanced
//! sampling, bootstrap CART trees with Gini splits, strict-majority voting
//! and a self-describing JSON model file.

mod tree;

pub use tree::{DecisionTree, Node, LEAF};

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{for_each_feature_slab, FeatureBankConfig};
use crate::seed;
use crate::volume::{BinaryMask, Volume};

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// z-planes per feature slab during training and prediction.
const SLAB_DEPTH: usize = 16;

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub dim: usize,
    pub features: Vec<f32>,
    pub labels: Vec<u8>,
    pub n_crack: usize,
    pub n_background: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn from_rows(rows: &[Vec<f32>], labels: &[u8]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.len() != labels.len() || rows.iter().any(|r| r.len() != dim) || dim == 0 {
            return Err(Error::Training("ragged or empty training rows".into()));
        }
        let n_crack = labels.iter().filter(|&&l| l == 1).count();
        Ok(TrainingSet {
            dim,
            features: rows.concat(),
            labels: labels.to_vec(),
            n_crack,
            n_background: labels.len() - n_crack,
        })
    }
}

/// Samples, per pair, up to `crack_cap` crack voxels and `bg_ratio` times as
/// many background voxels uniformly without replacement, and gathers their
/// feature vectors. Rows of a pair appear in ascending voxel order.
pub fn assemble_training(
    pairs: &[(Volume, BinaryMask)],
    bank: &FeatureBankConfig,
    crack_cap: usize,
    bg_ratio: f64,
    seed: u64,
) -> Result<TrainingSet> {
    bank.validate()?;
    if pairs.is_empty() {
        return Err(Error::Training("no training pairs".into()));
    }
    if !(bg_ratio >= 0.0 && bg_ratio.is_finite()) {
        return Err(Error::param(format!(
            "background ratio must be >= 0, got {bg_ratio}"
        )));
    }
    let dim = bank.len();
    let mut ts = TrainingSet {
        dim,
        features: Vec::new(),
        labels: Vec::new(),
        n_crack: 0,
        n_background: 0,
    };
    for (k, (gray, truth)) in pairs.iter().enumerate() {
        gray.dims().ensure_same(&truth.dims(), "training pair")?;
        let mut rng = seed::rng(seed::derive(seed, k as u64));
        let crack: Vec<usize> = truth.iter_ones().collect();
        let background: Vec<usize> = (0..truth.len()).filter(|&i| !truth.get(i)).collect();
        let nc = crack.len().min(crack_cap);
        let nb = ((nc as f64 * bg_ratio).round() as usize).min(background.len());
        let mut picked: Vec<(usize, u8)> = sample(&mut rng, crack.len(), nc)
            .into_iter()
            .map(|i| (crack[i], 1))
            .chain(
                sample(&mut rng, background.len(), nb)
                    .into_iter()
                    .map(|i| (background[i], 0)),
            )
            .collect();
        picked.sort_unstable();
        ts.n_crack += nc;
        ts.n_background += nb;
        if picked.is_empty() {
            continue;
        }
        let plane = gray.dims().nx * gray.dims().ny;
        let base = ts.labels.len();
        ts.labels.extend(picked.iter().map(|&(_, l)| l));
        ts.features.resize(ts.labels.len() * dim, 0.0);
        let mut cursor = 0;
        for_each_feature_slab(gray, bank, SLAB_DEPTH, |z0, z1, feats| {
            while cursor < picked.len() && picked[cursor].0 < z1 * plane {
                let local = picked[cursor].0 - z0 * plane;
                let row = &mut ts.features[(base + cursor) * dim..(base + cursor + 1) * dim];
                for (r, f) in row.iter_mut().zip(feats) {
                    *r = f.data()[local];
                }
                cursor += 1;
            }
            Ok(())
        })?;
    }
    if ts.n_crack == 0 {
        return Err(Error::Training(
            "no crack voxels in the training pairs".into(),
        ));
    }
    Ok(ts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` is `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestOptions {
    pub fn new(n_trees: usize, max_depth: usize, seed: u64) -> Self {
        ForestOptions {
            n_trees,
            max_depth,
            mtry: None,
            bootstrap: true,
            seed,
        }
    }
}

/// Training choices recorded with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestMeta {
    pub criterion: String,
    pub mtry: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub n_rows: usize,
    pub n_crack: usize,
    pub n_background: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub feature_bank: FeatureBankConfig,
    pub feature_names: Vec<String>,
    pub meta: ForestMeta,
    pub trees: Vec<DecisionTree>,
}

pub fn train_forest(
    ts: &TrainingSet,
    bank: &FeatureBankConfig,
    n_dt: usize,
    d_dt: usize,
    seed: u64,
) -> Result<Forest> {
    train_forest_with(ts, bank, &ForestOptions::new(n_dt, d_dt, seed))
}

pub fn train_forest_with(
    ts: &TrainingSet,
    bank: &FeatureBankConfig,
    o: &ForestOptions,
) -> Result<Forest> {
    if o.n_trees == 0 || o.max_depth == 0 {
        return Err(Error::param("forest needs at least one tree of depth >= 1"));
    }
    if ts.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if bank.len() != ts.dim {
        return Err(Error::Contract(format!(
            "training rows have {} features, bank defines {}",
            ts.dim,
            bank.len()
        )));
    }
    let mtry = o
        .mtry
        .unwrap_or(((ts.dim as f64).sqrt().floor() as usize).max(1))
        .clamp(1, ts.dim);
    let grow = tree::GrowParams {
        max_depth: o.max_depth,
        mtry,
    };
    let trees = (0..o.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(o.seed, t as u64));
            let rows = if o.bootstrap {
                tree::bootstrap(ts.len(), &mut rng)
            } else {
                (0..ts.len()).collect()
            };
            tree::grow(&ts.features, &ts.labels, ts.dim, rows, &grow, &mut rng)
        })
        .collect();
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        feature_bank: bank.clone(),
        feature_names: bank.names(),
        meta: ForestMeta {
            criterion: "gini".into(),
            mtry,
            max_depth: o.max_depth,
            bootstrap: o.bootstrap,
            seed: o.seed,
            n_rows: ts.len(),
            n_crack: ts.n_crack,
            n_background: ts.n_background,
        },
        trees,
    })
}

impl Forest {
    /// Strict majority of tree votes; ties are background.
    pub fn predict_row(&self, x: &[f32]) -> u8 {
        let votes: usize = self.trees.iter().map(|t| t.predict(x) as usize).sum();
        (2 * votes > self.trees.len()) as u8
    }

    /// Structural checks shared by loading and prediction.
    pub fn check(&self) -> Result<()> {
        if self.version != FOREST_FORMAT_VERSION {
            return Err(Error::Contract(format!(
                "forest format version {} (expected {FOREST_FORMAT_VERSION})",
                self.version
            )));
        }
        self.feature_bank.validate()?;
        if self.feature_names != self.feature_bank.names() {
            return Err(Error::Contract(
                "feature names do not match the embedded feature bank".into(),
            ));
        }
        if self.trees.is_empty() {
            return Err(Error::Contract("forest has no trees".into()));
        }
        let d = self.feature_names.len() as u32;
        for t in &self.trees {
            if t.nodes.is_empty() || t.max_feature().is_some_and(|f| f >= d) {
                return Err(Error::Contract(
                    "tree references a feature outside the bank".into(),
                ));
            }
            let n = t.nodes.len() as u32;
            if t.nodes
                .iter()
                .any(|nd| !nd.is_leaf() && (nd.left >= n || nd.right >= n))
            {
                return Err(Error::Contract("tree has a dangling child link".into()));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Forest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let forest: Forest = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        forest.check()?;
        Ok(forest)
    }
}

/// Classifies every voxel; the features are recomputed from `vol`.
pub fn predict_forest(forest: &Forest, vol: &Volume) -> Result<BinaryMask> {
    forest.check()?;
    let dims = vol.dims();
    let plane = dims.nx * dims.ny;
    let d = forest.feature_names.len();
    let mut mask = BinaryMask::empty(dims);
    for_each_feature_slab(vol, &forest.feature_bank, SLAB_DEPTH, |z0, z1, feats| {
        let n = (z1 - z0) * plane;
        let labels: Vec<u8> = (0..n)
            .into_par_iter()
            .with_min_len(256)
            .map_init(
                || vec![0.0f32; d],
                |row, i| {
                    for (r, f) in row.iter_mut().zip(feats) {
                        *r = f.data()[i];
                    }
                    forest.predict_row(row)
                },
            )
            .collect();
        for (i, &l) in labels.iter().enumerate() {
            if l == 1 {
                mask.set(z0 * plane + i, true);
            }
        }
        Ok(())
    })?;
    Ok(mask)
}

/// As [`predict_forest`], but first requires the forest to have been
/// trained on `bank`.
pub fn predict_forest_checked(
    forest: &Forest,
    vol: &Volume,
    bank: &FeatureBankConfig,
) -> Result<BinaryMask> {
    if &forest.feature_bank != bank {
        return Err(Error::Contract(
            "forest was trained on a different feature bank".into(),
        ));
    }
    predict_forest(forest, vol)
}
