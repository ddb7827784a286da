//! Dataset recipes, generation and the manifest shared with downstream tools.
//!
//! Manifest layout (paths relative to the manifest's directory):
//!
//! ```json
//! {"entries":[{"id":"w3-single-00","width":3,"arrangement":"single",
//!   "gray_path":"w3-single-00.gray","truth_path":"w3-single-00.truth",
//!   "split":"train","seeds":{"crack":1,"phantom":2,"composite":3}}]}
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::composite::{composite, CompositeParams};
use super::crack::{crack_mask, Arrangement, CrackSpec, HeightAxis};
use super::phantom::{synthesize_background, PhantomSpec};
use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{read_volume, write_mask, write_volume, Dims, Volume};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Phantom(PhantomSpec),
    /// A user-supplied gray volume of the crack's dims.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub crack: CrackSpec,
    pub background: Background,
    pub composite: CompositeParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomPreset {
    Concrete,
    HighContrast,
}

impl PhantomPreset {
    pub fn spec(self, dims: Dims, seed: u64) -> PhantomSpec {
        match self {
            PhantomPreset::Concrete => PhantomSpec::concrete(dims, seed),
            PhantomPreset::HighContrast => PhantomSpec::high_contrast(dims, seed),
        }
    }

    pub fn transition_sigma(self) -> f64 {
        match self {
            PhantomPreset::Concrete => 1.0,
            PhantomPreset::HighContrast => 0.7,
        }
    }
}

/// Width groups with a fixed number of volumes per arrangement, all seeds
/// derived from one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardRecipe {
    pub side_exp: u32,
    pub widths: Vec<usize>,
    pub singles: usize,
    pub parallels: usize,
    pub orthogonals: usize,
    pub master_seed: u64,
    pub phantom: PhantomPreset,
    #[serde(default = "default_hurst")]
    pub hurst: [f64; 2],
    #[serde(default)]
    pub transition_sigma: Option<f64>,
}

fn default_hurst() -> [f64; 2] {
    [0.5, 0.99]
}

impl StandardRecipe {
    /// Sixty volumes of side 256: widths 1, 3, 5 with 8 single, 6 parallel
    /// and 6 orthogonal cracks each.
    pub fn full(master_seed: u64) -> Self {
        StandardRecipe {
            side_exp: 8,
            widths: vec![1, 3, 5],
            singles: 8,
            parallels: 6,
            orthogonals: 6,
            master_seed,
            phantom: PhantomPreset::Concrete,
            hurst: default_hurst(),
            transition_sigma: None,
        }
    }

    pub fn entries(&self) -> Result<Vec<RecipeEntry>> {
        let [h_lo, h_hi] = self.hurst;
        if !(h_lo > 0.0 && h_lo <= h_hi && h_hi <= 1.0) {
            return Err(Error::param(format!(
                "hurst range {:?} must lie in (0,1]",
                self.hurst
            )));
        }
        let dims = Dims::cube(1 << self.side_exp);
        let sigma = self
            .transition_sigma
            .unwrap_or(self.phantom.transition_sigma());
        let mut out = Vec::new();
        for &width in &self.widths {
            let groups = [
                (Arrangement::Single, self.singles),
                (Arrangement::Parallel, self.parallels),
                (Arrangement::Orthogonal, self.orthogonals),
            ];
            for (arrangement, count) in groups {
                for k in 0..count {
                    let entry_seed = seed::derive(self.master_seed, out.len() as u64);
                    let mut rng = seed::rng(seed::derive_named(entry_seed, "hurst"));
                    let hurst = if h_hi > h_lo {
                        rng.gen_range(h_lo..=h_hi)
                    } else {
                        h_lo
                    };
                    let plane = [HeightAxis::Z, HeightAxis::X, HeightAxis::Y][rng.gen_range(0..3)];
                    let phantom = self
                        .phantom
                        .spec(dims, seed::derive_named(entry_seed, "phantom"));
                    let params = CompositeParams::from_pores(
                        &phantom,
                        sigma,
                        seed::derive_named(entry_seed, "composite"),
                    );
                    out.push(RecipeEntry {
                        id: Some(format!("w{width}-{}-{k:02}", arrangement.as_str())),
                        crack: CrackSpec {
                            n: self.side_exp,
                            hurst,
                            width,
                            plane,
                            count: arrangement.crack_count(),
                            arrangement,
                            seed: seed::derive_named(entry_seed, "crack"),
                        },
                        background: Background::Phantom(phantom),
                        composite: params,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Recipe file: either explicit entries or a standard layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Entries(Vec<RecipeEntry>),
    Standard(StandardRecipe),
}

impl Recipe {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self) -> Result<Vec<RecipeEntry>> {
        match self {
            Recipe::Entries(e) => Ok(e.clone()),
            Recipe::Standard(s) => s.entries(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Eval,
}

impl Split {
    /// Validation volumes are evaluated too; only training volumes are held out.
    pub fn is_evaluated(self) -> bool {
        self != Split::Train
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySeeds {
    pub crack: u64,
    pub phantom: u64,
    pub composite: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub width: usize,
    pub arrangement: Arrangement,
    pub hurst: f64,
    pub gray_path: PathBuf,
    pub truth_path: PathBuf,
    pub split: Split,
    pub seeds: EntrySeeds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.base_dir.join(rel)
        }
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn evaluated(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split.is_evaluated())
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn count(&self, split: Split) -> usize {
        self.with_split(split).count()
    }
}

/// Per width group: the first volume of each arrangement trains, the next
/// remaining volume validates, everything else is evaluation only.
pub fn assign_splits(entries: &[(usize, Arrangement)]) -> Vec<Split> {
    let mut splits = vec![Split::Eval; entries.len()];
    let mut trained: HashMap<(usize, Arrangement), ()> = HashMap::new();
    for (i, &(w, a)) in entries.iter().enumerate() {
        if trained.insert((w, a), ()).is_none() {
            splits[i] = Split::Train;
        }
    }
    let mut validated: HashMap<usize, ()> = HashMap::new();
    for (i, &(w, _)) in entries.iter().enumerate() {
        if splits[i] == Split::Eval && !validated.contains_key(&w) {
            validated.insert(w, ());
            splits[i] = Split::Val;
        }
    }
    splits
}

/// One generated (gray, truth) pair in memory.
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub gray: Volume,
    pub truth: crate::volume::BinaryMask,
}

pub fn generate_pair(entry: &RecipeEntry) -> Result<GeneratedPair> {
    let truth = crack_mask(&entry.crack)?;
    let background = match &entry.background {
        Background::Phantom(spec) => synthesize_background(spec)?,
        Background::File(path) => read_volume(path)?,
    };
    background
        .dims()
        .ensure_same(&truth.dims(), "background vs crack")?;
    let gray = composite(&background, &truth, &entry.composite)?;
    Ok(GeneratedPair { gray, truth })
}

fn entry_id(entry: &RecipeEntry, index: usize) -> String {
    entry.id.clone().unwrap_or_else(|| {
        format!(
            "w{}-{}-{index:03}",
            entry.crack.width,
            entry.crack.arrangement.as_str()
        )
    })
}

/// Generates every entry into `out_dir` and writes the manifest there.
pub fn generate_dataset(entries: &[RecipeEntry], out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ids: Vec<String> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| entry_id(e, i))
        .collect();
    let mut seen = HashMap::new();
    for id in &ids {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::Config(format!("duplicate entry id {id:?}")));
        }
    }
    let keys: Vec<_> = entries
        .iter()
        .map(|e| (e.crack.width, e.crack.arrangement))
        .collect();
    let splits = assign_splits(&keys);

    let manifest_entries: Vec<ManifestEntry> = entries
        .par_iter()
        .zip(ids.par_iter())
        .zip(splits.par_iter())
        .map(|((entry, id), &split)| {
            let pair = generate_pair(entry)?;
            let gray_path = PathBuf::from(format!("{id}.gray"));
            let truth_path = PathBuf::from(format!("{id}.truth"));
            write_volume(&out_dir.join(&gray_path), &pair.gray)?;
            write_mask(&out_dir.join(&truth_path), &pair.truth)?;
            Ok(ManifestEntry {
                id: id.clone(),
                width: entry.crack.width,
                arrangement: entry.crack.arrangement,
                hurst: entry.crack.hurst,
                gray_path,
                truth_path,
                split,
                seeds: EntrySeeds {
                    crack: entry.crack.seed,
                    phantom: match &entry.background {
                        Background::Phantom(p) => p.seed,
                        Background::File(_) => 0,
                    },
                    composite: entry.composite.seed,
                },
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        entries: manifest_entries,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_recipe_split_sizes() {
        let entries = StandardRecipe::full(1).entries().unwrap();
        assert_eq!(entries.len(), 60);
        let keys: Vec<_> = entries
            .iter()
            .map(|e| (e.crack.width, e.crack.arrangement))
            .collect();
        let splits = assign_splits(&keys);
        let count = |s| splits.iter().filter(|&&x| x == s).count();
        assert_eq!(count(Split::Train), 9);
        assert_eq!(count(Split::Val), 3);
        assert_eq!(splits.iter().filter(|s| s.is_evaluated()).count(), 51);
    }

    #[test]
    fn standard_entries_deterministic_and_distinct() {
        let a = StandardRecipe::full(7).entries().unwrap();
        let b = StandardRecipe::full(7).entries().unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].crack.seed, a[1].crack.seed);
        assert!(a.iter().all(|e| (0.5..=0.99).contains(&e.crack.hurst)));
    }

    #[test]
    fn recipe_json_forms() {
        let text = r#"{"standard":{"side_exp":5,"widths":[3],"singles":1,"parallels":1,
            "orthogonals":1,"master_seed":4,"phantom":"high-contrast"}}"#;
        let r: Recipe = serde_json::from_str(text).unwrap();
        assert_eq!(r.entries().unwrap().len(), 3);
        let round: Recipe = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(round, r);
        let explicit = Recipe::Entries(r.entries().unwrap());
        let back: Recipe =
            serde_json::from_str(&serde_json::to_string(&explicit).unwrap()).unwrap();
        assert_eq!(back, explicit);
    }

    #[test]
    fn empty_recipe_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&[], dir.path()).unwrap();
        assert!(m.entries.is_empty());
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn small_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let recipe = StandardRecipe {
            side_exp: 4,
            widths: vec![1, 3],
            singles: 2,
            parallels: 1,
            orthogonals: 1,
            master_seed: 9,
            phantom: PhantomPreset::HighContrast,
            hurst: [0.7, 0.7],
            transition_sigma: None,
        };
        let m = generate_dataset(&recipe.entries().unwrap(), dir.path()).unwrap();
        assert_eq!(m.entries.len(), 8);
        assert_eq!(m.count(Split::Train), 6);
        assert_eq!(m.count(Split::Val), 2);
        let loaded = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded.entries, m.entries);
        let e = &loaded.entries[0];
        let truth = crate::volume::read_mask(&loaded.resolve(&e.truth_path)).unwrap();
        assert_eq!(truth.count_ones(), 16 * 16);
    }
}
