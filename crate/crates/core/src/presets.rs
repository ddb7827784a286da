//! Method configurations, the shipped parameter table and the segmentation
//! dispatcher.
//!
//! Presets are named `<method>/w<width>/<precision|recall>`, e.g.
//! `sheet/w3/precision`; the percolation entries take their preselection
//! from the Frangi preset of the same width and objective.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::{Objective, ParamPoint};
use crate::filters::{frangi_segment, sheet_segment, FrangiParams, SheetParams};
use crate::forest::{predict_forest_checked, Forest};
use crate::geometric::{adaptive_morph, template_match, AdaptiveMorphParams, TemplateParams};
use crate::hessian::FeatureBankConfig;
use crate::paths::{hessian_percolation, minimal_paths, MinimalPathParams, PercolationParams};
use crate::volume::{standardize, BinaryMask, Volume};

const PRESET_TABLE: &str = include_str!("../presets/parameter_presets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationConfig {
    pub epsilon: f64,
    pub w: usize,
    pub f: f64,
    pub tau: u32,
    /// Frangi parameters producing the seed set.
    pub preselect: FrangiParams,
}

impl PercolationConfig {
    pub fn params(&self) -> PercolationParams {
        PercolationParams {
            epsilon: self.epsilon,
            w: self.w,
            f: self.f,
            tau: self.tau,
        }
    }
}

fn default_crack_cap() -> usize {
    20_000
}

fn default_bg_ratio() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    #[serde(default = "FeatureBankConfig::table1")]
    pub bank: FeatureBankConfig,
    /// Crack samples drawn per training pair.
    #[serde(default = "default_crack_cap")]
    pub crack_cap: usize,
    /// Background samples per crack sample.
    #[serde(default = "default_bg_ratio")]
    pub bg_ratio: f64,
    /// Trained model to load for segmentation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnetConfig {
    pub t6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Sheet(SheetParams),
    Frangi(FrangiParams),
    Template(TemplateParams),
    Adaptive(AdaptiveMorphParams),
    Minpath(MinimalPathParams),
    #[serde(rename = "hp", alias = "percolation")]
    Percolation(PercolationConfig),
    Rf(RfConfig),
    Unet(UnetConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Sheet(_) => "sheet",
            MethodConfig::Frangi(_) => "frangi",
            MethodConfig::Template(_) => "template",
            MethodConfig::Adaptive(_) => "adaptive",
            MethodConfig::Minpath(_) => "minpath",
            MethodConfig::Percolation(_) => "hp",
            MethodConfig::Rf(_) => "rf",
            MethodConfig::Unet(_) => "unet",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodConfig::Sheet(p) => p.validate(),
            MethodConfig::Frangi(p) => p.validate(),
            MethodConfig::Template(p) => p.validate(),
            MethodConfig::Adaptive(p) => p.validate(),
            MethodConfig::Minpath(p) => p.validate(),
            MethodConfig::Percolation(p) => {
                p.params().validate()?;
                p.preselect.validate()
            }
            MethodConfig::Rf(p) => {
                if p.n_trees == 0 || p.max_depth == 0 {
                    return Err(Error::param("rf needs n_trees >= 1 and max_depth >= 1"));
                }
                p.bank.validate()
            }
            MethodConfig::Unet(p) => {
                if !(0.0..=1.0).contains(&p.t6) {
                    return Err(Error::param(format!("t6 must be in [0,1], got {}", p.t6)));
                }
                Ok(())
            }
        }
    }

    /// Parses a JSON object, resolving a preset name given as `preselect`.
    pub fn from_value(mut v: Value) -> Result<Self> {
        if let Some(Value::String(name)) = v.get("preselect").cloned() {
            let MethodConfig::Frangi(f) = preset(&name)? else {
                return Err(Error::Config(format!(
                    "preselect preset {name:?} is not a Frangi preset"
                )));
            };
            v["preselect"] = serde_json::to_value(f)?;
        }
        let cfg: MethodConfig =
            serde_json::from_value(v).map_err(|e| Error::Config(format!("method config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A preset name or a path to a JSON method file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if preset_table().contains_key(spec) {
            return preset(spec);
        }
        let path = Path::new(spec);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Self::from_value(serde_json::from_str(&text)?);
        }
        Err(Error::Config(format!(
            "unknown preset or missing method file {spec:?}"
        )))
    }

    /// Current value of a numeric field, addressed as in [`Self::with_params`].
    pub fn param_value(&self, name: &str) -> Option<f64> {
        let v = serde_json::to_value(self).ok()?;
        let slot = match name.split_once('.') {
            Some((outer, inner)) => v.get(outer)?.get(inner)?,
            None => v.get(name)?,
        };
        slot.as_f64()
    }

    /// Copy with named numeric fields replaced; `preselect.<field>` reaches
    /// the percolation preselection.
    pub fn with_params(&self, point: &ParamPoint) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for (name, &x) in point {
            let (obj, field) = match name.split_once('.') {
                Some((outer, inner)) => {
                    (v.get_mut(outer).ok_or_else(|| unknown(self, name))?, inner)
                }
                None => (&mut v, name.as_str()),
            };
            let slot = obj.get_mut(field).ok_or_else(|| unknown(self, name))?;
            *slot = if slot.is_u64() || slot.is_i64() {
                if x.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "parameter {name} takes integers, got {x}"
                    )));
                }
                Value::from(x as i64)
            } else {
                Value::from(x)
            };
        }
        Self::from_value(v)
    }
}

fn unknown(cfg: &MethodConfig, name: &str) -> Error {
    Error::Config(format!("method {} has no parameter {name:?}", cfg.name()))
}

fn preset_table() -> &'static BTreeMap<String, Value> {
    static TABLE: OnceLock<BTreeMap<String, Value>> = OnceLock::new();
    TABLE.get_or_init(|| serde_json::from_str(PRESET_TABLE).expect("shipped preset table parses"))
}

/// All shipped preset names, sorted.
pub fn preset_names() -> Vec<String> {
    preset_table().keys().cloned().collect()
}

pub fn preset(name: &str) -> Result<MethodConfig> {
    let v = preset_table()
        .get(name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    MethodConfig::from_value(v.clone())
}

pub fn preset_name(method: &str, width: usize, objective: Objective) -> String {
    let o = match objective {
        Objective::Precision => "precision",
        Objective::Recall => "recall",
        Objective::F1 => "f1",
    };
    format!("{method}/w{width}/{o}")
}

/// Runs one method on a gray volume. Every method sees the volume
/// standardized to zero mean and unit variance.
pub fn segment(vol: &Volume, cfg: &MethodConfig, forest: Option<&Forest>) -> Result<BinaryMask> {
    cfg.validate()?;
    let z = standardize(vol);
    match cfg {
        MethodConfig::Sheet(p) => sheet_segment(&z, p),
        MethodConfig::Frangi(p) => frangi_segment(&z, p),
        MethodConfig::Template(p) => template_match(&z, p),
        MethodConfig::Adaptive(p) => adaptive_morph(&z, p),
        MethodConfig::Minpath(p) => minimal_paths(&z, p),
        MethodConfig::Percolation(p) => {
            let pre = frangi_segment(&z, &p.preselect)?;
            hessian_percolation(&z, &pre, &p.params())
        }
        MethodConfig::Rf(p) => {
            let forest = forest
                .ok_or_else(|| Error::Config("rf segmentation needs a trained forest".into()))?;
            predict_forest_checked(forest, &z, &p.bank)
        }
        MethodConfig::Unet(_) => Err(Error::Config(
            "unet segmentation runs in the Python baseline; this tool only reads its masks".into(),
        )),
    }
}
