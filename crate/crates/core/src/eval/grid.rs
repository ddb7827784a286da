use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, Metrics};
use crate::error::{Error, Result};
use crate::volume::BinaryMask;

/// Named parameter values handed to a segmenter.
pub type ParamPoint = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Precision,
    Recall,
    F1,
}

impl Objective {
    /// The metric the constraint applies to; `min(P, R)` for F1.
    pub fn complement(self, m: &Metrics) -> f64 {
        match self {
            Objective::Precision => m.recall,
            Objective::Recall => m.precision,
            Objective::F1 => m.precision.min(m.recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParam {
    pub name: String,
    pub values: Vec<f64>,
}

/// Parameters are swept once each, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub params: Vec<GridParam>,
    pub objective: Objective,
    /// Minimum of the complementary metric; 0 disables the constraint.
    #[serde(default)]
    pub min_complement: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("grid has no parameters".into()));
        }
        for p in &self.params {
            if p.values.is_empty() {
                return Err(Error::Config(format!(
                    "grid parameter {:?} has no values",
                    p.name
                )));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "grid parameter {:?} has a non-finite value",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Index of the parameter being swept.
    pub sweep: usize,
    pub params: ParamPoint,
    pub metrics: Metrics,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ParamPoint,
    pub metrics: Metrics,
    /// False when some sweep had no point meeting the constraint and the
    /// unconstrained best was taken instead.
    pub constraint_satisfied: bool,
    pub trace: Vec<TraceRow>,
}

fn key(p: &ParamPoint) -> Vec<(String, u64)> {
    p.iter().map(|(k, v)| (k.clone(), v.to_bits())).collect()
}

/// Coordinate search: sweep one parameter with the others held at the
/// incumbent, keep the best feasible value, move to the next parameter.
///
/// `start` supplies values for parameters outside the grid and the
/// initial incumbent; grid parameters missing from it start at their first
/// candidate. Ties keep the earliest candidate.
pub fn coordinate_grid_search(
    segmenter: impl Fn(&ParamPoint) -> Result<BinaryMask> + Sync,
    truth: &BinaryMask,
    grid: &GridSpec,
    start: &ParamPoint,
    tol: u32,
) -> Result<GridResult> {
    grid.validate()?;
    let mut incumbent = start.clone();
    for p in &grid.params {
        incumbent.entry(p.name.clone()).or_insert(p.values[0]);
    }
    let feasible = |m: &Metrics| grid.objective.complement(m) >= grid.min_complement;
    let mut cache: BTreeMap<Vec<(String, u64)>, Metrics> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut satisfied = true;

    for (sweep, param) in grid.params.iter().enumerate() {
        let points: Vec<ParamPoint> = param
            .values
            .iter()
            .map(|&v| {
                let mut p = incumbent.clone();
                p.insert(param.name.clone(), v);
                p
            })
            .collect();
        let fresh: Vec<&ParamPoint> = points
            .iter()
            .filter(|p| !cache.contains_key(&key(p)))
            .collect();
        let computed: Vec<Metrics> = fresh
            .par_iter()
            .map(|p| evaluate(&segmenter(p)?, truth, tol))
            .collect::<Result<_>>()?;
        for (p, m) in fresh.into_iter().zip(computed) {
            cache.insert(key(p), m);
        }
        let scored: Vec<(ParamPoint, Metrics)> = points
            .into_iter()
            .map(|p| {
                let m = cache[&key(&p)];
                (p, m)
            })
            .collect();
        let pick = |only_feasible: bool| {
            let mut best: Option<usize> = None;
            for (i, (_, m)) in scored.iter().enumerate() {
                if only_feasible && !feasible(m) {
                    continue;
                }
                if best.map_or(true, |b| {
                    m.get(grid.objective) > scored[b].1.get(grid.objective)
                }) {
                    best = Some(i);
                }
            }
            best
        };
        let chosen = match pick(true) {
            Some(i) => i,
            None => {
                satisfied = false;
                pick(false).expect("non-empty sweep")
            }
        };
        for (p, m) in &scored {
            trace.push(TraceRow {
                sweep,
                params: p.clone(),
                metrics: *m,
                feasible: feasible(m),
            });
        }
        incumbent = scored[chosen].0.clone();
    }
    let metrics = cache[&key(&incumbent)];
    Ok(GridResult {
        best: incumbent,
        metrics,
        constraint_satisfied: satisfied,
        trace,
    })
}
