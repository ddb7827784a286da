use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,width,image_id,tol,precision,recall,f1";

/// One evaluated (method, image, tolerance) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub width: usize,
    pub image_id: String,
    pub tol: u32,
    pub metrics: Metrics,
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.method,
            r.width,
            r.image_id,
            r.tol,
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.f1
        )
        .expect("string write");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads rows written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(corrupt(format!("expected header {CSV_HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| corrupt(format!("line {}: bad {what}", i + 2));
            if f.len() != 7 {
                return Err(bad("field count"));
            }
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
            Ok(ResultRow {
                method: f[0].to_string(),
                width: f[1].parse().map_err(|_| bad("width"))?,
                image_id: f[2].to_string(),
                tol: f[3].parse().map_err(|_| bad("tol"))?,
                metrics: Metrics {
                    precision: num(f[4], "precision")?,
                    recall: num(f[5], "recall")?,
                    f1: num(f[6], "f1")?,
                },
            })
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); 0 for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Min, lower quartile, median, upper quartile, max with linear
/// interpolation between order statistics.
pub fn quantiles(xs: &[f64]) -> [f64; 5] {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    [v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    /// `[min, q1, median, q3, max]`.
    pub quantiles: [f64; 5],
}

impl MetricStats {
    fn of(xs: &[f64]) -> Self {
        MetricStats {
            mean: mean(xs),
            std: sample_std(xs),
            quantiles: quantiles(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: String,
    pub width: usize,
    pub tol: u32,
    pub n: usize,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub f1: MetricStats,
}

/// Per method, width and tolerance statistics, plus a method-by-width
/// table of mean and std F1 at every tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    /// `table[tol][method][width] = [mean_f1, std_f1]`.
    pub f1_table: BTreeMap<u32, BTreeMap<String, BTreeMap<usize, [f64; 2]>>>,
}

pub fn summarize(rows: &[ResultRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::Config("no results to summarize".into()));
    }
    let mut by: BTreeMap<(String, usize, u32), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by.entry((r.method.clone(), r.width, r.tol))
            .or_default()
            .push(r);
    }
    let mut groups = Vec::new();
    let mut f1_table: BTreeMap<u32, BTreeMap<String, BTreeMap<usize, [f64; 2]>>> = BTreeMap::new();
    for ((method, width, tol), rs) in by {
        let col = |f: fn(&Metrics) -> f64| rs.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>();
        let g = GroupSummary {
            method: method.clone(),
            width,
            tol,
            n: rs.len(),
            precision: MetricStats::of(&col(|m| m.precision)),
            recall: MetricStats::of(&col(|m| m.recall)),
            f1: MetricStats::of(&col(|m| m.f1)),
        };
        f1_table
            .entry(tol)
            .or_default()
            .entry(method)
            .or_default()
            .insert(width, [g.f1.mean, g.f1.std]);
        groups.push(g);
    }
    Ok(Summary { groups, f1_table })
}
