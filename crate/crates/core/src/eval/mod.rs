//! Tolerance-aware confusion counts, precision/recall/F1, the coordinate
//! grid-search tuner and per-group reports.

mod edt;
mod grid;
mod report;

pub use edt::squared_distance_transform;
pub use grid::{
    coordinate_grid_search, GridParam, GridResult, GridSpec, Objective, ParamPoint, TraceRow,
};
pub use report::{
    mean, quantiles, read_csv, sample_std, summarize, write_csv, GroupSummary, MetricStats,
    ResultRow, Summary, CSV_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub tol: u32,
}

/// Counts under a Euclidean voxel tolerance.
///
/// `tp` counts truth voxels within `tol` of a prediction, `fn` the other
/// truth voxels, `fp` predictions farther than `tol` from any truth voxel,
/// and `tn` the voxels in neither mask.
pub fn confusion_with_tolerance(
    pred: &BinaryMask,
    truth: &BinaryMask,
    tol: u32,
) -> Result<ConfusionCounts> {
    pred.dims().ensure_same(&truth.dims(), "confusion")?;
    let t2 = (tol as f64) * (tol as f64);
    let (tp, fp) = if tol == 0 {
        let tp = truth.intersection(pred)?.count_ones() as u64;
        (tp, pred.count_ones() as u64 - tp)
    } else {
        let to_pred = squared_distance_transform(pred);
        let to_truth = squared_distance_transform(truth);
        let tp = truth.iter_ones().filter(|&i| to_pred[i] <= t2).count() as u64;
        let fp = pred.iter_ones().filter(|&i| to_truth[i] > t2).count() as u64;
        (tp, fp)
    };
    let n_truth = truth.count_ones() as u64;
    let union = pred.union(truth)?.count_ones() as u64;
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_: n_truth - tp,
        tn: pred.len() as u64 - union,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Precision => self.precision,
            Objective::Recall => self.recall,
            Objective::F1 => self.f1,
        }
    }
}

/// Precision, recall and F1. An empty denominator gives 1 when there is
/// nothing to miss either way (`fn == 0` for precision, `fp == 0` for
/// recall) and 0 otherwise; F1 is 0 when both are 0.
pub fn prf1(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: u64, other: u64, guard: u64| {
        if num + other == 0 {
            if guard == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / (num + other) as f64
        }
    };
    let precision = ratio(c.tp, c.fp, c.fn_);
    let recall = ratio(c.tp, c.fn_, c.fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

pub fn evaluate(pred: &BinaryMask, truth: &BinaryMask, tol: u32) -> Result<Metrics> {
    Ok(prf1(&confusion_with_tolerance(pred, truth, tol)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn counts(tp: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts {
            tp,
            fp,
            fn_,
            tn: 0,
            tol: 0,
        }
    }

    #[test]
    fn prf1_examples() {
        let m = prf1(&counts(50, 50, 0));
        assert_eq!((m.precision, m.recall), (0.5, 1.0));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        let m = prf1(&counts(0, 0, 0));
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let m = prf1(&counts(90, 10, 30));
        assert!((m.f1 - 2.0 / (1.0 / 0.9 + 1.0 / 0.75)).abs() < 1e-12);
        let m = prf1(&counts(0, 0, 5));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = prf1(&counts(0, 5, 0));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identical_masks() {
        let d = Dims::cube(8);
        let m = BinaryMask::from_fn(d, |x, y, _| x == y);
        let c = confusion_with_tolerance(&m, &m, 0).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (64, 0, 0));
        assert_eq!(c.tn, 512 - 64);
    }

    #[test]
    fn unit_shift_within_tolerance() {
        let d = Dims::cube(10);
        let truth = BinaryMask::from_fn(d, |x, _, _| x == 4);
        let pred = BinaryMask::from_fn(d, |x, _, _| x == 5);
        let c0 = confusion_with_tolerance(&pred, &truth, 0).unwrap();
        assert_eq!((c0.tp, c0.fp, c0.fn_), (0, 100, 100));
        let c1 = confusion_with_tolerance(&pred, &truth, 1).unwrap();
        assert_eq!((c1.tp, c1.fp, c1.fn_), (100, 0, 0));
        assert_eq!(c1.tn, 800);
    }

    #[test]
    fn shape_mismatch() {
        let a = BinaryMask::empty(Dims::cube(3));
        let b = BinaryMask::empty(Dims::cube(4));
        assert!(confusion_with_tolerance(&a, &b, 1).is_err());
    }
}
