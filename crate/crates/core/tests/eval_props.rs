use crackseg::eval::{
    confusion_with_tolerance, coordinate_grid_search, evaluate, summarize, GridParam, GridSpec, Metrics, Objective,
    ParamPoint, ResultRow,
};
use crackseg::filters::{sheet_response, threshold};
use crackseg::synth::{generate_pair, PhantomPreset, StandardRecipe};
use crackseg::volume::standardize;
use crackseg::{BinaryMask, Dims};
use proptest::prelude::*;

fn mask(d: Dims, bits: &[bool]) -> BinaryMask {
    BinaryMask::from_bools(d, &bits[..d.len()]).unwrap()
}

/// Brute force: squared distance from every voxel to the nearest set voxel.
fn nearest_sq(m: &BinaryMask) -> Vec<f64> {
    let d = m.dims();
    let ones: Vec<_> = m.iter_ones().map(|i| d.coord(i)).collect();
    (0..d.len())
        .map(|i| {
            let c = d.coord(i);
            ones.iter()
                .map(|q| {
                    let dx = c.x as f64 - q.x as f64;
                    let dy = c.y as f64 - q.y as f64;
                    let dz = c.z as f64 - q.z as f64;
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tolerance_counts_match_brute_force(p in prop::collection::vec(prop::bool::weighted(0.08), 576),
                                          t in prop::collection::vec(prop::bool::weighted(0.12), 576),
                                          tol in 0u32..4) {
        let d = Dims::new(8, 9, 8);
        let (pred, truth) = (mask(d, &p), mask(d, &t));
        let c = confusion_with_tolerance(&pred, &truth, tol).unwrap();
        let (to_pred, to_truth) = (nearest_sq(&pred), nearest_sq(&truth));
        let r2 = (tol * tol) as f64;
        let tp = truth.iter_ones().filter(|&i| to_pred[i] <= r2).count() as u64;
        let fp = pred.iter_ones().filter(|&i| to_truth[i] > r2).count() as u64;
        prop_assert_eq!((c.tp, c.fp), (tp, fp));
        prop_assert_eq!(c.tp + c.fn_, truth.count_ones() as u64);
        if tol == 0 {
            let both = pred.intersection(&truth).unwrap().count_ones() as u64;
            prop_assert_eq!(c.tp, both);
            prop_assert_eq!(c.fp, pred.count_ones() as u64 - both);
        }
    }

    #[test]
    fn metrics_never_drop_with_tolerance(p in prop::collection::vec(prop::bool::weighted(0.1), 512),
                                         t in prop::collection::vec(prop::bool::weighted(0.1), 512)) {
        let d = Dims::cube(8);
        let (pred, truth) = (mask(d, &p), mask(d, &t));
        let mut last: Option<Metrics> = None;
        for tol in 0..4 {
            let m = evaluate(&pred, &truth, tol).unwrap();
            if let Some(l) = last {
                prop_assert!(m.precision >= l.precision && m.recall >= l.recall);
            }
            last = Some(m);
        }
    }

    #[test]
    fn recall_never_rises_with_threshold(seed in 0u64..1000, tol in 0u32..3) {
        let d = Dims::cube(10);
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let resp = crackseg::Volume::from_fn(d, |_, _, _| {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            (s >> 40) as f32 / (1u64 << 24) as f32
        });
        let truth = threshold(&resp, 0.8);
        let mut last = f64::INFINITY;
        for k in 0..=20 {
            let r = evaluate(&threshold(&resp, k as f64 / 20.0), &truth, tol).unwrap().recall;
            prop_assert!(r <= last);
            last = r;
        }
    }
}

/// Slab `x = a` in the left half joined with slab `x = 8 + b` in the right
/// half: recall is a sum of one term per parameter.
fn slabs(d: Dims, point: &ParamPoint) -> BinaryMask {
    let (a, b) = (point["a"] as usize, point["b"] as usize);
    BinaryMask::from_fn(d, |x, _, _| x == a || x == 8 + b)
}

#[test]
fn separable_grid_matches_exhaustive_search() {
    let d = Dims::new(16, 6, 6);
    for seed in 0..20u64 {
        let mut s = seed * 7919 + 13;
        let truth = BinaryMask::from_fn(d, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 59) < 5
        });
        let values: Vec<f64> = (0..8).map(f64::from).collect();
        let grid = GridSpec {
            params: vec![
                GridParam { name: "a".into(), values: values.clone() },
                GridParam { name: "b".into(), values: values.clone() },
            ],
            objective: Objective::Recall,
            min_complement: 0.0,
        };
        let res = coordinate_grid_search(|p| Ok(slabs(d, p)), &truth, &grid, &ParamPoint::new(), 0).unwrap();
        let mut best = f64::NEG_INFINITY;
        for &a in &values {
            for &b in &values {
                let p = ParamPoint::from([("a".into(), a), ("b".into(), b)]);
                best = best.max(evaluate(&slabs(d, &p), &truth, 0).unwrap().recall);
            }
        }
        assert!((res.metrics.recall - best).abs() <= 1e-12, "seed {seed}: {} vs {best}", res.metrics.recall);
        assert!(res.constraint_satisfied);
    }
}

#[test]
fn summary_matches_two_pass_statistics() {
    let f1s: Vec<f64> = (0..17).map(|i| ((i * 37 % 17) as f64 + 0.5) / 18.0).collect();
    let rows: Vec<ResultRow> = f1s
        .iter()
        .enumerate()
        .map(|(i, &f)| ResultRow {
            method: "sheet/w3/precision".into(),
            width: 3,
            image_id: format!("img-{i:02}"),
            tol: 1,
            metrics: Metrics { precision: f, recall: 1.0 - f / 2.0, f1: f },
        })
        .collect();
    let s = summarize(&rows).unwrap();
    let g = &s.groups[0];
    assert_eq!(g.n, 17);
    let n = 17.0;
    let m: f64 = f1s.iter().sum::<f64>() / n;
    let var = f1s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((g.f1.mean - m).abs() <= 1e-12);
    assert!((g.f1.std - var.sqrt()).abs() <= 1e-12);
    let mut sorted = f1s.clone();
    sorted.sort_by(f64::total_cmp);
    // with 17 values the quartiles fall on order statistics 0, 4, 8, 12, 16
    for (q, k) in g.f1.quantiles.iter().zip([0, 4, 8, 12, 16]) {
        assert!((q - sorted[k]).abs() <= 1e-12);
    }
    assert_eq!(s.f1_table[&1]["sheet/w3/precision"][&3], [g.f1.mean, g.f1.std]);
}

#[test]
fn sheet_precision_rises_then_levels_with_delta() {
    let e = StandardRecipe {
        side_exp: 6,
        widths: vec![3],
        singles: 1,
        parallels: 0,
        orthogonals: 0,
        master_seed: 5,
        phantom: PhantomPreset::Concrete,
        hurst: [0.5, 0.99],
        transition_sigma: None,
    }
    .entries()
    .unwrap();
    let p = generate_pair(&e[0]).unwrap();
    let v = standardize(&p.gray);
    let deltas = [0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let prec: Vec<f64> = deltas
        .iter()
        .map(|&delta| {
            let s = sheet_response(&v, 2.0, 0.25, delta).unwrap();
            evaluate(&threshold(&s, 0.3), &p.truth, 1).unwrap().precision
        })
        .collect();
    for w in prec.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "{prec:?}");
    }
    assert!(prec[deltas.len() - 1] - prec[deltas.len() - 2] <= 0.05, "{prec:?}");
    assert!(prec[deltas.len() - 1] > prec[0], "{prec:?}");
}
