use crackseg::error::Error;
use crackseg::forest::{train_forest, train_forest_with, Forest, ForestOptions, TrainingSet};
use crackseg::hessian::FeatureBankConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bank4() -> FeatureBankConfig {
    FeatureBankConfig {
        gaussian: vec![0.7, 1.0, 1.5, 2.0],
        laplacian: vec![],
        gradient_magnitude: vec![],
        difference_of_gaussians: vec![],
        hessian: vec![],
        structure_tensor: vec![],
    }
}

/// Two noisy classes separated along a mix of features.
fn data(n: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let x: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let score = x[0] + 0.5 * x[2] * x[1] + rng.gen_range(-0.3..0.3);
        labels.push((score > 0.1) as u8);
        rows.push(x);
    }
    (rows, labels)
}

enum Oracle {
    Leaf(u8),
    Split(usize, f32, Box<Oracle>, Box<Oracle>),
}

impl Oracle {
    fn predict(&self, x: &[f32]) -> u8 {
        match self {
            Oracle::Leaf(c) => *c,
            Oracle::Split(f, t, l, r) => {
                if x[*f] <= *t {
                    l.predict(x)
                } else {
                    r.predict(x)
                }
            }
        }
    }
}

fn gini_of(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let p = labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len() as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Exhaustive CART: every feature, every midpoint between distinct sorted
/// values, first best split kept, majority leaves with ties to background.
fn cart(rows: &[Vec<f32>], labels: &[u8]) -> Oracle {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let leaf = Oracle::Leaf((2 * pos > labels.len()) as u8);
    if pos == 0 || pos == labels.len() {
        return leaf;
    }
    let parent = gini_of(labels);
    let mut best: Option<(f64, usize, f32)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f32> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        vals.dedup();
        for w in vals.windows(2) {
            let t = ((w[0] as f64 + w[1] as f64) / 2.0) as f32;
            let (mut l, mut r) = (Vec::new(), Vec::new());
            for (row, &y) in rows.iter().zip(labels) {
                if row[f] <= t {
                    l.push(y)
                } else {
                    r.push(y)
                }
            }
            let n = labels.len() as f64;
            let gain = parent - (l.len() as f64 * gini_of(&l) + r.len() as f64 * gini_of(&r)) / n;
            if best.map_or(true, |(g, _, _)| gain > g + 1e-15) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        Some((g, f, t)) if g > 1e-12 => {
            let (mut lr, mut ll, mut rr, mut rl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (row, &y) in rows.iter().zip(labels) {
                if row[f] <= t {
                    lr.push(row.clone());
                    ll.push(y);
                } else {
                    rr.push(row.clone());
                    rl.push(y);
                }
            }
            Oracle::Split(f, t, Box::new(cart(&lr, &ll)), Box::new(cart(&rr, &rl)))
        }
        _ => leaf,
    }
}

fn single_tree(ts: &TrainingSet, seed: u64) -> Forest {
    let o = ForestOptions { n_trees: 1, max_depth: usize::MAX, mtry: Some(4), bootstrap: false, seed };
    train_forest_with(ts, &bank4(), &o).unwrap()
}

#[test]
fn single_full_tree_matches_reference_cart() {
    let (rows, labels) = data(200, 1);
    let ts = TrainingSet::from_rows(&rows, &labels).unwrap();
    let forest = single_tree(&ts, 9);
    let oracle = cart(&rows, &labels);
    for r in &rows {
        assert_eq!(forest.predict_row(r), oracle.predict(r));
    }
    let (queries, _) = data(2000, 2);
    let agree = queries.iter().filter(|q| forest.predict_row(q) == oracle.predict(q)).count();
    assert_eq!(agree, queries.len());
}

#[test]
fn training_is_deterministic() {
    let (rows, labels) = data(300, 3);
    let ts = TrainingSet::from_rows(&rows, &labels).unwrap();
    let a = train_forest(&ts, &bank4(), 9, 6, 77).unwrap();
    let b = train_forest(&ts, &bank4(), 9, 6, 77).unwrap();
    assert_eq!(a, b);
    assert!(a.trees.iter().all(|t| t.depth() <= 6));
}

#[test]
fn save_load_round_trip_and_truncation() {
    let (rows, labels) = data(150, 4);
    let ts = TrainingSet::from_rows(&rows, &labels).unwrap();
    let f = train_forest(&ts, &bank4(), 5, 8, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    f.save(&p).unwrap();
    assert_eq!(Forest::load(&p).unwrap(), f);
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(Forest::load(&p), Err(Error::Corrupt { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn votes_ignore_tree_order_and_even_duplication(seed in 0u64..10_000, trees in 1usize..12, depth in 1usize..10) {
        let (rows, labels) = data(120, seed);
        let ts = TrainingSet::from_rows(&rows, &labels).unwrap();
        let f = train_forest(&ts, &bank4(), trees, depth, seed).unwrap();
        prop_assert!(f.trees.iter().all(|t| t.depth() <= depth));
        let mut rev = f.clone();
        rev.trees.reverse();
        let mut doubled = f.clone();
        doubled.trees.extend(f.trees.iter().cloned());
        let (queries, _) = data(200, seed + 1);
        for q in &queries {
            let v = f.predict_row(q);
            prop_assert_eq!(rev.predict_row(q), v);
            prop_assert_eq!(doubled.predict_row(q), v);
        }
    }
}
