use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

/// Internal node when `feature != LEAF`; otherwise `left` holds the class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: u32,
    pub threshold: f32,
    pub left: u32,
    pub right: u32,
}

pub const LEAF: u32 = u32::MAX;

impl Node {
    fn leaf(class: u8) -> Self {
        Node {
            feature: LEAF,
            threshold: 0.0,
            left: class as u32,
            right: 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

/// Binary CART tree; `x[feature] <= threshold` goes left. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f32]) -> u8 {
        let mut n = &self.nodes[0];
        while !n.is_leaf() {
            n = if x[n.feature as usize] <= n.threshold {
                &self.nodes[n.left as usize]
            } else {
                &self.nodes[n.right as usize]
            };
        }
        n.left as u8
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn rec(t: &DecisionTree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + rec(t, n.left as usize).max(rec(t, n.right as usize))
            }
        }
        rec(self, 0)
    }

    pub fn max_feature(&self) -> Option<u32> {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.feature)
            .max()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    /// Features tried per split; all when equal to the dimension.
    pub mtry: usize,
}

/// Minimum impurity decrease for a split to be kept.
const MIN_GAIN: f64 = 1e-12;

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Majority class; ties go to background.
fn majority(pos: usize, n: usize) -> u8 {
    (2 * pos > n) as u8
}

/// Grows a tree on `rows` (indices into the row-major `x`, repeats allowed).
pub(crate) fn grow(
    x: &[f32],
    y: &[u8],
    dim: usize,
    rows: Vec<usize>,
    p: &GrowParams,
    rng: &mut Rng,
) -> DecisionTree {
    let mut tree = DecisionTree { nodes: Vec::new() };
    let mut stack = vec![(rows, 0usize, None::<(usize, bool)>)];
    let mut scratch: Vec<(f32, u8)> = Vec::new();
    while let Some((rows, depth, parent)) = stack.pop() {
        let id = tree.nodes.len() as u32;
        if let Some((pi, is_left)) = parent {
            if is_left {
                tree.nodes[pi].left = id;
            } else {
                tree.nodes[pi].right = id;
            }
        }
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| y[r] == 1).count();
        if pos == 0 || pos == n || depth >= p.max_depth {
            tree.nodes.push(Node::leaf(majority(pos, n)));
            continue;
        }
        let features: Vec<usize> = if p.mtry >= dim {
            (0..dim).collect()
        } else {
            let mut f = sample(rng, dim, p.mtry).into_vec();
            f.sort_unstable();
            f
        };
        let parent_imp = gini(pos, n);
        let mut best: Option<(f64, usize, f32)> = None;
        for &f in &features {
            scratch.clear();
            scratch.extend(rows.iter().map(|&r| (x[r * dim + f], y[r])));
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                left_pos += scratch[i].1 as usize;
                let (a, b) = (scratch[i].0, scratch[i + 1].0);
                if a == b {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let imp = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr))
                    / n as f64;
                let gain = parent_imp - imp;
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, midpoint(a, b)));
                }
            }
        }
        match best {
            Some((gain, f, t)) if gain > MIN_GAIN => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| x[row * dim + f] <= t);
                tree.nodes.push(Node {
                    feature: f as u32,
                    threshold: t,
                    left: 0,
                    right: 0,
                });
                let me = id as usize;
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, Some((me, false))));
                stack.push((l, depth + 1, Some((me, true))));
            }
            _ => tree.nodes.push(Node::leaf(majority(pos, n))),
        }
    }
    tree
}

/// Midpoint of two distinct floats that still separates them.
pub(crate) fn midpoint(a: f32, b: f32) -> f32 {
    let m = ((a as f64 + b as f64) / 2.0) as f32;
    if m >= b {
        a
    } else {
        m
    }
}

pub(crate) fn bootstrap(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}
