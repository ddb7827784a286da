use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Volume};

/// Added to the pooled variance so flat paths do not divide by zero.
pub const COHERENCE_EPS: f64 = 1e-6;

/// The 18 directed neighbourhoods: six axis and twelve plane-diagonal
/// directions, each owning the nine 26-neighbours with the largest dot
/// product. Classes `k` and `k + 9` are opposite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathNeighborhoods {
    pub directions: [[i8; 3]; 18],
    /// Offsets per class in lexicographic `(dx, dy, dz)` order.
    pub offsets: [[[i8; 3]; 9]; 18],
}

const POSITIVE: [[i8; 3]; 9] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
];

impl PathNeighborhoods {
    pub fn new() -> Self {
        let mut directions = [[0i8; 3]; 18];
        for (k, d) in POSITIVE.iter().enumerate() {
            directions[k] = *d;
            directions[k + 9] = d.map(|c| -c);
        }
        let mut offsets = [[[0i8; 3]; 9]; 18];
        for (k, d) in directions.iter().enumerate() {
            let dot = |o: [i8; 3]| {
                o[0] as i32 * d[0] as i32 + o[1] as i32 * d[1] as i32 + o[2] as i32 * d[2] as i32
            };
            let axis = d.iter().filter(|&&c| c != 0).count() == 1;
            let mut n = 0;
            for dx in -1i8..=1 {
                for dy in -1i8..=1 {
                    for dz in -1i8..=1 {
                        let o = [dx, dy, dz];
                        let keep = if axis { dot(o) == 1 } else { dot(o) >= 1 };
                        if keep {
                            offsets[k][n] = o;
                            n += 1;
                        }
                    }
                }
            }
            debug_assert_eq!(n, 9);
        }
        PathNeighborhoods {
            directions,
            offsets,
        }
    }

    pub fn opposite(k: usize) -> usize {
        (k + 9) % 18
    }
}

impl Default for PathNeighborhoods {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalPathParams {
    /// Voxels per directed arm.
    pub ell: usize,
    pub t3: f64,
}

impl MinimalPathParams {
    pub fn validate(&self) -> Result<()> {
        if self.ell < 2 {
            return Err(Error::param(format!(
                "path length must be >= 2, got {}",
                self.ell
            )));
        }
        if !(0.0..=1.0).contains(&self.t3) {
            return Err(Error::param(format!(
                "t3 must be in [0,1], got {}",
                self.t3
            )));
        }
        Ok(())
    }
}

/// Greedy arm of up to `ell` voxels from `start` (excluded) in class `k`:
/// each step moves to the darkest in-volume neighbour of the class, the
/// earliest offset winning ties. Stops early at the volume border.
pub fn greedy_arm(
    vol: &Volume,
    nb: &PathNeighborhoods,
    start: [usize; 3],
    k: usize,
    ell: usize,
) -> Vec<usize> {
    let dims = vol.dims();
    let data = vol.data();
    let mut cur = start.map(|c| c as isize);
    let mut arm = Vec::with_capacity(ell);
    for _ in 0..ell {
        let mut best: Option<(f32, [isize; 3])> = None;
        for o in &nb.offsets[k] {
            let q = [
                cur[0] + o[0] as isize,
                cur[1] + o[1] as isize,
                cur[2] + o[2] as isize,
            ];
            if !dims.contains(q[0], q[1], q[2]) {
                continue;
            }
            let v = data[dims.index(q[0] as usize, q[1] as usize, q[2] as usize)];
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, q));
            }
        }
        let Some((_, q)) = best else { break };
        arm.push(dims.index(q[0] as usize, q[1] as usize, q[2] as usize));
        cur = q;
    }
    arm
}

/// Arm statistics for every start voxel at once.
struct Walk {
    /// Voxel reached, or `STOPPED` once the border cut the arm short.
    end: Vec<u32>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    n: Vec<u32>,
}

const STOPPED: u32 = u32::MAX;

impl Walk {
    fn stopped(len: usize) -> Self {
        Walk {
            end: vec![STOPPED; len],
            sum: vec![0.0; len],
            sumsq: vec![0.0; len],
            n: vec![0; len],
        }
    }

    fn identity(len: usize) -> Self {
        Walk {
            end: (0..len as u32).collect(),
            ..Walk::stopped(len)
        }
    }

    /// `self` followed by `step`, where `step` is applied at `self.end`.
    fn then(&self, step: &Walk) -> Walk {
        let len = self.end.len();
        let mut out = Walk::stopped(len);
        (&mut out.end, &mut out.sum, &mut out.sumsq, &mut out.n)
            .into_par_iter()
            .enumerate()
            .with_min_len(4096)
            .for_each(|(i, (e, s, s2, n))| {
                let j = self.end[i];
                if j == STOPPED {
                    (*e, *s, *s2, *n) = (STOPPED, self.sum[i], self.sumsq[i], self.n[i]);
                } else {
                    let j = j as usize;
                    *e = step.end[j];
                    *s = self.sum[i] + step.sum[j];
                    *s2 = self.sumsq[i] + step.sumsq[j];
                    *n = self.n[i] + step.n[j];
                }
            });
        out
    }
}

/// One greedy step of class `k` from every voxel.
fn single_step(vol: &Volume, nb: &PathNeighborhoods, k: usize) -> Walk {
    let dims = vol.dims();
    let [nx, ny, _] = dims.as_array();
    let data = vol.data();
    let mut w = Walk::stopped(dims.len());
    (&mut w.end, &mut w.sum, &mut w.sumsq, &mut w.n)
        .into_par_iter()
        .enumerate()
        .with_min_len(4096)
        .for_each(|(i, (e, s, s2, n))| {
            let (x, y, z) = (
                (i % nx) as isize,
                ((i / nx) % ny) as isize,
                (i / (nx * ny)) as isize,
            );
            let mut best: Option<(f32, usize)> = None;
            for o in &nb.offsets[k] {
                let q = [x + o[0] as isize, y + o[1] as isize, z + o[2] as isize];
                if !dims.contains(q[0], q[1], q[2]) {
                    continue;
                }
                let qi = dims.index(q[0] as usize, q[1] as usize, q[2] as usize);
                if best.map_or(true, |(b, _)| data[qi] < b) {
                    best = Some((data[qi], qi));
                }
            }
            if let Some((v, qi)) = best {
                let v = v as f64;
                (*e, *s, *s2, *n) = (qi as u32, v, v * v, 1);
            }
        });
    w
}

/// Sums over the greedy arm of `ell` voxels of class `k` from every voxel,
/// composed from power-of-two walks.
fn arm_walk(vol: &Volume, nb: &PathNeighborhoods, k: usize, ell: usize) -> Walk {
    let mut acc = Walk::identity(vol.len());
    let mut pow = single_step(vol, nb, k);
    let mut rest = ell;
    loop {
        if rest & 1 == 1 {
            acc = acc.then(&pow);
        }
        rest >>= 1;
        if rest == 0 {
            break;
        }
        pow = pow.then(&pow);
    }
    acc
}

/// Separation of the darkest and brightest local path through each voxel:
/// `exp(-(mu+ - mu-)^2 / (2 (s+^2 + s-^2 + eps)))` with population
/// variances. A local path is the union of its two opposite arms as grown
/// by [`greedy_arm`]; the voxel itself is shared by all nine and left out.
/// Values near 0 mark cracks.
pub fn coherence(vol: &Volume, ell: usize) -> Result<Volume> {
    if ell < 2 {
        return Err(Error::param(format!("path length must be >= 2, got {ell}")));
    }
    if vol.len() >= STOPPED as usize {
        return Err(Error::param("volume too large for path indexing"));
    }
    let nb = PathNeighborhoods::new();
    let len = vol.len();
    let mut lo = vec![(f64::INFINITY, 0.0f64); len];
    let mut hi = vec![(f64::NEG_INFINITY, 0.0f64); len];
    for k in 0..9 {
        let a = arm_walk(vol, &nb, k, ell);
        let b = arm_walk(vol, &nb, PathNeighborhoods::opposite(k), ell);
        lo.par_iter_mut()
            .zip(hi.par_iter_mut())
            .enumerate()
            .with_min_len(4096)
            .for_each(|(i, (lo, hi))| {
                let n = a.n[i] + b.n[i];
                if n == 0 {
                    return;
                }
                let n = n as f64;
                let mean = (a.sum[i] + b.sum[i]) / n;
                let var = ((a.sumsq[i] + b.sumsq[i]) / n - mean * mean).max(0.0);
                if mean < lo.0 {
                    *lo = (mean, var);
                }
                if mean > hi.0 {
                    *hi = (mean, var);
                }
            });
    }
    let out = lo
        .par_iter()
        .zip(&hi)
        .map(|(lo, hi)| {
            if lo.0 > hi.0 {
                return 1.0;
            }
            let d = hi.0 - lo.0;
            (-(d * d) / (2.0 * (hi.1 + lo.1 + COHERENCE_EPS))).exp() as f32
        })
        .collect();
    Volume::new(vol.dims(), out)
}

/// `h <= t3`.
pub fn minimal_paths(vol: &Volume, p: &MinimalPathParams) -> Result<BinaryMask> {
    p.validate()?;
    let h = coherence(vol, p.ell)?;
    let mut m = BinaryMask::empty(vol.dims());
    for (i, &v) in h.data().iter().enumerate() {
        if v as f64 <= p.t3 {
            m.set(i, true);
        }
    }
    Ok(m)
}
