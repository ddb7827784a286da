use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationParams {
    /// Threshold increment; may be negative.
    pub epsilon: f64,
    /// Window half-size; the window is `(2 w + 1)^3` centred on the seed.
    pub w: usize,
    /// Minimum overlap fraction with the preselection.
    pub f: f64,
    /// Minimum detection count.
    pub tau: u32,
}

impl PercolationParams {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 {
            return Err(Error::param("percolation window half-size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.f) {
            return Err(Error::param(format!(
                "percolation f must be in [0,1], got {}",
                self.f
            )));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::param("percolation epsilon must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f32, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Percolated set grown from `seed` inside its window, sorted by index.
///
/// Each round adds every window voxel adjacent (26-neighbourhood) to the
/// current set with gray value at most `t`, then sets
/// `t = max(max_P I, t) + epsilon`. Growth ends when the set touches a face
/// of the window, when no candidates remain, or when a round adds nothing
/// and `t` can no longer rise.
pub fn percolate(vol: &Volume, seed: usize, epsilon: f64, w: usize) -> Vec<usize> {
    let dims = vol.dims();
    let data = vol.data();
    let s = dims.coord(seed);
    let sc = [s.x as isize, s.y as isize, s.z as isize];
    let wi = w as isize;
    let lo = sc.map(|c| (c - wi).max(0));
    let hi = [
        (sc[0] + wi).min(dims.nx as isize - 1),
        (sc[1] + wi).min(dims.ny as isize - 1),
        (sc[2] + wi).min(dims.nz as isize - 1),
    ];
    let ext = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let local = |c: [isize; 3]| {
        ((c[0] - lo[0]) + ext[0] * ((c[1] - lo[1]) + ext[1] * (c[2] - lo[2]))) as usize
    };
    // 0 unseen, 1 queued, 2 member
    let mut state = vec![0u8; (ext[0] * ext[1] * ext[2]) as usize];
    let mut heap: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    let mut members = vec![seed];
    state[local(sc)] = 2;

    let push_neighbours = |c: [isize; 3], state: &mut [u8], heap: &mut BinaryHeap<Reverse<Key>>| {
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if (0..3).any(|a| q[a] < lo[a] || q[a] > hi[a]) {
                        continue;
                    }
                    let l = local(q);
                    if state[l] == 0 {
                        state[l] = 1;
                        let gi = dims.index(q[0] as usize, q[1] as usize, q[2] as usize);
                        heap.push(Reverse(Key(data[gi], gi)));
                    }
                }
            }
        }
    };
    push_neighbours(sc, &mut state, &mut heap);

    let mut max_p = data[seed] as f64;
    let mut t = max_p + epsilon;
    let mut added = Vec::new();
    loop {
        added.clear();
        while let Some(Reverse(Key(v, gi))) = heap.peek().copied() {
            if v as f64 > t {
                break;
            }
            heap.pop();
            added.push(gi);
        }
        if added.is_empty() {
            let next = max_p.max(t) + epsilon;
            if heap.is_empty() || next <= t {
                break;
            }
            t = next;
            continue;
        }
        let mut contact = false;
        for &gi in &added {
            let c = dims.coord(gi);
            let q = [c.x as isize, c.y as isize, c.z as isize];
            state[local(q)] = 2;
            max_p = max_p.max(data[gi] as f64);
            contact |= (0..3).any(|a| (q[a] - sc[a]).abs() == wi);
        }
        for &gi in &added {
            let c = dims.coord(gi);
            push_neighbours(
                [c.x as isize, c.y as isize, c.z as isize],
                &mut state,
                &mut heap,
            );
        }
        members.extend_from_slice(&added);
        t = max_p.max(t) + epsilon;
        if contact {
            break;
        }
    }
    members.sort_unstable();
    members
}

/// Per-voxel count of accepted percolations (`|P n H| / |P| >= f`) started
/// from every preselected voxel.
pub fn percolation_counts(
    vol: &Volume,
    preselect: &BinaryMask,
    p: &PercolationParams,
) -> Result<Vec<u32>> {
    p.validate()?;
    vol.dims()
        .ensure_same(&preselect.dims(), "percolation preselection")?;
    let seeds: Vec<usize> = preselect.iter_ones().collect();
    let n = vol.len();
    let counts = seeds
        .par_iter()
        .with_min_len(512)
        .fold(
            || vec![0u32; n],
            |mut acc, &s| {
                let set = percolate(vol, s, p.epsilon, p.w);
                let hits = set.iter().filter(|&&i| preselect.get(i)).count();
                if hits as f64 / set.len() as f64 >= p.f {
                    for i in set {
                        acc[i] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

/// `count >= tau`; an empty preselection gives an empty mask.
pub fn hessian_percolation(
    vol: &Volume,
    preselect: &BinaryMask,
    p: &PercolationParams,
) -> Result<BinaryMask> {
    let counts = percolation_counts(vol, preselect, p)?;
    Ok(counts_to_mask(vol, preselect, &counts, p.tau))
}

pub(crate) fn counts_to_mask(
    vol: &Volume,
    preselect: &BinaryMask,
    counts: &[u32],
    tau: u32,
) -> BinaryMask {
    let mut m = BinaryMask::empty(vol.dims());
    if preselect.count_ones() == 0 {
        return m;
    }
    for (i, &c) in counts.iter().enumerate() {
        if c >= tau {
            m.set(i, true);
        }
    }
    m
}
