//! Exact squared Euclidean distance transform (lower envelope of parabolas,
//! one separable pass per axis).

use crate::volume::{BinaryMask, Dims};

/// Squared distance from every voxel center to the nearest set voxel;
/// `f64::INFINITY` everywhere when the mask is empty.
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<f64> {
    let dims = mask.dims();
    let mut d: Vec<f64> = (0..dims.len())
        .map(|i| if mask.get(i) { 0.0 } else { f64::INFINITY })
        .collect();
    if mask.count_ones() == 0 {
        return d;
    }
    let [nx, ny, nz] = dims.as_array();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut v = vec![0usize; longest];
    let mut z = vec![0.0; longest + 1];
    for axis in 0..3 {
        let (n, stride) = match axis {
            0 => (nx, 1),
            1 => (ny, nx),
            _ => (nz, nx * ny),
        };
        for start in line_starts(dims, axis) {
            for i in 0..n {
                line[i] = d[start + i * stride];
            }
            envelope(&line[..n], &mut out[..n], &mut v, &mut z);
            for i in 0..n {
                d[start + i * stride] = out[i];
            }
        }
    }
    d
}

fn line_starts(dims: Dims, axis: usize) -> Vec<usize> {
    let [nx, ny, nz] = dims.as_array();
    match axis {
        0 => (0..ny * nz).map(|l| l * nx).collect(),
        1 => (0..nz)
            .flat_map(|z| (0..nx).map(move |x| x + z * nx * ny))
            .collect(),
        _ => (0..nx * ny).collect(),
    }
}

/// 1D transform `out[q] = min_p (q - p)^2 + f[p]`.
fn envelope(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                // k == 0 cannot occur: z[0] is -inf
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *o = dq * dq + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let d = Dims::new(9, 7, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [0.01, 0.05, 0.3] {
            let m = BinaryMask::from_fn(d, |_, _, _| rng.gen_bool(p));
            let ones: Vec<_> = m.iter_ones().map(|i| d.coord(i)).collect();
            let edt = squared_distance_transform(&m);
            for i in 0..d.len() {
                let c = d.coord(i);
                let best = ones
                    .iter()
                    .map(|o| {
                        let dx = c.x as f64 - o.x as f64;
                        let dy = c.y as f64 - o.y as f64;
                        let dz = c.z as f64 - o.z as f64;
                        dx * dx + dy * dy + dz * dz
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(edt[i], best);
            }
        }
    }

    #[test]
    fn empty_mask_is_infinite() {
        let m = BinaryMask::empty(Dims::cube(3));
        assert!(squared_distance_transform(&m)
            .iter()
            .all(|v| v.is_infinite()));
    }
}
