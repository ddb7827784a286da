use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::directions::{plane_basis, round_offset, sphere_directions};
use crate::error::{Error, Result};
use crate::hessian::{eigenvalues3, hessian};
use crate::volume::{pad_mirror, BinaryMask, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveMorphParams {
    /// Hessian scale for the initial normal; 0 uses finite differences.
    pub sigma: f64,
    /// Plate half-length; the plate is `(2 half + 1)^2 x 1`.
    pub half: usize,
    pub n: usize,
    /// Half opening angle of the search cone, radians.
    pub delta_max: f64,
    pub k: f64,
}

impl AdaptiveMorphParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max > 0.0 && self.delta_max < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param(format!(
                "delta_max must be in (0, pi/2), got {}",
                self.delta_max
            )));
        }
        if self.half == 0 || self.half > 40 {
            return Err(Error::param(format!(
                "plate half-length must be in 1..=40, got {}",
                self.half
            )));
        }
        if !self.k.is_finite() {
            return Err(Error::param("k must be finite"));
        }
        Ok(())
    }
}

fn median(buf: &mut [f32]) -> f32 {
    let mid = buf.len() / 2;
    *buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Best plate median minus the line median along the best plate normal,
/// both on the inverted volume.
///
/// Candidate normals are the direction-set members within `delta_max` of
/// the Hessian normal; all directions are scored where the Hessian gives no
/// normal or the cone is empty.
pub fn adaptive_difference(vol: &Volume, p: &AdaptiveMorphParams) -> Result<Volume> {
    p.validate()?;
    let dirs = sphere_directions(p.n)?.dirs;
    let dims = vol.dims();
    let [nx, ny, _] = dims.as_array();
    let eig = eigenvalues3(&hessian(vol, p.sigma)?, true);
    let normals = eig.normal.expect("normals requested");

    let mean = vol.mean() as f32;
    let inv = vol.map(|v| mean - v);
    let h = p.half as isize;
    let plates: Vec<Vec<[isize; 3]>> = dirs
        .iter()
        .map(|&d| {
            let (u, v) = plane_basis(d);
            let mut offs = Vec::with_capacity((2 * p.half + 1).pow(2));
            for i in -h..=h {
                for j in -h..=h {
                    let a = round_offset(u, i as f64);
                    let b = round_offset(v, j as f64);
                    offs.push([a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
                }
            }
            offs
        })
        .collect();
    let lines: Vec<Vec<[isize; 3]>> = dirs
        .iter()
        .map(|&d| (-h..=h).map(|t| round_offset(d, t as f64)).collect())
        .collect();
    let pad = plates
        .iter()
        .chain(&lines)
        .flatten()
        .flat_map(|o| o.iter().map(|c| c.unsigned_abs()))
        .max()
        .unwrap_or(0);
    let (img, pd) = pad_mirror(&inv, pad);
    let img: Vec<f32> = img.into_iter().map(|v| v as f32).collect();
    let strides = [1isize, pd[0] as isize, (pd[0] * pd[1]) as isize];
    let flat = |offs: &Vec<[isize; 3]>| -> Vec<isize> {
        offs.iter()
            .map(|o| o[0] * strides[0] + o[1] * strides[1] + o[2] * strides[2])
            .collect()
    };
    let plates: Vec<Vec<isize>> = plates.iter().map(flat).collect();
    let lines: Vec<Vec<isize>> = lines.iter().map(flat).collect();
    let cos_max = p.delta_max.cos();

    let mut out = vec![0.0f32; dims.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            let mut pbuf = vec![0.0f32; plates[0].len()];
            let mut lbuf = vec![0.0f32; lines[0].len()];
            let mut cand = Vec::with_capacity(dirs.len());
            for y in 0..ny {
                for x in 0..nx {
                    let idx = dims.index(x, y, z);
                    let nrm = normals[idx].map(|c| c as f64);
                    cand.clear();
                    if nrm != [0.0; 3] {
                        for (di, d) in dirs.iter().enumerate() {
                            if (nrm[0] * d[0] + nrm[1] * d[1] + nrm[2] * d[2]).abs() >= cos_max {
                                cand.push(di);
                            }
                        }
                    }
                    if cand.is_empty() {
                        cand.extend(0..dirs.len());
                    }
                    let q = ((x + pad) + pd[0] * ((y + pad) + pd[1] * (z + pad))) as isize;
                    let mut best = f32::NEG_INFINITY;
                    let mut best_dir = cand[0];
                    for &di in &cand {
                        for (b, &o) in pbuf.iter_mut().zip(&plates[di]) {
                            *b = img[(q + o) as usize];
                        }
                        let m = median(&mut pbuf);
                        if m > best {
                            best = m;
                            best_dir = di;
                        }
                    }
                    for (b, &o) in lbuf.iter_mut().zip(&lines[best_dir]) {
                        *b = img[(q + o) as usize];
                    }
                    slice[x + nx * y] = best - median(&mut lbuf);
                }
            }
        });
    Volume::new(dims, out)
}

/// Global mean and population standard deviation.
pub(crate) fn mean_std(v: &Volume) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.mean();
    let var = v
        .data()
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// `diff > mu + k sigma` over the difference volume; empty when it is flat.
pub fn adaptive_threshold(diff: &Volume, k: f64) -> BinaryMask {
    let (mu, sd) = mean_std(diff);
    let mut m = BinaryMask::empty(diff.dims());
    if !(sd > 0.0) {
        return m;
    }
    let t5 = mu + k * sd;
    for (i, &v) in diff.data().iter().enumerate() {
        if v as f64 > t5 {
            m.set(i, true);
        }
    }
    m
}

pub fn adaptive_morph(vol: &Volume, p: &AdaptiveMorphParams) -> Result<BinaryMask> {
    Ok(adaptive_threshold(&adaptive_difference(vol, p)?, p.k))
}
