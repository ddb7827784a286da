use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::directions::{plane_basis, round_offset, sphere_directions};
use crate::error::{Error, Result};
use crate::filters::threshold;
use crate::volume::{pad_mirror, BinaryMask, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateParams {
    /// Plate half-width; the plate spans `2 half + 1` voxels per in-plane axis.
    pub half: usize,
    /// Thickness of each background layer.
    pub b: usize,
    /// Thickness of the crack layer.
    pub c: usize,
    /// Sphere discretization.
    pub n: usize,
    pub t4: f64,
}

impl TemplateParams {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 || self.b == 0 {
            return Err(Error::param("template layers b and c must be positive"));
        }
        if self.n < 4 {
            return Err(Error::param(format!(
                "sphere discretization n must be >= 4, got {}",
                self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.t4) {
            return Err(Error::param(format!(
                "template threshold t4 must be in [0,1], got {}",
                self.t4
            )));
        }
        Ok(())
    }
}

/// Rotated template as three independent offset lists: a point `(i, j, k)`
/// of the base template lands at `round(i u) + round(j v) + round(t_k d)`.
struct RotatedTemplate {
    along_u: Vec<[isize; 3]>,
    along_v: Vec<[isize; 3]>,
    layers: Vec<[isize; 3]>,
    crack: Vec<bool>,
    /// L-infinity reach of the u, v and normal offset lists.
    reach: [usize; 3],
}

impl RotatedTemplate {
    fn new(d: [f64; 3], p: &TemplateParams) -> Self {
        let (u, v) = plane_basis(d);
        let h = p.half as isize;
        let in_plane: Vec<f64> = (-h..=h).map(|i| i as f64).collect();
        let thick = 2 * p.b + p.c;
        let centre = (thick as f64 - 1.0) / 2.0;
        let normal: Vec<f64> = (0..thick).map(|k| k as f64 - centre).collect();
        let (along_u, ru) = line(u, &in_plane);
        let (along_v, rv) = line(v, &in_plane);
        let (layers, rd) = line(d, &normal);
        RotatedTemplate {
            along_u,
            along_v,
            layers,
            crack: (0..thick).map(|k| k >= p.b && k < p.b + p.c).collect(),
            reach: [ru, rv, rd],
        }
    }
}

fn line(axis: [f64; 3], ts: &[f64]) -> (Vec<[isize; 3]>, usize) {
    let offs: Vec<[isize; 3]> = ts.iter().map(|&t| round_offset(axis, t)).collect();
    let reach = offs
        .iter()
        .flat_map(|o| o.iter().map(|c| c.unsigned_abs()))
        .max()
        .unwrap_or(0);
    (offs, reach)
}

fn flat(offs: &[[isize; 3]], strides: [isize; 3]) -> Vec<isize> {
    offs.iter()
        .map(|o| o[0] * strides[0] + o[1] * strides[1] + o[2] * strides[2])
        .collect()
}

/// Largest uninformed-patch variance relative to the mean square.
const FLAT_PATCH: f64 = 1e-9;

/// Maximum over all directions of the normalized cross-correlation between
/// the inverted volume and the rotated plate template, in `[-1, 1]`.
///
/// Windows with (numerically) zero variance score 0.
pub fn template_response(vol: &Volume, p: &TemplateParams) -> Result<Volume> {
    p.validate()?;
    if p.half > 40 || p.b + p.c > 40 {
        return Err(Error::param("template too large"));
    }
    let dirs = sphere_directions(p.n)?;
    let dims = vol.dims();
    let [nx, ny, _] = dims.as_array();
    // inversion about the mean; correlation ignores the additive constant
    let mean = vol.mean() as f32;
    let inv = vol.map(|v| mean - v);

    let side = 2 * p.half + 1;
    let thick = 2 * p.b + p.c;
    let m = (side * side * thick) as f64;
    let tbar = (side * side * p.c) as f64 / m;
    let sigma_t = (tbar * (1.0 - tbar)).sqrt();

    let templates: Vec<RotatedTemplate> = dirs
        .dirs
        .iter()
        .map(|&d| RotatedTemplate::new(d, p))
        .collect();
    let pad = templates
        .iter()
        .map(|t| t.reach.iter().sum::<usize>())
        .max()
        .unwrap_or(0);
    let (img, pd) = pad_mirror(&inv, pad);
    let strides = [1isize, pd[0] as isize, (pd[0] * pd[1]) as isize];
    let sq: Vec<[f64; 3]> = img.iter().map(|&v| [v, v * v, 0.0]).collect();
    drop(img);

    let mut best = vec![f32::NEG_INFINITY; dims.len()];
    let mut stage1 = vec![[0.0f64; 3]; sq.len()];
    let mut stage2 = vec![[0.0f64; 3]; sq.len()];
    for t in &templates {
        let [ru, rv, _] = t.reach;
        let (layers, along_v, along_u) = (
            flat(&t.layers, strides),
            flat(&t.along_v, strides),
            flat(&t.along_u, strides),
        );
        // normal direction: total, squares and crack-layer sum
        let m1 = pad - ru - rv;
        for_margin(&mut stage1, pd, m1, |q| {
            let mut acc = [0.0; 3];
            for (&o, &is_crack) in layers.iter().zip(&t.crack) {
                let s = sq[(q + o) as usize];
                acc[0] += s[0];
                acc[1] += s[1];
                if is_crack {
                    acc[2] += s[0];
                }
            }
            acc
        });
        let s1 = &stage1;
        for_margin(&mut stage2, pd, pad - ru, |q| sum_at(s1, q, &along_v));
        let s2 = &stage2;
        best.par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(z, out)| {
                for y in 0..ny {
                    for x in 0..nx {
                        let q = ((x + pad) + pd[0] * ((y + pad) + pd[1] * (z + pad))) as isize;
                        let c = correlation(sum_at(s2, q, &along_u), m, tbar, sigma_t);
                        let o = &mut out[x + nx * y];
                        if c > *o {
                            *o = c;
                        }
                    }
                }
            });
    }
    Volume::new(dims, best)
}

#[inline]
fn sum_at(src: &[[f64; 3]], q: isize, offsets: &[isize]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for &o in offsets {
        let s = src[(q + o) as usize];
        acc[0] += s[0];
        acc[1] += s[1];
        acc[2] += s[2];
    }
    acc
}

/// Fills every voxel at least `margin` away from the padded border.
fn for_margin(
    dst: &mut [[f64; 3]],
    pd: [usize; 3],
    margin: usize,
    f: impl Fn(isize) -> [f64; 3] + Sync,
) {
    let plane = pd[0] * pd[1];
    dst.par_chunks_mut(plane).enumerate().for_each(|(z, out)| {
        if z < margin || z + margin >= pd[2] {
            return;
        }
        for y in margin..pd[1] - margin {
            for x in margin..pd[0] - margin {
                out[x + pd[0] * y] = f((x + pd[0] * (y + pd[1] * z)) as isize);
            }
        }
    });
}

#[inline]
fn correlation(acc: [f64; 3], m: f64, tbar: f64, sigma_t: f64) -> f32 {
    let [s, q, sc] = acc;
    let mean = s / m;
    let ms = q / m;
    let var = ms - mean * mean;
    if var <= FLAT_PATCH * ms || sigma_t == 0.0 {
        return 0.0;
    }
    let c = (sc - s * tbar) / (m * var.sqrt() * sigma_t);
    c.clamp(-1.0, 1.0) as f32
}

/// `max_theta C_theta(p) >= t4`.
pub fn template_match(vol: &Volume, p: &TemplateParams) -> Result<BinaryMask> {
    Ok(threshold(&template_response(vol, p)?, p.t4))
}
