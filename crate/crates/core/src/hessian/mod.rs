//! Scale-space Hessian, sorted eigenvalues and the random-forest feature bank.
//!
//! Second derivatives are Gaussian-derivative convolutions multiplied by a
//! scale factor: `sigma` by default, `sigma^2` on request. At `sigma == 0`
//! plain central differences are used with factor one.

mod eigen;
mod features;

pub use eigen::{eigenvalues_sym3, eigenvector_sym3};
pub use features::{feature_bank, for_each_feature_slab, FeatureBankConfig, FeatureKind};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::{gaussian_derivative, Dims, Volume};

/// Scale normalization applied to second derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleNorm {
    /// Multiply by `sigma`.
    #[default]
    Linear,
    /// Multiply by `sigma^2`.
    Squared,
}

impl ScaleNorm {
    pub fn factor(self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 1.0;
        }
        match self {
            ScaleNorm::Linear => sigma,
            ScaleNorm::Squared => sigma * sigma,
        }
    }
}

/// Unique entries in storage order.
pub const HESSIAN_ENTRIES: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// The six unique Hessian entries at one scale, stored in
/// [`HESSIAN_ENTRIES`] order.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub sigma: f64,
    pub entries: [Volume; 6],
}

impl HessianField {
    pub fn dims(&self) -> Dims {
        self.entries[0].dims()
    }

    /// `h_ij` for `i, j` in `0..3`; symmetric by shared storage.
    pub fn get(&self, i: usize, j: usize) -> &Volume {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = HESSIAN_ENTRIES
            .iter()
            .position(|&e| e == (i, j))
            .expect("index in 0..3");
        &self.entries[k]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 6] {
        std::array::from_fn(|k| self.entries[k].data()[idx] as f64)
    }
}

pub fn hessian(vol: &Volume, sigma: f64) -> Result<HessianField> {
    hessian_with(vol, sigma, ScaleNorm::Linear)
}

pub fn hessian_with(vol: &Volume, sigma: f64, norm: ScaleNorm) -> Result<HessianField> {
    let f = norm.factor(sigma) as f32;
    let orders: [[u8; 3]; 6] = [
        [2, 0, 0],
        [0, 2, 0],
        [0, 0, 2],
        [1, 1, 0],
        [1, 0, 1],
        [0, 1, 1],
    ];
    let mut vols = Vec::with_capacity(6);
    for o in orders {
        let mut v = gaussian_derivative(vol, sigma, o)?;
        if f != 1.0 {
            v.data_mut().par_iter_mut().for_each(|x| *x *= f);
        }
        vols.push(v);
    }
    let entries: [Volume; 6] = vols.try_into().expect("six entries");
    Ok(HessianField { sigma, entries })
}

/// Eigenvalue volumes with `|l1| <= |l2| <= |l3|` at every voxel and,
/// optionally, the unit eigenvector belonging to `l3`.
#[derive(Debug, Clone)]
pub struct EigenField {
    pub l1: Volume,
    pub l2: Volume,
    pub l3: Volume,
    /// Zero vector where the Hessian is a multiple of the identity.
    pub normal: Option<Vec<[f32; 3]>>,
}

pub fn eigenvalues3(h: &HessianField, with_normal: bool) -> EigenField {
    let dims = h.dims();
    let n = dims.len();
    let mut l = vec![[0.0f32; 3]; n];
    let mut normal = if with_normal {
        vec![[0.0f32; 3]; n]
    } else {
        Vec::new()
    };
    const CHUNK: usize = 4096;
    if with_normal {
        l.par_chunks_mut(CHUNK)
            .zip(normal.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (ls, ns))| {
                for (k, (lv, nv)) in ls.iter_mut().zip(ns.iter_mut()).enumerate() {
                    let a = h.at(c * CHUNK + k);
                    let ev = eigenvalues_sym3(a);
                    *lv = ev.map(|v| v as f32);
                    *nv = eigenvector_sym3(a, ev[2]).map(|v| v as f32);
                }
            });
    } else {
        l.par_chunks_mut(CHUNK).enumerate().for_each(|(c, ls)| {
            for (k, lv) in ls.iter_mut().enumerate() {
                *lv = eigenvalues_sym3(h.at(c * CHUNK + k)).map(|v| v as f32);
            }
        });
    }
    let pick = |j: usize| Volume::from_raw(dims, l.iter().map(|e| e[j]).collect());
    EigenField {
        l1: pick(0),
        l2: pick(1),
        l3: pick(2),
        normal: with_normal.then_some(normal),
    }
}
