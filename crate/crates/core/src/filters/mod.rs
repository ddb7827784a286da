//! Hessian plate filters for dark sheets: the sheet filter and the
//! plate variant of the Frangi filter, plus plain thresholding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{eigenvalues3, hessian_with, ScaleNorm};
use crate::volume::{BinaryMask, Volume};

/// `mask(p) = vol(p) >= t`.
pub fn threshold(vol: &Volume, t: f64) -> BinaryMask {
    let d = vol.dims();
    let mut m = BinaryMask::empty(d);
    for (i, &v) in vol.data().iter().enumerate() {
        if v as f64 >= t {
            m.set(i, true);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetParams {
    pub sigma: f64,
    pub rho: f64,
    pub delta: f64,
    pub t1: f64,
    #[serde(default)]
    pub norm: ScaleNorm,
}

impl SheetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::param(format!(
                "sheet rho must be in (0,1], got {}",
                self.rho
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param(format!(
                "sheet delta must be > 0, got {}",
                self.delta
            )));
        }
        if !self.t1.is_finite() {
            return Err(Error::param("sheet threshold must be finite"));
        }
        Ok(())
    }
}

/// Penalty for eigenvalue `ls` relative to the dominant `lt`; the three
/// branches are taken literally, so `ls <= 0` with `|ls| > |lt|` gives 0.
#[inline]
pub fn sheet_g(ls: f64, lt: f64, rho: f64, delta: f64) -> f64 {
    let at = lt.abs();
    if ls <= 0.0 && at >= ls.abs() {
        if at == 0.0 {
            return 1.0;
        }
        (1.0 + ls / at).powf(delta)
    } else if ls > 0.0 && ls <= at / rho {
        (1.0 - rho * ls / at).powf(delta)
    } else {
        0.0
    }
}

/// Sheetness from sorted eigenvalues; zero unless `l3 > 0`.
#[inline]
pub fn sheet_value(l1: f64, l2: f64, l3: f64, rho: f64, delta: f64) -> f64 {
    if l3 > 0.0 {
        l3 * sheet_g(l1, l3, rho, delta) * sheet_g(l2, l3, rho, delta)
    } else {
        0.0
    }
}

pub fn sheet_response(vol: &Volume, sigma: f64, rho: f64, delta: f64) -> Result<Volume> {
    sheet_response_with(
        vol,
        &SheetParams {
            sigma,
            rho,
            delta,
            t1: 0.0,
            norm: ScaleNorm::Linear,
        },
    )
}

pub fn sheet_response_with(vol: &Volume, p: &SheetParams) -> Result<Volume> {
    p.validate()?;
    let e = eigenvalues3(&hessian_with(vol, p.sigma, p.norm)?, false);
    let data = (0..vol.len())
        .into_par_iter()
        .map(|i| {
            sheet_value(
                e.l1.data()[i] as f64,
                e.l2.data()[i] as f64,
                e.l3.data()[i] as f64,
                p.rho,
                p.delta,
            ) as f32
        })
        .collect();
    Volume::new(vol.dims(), data)
}

pub fn sheet_segment(vol: &Volume, p: &SheetParams) -> Result<BinaryMask> {
    Ok(threshold(&sheet_response_with(vol, p)?, p.t1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrangiParams {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Threshold on the 8-bit normalized response.
    pub t2: f64,
    #[serde(default)]
    pub norm: ScaleNorm,
}

impl FrangiParams {
    pub fn single_scale(sigma: f64, alpha: f64, beta: f64, t2: f64) -> Self {
        FrangiParams {
            sigma_min: sigma,
            sigma_max: sigma,
            alpha,
            beta,
            t2,
            norm: ScaleNorm::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min >= 0.5
            && self.sigma_min <= self.sigma_max
            && self.sigma_max.is_finite())
        {
            return Err(Error::param(format!(
                "Frangi scales must satisfy 0.5 <= sigma_min <= sigma_max, got {}..{}",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::param("Frangi alpha and beta must be > 0"));
        }
        if !(0.0..=255.0).contains(&self.t2) {
            return Err(Error::param(format!(
                "Frangi t2 must be in [0,255], got {}",
                self.t2
            )));
        }
        Ok(())
    }

    /// `sigma_min, sigma_min + 0.5, ...` up to `sigma_max`.
    pub fn scales(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let s = self.sigma_min + 0.5 * k as f64;
            if s > self.sigma_max + 1e-9 {
                break;
            }
            out.push(s);
            k += 1;
        }
        out
    }
}

/// Largest `f32` below one; the plate measure is strictly below one but
/// `1 - exp(-x)` rounds to one for large `x`.
const BELOW_ONE: f32 = 0.99999994;

/// Plate measure at one voxel; `eta` is the volume-wide maximum of the
/// Frobenius norm at this scale.
#[inline]
pub fn frangi_value(l1: f64, l2: f64, l3: f64, alpha: f64, beta: f64, eta: f64) -> f64 {
    if l3 <= 0.0 || eta <= 0.0 {
        return 0.0;
    }
    let qa = l2.abs() / l3.abs();
    let r2 = l1 * l1 + l2 * l2 + l3 * l3;
    let structure = -(-r2 / eta).exp_m1();
    let plate = (-qa * qa / alpha).exp();
    if l2 != 0.0 {
        let qb = l1.abs() / (l2.abs() * l3.abs()).sqrt();
        plate * (-qb * qb / beta).exp() * structure
    } else {
        plate * structure
    }
}

/// Maximum plate measure over the scale range, in `[0, 1)`.
pub fn frangi_raw(vol: &Volume, p: &FrangiParams) -> Result<Volume> {
    p.validate()?;
    let mut best = vec![0.0f32; vol.len()];
    for s in p.scales() {
        let e = eigenvalues3(&hessian_with(vol, s, p.norm)?, false);
        let (l1, l2, l3) = (e.l1.data(), e.l2.data(), e.l3.data());
        let frob = |i: usize| {
            let (a, b, c) = (l1[i] as f64, l2[i] as f64, l3[i] as f64);
            (a * a + b * b + c * c).sqrt()
        };
        let eta = (0..vol.len())
            .into_par_iter()
            .map(frob)
            .reduce(|| 0.0, f64::max);
        best.par_iter_mut().enumerate().for_each(|(i, b)| {
            let v = frangi_value(
                l1[i] as f64,
                l2[i] as f64,
                l3[i] as f64,
                p.alpha,
                p.beta,
                eta,
            ) as f32;
            *b = b.max(v.min(BELOW_ONE));
        });
    }
    Volume::new(vol.dims(), best)
}

/// Min-max map onto `0..=255`, rounded; a constant volume maps to zero.
pub fn normalize_8bit(vol: &Volume) -> Volume {
    let (lo, hi) = vol.min_max();
    if hi <= lo {
        return Volume::zeros(vol.dims()).with_value_range(Some((0.0, 255.0)));
    }
    let scale = 255.0 / (hi as f64 - lo as f64);
    vol.map(|v| ((v as f64 - lo as f64) * scale).round() as f32)
        .with_value_range(Some((0.0, 255.0)))
}

/// Frangi response normalized to 8 bit, ready for `t2`.
pub fn frangi_response(vol: &Volume, p: &FrangiParams) -> Result<Volume> {
    Ok(normalize_8bit(&frangi_raw(vol, p)?))
}

pub fn frangi_segment(vol: &Volume, p: &FrangiParams) -> Result<BinaryMask> {
    Ok(threshold(&frangi_response(vol, p)?, p.t2))
}
