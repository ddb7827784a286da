use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::phantom::PhantomSpec;
use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{dilate, gaussian_blur, BinaryMask, Volume};

/// Grayvalue model for crack voxels and the width of the smoothed seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeParams {
    pub crack_gray_mean: f64,
    pub crack_gray_std: f64,
    /// 0 disables seam smoothing.
    pub transition_sigma: f64,
    pub seed: u64,
}

impl CompositeParams {
    /// Crack grays drawn from the phantom's pore statistics.
    pub fn from_pores(phantom: &PhantomSpec, transition_sigma: f64, seed: u64) -> Self {
        CompositeParams {
            crack_gray_mean: phantom.pore.gray.mean,
            crack_gray_std: phantom.pore.gray.std,
            transition_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.crack_gray_std >= 0.0) || !self.crack_gray_mean.is_finite() {
            return Err(Error::param(
                "crack gray std must be non-negative and mean finite",
            ));
        }
        if !(self.transition_sigma >= 0.0) {
            return Err(Error::param("transition sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Replaces crack voxels by i.i.d. normal grays, then smooths the seam.
///
/// Smoothing is a blur of the whole composite whose result is kept only
/// on the crack dilated by one 3-cube step; every other voxel keeps the
/// exact background value.
pub fn composite(
    background: &Volume,
    crack: &BinaryMask,
    params: &CompositeParams,
) -> Result<Volume> {
    params.validate()?;
    background.dims().ensure_same(&crack.dims(), "composite")?;
    if crack.count_ones() == 0 {
        return Ok(background.clone());
    }
    let normal = Normal::new(params.crack_gray_mean, params.crack_gray_std)
        .map_err(|e| Error::param(e.to_string()))?;
    let mut rng = seed::rng(params.seed);
    let mut out = background.clone();
    {
        let data = out.data_mut();
        for i in crack.iter_ones() {
            data[i] = normal.sample(&mut rng) as f32;
        }
    }
    if params.transition_sigma > 0.0 {
        let smooth = gaussian_blur(&out, params.transition_sigma)?;
        let support = dilate(crack, 3)?;
        let data = out.data_mut();
        for i in support.iter_ones() {
            data[i] = smooth.data()[i];
        }
    }
    Ok(out.with_value_range(None))
}
