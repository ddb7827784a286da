use serde::{Deserialize, Serialize};

use super::{eigenvalues3, eigenvalues_sym3, hessian};
use crate::error::{Error, Result};
use crate::volume::{gaussian_blur, gaussian_derivative, Dims, Volume};

/// Scales of every transform in the bank. Feature order is fixed:
/// Gaussian, Laplacian of Gaussian, gradient magnitude, differences of
/// Gaussians, then per Hessian scale the six entries and three eigenvalues,
/// then per structure-tensor scale its three eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBankConfig {
    pub gaussian: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub gradient_magnitude: Vec<f64>,
    pub difference_of_gaussians: Vec<(f64, f64)>,
    pub hessian: Vec<f64>,
    pub structure_tensor: Vec<f64>,
}

/// One feature volume of the bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Gaussian(f64),
    Laplacian(f64),
    GradientMagnitude(f64),
    DifferenceOfGaussians(f64, f64),
    HessianEntry(f64, usize),
    HessianEigenvalue(f64, usize),
    StructureEigenvalue(f64, usize),
}

impl FeatureKind {
    pub fn name(&self) -> String {
        match *self {
            FeatureKind::Gaussian(s) => format!("gaussian({s})"),
            FeatureKind::Laplacian(s) => format!("laplacian({s})"),
            FeatureKind::GradientMagnitude(s) => format!("gradient_magnitude({s})"),
            FeatureKind::DifferenceOfGaussians(a, b) => format!("dog({a},{b})"),
            FeatureKind::HessianEntry(s, k) => {
                format!("hessian_{}({s})", ["xx", "yy", "zz", "xy", "xz", "yz"][k])
            }
            FeatureKind::HessianEigenvalue(s, k) => format!("hessian_ev{}({s})", k + 1),
            FeatureKind::StructureEigenvalue(s, k) => format!("structure_ev{}({s})", k + 1),
        }
    }
}

impl FeatureBankConfig {
    /// Sixty features tuned for width-3 cracks.
    pub fn table1() -> Self {
        FeatureBankConfig {
            gaussian: vec![0.5, 0.75, 1.0, 1.5, 2.5, 3.5, 5.0],
            laplacian: vec![0.5, 1.0, 1.5, 2.5, 3.5, 5.0],
            gradient_magnitude: vec![0.5, 1.0, 1.5, 2.5, 3.5, 5.0],
            difference_of_gaussians: vec![
                (1.0, 0.75),
                (1.5, 1.0),
                (2.5, 1.5),
                (3.5, 2.5),
                (5.0, 3.5),
            ],
            hessian: vec![0.5, 0.75, 1.0],
            structure_tensor: vec![0.5, 0.75, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .gaussian
            .iter()
            .chain(&self.laplacian)
            .chain(&self.gradient_magnitude)
            .chain(
                self.difference_of_gaussians
                    .iter()
                    .flat_map(|(a, b)| [a, b]),
            )
            .chain(&self.hessian)
            .chain(&self.structure_tensor);
        for &s in all {
            if !(s.is_finite() && s >= 0.5) {
                return Err(Error::param(format!(
                    "feature-bank scales must be >= 0.5, got {s}"
                )));
            }
        }
        if self.len() == 0 {
            return Err(Error::param("feature bank is empty"));
        }
        Ok(())
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        let mut out = Vec::new();
        out.extend(self.gaussian.iter().map(|&s| FeatureKind::Gaussian(s)));
        out.extend(self.laplacian.iter().map(|&s| FeatureKind::Laplacian(s)));
        out.extend(
            self.gradient_magnitude
                .iter()
                .map(|&s| FeatureKind::GradientMagnitude(s)),
        );
        out.extend(
            self.difference_of_gaussians
                .iter()
                .map(|&(a, b)| FeatureKind::DifferenceOfGaussians(a, b)),
        );
        for &s in &self.hessian {
            out.extend((0..6).map(|k| FeatureKind::HessianEntry(s, k)));
            out.extend((0..3).map(|k| FeatureKind::HessianEigenvalue(s, k)));
        }
        for &s in &self.structure_tensor {
            out.extend((0..3).map(|k| FeatureKind::StructureEigenvalue(s, k)));
        }
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.kinds().iter().map(FeatureKind::name).collect()
    }

    pub fn len(&self) -> usize {
        self.gaussian.len()
            + self.laplacian.len()
            + self.gradient_magnitude.len()
            + self.difference_of_gaussians.len()
            + 9 * self.hessian.len()
            + 3 * self.structure_tensor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Planes of context a z-slab needs so its interior matches the full volume.
    pub fn halo(&self) -> usize {
        let r = |s: f64| (4.0 * s).ceil() as usize;
        let single = self
            .gaussian
            .iter()
            .chain(&self.laplacian)
            .chain(&self.gradient_magnitude)
            .chain(
                self.difference_of_gaussians
                    .iter()
                    .flat_map(|(a, b)| [a, b]),
            )
            .chain(&self.hessian)
            .map(|&s| r(s))
            .max()
            .unwrap_or(0);
        // gradient, then smoothing of the products
        let tensor = self
            .structure_tensor
            .iter()
            .map(|&s| 2 * r(s))
            .max()
            .unwrap_or(0);
        single.max(tensor)
    }
}

/// Computes every feature over the whole volume, in [`FeatureBankConfig::kinds`] order.
pub fn feature_bank(vol: &Volume, cfg: &FeatureBankConfig) -> Result<Vec<Volume>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.len());
    for &s in &cfg.gaussian {
        out.push(gaussian_blur(vol, s)?);
    }
    for &s in &cfg.laplacian {
        let mut acc = gaussian_derivative(vol, s, [2, 0, 0])?;
        for o in [[0, 2, 0], [0, 0, 2]] {
            add_assign(&mut acc, &gaussian_derivative(vol, s, o)?);
        }
        out.push(acc);
    }
    for &s in &cfg.gradient_magnitude {
        let g = gradient(vol, s)?;
        let data = (0..vol.len())
            .map(|i| {
                let (a, b, c) = (g[0].data()[i], g[1].data()[i], g[2].data()[i]);
                (a * a + b * b + c * c).sqrt()
            })
            .collect();
        out.push(Volume::new(vol.dims(), data)?);
    }
    for &(s1, s2) in &cfg.difference_of_gaussians {
        let a = gaussian_blur(vol, s1)?;
        let b = gaussian_blur(vol, s2)?;
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        out.push(Volume::new(vol.dims(), data)?);
    }
    for &s in &cfg.hessian {
        let h = hessian(vol, s)?;
        let e = eigenvalues3(&h, false);
        out.extend(h.entries);
        out.extend([e.l1, e.l2, e.l3]);
    }
    for &s in &cfg.structure_tensor {
        out.extend(structure_eigenvalues(vol, s)?);
    }
    debug_assert_eq!(out.len(), cfg.len());
    Ok(out)
}

fn gradient(vol: &Volume, s: f64) -> Result<[Volume; 3]> {
    Ok([
        gaussian_derivative(vol, s, [1, 0, 0])?,
        gaussian_derivative(vol, s, [0, 1, 0])?,
        gaussian_derivative(vol, s, [0, 0, 1])?,
    ])
}

fn add_assign(acc: &mut Volume, other: &Volume) {
    acc.data_mut()
        .iter_mut()
        .zip(other.data())
        .for_each(|(a, b)| *a += b);
}

/// Eigenvalues of the gradient outer product smoothed at the same scale.
fn structure_eigenvalues(vol: &Volume, s: f64) -> Result<[Volume; 3]> {
    let g = gradient(vol, s)?;
    let dims = vol.dims();
    let mut a = Vec::with_capacity(6);
    for (i, j) in super::HESSIAN_ENTRIES {
        let prod: Vec<f32> = g[i]
            .data()
            .iter()
            .zip(g[j].data())
            .map(|(x, y)| x * y)
            .collect();
        a.push(gaussian_blur(&Volume::new(dims, prod)?, s)?);
    }
    let mut l = [Vec::new(), Vec::new(), Vec::new()];
    for v in l.iter_mut() {
        v.reserve(vol.len());
    }
    for i in 0..vol.len() {
        let m: [f64; 6] = std::array::from_fn(|k| a[k].data()[i] as f64);
        let ev = eigenvalues_sym3(m);
        for k in 0..3 {
            l[k].push(ev[k] as f32);
        }
    }
    let [l1, l2, l3] = l;
    Ok([
        Volume::new(dims, l1)?,
        Volume::new(dims, l2)?,
        Volume::new(dims, l3)?,
    ])
}

fn crop_z(vol: &Volume, z0: usize, z1: usize) -> Volume {
    let d = vol.dims();
    let plane = d.nx * d.ny;
    let data = vol.data()[z0 * plane..z1 * plane].to_vec();
    Volume::from_raw(Dims::new(d.nx, d.ny, z1 - z0), data)
}

/// Runs `f(z0, z1, features)` over consecutive z-slabs of at most `depth`
/// planes. Each slab is computed with enough context that its features are
/// bit-identical to the corresponding planes of [`feature_bank`].
pub fn for_each_feature_slab(
    vol: &Volume,
    cfg: &FeatureBankConfig,
    depth: usize,
    mut f: impl FnMut(usize, usize, &[Volume]) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    let nz = vol.dims().nz;
    let depth = depth.max(1);
    let halo = cfg.halo();
    if depth >= nz {
        return f(0, nz, &feature_bank(vol, cfg)?);
    }
    let mut z0 = 0;
    while z0 < nz {
        let z1 = (z0 + depth).min(nz);
        let (a, b) = (z0.saturating_sub(halo), (z1 + halo).min(nz));
        let feats = feature_bank(&crop_z(vol, a, b), cfg)?;
        let inner: Vec<Volume> = feats.iter().map(|v| crop_z(v, z0 - a, z1 - a)).collect();
        f(z0, z1, &inner)?;
        z0 = z1;
    }
    Ok(())
}
