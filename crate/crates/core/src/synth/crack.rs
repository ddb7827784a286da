use serde::{Deserialize, Serialize};

use super::fbs::{simulate_fbs, FbsField};
use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{dilate, BinaryMask, Dims};

/// Axis along which the surface height is measured; the surface is the
/// graph of a function over the two remaining axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightAxis {
    X,
    Y,
    Z,
}

impl HeightAxis {
    /// The axis used for the second crack of an orthogonal pair.
    pub fn orthogonal(self) -> Self {
        match self {
            HeightAxis::Z => HeightAxis::X,
            HeightAxis::X => HeightAxis::Y,
            HeightAxis::Y => HeightAxis::Z,
        }
    }

    /// Maps surface coordinates `(p, q)` and height `h` to `(x, y, z)`.
    fn place(self, p: usize, q: usize, h: usize) -> (usize, usize, usize) {
        match self {
            HeightAxis::Z => (p, q, h),
            HeightAxis::Y => (p, h, q),
            HeightAxis::X => (h, p, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    Single,
    Parallel,
    Orthogonal,
}

impl Arrangement {
    pub fn crack_count(self) -> usize {
        match self {
            Arrangement::Single => 1,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arrangement::Single => "single",
            Arrangement::Parallel => "parallel",
            Arrangement::Orthogonal => "orthogonal",
        }
    }
}

/// Recipe for the ground-truth crack mask of one volume of side `2^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackSpec {
    pub n: u32,
    pub hurst: f64,
    pub width: usize,
    pub plane: HeightAxis,
    pub count: usize,
    pub arrangement: Arrangement,
    pub seed: u64,
}

impl CrackSpec {
    pub fn single(n: u32, hurst: f64, width: usize, seed: u64) -> Self {
        CrackSpec {
            n,
            hurst,
            width,
            plane: HeightAxis::Z,
            count: 1,
            arrangement: Arrangement::Single,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width % 2 == 0 {
            return Err(Error::param(format!(
                "crack width must be odd, got {}",
                self.width
            )));
        }
        if self.count != self.arrangement.crack_count() {
            return Err(Error::param(format!(
                "arrangement {} needs {} crack(s), count is {}",
                self.arrangement.as_str(),
                self.arrangement.crack_count(),
                self.count
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims::cube(1 << self.n)
    }
}

/// Discretizes a surface into a width-1 mask: heights are mapped affinely
/// onto `[-half, half]`, rounded half away from zero and offset by `center`.
///
/// When the affine map would make two 4-adjacent columns differ by a full
/// voxel or more, the relief is flattened so that the graph stays
/// 26-connected.
pub fn rasterize_surface(
    field: &FbsField,
    axis: HeightAxis,
    center: usize,
    half: usize,
) -> BinaryMask {
    let side = field.side();
    let dims = Dims::cube(side);
    let (lo, hi) = field
        .heights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mid = 0.5 * (lo + hi);
    let mut scale = if hi > lo {
        2.0 * half as f64 / (hi - lo)
    } else {
        0.0
    };
    let mut max_step = 0.0f64;
    for q in 0..side {
        for p in 0..side {
            let v = field.at(p, q);
            if p + 1 < side {
                max_step = max_step.max((field.at(p + 1, q) - v).abs());
            }
            if q + 1 < side {
                max_step = max_step.max((field.at(p, q + 1) - v).abs());
            }
        }
    }
    if scale * max_step >= 1.0 {
        scale = 0.999 / max_step;
    }
    let mut mask = BinaryMask::empty(dims);
    for q in 0..side {
        for p in 0..side {
            let level = ((field.at(p, q) - mid) * scale).round() as isize;
            let h = (center as isize + level).clamp(0, side as isize - 1) as usize;
            let (x, y, z) = axis.place(p, q, h);
            mask.set_xyz(x, y, z, true);
        }
    }
    mask
}

/// Single-surface discretization over the full depth range around the mid-slice,
/// then dilation to `width`.
pub fn rasterize_crack(field: &FbsField, width: usize, plane: HeightAxis) -> Result<BinaryMask> {
    let side = field.side();
    let surface = rasterize_surface(field, plane, side / 2, side / 2 - 1);
    dilate(&surface, width)
}

/// Builds the ground-truth mask for a crack recipe.
///
/// Parallel pairs sit at quarter and three-quarter depth with half the
/// relief each; orthogonal pairs share the mid-slice of two different axes
/// and are united where they cross.
pub fn crack_mask(spec: &CrackSpec) -> Result<BinaryMask> {
    spec.validate()?;
    let side = 1usize << spec.n;
    let field = |k: u64| simulate_fbs(spec.n, spec.hurst, seed::derive(spec.seed, k));
    let surfaces = match spec.arrangement {
        Arrangement::Single => vec![rasterize_surface(
            &field(0)?,
            spec.plane,
            side / 2,
            side / 2 - 1,
        )],
        Arrangement::Parallel => {
            let half = (side / 4).saturating_sub(1).max(1);
            vec![
                rasterize_surface(&field(0)?, spec.plane, side / 4, half),
                rasterize_surface(&field(1)?, spec.plane, 3 * side / 4, half),
            ]
        }
        Arrangement::Orthogonal => vec![
            rasterize_surface(&field(0)?, spec.plane, side / 2, side / 2 - 1),
            rasterize_surface(&field(1)?, spec.plane.orthogonal(), side / 2, side / 2 - 1),
        ],
    };
    let mut mask = BinaryMask::empty(Dims::cube(side));
    for s in surfaces {
        mask = mask.union(&dilate(&s, spec.width)?)?;
    }
    Ok(mask)
}
