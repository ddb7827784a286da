use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit vectors on the upper hemisphere; `d` and `-d` are identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub n: usize,
    pub dirs: Vec<[f64; 3]>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Angle between two axes, in `[0, pi/2]`.
pub fn axial_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs().min(1.0);
    d.acos()
}

/// Latitude rings of equal polar spacing from the pole to the equator;
/// each ring carries a point count proportional to its circumference and
/// the equator only covers half a turn. About `n (n/4 + 1)` points.
pub fn sphere_directions(n: usize) -> Result<DirectionSet> {
    if n < 4 {
        return Err(Error::param(format!(
            "sphere discretization n must be >= 4, got {n}"
        )));
    }
    let target = n as f64 * (n as f64 / 4.0 + 1.0);
    let rings = ((PI * target / 8.0).sqrt().round() as usize).max(1);
    let dtheta = PI / 2.0 / rings as f64;
    let sin_sum: f64 = (1..rings).map(|j| (j as f64 * dtheta).sin()).sum();
    let c = (target - 1.0) / (sin_sum + 0.5);

    let mut dirs = vec![[0.0, 0.0, 1.0]];
    for j in 1..=rings {
        let theta = j as f64 * dtheta;
        let (count, span) = if j == rings {
            (((c / 2.0).round() as usize).max(1), PI)
        } else {
            (((c * theta.sin()).round() as usize).max(1), 2.0 * PI)
        };
        // alternate rings are rotated by half a step
        let offset = if j % 2 == 1 { 0.5 } else { 0.0 };
        for k in 0..count {
            let phi = span * (k as f64 + if j == rings { 0.0 } else { offset }) / count as f64;
            let st = if j == rings { 1.0 } else { theta.sin() };
            let ct = if j == rings { 0.0 } else { theta.cos() };
            dirs.push([st * phi.cos(), st * phi.sin(), ct]);
        }
    }
    Ok(DirectionSet { n, dirs })
}

/// Two unit vectors completing `d` to a right-handed orthonormal basis.
///
/// `u` is horizontal (`z x d`), so the frame turns with the volume under
/// rotations about z; on the poles `u` is the x axis.
pub fn plane_basis(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let h = cross([0.0, 0.0, 1.0], d);
    let u = if h.iter().map(|c| c * c).sum::<f64>() < 1e-18 {
        [1.0, 0.0, 0.0]
    } else {
        normalize(h)
    };
    let v = cross(d, u);
    (u, v)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Nearest voxel offset of `t * axis`; halves round away from zero even
/// when trigonometric noise lands them just below.
pub(crate) fn round_offset(axis: [f64; 3], t: f64) -> [isize; 3] {
    axis.map(|c| ((c * t * 1e9).round() / 1e9).round() as isize)
}
