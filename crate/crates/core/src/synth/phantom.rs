//! Concrete-like background phantom: a textured cement matrix with bright
//! aggregate balls and dark air pores, each phase with i.i.d. normal
//! grayvalues, smoothed by a final Gaussian blur.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{gaussian_blur, Dims, Volume};

pub const PHASE_MATRIX: u8 = 0;
pub const PHASE_AGGREGATE: u8 = 1;
pub const PHASE_PORE: u8 = 2;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayStats {
    pub mean: f64,
    pub std: f64,
}

/// Random balls of one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusions {
    pub fraction: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub gray: GrayStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub matrix: GrayStats,
    pub aggregate: Inclusions,
    pub pore: Inclusions,
    pub blur_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Moderate contrast, pronounced texture and a few percent porosity.
    pub fn concrete(dims: Dims, seed: u64) -> Self {
        PhantomSpec {
            dims,
            matrix: GrayStats {
                mean: 150.0,
                std: 18.0,
            },
            aggregate: Inclusions {
                fraction: 0.30,
                radius_min: 4.0,
                radius_max: 12.0,
                gray: GrayStats {
                    mean: 185.0,
                    std: 14.0,
                },
            },
            pore: Inclusions {
                fraction: 0.03,
                radius_min: 2.0,
                radius_max: 6.0,
                gray: GrayStats {
                    mean: 45.0,
                    std: 12.0,
                },
            },
            blur_sigma: 1.0,
            seed,
        }
    }

    /// Dark cracks on a quiet matrix with sparse small pores.
    pub fn high_contrast(dims: Dims, seed: u64) -> Self {
        PhantomSpec {
            dims,
            matrix: GrayStats {
                mean: 180.0,
                std: 10.0,
            },
            aggregate: Inclusions {
                fraction: 0.25,
                radius_min: 4.0,
                radius_max: 10.0,
                gray: GrayStats {
                    mean: 205.0,
                    std: 8.0,
                },
            },
            pore: Inclusions {
                fraction: 0.01,
                radius_min: 2.0,
                radius_max: 4.0,
                gray: GrayStats {
                    mean: 40.0,
                    std: 8.0,
                },
            },
            blur_sigma: 0.8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, inc) in [("aggregate", &self.aggregate), ("pore", &self.pore)] {
            if !(0.0..=1.0).contains(&inc.fraction) {
                return Err(Error::param(format!(
                    "{name} fraction {} outside [0,1]",
                    inc.fraction
                )));
            }
            if inc.fraction > 0.0 && !(inc.radius_min > 0.0 && inc.radius_min <= inc.radius_max) {
                return Err(Error::param(format!(
                    "{name} radii must satisfy 0 < min <= max, got {}..{}",
                    inc.radius_min, inc.radius_max
                )));
            }
            if inc.gray.std < 0.0 {
                return Err(Error::param(format!(
                    "{name} gray std must be non-negative"
                )));
            }
        }
        if self.aggregate.fraction + self.pore.fraction >= 1.0 {
            return Err(Error::param("aggregate and pore fractions must sum to < 1"));
        }
        if self.matrix.std < 0.0 {
            return Err(Error::param("matrix gray std must be non-negative"));
        }
        if self.dims.is_empty() {
            return Err(Error::param("phantom dims must be positive"));
        }
        Ok(())
    }
}

/// Generated phantom with its per-voxel phase labels.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub gray: Volume,
    pub phases: Vec<u8>,
}

impl Phantom {
    pub fn phase_fraction(&self, phase: u8) -> f64 {
        self.phases.iter().filter(|&&p| p == phase).count() as f64 / self.phases.len() as f64
    }
}

pub fn synthesize_background(spec: &PhantomSpec) -> Result<Volume> {
    Ok(synthesize_phantom(spec)?.gray)
}

pub fn synthesize_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = spec.dims;
    let mut phases = vec![PHASE_MATRIX; dims.len()];
    let mut rng = seed::rng(seed::derive_named(spec.seed, "geometry"));

    place_balls(
        &mut phases,
        dims,
        &spec.aggregate,
        PHASE_AGGREGATE,
        &mut rng,
        |phases, ball| {
            // hard-core aggregates
            ball.iter().all(|&i| phases[i] != PHASE_AGGREGATE)
        },
    )?;
    place_balls(
        &mut phases,
        dims,
        &spec.pore,
        PHASE_PORE,
        &mut rng,
        |phases, ball| {
            // pores live in the cement matrix
            ball.iter().all(|&i| phases[i] != PHASE_AGGREGATE)
        },
    )?;

    let mut gray_rng = seed::rng(seed::derive_named(spec.seed, "gray"));
    let dist = |g: GrayStats| Normal::new(g.mean, g.std).map_err(|e| Error::param(e.to_string()));
    let dists = [
        dist(spec.matrix)?,
        dist(spec.aggregate.gray)?,
        dist(spec.pore.gray)?,
    ];
    let data: Vec<f32> = phases
        .iter()
        .map(|&p| dists[p as usize].sample(&mut gray_rng) as f32)
        .collect();
    let gray = gaussian_blur(&Volume::from_raw(dims, data), spec.blur_sigma)?;
    Ok(Phantom { gray, phases })
}

fn place_balls(
    phases: &mut [u8],
    dims: Dims,
    inc: &Inclusions,
    phase: u8,
    rng: &mut seed::Rng,
    accept: impl Fn(&[u8], &[usize]) -> bool,
) -> Result<()> {
    let target = (inc.fraction * dims.len() as f64).round() as usize;
    let mut covered = phases.iter().filter(|&&p| p == phase).count();
    let mut rejections = 0;
    let mut ball = Vec::new();
    while covered < target {
        let r = if inc.radius_max > inc.radius_min {
            rng.gen_range(inc.radius_min..=inc.radius_max)
        } else {
            inc.radius_min
        };
        let c = [
            rng.gen_range(0.0..dims.nx as f64),
            rng.gen_range(0.0..dims.ny as f64),
            rng.gen_range(0.0..dims.nz as f64),
        ];
        ball_voxels(dims, c, r, &mut ball);
        if ball.is_empty() || !accept(phases, &ball) {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::Generation(format!(
                    "could not reach volume fraction {} for phase {phase} ({covered}/{target} voxels) after {MAX_REJECTIONS} rejections",
                    inc.fraction
                )));
            }
            continue;
        }
        rejections = 0;
        for &i in &ball {
            if phases[i] != phase {
                phases[i] = phase;
                covered += 1;
            }
        }
    }
    Ok(())
}

fn ball_voxels(dims: Dims, c: [f64; 3], r: f64, out: &mut Vec<usize>) {
    out.clear();
    let lo = |v: f64| ((v - r).floor().max(0.0)) as usize;
    let hi = |v: f64, n: usize| ((v + r).ceil() as usize).min(n - 1);
    for z in lo(c[2])..=hi(c[2], dims.nz) {
        for y in lo(c[1])..=hi(c[1], dims.ny) {
            for x in lo(c[0])..=hi(c[0], dims.nx) {
                let d2 = (x as f64 + 0.5 - c[0]).powi(2)
                    + (y as f64 + 0.5 - c[1]).powi(2)
                    + (z as f64 + 0.5 - c[2]).powi(2);
                if d2 <= r * r {
                    out.push(dims.index(x, y, z));
                }
            }
        }
    }
}
