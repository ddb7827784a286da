//! Fractional Brownian surfaces by circulant embedding of an intrinsic
//! stationary covariance (Stein's construction). The increments are exact:
//! `E|z(p) - z(q)|^2` is proportional to `|p - q|^(2H)` on the whole grid.

use std::sync::{Arc, Mutex};

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbsField {
    /// Grid is `2^n x 2^n`.
    pub n: u32,
    pub hurst: f64,
    pub seed: u64,
    /// Heights, `p` fastest: `heights[p + side * q]`.
    pub heights: Vec<f64>,
}

impl FbsField {
    pub fn side(&self) -> usize {
        1 << self.n
    }

    pub fn at(&self, p: usize, q: usize) -> f64 {
        self.heights[p + self.side() * q]
    }

    /// A flat surface; handy for tests and calibration fixtures.
    pub fn constant(n: u32, value: f64) -> Self {
        let side = 1usize << n;
        FbsField {
            n,
            hurst: 1.0,
            seed: 0,
            heights: vec![value; side * side],
        }
    }
}

/// Piecewise covariance of the embedding and its constants `(c0, c2, beta)`.
struct Embedding {
    alpha: f64,
    radius: f64,
    beta: f64,
    c0: f64,
    c2: f64,
}

impl Embedding {
    fn new(alpha: f64) -> Self {
        if alpha <= 1.5 {
            Embedding {
                alpha,
                radius: 1.0,
                beta: 0.0,
                c0: 1.0 - alpha / 2.0,
                c2: alpha / 2.0,
            }
        } else {
            let radius = 2.0f64;
            let beta = alpha * (2.0 - alpha) / (3.0 * radius * (radius * radius - 1.0));
            let c2 = (alpha - beta * (radius - 1.0).powi(2) * (radius + 2.0)) / 2.0;
            let c0 = beta * (radius - 1.0).powi(3) + 1.0 - c2;
            Embedding {
                alpha,
                radius,
                beta,
                c0,
                c2,
            }
        }
    }

    fn rho(&self, r: f64) -> f64 {
        if r <= 1.0 {
            self.c0 - r.powf(self.alpha) + self.c2 * r * r
        } else if r <= self.radius {
            self.beta * (self.radius - r).powi(3) / r
        } else {
            0.0
        }
    }
}

/// Simulates a `2^n x 2^n` fractional Brownian surface with Hurst index `hurst`.
///
/// The grid is mapped onto a square of unit diameter so that every pair of
/// grid points lies inside the range where the embedded covariance is exact.
/// Memory grows with `(2.83 * 2^n)^2` complex samples for `hurst > 0.75`.
pub fn simulate_fbs(n: u32, hurst: f64, seed: u64) -> Result<FbsField> {
    if !(3..=12).contains(&n) {
        return Err(Error::param(format!(
            "fBS exponent n must be in 3..=12, got {n}"
        )));
    }
    if !(hurst > 0.0 && hurst <= 1.0) {
        return Err(Error::param(format!(
            "Hurst index must be in (0, 1], got {hurst}"
        )));
    }
    let side = 1usize << n;
    let emb = Embedding::new(2.0 * hurst);
    let h = 1.0 / (std::f64::consts::SQRT_2 * (side - 1) as f64);
    let lam = spectrum(n, hurst, &emb, h);
    let s = lam.len().isqrt();

    let mut rng = seed::rng(seed);
    let mut buf: Vec<Complex64> = lam
        .iter()
        .map(|&v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(v * re, v * im)
        })
        .collect();
    let mut planner = FftPlanner::new();
    // only the leading side x side corner is read
    fft2(&mut buf, s, side, &mut planner);

    let origin = buf[0].re;
    let a: f64 = StandardNormal.sample(&mut rng);
    let b: f64 = StandardNormal.sample(&mut rng);
    let corr = (2.0 * emb.c2).sqrt();
    let mut heights = Vec::with_capacity(side * side);
    for q in 0..side {
        for p in 0..side {
            let (tp, tq) = (p as f64 * h, q as f64 * h);
            heights.push(buf[p + s * q].re - origin + a * tp * b * tq * corr);
        }
    }
    Ok(FbsField {
        n,
        hurst,
        seed,
        heights,
    })
}

/// Square roots of the circulant eigenvalues, `s x s` row-major. The last
/// `(n, hurst)` pair is kept since realizations usually come in batches.
fn spectrum(n: u32, hurst: f64, emb: &Embedding, h: f64) -> Arc<Vec<f64>> {
    static LAST: Mutex<Option<(u32, u64, Arc<Vec<f64>>)>> = Mutex::new(None);
    let mut last = LAST.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((ln, lh, lam)) = last.as_ref() {
        if *ln == n && *lh == hurst.to_bits() {
            return Arc::clone(lam);
        }
    }
    let l = (emb.radius / h).ceil() as usize + 1;
    // any period of at least twice the support embeds; round up to a fast FFT size
    let s = fast_fft_len(2 * (l - 1));

    // first row of the block-circulant covariance
    let mut table = vec![0.0f64; l * l];
    for j in 0..l {
        for i in 0..=j {
            let v = emb.rho(h * ((i * i + j * j) as f64).sqrt());
            table[i + l * j] = v;
            table[j + l * i] = v;
        }
    }
    let fold = |i: usize| i.min(s - i);
    let mut buf = vec![Complex64::new(0.0, 0.0); s * s];
    for (q, row) in buf.chunks_exact_mut(s).enumerate() {
        let j = fold(q);
        if j >= l {
            continue;
        }
        for (p, c) in row.iter_mut().enumerate() {
            let i = fold(p);
            if i < l {
                c.re = table[i + l * j];
            }
        }
    }
    fft2(&mut buf, s, s, &mut FftPlanner::new());
    let norm = (s * s) as f64;
    // tiny negative eigenvalues are round-off
    let lam = Arc::new(buf.iter().map(|c| (c.re / norm).max(0.0).sqrt()).collect::<Vec<_>>());
    *last = Some((n, hurst.to_bits(), Arc::clone(&lam)));
    lam
}

/// Smallest integer `>= n` with no prime factor above 5.
fn fast_fft_len(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .unwrap()
}

/// In-place forward 2D FFT of a square `s x s` row-major buffer. Only the
/// first `keep` columns are completed; later columns hold row transforms.
fn fft2(buf: &mut [Complex64], s: usize, keep: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(s);
    for row in buf.chunks_exact_mut(s) {
        fft.process(row);
    }
    // columns in blocks so that gathers read whole cache lines
    const B: usize = 16;
    let mut cols = vec![Complex64::new(0.0, 0.0); B * s];
    for c0 in (0..keep).step_by(B) {
        let w = B.min(keep - c0);
        for r in 0..s {
            for b in 0..w {
                cols[r + s * b] = buf[c0 + b + s * r];
            }
        }
        fft.process(&mut cols[..w * s]);
        for r in 0..s {
            for b in 0..w {
                buf[c0 + b + s * r] = cols[r + s * b];
            }
        }
    }
}

/// Mean squared increment along both grid axes at integer `lag`.
pub fn structure_function(field: &FbsField, lag: usize) -> f64 {
    let side = field.side();
    let mut acc = 0.0;
    let mut count = 0usize;
    for q in 0..side {
        for p in 0..side {
            let v = field.at(p, q);
            if p + lag < side {
                acc += (field.at(p + lag, q) - v).powi(2);
                count += 1;
            }
            if q + lag < side {
                acc += (field.at(p, q + lag) - v).powi(2);
                count += 1;
            }
        }
    }
    acc / count as f64
}
