use rayon::prelude::*;

use super::{Dims, Volume};
use crate::error::{Error, Result};

/// Odd-length 1D convolution kernel; `taps[radius]` is the center tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    taps: Vec<f32>,
}

impl Kernel {
    pub fn new(taps: Vec<f32>) -> Self {
        assert!(taps.len() % 2 == 1, "kernel length must be odd");
        Kernel { taps }
    }

    pub fn identity() -> Self {
        Kernel { taps: vec![1.0] }
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn taps(&self) -> &[f32] {
        &self.taps
    }

    fn is_identity(&self) -> bool {
        self.taps.len() == 1 && self.taps[0] == 1.0
    }

    /// Sampled Gaussian derivative of the given order, truncated at `ceil(4 sigma)`.
    ///
    /// Order 0 sums to one. Order 1 differentiates a unit ramp exactly and
    /// order 2 is zero-mean and returns exactly 2 on `x^2`. `sigma == 0`
    /// selects plain central differences.
    pub fn gaussian(sigma: f64, order: u8) -> Result<Self> {
        check_sigma(sigma)?;
        if sigma == 0.0 {
            return Ok(match order {
                0 => Kernel::identity(),
                1 => Kernel::new(vec![0.5, 0.0, -0.5]),
                2 => Kernel::new(vec![1.0, -2.0, 1.0]),
                _ => return Err(Error::param("derivative order must be 0, 1 or 2")),
            });
        }
        let r = (4.0 * sigma).ceil() as i64;
        let s2 = sigma * sigma;
        let xs: Vec<f64> = (-r..=r).map(|t| t as f64).collect();
        let g: Vec<f64> = xs.iter().map(|&t| (-t * t / (2.0 * s2)).exp()).collect();
        let taps: Vec<f64> = match order {
            0 => {
                let s: f64 = g.iter().sum();
                g.iter().map(|v| v / s).collect()
            }
            1 => {
                let d: Vec<f64> = xs.iter().zip(&g).map(|(&t, &v)| -t / s2 * v).collect();
                // out = sum_t f(x - t) k(t); on f = x this yields -sum t k(t)
                let m: f64 = xs.iter().zip(&d).map(|(&t, &v)| t * v).sum();
                d.iter().map(|v| -v / m).collect()
            }
            2 => {
                let mut d: Vec<f64> = xs
                    .iter()
                    .zip(&g)
                    .map(|(&t, &v)| (t * t / (s2 * s2) - 1.0 / s2) * v)
                    .collect();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                d.iter_mut().for_each(|v| *v -= mean);
                let m: f64 = xs.iter().zip(&d).map(|(&t, &v)| t * t * v).sum();
                d.iter().map(|v| 2.0 * v / m).collect()
            }
            _ => return Err(Error::param("derivative order must be 0, 1 or 2")),
        };
        Ok(Kernel::new(taps.into_iter().map(|v| v as f32).collect()))
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be finite, got {sigma}")));
    }
    if sigma != 0.0 && sigma < 0.5 {
        return Err(Error::param(format!(
            "sigma must be 0 or at least 0.5, got {sigma}"
        )));
    }
    Ok(())
}

/// Half-sample symmetric reflection: `... b a | a b c ... x y z | z y ...`.
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Gaussian smoothing with mirror borders. `sigma == 0` copies the input.
pub fn gaussian_blur(vol: &Volume, sigma: f64) -> Result<Volume> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(vol.clone());
    }
    let k = Kernel::gaussian(sigma, 0)?;
    Ok(convolve_separable(vol, &k, &k, &k))
}

/// Partial derivative of the Gaussian-smoothed volume; `orders` are the
/// derivative orders along x, y and z.
pub fn gaussian_derivative(vol: &Volume, sigma: f64, orders: [u8; 3]) -> Result<Volume> {
    let kx = Kernel::gaussian(sigma, orders[0])?;
    let ky = Kernel::gaussian(sigma, orders[1])?;
    let kz = Kernel::gaussian(sigma, orders[2])?;
    Ok(convolve_separable(vol, &kx, &ky, &kz))
}

/// Three 1D passes (x, then y, then z) with mirror borders.
pub(crate) fn convolve_separable(vol: &Volume, kx: &Kernel, ky: &Kernel, kz: &Kernel) -> Volume {
    let dims = vol.dims();
    let mut cur = pass_x(vol.data(), dims, kx);
    cur = pass_y(cur, dims, ky);
    cur = pass_z(cur, dims, kz);
    Volume::from_raw(dims, cur)
}

fn pass_x(src: &[f32], dims: Dims, k: &Kernel) -> Vec<f32> {
    if k.is_identity() {
        return src.to_vec();
    }
    let nx = dims.nx;
    let r = k.radius();
    let taps = k.taps();
    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(nx)
        .zip(src.par_chunks(nx))
        .for_each_init(
            || vec![0.0f32; nx + 2 * r],
            |buf, (orow, irow)| {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = irow[mirror(i as isize - r as isize, nx)];
                }
                for (x, o) in orow.iter_mut().enumerate() {
                    // out[x] = sum_j taps[j] * in[x + r - j]  =  buf[x + 2r - j]
                    let mut acc = 0.0f32;
                    for (j, &t) in taps.iter().enumerate() {
                        acc += t * buf[x + 2 * r - j];
                    }
                    *o = acc;
                }
            },
        );
    out
}

fn pass_y(src: Vec<f32>, dims: Dims, k: &Kernel) -> Vec<f32> {
    if k.is_identity() {
        return src;
    }
    let (nx, ny) = (dims.nx, dims.ny);
    let plane = nx * ny;
    let r = k.radius() as isize;
    let taps = k.taps();
    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(plane)
        .zip(src.par_chunks(plane))
        .for_each(|(oplane, iplane)| {
            for y in 0..ny {
                let orow = &mut oplane[y * nx..(y + 1) * nx];
                for (j, &t) in taps.iter().enumerate() {
                    let sy = mirror(y as isize + r - j as isize, ny);
                    let irow = &iplane[sy * nx..(sy + 1) * nx];
                    for (o, &v) in orow.iter_mut().zip(irow) {
                        *o += t * v;
                    }
                }
            }
        });
    out
}

fn pass_z(src: Vec<f32>, dims: Dims, k: &Kernel) -> Vec<f32> {
    if k.is_identity() {
        return src;
    }
    let plane = dims.nx * dims.ny;
    let nz = dims.nz;
    let r = k.radius() as isize;
    let taps = k.taps();
    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(plane)
        .enumerate()
        .for_each(|(z, oplane)| {
            for (j, &t) in taps.iter().enumerate() {
                let sz = mirror(z as isize + r - j as isize, nz);
                let iplane = &src[sz * plane..(sz + 1) * plane];
                for (o, &v) in oplane.iter_mut().zip(iplane) {
                    *o += t * v;
                }
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_reflects_half_sample() {
        let n = 4;
        let got: Vec<usize> = (-5..9).map(|i| mirror(i, n)).collect();
        assert_eq!(got, vec![3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
    }

    #[test]
    fn constant_volume_is_preserved() {
        let v = Volume::filled(Dims::new(9, 7, 5), 3.25);
        let b = gaussian_blur(&v, 1.3).unwrap();
        assert!(b.data().iter().all(|&x| (x - 3.25).abs() < 1e-5));
    }

    #[test]
    fn sigma_zero_is_identity() {
        let v = Volume::from_fn(Dims::cube(6), |x, y, z| (x * 31 + y * 7 + z) as f32 * 0.1);
        assert_eq!(gaussian_blur(&v, 0.0).unwrap(), v);
    }

    #[test]
    fn bad_sigma_rejected() {
        let v = Volume::zeros(Dims::cube(4));
        assert!(gaussian_blur(&v, f64::NAN).is_err());
        assert!(gaussian_blur(&v, 0.3).is_err());
        assert!(gaussian_blur(&v, -1.0).is_err());
    }

    #[test]
    fn derivative_kernels_are_exact_on_polynomials() {
        for &s in &[0.0, 0.5, 1.0, 2.5] {
            let d1 = Kernel::gaussian(s, 1).unwrap();
            let r = d1.radius() as i64;
            // f(x) = x evaluated at x = 10
            let v: f64 = (-r..=r)
                .map(|t| (10 - t) as f64 * d1.taps()[(t + r) as usize] as f64)
                .sum();
            assert!((v - 1.0).abs() < 1e-5, "sigma {s}: {v}");
            let d2 = Kernel::gaussian(s, 2).unwrap();
            let r = d2.radius() as i64;
            let v: f64 = (-r..=r)
                .map(|t| ((10 - t) as f64).powi(2) * d2.taps()[(t + r) as usize] as f64)
                .sum();
            assert!((v - 2.0).abs() < 1e-4, "sigma {s}: {v}");
        }
    }

    #[test]
    fn ramp_derivative_is_one_in_interior() {
        let d = Dims::new(24, 6, 6);
        let v = Volume::from_fn(d, |x, _, _| x as f32);
        let g = gaussian_derivative(&v, 1.5, [1, 0, 0]).unwrap();
        for x in 8..16 {
            assert!((g.get(x, 3, 3) - 1.0).abs() < 1e-4);
        }
    }
}
