//! Dense 3D volumes and masks plus the primitives every method builds on:
//! separable Gaussian filtering, cube dilation, inversion and file I/O.
//!
//! Samples are stored x-fastest: linear index `x + nx * (y + ny * z)`.

mod conv;
mod io;
mod morph;

pub use conv::{gaussian_blur, gaussian_derivative, Kernel};
pub use io::{header_path, read_mask, read_volume, write_mask, write_volume, VolumeHeader};
pub use morph::dilate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel counts along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Dims::new(n, n, n)
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coord(&self, idx: usize) -> VoxelCoord {
        let x = idx % self.nx;
        let r = idx / self.nx;
        VoxelCoord {
            x,
            y: r % self.ny,
            z: r / self.ny,
        }
    }

    #[inline]
    pub fn contains(&self, x: isize, y: isize, z: isize) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.nx
            && (y as usize) < self.ny
            && (z as usize) < self.nz
    }

    pub fn ensure_same(&self, other: &Dims, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: dims {:?} vs {:?}",
                self.as_array(),
                other.as_array()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelCoord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        VoxelCoord { x, y, z }
    }
}

/// Dense scalar field: grayvalues or filter responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f32>,
    value_range: Option<(f32, f32)>,
}

impl Volume {
    /// Wraps `data`, checking its length and that every sample is finite.
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("volume dims must be positive".into()));
        }
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims.as_array()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Compute(format!("non-finite sample at index {i}")));
        }
        Ok(Volume {
            dims,
            data,
            value_range: None,
        })
    }

    /// Internal constructor for outputs of finite arithmetic on finite inputs.
    pub(crate) fn from_raw(dims: Dims, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Volume {
            dims,
            data,
            value_range: None,
        }
    }

    pub fn filled(dims: Dims, value: f32) -> Self {
        Volume::from_raw(dims, vec![value; dims.len()])
    }

    pub fn zeros(dims: Dims) -> Self {
        Volume::filled(dims, 0.0)
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume::from_raw(dims, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access to the samples. Callers must keep them finite.
    pub fn data_mut(&mut self) -> &mut [f32] {
        self.value_range = None;
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    /// Optional (min, max) metadata, e.g. the nominal range of an 8-bit scan.
    pub fn value_range(&self) -> Option<(f32, f32)> {
        self.value_range
    }

    pub fn with_value_range(mut self, range: Option<(f32, f32)>) -> Self {
        self.value_range = range;
        self
    }

    /// Actual minimum and maximum of the samples.
    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> Volume {
        Volume::from_raw(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }
}

/// `max - v` at every voxel, where `max` is the volume maximum.
///
/// Turns dark cracks into bright ridges for methods that look for maxima.
pub fn invert(vol: &Volume) -> Volume {
    let (_, max) = vol.min_max();
    let mut out = vol.map(|v| max - v);
    out.value_range = Some(out.min_max());
    out
}

/// Zero mean and unit population standard deviation; a constant volume
/// maps to zeros.
pub fn standardize(vol: &Volume) -> Volume {
    let n = vol.len() as f64;
    let mean = vol.mean();
    let var = vol
        .data()
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Volume::zeros(vol.dims());
    }
    vol.map(|v| ((v as f64 - mean) / sd) as f32)
}

/// Mirror-padded copy in f64 with `pad` extra voxels on every side.
pub(crate) fn pad_mirror(vol: &Volume, pad: usize) -> (Vec<f64>, [usize; 3]) {
    let [nx, ny, nz] = vol.dims().as_array();
    let p = [nx + 2 * pad, ny + 2 * pad, nz + 2 * pad];
    let data = vol.data();
    let mut out = Vec::with_capacity(p[0] * p[1] * p[2]);
    for z in 0..p[2] {
        let sz = conv::mirror(z as isize - pad as isize, nz);
        for y in 0..p[1] {
            let sy = conv::mirror(y as isize - pad as isize, ny);
            let row = &data[nx * (sy + ny * sz)..][..nx];
            for x in 0..p[0] {
                out.push(row[conv::mirror(x as isize - pad as isize, nx)] as f64);
            }
        }
    }
    (out, p)
}

/// Dense boolean field stored as packed bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    dims: Dims,
    words: Vec<u64>,
}

impl BinaryMask {
    pub fn empty(dims: Dims) -> Self {
        BinaryMask {
            dims,
            words: vec![0; dims.len().div_ceil(64)],
        }
    }

    pub fn full(dims: Dims) -> Self {
        let mut m = BinaryMask::empty(dims);
        for i in 0..dims.len() {
            m.set(i, true);
        }
        m
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut m = BinaryMask::empty(dims);
        let mut i = 0;
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    if f(x, y, z) {
                        m.set(i, true);
                    }
                    i += 1;
                }
            }
        }
        m
    }

    pub fn from_bools(dims: Dims, bits: &[bool]) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::Shape(format!(
                "{} bits for dims {:?}",
                bits.len(),
                dims.as_array()
            )));
        }
        let mut m = BinaryMask::empty(dims);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i, true);
            }
        }
        Ok(m)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        (self.words[idx >> 6] >> (idx & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: bool) {
        let w = &mut self.words[idx >> 6];
        if value {
            *w |= 1 << (idx & 63);
        } else {
            *w &= !(1 << (idx & 63));
        }
    }

    #[inline]
    pub fn get_xyz(&self, x: usize, y: usize, z: usize) -> bool {
        self.get(self.dims.index(x, y, z))
    }

    #[inline]
    pub fn set_xyz(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.set(i, value);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Linear indices of set voxels in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.len();
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
            .take_while(move |&i| i < n)
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.dims.ensure_same(&other.dims, "mask union")?;
        Ok(BinaryMask {
            dims: self.dims,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.dims.ensure_same(&other.dims, "mask intersection")?;
        Ok(BinaryMask {
            dims: self.dims,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims == other.dims
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i) as u8).collect()
    }

    pub fn to_volume(&self) -> Volume {
        Volume::from_raw(
            self.dims,
            (0..self.len())
                .map(|i| if self.get(i) { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_and_coord_agree() {
        let d = Dims::new(3, 4, 5);
        for i in 0..d.len() {
            let c = d.coord(i);
            assert_eq!(d.index(c.x, c.y, c.z), i);
        }
    }

    #[test]
    fn volume_rejects_bad_length_and_nan() {
        let d = Dims::cube(2);
        assert!(matches!(Volume::new(d, vec![0.0; 7]), Err(Error::Shape(_))));
        let mut v = vec![0.0; 8];
        v[3] = f32::NAN;
        assert!(Volume::new(d, v).is_err());
    }

    #[test]
    fn invert_constant_is_zero() {
        let v = Volume::filled(Dims::cube(4), 7.5);
        assert!(invert(&v).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invert_eight_bit_range() {
        let d = Dims::cube(4);
        let v = Volume::from_fn(d, |x, y, z| {
            10.0 + ((x + 4 * y + 16 * z) as f32) * 190.0 / 63.0
        });
        let inv = invert(&v);
        let (_, hi) = inv.min_max();
        assert!((hi - 190.0).abs() < 1e-4);
        // former minimum (voxel 0) carries the new maximum
        assert_eq!(inv.data()[0], hi);
    }

    #[test]
    fn invert_twice_keeps_argmax() {
        let d = Dims::cube(5);
        let v = Volume::from_fn(d, |x, y, z| ((x * 7 + y * 3 + z * 11) % 13) as f32);
        let twice = invert(&invert(&v));
        let argmax = |w: &Volume| {
            let (_, hi) = w.min_max();
            w.data()
                .iter()
                .enumerate()
                .filter(|(_, &x)| x == hi)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        assert_eq!(argmax(&v), argmax(&twice));
    }

    #[test]
    fn mask_bits() {
        let d = Dims::new(10, 9, 3);
        let mut m = BinaryMask::empty(d);
        m.set(0, true);
        m.set(64, true);
        m.set(d.len() - 1, true);
        assert_eq!(m.count_ones(), 3);
        assert_eq!(m.iter_ones().collect::<Vec<_>>(), vec![0, 64, d.len() - 1]);
        m.set(64, false);
        assert!(!m.get(64));
        assert_eq!(BinaryMask::full(d).count_ones(), d.len());
    }
}
