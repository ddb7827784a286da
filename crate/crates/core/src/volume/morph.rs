use super::{BinaryMask, Dims};
use crate::error::{Error, Result};

/// Binary dilation with a cube of side `width` (odd). `width == 1` is the identity.
///
/// The cube is separable, so this runs three 1D running-OR passes.
pub fn dilate(mask: &BinaryMask, width: usize) -> Result<BinaryMask> {
    if width == 0 || width % 2 == 0 {
        return Err(Error::param(format!(
            "dilation width must be odd and positive, got {width}"
        )));
    }
    if width == 1 {
        return Ok(mask.clone());
    }
    let dims = mask.dims();
    let r = width / 2;
    let mut buf = mask.to_bytes();
    for axis in 0..3 {
        buf = line_or(&buf, dims, r, axis);
    }
    let mut out = BinaryMask::empty(dims);
    for (i, &b) in buf.iter().enumerate() {
        if b != 0 {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// OR over a window of radius `r` along one axis.
fn line_or(src: &[u8], dims: Dims, r: usize, axis: usize) -> Vec<u8> {
    let [nx, ny, nz] = dims.as_array();
    let (n, stride) = match axis {
        0 => (nx, 1),
        1 => (ny, nx),
        _ => (nz, nx * ny),
    };
    let starts: Vec<usize> = match axis {
        0 => (0..ny * nz).map(|l| l * nx).collect(),
        1 => (0..nz)
            .flat_map(|z| (0..nx).map(move |x| x + z * nx * ny))
            .collect(),
        _ => (0..nx * ny).collect(),
    };
    let mut out = vec![0u8; src.len()];
    let mut next_set = vec![usize::MAX; n];
    for start in starts {
        let mut nxt = usize::MAX;
        for i in (0..n).rev() {
            if src[start + i * stride] != 0 {
                nxt = i;
            }
            next_set[i] = nxt;
        }
        let mut last: Option<usize> = None;
        for i in 0..n {
            if src[start + i * stride] != 0 {
                last = Some(i);
            }
            let back = last.is_some_and(|l| i - l <= r);
            let fwd = next_set[i] != usize::MAX && next_set[i] - i <= r;
            if back || fwd {
                out[start + i * stride] = 1;
            }
        }
    }
    out
}
