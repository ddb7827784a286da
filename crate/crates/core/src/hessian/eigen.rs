//! Closed-form eigen-decomposition of symmetric 3x3 matrices.
//!
//! Matrices are passed as their six unique entries
//! `[a11, a22, a33, a12, a13, a23]`.

use std::cmp::Ordering;
use std::f64::consts::PI;

/// Eigenvalues ordered by absolute value, ties by signed value.
pub fn eigenvalues_sym3(a: [f64; 6]) -> [f64; 3] {
    let mut ev = raw_eigenvalues(a);
    sort_by_magnitude(&mut ev);
    ev
}

pub(crate) fn sort_by_magnitude(ev: &mut [f64; 3]) {
    ev.sort_by(|x, y| {
        x.abs()
            .partial_cmp(&y.abs())
            .unwrap_or(Ordering::Equal)
            .then(x.partial_cmp(y).unwrap_or(Ordering::Equal))
    });
}

/// Trigonometric solution of the depressed characteristic cubic.
fn raw_eigenvalues(a: [f64; 6]) -> [f64; 3] {
    let [a11, a22, a33, a12, a13, a23] = a;
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        return [a11, a22, a33];
    }
    let q = (a11 + a22 + a33) / 3.0;
    let (b11, b22, b33) = (a11 - q, a22 - q, a33 - q);
    let p2 = b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1;
    if p2 == 0.0 {
        return [q; 3];
    }
    let p = (p2 / 6.0).sqrt();
    // det((A - qI) / p) / 2
    let det = b11 * (b22 * b33 - a23 * a23) - a12 * (a12 * b33 - a23 * a13)
        + a13 * (a12 * a23 - b22 * a13);
    let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// Unit eigenvector for the eigenvalue `lambda`, or zero when the
/// eigenspace has dimension three (no preferred direction).
///
/// A simple eigenvalue leaves `A - lambda I` with rank two; its null space
/// is the largest cross product of two rows. A double eigenvalue leaves rank
/// one and any vector orthogonal to the remaining row is returned.
pub fn eigenvector_sym3(a: [f64; 6], lambda: f64) -> [f64; 3] {
    let [a11, a22, a33, a12, a13, a23] = a;
    let rows = [
        [a11 - lambda, a12, a13],
        [a12, a22 - lambda, a23],
        [a13, a23, a33 - lambda],
    ];
    let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return [0.0; 3];
    }
    let crosses = [
        cross(rows[0], rows[1]),
        cross(rows[0], rows[2]),
        cross(rows[1], rows[2]),
    ];
    let best = crosses
        .iter()
        .copied()
        .max_by(|u, v| norm2(*u).partial_cmp(&norm2(*v)).unwrap_or(Ordering::Equal))
        .unwrap();
    if norm2(best) > 1e-20 * scale.powi(4) {
        return normalize(best);
    }
    let row = rows
        .iter()
        .copied()
        .max_by(|u, v| norm2(*u).partial_cmp(&norm2(*v)).unwrap_or(Ordering::Equal))
        .unwrap();
    // any axis not parallel to `row`
    let axis = if row[0].abs() <= row[1].abs() && row[0].abs() <= row[2].abs() {
        [1.0, 0.0, 0.0]
    } else if row[1].abs() <= row[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    normalize(cross(row, axis))
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn norm2(u: [f64; 3]) -> f64 {
    u[0] * u[0] + u[1] * u[1] + u[2] * u[2]
}

fn normalize(u: [f64; 3]) -> [f64; 3] {
    let n = norm2(u).sqrt();
    [u[0] / n, u[1] / n, u[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal() {
        assert_eq!(
            eigenvalues_sym3([1.0, -2.0, 3.0, 0.0, 0.0, 0.0]),
            [1.0, -2.0, 3.0]
        );
        assert_eq!(eigenvalues_sym3([0.0; 6]), [0.0; 3]);
    }

    #[test]
    fn ties_broken_by_sign() {
        let ev = eigenvalues_sym3([2.0, -2.0, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(ev, [0.5, -2.0, 2.0]);
    }

    #[test]
    fn eigenvector_of_plate_normal() {
        let v = eigenvector_sym3([0.1, 0.0, 5.0, 0.0, 0.0, 0.0], 5.0);
        assert!((v[2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_double_root() {
        // eigenvalue 1 has a two-dimensional eigenspace orthogonal to z
        let a = [1.0, 1.0, 4.0, 0.0, 0.0, 0.0];
        let v = eigenvector_sym3(a, 1.0);
        assert!(v[2].abs() < 1e-12);
        assert!((norm2(v) - 1.0).abs() < 1e-12);
        assert_eq!(
            eigenvector_sym3([2.0, 2.0, 2.0, 0.0, 0.0, 0.0], 2.0),
            [0.0; 3]
        );
    }
}
