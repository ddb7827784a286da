use crackseg::hessian::{eigenvalues3, eigenvector_sym3, eigenvalues_sym3, feature_bank, hessian, FeatureBankConfig, FeatureKind};
use crackseg::{Dims, Volume};
use proptest::prelude::*;

fn apply(a: [f64; 6], v: [f64; 3]) -> [f64; 3] {
    let [a11, a22, a33, a12, a13, a23] = a;
    [
        a11 * v[0] + a12 * v[1] + a13 * v[2],
        a12 * v[0] + a22 * v[1] + a23 * v[2],
        a13 * v[0] + a23 * v[1] + a33 * v[2],
    ]
}

fn frobenius(a: [f64; 6]) -> f64 {
    let [a11, a22, a33, a12, a13, a23] = a;
    (a11 * a11 + a22 * a22 + a33 * a33 + 2.0 * (a12 * a12 + a13 * a13 + a23 * a23)).sqrt()
}

/// Rotates 90 degrees about z: (x, y, z) -> (ny - 1 - y, x, z).
fn rot_z(v: &Volume) -> Volume {
    let d = v.dims();
    Volume::from_fn(Dims::new(d.ny, d.nx, d.nz), |x, y, z| v.get(y, d.ny - 1 - x, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigenpair_residuals(a in prop::array::uniform6(-10.0f64..10.0)) {
        let norm = frobenius(a);
        for l in eigenvalues_sym3(a) {
            let v = eigenvector_sym3(a, l);
            let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if vn == 0.0 {
                continue;
            }
            let hv = apply(a, v);
            let r = ((hv[0] - l * v[0]).powi(2) + (hv[1] - l * v[1]).powi(2) + (hv[2] - l * v[2]).powi(2)).sqrt();
            prop_assert!(r <= 1e-5 * norm.max(1e-12), "residual {} for {:?}", r, a);
        }
    }
}

#[test]
fn eigenvalues_follow_axis_rotation() {
    let d = Dims::new(14, 12, 10);
    let v = Volume::from_fn(d, |x, y, z| {
        let (x, y, z) = (x as f32, y as f32, z as f32);
        (0.3 * x).sin() * (0.2 * y + 0.1 * z).cos() + 0.01 * x * y
    });
    let e = eigenvalues3(&hessian(&v, 1.0).unwrap(), false);
    let r = eigenvalues3(&hessian(&rot_z(&v), 1.0).unwrap(), false);
    let mut worst = 0.0f32;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                // (x, y) in the original lands at (ny - 1 - y, x) after rotation
                let (rx, ry) = (d.ny - 1 - y, x);
                for (a, b) in [(&e.l1, &r.l1), (&e.l2, &r.l2), (&e.l3, &r.l3)] {
                    worst = worst.max((a.get(x, y, z) - b.get(rx, ry, z)).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-5, "max eigenvalue mismatch {worst}");
}

#[test]
fn gradient_magnitude_is_non_negative() {
    let d = Dims::cube(16);
    let v = Volume::from_fn(d, |x, y, z| ((x * 7 + y * 13 + z * 3) % 11) as f32 - 5.0);
    let bank = FeatureBankConfig::table1();
    let feats = feature_bank(&v, &bank).unwrap();
    let mut seen = 0;
    for (k, f) in bank.kinds().iter().zip(&feats) {
        if matches!(k, FeatureKind::GradientMagnitude(_)) {
            seen += 1;
            assert!(f.data().iter().all(|&g| g >= 0.0));
        }
    }
    assert!(seen > 0);
}
