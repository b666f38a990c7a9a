//! Complex gate matrices for the supported gate kinds.

use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::program::GateKind;

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn expi(phi: f64) -> Complex64 {
    Complex64::new(libm::cos(phi), libm::sin(phi))
}

/// 2x2 unitary for a single-qubit kind; `None` for multi-qubit or
/// non-unitary kinds.
pub fn single_qubit_matrix(kind: GateKind, params: &[f64]) -> Option<Mat2> {
    Some(match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::H => {
            let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        GateKind::Sx => {
            let a = Complex64::new(0.5, 0.5);
            let b = Complex64::new(0.5, -0.5);
            [[a, b], [b, a]]
        }
        GateKind::Rz => {
            let l = params[0];
            [[expi(-l / 2.0), ZERO], [ZERO, expi(l / 2.0)]]
        }
        GateKind::U => {
            let (theta, phi, lambda) = (params[0], params[1], params[2]);
            let (c, s) = (libm::cos(theta / 2.0), libm::sin(theta / 2.0));
            [[Complex64::new(c, 0.0), -expi(lambda) * s], [expi(phi) * s, expi(phi + lambda) * c]]
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_unitary(m: &Mat2) -> bool {
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - Complex64::new(want, 0.0)).norm() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn all_single_qubit_matrices_are_unitary() {
        for kind in [GateKind::X, GateKind::H, GateKind::Sx, GateKind::Rz, GateKind::U] {
            let m = single_qubit_matrix(kind, &[0.3, -1.1, 2.4]).unwrap();
            assert!(is_unitary(&m), "{kind}");
        }
        assert!(single_qubit_matrix(GateKind::Cx, &[]).is_none());
    }

    #[test]
    fn sx_squared_is_x() {
        let s = single_qubit_matrix(GateKind::Sx, &[]).unwrap();
        let x = single_qubit_matrix(GateKind::X, &[]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: Complex64 = (0..2).map(|k| s[i][k] * s[k][j]).sum();
                assert!((v - x[i][j]).norm() < 1e-15);
            }
        }
    }
}
