//! Small dense helpers shared by synthesis and the trigger rule.

use nalgebra::DMatrix;

const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 10_000;
const HURWITZ_MARGIN: f64 = 1e-10;

/// Induced 2-norm (largest singular value) via power iteration on `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let n = gram.ncols();
    if n == 0 || gram.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    // Repeated squaring isolates the dominant eigenspace even when the top
    // two eigenvalues are close; the plain iteration below then polishes it.
    let mut accel = &gram / gram.norm();
    for _ in 0..64 {
        accel = &accel * &accel;
        let f = accel.norm();
        if f == 0.0 || !f.is_finite() {
            break;
        }
        accel /= f;
    }
    let start = (0..n)
        .max_by(|&i, &j| accel.column(i).norm().total_cmp(&accel.column(j).norm()))
        .unwrap_or(0);
    let mut v = if accel.column(start).norm() > 0.0 {
        accel.column(start).normalize()
    } else {
        gram.column(start).normalize()
    };
    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_MAX {
        let w = &gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= POWER_ITER_TOL * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_symmetric(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest real part over the spectrum of a general square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral abscissa below `-1e-10·max(1, ‖A‖_F)`; repeated zero
/// eigenvalues come back from the QR iteration as tiny negatives.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < -HURWITZ_MARGIN * a.norm().max(1.0)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
