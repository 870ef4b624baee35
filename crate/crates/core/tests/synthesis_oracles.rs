//! Riccati, Lyapunov and minimum-IET checks against independent routes.

use etlqr::linalg::{is_hurwitz, spectral_abscissa};
use etlqr::synthesis::{
    care_residual, lqr_gain, lyapunov_residual, min_iet, solve_care, solve_lyapunov,
    CARE_RESIDUAL_TOL, LYAPUNOV_RESIDUAL_TOL,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `AᵀM + MA = −N`, one scalar equation per entry `(i, j)`:
/// `Σₖ A[k,i]·M[k,j] + Σₖ M[i,k]·A[k,j] = −N[i,j]`.
fn lyapunov_elementwise(a: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = a.nrows();
    let idx = |i: usize, j: usize| i * dim + j;
    let mut sys = vec![vec![0.0; dim * dim]; dim * dim];
    let mut rhs = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let eq = idx(i, j);
            for k in 0..dim {
                sys[eq][idx(k, j)] += a[(k, i)];
                sys[eq][idx(i, k)] += a[(k, j)];
            }
            rhs[eq] = -n[(i, j)];
        }
    }
    let sol = gauss_solve(sys, rhs);
    DMatrix::from_fn(dim, dim, |i, j| sol[idx(i, j)])
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
}

fn random_hurwitz(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let raw = random_matrix(rng, 4, 4);
    let shift = spectral_abscissa(&raw) + rng.random_range(0.1..3.0);
    raw - DMatrix::identity(4, 4) * shift
}

fn random_spd(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let l = random_matrix(rng, 4, 4);
    &l * l.transpose() + DMatrix::identity(4, 4) * 0.1
}

#[test]
fn lyapunov_agrees_with_elementwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let a = random_hurwitz(&mut rng);
        let n = random_spd(&mut rng);
        let m = solve_lyapunov(&a, &n).unwrap();
        let oracle = lyapunov_elementwise(&a, &n);
        let diff = (&m - &oracle).norm();
        assert!(diff <= 1e-9 * oracle.norm().max(1.0), "|ΔM| = {diff:e}");
        assert!(lyapunov_residual(&a, &m, &n) <= LYAPUNOV_RESIDUAL_TOL * n.norm());
        assert!(m.clone().cholesky().is_some(), "M not positive definite");
        assert_eq!(m, m.transpose());
    }
}

#[test]
fn care_on_random_stabilizable_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut solved = 0;
    while solved < 50 {
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 1);
        let q = {
            let c = random_matrix(&mut rng, 2, 4);
            c.transpose() * c + DMatrix::identity(4, 4) * 0.01
        };
        let r = DMatrix::from_element(1, 1, rng.random_range(0.1..10.0));
        let p = solve_care(&a, &b, &q, &r)
            .unwrap_or_else(|e| panic!("CARE failed: {e}\nA = {a}B = {b}"));
        let k = lqr_gain(&p, &b, &r).unwrap();
        let residual = care_residual(&a, &b, &q, &r, &p);
        assert!(
            residual <= CARE_RESIDUAL_TOL * (1.0 + p.norm()),
            "residual {residual:e}"
        );
        assert!(is_hurwitz(&(&a - &b * &k)));
        assert!(p.clone().cholesky().is_some());

        // The same P must solve the Lyapunov equation of its own closed loop.
        let acl = &a - &b * &k;
        let rhs = &q + k.transpose() * &r * &k;
        let oracle = lyapunov_elementwise(&acl, &rhs);
        assert!((&p - &oracle).norm() <= 1e-7 * (1.0 + p.norm()));
        solved += 1;
    }
}

#[test]
fn scalar_care_against_closed_form() {
    // p = (a r + sqrt(a² r² + b² q r)) / b²
    for &(a, b, q, r) in &[
        (0.0f64, 1.0f64, 1.0f64, 1.0f64),
        (1.0, 2.0, 3.0, 0.5),
        (-2.0, 0.3, 10.0, 4.0),
    ] {
        let expected = (a * r + (a * a * r * r + b * b * q * r).sqrt()) / (b * b);
        let p = solve_care(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, b),
            &DMatrix::from_element(1, 1, q),
            &DMatrix::from_element(1, 1, r),
        )
        .unwrap();
        assert!(
            (p[(0, 0)] - expected).abs() <= 1e-10 * expected,
            "{a} {b} {q} {r}"
        );
    }
}

/// `τ` by integrating `φ̇ = −σ(1+φ)² − ε` from `Z̄` down to 0 with RK4 in `φ`
/// (time as a function of `φ`: `dt/dφ = −1/(σ(1+φ)² + ε)`).
fn tau_by_quadrature(sigma: f64, eps: f64, z_bar: f64) -> f64 {
    let steps = 20_000;
    let h = z_bar / steps as f64;
    let g = |phi: f64| 1.0 / (sigma * (1.0 + phi).powi(2) + eps);
    (0..steps)
        .map(|i| {
            let a = i as f64 * h;
            h / 6.0 * (g(a) + 4.0 * g(a + 0.5 * h) + g(a + h))
        })
        .sum()
}

#[test]
fn tau_matches_quadrature() {
    for &(s, e, z) in &[
        (1.0, 1.0, 1.0),
        (536.187, 1.0, 1.0),
        (1e-3, 0.5, 3.0),
        (20.0, 4.0, 0.25),
    ] {
        let tau = min_iet(s, e, z);
        let q = tau_by_quadrature(s, e, z);
        assert!(
            (tau - q).abs() <= 1e-10 * q,
            "σ={s} ε={e} Z̄={z}: {tau} vs {q}"
        );
    }
}

#[test]
fn tau_monotone_on_grid() {
    let grid: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 19.0))
        .collect();
    for z_bar in [0.5, 1.0, 4.0] {
        for &eps in &grid {
            for pair in grid.windows(2) {
                assert!(min_iet(pair[1], eps, z_bar) < min_iet(pair[0], eps, z_bar));
            }
        }
        for &sigma in &grid {
            for pair in grid.windows(2) {
                assert!(min_iet(sigma, pair[1], z_bar) < min_iet(sigma, pair[0], z_bar));
            }
        }
    }
}

#[test]
fn tau_small_sigma_limit() {
    for &(e, z) in &[(1.0, 1.0), (2.0, 0.5), (0.1, 3.0)] {
        let tau = min_iet(1e-12, e, z);
        assert!((tau - z / e).abs() <= 1e-5 * z / e);
    }
}
