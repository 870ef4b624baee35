//! LQR synthesis and the certified minimum inter-event time.
//!
//! The Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved with the
//! Kleinman–Newton iteration; every Newton step and the closed-loop
//! Lyapunov certificate `AclᵀM + M·Acl = −N` go through the same
//! Kronecker-vectorized dense solve.

use nalgebra::{DMatrix, DVector, Matrix4, RowVector4, Vector4};
use thiserror::Error;

use crate::linalg::{
    is_hurwitz, min_eigenvalue_symmetric, spectral_abscissa, spectral_norm, symmetrize,
};
use crate::model::PlantMatrices;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_STEP_TOL: f64 = 1e-13;
/// Acceptance threshold for the relative CARE residual `‖res‖_F / (1 + ‖P‖_F)`.
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;
/// Acceptance threshold for the relative Lyapunov residual `‖res‖_F / ‖N‖_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("input weight R must be positive definite")]
    InputWeightNotPositive,
    #[error("state weight Q must be symmetric positive semidefinite")]
    StateWeightNotPsd,
    #[error("Lyapunov operator is singular (eigenvalues λi + λj = 0 for some pair)")]
    SingularLyapunov,
    #[error("closed-loop matrix is not Hurwitz (spectral abscissa {0:.3e})")]
    NotHurwitz(f64),
    #[error("{what} is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { what: &'static str, min_eig: f64 },
    #[error("no stabilizing initial gain: (A, B) appears uncontrollable")]
    NoStabilizingGain,
    #[error(
        "Riccati iteration did not converge after {iterations} steps (residual {residual:.3e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
}

/// Quadratic cost weights for the single-input lateral problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix4<f64>,
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::new(30.0, 10.0, 1.0, 1.0)),
            r: 1000.0,
        }
    }
}

/// Design parameters of the clock-variable trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtmDesign {
    /// Clock reset value `Z̄ > 0`.
    pub z_bar: f64,
    /// Drain-rate floor `ε > 0`.
    pub epsilon: f64,
    /// Left weight `θl ≥ 1`.
    pub theta_l: f64,
    /// Right weight `0 < θr ≤ 1`.
    pub theta_r: f64,
}

impl Default for EtmDesign {
    fn default() -> Self {
        Self {
            z_bar: 1.0,
            epsilon: 1.0,
            theta_l: 8.0,
            theta_r: 0.1,
        }
    }
}

impl EtmDesign {
    /// The mechanism without the two extra weights (`θl = θr = 1`).
    pub fn original(z_bar: f64, epsilon: f64) -> Self {
        Self {
            z_bar,
            epsilon,
            theta_l: 1.0,
            theta_r: 1.0,
        }
    }

    /// Returns the offending field name on failure.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.z_bar.is_finite() && self.z_bar > 0.0) {
            return Err("z_bar");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err("epsilon");
        }
        if !(self.theta_l.is_finite() && self.theta_l >= 1.0) {
            return Err("theta_l");
        }
        if !(self.theta_r > 0.0 && self.theta_r <= 1.0) {
            return Err("theta_r");
        }
        Ok(())
    }
}

fn check_square(name: &str, a: &DMatrix<f64>) -> Result<(), SynthesisError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(SynthesisError::Dimension(format!(
            "{name} is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Solves `FᵀX + XF = C` through the `n²×n²` Kronecker system
/// `(I ⊗ Fᵀ + Fᵀ ⊗ I) vec(X) = vec(C)` with a few rounds of iterative refinement.
fn solve_vectorized(f: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, SynthesisError> {
    let n = f.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let lu = op.clone().lu();
    let rhs = DVector::from_column_slice(c.as_slice());
    let mut x = lu.solve(&rhs).ok_or(SynthesisError::SingularLyapunov)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SynthesisError::SingularLyapunov);
    }
    for _ in 0..REFINEMENT_STEPS {
        let r = &rhs - &op * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// `‖AclᵀM + M·Acl + N‖_F`.
pub fn lyapunov_residual(acl: &DMatrix<f64>, m: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    (acl.transpose() * m + m * acl + n).norm()
}

/// Solves `AclᵀM + M·Acl = −N` for `M ≻ 0`, given a Hurwitz `Acl` and `N ≻ 0`.
pub fn solve_lyapunov(
    acl: &DMatrix<f64>,
    n: &DMatrix<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    check_square("Acl", acl)?;
    check_square("N", n)?;
    if acl.nrows() != n.nrows() {
        return Err(SynthesisError::Dimension("Acl and N differ in size".into()));
    }
    if !is_hurwitz(acl) {
        return Err(SynthesisError::NotHurwitz(spectral_abscissa(acl)));
    }
    let min_n = min_eigenvalue_symmetric(&symmetrize(n));
    if min_n <= 0.0 {
        return Err(SynthesisError::NotPositiveDefinite {
            what: "N",
            min_eig: min_n,
        });
    }
    let m = symmetrize(&solve_vectorized(acl, &(-n))?);
    let min_m = min_eigenvalue_symmetric(&m);
    if min_m <= 0.0 {
        return Err(SynthesisError::NotPositiveDefinite {
            what: "M",
            min_eig: min_m,
        });
    }
    Ok(m)
}

/// `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = r
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Initial stabilizing gain: zero if `A` is already Hurwitz, otherwise
/// Bass's shifted-Gramian gain `K₀ = BᵀX⁻¹` with
/// `(A + βI)X + X(A + βI)ᵀ = 2BBᵀ`, `β > ‖A‖`.
fn initial_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, SynthesisError> {
    let n = a.nrows();
    if is_hurwitz(a) {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    let shift = a.norm() + 1.0;
    let shifted = a + DMatrix::<f64>::identity(n, n) * shift;
    let x = symmetrize(&solve_vectorized(
        &shifted.transpose(),
        &(b * b.transpose() * 2.0),
    )?);
    let chol = x.cholesky().ok_or(SynthesisError::NoStabilizingGain)?;
    let k0 = b.transpose() * chol.inverse();
    if !is_hurwitz(&(a - b * &k0)) {
        return Err(SynthesisError::NoStabilizingGain);
    }
    Ok(k0)
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    check_square("A", a)?;
    check_square("Q", q)?;
    check_square("R", r)?;
    let n = a.nrows();
    if b.nrows() != n || q.nrows() != n || r.nrows() != b.ncols() {
        return Err(SynthesisError::Dimension(format!(
            "A {n}x{n}, B {}x{}, Q {}x{}, R {}x{}",
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    if r.clone().cholesky().is_none() {
        return Err(SynthesisError::InputWeightNotPositive);
    }
    let q_scale = q.norm().max(1.0);
    if (q - q.transpose()).norm() > 1e-12 * q_scale
        || min_eigenvalue_symmetric(q) < -1e-12 * q_scale
    {
        return Err(SynthesisError::StateWeightNotPsd);
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(SynthesisError::InputWeightNotPositive)?;

    let mut k = initial_gain(a, b)?;
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut iterations = 0;
    for iter in 0..NEWTON_MAX_ITER {
        iterations = iter + 1;
        let acl = a - b * &k;
        if !is_hurwitz(&acl) {
            return Err(SynthesisError::NotHurwitz(spectral_abscissa(&acl)));
        }
        let rhs = -(q + k.transpose() * r * &k);
        let next = symmetrize(&solve_vectorized(&acl, &rhs)?);
        k = &r_inv * b.transpose() * &next;
        let step = (&next - &p).norm();
        p = next;
        if iter > 0 && step <= NEWTON_STEP_TOL * (1.0 + p.norm()) {
            break;
        }
    }

    let residual = care_residual(a, b, q, r, &p);
    if residual.is_nan() || residual > CARE_RESIDUAL_TOL * (1.0 + p.norm()) {
        return Err(SynthesisError::NotConverged {
            iterations,
            residual,
        });
    }
    let acl = a - b * &k;
    if !is_hurwitz(&acl) {
        return Err(SynthesisError::NotHurwitz(spectral_abscissa(&acl)));
    }
    Ok(p)
}

/// `K = R⁻¹BᵀP`.
pub fn lqr_gain(
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(SynthesisError::InputWeightNotPositive)?;
    Ok(r_inv * b.transpose() * p)
}

/// `σ = θr²‖MBK‖² / (θl·λmin(M)·λmin(N))`, with `‖·‖` the induced 2-norm.
pub fn compute_sigma(
    m: &Matrix4<f64>,
    b: &Vector4<f64>,
    k: &RowVector4<f64>,
    n: &Matrix4<f64>,
    theta_l: f64,
    theta_r: f64,
) -> f64 {
    let mbk = spectral_norm(&to_dynamic(&(m * b * k)));
    let lm = min_eigenvalue_symmetric(&to_dynamic(m));
    let ln = min_eigenvalue_symmetric(&to_dynamic(n));
    sigma_from_norms(mbk, lm, ln, theta_l, theta_r)
}

fn sigma_from_norms(
    mbk: f64,
    lambda_min_m: f64,
    lambda_min_n: f64,
    theta_l: f64,
    theta_r: f64,
) -> f64 {
    theta_r * theta_r * mbk * mbk / (theta_l * lambda_min_m * lambda_min_n)
}

/// Guaranteed minimum inter-event time
/// `τ = (σε)^{-1/2}·{atan[√(σ/ε)(1+Z̄)] − atan[√(σ/ε)]}`.
///
/// Evaluated through `atan x − atan y = atan((x−y)/(1+xy))`, which is exact
/// and free of cancellation as `σ → 0`. At `σ = 0` returns the limit `Z̄/ε`.
pub fn min_iet(sigma: f64, epsilon: f64, z_bar: f64) -> f64 {
    assert!(
        sigma >= 0.0 && epsilon > 0.0 && z_bar > 0.0,
        "min_iet: need σ ≥ 0, ε > 0, Z̄ > 0"
    );
    if sigma == 0.0 {
        return z_bar / epsilon;
    }
    let ratio = (sigma / epsilon).sqrt();
    let angle = (ratio * z_bar / (1.0 + ratio * ratio * (1.0 + z_bar))).atan();
    angle / (sigma * epsilon).sqrt()
}

pub(crate) fn to_dynamic<const R: usize, const C: usize>(
    m: &nalgebra::SMatrix<f64, R, C>,
) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

fn to_matrix4(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_column_slice(m.as_slice())
}

/// Gain, certificates and event-separation bound for one trigger design.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub k: RowVector4<f64>,
    pub p: Matrix4<f64>,
    pub m: Matrix4<f64>,
    pub n: Matrix4<f64>,
    pub sigma: f64,
    pub tau: f64,
    /// `‖MBK‖₂`.
    pub mbk_norm: f64,
    pub lambda_min_m: f64,
    pub lambda_min_n: f64,
    pub care_residual: f64,
    pub lyapunov_residual: f64,
    pub design: EtmDesign,
}

impl SynthesisResult {
    pub fn closed_loop(&self, plant: &PlantMatrices) -> Matrix4<f64> {
        plant.a - plant.b * self.k
    }

    /// Same gain and certificate with `σ`, `τ` recomputed for another design.
    pub fn with_design(&self, design: EtmDesign) -> Self {
        let sigma = sigma_from_norms(
            self.mbk_norm,
            self.lambda_min_m,
            self.lambda_min_n,
            design.theta_l,
            design.theta_r,
        );
        Self {
            sigma,
            tau: min_iet(sigma, design.epsilon, design.z_bar),
            design,
            ..self.clone()
        }
    }
}

/// Full pipeline: Riccati → gain → Lyapunov certificate → `σ`, `τ`.
pub fn synthesize(
    plant: &PlantMatrices,
    weights: &LqrWeights,
    n: &Matrix4<f64>,
    design: EtmDesign,
) -> Result<SynthesisResult, SynthesisError> {
    if weights.r.is_nan() || weights.r <= 0.0 {
        return Err(SynthesisError::InputWeightNotPositive);
    }
    let a = to_dynamic(&plant.a);
    let b = to_dynamic(&plant.b);
    let q = to_dynamic(&weights.q);
    let r = DMatrix::from_element(1, 1, weights.r);

    let p = solve_care(&a, &b, &q, &r)?;
    let k = lqr_gain(&p, &b, &r)?;
    let acl = &a - &b * &k;
    let n_dyn = to_dynamic(n);
    let m = solve_lyapunov(&acl, &n_dyn)?;

    let k4 = RowVector4::from_column_slice(k.as_slice());
    let m4 = to_matrix4(&m);
    let mbk_norm = spectral_norm(&to_dynamic(&(m4 * plant.b * k4)));
    let lambda_min_m = min_eigenvalue_symmetric(&m);
    let lambda_min_n = min_eigenvalue_symmetric(&n_dyn);
    let sigma = sigma_from_norms(
        mbk_norm,
        lambda_min_m,
        lambda_min_n,
        design.theta_l,
        design.theta_r,
    );

    Ok(SynthesisResult {
        k: k4,
        p: to_matrix4(&p),
        m: m4,
        n: *n,
        sigma,
        tau: min_iet(sigma, design.epsilon, design.z_bar),
        mbk_norm,
        lambda_min_m,
        lambda_min_n,
        care_residual: care_residual(&a, &b, &q, &r, &p),
        lyapunov_residual: lyapunov_residual(&acl, &m, &n_dyn),
        design,
    })
}
