//! Linear lateral-dynamics error model of a dynamic bicycle vehicle.
//!
//! The state is the deviation from the steady cornering equilibrium,
//! `x̃ = (β̃, ψ̇̃, ė, e)`, driven by the steering correction `δ̃` and an
//! additive disturbance `ξ` through `G`:
//!
//! ```text
//! ẋ̃ = A x̃ + B δ̃ + G ξ
//! ```

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

/// Deviation state `(β̃, ψ̇̃, ė, e)`.
pub type ErrorState = Vector4<f64>;

/// Index of the sideslip error in [`ErrorState`].
pub const SIDESLIP: usize = 0;
/// Index of the yaw-rate error in [`ErrorState`].
pub const YAW_RATE: usize = 1;
/// Index of the lateral error rate in [`ErrorState`].
pub const LATERAL_RATE: usize = 2;
/// Index of the lateral error displacement in [`ErrorState`].
pub const LATERAL: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid vehicle parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Physical constants of the bicycle model plus road conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Mass [kg].
    pub m: f64,
    /// Road friction coefficient, `0 < mu <= 1`.
    pub mu: f64,
    /// Longitudinal velocity [m/s].
    pub vx: f64,
    /// Yaw moment of inertia [kg m^2].
    pub iz: f64,
    /// Front cornering stiffness [N/rad].
    pub cf: f64,
    /// Rear cornering stiffness [N/rad].
    pub cr: f64,
    /// Front axle to CG distance [m].
    pub lf: f64,
    /// Rear axle to CG distance [m].
    pub lr: f64,
    /// Road curvature [1/m].
    pub rho: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1421.0,
            mu: 0.6,
            vx: 18.0,
            iz: 2570.0,
            cf: 170_550.0,
            cr: 137_844.0,
            lf: 1.191,
            lr: 1.513,
            rho: 0.001,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("m", self.m),
            ("vx", self.vx),
            ("iz", self.iz),
            ("cf", self.cf),
            ("cr", self.cr),
            ("lf", self.lf),
            ("lr", self.lr),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                });
            }
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "mu",
                value: self.mu,
                reason: "must lie in (0, 1]",
            });
        }
        if !self.rho.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "rho",
                value: self.rho,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// `A`, `B`, `G` of the disturbed error dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantMatrices {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub g: Matrix4<f64>,
}

impl PlantMatrices {
    /// Replaces the disturbance input matrix.
    pub fn with_disturbance_matrix(mut self, g: Matrix4<f64>) -> Self {
        self.g = g;
        self
    }
}

/// Builds the error-dynamics matrices with `G = I`.
pub fn build_plant(p: &VehicleParams) -> Result<PlantMatrices, ModelError> {
    p.validate()?;
    let VehicleParams {
        m,
        mu,
        vx,
        iz,
        cf,
        cr,
        lf,
        lr,
        ..
    } = *p;

    let stiffness_sum = cf + cr;
    let moment_diff = lf * cf - lr * cr;
    let moment_sq = lf * lf * cf + lr * lr * cr;

    #[rustfmt::skip]
    let a = Matrix4::new(
        -mu * stiffness_sum / (m * vx), -1.0 - mu * moment_diff / (m * vx * vx), 0.0, 0.0,
        -mu * moment_diff / iz,         -mu * moment_sq / (iz * vx),             0.0, 0.0,
        -mu * stiffness_sum / m,        -mu * moment_diff / (m * vx),            0.0, 0.0,
        0.0,                            0.0,                                     1.0, 0.0,
    );
    let b = Vector4::new(mu * cf / (m * vx), mu * lf * cf / iz, mu * cf / m, 0.0);

    Ok(PlantMatrices {
        a,
        b,
        g: Matrix4::identity(),
    })
}

/// Steady cornering point on a road of constant curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub beta_star: f64,
    pub psidot_star: f64,
    pub delta_star: f64,
}

pub fn equilibrium(p: &VehicleParams) -> Result<Equilibrium, ModelError> {
    p.validate()?;
    let VehicleParams {
        m,
        mu,
        vx,
        cf,
        cr,
        lf,
        lr,
        rho,
        ..
    } = *p;
    let wheelbase = lf + lr;
    let v2 = vx * vx;
    Ok(Equilibrium {
        beta_star: (lr - lf * m * v2 / (mu * cr * wheelbase)) * rho,
        psidot_star: vx * rho,
        delta_star: wheelbase * rho
            + m * v2 * (lr * cr - lf * cf) * rho / (mu * cf * cr * wheelbase),
    })
}

/// Start pose of the reference path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// One sample of a reconstructed trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub x_ref: f64,
    pub y_ref: f64,
}

// sin(u)/u, with the Taylor tail near zero.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Position and heading on the constant-curvature reference after arc length `s`.
pub fn reference_pose(start: &Pose, rho: f64, s: f64) -> Pose {
    let half_turn = 0.5 * rho * s;
    let chord = s * sinc(half_turn);
    let chord_dir = start.heading + half_turn;
    Pose {
        x: start.x + chord * chord_dir.cos(),
        y: start.y + chord * chord_dir.sin(),
        heading: start.heading + rho * s,
    }
}

/// Places the vehicle in the plane for display.
///
/// The reference is the arc of curvature `rho` traversed at `vx` from
/// `start`; the vehicle sits `e` to the left of it along the path normal.
/// `lateral_errors` pairs each sample time with its lateral error `e`.
pub fn reconstruct_trajectory(
    times: &[f64],
    lateral_errors: &[f64],
    p: &VehicleParams,
    start: &Pose,
) -> Vec<TrajectoryPoint> {
    times
        .iter()
        .zip(lateral_errors)
        .map(|(&t, &e)| {
            let reference = reference_pose(start, p.rho, p.vx * t);
            TrajectoryPoint {
                x: reference.x - e * reference.heading.sin(),
                y: reference.y + e * reference.heading.cos(),
                x_ref: reference.x,
                y_ref: reference.y,
            }
        })
        .collect()
}
