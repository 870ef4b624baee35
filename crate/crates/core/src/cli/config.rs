//! Scenario configuration.
//!
//! Flat TOML with the sections `[vehicle]`, `[lqr]`, `[etm]`, `[sim]`,
//! `[disturbance]` and `[trajectory]`. Every key is optional; an empty file
//! is the default cornering scenario at 18 m/s.

use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::Deserialize;
use thiserror::Error;

use crate::etm::Strategy;
use crate::linalg::min_eigenvalue_symmetric;
use crate::model::{ErrorState, ModelError, Pose, VehicleParams};
use crate::sim::{Disturbance, SimConfig};
use crate::synthesis::{to_dynamic, EtmDesign, LqrWeights};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}` in [{section}]: {reason}")]
    Invalid {
        section: &'static str,
        field: &'static str,
        reason: String,
    },
}

impl ConfigError {
    fn invalid(section: &'static str, field: &'static str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            section,
            field,
            reason: reason.into(),
        }
    }
}

/// A 4×4 matrix given either by its diagonal or row by row.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Diagonal([f64; 4]),
    Rows([[f64; 4]; 4]),
}

impl MatrixSpec {
    fn to_matrix(self) -> Matrix4<f64> {
        match self {
            MatrixSpec::Diagonal(d) => Matrix4::from_diagonal(&Vector4::from(d)),
            MatrixSpec::Rows(rows) => Matrix4::from_fn(|r, c| rows[r][c]),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    vehicle: RawVehicle,
    #[serde(default)]
    lqr: RawLqr,
    #[serde(default)]
    etm: RawEtm,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    disturbance: RawDisturbance,
    #[serde(default)]
    trajectory: RawTrajectory,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVehicle {
    m: Option<f64>,
    mu: Option<f64>,
    vx: Option<f64>,
    iz: Option<f64>,
    cf: Option<f64>,
    cr: Option<f64>,
    lf: Option<f64>,
    lr: Option<f64>,
    rho: Option<f64>,
    g: Option<MatrixSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLqr {
    q: Option<MatrixSpec>,
    r: Option<f64>,
    n: Option<MatrixSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEtm {
    z_bar: Option<f64>,
    epsilon: Option<f64>,
    theta_l: Option<f64>,
    theta_r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    t_end: Option<f64>,
    dt: Option<f64>,
    initial_state: Option<[f64; 4]>,
    /// Period of the time-triggered baseline; defaults to `dt`.
    period: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    enabled: Option<bool>,
    xi_bar: Option<[f64; 4]>,
    decay_rate: Option<f64>,
    frequencies: Option<[f64; 4]>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    x0: Option<f64>,
    y0: Option<f64>,
    heading: Option<f64>,
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub vehicle: VehicleParams,
    pub g: Matrix4<f64>,
    pub weights: LqrWeights,
    pub n: Matrix4<f64>,
    pub design: EtmDesign,
    pub t_end: f64,
    pub dt: f64,
    pub initial_state: ErrorState,
    pub period: f64,
    pub disturbance: Option<Disturbance>,
    pub start: Pose,
}

impl Default for Scenario {
    fn default() -> Self {
        parse_config("").expect("default scenario is valid")
    }
}

impl Scenario {
    pub fn sim_config(&self, strategy: Strategy) -> SimConfig {
        SimConfig {
            t_end: self.t_end,
            dt: self.dt,
            initial_state: self.initial_state,
            strategy,
            disturbance: self.disturbance,
        }
    }

    /// Replaces the disturbance seed, redrawing the phases.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(d) = self.disturbance {
            self.disturbance = Some(Disturbance::seeded(
                d.xi_bar,
                d.decay_rate,
                d.frequencies,
                seed,
            ));
        }
        self
    }
}

pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    build(raw)
}

fn check_symmetric(
    section: &'static str,
    field: &'static str,
    m: &Matrix4<f64>,
) -> Result<(), ConfigError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::invalid(
            section,
            field,
            "entries must be finite",
        ));
    }
    if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
        return Err(ConfigError::invalid(section, field, "must be symmetric"));
    }
    Ok(())
}

fn build(raw: RawConfig) -> Result<Scenario, ConfigError> {
    let d = VehicleParams::default();
    let v = raw.vehicle;
    let vehicle = VehicleParams {
        m: v.m.unwrap_or(d.m),
        mu: v.mu.unwrap_or(d.mu),
        vx: v.vx.unwrap_or(d.vx),
        iz: v.iz.unwrap_or(d.iz),
        cf: v.cf.unwrap_or(d.cf),
        cr: v.cr.unwrap_or(d.cr),
        lf: v.lf.unwrap_or(d.lf),
        lr: v.lr.unwrap_or(d.lr),
        rho: v.rho.unwrap_or(d.rho),
    };
    vehicle
        .validate()
        .map_err(|ModelError::InvalidParameter { name, reason, .. }| {
            ConfigError::invalid("vehicle", name, reason)
        })?;
    let g = v.g.map_or_else(Matrix4::identity, MatrixSpec::to_matrix);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::invalid(
            "vehicle",
            "g",
            "entries must be finite",
        ));
    }

    let lqr_default = LqrWeights::default();
    let q = raw.lqr.q.map_or(lqr_default.q, MatrixSpec::to_matrix);
    check_symmetric("lqr", "q", &q)?;
    if min_eigenvalue_symmetric(&to_dynamic(&q)) < -1e-12 * q.norm().max(1.0) {
        return Err(ConfigError::invalid(
            "lqr",
            "q",
            "must be positive semidefinite",
        ));
    }
    let r = raw.lqr.r.unwrap_or(lqr_default.r);
    if !(r.is_finite() && r > 0.0) {
        return Err(ConfigError::invalid("lqr", "r", "must be finite and > 0"));
    }
    let n = raw
        .lqr
        .n
        .map_or_else(Matrix4::identity, MatrixSpec::to_matrix);
    check_symmetric("lqr", "n", &n)?;
    if min_eigenvalue_symmetric(&to_dynamic(&n)) <= 0.0 {
        return Err(ConfigError::invalid(
            "lqr",
            "n",
            "must be positive definite",
        ));
    }

    let e = EtmDesign::default();
    let design = EtmDesign {
        z_bar: raw.etm.z_bar.unwrap_or(e.z_bar),
        epsilon: raw.etm.epsilon.unwrap_or(e.epsilon),
        theta_l: raw.etm.theta_l.unwrap_or(e.theta_l),
        theta_r: raw.etm.theta_r.unwrap_or(e.theta_r),
    };
    design.validate().map_err(|field| {
        let reason = match field {
            "theta_l" => "must be >= 1",
            "theta_r" => "must lie in (0, 1]",
            _ => "must be finite and > 0",
        };
        ConfigError::invalid("etm", field, reason)
    })?;

    let t_end = raw.sim.t_end.unwrap_or(15.0);
    let dt = raw.sim.dt.unwrap_or(0.01);
    let initial_state = ErrorState::from(raw.sim.initial_state.unwrap_or([0.0; 4]));
    let period = raw.sim.period.unwrap_or(dt);

    let base = Disturbance::default();
    let rd = raw.disturbance;
    let disturbance = rd.enabled.unwrap_or(true).then(|| {
        Disturbance::seeded(
            rd.xi_bar.map_or(base.xi_bar, Vector4::from),
            rd.decay_rate.unwrap_or(base.decay_rate),
            rd.frequencies.map_or(base.frequencies, Vector4::from),
            rd.seed.unwrap_or(base.seed),
        )
    });

    let scenario = Scenario {
        vehicle,
        g,
        weights: LqrWeights { q, r },
        n,
        design,
        t_end,
        dt,
        initial_state,
        period,
        disturbance,
        start: Pose {
            x: raw.trajectory.x0.unwrap_or(0.0),
            y: raw.trajectory.y0.unwrap_or(0.0),
            heading: raw.trajectory.heading.unwrap_or(0.0),
        },
    };
    scenario
        .sim_config(Strategy::Event(design))
        .validate()
        .map_err(|field| {
            let section = match field {
                "xi_bar" | "decay_rate" | "frequencies" => "disturbance",
                _ => "sim",
            };
            ConfigError::invalid(section, field, "out of range")
        })?;
    if !(period.is_finite() && period > 0.0) {
        return Err(ConfigError::invalid(
            "sim",
            "period",
            "must be finite and > 0",
        ));
    }
    Ok(scenario)
}
