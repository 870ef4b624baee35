//! Fixed-step closed-loop simulation of the disturbed error dynamics.

use nalgebra::{SVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::etm::{Strategy, Trigger};
use crate::model::{ErrorState, PlantMatrices};
use crate::synthesis::SynthesisResult;

/// States with a larger Euclidean norm abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state diverged at t = {time:.4} s (|x| = {norm:.3e})")]
    Diverged { time: f64, norm: f64 },
    #[error("invalid simulation setting `{0}`")]
    InvalidConfig(&'static str),
}

/// Decaying sinusoidal disturbance `ξᵢ(t) = ξ̄ᵢ·e^{−a t}·sin(ωᵢ t + φᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub xi_bar: Vector4<f64>,
    pub decay_rate: f64,
    pub frequencies: Vector4<f64>,
    pub phases: Vector4<f64>,
    pub seed: u64,
}

impl Disturbance {
    /// Phases drawn uniformly from `[0, 2π)` by a ChaCha8 stream seeded with `seed`.
    pub fn seeded(
        xi_bar: Vector4<f64>,
        decay_rate: f64,
        frequencies: Vector4<f64>,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = Vector4::from_fn(|_, _| rng.random_range(0.0..std::f64::consts::TAU));
        Self {
            xi_bar,
            decay_rate,
            frequencies,
            phases,
            seed,
        }
    }

    pub fn with_phases(mut self, phases: Vector4<f64>) -> Self {
        self.phases = phases;
        self
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.xi_bar.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("xi_bar");
        }
        if !(self.decay_rate.is_finite() && self.decay_rate > 0.0) {
            return Err("decay_rate");
        }
        if self.frequencies.iter().any(|v| !v.is_finite()) {
            return Err("frequencies");
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Vector4<f64> {
        let envelope = (-self.decay_rate * t).exp();
        Vector4::from_fn(|i, _| {
            self.xi_bar[i] * envelope * (self.frequencies[i] * t + self.phases[i]).sin()
        })
    }
}

/// Bound `[3e−4, 1e−3, 0, 0]`, decay 0.3 /s, frequencies `(1, 2, 0, 0)` rad/s.
impl Default for Disturbance {
    fn default() -> Self {
        Self::seeded(
            Vector4::new(3e-4, 1e-3, 0.0, 0.0),
            0.3,
            Vector4::new(1.0, 2.0, 0.0, 0.0),
            0,
        )
    }
}

pub fn disturbance_at(d: &Disturbance, t: f64) -> Vector4<f64> {
    d.at(t)
}

/// `A·x̃ + B·δ̃ + G·ξ`.
pub fn rhs(x: &ErrorState, delta: f64, xi: &Vector4<f64>, plant: &PlantMatrices) -> ErrorState {
    plant.a * x + plant.b * delta + plant.g * xi
}

/// One classical Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<const D: usize, F>(f: F, t: f64, x: &SVector<f64, D>, dt: f64) -> SVector<f64, D>
where
    F: Fn(f64, &SVector<f64, D>) -> SVector<f64, D>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + half, &(x + k1 * half));
    let k3 = f(t + half, &(x + k2 * half));
    let k4 = f(t + dt, &(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Advances the plant over `[t, t+dt]` with the steering correction held.
pub fn integrate_step(
    x: &ErrorState,
    delta_held: f64,
    t: f64,
    dt: f64,
    disturbance: Option<&Disturbance>,
    plant: &PlantMatrices,
) -> ErrorState {
    rk4_step(
        |s, state| {
            let xi = disturbance.map_or_else(Vector4::zeros, |d| d.at(s));
            rhs(state, delta_held, &xi, plant)
        },
        t,
        x,
        dt,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub initial_state: ErrorState,
    pub strategy: Strategy,
    pub disturbance: Option<Disturbance>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err("t_end");
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.t_end) {
            return Err("dt");
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err("initial_state");
        }
        self.strategy.validate()?;
        if let Some(d) = &self.disturbance {
            d.validate()?;
        }
        Ok(())
    }

    /// `⌊t_end/dt⌋`, tolerant of the rounding in e.g. `15 / 0.01`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize
    }
}

/// Sampled record of one run. All per-sample vectors share one length.
///
/// `triggers` lists the update instants after the initial one at `t = 0`,
/// which every strategy performs to start the controller.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub times: Vec<f64>,
    pub states: Vec<ErrorState>,
    /// Steering correction applied from each sample onward.
    pub inputs: Vec<f64>,
    pub clock: Vec<f64>,
    pub triggered: Vec<bool>,
    pub disturbances: Vec<Vector4<f64>>,
    pub triggers: Vec<f64>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn trigger_count(&self) -> usize {
        self.triggers.len()
    }

    /// Gaps between consecutive updates, counting the initial one at the first sample.
    pub fn inter_event_times(&self) -> Vec<f64> {
        let Some(&t0) = self.times.first() else {
            return Vec::new();
        };
        std::iter::once(t0)
            .chain(self.triggers.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }

    pub fn min_inter_event_time(&self) -> Option<f64> {
        self.inter_event_times().into_iter().reduce(f64::min)
    }

    pub fn mean_inter_event_time(&self) -> Option<f64> {
        let iets = self.inter_event_times();
        (!iets.is_empty()).then(|| iets.iter().sum::<f64>() / iets.len() as f64)
    }

    fn push(&mut self, t: f64, x: ErrorState, u: f64, z: f64, fired: bool, xi: Vector4<f64>) {
        self.times.push(t);
        self.states.push(x);
        self.inputs.push(u);
        self.clock.push(z);
        self.triggered.push(fired);
        self.disturbances.push(xi);
        if fired {
            self.triggers.push(t);
        }
    }
}

/// Runs the closed loop under `cfg.strategy`.
///
/// Each step integrates the plant with the held input, then hands the new
/// sample to the scheduler, which may refresh the held state.
pub fn run(
    cfg: &SimConfig,
    plant: &PlantMatrices,
    syn: &SynthesisResult,
) -> Result<SimLog, SimError> {
    cfg.validate().map_err(SimError::InvalidConfig)?;
    let steps = cfg.steps();
    let disturbance = cfg.disturbance.as_ref();
    let xi_at = |t: f64| disturbance.map_or_else(Vector4::zeros, |d| d.at(t));

    let mut trigger = Trigger::new(cfg.strategy, syn, 0.0, cfg.initial_state);
    let mut x = cfg.initial_state;
    let mut log = SimLog::default();
    for buf in [&mut log.times, &mut log.inputs, &mut log.clock] {
        buf.reserve(steps + 1);
    }
    log.push(
        0.0,
        x,
        trigger.input(),
        trigger.state().z,
        false,
        xi_at(0.0),
    );

    for n in 0..steps {
        let t = n as f64 * cfg.dt;
        x = integrate_step(&x, trigger.input(), t, cfg.dt, disturbance, plant);
        let t_next = (n + 1) as f64 * cfg.dt;
        let norm = x.norm();
        if norm.is_nan() || norm > DIVERGENCE_LIMIT {
            return Err(SimError::Diverged { time: t_next, norm });
        }
        let fired = trigger.step(t_next, &x, cfg.dt);
        log.push(
            t_next,
            x,
            trigger.input(),
            trigger.state().z,
            fired,
            xi_at(t_next),
        );
    }
    Ok(log)
}
