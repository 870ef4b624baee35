//! Clock-variable event trigger.
//!
//! A countdown `Z` is reset to `Z̄` at every update and drains at rate
//! `ω ≤ −ε`; the held state is refreshed when `Z` reaches zero. The drain
//! rate depends on the ratio of the state to the event error `η`:
//!
//! ```text
//! ϖ = (θl·λmin(N)/λmin(M))·|x̃|²/|η|² − 2(1+Z)·(θr·‖MBK‖/λmin(M))·|x̃|/|η|
//! ω = min(0, ϖ) − ε   if η ≠ 0,   −ε otherwise
//! ```
//!
//! Since `ω ≥ −σ(1+Z)² − ε` for every state, consecutive updates are at
//! least `τ` apart regardless of disturbances.

use nalgebra::RowVector4;

use crate::model::ErrorState;
use crate::synthesis::{EtmDesign, SynthesisResult};

/// `Z` is treated as having reached zero below `Z̄·CLOCK_ZERO_TOL`, which
/// absorbs the rounding left by repeated subtraction of `ε·dt`.
pub const CLOCK_ZERO_TOL: f64 = 1e-9;

/// How control updates are scheduled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Periodic sampling.
    TimeTriggered { period: f64 },
    /// Clock-variable trigger.
    Event(EtmDesign),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::TimeTriggered { period } => format!("time-triggered ({period} s)"),
            Strategy::Event(d) => format!("etm (theta_l={}, theta_r={})", d.theta_l, d.theta_r),
        }
    }

    /// Returns the offending field name on failure.
    pub fn validate(&self) -> Result<(), &'static str> {
        match self {
            Strategy::TimeTriggered { period } if !(period.is_finite() && *period > 0.0) => {
                Err("period")
            }
            Strategy::TimeTriggered { .. } => Ok(()),
            Strategy::Event(d) => d.validate(),
        }
    }
}

/// Trigger state carried between samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtmState {
    /// Clock `Z(t)`, in `[0, Z̄]`.
    pub z: f64,
    /// `η = held_state − x̃(t)`.
    pub eta: ErrorState,
    pub last_trigger_time: f64,
    /// `x̃(t_k)`.
    pub held_state: ErrorState,
}

impl EtmState {
    /// State right after an update at `t0` with `x̃(t0) = x0`.
    pub fn triggered_at(t0: f64, x0: ErrorState, z_bar: f64) -> Self {
        Self {
            z: z_bar,
            eta: ErrorState::zeros(),
            last_trigger_time: t0,
            held_state: x0,
        }
    }

    /// State at the most recent sample, `held − η`.
    pub fn current_state(&self) -> ErrorState {
        self.held_state - self.eta
    }
}

fn state_weight(syn: &SynthesisResult, d: &EtmDesign) -> f64 {
    d.theta_l * syn.lambda_min_n / syn.lambda_min_m
}

fn cross_weight(syn: &SynthesisResult, d: &EtmDesign) -> f64 {
    d.theta_r * syn.mbk_norm / syn.lambda_min_m
}

/// `ϖ` for a nonzero event error.
///
/// # Panics
///
/// If `η = 0`; the ratio `|x̃|/|η|` is undefined there and [`omega`]
/// handles that branch.
pub fn varpi(
    x_tilde: &ErrorState,
    eta: &ErrorState,
    z: f64,
    syn: &SynthesisResult,
    d: &EtmDesign,
) -> f64 {
    let eta_norm = eta.norm();
    assert!(eta_norm > 0.0, "varpi called with zero event error");
    let ratio = x_tilde.norm() / eta_norm;
    state_weight(syn, d) * ratio * ratio - 2.0 * (1.0 + z) * cross_weight(syn, d) * ratio
}

/// Drain rate `ω` of the clock.
pub fn omega(
    x_tilde: &ErrorState,
    eta: &ErrorState,
    z: f64,
    syn: &SynthesisResult,
    d: &EtmDesign,
) -> f64 {
    if eta.iter().all(|&v| v == 0.0) {
        return -d.epsilon;
    }
    let ratio = x_tilde.norm() / eta.norm();
    if !ratio.is_finite() {
        // |η| underflowed against |x̃|: ϖ → +∞.
        return -d.epsilon;
    }
    varpi(x_tilde, eta, z, syn, d).min(0.0) - d.epsilon
}

/// Advances the clock over one sample interval and applies the trigger rule.
///
/// The drain rate is evaluated at the start of the interval (explicit
/// Euler), from the state and event error stored in `s`. The new sample
/// `x_now` at time `t_now` then either refreshes `η`, or, if `Z` reached
/// zero, becomes the new held state with `Z` reset to `Z̄`.
pub fn step_clock(
    s: &EtmState,
    t_now: f64,
    x_now: &ErrorState,
    dt: f64,
    syn: &SynthesisResult,
    d: &EtmDesign,
) -> (EtmState, bool) {
    let rate = omega(&s.current_state(), &s.eta, s.z, syn, d);
    let z = (s.z + rate * dt).max(0.0);
    if z <= d.z_bar * CLOCK_ZERO_TOL {
        (EtmState::triggered_at(t_now, *x_now, d.z_bar), true)
    } else {
        (
            EtmState {
                z,
                eta: s.held_state - x_now,
                ..*s
            },
            false,
        )
    }
}

/// Zero-order-hold steering correction `δ̃ = −K·x̃(t_k)`.
pub fn control_input(s: &EtmState, k: &RowVector4<f64>) -> f64 {
    -(k * s.held_state)[0]
}

/// A running scheduler for one strategy.
///
/// For the periodic strategy the clock holds the time left until the next
/// sampling instant.
#[derive(Debug, Clone)]
pub struct Trigger<'a> {
    strategy: Strategy,
    syn: &'a SynthesisResult,
    state: EtmState,
    next_sample: f64,
}

impl<'a> Trigger<'a> {
    pub fn new(strategy: Strategy, syn: &'a SynthesisResult, t0: f64, x0: ErrorState) -> Self {
        let (reset, next_sample) = match strategy {
            Strategy::TimeTriggered { period } => (period, t0 + period),
            Strategy::Event(d) => (d.z_bar, f64::INFINITY),
        };
        Self {
            strategy,
            syn,
            state: EtmState::triggered_at(t0, x0, reset),
            next_sample,
        }
    }

    pub fn state(&self) -> &EtmState {
        &self.state
    }

    pub fn input(&self) -> f64 {
        control_input(&self.state, &self.syn.k)
    }

    /// Processes the sample `x_now` at `t_now`, one `dt` after the previous one.
    /// Returns whether the held state was refreshed.
    pub fn step(&mut self, t_now: f64, x_now: &ErrorState, dt: f64) -> bool {
        match self.strategy {
            Strategy::Event(d) => {
                let (next, fired) = step_clock(&self.state, t_now, x_now, dt, self.syn, &d);
                self.state = next;
                fired
            }
            Strategy::TimeTriggered { period } => {
                let slack = dt * CLOCK_ZERO_TOL;
                if t_now + slack >= self.next_sample {
                    while self.next_sample <= t_now + slack {
                        self.next_sample += period;
                    }
                    self.state = EtmState::triggered_at(t_now, *x_now, period);
                    self.state.z = self.next_sample - t_now;
                    true
                } else {
                    self.state.eta = self.state.held_state - x_now;
                    self.state.z = self.next_sample - t_now;
                    false
                }
            }
        }
    }
}
