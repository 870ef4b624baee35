//! Event-triggered LQR lateral control of an intelligent vehicle.
//!
//! The crate builds the bicycle-model error dynamics ([`model`]), designs the
//! LQR gain and the Lyapunov certificate ([`synthesis`]), runs the
//! clock-variable trigger with a designable minimum inter-event time
//! ([`etm`]) inside a fixed-step closed-loop simulator ([`sim`]), and wraps
//! the comparison of triggering strategies in a batch front end ([`cli`]).

pub mod cli;
pub mod etm;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod synthesis;
