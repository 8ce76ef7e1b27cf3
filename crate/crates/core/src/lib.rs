//! Frequency dynamics of a multi-machine grid with a DFIG wind farm, a
//! washout-based inertial support loop, and a small neural network that
//! learns a coordination offset for the governor speed references.
//!
//! Layout:
//!
//! - [`netmodel`]: network data, admittance matrix, Newton-Raphson power flow, events.
//! - [`machines`]: one-axis synchronous machine, IEEE Type-1 exciter, IEESGO governor.
//! - [`windfarm`]: reduced-order DFIG, MPPT, aerodynamics, washout inertial loop.
//! - [`sim`]: coupled fixed-step simulation, traces, COI frequency and metrics.
//! - [`coordnet`]: one-hidden-layer MLP, backprop training, datasets, weights files.

pub mod casefile;
pub mod coordnet;
pub mod machines;
pub mod netmodel;
pub mod params;
pub mod sim;
pub mod windfarm;

/// Synchronous electrical speed for a given nominal frequency, rad/s.
pub fn synchronous_speed(f_nominal_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_nominal_hz
}
