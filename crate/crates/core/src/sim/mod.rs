//! Coupled fixed-step simulation of the synchronous units, the wind farm and
//! the constant-admittance network, plus frequency metrics.

mod metrics;
mod run;
mod system;
mod trace;


pub use metrics::{coi_frequency, compute_metrics, running_area_error, Metrics, MetricsError};
pub use run::run_scenario;
pub use system::{farm_dispatch, PowerSystem, StateLayout, PF_MAX_ITER, PF_TOLERANCE};
pub use trace::SimTrace;

use crate::machines::MachineError;
use crate::netmodel::{Event, NetError};
use crate::params::ParamError;
use crate::windfarm::WindError;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("generator {unit} (bus {bus}): {source}")]
    Machine { unit: usize, bus: u32, source: MachineError },
    #[error("wind farm: {0}")]
    Wind(#[from] WindError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("implicit step did not converge at t = {t:.6} s after {iterations} iterations")]
    NonConvergence { t: f64, iterations: usize },
    #[error("non-finite state at t = {t:.6} s")]
    NonFinite { t: f64 },
    #[error("singular network matrix at t = {t:.6} s")]
    SingularNetwork { t: f64 },
    #[error("no synchronous machine online")]
    NoMachines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Trapezoidal,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    /// No wind-farm support and no coordination.
    #[default]
    None,
    /// Washout inertial support on the wind farm.
    Inertial,
    /// Inertial support plus the learned governor offset.
    Coordinated,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerMode::None => "none",
            ControllerMode::Inertial => "inertial",
            ControllerMode::Coordinated => "coordinated",
        })
    }
}

/// Source of the coordination signal. Inputs are
/// `[farm P (system pu), omega_1 .. omega_n (pu), e (Hz s)]`; the output is
/// the offset in pu of synchronous speed, positive to raise governor output.
pub trait CoordinationPolicy: Send + Sync {
    fn evaluate(&self, inputs: &[f64]) -> f64;
}

/// Safety envelope on the coordination signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcEnvelope {
    /// Magnitude clamp, pu.
    pub limit: f64,
    /// Rate limit, pu/s.
    pub rate: f64,
    /// Tracking time constant of the applied signal, s.
    pub tau: f64,
}

impl Default for UcEnvelope {
    fn default() -> Self {
        Self { limit: 0.01, rate: 1.0, tau: 0.02 }
    }
}

#[derive(Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub events: Vec<Event>,
    pub mode: ControllerMode,
    pub policy: Option<Arc<dyn CoordinationPolicy>>,
    pub envelope: UcEnvelope,
    /// Keep every n-th sample in the trace.
    pub record_every: usize,
    /// Load frequency sensitivity `D_f` in `y (1 + D_f dw)`.
    pub load_damping: f64,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iter: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 20.0,
            integrator: Integrator::Trapezoidal,
            events: Vec::new(),
            mode: ControllerMode::None,
            policy: None,
            envelope: UcEnvelope::default(),
            record_every: 1,
            load_damping: 0.0,
            fixed_point_tol: 1e-10,
            max_fixed_point_iter: 20,
        }
    }
}

impl std::fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimConfig")
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("integrator", &self.integrator)
            .field("events", &self.events)
            .field("mode", &self.mode)
            .field("policy", &self.policy.as_ref().map(|_| "<policy>"))
            .field("envelope", &self.envelope)
            .field("record_every", &self.record_every)
            .finish()
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        if self.mode == ControllerMode::Coordinated && self.policy.is_none() {
            return bad("coordinated mode needs a coordination policy");
        }
        if self.events.iter().any(|e| !(e.time() >= 0.0)) {
            return bad("event times must be non-negative");
        }
        if !(self.envelope.tau > 0.0 && self.envelope.limit >= 0.0 && self.envelope.rate >= 0.0) {
            return bad("coordination envelope must have tau > 0 and non-negative limits");
        }
        Ok(())
    }
}
