//! Washout inertial-support path `dP = -K_w * T_w s / (1 + T_w s) * df` with
//! `df` the per-unit frequency deviation, plus the filtered angle-derivative
//! frequency meter feeding it.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct WashoutParams {
    /// pu power per pu frequency
    pub k_w: f64,
    /// s
    pub t_w: f64,
    /// Hz
    pub deadband_hz: f64,
    pub f_nominal_hz: f64,
}

impl WashoutParams {
    /// Per-unit deviation with the deadband applied.
    pub fn deviation_pu(&self, df_pu: f64) -> f64 {
        if (df_pu * self.f_nominal_hz).abs() < self.deadband_hz {
            0.0
        } else {
            df_pu
        }
    }
}

/// Discrete filter memory: the low-pass part and the previous input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WashoutState {
    pub lp: f64,
    pub last_input: f64,
}

/// One trapezoidal step of the washout driven by a sampled frequency in Hz.
pub fn washout_delta_p(f_input_hz: f64, state: &WashoutState, p: &WashoutParams, dt: f64) -> (f64, WashoutState) {
    let u = p.deviation_pu((f_input_hz - p.f_nominal_hz) / p.f_nominal_hz);
    let a = dt / (2.0 * p.t_w);
    let lp = ((1.0 - a) * state.lp + a * (state.last_input + u)) / (1.0 + a);
    (-p.k_w * (u - lp), WashoutState { lp, last_input: u })
}

/// Continuous form: `T_w dxw/dt = df - xw`.
pub fn washout_rhs(xw: f64, df_pu: f64, p: &WashoutParams) -> f64 {
    (p.deviation_pu(df_pu) - xw) / p.t_w
}

pub fn washout_output(xw: f64, df_pu: f64, p: &WashoutParams) -> f64 {
    -p.k_w * (p.deviation_pu(df_pu) - xw)
}

/// Maps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Meter state `z` lags the bus angle `theta` with time constant `t_f`.
pub fn frequency_meter_rhs(z: f64, theta: f64, t_f: f64) -> f64 {
    wrap_angle(theta - z) / t_f
}

/// Filtered frequency deviation, pu of `omega_s`.
pub fn frequency_meter_output(z: f64, theta: f64, t_f: f64, omega_s: f64) -> f64 {
    wrap_angle(theta - z) / (t_f * omega_s)
}
