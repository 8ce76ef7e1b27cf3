//! Reduced-order DFIG wind turbine with MPPT, a cascaded PI power/current
//! controller and a washout inertial-support loop.
//!
//! All turbine quantities are per unit on the turbine MVA base. The farm is
//! `n_turbines` identical machines sharing one state; its network injection
//! is the single-turbine current scaled by `n * S_turbine / S_system`.

mod washout;

pub use washout::{
    frequency_meter_output, frequency_meter_rhs, washout_delta_p, washout_output, washout_rhs, wrap_angle,
    WashoutParams, WashoutState,
};

use crate::machines::NortonBlock;
use num_complex::Complex64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WindError {
    #[error("invalid wind-farm parameter: {0}")]
    BadParameter(&'static str),
    #[error("wind-farm terminal voltage is zero")]
    ZeroVoltage,
    #[error("requested turbine output {requested:.6} pu exceeds available power {available:.6} pu")]
    ExceedsAvailable { requested: f64, available: f64 },
    #[error("requested turbine output {requested:.6} pu is not on the MPPT curve (available {available:.6} pu)")]
    OffMpptCurve { requested: f64, available: f64 },
}

/// Where the washout loop reads frequency from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencySource {
    /// Filtered derivative of the farm bus voltage angle.
    #[default]
    Bus,
    /// Center-of-inertia speed of the synchronous units.
    Coi,
}

impl std::str::FromStr for FrequencySource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bus" => Ok(Self::Bus),
            "coi" => Ok(Self::Coi),
            other => Err(format!("unknown frequency source `{other}` (expected `bus` or `coi`)")),
        }
    }
}

/// Cubic aerodynamic model normalized to the MPPT curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroParams {
    /// m/s
    pub v_rated: f64,
    /// Optimal rotor speed at rated wind, pu.
    pub omega_rated: f64,
    /// Peak power at rated wind, pu.
    pub c_cal: f64,
}

impl AeroParams {
    /// Calibrates `c_cal` so that the MPPT operating point at `v_cal`
    /// delivers `p_cal`.
    pub fn calibrated(v_rated: f64, omega_rated: f64, v_cal: f64, p_cal: f64) -> Self {
        Self { v_rated, omega_rated, c_cal: p_cal * (v_rated / v_cal).powi(3) }
    }

    pub fn k_opt(&self) -> f64 {
        self.c_cal / self.omega_rated.powi(3)
    }

    /// Peak extractable power at wind speed `v`.
    pub fn available(&self, v_wind: f64) -> f64 {
        self.c_cal * (v_wind / self.v_rated).powi(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfigParams {
    pub h_d: f64,
    pub xm: f64,
    pub xs: f64,
    pub xr: f64,
    pub rs: f64,
    pub rr: f64,
    /// Kept with the parameter set; the reduced controller does not use them.
    pub k_p: f64,
    pub k_i: f64,
    /// `K_P1..K_P4`: outer P, outer Q, inner active current, inner reactive current.
    pub kp: [f64; 4],
    pub ki: [f64; 4],
    pub n_turbines: u32,
    pub mva_base: f64,
    pub q_ref: f64,
    /// m/s, constant.
    pub v_wind: f64,
    pub aero: AeroParams,
    /// Base electrical speed, rad/s.
    pub omega_b: f64,
    /// Rotor-voltage ceiling, pu. Infinite by default.
    pub vr_max: f64,
    /// Lower bound on the speed used to convert power to torque.
    pub omega_floor: f64,
}

impl DfigParams {
    pub fn validate(&self) -> Result<(), WindError> {
        if !(self.h_d > 0.0) {
            return Err(WindError::BadParameter("H_D must be positive"));
        }
        if !(self.xs > 0.0 && self.xr > 0.0 && self.xm > 0.0 && self.transient_reactance() > 0.0) {
            return Err(WindError::BadParameter("reactances must be positive with Xs > Xm^2/Xr"));
        }
        if !(self.rr > 0.0 && self.rs >= 0.0) {
            return Err(WindError::BadParameter("need Rr > 0 and Rs >= 0"));
        }
        if self.ki.iter().any(|k| !(*k > 0.0)) {
            return Err(WindError::BadParameter("integral gains K_I1..K_I4 must be positive"));
        }
        if self.n_turbines == 0 || !(self.mva_base > 0.0) {
            return Err(WindError::BadParameter("need at least one turbine and a positive MVA base"));
        }
        if !(self.omega_b > 0.0 && self.omega_floor > 0.0) {
            return Err(WindError::BadParameter("base speed and speed floor must be positive"));
        }
        Ok(())
    }

    /// `X' = Xs - Xm^2 / Xr`
    pub fn transient_reactance(&self) -> f64 {
        self.xs - self.xm * self.xm / self.xr
    }

    /// `T'o = Xr / (omega_b Rr)`
    pub fn open_circuit_time_constant(&self) -> f64 {
        self.xr / (self.omega_b * self.rr)
    }

    pub fn stator_impedance(&self) -> Complex64 {
        Complex64::new(self.rs, self.transient_reactance())
    }

    /// Multiplier from turbine-base current or power to the farm total on
    /// the system base.
    pub fn farm_scale(&self, system_mva: f64) -> f64 {
        self.n_turbines as f64 * self.mva_base / system_mva
    }
}

pub const DFIG_STATES: usize = 7;

/// Per-turbine state. `e_t` is the internal voltage in the network frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfigState {
    pub omega_r: f64,
    pub e_t: Complex64,
    /// Integrators: outer P, outer Q, inner active current, inner reactive current.
    pub pi: [f64; 4],
}

impl DfigState {
    pub fn to_array(&self) -> [f64; DFIG_STATES] {
        [self.omega_r, self.e_t.re, self.e_t.im, self.pi[0], self.pi[1], self.pi[2], self.pi[3]]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { omega_r: x[0], e_t: Complex64::new(x[1], x[2]), pi: [x[3], x[4], x[5], x[6]] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfigOutput {
    pub deriv: [f64; DFIG_STATES],
    /// Stator current injected into the network, turbine base.
    pub current: Complex64,
    pub p: f64,
    pub q: f64,
    pub p_aero: f64,
    /// Rotor-voltage ceiling was active.
    pub saturated: bool,
}

/// `k_opt * omega_r^3`, clipped to `[0, 1]`.
pub fn mppt_reference(omega_r: f64, k_opt: f64) -> f64 {
    (k_opt * omega_r.max(0.0).powi(3)).clamp(0.0, 1.0)
}

/// Mechanical power with `Cp(x) = (3x - x^3) / 2`, `x` the speed relative to
/// the optimum for the current wind.
pub fn aero_power(v_wind: f64, omega_r: f64, p: &AeroParams) -> f64 {
    if v_wind <= 0.0 {
        return 0.0;
    }
    let x = omega_r / (p.omega_rated * v_wind / p.v_rated);
    p.available(v_wind) * 0.5 * (3.0 * x - x * x * x)
}

/// Stator current of one turbine for terminal voltage `v`.
pub fn stator_current(state: &DfigState, v: Complex64, p: &DfigParams) -> Complex64 {
    (state.e_t - v) / p.stator_impedance()
}

/// Farm injection as an affine function of terminal voltage, system base.
pub fn dfig_norton(state: &DfigState, p: &DfigParams, system_mva: f64) -> NortonBlock {
    let y = p.stator_impedance().inv() * p.farm_scale(system_mva);
    let source = state.e_t * y;
    NortonBlock { source, g: [[-y.re, y.im], [-y.im, -y.re]] }
}

pub fn dfig_derivatives(state: &DfigState, v: Complex64, p_cmd: f64, q_cmd: f64, p: &DfigParams) -> DfigOutput {
    let i = stator_current(state, v, p);
    let s = v * i.conj();
    let (pe, qe) = (s.re, s.im);
    let vm = v.norm();
    let u = if vm > 0.0 { v / vm } else { Complex64::new(1.0, 0.0) };
    let iu = i * u.conj();
    let (i_p, i_r) = (iu.re, -iu.im);

    let [kp1, kp2, kp3, kp4] = p.kp;
    let [ki1, ki2, ki3, ki4] = p.ki;
    let ip_ref = kp1 * (p_cmd - pe) + ki1 * state.pi[0];
    let ir_ref = kp2 * (q_cmd - qe) + ki2 * state.pi[1];
    let w_p = kp3 * (ip_ref - i_p) + ki3 * state.pi[2];
    let w_r = kp4 * (ir_ref - i_r) + ki4 * state.pi[3];

    // rotor voltage with slip feed-forward
    let slip = 1.0 - state.omega_r;
    let ratio = p.xr / p.xm;
    let mut vr = state.e_t * (slip * ratio) + u * Complex64::new(w_p, -w_r) * ratio;
    let mut saturated = false;
    let vr_mag = vr.norm();
    if vr_mag > p.vr_max {
        vr *= p.vr_max / vr_mag;
        saturated = true;
    }

    let j = Complex64::new(0.0, 1.0);
    let x_diff = p.xs - p.transient_reactance();
    let de = -(state.e_t + j * x_diff * i) / p.open_circuit_time_constant() - j * slip * p.omega_b * state.e_t
        + j * p.omega_b * (p.xm / p.xr) * vr;

    let p_aero = aero_power(p.v_wind, state.omega_r, &p.aero);
    let domega = (p_aero - pe) / (2.0 * p.h_d * state.omega_r.max(p.omega_floor));

    DfigOutput {
        deriv: [domega, de.re, de.im, p_cmd - pe, q_cmd - qe, ip_ref - i_p, ir_ref - i_r],
        current: i,
        p: pe,
        q: qe,
        p_aero,
        saturated,
    }
}

/// Back-solves a turbine at rest for terminal voltage `v` and per-turbine
/// output `s_turbine` (turbine base) on the MPPT curve.
pub fn dfig_init(s_turbine: Complex64, v: Complex64, p: &DfigParams) -> Result<DfigState, WindError> {
    p.validate()?;
    let vm = v.norm();
    if vm == 0.0 {
        return Err(WindError::ZeroVoltage);
    }
    let requested = s_turbine.re;
    let available = p.aero.available(p.v_wind);
    let tol = 1e-9 * available.max(1.0);
    if requested > available + tol || requested > 1.0 + tol {
        return Err(WindError::ExceedsAvailable { requested, available: available.min(1.0) });
    }
    if (requested - available).abs() > tol {
        return Err(WindError::OffMpptCurve { requested, available });
    }
    let omega_r = (requested.max(0.0) / p.aero.k_opt()).cbrt();

    let i = (s_turbine / v).conj();
    let e_t = v + p.stator_impedance() * i;
    let u = v / vm;
    let iu = i * u.conj();
    let (i_p, i_r) = (iu.re, -iu.im);
    let j = Complex64::new(0.0, 1.0);
    let x_diff = p.xs - p.transient_reactance();
    let c = (e_t + j * x_diff * i) / (p.open_circuit_time_constant() * p.omega_b * u);
    Ok(DfigState {
        omega_r,
        e_t,
        pi: [i_p / p.ki[0], i_r / p.ki[1], c.im / p.ki[2], c.re / p.ki[3]],
    })
}
