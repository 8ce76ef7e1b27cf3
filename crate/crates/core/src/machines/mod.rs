//! One-axis synchronous machine with an IEEE Type-1 exciter and an IEESGO
//! steam governor.
//!
//! Machine quantities are per unit on the unit's own MVA base, except the
//! speed `omega`, which is electrical rad/s. The governor speed input carries
//! an additive coordination offset `u_c` (rad/s).

use num_complex::Complex64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MachineError {
    #[error("invalid machine parameter: {0}")]
    BadParameter(&'static str),
    #[error("machine terminal voltage is zero")]
    ZeroVoltage,
    #[error("exciter gain KA is zero; the regulator cannot hold the required field voltage")]
    ZeroRegulatorGain,
    #[error("required field voltage {efd:.4} pu is outside [0, {ceiling}]")]
    FieldVoltage { efd: f64, ceiling: f64 },
    #[error("required power setpoint {pc:.4} pu is outside governor limits [{pmin}, {pmax}]")]
    PowerSetpoint { pc: f64, pmin: f64, pmax: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgParams {
    pub h: f64,
    pub xd: f64,
    pub xq: f64,
    pub xd_t: f64,
    pub xq_t: f64,
    pub tdo_t: f64,
    pub t_fw: f64,
    pub mva_base: f64,
    pub omega_s: f64,
}

impl SgParams {
    pub fn validate(&self) -> Result<(), MachineError> {
        if !(self.h > 0.0) {
            return Err(MachineError::BadParameter("H must be positive"));
        }
        if !(self.tdo_t > 0.0) {
            return Err(MachineError::BadParameter("Tdo' must be positive"));
        }
        if !(self.xd_t > 0.0 && self.xd >= self.xd_t) {
            return Err(MachineError::BadParameter("need Xd >= Xd' > 0"));
        }
        if !(self.xq > 0.0 && self.mva_base > 0.0 && self.omega_s > 0.0) {
            return Err(MachineError::BadParameter("Xq, MVA base and synchronous speed must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExciterParams {
    pub ka: f64,
    pub ta: f64,
    pub ke: f64,
    pub te: f64,
    pub kf: f64,
    pub tf: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub efd_ceiling: f64,
    /// Voltage reference, set at initialization.
    pub vref: f64,
}

impl ExciterParams {
    pub fn validate(&self) -> Result<(), MachineError> {
        if !(self.ta > 0.0 && self.te > 0.0 && self.tf > 0.0) {
            return Err(MachineError::BadParameter("exciter TA, TE, TF must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GovernorParams {
    pub k1: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    /// Power setpoint, set at initialization.
    pub pc: f64,
    pub pmin: f64,
    pub pmax: f64,
}

impl GovernorParams {
    pub fn validate(&self) -> Result<(), MachineError> {
        if !(self.t1 > 0.0 && self.t3 > 0.0 && self.t4 > 0.0) {
            return Err(MachineError::BadParameter("governor T1, T3, T4 must be positive"));
        }
        if !(self.pmin <= self.pmax) {
            return Err(MachineError::BadParameter("governor Pmin must not exceed Pmax"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgUnitParams {
    pub machine: SgParams,
    pub exciter: ExciterParams,
    pub governor: GovernorParams,
}

impl SgUnitParams {
    pub fn validate(&self) -> Result<(), MachineError> {
        self.machine.validate()?;
        self.exciter.validate()?;
        self.governor.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgState {
    pub delta: f64,
    pub omega: f64,
    pub eq_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterState {
    pub efd: f64,
    pub vr: f64,
    pub rf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorState {
    pub y1: f64,
    pub y3: f64,
    pub tm: f64,
}

/// Number of differential states of one unit.
pub const SG_STATES: usize = 9;

/// Full unit state in the order `delta, omega, eq_t, efd, vr, rf, y1, y3, tm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgUnitState {
    pub sg: SgState,
    pub exciter: ExciterState,
    pub governor: GovernorState,
}

impl SgUnitState {
    pub fn to_array(&self) -> [f64; SG_STATES] {
        let (s, e, g) = (self.sg, self.exciter, self.governor);
        [s.delta, s.omega, s.eq_t, e.efd, e.vr, e.rf, g.y1, g.y3, g.tm]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            sg: SgState { delta: x[0], omega: x[1], eq_t: x[2] },
            exciter: ExciterState { efd: x[3], vr: x[4], rf: x[5] },
            governor: GovernorState { y1: x[6], y3: x[7], tm: x[8] },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgInputs {
    pub id: f64,
    pub iq: f64,
    /// Terminal voltage magnitude.
    pub vt: f64,
    /// Governor speed-reference offset, rad/s.
    pub u_c: f64,
}

/// `(Id, Iq)` on machine base from the terminal voltage phasor.
pub fn stator_currents(sg: &SgState, v: Complex64, p: &SgParams) -> (f64, f64) {
    let (vd, vq) = park(sg.delta, v);
    ((sg.eq_t - vq) / p.xd_t, vd / p.xq)
}

/// `(Vd, Vq)` of a network-frame phasor for rotor angle `delta`.
pub fn park(delta: f64, v: Complex64) -> (f64, f64) {
    let (vm, theta) = v.to_polar();
    (vm * (delta - theta).sin(), vm * (delta - theta).cos())
}

/// Network-frame phasor from `(d, q)` components.
pub fn inverse_park(delta: f64, d: f64, q: f64) -> Complex64 {
    Complex64::new(d, q) * Complex64::from_polar(1.0, delta - std::f64::consts::FRAC_PI_2)
}

pub fn electrical_torque(eq_t: f64, id: f64, iq: f64, p: &SgParams) -> f64 {
    eq_t * iq + (p.xq - p.xd_t) * id * iq
}

pub fn exciter_saturation(efd: f64, se_a: f64, se_b: f64) -> f64 {
    se_a * (se_b * efd.abs()).exp()
}

/// Output limiter: `pc - y2` is `pc - y2i` clamped into `[pmin, pmax]`.
pub fn governor_limiter(y2i: f64, pc: f64, pmin: f64, pmax: f64) -> f64 {
    let demand = pc - y2i;
    if pmin > demand {
        pc - pmin
    } else if pmax < demand {
        pc - pmax
    } else {
        y2i
    }
}

pub fn exciter_derivatives(e: &ExciterState, vt: f64, p: &ExciterParams) -> [f64; 3] {
    let se = exciter_saturation(e.efd, p.se_a, p.se_b);
    let kf_tf = p.kf / p.tf;
    [
        (-(p.ke + se) * e.efd + e.vr) / p.te,
        (-e.vr + p.ka * (e.rf - kf_tf * e.efd + p.vref - vt)) / p.ta,
        (-e.rf + kf_tf * e.efd) / p.tf,
    ]
}

/// IEESGO derivatives for speed `omega` (rad/s) and offset `u_c` (rad/s).
pub fn governor_derivatives(g: &GovernorState, omega: f64, u_c: f64, omega_s: f64, p: &GovernorParams) -> [f64; 3] {
    let y2i = (1.0 - p.t2 / p.t3) * g.y3 + (p.t2 / p.t3) * g.y1;
    let y2 = governor_limiter(y2i, p.pc, p.pmin, p.pmax);
    [
        (-g.y1 + p.k1 * (omega - omega_s + u_c) / omega_s) / p.t1,
        (-g.y3 + g.y1) / p.t3,
        (-g.tm + p.pc - y2) / p.t4,
    ]
}

/// Time derivatives in the order of [`SgUnitState::to_array`].
pub fn sg_derivatives(x: &SgUnitState, inputs: &SgInputs, p: &SgUnitParams) -> [f64; SG_STATES] {
    let m = &p.machine;
    let s = &x.sg;
    let te = electrical_torque(s.eq_t, inputs.id, inputs.iq, m);
    let exc = exciter_derivatives(&x.exciter, inputs.vt, &p.exciter);
    let gov = governor_derivatives(&x.governor, s.omega, inputs.u_c, m.omega_s, &p.governor);
    [
        s.omega - m.omega_s,
        (x.governor.tm - te - m.t_fw) * m.omega_s / (2.0 * m.h),
        (-s.eq_t - (m.xd - m.xd_t) * inputs.id + x.exciter.efd) / m.tdo_t,
        exc[0],
        exc[1],
        exc[2],
        gov[0],
        gov[1],
        gov[2],
    ]
}

/// Converts a complex power from system base to machine base.
pub fn to_machine_base(s_system: Complex64, system_mva: f64, machine_mva: f64) -> Complex64 {
    s_system * (system_mva / machine_mva)
}

/// Stator current injection as an affine function of the terminal voltage,
/// on the system base: `I = source + G [Vr, Vi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NortonBlock {
    pub source: Complex64,
    pub g: [[f64; 2]; 2],
}

impl NortonBlock {
    pub fn current(&self, v: Complex64) -> Complex64 {
        Complex64::new(
            self.source.re + self.g[0][0] * v.re + self.g[0][1] * v.im,
            self.source.im + self.g[1][0] * v.re + self.g[1][1] * v.im,
        )
    }
}

/// Machine current injected into the network, system base.
pub fn stator_injection(sg: &SgState, v: Complex64, p: &SgParams, system_mva: f64) -> Complex64 {
    let (id, iq) = stator_currents(sg, v, p);
    inverse_park(sg.delta, id, iq) * (p.mva_base / system_mva)
}

/// The stator relations are linear in `(Vr, Vi)` for fixed `delta` and
/// `E'q`, so the block is read off from three evaluations.
pub fn norton_block(sg: &SgState, p: &SgParams, system_mva: f64) -> NortonBlock {
    let (sd, cd) = sg.delta.sin_cos();
    let scale = p.mva_base / system_mva;
    // Vd = Vr sin(d) - Vi cos(d), Vq = Vr cos(d) + Vi sin(d)
    let current = |vd: f64, vq: f64, eq: f64| inverse_park(sg.delta, (eq - vq) / p.xd_t, vd / p.xq) * scale;
    let source = current(0.0, 0.0, sg.eq_t);
    let dr = current(sd, cd, 0.0);
    let di = current(-cd, sd, 0.0);
    NortonBlock { source, g: [[dr.re, di.re], [dr.im, di.im]] }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgInit {
    pub state: SgUnitState,
    pub vref: f64,
    pub pc: f64,
}

/// Back-solves a unit at rest from its power-flow terminal voltage and
/// generation `s_gen` (system base).
pub fn sg_init_from_powerflow(
    v: Complex64,
    s_gen: Complex64,
    p: &SgUnitParams,
    system_mva: f64,
) -> Result<SgInit, MachineError> {
    p.validate()?;
    let m = &p.machine;
    if v.norm() == 0.0 {
        return Err(MachineError::ZeroVoltage);
    }
    let s = to_machine_base(s_gen, system_mva, m.mva_base);
    let i = (s / v).conj();
    let delta = (v + Complex64::new(0.0, m.xq) * i).arg();
    let rot = Complex64::from_polar(1.0, -(delta - std::f64::consts::FRAC_PI_2));
    let idq = i * rot;
    let vdq = v * rot;
    let (id, iq) = (idq.re, idq.im);
    let eq_t = vdq.im + m.xd_t * id;
    let efd = eq_t + (m.xd - m.xd_t) * id;

    let e = &p.exciter;
    if !(0.0..=e.efd_ceiling).contains(&efd) {
        return Err(MachineError::FieldVoltage { efd, ceiling: e.efd_ceiling });
    }
    if e.ka == 0.0 {
        return Err(MachineError::ZeroRegulatorGain);
    }
    let vr = (e.ke + exciter_saturation(efd, e.se_a, e.se_b)) * efd;
    let rf = e.kf / e.tf * efd;
    let vt = v.norm();
    let vref = vt + vr / e.ka;

    let tm = electrical_torque(eq_t, id, iq, m) + m.t_fw;
    let g = &p.governor;
    let pc = tm;
    if !(g.pmin..=g.pmax).contains(&pc) {
        return Err(MachineError::PowerSetpoint { pc, pmin: g.pmin, pmax: g.pmax });
    }
    Ok(SgInit {
        state: SgUnitState {
            sg: SgState { delta, omega: m.omega_s, eq_t },
            exciter: ExciterState { efd, vr, rf },
            governor: GovernorState { y1: 0.0, y3: 0.0, tm },
        },
        vref,
        pc,
    })
}

impl SgInit {
    /// Parameters with the initialization setpoints filled in.
    pub fn apply(&self, p: &SgUnitParams) -> SgUnitParams {
        let mut out = p.clone();
        out.exciter.vref = self.vref;
        out.governor.pc = self.pc;
        out
    }
}
