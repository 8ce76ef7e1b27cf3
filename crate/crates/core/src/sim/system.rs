use super::{ControllerMode, CoordinationPolicy, SimConfig, SimError};
use crate::machines::{
    norton_block, sg_derivatives, sg_init_from_powerflow, stator_currents, NortonBlock, SgInputs, SgUnitParams,
    SgUnitState, SG_STATES,
};
use crate::netmodel::{solve_power_flow, Event, Network, NetworkState, PowerFlowSolution};
use crate::params::{DeviceData, Profile};
use crate::windfarm::{
    dfig_derivatives, dfig_init, dfig_norton, frequency_meter_output, frequency_meter_rhs, mppt_reference,
    washout_output, washout_rhs, DfigParams, DfigState, FrequencySource, WashoutParams, DFIG_STATES,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Offsets of each block in the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_units: usize,
    pub farm: usize,
    pub washout: usize,
    pub meter: usize,
    pub uc: usize,
    pub area: usize,
    pub len: usize,
}

impl StateLayout {
    pub fn new(n_units: usize) -> Self {
        let farm = n_units * SG_STATES;
        let washout = farm + DFIG_STATES;
        Self { n_units, farm, washout, meter: washout + 1, uc: washout + 2, area: washout + 3, len: washout + 4 }
    }

    pub fn unit(&self, i: usize) -> std::ops::Range<usize> {
        i * SG_STATES..(i + 1) * SG_STATES
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len);
        for i in 1..=self.n_units {
            for s in ["delta", "omega", "eq_t", "efd", "vr", "rf", "y1", "y3", "tm"] {
                out.push(format!("{s}_sg{i}"));
            }
        }
        for s in ["omega_r", "e_re", "e_im", "x_p", "x_q", "x_ip", "x_ir", "washout", "meter", "uc", "area"] {
            out.push(s.to_string());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FarmModel {
    pub bus: usize,
    pub bus_id: u32,
    pub dfig: DfigParams,
    pub washout: WashoutParams,
    pub t_filter: f64,
    pub measurement: FrequencySource,
}

pub const PF_TOLERANCE: f64 = 1e-11;
pub const PF_MAX_ITER: usize = 10;

/// Adds the farm's MPPT output at the rated wind speed to the bus dispatch.
/// Returns the network, the farm parameters and the per-turbine output.
pub fn farm_dispatch(mut network: Network, devices: &DeviceData) -> Result<(Network, DfigParams, f64), SimError> {
    let mut dfig = devices.windfarm.dfig.clone();
    dfig.omega_b = crate::synchronous_speed(network.f_nominal_hz);
    dfig.validate()?;
    let scale = dfig.farm_scale(network.base_mva);
    let farm_bus = network.bus_index(devices.windfarm.bus)?;
    let p_turbine = dfig.aero.available(dfig.v_wind).min(1.0);
    network.buses[farm_bus].p_gen_setpoint += p_turbine * scale;
    network.buses[farm_bus].q_gen += dfig.q_ref * scale;
    Ok((network, dfig, p_turbine))
}

/// An initialized system at rest at its power-flow operating point.
#[derive(Debug, Clone)]
pub struct PowerSystem {
    /// Network with the farm injection included in the dispatch.
    pub network: Network,
    pub power_flow: PowerFlowSolution,
    pub base_state: NetworkState,
    /// Unit parameters with setpoints from initialization.
    pub units: Vec<SgUnitParams>,
    pub unit_bus: Vec<usize>,
    pub farm: FarmModel,
    pub layout: StateLayout,
    pub x0: Vec<f64>,
    pub omega_s: f64,
    pub f_nominal: f64,
    pub system_mva: f64,
}

impl PowerSystem {
    pub fn wscc9(profile: &Profile) -> Result<Self, SimError> {
        let net = Network::wscc9();
        let devices = DeviceData::wscc9(net.f_nominal_hz);
        Self::build(net, &devices, profile)
    }

    /// Adds the farm output to the dispatch, solves the power flow and
    /// initializes every device.
    pub fn build(network: Network, devices: &DeviceData, profile: &Profile) -> Result<Self, SimError> {
        let f_nominal = network.f_nominal_hz;
        let omega_s = crate::synchronous_speed(f_nominal);
        let system_mva = network.base_mva;
        let (network, dfig, p_turbine) = farm_dispatch(network, devices)?;
        let scale = dfig.farm_scale(system_mva);
        let farm_bus = network.bus_index(devices.windfarm.bus)?;

        let pf = solve_power_flow(&network, PF_TOLERANCE, PF_MAX_ITER)?;
        let mut units = devices.sg_units(profile, omega_s)?;
        let layout = StateLayout::new(units.len());
        let mut x0 = vec![0.0; layout.len];
        let mut unit_bus = Vec::with_capacity(units.len());
        for (k, (unit, gen)) in units.iter_mut().zip(&devices.generators).enumerate() {
            let b = network.bus_index(gen.bus)?;
            let s_gen = pf.generation(&network, b)
                - if b == farm_bus { Complex64::new(p_turbine, dfig.q_ref) * scale } else { Complex64::new(0.0, 0.0) };
            let init = sg_init_from_powerflow(pf.voltages[b], s_gen, unit, system_mva)
                .map_err(|source| SimError::Machine { unit: k, bus: gen.bus, source })?;
            *unit = init.apply(unit);
            x0[layout.unit(k)].copy_from_slice(&init.state.to_array());
            unit_bus.push(b);
        }

        let v_farm = pf.voltages[farm_bus];
        let turbine = dfig_init(Complex64::new(p_turbine, dfig.q_ref), v_farm, &dfig)?;
        x0[layout.farm..layout.farm + DFIG_STATES].copy_from_slice(&turbine.to_array());
        x0[layout.meter] = v_farm.arg();

        let base_state = NetworkState::from_power_flow(&network, &pf, units.len())?;
        let washout = &devices.washout;
        Ok(Self {
            farm: FarmModel {
                bus: farm_bus,
                bus_id: devices.windfarm.bus,
                dfig,
                washout: WashoutParams { f_nominal_hz: f_nominal, ..washout.params.clone() },
                t_filter: washout.t_filter,
                measurement: washout.measurement,
            },
            network,
            power_flow: pf,
            base_state,
            units,
            unit_bus,
            layout,
            x0,
            omega_s,
            f_nominal,
            system_mva,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.network.buses.len()
    }

    /// Sum of governor gains on the system base for online units.
    pub fn droop_gain(&self, online: &[bool]) -> f64 {
        self.units
            .iter()
            .zip(online)
            .filter(|(_, on)| **on)
            .map(|(u, _)| u.governor.k1 * u.machine.mva_base / self.system_mva)
            .sum()
    }

    /// Steady-state frequency predicted from aggregate droop for the
    /// disturbances applied so far.
    pub fn droop_frequency(&self, applied: &[Event], online: &[bool]) -> f64 {
        let mut dp = 0.0;
        for ev in applied {
            match *ev {
                Event::LoadStep { bus, fraction, .. } => {
                    if let Ok(i) = self.network.bus_index(bus) {
                        dp += fraction * self.network.buses[i].p_load;
                    }
                }
                Event::GeneratorTrip { unit, .. } => {
                    if let Some(u) = self.units.get(unit) {
                        dp += u.governor.pc * u.machine.mva_base / self.system_mva;
                    }
                }
            }
        }
        let k = self.droop_gain(online);
        if k > 0.0 {
            self.f_nominal * (1.0 - dp / k)
        } else {
            self.f_nominal
        }
    }
}

/// Network conditions between two events.
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub state: NetworkState,
    pub y_real: DMatrix<f64>,
    pub f_target: f64,
}

impl Segment {
    pub fn new(sys: &PowerSystem, state: NetworkState, applied: &[Event]) -> Self {
        let f_target = sys.droop_frequency(applied, &state.unit_online);
        Self { y_real: state.real_admittance(1.0), state, f_target }
    }
}

/// Algebraic outputs of one derivative evaluation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Outputs {
    pub v: Vec<Complex64>,
    pub omega_coi: f64,
    /// Farm totals on the system base.
    pub p_farm: f64,
    pub q_farm: f64,
    pub p_aero: f64,
    pub delta_p: f64,
    /// Washout controller output on the turbine base.
    pub delta_p_wt: f64,
    pub saturated: bool,
}

pub(crate) fn stamp(a: &mut DMatrix<f64>, rhs: &mut DVector<f64>, n: usize, bus: usize, blk: &NortonBlock) {
    a[(bus, bus)] -= blk.g[0][0];
    a[(bus, n + bus)] -= blk.g[0][1];
    a[(n + bus, bus)] -= blk.g[1][0];
    a[(n + bus, n + bus)] -= blk.g[1][1];
    rhs[bus] += blk.source.re;
    rhs[n + bus] += blk.source.im;
}

pub(crate) fn coi_speed(sys: &PowerSystem, x: &[f64], online: &[bool]) -> Result<f64, SimError> {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, u) in sys.units.iter().enumerate() {
        if online[k] {
            let w = u.machine.h * u.machine.mva_base;
            num += w * x[sys.layout.unit(k).start + 1];
            den += w;
        }
    }
    if den == 0.0 {
        return Err(SimError::NoMachines);
    }
    Ok(num / den)
}

/// Evaluates `dx/dt` at `(t, x)`, writing into `dx`.
pub(crate) fn evaluate(
    sys: &PowerSystem,
    seg: &Segment,
    cfg: &SimConfig,
    policy: Option<&dyn CoordinationPolicy>,
    t: f64,
    x: &[f64],
    dx: &mut [f64],
) -> Result<Outputs, SimError> {
    let lay = &sys.layout;
    let n = sys.n_bus();
    let online = &seg.state.unit_online;
    let omega_coi = coi_speed(sys, x, online)?;

    let mut a = seg.y_real.clone();
    if cfg.load_damping != 0.0 {
        let extra = cfg.load_damping * (omega_coi - sys.omega_s) / sys.omega_s;
        for (i, yl) in seg.state.load_admittance.iter().enumerate() {
            let yl = yl * extra;
            a[(i, i)] += yl.re;
            a[(i, n + i)] -= yl.im;
            a[(n + i, i)] += yl.im;
            a[(n + i, n + i)] += yl.re;
        }
    }
    let mut rhs = DVector::zeros(2 * n);
    let mut units = Vec::with_capacity(lay.n_units);
    for k in 0..lay.n_units {
        let s = SgUnitState::from_slice(&x[lay.unit(k)]);
        if online[k] {
            let blk = norton_block(&s.sg, &sys.units[k].machine, sys.system_mva);
            stamp(&mut a, &mut rhs, n, sys.unit_bus[k], &blk);
        }
        units.push(s);
    }
    let turbine = DfigState::from_slice(&x[lay.farm..lay.farm + DFIG_STATES]);
    let farm = &sys.farm;
    stamp(&mut a, &mut rhs, n, farm.bus, &dfig_norton(&turbine, &farm.dfig, sys.system_mva));

    let sol = a.lu().solve(&rhs).ok_or(SimError::SingularNetwork { t })?;
    let v: Vec<Complex64> = (0..n).map(|i| Complex64::new(sol[i], sol[n + i])).collect();

    let uc_pu = x[lay.uc];
    for k in 0..lay.n_units {
        let r = lay.unit(k);
        if !online[k] {
            dx[r].fill(0.0);
            continue;
        }
        let vb = v[sys.unit_bus[k]];
        let p = &sys.units[k];
        let (id, iq) = stator_currents(&units[k].sg, vb, &p.machine);
        let inputs = SgInputs { id, iq, vt: vb.norm(), u_c: -sys.omega_s * uc_pu };
        dx[r].copy_from_slice(&sg_derivatives(&units[k], &inputs, p));
    }

    let vf = v[farm.bus];
    let df_pu = match farm.measurement {
        FrequencySource::Bus => frequency_meter_output(x[lay.meter], vf.arg(), farm.t_filter, sys.omega_s),
        FrequencySource::Coi => (omega_coi - sys.omega_s) / sys.omega_s,
    };
    let xw = x[lay.washout];
    let dp_turbine = match cfg.mode {
        ControllerMode::None => 0.0,
        _ => washout_output(xw, df_pu, &farm.washout),
    };
    let p_cmd = mppt_reference(turbine.omega_r, farm.dfig.aero.k_opt()) + dp_turbine;
    let out = dfig_derivatives(&turbine, vf, p_cmd, farm.dfig.q_ref, &farm.dfig);
    dx[lay.farm..lay.farm + DFIG_STATES].copy_from_slice(&out.deriv);
    dx[lay.washout] = washout_rhs(xw, df_pu, &farm.washout);
    dx[lay.meter] = frequency_meter_rhs(x[lay.meter], vf.arg(), farm.t_filter);

    let scale = farm.dfig.farm_scale(sys.system_mva);
    let p_farm = out.p * scale;
    let f_coi = omega_coi / (2.0 * std::f64::consts::PI);
    dx[lay.area] = (seg.f_target - f_coi).max(0.0);

    dx[lay.uc] = match (cfg.mode, policy) {
        (ControllerMode::Coordinated, Some(pol)) => {
            let mut inputs = Vec::with_capacity(lay.n_units + 2);
            inputs.push(p_farm);
            for k in 0..lay.n_units {
                inputs.push(x[lay.unit(k).start + 1] / sys.omega_s);
            }
            inputs.push(x[lay.area]);
            let env = &cfg.envelope;
            let target = pol.evaluate(&inputs).clamp(-env.limit, env.limit);
            ((target - uc_pu) / env.tau).clamp(-env.rate, env.rate)
        }
        _ => 0.0,
    };

    Ok(Outputs {
        v,
        omega_coi,
        p_farm,
        q_farm: out.q * scale,
        p_aero: out.p_aero * scale,
        delta_p: dp_turbine * scale,
        delta_p_wt: dp_turbine,
        saturated: out.saturated,
    })
}
