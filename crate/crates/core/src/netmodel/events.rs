use super::{load_to_admittance, NetError, Network, PowerFlowSolution, YMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A disturbance applied during simulation. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Scales the constant-admittance load at `bus` by `1 + fraction`.
    LoadStep { bus: u32, fraction: f64, t: f64 },
    /// Disconnects synchronous unit `unit` (index into the generator list).
    GeneratorTrip { unit: usize, t: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::LoadStep { t, .. } | Event::GeneratorTrip { t, .. } => *t,
        }
    }
}

/// Network as seen by the dynamic simulation: branch admittances plus
/// constant-admittance loads fixed at the power-flow operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub ybus: YMatrix,
    pub load_admittance: Vec<Complex64>,
    pub unit_online: Vec<bool>,
}

impl NetworkState {
    pub fn from_power_flow(net: &Network, pf: &PowerFlowSolution, n_units: usize) -> Result<Self, NetError> {
        let load_admittance = net
            .buses
            .iter()
            .zip(pf.voltages.iter())
            .map(|(b, v)| load_to_admittance(b.p_load, b.q_load, *v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ybus: pf.ybus.clone(), load_admittance, unit_online: vec![true; n_units] })
    }

    pub fn bus_index(&self, id: u32) -> Result<usize, NetError> {
        self.ybus.bus_ids.iter().position(|&b| b == id).ok_or(NetError::UnknownBus(id))
    }

    /// Real block form of `Y + diag(y_load * load_scale)`.
    ///
    /// `load_scale` carries the optional frequency sensitivity of the loads.
    pub fn real_admittance(&self, load_scale: f64) -> DMatrix<f64> {
        let n = self.ybus.dim();
        let mut g = self.ybus.real_form();
        for (i, yl) in self.load_admittance.iter().enumerate() {
            let yl = yl * load_scale;
            g[(i, i)] += yl.re;
            g[(i, n + i)] -= yl.im;
            g[(n + i, i)] += yl.im;
            g[(n + i, n + i)] += yl.re;
        }
        g
    }
}

/// Returns the network state after `event`.
pub fn apply_event(state: &NetworkState, event: &Event) -> Result<NetworkState, NetError> {
    let mut next = state.clone();
    match *event {
        Event::LoadStep { bus, fraction, .. } => {
            let i = state.bus_index(bus)?;
            next.load_admittance[i] = state.load_admittance[i] * (1.0 + fraction);
        }
        Event::GeneratorTrip { unit, .. } => {
            let slot = next.unit_online.get_mut(unit).ok_or(NetError::UnknownUnit(unit))?;
            *slot = false;
        }
    }
    Ok(next)
}
