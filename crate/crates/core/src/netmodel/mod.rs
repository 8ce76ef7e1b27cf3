//! Electrical network: buses, branches, nodal admittance, steady-state power
//! flow and the constant-admittance network state used during simulation.

mod events;
mod powerflow;
mod ybus;

pub use events::{apply_event, Event, NetworkState};
pub use powerflow::{solve_power_flow, PowerFlowSolution};
pub use ybus::{build_ybus, YMatrix};

use crate::casefile::{CaseFile, CaseFileError};
use num_complex::Complex64;
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Parse(#[from] CaseFileError),
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("branch {from}-{to} references unknown bus {missing}")]
    UnknownBranchBus { from: u32, to: u32, missing: u32 },
    #[error("branch {from}-{to} connects a bus to itself")]
    SelfLoop { from: u32, to: u32 },
    #[error("branch {from}-{to} has zero series impedance")]
    ZeroImpedance { from: u32, to: u32 },
    #[error("branch {from}-{to} has non-positive tap ratio {tap}")]
    BadTap { from: u32, to: u32, tap: f64 },
    #[error("bus {id}: voltage magnitude must be positive, got {vm}")]
    BadVoltage { id: u32, vm: f64 },
    #[error("network must have exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("unknown bus {0}")]
    UnknownBus(u32),
    #[error("unknown generator unit {0}")]
    UnknownUnit(usize),
    #[error("power flow did not converge in {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("cannot convert load at zero voltage")]
    ZeroVoltage,
    #[error("power-flow tolerance must be positive")]
    BadTolerance,
    #[error("unknown bus kind `{kind}` on line {line}")]
    BadBusKind { line: usize, kind: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

impl std::str::FromStr for BusKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "slack" | "ref" | "swing" => Ok(BusKind::Slack),
            "pv" => Ok(BusKind::Pv),
            "pq" => Ok(BusKind::Pq),
            _ => Err(()),
        }
    }
}

/// A network bus. Powers are per-unit on the system base; generation is
/// positive into the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub voltage_magnitude: f64,
    /// radians
    pub voltage_angle: f64,
    pub p_load: f64,
    pub q_load: f64,
    pub p_gen_setpoint: f64,
    pub q_gen: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub series_impedance: Complex64,
    /// Total line charging susceptance, split half per end.
    pub shunt_susceptance: f64,
    /// Off-nominal turns ratio on the from side.
    pub tap_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub base_mva: f64,
    pub f_nominal_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

/// The bundled WSCC 9-bus case.
pub const WSCC9_CASE: &str = include_str!("../../data/wscc9.net");

impl Network {
    pub fn wscc9() -> Self {
        Self::parse(WSCC9_CASE).expect("bundled 9-bus case is valid")
    }

    /// Parses the `[system]`, `[bus]` and `[branch]` sections.
    ///
    /// Bus records: `id kind vm va_rad p_load q_load p_gen q_gen`.
    /// Branch records: `from to r x b_total [tap]`.
    pub fn parse(text: &str) -> Result<Self, NetError> {
        let cf = CaseFile::parse(text)?;
        let (base_mva, f_nominal_hz) = match cf.section("system") {
            Some(s) => {
                let kv = s.key_values()?;
                (kv.get_or("base_mva", 100.0)?, kv.get_or("f_nominal_hz", 60.0)?)
            }
            None => (100.0, 60.0),
        };
        let mut buses = Vec::new();
        for rec in cf.require("bus")?.records() {
            rec.expect_len(8, 8)?;
            let kind_text = rec.fields[1];
            let kind = kind_text
                .parse()
                .map_err(|_| NetError::BadBusKind { line: rec.line, kind: kind_text.to_string() })?;
            buses.push(Bus {
                id: rec.get(0, "id")?,
                kind,
                voltage_magnitude: rec.get(2, "vm")?,
                voltage_angle: rec.get(3, "va")?,
                p_load: rec.get(4, "p_load")?,
                q_load: rec.get(5, "q_load")?,
                p_gen_setpoint: rec.get(6, "p_gen")?,
                q_gen: rec.get(7, "q_gen")?,
            });
        }
        let mut branches = Vec::new();
        if let Some(sec) = cf.section("branch") {
            for rec in sec.records() {
                rec.expect_len(5, 6)?;
                branches.push(Branch {
                    from_bus: rec.get(0, "from")?,
                    to_bus: rec.get(1, "to")?,
                    series_impedance: Complex64::new(rec.get(2, "r")?, rec.get(3, "x")?),
                    shunt_susceptance: rec.get(4, "b")?,
                    tap_ratio: rec.get_or(5, "tap", 1.0)?,
                });
            }
        }
        let net = Self { base_mva, f_nominal_hz, buses, branches };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let idx = self.index_map()?;
        for b in &self.buses {
            if !(b.voltage_magnitude > 0.0) {
                return Err(NetError::BadVoltage { id: b.id, vm: b.voltage_magnitude });
            }
        }
        let slack = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 {
            return Err(NetError::SlackCount(slack));
        }
        for br in &self.branches {
            check_branch(br, &idx)?;
        }
        Ok(())
    }

    pub fn index_map(&self) -> Result<HashMap<u32, usize>, NetError> {
        let mut map = HashMap::with_capacity(self.buses.len());
        for (i, b) in self.buses.iter().enumerate() {
            if map.insert(b.id, i).is_some() {
                return Err(NetError::DuplicateBus(b.id));
            }
        }
        Ok(map)
    }

    pub fn bus_index(&self, id: u32) -> Result<usize, NetError> {
        self.buses.iter().position(|b| b.id == id).ok_or(NetError::UnknownBus(id))
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Slack)
    }
}

fn check_branch(br: &Branch, idx: &HashMap<u32, usize>) -> Result<(), NetError> {
    let (from, to) = (br.from_bus, br.to_bus);
    for id in [from, to] {
        if !idx.contains_key(&id) {
            return Err(NetError::UnknownBranchBus { from, to, missing: id });
        }
    }
    if from == to {
        return Err(NetError::SelfLoop { from, to });
    }
    if br.series_impedance.norm() == 0.0 {
        return Err(NetError::ZeroImpedance { from, to });
    }
    if !(br.tap_ratio > 0.0) {
        return Err(NetError::BadTap { from, to, tap: br.tap_ratio });
    }
    Ok(())
}

/// Constant-admittance equivalent of a load drawing `p + jq` at `|v|`.
pub fn load_to_admittance(p_load: f64, q_load: f64, v_solved: Complex64) -> Result<Complex64, NetError> {
    let vm2 = v_solved.norm_sqr();
    if vm2 == 0.0 {
        return Err(NetError::ZeroVoltage);
    }
    Ok(Complex64::new(p_load, -q_load) / vm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_case_parses() {
        let net = Network::wscc9();
        assert_eq!(net.buses.len(), 9);
        assert_eq!(net.branches.len(), 9);
        assert_eq!(net.base_mva, 100.0);
        assert_eq!(net.f_nominal_hz, 60.0);
        let b8 = &net.buses[net.bus_index(8).unwrap()];
        assert_eq!((b8.p_load, b8.q_load), (1.0, 0.35));
    }

    #[test]
    fn rejects_two_slack_buses() {
        let text = "[bus]\n1 slack 1 0 0 0 0 0\n2 slack 1 0 0 0 0 0\n";
        assert!(matches!(Network::parse(text), Err(NetError::SlackCount(2))));
    }

    #[test]
    fn rejects_duplicate_bus_and_unknown_branch_bus() {
        let dup = "[bus]\n1 slack 1 0 0 0 0 0\n1 pq 1 0 0 0 0 0\n";
        assert!(matches!(Network::parse(dup), Err(NetError::DuplicateBus(1))));
        let unknown = "[bus]\n1 slack 1 0 0 0 0 0\n[branch]\n1 5 0 0.1 0\n";
        assert!(matches!(Network::parse(unknown), Err(NetError::UnknownBranchBus { missing: 5, .. })));
    }

    #[test]
    fn rejects_zero_impedance_and_bad_kind() {
        let z0 = "[bus]\n1 slack 1 0 0 0 0 0\n2 pq 1 0 0 0 0 0\n[branch]\n1 2 0 0 0\n";
        assert!(matches!(Network::parse(z0), Err(NetError::ZeroImpedance { .. })));
        let kind = "[bus]\n1 slack 1 0 0 0 0 0\n2 load 1 0 0 0 0 0\n";
        assert!(matches!(Network::parse(kind), Err(NetError::BadBusKind { line: 3, .. })));
    }

    #[test]
    fn load_admittance_examples() {
        let y = load_to_admittance(1.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(y, Complex64::new(1.0, 0.0));
        let y0 = load_to_admittance(0.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(y0, Complex64::new(0.0, 0.0));
        let v = Complex64::from_polar(0.996, -0.07);
        let y = load_to_admittance(1.0, 0.35, v).unwrap();
        // S = V (yV)* = |V|^2 y*
        let s = v * (y * v).conj();
        assert!((s.re - 1.0).abs() < 1e-12 && (s.im - 0.35).abs() < 1e-12);
        assert!(matches!(load_to_admittance(1.0, 0.0, Complex64::new(0.0, 0.0)), Err(NetError::ZeroVoltage)));
    }

    proptest! {
        #[test]
        fn load_admittance_round_trip(p in -5.0f64..5.0, q in -5.0f64..5.0, vm in 0.5f64..1.5, va in -3.0f64..3.0) {
            let v = Complex64::from_polar(vm, va);
            let y = load_to_admittance(p, q, v).unwrap();
            let s = v * (y * v).conj();
            prop_assert!((s.re - p).abs() < 1e-12);
            prop_assert!((s.im - q).abs() < 1e-12);
        }
    }
}
