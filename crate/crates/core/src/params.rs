//! Device data file: generator table, named exciter and governor presets,
//! wind farm and washout settings.

use crate::casefile::{CaseFile, CaseFileError, KeyValues};
use crate::machines::{ExciterParams, GovernorParams, SgParams, SgUnitParams};
use crate::windfarm::{AeroParams, DfigParams, FrequencySource, WashoutParams};
use std::collections::BTreeMap;

/// The bundled 9-bus device data.
pub const WSCC9_PARAMS: &str = include_str!("../data/wscc9.params");

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error(transparent)]
    Parse(#[from] CaseFileError),
    #[error("unknown {kind} preset `{name}` (available: {available})")]
    UnknownPreset { kind: &'static str, name: String, available: String },
    #[error("unknown profile `{0}` (expected `standard-wscc` or `appendix`)")]
    UnknownProfile(String),
    #[error("[washout] measurement: {0}")]
    BadMeasurement(String),
    #[error("duplicate generator at bus {0}")]
    DuplicateGenerator(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRecord {
    pub bus: u32,
    pub h: f64,
    pub xd: f64,
    pub xd_t: f64,
    pub xq: f64,
    pub xq_t: f64,
    pub tdo_t: f64,
    pub mva_base: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub t_fw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorGains {
    pub k1: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindFarmData {
    pub bus: u32,
    pub dfig: DfigParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WashoutData {
    pub params: WashoutParams,
    /// Frequency meter time constant, s.
    pub t_filter: f64,
    pub measurement: FrequencySource,
}

/// Preset pair used to build the synchronous units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub exciter: String,
    pub governor: String,
}

impl Profile {
    /// `standard-wscc` (alias `standard`) or `appendix`.
    pub fn named(name: &str) -> Result<Self, ParamError> {
        let preset = match name {
            "standard-wscc" | "standard" => "standard",
            "appendix" => "appendix",
            other => return Err(ParamError::UnknownProfile(other.to_string())),
        };
        Ok(Self { exciter: preset.into(), governor: preset.into() })
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self { exciter: "standard".into(), governor: "standard".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceData {
    pub generators: Vec<GeneratorRecord>,
    pub exciters: BTreeMap<String, ExciterParams>,
    pub governors: BTreeMap<String, GovernorGains>,
    pub windfarm: WindFarmData,
    pub washout: WashoutData,
}

impl DeviceData {
    pub fn wscc9(f_nominal_hz: f64) -> Self {
        Self::parse(WSCC9_PARAMS, f_nominal_hz).expect("bundled device data is valid")
    }

    pub fn parse(text: &str, f_nominal_hz: f64) -> Result<Self, ParamError> {
        let omega_s = crate::synchronous_speed(f_nominal_hz);
        let cf = CaseFile::parse(text)?;
        let mut generators: Vec<GeneratorRecord> = Vec::new();
        for r in cf.require("generator")?.records() {
            r.expect_len(10, 11)?;
            let g = GeneratorRecord {
                bus: r.get(0, "bus")?,
                h: r.get(1, "H")?,
                xd: r.get(2, "xd")?,
                xd_t: r.get(3, "xd_t")?,
                xq: r.get(4, "xq")?,
                xq_t: r.get(5, "xq_t")?,
                tdo_t: r.get(6, "tdo_t")?,
                mva_base: r.get(7, "mva")?,
                pmin: r.get(8, "pmin")?,
                pmax: r.get(9, "pmax")?,
                t_fw: r.get_or(10, "t_fw", 0.0)?,
            };
            if generators.iter().any(|o| o.bus == g.bus) {
                return Err(ParamError::DuplicateGenerator(g.bus));
            }
            generators.push(g);
        }

        let mut exciters = BTreeMap::new();
        let mut governors = BTreeMap::new();
        for sec in &cf.sections {
            if let Some(name) = sec.name.strip_prefix("exciter.") {
                let kv = sec.key_values()?;
                exciters.insert(
                    name.to_string(),
                    ExciterParams {
                        ka: kv.get("ka")?,
                        ta: kv.get("ta")?,
                        ke: kv.get("ke")?,
                        te: kv.get("te")?,
                        kf: kv.get("kf")?,
                        tf: kv.get("tf")?,
                        se_a: kv.get_or("se_a", 0.0039)?,
                        se_b: kv.get_or("se_b", 1.555)?,
                        efd_ceiling: kv.get_or("efd_ceiling", 5.0)?,
                        vref: 0.0,
                    },
                );
            } else if let Some(name) = sec.name.strip_prefix("governor.") {
                let kv = sec.key_values()?;
                governors.insert(
                    name.to_string(),
                    GovernorGains {
                        k1: kv.get("k1")?,
                        t1: kv.get("t1")?,
                        t2: kv.get("t2")?,
                        t3: kv.get("t3")?,
                        t4: kv.get("t4")?,
                    },
                );
            }
        }

        let kv = cf.require("windfarm")?.key_values()?;
        let windfarm = WindFarmData { bus: kv.get("bus")?, dfig: dfig_from(&kv, omega_s)? };

        let washout = match cf.section("washout") {
            Some(sec) => {
                let kv = sec.key_values()?;
                let measurement: String = kv.get_or("measurement", "bus".to_string())?;
                WashoutData {
                    params: WashoutParams {
                        k_w: kv.get_or("k_w", 10.0)?,
                        t_w: kv.get_or("t_w", 5.0)?,
                        deadband_hz: kv.get_or("deadband_hz", 0.0)?,
                        f_nominal_hz,
                    },
                    t_filter: kv.get_or("t_filter", 0.02)?,
                    measurement: measurement.parse().map_err(ParamError::BadMeasurement)?,
                }
            }
            None => WashoutData {
                params: WashoutParams { k_w: 10.0, t_w: 5.0, deadband_hz: 0.0, f_nominal_hz },
                t_filter: 0.02,
                measurement: FrequencySource::Bus,
            },
        };

        Ok(Self { generators, exciters, governors, windfarm, washout })
    }

    pub fn exciter(&self, name: &str) -> Result<&ExciterParams, ParamError> {
        self.exciters.get(name).ok_or_else(|| ParamError::UnknownPreset {
            kind: "exciter",
            name: name.to_string(),
            available: self.exciters.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    pub fn governor(&self, name: &str) -> Result<&GovernorGains, ParamError> {
        self.governors.get(name).ok_or_else(|| ParamError::UnknownPreset {
            kind: "governor",
            name: name.to_string(),
            available: self.governors.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    /// Unit parameters in generator-table order. Setpoints (`vref`, `pc`)
    /// are left at zero for initialization to fill in.
    pub fn sg_units(&self, profile: &Profile, omega_s: f64) -> Result<Vec<SgUnitParams>, ParamError> {
        let exc = self.exciter(&profile.exciter)?;
        let gov = self.governor(&profile.governor)?;
        Ok(self
            .generators
            .iter()
            .map(|g| SgUnitParams {
                machine: SgParams {
                    h: g.h,
                    xd: g.xd,
                    xq: g.xq,
                    xd_t: g.xd_t,
                    xq_t: g.xq_t,
                    tdo_t: g.tdo_t,
                    t_fw: g.t_fw,
                    mva_base: g.mva_base,
                    omega_s,
                },
                exciter: exc.clone(),
                governor: GovernorParams {
                    k1: gov.k1,
                    t1: gov.t1,
                    t2: gov.t2,
                    t3: gov.t3,
                    t4: gov.t4,
                    pc: 0.0,
                    pmin: g.pmin,
                    pmax: g.pmax,
                },
            })
            .collect())
    }
}

fn dfig_from(kv: &KeyValues, omega_s: f64) -> Result<DfigParams, CaseFileError> {
    let v_rated: f64 = kv.get_or("v_rated", 12.0)?;
    Ok(DfigParams {
        h_d: kv.get("h_d")?,
        xm: kv.get("xm")?,
        xs: kv.get("xs")?,
        xr: kv.get("xr")?,
        rs: kv.get_or("rs", 0.005)?,
        rr: kv.get_or("rr", 0.0055)?,
        k_p: kv.get_or("k_p", 0.0)?,
        k_i: kv.get_or("k_i", 0.0)?,
        kp: [kv.get("kp1")?, kv.get("kp2")?, kv.get("kp3")?, kv.get("kp4")?],
        ki: [kv.get("ki1")?, kv.get("ki2")?, kv.get("ki3")?, kv.get("ki4")?],
        n_turbines: kv.get("n_turbines")?,
        mva_base: kv.get("mva_base")?,
        q_ref: kv.get_or("q_ref", 0.0)?,
        v_wind: kv.get("v_wind")?,
        aero: AeroParams::calibrated(
            v_rated,
            kv.get_or("omega_rated", 1.2)?,
            kv.get_or("v_cal", 11.0)?,
            kv.get_or("p_cal", 0.7778)?,
        ),
        omega_b: omega_s,
        vr_max: kv.get_or("vr_max", f64::INFINITY)?,
        omega_floor: kv.get_or("omega_floor", 0.1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data() {
        let d = DeviceData::wscc9(60.0);
        assert_eq!(d.generators.len(), 3);
        let hs: Vec<f64> = d.generators.iter().map(|g| g.h).collect();
        assert_eq!(hs, vec![23.64, 6.4, 3.01]);
        let app = d.exciter("appendix").unwrap();
        assert_eq!((app.ka, app.ta, app.ke, app.te, app.kf, app.tf), (0.0, 20.0, -5.0, 1.0, 0.314, 0.063));
        let g = d.governor("appendix").unwrap();
        assert_eq!((g.k1, g.t1, g.t2, g.t3, g.t4), (30.0, 1.0, 0.3, 5.0, 12.0));
        let w = &d.windfarm.dfig;
        assert_eq!((w.h_d, w.xm, w.xs, w.xr), (1.23, 0.007, 3.37, 3.47));
        assert_eq!((w.kp, w.ki), ([1.0; 4], [5.0; 4]));
        assert_eq!(d.windfarm.bus, 8);
        assert_eq!(d.washout.measurement, FrequencySource::Bus);
    }

    #[test]
    fn profiles_and_presets() {
        let d = DeviceData::wscc9(60.0);
        let units = d.sg_units(&Profile::named("standard-wscc").unwrap(), 377.0).unwrap();
        assert_eq!(units.len(), 3);
        assert_eq!(units[0].exciter.ka, 20.0);
        assert_eq!(units[2].governor.pmax, 1.28);
        assert_eq!(Profile::named("standard").unwrap(), Profile::named("standard-wscc").unwrap());
        assert_eq!(Profile::named("appendix").unwrap().governor, "appendix");
        assert!(matches!(Profile::named("bogus"), Err(ParamError::UnknownProfile(_))));
        let bad = Profile { exciter: "nope".into(), governor: "standard".into() };
        assert!(matches!(d.sg_units(&bad, 377.0), Err(ParamError::UnknownPreset { kind: "exciter", .. })));
    }

    #[test]
    fn malformed_generator_line() {
        let text = WSCC9_PARAMS.replace("6.40   0.8958", "6.40   x");
        let err = DeviceData::parse(&text, 60.0).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
