//! Scenario files: TOML layered over built-in defaults, with named device
//! profiles and per-key overrides.

use crate::CliError;
use freqcoord::coordnet::{load_weights, Mlp, TrainConfig};
use freqcoord::netmodel::{Event, Network};
use freqcoord::params::{DeviceData, Profile};
use freqcoord::sim::{ControllerMode, Integrator, PowerSystem, SimConfig, UcEnvelope};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub mode: ControllerMode,
    pub record_every: usize,
    pub rocof_window: f64,
    pub load_damping: f64,
    /// Network weights for coordinated mode.
    pub weights: Option<PathBuf>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 60.0,
            integrator: Integrator::Trapezoidal,
            mode: ControllerMode::None,
            record_every: 1,
            rocof_window: 0.5,
            load_damping: 0.0,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSection {
    pub limit: f64,
    pub rate: f64,
    pub tau: f64,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        let e = UcEnvelope::default();
        Self { limit: e.limit, rate: e.rate, tau: e.tau }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub alpha: f64,
    /// Load-step sizes of the recorded inertial runs.
    pub fractions: Vec<f64>,
    pub bus: u32,
    pub t_end: f64,
    pub n_samples: usize,
    /// Dataset read by `train`; defaults to `<out>/dataset.csv`.
    pub path: Option<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { alpha: 1.0, fractions: vec![0.05, 0.10, 0.15], bus: 8, t_end: 40.0, n_samples: 50_000, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// 0 disables early stopping.
    pub patience: usize,
    pub split: [f64; 3],
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            hidden: 10,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.early_stop_patience.unwrap_or(0),
            split: d.split_ratios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Target gains tried by `pipeline`; the run with the smallest area S is kept.
    pub alphas: Vec<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { alphas: vec![0.5, 1.0, 2.0] }
    }
}

/// Per-key parameter overrides applied on top of the selected profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub exciter: BTreeMap<String, f64>,
    pub governor: BTreeMap<String, f64>,
    pub washout: BTreeMap<String, f64>,
    pub windfarm: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// `standard-wscc` or `appendix`.
    pub preset: String,
    /// Network case file; the bundled 9-bus case when absent.
    pub network: Option<PathBuf>,
    /// Device data file; the bundled data when absent.
    pub devices: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sim: SimSection,
    pub events: Vec<Event>,
    pub envelope: EnvelopeSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub compare: CompareSection,
    pub overrides: Overrides,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            preset: "standard-wscc".into(),
            network: None,
            devices: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            sim: SimSection::default(),
            events: vec![Event::LoadStep { bus: 8, fraction: 0.1, t: 0.0 }],
            envelope: EnvelopeSection::default(),
            dataset: DatasetSection::default(),
            train: TrainSection::default(),
            compare: CompareSection::default(),
            overrides: Overrides::default(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("scenario: {e}")))
    }

    /// Loads a scenario file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut sc = Self::from_toml(&read(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        sc.network.as_mut().map(fix);
        sc.devices.as_mut().map(fix);
        sc.sim.weights.as_mut().map(fix);
        sc.dataset.path.as_mut().map(fix);
        fix(&mut sc.out_dir);
        Ok(sc)
    }

    pub fn network(&self) -> Result<Network, CliError> {
        match &self.network {
            Some(p) => Ok(Network::parse(&read(p)?).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?),
            None => Ok(Network::wscc9()),
        }
    }

    pub fn profile(&self) -> Result<Profile, CliError> {
        Profile::named(&self.preset).map_err(CliError::config)
    }

    /// Device data with the overrides applied to the selected profile.
    pub fn devices(&self, f_nominal_hz: f64) -> Result<DeviceData, CliError> {
        let mut d = match &self.devices {
            Some(p) => DeviceData::parse(&read(p)?, f_nominal_hz)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?,
            None => DeviceData::wscc9(f_nominal_hz),
        };
        let profile = self.profile()?;
        let unknown = |sec: &str, k: &str| CliError::config(format!("unknown override `{sec}.{k}`"));

        let exc = d.exciters.get_mut(&profile.exciter).ok_or_else(|| CliError::config("exciter preset missing"))?;
        for (k, v) in &self.overrides.exciter {
            let slot = match k.as_str() {
                "ka" => &mut exc.ka,
                "ta" => &mut exc.ta,
                "ke" => &mut exc.ke,
                "te" => &mut exc.te,
                "kf" => &mut exc.kf,
                "tf" => &mut exc.tf,
                "se_a" => &mut exc.se_a,
                "se_b" => &mut exc.se_b,
                "efd_ceiling" => &mut exc.efd_ceiling,
                _ => return Err(unknown("exciter", k)),
            };
            *slot = *v;
        }
        let gov = d.governors.get_mut(&profile.governor).ok_or_else(|| CliError::config("governor preset missing"))?;
        for (k, v) in &self.overrides.governor {
            let slot = match k.as_str() {
                "k1" => &mut gov.k1,
                "t1" => &mut gov.t1,
                "t2" => &mut gov.t2,
                "t3" => &mut gov.t3,
                "t4" => &mut gov.t4,
                _ => return Err(unknown("governor", k)),
            };
            *slot = *v;
        }
        for (k, v) in &self.overrides.washout {
            let w = &mut d.washout;
            let slot = match k.as_str() {
                "k_w" => &mut w.params.k_w,
                "t_w" => &mut w.params.t_w,
                "deadband_hz" => &mut w.params.deadband_hz,
                "t_filter" => &mut w.t_filter,
                _ => return Err(unknown("washout", k)),
            };
            *slot = *v;
        }
        for (k, v) in &self.overrides.windfarm {
            let f = &mut d.windfarm.dfig;
            let slot = match k.as_str() {
                "v_wind" => &mut f.v_wind,
                "h_d" => &mut f.h_d,
                "q_ref" => &mut f.q_ref,
                "vr_max" => &mut f.vr_max,
                _ => return Err(unknown("windfarm", k)),
            };
            *slot = *v;
        }
        Ok(d)
    }

    pub fn build_system(&self) -> Result<PowerSystem, CliError> {
        let net = self.network()?;
        let devices = self.devices(net.f_nominal_hz)?;
        Ok(PowerSystem::build(net, &devices, &self.profile()?)?)
    }

    /// Simulation config for `mode` with the scenario's events and envelope.
    pub fn sim_config(&self, mode: ControllerMode, policy: Option<Arc<Mlp>>) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            integrator: self.sim.integrator,
            events: self.events.clone(),
            mode,
            policy: policy.map(|p| p as _),
            envelope: UcEnvelope { limit: self.envelope.limit, rate: self.envelope.rate, tau: self.envelope.tau },
            record_every: self.sim.record_every,
            load_damping: self.sim.load_damping,
            ..Default::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            split_ratios: self.train.split,
            seed: self.seed,
            early_stop_patience: (self.train.patience > 0).then_some(self.train.patience),
            fit_scalers: true,
        }
    }

    pub fn weights(&self) -> Result<Arc<Mlp>, CliError> {
        let p = self
            .sim
            .weights
            .as_ref()
            .ok_or_else(|| CliError::config("coordinated mode needs `sim.weights` (or --weights)"))?;
        Ok(Arc::new(load_weights(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.path.clone().unwrap_or_else(|| self.out_dir.join("dataset.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Scenario::from_toml("").unwrap(), Scenario::default());
    }

    #[test]
    fn partial_sections_layer_over_defaults() {
        let sc = Scenario::from_toml(
            r#"
            preset = "appendix"
            [sim]
            t_end = 20.0
            mode = "inertial"
            [[events]]
            kind = "generator_trip"
            unit = 1
            t = 1.0
            [overrides.governor]
            k1 = 25.0
            "#,
        )
        .unwrap();
        assert_eq!(sc.sim.t_end, 20.0);
        assert_eq!(sc.sim.dt, 1e-3);
        assert_eq!(sc.sim.mode, ControllerMode::Inertial);
        assert_eq!(sc.events, vec![Event::GeneratorTrip { unit: 1, t: 1.0 }]);
        assert_eq!(sc.dataset, DatasetSection::default());
        assert_eq!(sc.devices(60.0).unwrap().governor("appendix").unwrap().k1, 25.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Scenario::from_toml("[sim]\nstep = 1"), Err(CliError::Config(_))));
        let sc = Scenario::from_toml("[overrides.exciter]\nbogus = 1.0").unwrap();
        assert!(sc.devices(60.0).is_err());
    }

    #[test]
    fn coordinated_without_weights_is_a_config_error() {
        let err = Scenario::default().weights().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
