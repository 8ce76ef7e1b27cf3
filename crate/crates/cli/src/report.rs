use crate::output::{csv_error, write_atomic};
use crate::CliError;
use freqcoord::sim::{ControllerMode, Metrics};
use std::fmt::Write;
use std::path::Path;

/// Published improvement of the coordinated scheme over inertial support, %.
pub const REFERENCE_NADIR_PCT: f64 = 22.0;
pub const REFERENCE_ROCOF_PCT: f64 = 29.5;

pub const MODES: [ControllerMode; 3] = [ControllerMode::None, ControllerMode::Inertial, ControllerMode::Coordinated];

/// Relative improvement of one run over another, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    /// Reduction of the nadir deviation `f_nom - f_nadir`.
    pub nadir_pct: f64,
    /// Reduction of |RoCoF|.
    pub rocof_pct: f64,
    /// Reduction of the area S.
    pub area_pct: f64,
}

impl Improvement {
    pub fn between(f_nom: f64, base: &Metrics, new: &Metrics) -> Self {
        let dev_base = f_nom - base.f_nadir;
        let dev_new = f_nom - new.f_nadir;
        Self {
            nadir_pct: 100.0 * (dev_base - dev_new) / dev_base.abs(),
            rocof_pct: 100.0 * (base.rocof.abs() - new.rocof.abs()) / base.rocof.abs(),
            area_pct: 100.0 * (base.area_s - new.area_s) / base.area_s.abs(),
        }
    }
}

/// Metrics of the three controller modes for one disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub f_nominal: f64,
    /// Ordered as [`MODES`].
    pub modes: [Metrics; 3],
    /// Coordination signal at the end of the coordinated run, pu.
    pub uc_end: f64,
    pub rocof_window: f64,
    pub vs_inertial: Improvement,
    pub vs_none: Improvement,
}

impl ComparisonReport {
    pub fn new(f_nominal: f64, modes: [Metrics; 3], uc_end: f64, rocof_window: f64) -> Self {
        let vs_inertial = Improvement::between(f_nominal, &modes[1], &modes[2]);
        let vs_none = Improvement::between(f_nominal, &modes[0], &modes[2]);
        Self { f_nominal, modes, uc_end, rocof_window, vs_inertial, vs_none }
    }

    /// Writes `comparison.csv` and `improvements.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_atomic(&dir.join("comparison.csv"), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["mode", "f_nadir_hz", "t_nadir_s", "rocof_hz_s", "f_ss_hz", "area_s_hz_s", "uc_end_pu", "rocof_window_s"])
                .map_err(csv_error)?;
            for (mode, m) in MODES.iter().zip(&self.modes) {
                let uc = if *mode == ControllerMode::Coordinated { self.uc_end } else { 0.0 };
                wr.write_record([
                    mode.to_string(),
                    m.f_nadir.to_string(),
                    m.t_nadir.to_string(),
                    m.rocof.to_string(),
                    m.f_ss.to_string(),
                    m.area_s.to_string(),
                    uc.to_string(),
                    self.rocof_window.to_string(),
                ])
                .map_err(csv_error)?;
            }
            wr.flush()
        })?;
        write_atomic(&dir.join("improvements.csv"), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["baseline", "nadir_improvement_pct", "rocof_improvement_pct", "area_reduction_pct"])
                .map_err(csv_error)?;
            for (name, imp) in [("inertial", &self.vs_inertial), ("none", &self.vs_none)] {
                wr.write_record([name.to_string(), imp.nadir_pct.to_string(), imp.rocof_pct.to_string(), imp.area_pct.to_string()])
                    .map_err(csv_error)?;
            }
            wr.write_record([
                "reference".to_string(),
                REFERENCE_NADIR_PCT.to_string(),
                REFERENCE_ROCOF_PCT.to_string(),
                String::new(),
            ])
            .map_err(csv_error)?;
            wr.flush()
        })
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>11} {:>9} {:>11} {:>11} {:>11}", "mode", "nadir Hz", "t s", "RoCoF Hz/s", "f_ss Hz", "S Hz s");
        for (mode, m) in MODES.iter().zip(&self.modes) {
            let _ = writeln!(
                s,
                "{:<12} {:>11.5} {:>9.3} {:>11.5} {:>11.5} {:>11.5}",
                mode.to_string(),
                m.f_nadir,
                m.t_nadir,
                m.rocof,
                m.f_ss,
                m.area_s
            );
        }
        let v = &self.vs_inertial;
        let _ = writeln!(
            s,
            "vs inertial: nadir {:+.2}% (reference {REFERENCE_NADIR_PCT}%), RoCoF {:+.2}% (reference {REFERENCE_ROCOF_PCT}%), S {:+.2}%, u_c(end) {:.3e} pu",
            v.nadir_pct, v.rocof_pct, v.area_pct, self.uc_end
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(f_nadir: f64, rocof: f64, area_s: f64) -> Metrics {
        Metrics { f_nadir, t_nadir: 1.0, rocof, f_ss: 59.9, area_s }
    }

    #[test]
    fn improvement_uses_deviation_from_nominal() {
        let imp = Improvement::between(60.0, &m(59.8, -0.1, 0.2), &m(59.9, -0.05, 0.1));
        assert!((imp.nadir_pct - 50.0).abs() < 1e-9);
        assert!((imp.rocof_pct - 50.0).abs() < 1e-9);
        assert!((imp.area_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn worse_run_gives_negative_improvement() {
        let imp = Improvement::between(60.0, &m(59.9, -0.05, 0.1), &m(59.8, -0.1, 0.2));
        assert!(imp.nadir_pct < 0.0 && imp.rocof_pct < 0.0 && imp.area_pct < 0.0);
    }
}
