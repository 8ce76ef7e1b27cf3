use super::{SimError, SimTrace};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("trace has no `{0}` column")]
    MissingColumn(&'static str),
    #[error("trace after the event is shorter than the {window} s RoCoF window")]
    TooShort { window: f64 },
}

/// Frequency-response summary of one run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Metrics {
    pub f_nadir: f64,
    pub t_nadir: f64,
    /// Hz/s, most negative windowed slope.
    pub rocof: f64,
    pub f_ss: f64,
    /// Hz s
    pub area_s: f64,
}

/// Inertia-weighted mean speed `sum(H S w) / sum(H S)`.
pub fn coi_frequency(omega: &[f64], h: &[f64], mva_base: &[f64]) -> Result<f64, SimError> {
    let (mut num, mut den) = (0.0, 0.0);
    for ((w, h), s) in omega.iter().zip(h).zip(mva_base) {
        num += h * s * w;
        den += h * s;
    }
    if omega.is_empty() || den == 0.0 {
        return Err(SimError::NoMachines);
    }
    Ok(num / den)
}

/// Cumulative trapezoidal integral of `max(0, target - f)`.
pub fn running_area_error(t: &[f64], f: &[f64], target: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            let a = (target - f[i - 1]).max(0.0);
            let b = (target - f[i]).max(0.0);
            acc += 0.5 * (t[i] - t[i - 1]) * (a + b);
        }
        out.push(acc);
    }
    out
}

/// Metrics of the `f_coi_hz` column after `event_time`, with RoCoF taken as
/// the most negative centered slope over `rocof_window` seconds.
pub fn compute_metrics(trace: &SimTrace, event_time: f64, rocof_window: f64) -> Result<Metrics, MetricsError> {
    let f = trace.column("f_coi_hz").ok_or(MetricsError::MissingColumn("f_coi_hz"))?;
    let t = trace.column("t_s").ok_or(MetricsError::MissingColumn("t_s"))?;
    metrics_from_series(t, f, event_time, rocof_window)
}

pub(crate) fn metrics_from_series(t: &[f64], f: &[f64], event_time: f64, window: f64) -> Result<Metrics, MetricsError> {
    let n = t.len();
    let start = t.iter().position(|&ti| ti >= event_time - 1e-9).unwrap_or(n);
    let dt = if n > 1 { t[1] - t[0] } else { 0.0 };
    let half = if dt > 0.0 { (window / (2.0 * dt)).round() as usize } else { 0 };
    if half == 0 || start + 2 * half >= n {
        return Err(MetricsError::TooShort { window });
    }

    let tail = (n / 10).max(1);
    let f_ss = f[n - tail..].iter().sum::<f64>() / tail as f64;

    let (mut f_nadir, mut t_nadir) = (f[start], t[start]);
    for i in start..n {
        if f[i] < f_nadir {
            f_nadir = f[i];
            t_nadir = t[i];
        }
    }

    let mut rocof = f64::INFINITY;
    for c in start + half..n - half {
        let slope = (f[c + half] - f[c - half]) / (t[c + half] - t[c - half]);
        rocof = rocof.min(slope);
    }

    let area_s = *running_area_error(t, f, f_ss).last().unwrap_or(&0.0);
    Ok(Metrics { f_nadir, t_nadir, rocof, f_ss, area_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn coi_is_inertia_weighted() {
        let w = coi_frequency(&[1.00, 1.04], &[1.0, 3.0], &[100.0, 100.0]).unwrap();
        assert!((w - 1.03).abs() < 1e-12);
        assert!(matches!(coi_frequency(&[], &[], &[]), Err(SimError::NoMachines)));
    }

    #[test]
    fn rectangle_area() {
        let t = grid(1001, 1e-3);
        let f = vec![59.8; t.len()];
        let s = running_area_error(&t, &f, 60.0);
        assert!((s.last().unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(running_area_error(&t, &f, 59.0).last(), Some(&0.0));
    }

    #[test]
    fn constant_trace() {
        let t = grid(3000, 1e-3);
        let f = vec![60.0; t.len()];
        let m = metrics_from_series(&t, &f, 0.0, 0.5).unwrap();
        assert_eq!(m.rocof, 0.0);
        assert_eq!(m.area_s, 0.0);
        assert_eq!(m.f_nadir, m.f_ss);
    }

    #[test]
    fn ramp_slope() {
        let t = grid(4001, 1e-3);
        let f: Vec<f64> = t.iter().map(|t| 60.0 - 0.05 * t).collect();
        let m = metrics_from_series(&t, &f, 0.0, 0.5).unwrap();
        assert!((m.rocof + 0.05).abs() < 1e-9, "{}", m.rocof);
        assert!((m.f_nadir - f[f.len() - 1]).abs() < 1e-12);
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = grid(100, 1e-3);
        let f = vec![60.0; 100];
        assert_eq!(metrics_from_series(&t, &f, 0.0, 0.5), Err(MetricsError::TooShort { window: 0.5 }));
    }

    proptest! {
        #[test]
        fn area_is_nondecreasing(f in proptest::collection::vec(59.5..60.5f64, 2..200), target in 59.5..60.5f64) {
            let t = grid(f.len(), 0.01);
            let s = running_area_error(&t, &f, target);
            prop_assert!(s.windows(2).all(|w| w[1] >= w[0]));
            prop_assert_eq!(s[0], 0.0);
        }
    }
}
