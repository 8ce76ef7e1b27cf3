use super::system::{evaluate, Outputs, Segment};
use super::{CoordinationPolicy, Integrator, PowerSystem, SimConfig, SimError, SimTrace};
use crate::netmodel::{apply_event, Event};
use std::f64::consts::PI;

fn column_names(sys: &PowerSystem) -> Vec<String> {
    let mut names = vec!["t_s".to_string()];
    for i in 1..=sys.layout.n_units {
        for (q, unit) in [("delta", "rad"), ("omega", "pu"), ("f", "hz"), ("tm", "pu"), ("efd", "pu")] {
            names.push(format!("{q}_sg{i}_{unit}"));
        }
    }
    for b in &sys.network.buses {
        names.push(format!("vm_bus{}_pu", b.id));
    }
    for n in
        ["omega_r_pu", "p_wind_pu", "p_aero_pu", "q_wind_pu", "dp_pu", "dp_wt_pu", "f_coi_hz", "omega_coi_pu", "uc_pu", "e_hz_s", "vr_sat"]
    {
        names.push(n.to_string());
    }
    names
}

fn row(sys: &PowerSystem, t: f64, x: &[f64], out: &Outputs, buf: &mut Vec<f64>) {
    let lay = &sys.layout;
    buf.clear();
    buf.push(t);
    for k in 0..lay.n_units {
        let r = lay.unit(k);
        let omega = x[r.start + 1];
        buf.extend([x[r.start], omega / sys.omega_s, omega / (2.0 * PI), x[r.start + 8], x[r.start + 3]]);
    }
    buf.extend(out.v.iter().map(|v| v.norm()));
    buf.extend([
        x[lay.farm],
        out.p_farm,
        out.p_aero,
        out.q_farm,
        out.delta_p,
        out.delta_p_wt,
        out.omega_coi / (2.0 * PI),
        out.omega_coi / sys.omega_s,
        x[lay.uc],
        x[lay.area],
        if out.saturated { 1.0 } else { 0.0 },
    ]);
}

struct Stepper<'a> {
    sys: &'a PowerSystem,
    cfg: &'a SimConfig,
    policy: Option<&'a dyn CoordinationPolicy>,
}

impl Stepper<'_> {
    fn eval(&self, seg: &Segment, t: f64, x: &[f64], dx: &mut [f64]) -> Result<Outputs, SimError> {
        evaluate(self.sys, seg, self.cfg, self.policy, t, x, dx)
    }

    fn trapezoidal(&self, seg: &Segment, t: f64, x: &[f64], f: &[f64]) -> Result<Vec<f64>, SimError> {
        let h = self.cfg.dt;
        let m = x.len();
        let mut xp: Vec<f64> = (0..m).map(|i| x[i] + h * f[i]).collect();
        let mut fp = vec![0.0; m];
        for it in 1..=self.cfg.max_fixed_point_iter {
            self.eval(seg, t + h, &xp, &mut fp)?;
            let mut converged = true;
            for i in 0..m {
                let xn = x[i] + 0.5 * h * (f[i] + fp[i]);
                if !xn.is_finite() {
                    return Err(SimError::NonFinite { t: t + h });
                }
                if (xn - xp[i]).abs() > self.cfg.fixed_point_tol * xn.abs().max(1.0) {
                    converged = false;
                }
                xp[i] = xn;
            }
            if converged {
                return Ok(xp);
            }
            if it == self.cfg.max_fixed_point_iter {
                return Err(SimError::NonConvergence { t: t + h, iterations: it });
            }
        }
        Err(SimError::NonConvergence { t: t + h, iterations: 0 })
    }

    fn rk4(&self, seg: &Segment, t: f64, x: &[f64], f: &[f64]) -> Result<Vec<f64>, SimError> {
        let h = self.cfg.dt;
        let m = x.len();
        let shifted = |k: &[f64], c: f64| -> Vec<f64> { (0..m).map(|i| x[i] + c * k[i]).collect() };
        let mut k2 = vec![0.0; m];
        let mut k3 = vec![0.0; m];
        let mut k4 = vec![0.0; m];
        self.eval(seg, t + h / 2.0, &shifted(f, h / 2.0), &mut k2)?;
        self.eval(seg, t + h / 2.0, &shifted(&k2, h / 2.0), &mut k3)?;
        self.eval(seg, t + h, &shifted(&k3, h), &mut k4)?;
        Ok((0..m).map(|i| x[i] + h / 6.0 * (f[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }
}

/// Runs the configured scenario from the system's rest point.
///
/// Events are snapped to the nearest step boundary and take effect before
/// the derivative at that boundary is evaluated.
pub fn run_scenario(sys: &PowerSystem, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut events: Vec<(usize, Event)> =
        cfg.events.iter().map(|e| ((e.time() / cfg.dt).round() as usize, e.clone())).collect();
    events.sort_by_key(|(k, _)| *k);

    let stepper = Stepper { sys, cfg, policy: cfg.policy.as_deref() };
    let mut applied: Vec<Event> = Vec::new();
    let mut net = sys.base_state.clone();
    let mut next_event = 0;
    let mut apply_due = |k: usize, net: &mut crate::netmodel::NetworkState, applied: &mut Vec<Event>| {
        let mut changed = false;
        while next_event < events.len() && events[next_event].0 == k {
            *net = apply_event(net, &events[next_event].1)?;
            applied.push(events[next_event].1.clone());
            next_event += 1;
            changed = true;
        }
        Ok::<bool, SimError>(changed)
    };
    // events past the horizon are dropped
    apply_due(0, &mut net, &mut applied)?;
    let mut seg = Segment::new(sys, net.clone(), &applied);

    let mut trace = SimTrace::with_columns(column_names(sys), cfg.dt * cfg.record_every as f64);
    trace.event_time = events.first().map(|(k, _)| *k as f64 * cfg.dt).filter(|t| *t <= cfg.t_end);
    trace.state_names = sys.layout.names();
    trace.initial_state = sys.x0.clone();

    let mut x = sys.x0.clone();
    let mut f = vec![0.0; x.len()];
    let mut buf = Vec::new();
    let out = stepper.eval(&seg, 0.0, &x, &mut f)?;
    row(sys, 0.0, &x, &out, &mut buf);
    trace.push(&buf);

    for n in 0..steps {
        let t = n as f64 * cfg.dt;
        let xn = match cfg.integrator {
            Integrator::Trapezoidal => stepper.trapezoidal(&seg, t, &x, &f)?,
            Integrator::Rk4 => stepper.rk4(&seg, t, &x, &f)?,
        };
        let t1 = (n + 1) as f64 * cfg.dt;
        if xn.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: t1 });
        }
        if apply_due(n + 1, &mut net, &mut applied)? {
            seg = Segment::new(sys, net.clone(), &applied);
        }
        x = xn;
        let out = stepper.eval(&seg, t1, &x, &mut f)?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: t1 });
        }
        if (n + 1) % cfg.record_every == 0 {
            row(sys, t1, &x, &out, &mut buf);
            trace.push(&buf);
        }
    }
    trace.final_state = x;
    Ok(trace)
}
