use freqcoord::netmodel::Event;
use freqcoord::params::Profile;
use freqcoord::sim::*;
use std::sync::Arc;

fn system() -> PowerSystem {
    PowerSystem::wscc9(&Profile::default()).unwrap()
}

fn step(fraction: f64) -> Vec<Event> {
    vec![Event::LoadStep { bus: 8, fraction, t: 0.0 }]
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn flat_run_stays_at_rest() {
    let sys = system();
    let tr = run_scenario(&sys, &SimConfig { t_end: 20.0, ..Default::default() }).unwrap();
    for i in 1..=3 {
        let f = tr.column(&format!("f_sg{i}_hz")).unwrap();
        assert!(f.iter().all(|f| (f - 60.0).abs() < 1e-4));
    }
    assert!(max_abs_diff(&tr.initial_state, &tr.final_state) < 1e-6);
    assert_eq!(tr.event_time, None);
    let m = compute_metrics(&tr, 0.0, 0.5).unwrap();
    assert!(m.area_s.abs() < 1e-9);
}

#[test]
fn trapezoidal_step_halving_is_second_order() {
    let sys = system();
    let run = |dt: f64| {
        let cfg = SimConfig { dt, t_end: 2.0, events: step(0.1), record_every: 100, ..Default::default() };
        run_scenario(&sys, &cfg).unwrap().final_state
    };
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    let ratio = max_abs_diff(&a, &b) / max_abs_diff(&b, &c);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rk4_agrees_with_trapezoidal() {
    let sys = system();
    let mk = |integrator| SimConfig { integrator, t_end: 2.0, events: step(0.1), ..Default::default() };
    let a = run_scenario(&sys, &mk(Integrator::Trapezoidal)).unwrap();
    let b = run_scenario(&sys, &mk(Integrator::Rk4)).unwrap();
    let fa = a.column("f_coi_hz").unwrap();
    let fb = b.column("f_coi_hz").unwrap();
    assert!(max_abs_diff(fa, fb) < 1e-6);
}

#[test]
fn load_step_response_shape() {
    let sys = system();
    let tr = run_scenario(&sys, &SimConfig { t_end: 30.0, events: step(0.1), ..Default::default() }).unwrap();
    let f = tr.column("f_coi_hz").unwrap();
    let m = compute_metrics(&tr, 0.0, 0.5).unwrap();
    assert!(m.rocof < 0.0);
    assert!(m.f_ss < 60.0 && m.f_nadir < m.f_ss);
    let k = f.iter().position(|&v| v == m.f_nadir).unwrap();
    assert!(f[..=k].windows(2).all(|w| w[1] <= w[0] + 1e-9), "decay is not monotone");

    let t = tr.time();
    let w: Vec<usize> = (0..3).map(|i| tr.names.iter().position(|n| *n == format!("f_sg{}_hz", i + 1)).unwrap()).collect();
    for r in 0..tr.len() {
        let fs: Vec<f64> = w.iter().map(|&c| tr.columns[c][r]).collect();
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(f[r] >= lo - 1e-12 && f[r] <= hi + 1e-12, "COI outside the unit range at t = {}", t[r]);
    }
}

#[test]
fn inertial_support_raises_nadir_and_washes_out() {
    let sys = system();
    let run = |mode| {
        let cfg = SimConfig { t_end: 60.0, events: step(0.1), mode, record_every: 10, ..Default::default() };
        run_scenario(&sys, &cfg).unwrap()
    };
    let none = run(ControllerMode::None);
    let inertial = run(ControllerMode::Inertial);
    let mn = compute_metrics(&none, 0.0, 0.5).unwrap();
    let mi = compute_metrics(&inertial, 0.0, 0.5).unwrap();
    assert!(60.0 - mi.f_nadir < 60.0 - mn.f_nadir);
    assert!(none.column("dp_pu").unwrap().iter().all(|v| *v == 0.0));
    let dp = inertial.column("dp_pu").unwrap();
    assert!(dp.iter().any(|v| *v > 1e-3));
    assert!(dp.last().unwrap().abs() < 1e-4);
    assert!(inertial.column("dp_wt_pu").unwrap().last().unwrap().abs() < 1e-4);
}

struct Constant(f64);

impl CoordinationPolicy for Constant {
    fn evaluate(&self, _: &[f64]) -> f64 {
        self.0
    }
}

#[test]
fn coordination_signal_respects_envelope() {
    let sys = system();
    let cfg = SimConfig {
        t_end: 1.0,
        mode: ControllerMode::Coordinated,
        policy: Some(Arc::new(Constant(0.5))),
        ..Default::default()
    };
    let tr = run_scenario(&sys, &cfg).unwrap();
    let uc = tr.column("uc_pu").unwrap();
    let dt = tr.sample_dt;
    assert!(uc.iter().all(|u| u.abs() <= cfg.envelope.limit + 1e-12));
    assert!(uc.windows(2).all(|w| (w[1] - w[0]).abs() <= cfg.envelope.rate * dt + 1e-12));
    assert!((uc.last().unwrap() - cfg.envelope.limit).abs() < 1e-6);
    // a raised speed offset pushes every governor up and the frequency with it
    assert!(*tr.column("f_coi_hz").unwrap().last().unwrap() > 60.0);
}

#[test]
fn zero_policy_matches_inertial() {
    let sys = system();
    let mk = |mode, policy: Option<Arc<dyn CoordinationPolicy>>| SimConfig {
        t_end: 5.0,
        events: step(0.1),
        mode,
        policy,
        ..Default::default()
    };
    let a = run_scenario(&sys, &mk(ControllerMode::Inertial, None)).unwrap();
    let b = run_scenario(&sys, &mk(ControllerMode::Coordinated, Some(Arc::new(Constant(0.0))))).unwrap();
    assert_eq!(a.columns, b.columns);
}

#[test]
fn generator_trip_lowers_frequency() {
    let sys = system();
    let cfg = SimConfig { t_end: 5.0, events: vec![Event::GeneratorTrip { unit: 2, t: 0.5 }], ..Default::default() };
    let tr = run_scenario(&sys, &cfg).unwrap();
    assert_eq!(tr.event_time, Some(0.5));
    let f = tr.column("f_coi_hz").unwrap();
    assert!((f[400] - 60.0).abs() < 1e-9);
    assert!(*f.last().unwrap() < 59.9);
    let omega3 = tr.column("omega_sg3_pu").unwrap();
    let k = 600;
    assert_eq!(omega3[k], omega3[tr.len() - 1], "tripped unit should be frozen");
}

#[test]
fn runs_are_reproducible() {
    let sys = system();
    let cfg = SimConfig { t_end: 3.0, events: step(0.1), mode: ControllerMode::Inertial, ..Default::default() };
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_scenario(&sys, &cfg).unwrap().write_csv(&mut a).unwrap();
    run_scenario(&sys, &cfg).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_inputs_are_reported() {
    let sys = system();
    let cfg = SimConfig { dt: 0.0, ..Default::default() };
    assert!(matches!(run_scenario(&sys, &cfg), Err(SimError::Config(_))));
    let cfg = SimConfig { events: vec![Event::LoadStep { bus: 42, fraction: 0.1, t: 0.0 }], ..Default::default() };
    assert!(matches!(run_scenario(&sys, &cfg), Err(SimError::Network(_))));
    let cfg = SimConfig { events: vec![Event::GeneratorTrip { unit: 9, t: 0.0 }], ..Default::default() };
    assert!(run_scenario(&sys, &cfg).is_err());
}
