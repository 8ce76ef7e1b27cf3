//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use freqcoord::coordnet::{
    backprop_gradients, mlp_forward, split_indices, train, Dataset, Mlp, TrainConfig,
};
use freqcoord::netmodel::{solve_power_flow, Event};
use freqcoord::sim::*;
use freqcoord_cli::commands;
use freqcoord_cli::report::{REFERENCE_NADIR_PCT, REFERENCE_ROCOF_PCT};
use freqcoord_cli::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

const REFERENCE_ROCOF: f64 = 0.0567;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: u32, name: &'static str, pass: bool, detail: String) {
    println!("[{}] {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, name, pass, detail });
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn step_event() -> Vec<Event> {
    vec![Event::LoadStep { bus: 8, fraction: 0.1, t: 0.0 }]
}

fn power_flow(out: &mut Vec<Outcome>) {
    let sc = Scenario::default();
    let net = sc.network().unwrap();
    let devices = sc.devices(net.f_nominal_hz).unwrap();
    let (net, _, _) = farm_dispatch(net, &devices).unwrap();
    let start = Instant::now();
    let pf = solve_power_flow(&net, PF_TOLERANCE, PF_MAX_ITER);
    let secs = start.elapsed().as_secs_f64();
    match pf {
        Ok(s) => record(
            out,
            1,
            "power flow",
            s.max_mismatch < 1e-8 && s.iterations <= 10 && secs < 0.1,
            format!("mismatch {:.2e} pu, {} iterations, {:.2e} s", s.max_mismatch, s.iterations, secs),
        ),
        Err(e) => record(out, 1, "power flow", false, e.to_string()),
    }
}

fn equilibrium(out: &mut Vec<Outcome>, sys: &PowerSystem) {
    let tr = run_scenario(sys, &SimConfig { t_end: 20.0, ..Default::default() }).unwrap();
    let mut f_dev: f64 = 0.0;
    for i in 1.. {
        match tr.column(&format!("f_sg{i}_hz")) {
            Some(f) => f_dev = f.iter().fold(f_dev, |a, f| a.max((f - 60.0).abs())),
            None => break,
        }
    }
    let x_dev = max_abs_diff(&tr.initial_state, &tr.final_state);
    record(
        out,
        2,
        "equilibrium fidelity",
        f_dev < 1e-4 && x_dev < 1e-6,
        format!("max |f - 60| {f_dev:.2e} Hz, max state drift {x_dev:.2e}"),
    );
}

fn integrator_order(out: &mut Vec<Outcome>, sys: &PowerSystem) {
    let run = |dt: f64| {
        let cfg = SimConfig { dt, t_end: 5.0, events: step_event(), record_every: 1000, ..Default::default() };
        run_scenario(sys, &cfg).unwrap().final_state
    };
    let (a, b, c) = (run(1e-3), run(5e-4), run(2.5e-4));
    let (d1, d2) = (max_abs_diff(&a, &b), max_abs_diff(&b, &c));
    let ratio = d1 / d2;
    record(
        out,
        3,
        "integrator order",
        (3.5..=4.5).contains(&ratio),
        format!("|x(1ms) - x(0.5ms)| {d1:.3e}, |x(0.5ms) - x(0.25ms)| {d2:.3e}, ratio {ratio:.3}"),
    );
}

fn run_mode(sys: &PowerSystem, mode: ControllerMode) -> (SimTrace, Metrics) {
    let cfg = SimConfig { t_end: 60.0, events: step_event(), mode, ..Default::default() };
    let tr = run_scenario(sys, &cfg).unwrap();
    let m = compute_metrics(&tr, 0.0, 0.5).unwrap();
    (tr, m)
}

fn baseline_shape(out: &mut Vec<Outcome>, tr: &SimTrace, m: &Metrics) {
    let f = tr.column("f_coi_hz").unwrap();
    let k = f.iter().position(|&v| v == m.f_nadir).unwrap();
    let monotone = f[..=k].windows(2).all(|w| w[1] <= w[0] + 1e-9);
    // later dips below the settling frequency must be small next to the nadir
    let depth = m.f_ss - m.f_nadir;
    let later = f[k + 1..]
        .windows(3)
        .filter(|w| w[1] < w[0] && w[1] <= w[2])
        .map(|w| m.f_ss - w[1])
        .fold(0.0, f64::max);
    let single = later < 0.5 * depth;
    let in_band = (m.rocof.abs() - REFERENCE_ROCOF).abs() <= 0.5 * REFERENCE_ROCOF;
    record(
        out,
        4,
        "baseline excursion shape",
        monotone && single && m.f_ss < 60.0 && m.rocof < 0.0,
        format!(
            "monotone decay {monotone}, single nadir {single} ({:.5} Hz at {:.3} s, deepest later dip {later:.1e} Hz below f_ss), f_ss {:.5} Hz, RoCoF {:.5} Hz/s ({} the +/-50% band around reference {REFERENCE_ROCOF})",
            m.f_nadir,
            m.t_nadir,
            m.f_ss,
            m.rocof,
            if in_band { "inside" } else { "outside" }
        ),
    );
}

fn inertial_support(out: &mut Vec<Outcome>, none: &Metrics, tr: &SimTrace, inertial: &Metrics) {
    let dp_end = tr.column("dp_pu").unwrap().last().copied().unwrap();
    let (d0, d1) = (60.0 - none.f_nadir, 60.0 - inertial.f_nadir);
    record(
        out,
        5,
        "inertial support",
        d1 < d0 && dp_end.abs() < 1e-4,
        format!("nadir deviation {d0:.6} -> {d1:.6} Hz, |dP(t_end)| {:.2e} pu", dp_end.abs()),
    );
}

/// Direct evaluation of the scaled-unit cost, used as the finite-difference
/// oracle.
fn oracle_cost(m: &Mlp, d: &Dataset) -> f64 {
    let mut sum = 0.0;
    for r in 0..d.len() {
        let x = d.input(r);
        let mut h = vec![0.0; m.n_hidden];
        for (k, hk) in h.iter_mut().enumerate() {
            let mut a = m.b1[k];
            for j in 0..m.n_in {
                let (lo, hi) = (m.input_scaler.min[j], m.input_scaler.max[j]);
                a += m.w1[k * m.n_in + j] * (2.0 * (x[j] - lo) / (hi - lo) - 1.0);
            }
            *hk = a.tanh();
        }
        for o in 0..m.n_out {
            let mut a = m.b2[o];
            for (k, hk) in h.iter().enumerate() {
                a += m.w2[o * m.n_hidden + k] * hk;
            }
            let (lo, hi) = (m.target_scaler.min[o], m.target_scaler.max[o]);
            let t = 2.0 * (d.target(r)[o] - lo) / (hi - lo) - 1.0;
            sum += (a - t) * (a - t);
        }
    }
    sum / d.len() as f64
}

fn gradient_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n_in, n_hidden, n_out) = (rng.gen_range(1..6), rng.gen_range(1..10), rng.gen_range(1..3));
        let mut m = Mlp::new(n_in, n_hidden, n_out, rng.gen());
        m.b1.iter_mut().chain(m.b2.iter_mut()).for_each(|b| *b = rng.gen_range(-0.5..0.5));
        for j in 0..n_in {
            m.input_scaler.min[j] = rng.gen_range(-2.0..0.0);
            m.input_scaler.max[j] = m.input_scaler.min[j] + rng.gen_range(0.5..3.0);
        }
        for o in 0..n_out {
            m.target_scaler.min[o] = rng.gen_range(-1.0..0.0);
            m.target_scaler.max[o] = m.target_scaler.min[o] + rng.gen_range(0.1..2.0);
        }
        let k = rng.gen_range(1..16);
        let d = Dataset::new(
            (0..n_in).map(|i| format!("x{i}")).collect(),
            (0..n_out).map(|i| format!("y{i}")).collect(),
            (0..k * n_in).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            (0..k * n_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let rows: Vec<usize> = (0..k).collect();
        let g = backprop_gradients(&m, &d, &rows).unwrap();
        let analytic: Vec<f64> = g.iter().copied().collect();
        let sizes = [m.w1.len(), m.b1.len(), m.w2.len(), m.b2.len()];
        let mut i = 0;
        for (block, &len) in sizes.iter().enumerate() {
            for p in 0..len {
                let fd = {
                    let mut plus = m.clone();
                    let mut minus = m.clone();
                    for (net, dx) in [(&mut plus, h), (&mut minus, -h)] {
                        let v = match block {
                            0 => &mut net.w1,
                            1 => &mut net.b1,
                            2 => &mut net.w2,
                            _ => &mut net.b2,
                        };
                        v[p] += dx;
                    }
                    (oracle_cost(&plus, &d) - oracle_cost(&minus, &d)) / (2.0 * h)
                };
                let err = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1.0);
                worst = worst.max(err);
                i += 1;
            }
        }
    }
    worst
}

fn ann_numerics(out: &mut Vec<Outcome>) {
    let worst = gradient_check();

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..5000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        targets.push(0.5 * x[0] - 0.25 * x[1] + 0.1 * x[2] + 0.2);
        inputs.extend(x);
    }
    let d = Dataset::new(vec!["a".into(), "b".into(), "c".into()], vec!["y".into()], inputs, targets).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        batch_size: 1,
        max_epochs: 2000,
        early_stop_patience: None,
        seed: 1,
        ..Default::default()
    };
    let (m, rep) = train(&Mlp::new(3, 10, 1, 1), &d, &cfg).unwrap();
    let r = rep.r_test.unwrap_or(f64::NAN);
    let probe = mlp_forward(&m, &[0.3, -0.7, 0.9]).unwrap()[0];
    let probe_err = (probe - (0.5 * 0.3 + 0.25 * 0.7 + 0.1 * 0.9 + 0.2)).abs();

    let [tr, va, te] = split_indices(50_000, [0.7, 0.15, 0.15], 0).unwrap();
    let sizes = (tr.len(), va.len(), te.len());
    record(
        out,
        6,
        "ANN numerics",
        worst < 1e-6 && rep.final_test_mse < 1e-6 && r > 0.9999 && sizes == (35_000, 7_500, 7_500),
        format!(
            "FD max rel. error {worst:.2e}; linear fit test MSE {:.2e}, R {r:.7} after {} epochs (probe error {probe_err:.1e}); split {}/{}/{}",
            rep.final_test_mse,
            rep.train_mse.len(),
            sizes.0,
            sizes.1,
            sizes.2
        ),
    );
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    match (std::fs::read(a), std::fs::read(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn main() {
    let mut out = Vec::new();
    let sys = PowerSystem::wscc9(&freqcoord::params::Profile::default()).unwrap();

    power_flow(&mut out);
    equilibrium(&mut out, &sys);
    integrator_order(&mut out, &sys);
    let (tr_none, m_none) = run_mode(&sys, ControllerMode::None);
    baseline_shape(&mut out, &tr_none, &m_none);
    let (tr_in, m_in) = run_mode(&sys, ControllerMode::Inertial);
    inertial_support(&mut out, &m_none, &tr_in, &m_in);
    ann_numerics(&mut out);

    // full pipeline: alpha sweep, selection by smallest coordinated area S
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut runs = Vec::new();
    for d in &dirs {
        let sc = Scenario { out_dir: d.path().to_path_buf(), ..Default::default() };
        runs.push(commands::cmd_pipeline(&sc).unwrap());
    }
    let p = &runs[0];
    let best = &p.entries[p.best];
    let rep = &best.report;
    let v = &rep.vs_inertial;
    let area_ok = rep.modes[2].area_s < rep.modes[1].area_s && rep.modes[2].area_s < rep.modes[0].area_s;
    record(
        &mut out,
        7,
        "coordinated vs inertial",
        v.nadir_pct >= 10.0 && v.rocof_pct >= 10.0 && rep.uc_end.abs() < 1e-3 && area_ok,
        format!(
            "alpha {}: nadir {:+.2}% (reference {REFERENCE_NADIR_PCT}%), RoCoF {:+.2}% (reference {REFERENCE_ROCOF_PCT}%), |u_c(t_end)| {:.2e} pu, S {:.5} vs {:.5} inertial / {:.5} none",
            best.alpha,
            v.nadir_pct,
            v.rocof_pct,
            rep.uc_end.abs(),
            rep.modes[2].area_s,
            rep.modes[1].area_s,
            rep.modes[0].area_s
        ),
    );

    // alpha = 0: all-zero targets
    let sc = Scenario::default();
    let traces = commands::inertial_traces(&sc, &sys).unwrap();
    let data = commands::dataset_from_traces(&sc, &traces, 0.0).unwrap();
    let init = Mlp::new(data.n_in(), sc.train.hidden, data.n_out(), sc.seed);
    let (m0, _) = train(&init, &data, &sc.train_config()).unwrap();
    let (rep0, _) = commands::compare_with(&sc, &sys, Arc::new(m0)).unwrap();
    let (c, i) = (&rep0.modes[2], &rep0.modes[1]);
    let diff = [c.f_nadir - i.f_nadir, c.t_nadir - i.t_nadir, c.rocof - i.rocof, c.f_ss - i.f_ss, c.area_s - i.area_s]
        .iter()
        .fold(0.0f64, |a, d| a.max(d.abs()));
    record(&mut out, 8, "alpha = 0 degeneracy", diff < 1e-6, format!("max metric difference {diff:.2e}"));

    let start = Instant::now();
    run_scenario(&sys, &SimConfig { t_end: 20.0, events: step_event(), mode: ControllerMode::Inertial, ..Default::default() })
        .unwrap();
    let sim_secs = start.elapsed().as_secs_f64();
    record(
        &mut out,
        9,
        "performance",
        sim_secs < 5.0 && p.seconds < 300.0,
        format!(
            "20 s run {sim_secs:.2} s; pipeline ({} alphas x gen {} samples, train {} epochs, compare) {:.1} s",
            p.entries.len(),
            sc.dataset.n_samples,
            sc.train.max_epochs,
            p.seconds
        ),
    );

    let mut files = vec!["weights.json".to_string(), "comparison.csv".into(), "improvements.csv".into(), "alpha_sweep.csv".into()];
    for e in &p.entries {
        for f in ["weights.json", "comparison.csv", "improvements.csv", "train_report.csv", "dataset.csv"] {
            files.push(format!("alpha_{}/{f}", e.alpha));
        }
    }
    let differing: Vec<&String> =
        files.iter().filter(|f| !same_bytes(&dirs[0].path().join(f), &dirs[1].path().join(f))).collect();
    record(
        &mut out,
        10,
        "determinism",
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files byte-identical across two pipeline runs", files.len())
        } else {
            format!("differing: {differing:?}")
        },
    );

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    println!("\nacceptance: {} of {} criteria passed", out.len() - failed.len(), out.len());
    for o in &failed {
        println!("  failed {} {}: {}", o.id, o.name, o.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
