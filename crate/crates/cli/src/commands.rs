use crate::output::{csv_error, write_atomic, write_string};
use crate::report::ComparisonReport;
use crate::scenario::Scenario;
use crate::svg::{Chart, Series};
use crate::CliError;
use freqcoord::coordnet::{generate_dataset, predict, train, Dataset, Mlp, TrainReport};
use freqcoord::netmodel::{solve_power_flow, Event, PowerFlowSolution};
use freqcoord::sim::{
    compute_metrics, farm_dispatch, run_scenario, ControllerMode, Metrics, PowerSystem, SimTrace, PF_MAX_ITER,
    PF_TOLERANCE,
};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

pub struct PowerFlowOutcome {
    pub solution: PowerFlowSolution,
    pub bus_ids: Vec<u32>,
    pub seconds: f64,
}

/// Solves the power flow with the farm's dispatch included and writes
/// `powerflow.csv`.
pub fn cmd_powerflow(sc: &Scenario) -> Result<PowerFlowOutcome, CliError> {
    let net = sc.network()?;
    let devices = sc.devices(net.f_nominal_hz)?;
    let (net, _, _) = farm_dispatch(net, &devices)?;
    let start = Instant::now();
    let solution = solve_power_flow(&net, PF_TOLERANCE, PF_MAX_ITER)?;
    let seconds = start.elapsed().as_secs_f64();
    let bus_ids: Vec<u32> = net.buses.iter().map(|b| b.id).collect();

    println!("converged in {} iterations, max mismatch {:.3e} pu", solution.iterations, solution.max_mismatch);
    println!("{:>5} {:>10} {:>11} {:>10} {:>10}", "bus", "|V| pu", "angle deg", "P pu", "Q pu");
    for (i, id) in bus_ids.iter().enumerate() {
        let v = solution.voltages[i];
        let s = solution.injections[i];
        println!("{id:>5} {:>10.6} {:>11.5} {:>10.5} {:>10.5}", v.norm(), v.arg().to_degrees(), s.re, s.im);
    }
    write_atomic(&sc.out_dir.join("powerflow.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bus", "vm_pu", "va_deg", "p_inj_pu", "q_inj_pu"]).map_err(csv_error)?;
        for (i, id) in bus_ids.iter().enumerate() {
            let v = solution.voltages[i];
            let s = solution.injections[i];
            wr.write_record([
                id.to_string(),
                v.norm().to_string(),
                v.arg().to_degrees().to_string(),
                s.re.to_string(),
                s.im.to_string(),
            ])
            .map_err(csv_error)?;
        }
        wr.flush()
    })?;
    Ok(PowerFlowOutcome { solution, bus_ids, seconds })
}

fn metrics_header() -> [&'static str; 8] {
    ["mode", "f_nadir_hz", "t_nadir_s", "rocof_hz_s", "f_ss_hz", "area_s_hz_s", "uc_end_pu", "rocof_window_s"]
}

fn metrics_row(mode: ControllerMode, m: &Metrics, uc_end: f64, window: f64) -> Vec<String> {
    vec![
        mode.to_string(),
        m.f_nadir.to_string(),
        m.t_nadir.to_string(),
        m.rocof.to_string(),
        m.f_ss.to_string(),
        m.area_s.to_string(),
        uc_end.to_string(),
        window.to_string(),
    ]
}

pub fn write_metrics(path: &Path, rows: &[(ControllerMode, Metrics, f64)], window: f64) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(metrics_header()).map_err(csv_error)?;
        for (mode, m, uc) in rows {
            wr.write_record(metrics_row(*mode, m, *uc, window)).map_err(csv_error)?;
        }
        wr.flush()
    })
}

fn write_trace(path: &Path, tr: &SimTrace) -> Result<(), CliError> {
    write_atomic(path, |w| tr.write_csv(w).map_err(csv_error))
}

fn frequency_chart(tr: &SimTrace, title: &str) -> Chart {
    let t = tr.time();
    let mut chart = Chart::new(title, "time (s)", "frequency (Hz)");
    for i in 1.. {
        match tr.column(&format!("f_sg{i}_hz")) {
            Some(f) => chart.series.push(Series::line(format!("SG{i}"), t, f)),
            None => break,
        }
    }
    if let Some(f) = tr.column("f_coi_hz") {
        chart.series.push(Series::line("COI", t, f));
    }
    chart
}

fn final_value(tr: &SimTrace, col: &str) -> f64 {
    tr.column(col).and_then(|c| c.last().copied()).unwrap_or(0.0)
}

pub struct SimOutcome {
    pub trace: SimTrace,
    pub metrics: Option<Metrics>,
    pub seconds: f64,
}

/// Runs the scenario in its configured mode and writes the trace, metrics
/// and plots.
pub fn cmd_simulate(sc: &Scenario) -> Result<SimOutcome, CliError> {
    let sys = sc.build_system()?;
    let policy = match sc.sim.mode {
        ControllerMode::Coordinated => Some(sc.weights()?),
        _ => None,
    };
    let cfg = sc.sim_config(sc.sim.mode, policy);
    let start = Instant::now();
    let trace = run_scenario(&sys, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let event_t = trace.event_time.unwrap_or(0.0);
    let metrics = compute_metrics(&trace, event_t, sc.sim.rocof_window).ok();

    write_trace(&sc.out_dir.join("trace.csv"), &trace)?;
    if let Some(m) = &metrics {
        write_metrics(
            &sc.out_dir.join("metrics.csv"),
            &[(sc.sim.mode, *m, final_value(&trace, "uc_pu"))],
            sc.sim.rocof_window,
        )?;
        println!(
            "nadir {:.5} Hz at {:.3} s, RoCoF {:.5} Hz/s, f_ss {:.5} Hz, S {:.5} Hz s",
            m.f_nadir, m.t_nadir, m.rocof, m.f_ss, m.area_s
        );
    }
    write_string(
        &sc.out_dir.join("frequency.svg"),
        &frequency_chart(&trace, "Frequency of all synchronous generators").render(),
    )?;
    let t = trace.time();
    let mut ctl = Chart::new("Wind farm support and coordination signal", "time (s)", "pu");
    for (name, col) in [("dP farm (system pu)", "dp_pu"), ("u_c", "uc_pu")] {
        if let Some(c) = trace.column(col) {
            ctl.series.push(Series::line(name, t, c));
        }
    }
    write_string(&sc.out_dir.join("control.svg"), &ctl.render())?;
    println!("simulated {} s in {:.3} s", sc.sim.t_end, seconds);
    Ok(SimOutcome { trace, metrics, seconds })
}

/// Inertial-mode runs for each load-step size in the sweep, in parallel.
pub fn inertial_traces(sc: &Scenario, sys: &PowerSystem) -> Result<Vec<SimTrace>, CliError> {
    if sc.dataset.fractions.is_empty() {
        return Err(CliError::config("dataset.fractions is empty"));
    }
    let results: Vec<Result<SimTrace, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = sc
            .dataset
            .fractions
            .iter()
            .map(|&fraction| {
                s.spawn(move || {
                    let mut cfg = sc.sim_config(ControllerMode::Inertial, None);
                    cfg.t_end = sc.dataset.t_end;
                    cfg.record_every = 1;
                    cfg.events = vec![Event::LoadStep { bus: sc.dataset.bus, fraction, t: 0.0 }];
                    run_scenario(sys, &cfg).map_err(CliError::from)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    results.into_iter().collect()
}

pub fn dataset_from_traces(sc: &Scenario, traces: &[SimTrace], alpha: f64) -> Result<Dataset, CliError> {
    if sc.dataset.n_samples == 0 {
        return Err(CliError::config("dataset.n_samples must be positive"));
    }
    Ok(generate_dataset(traces, alpha, Some(sc.dataset.n_samples))?)
}

/// Records the inertial sweep and writes the sampled dataset.
pub fn cmd_gen_dataset(sc: &Scenario) -> Result<Dataset, CliError> {
    if sc.dataset.n_samples == 0 {
        return Err(CliError::config("dataset.n_samples must be positive"));
    }
    let sys = sc.build_system()?;
    let traces = inertial_traces(sc, &sys)?;
    let data = dataset_from_traces(sc, &traces, sc.dataset.alpha)?;
    let path = sc.out_dir.join("dataset.csv");
    write_atomic(&path, |w| data.write_csv(w).map_err(std::io::Error::other))?;
    println!("wrote {} samples (alpha = {}) to {}", data.len(), sc.dataset.alpha, path.display());
    Ok(data)
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Dataset::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Trains a fresh network on `data` and writes weights, curves and plots
/// into `dir`.
pub fn train_into(sc: &Scenario, data: &Dataset, dir: &Path) -> Result<(Mlp, TrainReport), CliError> {
    let init = Mlp::new(data.n_in(), sc.train.hidden, data.n_out(), sc.seed);
    let (m, rep) = train(&init, data, &sc.train_config())?;
    write_string(&dir.join("weights.json"), &m.to_json()?)?;
    write_atomic(&dir.join("train_report.csv"), |w| rep.write_csv(w).map_err(csv_error))?;

    let epochs: Vec<f64> = (1..=rep.train_mse.len()).map(|e| e as f64).collect();
    let mut mse = Chart::new("Training performance", "epoch", "MSE");
    mse.log_y = true;
    mse.series.push(Series::line("train", &epochs, &rep.train_mse));
    mse.series.push(Series::line("validation", &epochs, &rep.val_mse));
    mse.series.push(Series::line("test", &epochs, &rep.test_mse));
    write_string(&dir.join("mse.svg"), &mse.render())?;

    let rows: Vec<usize> = (0..data.len()).collect();
    let preds = predict(&m, data, &rows)?;
    let r = rep.r_all.map_or("n/a".to_string(), |r| format!("{r:.6}"));
    let reg = Chart::new(&format!("Regression, all data (R = {r})"), "target", "output")
        .with(Series::points("samples", &data.targets, &preds))
        .with(Series::line("y = t", &data.targets, &data.targets));
    write_string(&dir.join("regression.svg"), &reg.render())?;
    Ok((m, rep))
}

pub fn cmd_train(sc: &Scenario) -> Result<(Mlp, TrainReport), CliError> {
    let data = read_dataset(&sc.dataset_path())?;
    let (m, rep) = train_into(sc, &data, &sc.out_dir)?;
    let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{r:.6}"));
    println!(
        "best epoch {} of {}, MSE train {:.3e} val {:.3e} test {:.3e}, R train {} val {} test {} all {}",
        rep.best_epoch,
        rep.train_mse.len(),
        rep.final_train_mse,
        rep.final_val_mse,
        rep.final_test_mse,
        fmt(rep.r_train),
        fmt(rep.r_val),
        fmt(rep.r_test),
        fmt(rep.r_all)
    );
    Ok((m, rep))
}

/// Runs the three controller modes side by side with the given network.
pub fn compare_with(sc: &Scenario, sys: &PowerSystem, mlp: Arc<Mlp>) -> Result<(ComparisonReport, [SimTrace; 3]), CliError> {
    let modes = [ControllerMode::None, ControllerMode::Inertial, ControllerMode::Coordinated];
    let runs: Vec<Result<SimTrace, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&mode| {
                let policy = (mode == ControllerMode::Coordinated).then(|| mlp.clone());
                s.spawn(move || run_scenario(sys, &sc.sim_config(mode, policy)).map_err(CliError::from))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut traces = Vec::with_capacity(3);
    for r in runs {
        traces.push(r?);
    }
    let event_t = traces[0].event_time.unwrap_or(0.0);
    let mut metrics = Vec::with_capacity(3);
    for tr in &traces {
        metrics.push(compute_metrics(tr, event_t, sc.sim.rocof_window)?);
    }
    let report = ComparisonReport::new(
        sys.f_nominal,
        [metrics[0], metrics[1], metrics[2]],
        final_value(&traces[2], "uc_pu"),
        sc.sim.rocof_window,
    );
    let traces: [SimTrace; 3] = traces.try_into().map_err(|_| CliError::config("expected three runs"))?;
    Ok((report, traces))
}

pub fn write_comparison(dir: &Path, report: &ComparisonReport, traces: &[SimTrace; 3]) -> Result<(), CliError> {
    report.write(dir)?;
    let t = traces[0].time();
    let mut chart = Chart::new("COI frequency by controller mode", "time (s)", "frequency (Hz)");
    for (name, tr) in ["none", "inertial", "coordinated"].iter().zip(traces) {
        if let Some(f) = tr.column("f_coi_hz") {
            chart.series.push(Series::line(*name, t, f));
        }
    }
    write_string(&dir.join("compare_frequency.svg"), &chart.render())?;
    if let Some(uc) = traces[2].column("uc_pu") {
        let c = Chart::new("Coordination signal", "time (s)", "u_c (pu)").with(Series::line("u_c", t, uc));
        write_string(&dir.join("compare_uc.svg"), &c.render())?;
    }
    Ok(())
}

pub fn cmd_compare(sc: &Scenario) -> Result<ComparisonReport, CliError> {
    let mlp = sc.weights()?;
    let sys = sc.build_system()?;
    let (report, traces) = compare_with(sc, &sys, mlp)?;
    write_comparison(&sc.out_dir, &report, &traces)?;
    print!("{}", report.summary());
    Ok(report)
}

/// One alpha of the sweep.
pub struct SweepEntry {
    pub alpha: f64,
    pub train: TrainReport,
    pub report: ComparisonReport,
}

pub struct PipelineOutcome {
    pub entries: Vec<SweepEntry>,
    /// Index of the kept entry: smallest coordinated area S.
    pub best: usize,
    pub seconds: f64,
}

/// Dataset, training and comparison for every alpha in `compare.alphas`.
/// Each alpha gets its own subdirectory; the run with the smallest
/// coordinated area S is copied to the output root.
pub fn cmd_pipeline(sc: &Scenario) -> Result<PipelineOutcome, CliError> {
    if sc.compare.alphas.is_empty() {
        return Err(CliError::config("compare.alphas is empty"));
    }
    let start = Instant::now();
    let sys = sc.build_system()?;
    let traces = inertial_traces(sc, &sys)?;
    let mut entries = Vec::new();
    let mut outputs = Vec::new();
    for &alpha in &sc.compare.alphas {
        let dir = sc.out_dir.join(format!("alpha_{alpha}"));
        let data = dataset_from_traces(sc, &traces, alpha)?;
        write_atomic(&dir.join("dataset.csv"), |w| data.write_csv(w).map_err(std::io::Error::other))?;
        let (m, train) = train_into(sc, &data, &dir)?;
        let (report, runs) = compare_with(sc, &sys, Arc::new(m.clone()))?;
        write_comparison(&dir, &report, &runs)?;
        println!(
            "alpha {alpha}: nadir {:+.2}%, RoCoF {:+.2}%, S {:.5} Hz s, u_c(end) {:.3e}",
            report.vs_inertial.nadir_pct, report.vs_inertial.rocof_pct, report.modes[2].area_s, report.uc_end
        );
        entries.push(SweepEntry { alpha, train, report });
        outputs.push((m, runs));
    }
    let best = (0..entries.len())
        .min_by(|&a, &b| entries[a].report.modes[2].area_s.total_cmp(&entries[b].report.modes[2].area_s))
        .unwrap_or(0);

    write_atomic(&sc.out_dir.join("alpha_sweep.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "alpha",
            "best_epoch",
            "val_mse",
            "area_s_hz_s",
            "nadir_improvement_pct",
            "rocof_improvement_pct",
            "uc_end_pu",
            "selected",
        ])
        .map_err(csv_error)?;
        for (i, e) in entries.iter().enumerate() {
            wr.write_record([
                e.alpha.to_string(),
                e.train.best_epoch.to_string(),
                e.train.best_val_mse.to_string(),
                e.report.modes[2].area_s.to_string(),
                e.report.vs_inertial.nadir_pct.to_string(),
                e.report.vs_inertial.rocof_pct.to_string(),
                e.report.uc_end.to_string(),
                (i == best).to_string(),
            ])
            .map_err(csv_error)?;
        }
        wr.flush()
    })?;
    let (m, runs) = &outputs[best];
    write_string(&sc.out_dir.join("weights.json"), &m.to_json()?)?;
    write_comparison(&sc.out_dir, &entries[best].report, runs)?;
    println!("selected alpha {}", entries[best].alpha);
    print!("{}", entries[best].report.summary());
    Ok(PipelineOutcome { entries, best, seconds: start.elapsed().as_secs_f64() })
}
