use super::{build_ybus, BusKind, NetError, Network, YMatrix};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub voltages: DVector<Complex64>,
    /// Net complex power injected into the network at each bus.
    pub injections: DVector<Complex64>,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub ybus: YMatrix,
}

impl PowerFlowSolution {
    /// Generation at bus `i`: net injection plus the bus load.
    pub fn generation(&self, net: &Network, i: usize) -> Complex64 {
        self.injections[i] + Complex64::new(net.buses[i].p_load, net.buses[i].q_load)
    }
}

/// Newton-Raphson on the polar mismatch equations from a flat start.
///
/// PV buses hold `|V|` and `P`, PQ buses hold `P` and `Q`; the slack bus keeps
/// its scheduled voltage.
pub fn solve_power_flow(net: &Network, tolerance: f64, max_iter: usize) -> Result<PowerFlowSolution, NetError> {
    if !(tolerance > 0.0) {
        return Err(NetError::BadTolerance);
    }
    net.validate()?;
    let ybus = build_ybus(&net.buses, &net.branches)?;
    let n = net.buses.len();

    let pq: Vec<usize> = (0..n).filter(|&i| net.buses[i].kind == BusKind::Pq).collect();
    let pvpq: Vec<usize> = (0..n).filter(|&i| net.buses[i].kind != BusKind::Slack).collect();

    let mut vm: Vec<f64> = net
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Pq { 1.0 } else { b.voltage_magnitude })
        .collect();
    let mut va: Vec<f64> = net
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Slack { b.voltage_angle } else { 0.0 })
        .collect();
    let sched: Vec<Complex64> = net
        .buses
        .iter()
        .map(|b| Complex64::new(b.p_gen_setpoint - b.p_load, b.q_gen - b.q_load))
        .collect();

    let voltages = |vm: &[f64], va: &[f64]| DVector::from_iterator(n, (0..n).map(|i| Complex64::from_polar(vm[i], va[i])));

    let mut iterations = 0;
    loop {
        let v = voltages(&vm, &va);
        let s = ybus.injections(&v);
        let mut f = DVector::zeros(pvpq.len() + pq.len());
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - sched[i].re;
        }
        for (r, &i) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[i].im - sched[i].im;
        }
        let mismatch = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !mismatch.is_finite() {
            return Err(NetError::NonConvergence { iterations, mismatch });
        }
        if mismatch < tolerance {
            return Ok(PowerFlowSolution { voltages: v, injections: s, iterations, max_mismatch: mismatch, ybus });
        }
        if iterations >= max_iter {
            return Err(NetError::NonConvergence { iterations, mismatch });
        }

        let (ds_dva, ds_dvm) = power_derivatives(&ybus.y, &v);
        let nr = pvpq.len() + pq.len();
        let mut jac = DMatrix::zeros(nr, nr);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_dva[(i, k)].re;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(r, pvpq.len() + c)] = ds_dvm[(i, k)].re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(pvpq.len() + r, c)] = ds_dva[(i, k)].im;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(pvpq.len() + r, pvpq.len() + c)] = ds_dvm[(i, k)].im;
            }
        }
        let dx = jac.lu().solve(&f).ok_or(NetError::SingularJacobian(iterations))?;
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] -= dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] -= dx[pvpq.len() + r];
        }
        iterations += 1;
    }
}

/// Partial derivatives of bus power injections with respect to voltage
/// angles and magnitudes (dense complex form).
fn power_derivatives(y: &DMatrix<Complex64>, v: &DVector<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = v.len();
    let ibus = y * v;
    let vnorm = v.map(|x| x / x.norm());
    let j = Complex64::new(0.0, 1.0);
    let mut ds_dva = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut ds_dvm = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for k in 0..n {
            let diag_i = if i == k { ibus[i] } else { Complex64::new(0.0, 0.0) };
            // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
            ds_dva[(i, k)] = j * v[i] * (diag_i - y[(i, k)] * v[k]).conj();
            // dS/dVm = diag(V) conj(Y diag(Vn)) + conj(diag(I)) diag(Vn)
            ds_dvm[(i, k)] = v[i] * (y[(i, k)] * vnorm[k]).conj() + diag_i.conj() * vnorm[k];
        }
    }
    (ds_dva, ds_dvm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Branch, Bus};

    fn two_bus(p_load: f64) -> Network {
        let mk = |id, kind, p_load| Bus {
            id,
            kind,
            voltage_magnitude: 1.0,
            voltage_angle: 0.0,
            p_load,
            q_load: 0.0,
            p_gen_setpoint: 0.0,
            q_gen: 0.0,
        };
        Network {
            base_mva: 100.0,
            f_nominal_hz: 60.0,
            buses: vec![mk(1, BusKind::Slack, 0.0), mk(2, BusKind::Pq, p_load)],
            branches: vec![Branch {
                from_bus: 1,
                to_bus: 2,
                series_impedance: Complex64::new(0.01, 0.1),
                shunt_susceptance: 0.0,
                tap_ratio: 1.0,
            }],
        }
    }

    #[test]
    fn no_load_flat_start_needs_no_iterations() {
        let sol = solve_power_flow(&two_bus(0.0), 1e-10, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        for v in sol.voltages.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn wscc9_converges() {
        let net = Network::wscc9();
        let sol = solve_power_flow(&net, 1e-8, 10).unwrap();
        assert!(sol.iterations <= 10);
        // independent mismatch evaluation at the returned point
        let s = sol.ybus.injections(&sol.voltages);
        let mut worst = 0.0_f64;
        for (i, b) in net.buses.iter().enumerate() {
            match b.kind {
                BusKind::Slack => {}
                BusKind::Pv => worst = worst.max((s[i].re - (b.p_gen_setpoint - b.p_load)).abs()),
                BusKind::Pq => {
                    worst = worst.max((s[i].re - (b.p_gen_setpoint - b.p_load)).abs());
                    worst = worst.max((s[i].im - (b.q_gen - b.q_load)).abs());
                }
            }
        }
        assert!(worst < 1e-8, "{worst}");
        assert_eq!(sol.voltages[0].im, 0.0);
        for v in sol.voltages.iter() {
            assert!(v.norm() > 0.99 && v.norm() < 1.05);
        }
        // published values
        let deg = |i: usize| sol.voltages[i].arg().to_degrees();
        assert!((deg(1) - 9.28).abs() < 0.01);
        assert!((sol.voltages[4].norm() - 0.9956).abs() < 1e-3);
        let p1 = sol.generation(&net, 0);
        assert!((p1.re - 0.716).abs() < 1e-3 && (p1.im - 0.270).abs() < 1e-3);
        // power balance: generation = load + losses
        let gen: f64 = (0..9).map(|i| sol.generation(&net, i).re).sum();
        let load: f64 = net.buses.iter().map(|b| b.p_load).sum();
        let losses: f64 = net
            .branches
            .iter()
            .map(|br| {
                let f = net.bus_index(br.from_bus).unwrap();
                let t = net.bus_index(br.to_bus).unwrap();
                let i = (sol.voltages[f] - sol.voltages[t]) / br.series_impedance;
                br.series_impedance.re * i.norm_sqr()
            })
            .sum();
        assert!((gen - load - losses).abs() < 1e-8);
    }

    #[test]
    fn infeasible_load_fails() {
        let err = solve_power_flow(&two_bus(100.0), 1e-8, 20).unwrap_err();
        assert!(matches!(err, NetError::NonConvergence { .. } | NetError::SingularJacobian(_)));
    }

    #[test]
    fn bad_tolerance() {
        assert!(matches!(solve_power_flow(&two_bus(0.0), 0.0, 10), Err(NetError::BadTolerance)));
    }
}
