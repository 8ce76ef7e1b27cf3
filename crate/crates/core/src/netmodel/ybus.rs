use super::{check_branch, Branch, Bus, NetError};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::HashMap;

/// Dense nodal admittance matrix, rows and columns in bus-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct YMatrix {
    pub bus_ids: Vec<u32>,
    pub y: DMatrix<Complex64>,
}

impl YMatrix {
    pub fn dim(&self) -> usize {
        self.bus_ids.len()
    }

    /// Bus current injections `I = Y V`.
    pub fn currents(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.y * v
    }

    /// Bus complex power injections `S = V conj(Y V)`.
    pub fn injections(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let i = self.currents(v);
        v.zip_map(&i, |vk, ik| vk * ik.conj())
    }

    /// Real-valued `[Re; Im]` block form of the matrix, `2n x 2n`, so that
    /// `[Ir; Ii] = G [Vr; Vi]`.
    pub fn real_form(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for k in 0..n {
                let y = self.y[(i, k)];
                g[(i, k)] = y.re;
                g[(i, n + k)] = -y.im;
                g[(n + i, k)] = y.im;
                g[(n + i, n + k)] = y.re;
            }
        }
        g
    }
}

/// Standard nodal assembly of pi-model branches. Loads are not included.
pub fn build_ybus(buses: &[Bus], branches: &[Branch]) -> Result<YMatrix, NetError> {
    let mut idx = HashMap::with_capacity(buses.len());
    for (i, b) in buses.iter().enumerate() {
        if idx.insert(b.id, i).is_some() {
            return Err(NetError::DuplicateBus(b.id));
        }
    }
    let n = buses.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in branches {
        check_branch(br, &idx)?;
        let f = idx[&br.from_bus];
        let t = idx[&br.to_bus];
        let ys = br.series_impedance.inv();
        let ysh = Complex64::new(0.0, br.shunt_susceptance / 2.0);
        let tap = br.tap_ratio;
        y[(f, f)] += (ys + ysh) / (tap * tap);
        y[(t, t)] += ys + ysh;
        y[(f, t)] -= ys / tap;
        y[(t, f)] -= ys / tap;
    }
    Ok(YMatrix { bus_ids: buses.iter().map(|b| b.id).collect(), y })
}
