use std::io::Write;

/// Uniformly sampled simulation output, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Sampling period, s.
    pub sample_dt: f64,
    /// Time of the first disturbance, if any.
    pub event_time: Option<f64>,
    pub state_names: Vec<String>,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
}

impl SimTrace {
    pub(crate) fn with_columns(names: Vec<String>, sample_dt: f64) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self {
            names,
            columns,
            sample_dt,
            event_time: None,
            state_names: Vec::new(),
            initial_state: Vec::new(),
            final_state: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, row: &[f64]) {
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn time(&self) -> &[f64] {
        &self.columns[0]
    }

    /// CSV with a header row; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.names)?;
        let mut row = Vec::with_capacity(self.names.len());
        for r in 0..self.len() {
            row.clear();
            row.extend(self.columns.iter().map(|c| c[r].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}
