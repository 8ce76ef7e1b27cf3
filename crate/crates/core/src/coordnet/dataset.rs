use crate::sim::SimTrace;
use std::io::{Read, Write};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("trace {trace} has no `{column}` column")]
    MissingColumn { trace: usize, column: String },
    #[error("traces disagree on the number of generators")]
    UnitCountMismatch,
    #[error("requested {requested} samples but the traces hold {available}")]
    NotEnoughSamples { requested: usize, available: usize },
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("alpha must be finite")]
    BadAlpha,
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("row {row}: expected {expected} values, got {got}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("dataset has no `target_uc` column")]
    NoTarget,
    #[error("row {row}: {source}")]
    Parse { row: usize, source: std::num::ParseFloatError },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Name of the target column in dataset files.
pub const TARGET_COLUMN: &str = "target_uc";

/// Row-major input and target blocks with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(
        input_names: Vec<String>,
        target_names: Vec<String>,
        inputs: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        let (ni, no) = (input_names.len(), target_names.len());
        let k = if ni == 0 { 0 } else { inputs.len() / ni };
        if ni == 0 || no == 0 || inputs.len() != k * ni || targets.len() != k * no {
            return Err(DatasetError::Width { row: 0, expected: ni + no, got: inputs.len() + targets.len() });
        }
        let d = Self { input_names, target_names, inputs, targets };
        for r in 0..k {
            if d.input(r).iter().chain(d.target(r)).any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite(r));
            }
        }
        Ok(d)
    }

    pub fn n_in(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_out(&self) -> usize {
        self.target_names.len()
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.n_in().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row * self.n_in()..(row + 1) * self.n_in()]
    }

    pub fn target(&self, row: usize) -> &[f64] {
        &self.targets[row * self.n_out()..(row + 1) * self.n_out()]
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(rows.len() * self.n_in());
        let mut targets = Vec::with_capacity(rows.len() * self.n_out());
        for &r in rows {
            inputs.extend_from_slice(self.input(r));
            targets.extend_from_slice(self.target(r));
        }
        Self { input_names: self.input_names.clone(), target_names: self.target_names.clone(), inputs, targets }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.input_names.iter().chain(&self.target_names))?;
        let mut row = Vec::new();
        for r in 0..self.len() {
            row.clear();
            row.extend(self.input(r).iter().chain(self.target(r)).map(f64::to_string));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a CSV whose `target_uc` column is the target and every other
    /// column an input.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, DatasetError> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let ti = header.iter().position(|h| h == TARGET_COLUMN).ok_or(DatasetError::NoTarget)?;
        let input_names: Vec<String> =
            header.iter().enumerate().filter(|(i, _)| *i != ti).map(|(_, h)| h.clone()).collect();
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(DatasetError::Width { row, expected: header.len(), got: rec.len() });
            }
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|source| DatasetError::Parse { row, source })?;
                if i == ti {
                    targets.push(v);
                } else {
                    inputs.push(v);
                }
            }
        }
        Self::new(input_names, vec![TARGET_COLUMN.to_string()], inputs, targets)
    }
}

fn column<'a>(tr: &'a SimTrace, idx: usize, name: &str) -> Result<&'a [f64], DatasetError> {
    tr.column(name).ok_or_else(|| DatasetError::MissingColumn { trace: idx, column: name.to_string() })
}

fn unit_count(tr: &SimTrace) -> usize {
    (1..).take_while(|i| tr.column(&format!("omega_sg{i}_pu")).is_some()).count()
}

/// Builds `[P_wind, omega_1..omega_n, e] -> alpha * dP` samples from traces
/// recorded with the inertial loop active. `dP` is the washout controller
/// output on the turbine base.
///
/// Every step of every trace is one candidate row. With `n_samples` set,
/// that many rows are taken at an even stride across the concatenation.
pub fn generate_dataset(traces: &[SimTrace], alpha: f64, n_samples: Option<usize>) -> Result<Dataset, DatasetError> {
    if !alpha.is_finite() {
        return Err(DatasetError::BadAlpha);
    }
    if n_samples == Some(0) {
        return Err(DatasetError::ZeroSamples);
    }
    let n_units = traces.first().map_or(0, unit_count);
    let mut input_names = vec!["p_wind_pu".to_string()];
    input_names.extend((1..=n_units).map(|i| format!("omega_sg{i}_pu")));
    input_names.push("e_hz_s".to_string());

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (ti, tr) in traces.iter().enumerate() {
        if unit_count(tr) != n_units {
            return Err(DatasetError::UnitCountMismatch);
        }
        let cols: Vec<&[f64]> = input_names.iter().map(|n| column(tr, ti, n)).collect::<Result<_, _>>()?;
        let dp = column(tr, ti, "dp_wt_pu")?;
        for r in 0..tr.len() {
            inputs.extend(cols.iter().map(|c| c[r]));
            targets.push(alpha * dp[r]);
        }
    }
    let available = targets.len();
    let rows: Vec<usize> = match n_samples {
        None => (0..available).collect(),
        Some(n) if n > available => return Err(DatasetError::NotEnoughSamples { requested: n, available }),
        Some(n) => (0..n).map(|i| i * available / n).collect(),
    };
    let all = Dataset::new(input_names, vec![TARGET_COLUMN.to_string()], inputs, targets)?;
    Ok(if rows.len() == available { all } else { all.subset(&rows) })
}
