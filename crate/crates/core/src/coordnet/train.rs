use super::{predict, regression_r, Dataset, Gradients, Mlp, NetError, Scaler};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset has {0} rows, need at least 3")]
    TooSmall(usize),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Train, validation and test fractions.
    pub split_ratios: [f64; 3],
    pub seed: u64,
    /// Stop after this many epochs without a new best validation MSE.
    pub early_stop_patience: Option<usize>,
    /// Refit the min/max scalers on the training split before training.
    pub fit_scalers: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 500,
            split_ratios: [0.70, 0.15, 0.15],
            seed: 0,
            early_stop_patience: Some(50),
            fit_scalers: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.split_ratios.iter().any(|r| !(*r > 0.0)) || (self.split_ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("split ratios must be positive and sum to 1");
        }
        Ok(())
    }
}

/// Per-epoch curves and final fit quality. MSE values are in target units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub test_mse: Vec<f64>,
    /// 1-based epoch of the kept weights; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub final_test_mse: f64,
    /// `None` when a split has constant targets.
    pub r_train: Option<f64>,
    pub r_val: Option<f64>,
    pub r_test: Option<f64>,
    pub r_all: Option<f64>,
    pub sizes: [usize; 3],
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "train_mse", "val_mse", "test_mse"])?;
        for e in 0..self.train_mse.len() {
            wr.write_record([
                e.to_string(),
                self.train_mse[e].to_string(),
                self.val_mse[e].to_string(),
                self.test_mse[e].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Shuffled row indices of the three splits. Validation and test take the
/// floor of their share; the remainder goes to training.
pub fn split_indices(k: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3], TrainError> {
    if k < 3 {
        return Err(TrainError::TooSmall(k));
    }
    let n_val = (ratios[1] * k as f64).floor() as usize;
    let n_test = (ratios[2] * k as f64).floor() as usize;
    let n_train = k - n_val - n_test;
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok([idx, val, test])
}

pub fn split_dataset(data: &Dataset, ratios: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset), TrainError> {
    let [a, b, c] = split_indices(data.len(), ratios, seed)?;
    Ok((data.subset(&a), data.subset(&b), data.subset(&c)))
}

struct Scaled {
    s: Vec<f64>,
    t: Vec<f64>,
}

fn scale_rows(m: &Mlp, data: &Dataset, rows: &[usize]) -> Scaled {
    let mut s = vec![0.0; rows.len() * m.n_in];
    let mut t = vec![0.0; rows.len() * m.n_out];
    for (i, &r) in rows.iter().enumerate() {
        m.input_scaler.scale_input(data.input(r), &mut s[i * m.n_in..(i + 1) * m.n_in]);
        m.target_scaler.scale_target(data.target(r), &mut t[i * m.n_out..(i + 1) * m.n_out]);
    }
    Scaled { s, t }
}

/// MSE in target units over `rows`, using inputs scaled once up front.
fn split_mse(m: &Mlp, scaled: &[f64], data: &Dataset, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let mut h = vec![0.0; m.n_hidden];
    let mut o = vec![0.0; m.n_out];
    let mut y = vec![0.0; m.n_out];
    let mut sum = 0.0;
    for &r in rows {
        m.forward_scaled(&scaled[r * m.n_in..(r + 1) * m.n_in], &mut h, &mut o);
        m.target_scaler.unscale_target(&o, &mut y);
        sum += y.iter().zip(data.target(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    sum / rows.len() as f64
}

fn split_r(m: &Mlp, data: &Dataset, rows: &[usize]) -> Result<Option<f64>, NetError> {
    let preds = predict(m, data, rows)?;
    match regression_r(&preds, &data.subset(rows).targets) {
        Ok(r) => Ok(Some(r)),
        Err(NetError::ZeroVariance | NetError::EmptyBatch) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Mini-batch gradient descent on the training split, keeping the weights
/// with the lowest validation MSE.
pub fn train(init: &Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, TrainReport), TrainError> {
    cfg.validate()?;
    init.validate()?;
    init.check_data(data)?;
    let [tr, va, te] = split_indices(data.len(), cfg.split_ratios, cfg.seed)?;

    let mut m = init.clone();
    if cfg.fit_scalers {
        let sub = data.subset(&tr);
        m.input_scaler = Scaler::fit(&sub.inputs, m.n_in);
        m.target_scaler = Scaler::fit(&sub.targets, m.n_out);
    }
    let scaled = scale_rows(&m, data, &tr);
    let all: Vec<usize> = (0..data.len()).collect();
    let all_s = scale_rows(&m, data, &all).s;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut g = Gradients::zeros(&m);
    let mut h = vec![0.0; m.n_hidden];
    let mut o = vec![0.0; m.n_out];

    let mut best = (m.clone(), split_mse(&m, &all_s, data, &va), 0usize);
    let (mut train_c, mut val_c, mut test_c) = (Vec::new(), Vec::new(), Vec::new());
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for v in g.w1.iter_mut().chain(&mut g.b1).chain(&mut g.w2).chain(&mut g.b2) {
                *v = 0.0;
            }
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &scaled.s[i * m.n_in..(i + 1) * m.n_in];
                let t = &scaled.t[i * m.n_out..(i + 1) * m.n_out];
                m.accumulate(s, t, w, &mut g, &mut h, &mut o);
            }
            m.step(&g, cfg.learning_rate);
        }
        let (a, b, c) = (split_mse(&m, &all_s, data, &tr), split_mse(&m, &all_s, data, &va), split_mse(&m, &all_s, data, &te));
        if !a.is_finite() || m.w1.iter().chain(&m.w2).any(|v| !v.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        train_c.push(a);
        val_c.push(b);
        test_c.push(c);
        if b < best.1 || best.1.is_nan() {
            best = (m.clone(), b, epoch);
        }
        if let Some(p) = cfg.early_stop_patience {
            if epoch - best.2 >= p {
                break;
            }
        }
    }

    let (m, best_val, best_epoch) = best;
    let report = TrainReport {
        best_epoch,
        best_val_mse: best_val,
        final_train_mse: split_mse(&m, &all_s, data, &tr),
        final_val_mse: best_val,
        final_test_mse: split_mse(&m, &all_s, data, &te),
        r_train: split_r(&m, data, &tr)?,
        r_val: split_r(&m, data, &va)?,
        r_test: split_r(&m, data, &te)?,
        r_all: split_r(&m, data, &all)?,
        sizes: [tr.len(), va.len(), te.len()],
        train_mse: train_c,
        val_mse: val_c,
        test_mse: test_c,
    };
    Ok((m, report))
}
