//! Splitting, training, evaluation metrics, and the experiment runners for
//! the architecture sweep and the feature-group ablation.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{encode_dataset, fit_encoder, Dataset, EncodedCase, EncodedDataset, FeatureError, Task};
use crate::model::{ModelConfig, ModelError, Predictor, Variant};
use crate::neural::{CellType, ParameterStore};

/// Targets at or below this many days are left out of MAPE.
pub const MAPE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset too small to split: {0} cases, need at least 10")]
    TooSmall(usize),
    #[error("invalid split fractions {0:?}")]
    Fractions([f64; 3]),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("MAPE undefined: every target is below {MAPE_EPSILON} days")]
    MapeUndefined,
    #[error("{pred} predictions for {truth} targets")]
    Length { pred: usize, truth: usize },
    #[error("invalid train config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Splitting

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.1,
            test: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// Partitions case ids into train/valid/test of sizes `⌊f_train·n⌋`,
/// `⌊f_valid·n⌋` and the remainder. Ids are sorted and deduplicated before
/// the seeded shuffle, so input order does not matter.
pub fn split(case_ids: &[String], spec: &SplitSpec) -> Result<Split, TrainError> {
    let fr = [spec.train, spec.valid, spec.test];
    if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(TrainError::Fractions(fr));
    }
    let mut ids: Vec<String> = case_ids.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    if n < 10 {
        return Err(TrainError::TooSmall(n));
    }
    let n_train = (spec.train * n as f64 + 1e-9).floor() as usize;
    let n_valid = (spec.valid * n as f64 + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let test = ids.split_off(n_train + n_valid);
    let valid = ids.split_off(n_train);
    Ok(Split {
        train: ids,
        valid,
        test,
    })
}

// ---------------------------------------------------------------------------
// Metrics

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<(), TrainError> {
    if pred.len() != truth.len() {
        return Err(TrainError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(TrainError::Empty("metric input"));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, TrainError> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, TrainError> {
    check_pair(pred, truth)?;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Mean absolute percentage error as a fraction, over targets above
/// [`MAPE_EPSILON`].
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64, TrainError> {
    check_pair(pred, truth)?;
    let (sum, n) = pred
        .iter()
        .zip(truth)
        .filter(|(_, t)| **t > MAPE_EPSILON)
        .fold((0.0, 0usize), |(s, n), (p, t)| (s + (p - t).abs() / t, n + 1));
    if n == 0 {
        return Err(TrainError::MapeUndefined);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub n_test: usize,
    pub wall_s: f64,
}

impl MetricsReport {
    pub fn from_predictions(task: Task, pred: &[f64], truth: &[f64], wall_s: f64) -> Result<Self, TrainError> {
        Ok(Self {
            task,
            mae: mae(pred, truth)?,
            rmse: rmse(pred, truth)?,
            mape: mape(pred, truth)?,
            n_test: pred.len(),
            wall_s,
        })
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: MAE {:.3} d, RMSE {:.3} d, MAPE {:.4} (n={}, {:.1}s)",
            self.task, self.mae, self.rmse, self.mape, self.n_test, self.wall_s
        )
    }
}

pub fn evaluate(predictor: &Predictor, test: &EncodedDataset) -> Result<MetricsReport, TrainError> {
    let start = Instant::now();
    let pred = predictor.predict_encoded(&test.cases)?;
    let truth: Vec<f64> = test.cases.iter().map(|c| c.target_days).collect();
    MetricsReport::from_predictions(test.task, &pred, &truth, start.elapsed().as_secs_f64())
}

// ---------------------------------------------------------------------------
// Optimizers

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Record zero wall-clock time so reruns produce identical histories.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience cannot exceed max_epochs");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("moment decays must lie in [0, 1) and epsilon be positive");
        }
        Ok(())
    }
}

/// First-order optimizer state over a [`ParameterStore`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(cfg: &TrainConfig, store: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update from the accumulated gradients.
    pub fn step(&mut self, store: &mut ParameterStore) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in p.value.iter_mut().zip(&p.grad) {
                        *w -= self.lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    for k in 0..p.value.len() {
                        let g = p.grad[k];
                        m[k] = b1 * m[k] + (1.0 - b1) * g;
                        v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        p.value[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop

/// A model the training loop can optimize.
pub trait Trainable {
    type Example;

    fn params(&self) -> &ParameterStore;
    fn params_mut(&mut self) -> &mut ParameterStore;
    /// Forward and backward over `batch`; gradients are added to the store.
    /// Returns the batch loss.
    fn loss_and_backward(&mut self, batch: &[&Self::Example]) -> Result<f64, TrainError>;
    /// Validation mean absolute error in target units.
    fn validation_mae(&self, valid: &[Self::Example]) -> Result<f64, TrainError>;
    /// Sequence length used to bucket batches.
    fn example_len(example: &Self::Example) -> usize;
}

impl Trainable for Predictor {
    type Example = EncodedCase;

    fn params(&self) -> &ParameterStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn loss_and_backward(&mut self, batch: &[&EncodedCase]) -> Result<f64, TrainError> {
        let tape = self.forward_batch(batch)?;
        self.backward(&tape)?;
        Ok(tape.loss)
    }

    fn validation_mae(&self, valid: &[EncodedCase]) -> Result<f64, TrainError> {
        let pred = self.predict_encoded(valid)?;
        let truth: Vec<f64> = valid.iter().map(|c| c.target_days).collect();
        mae(&pred, &truth)
    }

    fn example_len(example: &EncodedCase) -> usize {
        example.steps.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_mae_days: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn best_valid_mae(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.valid_mae_days).reduce(f64::min)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["epoch", "train_loss", "valid_mae_days", "wall_s"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                crate::decimal::to_text(e.train_loss),
                crate::decimal::to_text(e.valid_mae_days),
                crate::decimal::to_text(e.wall_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a history CSV. The best epoch is recomputed from the records.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, TrainError> {
        let mut r = csv::Reader::from_reader(source);
        let mut epochs = Vec::new();
        for rec in r.deserialize() {
            let e: EpochRecord = rec?;
            epochs.push(e);
        }
        let best_epoch = epochs
            .iter()
            .min_by(|a, b| a.valid_mae_days.total_cmp(&b.valid_mae_days))
            .map_or(0, |e| e.epoch);
        Ok(Self { epochs, best_epoch })
    }
}

fn batches<E, M: Trainable<Example = E>>(data: &[E], size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    idx.sort_by_key(|&i| M::example_len(&data[i]));
    let mut out: Vec<Vec<usize>> = idx.chunks(size).map(<[usize]>::to_vec).collect();
    out.shuffle(rng);
    out
}

/// Mini-batch training with early stopping on validation MAE. On return the
/// model holds the parameters of the best validation epoch.
pub fn train<M: Trainable>(
    model: &mut M,
    train_set: &[M::Example],
    valid_set: &[M::Example],
    cfg: &TrainConfig,
) -> Result<History, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::Empty("training partition"));
    }
    if valid_set.is_empty() {
        return Err(TrainError::Empty("validation partition"));
    }
    let mut opt = Optimizer::new(cfg, model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = History::default();
    let mut best = (f64::INFINITY, model.params().flat_values());
    let mut since_best = 0;
    let start = Instant::now();
    for epoch in 1..=cfg.max_epochs {
        let mut loss_sum = 0.0;
        let mut n_seen = 0usize;
        for b in batches::<_, M>(train_set, cfg.batch_size, &mut rng) {
            let batch: Vec<&M::Example> = b.iter().map(|&i| &train_set[i]).collect();
            model.params_mut().zero_grads();
            let loss = model.loss_and_backward(&batch)?;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, loss });
            }
            opt.step(model.params_mut());
            loss_sum += loss * batch.len() as f64;
            n_seen += batch.len();
        }
        let valid_mae = model.validation_mae(valid_set)?;
        if !valid_mae.is_finite() {
            return Err(TrainError::Divergence { epoch, loss: valid_mae });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_seen as f64,
            valid_mae_days: valid_mae,
            wall_s: if cfg.deterministic {
                0.0
            } else {
                start.elapsed().as_secs_f64()
            },
        });
        if valid_mae < best.0 {
            best = (valid_mae, model.params().flat_values());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params_mut().set_flat_values(&best.1).map_err(ModelError::from)?;
    model.params_mut().zero_grads();
    Ok(history)
}

// ---------------------------------------------------------------------------
// Experiments

/// Everything needed to train and test one predictor on one task.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

impl ExperimentConfig {
    /// Desk-scale preset for the synthetic benchmark: a shorter schedule
    /// with a larger step size than the defaults.
    pub fn benchmark() -> Self {
        Self {
            train: TrainConfig {
                learning_rate: 3e-3,
                max_epochs: 40,
                patience: 6,
                deterministic: true,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    /// Uses `seed` for the split, the initialization and the batch order.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.train.seed = seed;
        self.split.seed = seed;
        self
    }
}

pub struct ExperimentResult {
    pub predictor: Predictor,
    pub history: History,
    pub report: MetricsReport,
    /// Training plus evaluation time.
    pub wall_s: f64,
}

/// Splits, fits the encoder on the training cases, trains and tests.
pub fn run_experiment(data: &Dataset, task: Task, cfg: &ExperimentConfig) -> Result<ExperimentResult, TrainError> {
    let start = Instant::now();
    let parts = split(&data.case_ids(), &cfg.split)?;
    let train_data = data.subset(&parts.train);
    let encoder = Arc::new(fit_encoder(&train_data)?);
    let blocks = cfg.model.variant.blocks();
    let train_set = encode_dataset(&train_data, &encoder, task, blocks)?;
    let valid_set = encode_dataset(&data.subset(&parts.valid), &encoder, task, blocks)?;
    let test_set = encode_dataset(&data.subset(&parts.test), &encoder, task, blocks)?;
    let mut predictor = Predictor::build(cfg.model.clone(), encoder, task)?;
    let history = train(&mut predictor, &train_set.cases, &valid_set.cases, &cfg.train)?;
    let mut report = evaluate(&predictor, &test_set)?;
    if cfg.train.deterministic {
        report.wall_s = 0.0;
    }
    Ok(ExperimentResult {
        predictor,
        history,
        report,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

fn run_all<T: Send, F>(jobs: usize, n: usize, f: F) -> Result<Vec<T>, TrainError>
where
    F: Fn(usize) -> Result<T, TrainError> + Sync + Send,
{
    if jobs <= 1 {
        return (0..n).map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| TrainError::Config(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Row label: a variant name or an architecture name.
    pub method: String,
    pub seed: u64,
    pub report: MetricsReport,
    pub best_epoch: usize,
}

/// Results of an ablation or architecture sweep: one row per
/// (method, task, seed).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub methods: Vec<String>,
    pub tasks: Vec<Task>,
    pub rows: Vec<ResultRow>,
}

/// Seed-averaged metrics for one (method, task) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub wall_s: f64,
    pub n_seeds: usize,
}

/// Seed-averaged metrics of one (method, task) cell, as written to summary
/// CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub task: Task,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub wall_s: f64,
    pub n_seeds: usize,
}

/// Reads a CSV written by [`ResultTable::write_summary_csv`].
pub fn read_summary_csv<R: Read>(source: R) -> Result<Vec<SummaryRow>, TrainError> {
    let mut r = csv::Reader::from_reader(source);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

impl ResultTable {
    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn get(&self, method: &str, task: Task, seed: u64) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.report.task == task && r.seed == seed)
            .map(|r| &r.report)
    }

    pub fn summary(&self, method: &str, task: Task) -> Option<CellSummary> {
        let rs: Vec<&MetricsReport> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.report.task == task)
            .map(|r| &r.report)
            .collect();
        if rs.is_empty() {
            return None;
        }
        let n = rs.len() as f64;
        Some(CellSummary {
            mae: rs.iter().map(|r| r.mae).sum::<f64>() / n,
            rmse: rs.iter().map(|r| r.rmse).sum::<f64>() / n,
            mape: rs.iter().map(|r| r.mape).sum::<f64>() / n,
            wall_s: rs.iter().map(|r| r.wall_s).sum::<f64>() / n,
            n_seeds: rs.len(),
        })
    }

    /// One seed-averaged row per (method, task), in table order.
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for m in &self.methods {
            for &task in &self.tasks {
                if let Some(s) = self.summary(m, task) {
                    out.push(SummaryRow {
                        method: m.clone(),
                        task,
                        mae: s.mae,
                        rmse: s.rmse,
                        mape: s.mape,
                        wall_s: s.wall_s,
                        n_seeds: s.n_seeds,
                    });
                }
            }
        }
        out
    }

    /// Writes [`Self::summary_rows`] as CSV, for plotting tools.
    pub fn write_summary_csv<W: Write>(&self, sink: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(sink);
        for row in self.summary_rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Markdown table: rows are methods, column groups are tasks.
    /// `third` picks the third metric column (MAPE or Cost).
    pub fn to_markdown(&self, third: ThirdColumn) -> String {
        let mut s = String::new();
        let third_name = match third {
            ThirdColumn::Mape => "MAPE",
            ThirdColumn::Cost => "Cost (s)",
        };
        let _ = writeln!(s, "### {}\n", self.title);
        let _ = write!(s, "| |");
        for t in &self.tasks {
            let _ = write!(s, " {} MAE | {} RMSE | {} {} |", t, t, t, third_name);
        }
        let _ = writeln!(s);
        let _ = write!(s, "|---|");
        for _ in &self.tasks {
            let _ = write!(s, "---:|---:|---:|");
        }
        let _ = writeln!(s);
        for m in &self.methods {
            let _ = write!(s, "| {m} |");
            for &t in &self.tasks {
                match self.summary(m, t) {
                    Some(c) => {
                        let x = match third {
                            ThirdColumn::Mape => format!("{:.2}", c.mape),
                            ThirdColumn::Cost => format!("{:.1}", c.wall_s),
                        };
                        let _ = write!(s, " {:.2} | {:.2} | {} |", c.mae, c.rmse, x);
                    }
                    None => {
                        let _ = write!(s, " - | - | - |");
                    }
                }
            }
            let _ = writeln!(s);
        }
        let seeds = self.seeds();
        let _ = writeln!(
            s,
            "\nMAE and RMSE in days, MAPE as a fraction; mean over {} seed(s) {:?}.",
            seeds.len(),
            seeds
        );
        s
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["method", "task", "seed", "mae", "rmse", "mape", "n_test", "wall_s", "best_epoch"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.report.task.name().to_string(),
                r.seed.to_string(),
                crate::decimal::to_text(r.report.mae),
                crate::decimal::to_text(r.report.rmse),
                crate::decimal::to_text(r.report.mape),
                r.report.n_test.to_string(),
                crate::decimal::to_text(r.report.wall_s),
                r.best_epoch.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R, title: &str) -> Result<Self, TrainError> {
        let mut r = csv::Reader::from_reader(source);
        let mut table = ResultTable {
            title: title.to_string(),
            ..Default::default()
        };
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64, TrainError> {
                crate::decimal::from_text(field(i)).map_err(TrainError::Config)
            };
            let task: Task = field(1).parse().map_err(TrainError::Config)?;
            let method = field(0).to_string();
            if !table.methods.contains(&method) {
                table.methods.push(method.clone());
            }
            if !table.tasks.contains(&task) {
                table.tasks.push(task);
            }
            table.rows.push(ResultRow {
                method,
                seed: field(2).parse().map_err(|_| TrainError::Config(format!("bad seed {:?}", field(2))))?,
                report: MetricsReport {
                    task,
                    mae: num(3)?,
                    rmse: num(4)?,
                    mape: num(5)?,
                    n_test: field(6).parse().unwrap_or(0),
                    wall_s: num(7)?,
                },
                best_epoch: field(8).parse().unwrap_or(0),
            });
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThirdColumn {
    Mape,
    Cost,
}

/// Trains the full, no-TRF and no-EL variants on identical splits and seeds
/// for each task and seed.
pub fn run_ablation(
    data: &Dataset,
    base: &ExperimentConfig,
    tasks: &[Task],
    seeds: &[u64],
    jobs: usize,
) -> Result<ResultTable, TrainError> {
    let mut plan = Vec::new();
    for &seed in seeds {
        for &task in tasks {
            for v in Variant::ALL {
                plan.push((seed, task, v));
            }
        }
    }
    let rows = run_all(jobs, plan.len(), |i| {
        let (seed, task, v) = plan[i];
        let mut cfg = base.clone().with_seed(seed);
        cfg.model = cfg.model.with_variant(v);
        let res = run_experiment(data, task, &cfg)?;
        Ok(ResultRow {
            method: v.label().to_string(),
            seed,
            report: res.report,
            best_epoch: res.history.best_epoch,
        })
    })?;
    Ok(ResultTable {
        title: "Ablation study".into(),
        methods: Variant::ALL.iter().map(|v| v.label().to_string()).collect(),
        tasks: tasks.to_vec(),
        rows,
    })
}

/// The five recurrent encoders compared in the architecture sweep.
pub const BENCH_ARCHITECTURES: [(CellType, bool); 5] = [
    (CellType::Rnn, false),
    (CellType::Lstm, false),
    (CellType::Gru, false),
    (CellType::Lstm, true),
    (CellType::Gru, true),
];

/// Trains every architecture in `archs` with the full variant on identical
/// splits and seeds. The wall-clock column is the cost analogue.
pub fn run_cell_benchmark(
    data: &Dataset,
    base: &ExperimentConfig,
    archs: &[(CellType, bool)],
    tasks: &[Task],
    seeds: &[u64],
    jobs: usize,
) -> Result<ResultTable, TrainError> {
    let mut plan = Vec::new();
    for &seed in seeds {
        for &task in tasks {
            for &arch in archs {
                plan.push((seed, task, arch));
            }
        }
    }
    let label = |(cell, bi): (CellType, bool)| {
        ModelConfig {
            cell,
            bidirectional: bi,
            ..ModelConfig::default()
        }
        .arch_label()
    };
    let rows = run_all(jobs, plan.len(), |i| {
        let (seed, task, (cell, bi)) = plan[i];
        let mut cfg = base.clone().with_seed(seed);
        cfg.model.cell = cell;
        cfg.model.bidirectional = bi;
        cfg.model = cfg.model.with_variant(Variant::Full);
        let res = run_experiment(data, task, &cfg)?;
        let mut report = res.report;
        report.wall_s = res.wall_s;
        Ok(ResultRow {
            method: label((cell, bi)),
            seed,
            report,
            best_epoch: res.history.best_epoch,
        })
    })?;
    Ok(ResultTable {
        title: "Sequential architecture comparison".into(),
        methods: archs.iter().map(|&a| label(a)).collect(),
        tasks: tasks.to_vec(),
        rows,
    })
}
