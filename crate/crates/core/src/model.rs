//! Lead-time predictors: a recurrent encoder over the event sequence, an MLP
//! over static attributes, and a fully connected head over
//! `[h_s | h_fwd | h_bwd]`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::Trace;
use crate::features::{EncodedCase, Encoder, FeatureError, StaticRecord, Task, TemporalBlocks};
use crate::neural::{
    fusion_input, CellType, Direction, Gradients, Matrix, Mlp, MlpTrace, NeuralError, ParamRecord, ParameterStore,
    RecurrentLayer, Unrolled,
};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("checkpoint schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint architecture {found} does not match requested {expected}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("checkpoint was trained with encoder {found}, got {expected}")]
    EncoderMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which feature groups a predictor sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Static attributes plus the full event sequence.
    Full,
    /// Event sequence without elapsed, lagged and day-of-week blocks.
    NoTrf,
    /// Static attributes only.
    NoEl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoTrf, Variant::NoEl];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoTrf => "no_trf",
            Variant::NoEl => "no_el",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full",
            Variant::NoTrf => "w/o TRF",
            Variant::NoEl => "w/o EL",
        }
    }

    pub fn blocks(self) -> TemporalBlocks {
        match self {
            Variant::NoTrf => TemporalBlocks::Omit,
            _ => TemporalBlocks::Include,
        }
    }

    pub fn uses_sequence(self) -> bool {
        self != Variant::NoEl
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Variant::Full),
            "no_trf" | "notrf" => Ok(Variant::NoTrf),
            "no_el" | "noel" => Ok(Variant::NoEl),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

/// Architecture of a predictor.
///
/// `mlp_dims` lists the static MLP's layer widths after its input (the input
/// width comes from the encoder). `fc_dims` lists every fusion-head width,
/// starting with its input and ending with 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub cell: CellType,
    pub bidirectional: bool,
    pub hidden_dim: usize,
    pub mlp_dims: Vec<usize>,
    pub fc_dims: Vec<usize>,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cell: CellType::Lstm,
            bidirectional: true,
            hidden_dim: 16,
            mlp_dims: vec![32, 16],
            fc_dims: vec![48, 32, 1],
            variant: Variant::Full,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn directions(&self) -> usize {
        match (self.variant.uses_sequence(), self.bidirectional) {
            (false, _) => 0,
            (true, false) => 1,
            (true, true) => 2,
        }
    }

    pub fn static_repr_dim(&self) -> usize {
        self.mlp_dims.last().copied().unwrap_or(0)
    }

    /// Fusion-head input width implied by the other fields.
    pub fn fc_input_dim(&self) -> usize {
        self.static_repr_dim() + self.directions() * self.hidden_dim
    }

    /// Rewrites `fc_dims[0]` to match the rest of the config.
    pub fn with_consistent_fc(mut self) -> Self {
        let input = self.fc_input_dim();
        if self.fc_dims.is_empty() {
            self.fc_dims = vec![input, 1];
        } else {
            self.fc_dims[0] = input;
        }
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self.with_consistent_fc()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 {
            return Err(ModelError::Config("hidden_dim must be positive".into()));
        }
        if self.mlp_dims.is_empty() || self.mlp_dims.contains(&0) {
            return Err(ModelError::Config(format!(
                "mlp_dims must be non-empty positive widths, got {:?}",
                self.mlp_dims
            )));
        }
        if self.fc_dims.len() < 2 || self.fc_dims.contains(&0) || self.fc_dims.last() != Some(&1) {
            return Err(ModelError::Config(format!(
                "fc_dims must start with the fusion width and end with 1, got {:?}",
                self.fc_dims
            )));
        }
        if self.fc_dims[0] != self.fc_input_dim() {
            return Err(ModelError::Config(format!(
                "fc input {} but mlp output {} + {}x{} hidden = {}",
                self.fc_dims[0],
                self.static_repr_dim(),
                self.directions(),
                self.hidden_dim,
                self.fc_input_dim()
            )));
        }
        Ok(())
    }

    /// Short architecture name used in reports, e.g. `Bi-LSTM`.
    pub fn arch_label(&self) -> String {
        let cell = self.cell.name().to_uppercase();
        if self.bidirectional {
            format!("Bi-{cell}")
        } else {
            cell
        }
    }
}

/// Gradient-carrying record of one batch forward pass.
pub struct Tape<'a> {
    batch: Vec<&'a EncodedCase>,
    examples: Vec<ExampleTape>,
    d_pred: Vec<f64>,
    pub loss: f64,
    pub predictions: Vec<f64>,
}

impl Tape<'_> {
    /// Scales the loss, and therefore every gradient, by `k`.
    pub fn scale(&mut self, k: f64) {
        self.loss *= k;
        self.d_pred.iter_mut().for_each(|d| *d *= k);
    }
}

struct ExampleTape {
    fwd: Option<Unrolled>,
    bwd: Option<Unrolled>,
    mlp: MlpTrace,
    head: MlpTrace,
}

/// A configured, parameterized predictor bound to its encoder.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub config: ModelConfig,
    pub store: ParameterStore,
    pub task: Task,
    encoder: Arc<Encoder>,
    fwd: Option<RecurrentLayer>,
    bwd: Option<RecurrentLayer>,
    mlp: Mlp,
    head: Mlp,
}

impl Predictor {
    /// Builds a freshly initialized predictor. Parameter shapes depend only on
    /// `config` and the encoder's input widths; initialization only on
    /// `config.seed`.
    pub fn build(config: ModelConfig, encoder: Arc<Encoder>, task: Task) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParameterStore::new();
        let step_dim = encoder.step_dim(config.variant.blocks());
        let (fwd, bwd) = if config.variant.uses_sequence() {
            let f = RecurrentLayer::new(&mut store, &mut rng, "seq.fwd", config.cell, step_dim, config.hidden_dim);
            let b = config
                .bidirectional
                .then(|| RecurrentLayer::new(&mut store, &mut rng, "seq.bwd", config.cell, step_dim, config.hidden_dim));
            (Some(f), b)
        } else {
            (None, None)
        };
        let mut mlp_dims = vec![encoder.static_dim()];
        mlp_dims.extend(&config.mlp_dims);
        if mlp_dims[0] == 0 {
            return Err(ModelError::Config("encoder has no static features".into()));
        }
        let mlp = Mlp::new(&mut store, &mut rng, "mlp", &mlp_dims)?;
        let head = Mlp::new(&mut store, &mut rng, "fc", &config.fc_dims)?;
        Ok(Self {
            config,
            store,
            task,
            encoder,
            fwd,
            bwd,
            mlp,
            head,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn encoder_arc(&self) -> Arc<Encoder> {
        Arc::clone(&self.encoder)
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn blocks(&self) -> TemporalBlocks {
        self.config.variant.blocks()
    }

    pub fn recurrent_layers(&self) -> impl Iterator<Item = &RecurrentLayer> {
        self.fwd.iter().chain(self.bwd.iter())
    }

    /// Final hidden state of each direction, forward first.
    pub fn sequence_representation(&self, steps: &Matrix) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let f = match &self.fwd {
            Some(l) => l.forward(&self.store, steps, Direction::Forward)?.final_state().h.clone(),
            None => Vec::new(),
        };
        let b = match &self.bwd {
            Some(l) => l.forward(&self.store, steps, Direction::Backward)?.final_state().h.clone(),
            None => Vec::new(),
        };
        Ok((f, b))
    }

    /// Normalized prediction from pre-encoded inputs.
    pub fn forward_encoded(&self, steps: &Matrix, static_vec: &[f64]) -> Result<f64, ModelError> {
        let (h_f, h_b) = self.sequence_representation(steps)?;
        let h_s = self.mlp.forward(&self.store, static_vec)?;
        let out = self.head.forward(&self.store, &fusion_input(h_s.output(), &h_f, &h_b))?;
        Ok(out.output()[0])
    }

    /// Predicted lead time in days.
    pub fn predict(&self, trace: &Trace, record: &StaticRecord) -> Result<f64, ModelError> {
        let steps = if self.config.variant.uses_sequence() {
            self.encoder.encode_trace(trace, self.blocks())
        } else {
            Matrix::zeros(0, 0)
        };
        let z = self.forward_encoded(&steps, &self.encoder.encode_static(record))?;
        Ok(self.encoder.denormalize_target(z, self.task))
    }

    /// Predictions in days for encoded cases, evaluated in parallel.
    pub fn predict_encoded(&self, cases: &[EncodedCase]) -> Result<Vec<f64>, ModelError> {
        use rayon::prelude::*;
        cases
            .par_iter()
            .map(|c| {
                let z = self.forward_encoded(&c.steps, &c.static_vec)?;
                Ok(self.encoder.denormalize_target(z, self.task))
            })
            .collect()
    }

    /// Forward pass over a batch with everything needed for [`backward`].
    /// The loss is the mean squared error on normalized targets.
    ///
    /// [`backward`]: Predictor::backward
    pub fn forward_batch<'a>(&self, batch: &[&'a EncodedCase]) -> Result<Tape<'a>, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Config("empty batch".into()));
        }
        let mut examples = Vec::with_capacity(batch.len());
        let mut predictions = Vec::with_capacity(batch.len());
        for case in batch {
            let fwd = match &self.fwd {
                Some(l) => Some(l.forward(&self.store, &case.steps, Direction::Forward)?),
                None => None,
            };
            let bwd = match &self.bwd {
                Some(l) => Some(l.forward(&self.store, &case.steps, Direction::Backward)?),
                None => None,
            };
            let mlp = self.mlp.forward(&self.store, &case.static_vec)?;
            let h_f = fwd.as_ref().map_or(&[][..], |u| &u.final_state().h[..]);
            let h_b = bwd.as_ref().map_or(&[][..], |u| &u.final_state().h[..]);
            let head = self.head.forward(&self.store, &fusion_input(mlp.output(), h_f, h_b))?;
            predictions.push(head.output()[0]);
            examples.push(ExampleTape { fwd, bwd, mlp, head });
        }
        let targets: Vec<f64> = batch.iter().map(|c| c.target).collect();
        let (loss, d_pred) = crate::neural::mse_loss(&predictions, &targets)?;
        Ok(Tape {
            batch: batch.to_vec(),
            examples,
            d_pred,
            loss,
            predictions,
        })
    }

    /// Exact parameter gradients of `tape.loss`, via backpropagation through
    /// time.
    pub fn gradients(&self, tape: &Tape<'_>) -> Gradients {
        let mut grads = self.store.gradient_buffer();
        let s = self.config.static_repr_dim();
        let h = self.config.hidden_dim;
        for ((case, ex), &dp) in tape.batch.iter().zip(&tape.examples).zip(&tape.d_pred) {
            let d_in = self.head.backward(&self.store, &ex.head, &[dp], &mut grads);
            self.mlp.backward(&self.store, &ex.mlp, &d_in[..s], &mut grads);
            let mut off = s;
            if let (Some(layer), Some(run)) = (&self.fwd, &ex.fwd) {
                layer.backward(&self.store, &case.steps, run, &d_in[off..off + h], &mut grads);
                off += h;
            }
            if let (Some(layer), Some(run)) = (&self.bwd, &ex.bwd) {
                layer.backward(&self.store, &case.steps, run, &d_in[off..off + h], &mut grads);
            }
        }
        grads
    }

    /// Adds the gradients of `tape.loss` to the store. Fails if gradients were
    /// already accumulated since the last `zero_grads`.
    pub fn backward(&mut self, tape: &Tape<'_>) -> Result<(), ModelError> {
        let grads = self.gradients(tape);
        self.store.accumulate(&grads)?;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.store.zero_grads();
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            architecture: self.config.clone(),
            task: self.task,
            encoder_fingerprint: self.encoder.fingerprint(),
            params: self.store.records(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.checkpoint()).expect("checkpoint serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Rebuilds a predictor from checkpoint JSON. `expected`, when given, must
    /// equal the stored architecture.
    pub fn from_json(json: &str, encoder: Arc<Encoder>, expected: Option<&ModelConfig>) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(json).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::Corrupt("missing schema_version".into()))?;
        if version != u64::from(CHECKPOINT_SCHEMA_VERSION) {
            return Err(ModelError::Version {
                found: version as u32,
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        if let Some(want) = expected {
            if *want != ckpt.architecture {
                return Err(ModelError::ArchitectureMismatch {
                    expected: describe(want),
                    found: describe(&ckpt.architecture),
                });
            }
        }
        let fp = encoder.fingerprint();
        if fp != ckpt.encoder_fingerprint {
            return Err(ModelError::EncoderMismatch {
                expected: fp,
                found: ckpt.encoder_fingerprint,
            });
        }
        let mut p = Predictor::build(ckpt.architecture, encoder, ckpt.task)?;
        p.store.load_records(&ckpt.params)?;
        Ok(p)
    }

    pub fn load(
        path: impl AsRef<Path>,
        encoder: Arc<Encoder>,
        expected: Option<&ModelConfig>,
    ) -> Result<Self, ModelError> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json, encoder, expected)
    }
}

fn describe(c: &ModelConfig) -> String {
    format!(
        "{} {} h={} mlp={:?} fc={:?}",
        c.arch_label(),
        c.variant,
        c.hidden_dim,
        c.mlp_dims,
        c.fc_dims
    )
}

/// Serialized predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub architecture: ModelConfig,
    pub task: Task,
    pub encoder_fingerprint: String,
    pub params: Vec<ParamRecord>,
}
