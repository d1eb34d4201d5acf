//! Small differentiable numeric core: dense maps, recurrent cells, and
//! reverse-mode gradients through time, all in 64-bit floats.

pub mod cell;
pub mod dense;
pub mod params;
pub mod recurrent;
pub mod tensor;

use thiserror::Error;

pub use cell::{
    gru_cell_forward, lstm_cell_forward, rnn_cell_forward, CellState, CellType, CellWeights, GruStep,
    LstmStep, StepCache,
};
pub use dense::{fusion_forward, fusion_input, mlp_forward, mse_loss, Dense, Mlp, MlpTrace};
pub use params::{Gradients, Init, Param, ParamId, ParamRecord, ParameterStore};
pub use recurrent::{run_direction, Direction, RecurrentLayer, Unrolled};
pub use tensor::{sigmoid, Matrix};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("gradients already accumulated; call zero_grads first")]
    DoubleAccumulation,
}
