//! Process-aware lead time prediction for engineered-to-order components.
//!
//! The crate combines static attributes of each component with sequential
//! features mined from its procurement event log:
//!
//! - [`eventlog`]: CSV event logs grouped into validated traces.
//! - [`features`]: elapsed/lagged/day-of-week features and a train-fitted encoder.
//! - [`neural`]: recurrent cells, dense layers and exact gradients through time.
//! - [`model`]: configurable predictors (RNN/LSTM/GRU, uni- or bidirectional,
//!   plus the ablated variants).
//! - [`trainer`]: splits, training loop, metrics and experiment runners.
//! - [`synthgen`]: a seeded synthetic procurement-process generator.

pub mod cli;
pub mod decimal;
pub mod eventlog;
pub mod features;
pub mod model;
pub mod neural;
pub mod synthgen;
pub mod trainer;

pub use eventlog::{AttrValue, Event, EventLog, Trace};
pub use features::{Dataset, Encoder, Task};

pub use neural::CellType;
pub use model::{ModelConfig, Predictor, Variant};
