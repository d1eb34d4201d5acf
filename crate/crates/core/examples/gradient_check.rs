//! Compares backpropagation-through-time gradients of a small bidirectional
//! predictor with central finite differences, parameter by parameter.
//!
//! Usage: cargo run --release --example gradient_check [lstm|gru|rnn]

use std::sync::Arc;

use leadtime::features::{encode_dataset, fit_encoder, EncodedCase, Task};
use leadtime::synthgen::{generate, GenConfig};
use leadtime::{CellType, ModelConfig, Predictor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cell: CellType = std::env::args().nth(1).unwrap_or_else(|| "lstm".into()).parse()?;
    let data = generate(&GenConfig {
        n_spools: 4,
        ..Default::default()
    })?
    .dataset()?;
    let encoder = Arc::new(fit_encoder(&data)?);
    let config = ModelConfig {
        cell,
        hidden_dim: 4,
        mlp_dims: vec![4, 3],
        ..ModelConfig::default()
    }
    .with_consistent_fc();
    let predictor = Predictor::build(config, encoder.clone(), Task::Procurement)?;
    let cases = encode_dataset(&data, &encoder, Task::Procurement, predictor.blocks())?.cases;
    let batch: Vec<&EncodedCase> = cases.iter().collect();

    let analytic = predictor.gradients(&predictor.forward_batch(&batch)?);
    let mut probe = predictor.clone();
    let eps = 1e-5;
    println!("{:<14} {:>7} {:>12}", "parameter", "scalars", "max rel err");
    for id in predictor.store.ids() {
        let mut worst = 0.0f64;
        for k in 0..predictor.store.value(id).len() {
            let orig = predictor.store.value(id)[k];
            probe.store.value_mut(id)[k] = orig + eps;
            let up = probe.forward_batch(&batch)?.loss;
            probe.store.value_mut(id)[k] = orig - eps;
            let down = probe.forward_batch(&batch)?.loss;
            probe.store.value_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(id)[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        let p = predictor.store.param(id);
        println!("{:<14} {:>7} {:>12.2e}", p.name, p.len(), worst);
    }
    Ok(())
}
