//! Trains a bidirectional LSTM lead-time predictor on synthetic data,
//! reports held-out metrics, and checks that a saved checkpoint reproduces
//! its predictions.
//!
//! Usage: cargo run --release --example train_predictor [n_spools] [task]

use leadtime::features::{encode_dataset, Task};
use leadtime::synthgen::{generate, GenConfig};
use leadtime::trainer::{run_experiment, ExperimentConfig};
use leadtime::Predictor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_spools = args.next().map_or(Ok(1000), |s| s.parse())?;
    let task: Task = args.next().unwrap_or_else(|| "procurement".into()).parse()?;

    let data = generate(&GenConfig {
        n_spools,
        ..Default::default()
    })?
    .dataset()?;
    let cfg = ExperimentConfig::benchmark();
    let result = run_experiment(&data, task, &cfg)?;
    for e in &result.history.epochs {
        println!("epoch {:>3}  train loss {:.4}  valid MAE {:.3} d", e.epoch, e.train_loss, e.valid_mae_days);
    }
    println!("best epoch {}", result.history.best_epoch);
    println!("{}", result.report);

    let path = std::env::temp_dir().join("leadtime_example_checkpoint.json");
    result.predictor.save(&path)?;
    let loaded = Predictor::load(&path, result.predictor.encoder_arc(), Some(&result.predictor.config))?;
    let cases = encode_dataset(&data, loaded.encoder(), task, loaded.blocks())?.cases;
    let same = result.predictor.predict_encoded(&cases)? == loaded.predict_encoded(&cases)?;
    println!("checkpoint {} reproduces predictions: {same}", path.display());
    Ok(())
}
