//! Feature-group ablation on a synthetic benchmark: trains the full model,
//! the model without time-related features, and the static-only model on
//! identical splits, then prints a markdown table.
//!
//! Usage: cargo run --release --example ablation [n_spools] [n_seeds]

use std::time::Instant;

use leadtime::features::Task;
use leadtime::synthgen::{generate, signal_audit, GenConfig};
use leadtime::trainer::{run_ablation, ExperimentConfig, ThirdColumn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_spools = args.next().map_or(Ok(2000), |s| s.parse())?;
    let n_seeds: u64 = args.next().map_or(Ok(1), |s| s.parse())?;

    let generated = generate(&GenConfig {
        n_spools,
        ..Default::default()
    })?;
    let data = generated.dataset()?;
    println!("signal audit over {} spools\n{}", data.len(), signal_audit(&data)?);

    let cfg = ExperimentConfig::benchmark();
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let start = Instant::now();
    let table = run_ablation(&data, &cfg, &Task::ALL, &seeds, 1)?;
    println!("{}", table.to_markdown(ThirdColumn::Mape));
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
