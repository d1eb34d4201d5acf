//! Compares RNN, LSTM and GRU encoders, one- and two-directional, on the
//! procurement lead-time task, reporting error and training cost.
//!
//! Usage: cargo run --release --example cell_benchmark [n_spools] [n_seeds]

use leadtime::features::Task;
use leadtime::synthgen::{generate, GenConfig};
use leadtime::trainer::{run_cell_benchmark, ExperimentConfig, ThirdColumn, BENCH_ARCHITECTURES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_spools = args.next().map_or(Ok(1000), |s| s.parse())?;
    let n_seeds: u64 = args.next().map_or(Ok(1), |s| s.parse())?;

    let data = generate(&GenConfig {
        n_spools,
        ..Default::default()
    })?
    .dataset()?;
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let table = run_cell_benchmark(
        &data,
        &ExperimentConfig::benchmark(),
        &BENCH_ARCHITECTURES,
        &[Task::Procurement],
        &seeds,
        jobs,
    )?;
    println!("{}", table.to_markdown(ThirdColumn::Cost));
    Ok(())
}
