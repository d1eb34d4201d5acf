//! Experiment runners on a small synthetic benchmark.

use leadtime::features::Task;
use leadtime::synthgen::{generate, GenConfig};
use leadtime::trainer::{run_ablation, run_cell_benchmark, ExperimentConfig, BENCH_ARCHITECTURES};
use leadtime::{ModelConfig, Variant};

fn quick() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::benchmark();
    cfg.model = ModelConfig { hidden_dim: 4, mlp_dims: vec![6], ..cfg.model }.with_consistent_fc();
    cfg.train.max_epochs = 3;
    cfg.train.patience = 3;
    cfg
}

fn small_data() -> leadtime::Dataset {
    generate(&GenConfig { n_spools: 80, ..Default::default() }).unwrap().dataset().unwrap()
}

#[test]
fn cell_benchmark_is_complete_finite_and_reproducible() {
    let data = small_data();
    let run = || run_cell_benchmark(&data, &quick(), &BENCH_ARCHITECTURES, &[Task::Procurement], &[0], 2).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.rows.len(), 5);
    assert_eq!(a.methods, ["RNN", "LSTM", "GRU", "Bi-LSTM", "Bi-GRU"]);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let (r, s) = (&x.report, &y.report);
        assert!(r.mae.is_finite() && r.rmse >= r.mae && r.mape >= 0.0);
        // Cost is measured wall time; everything else must match exactly.
        assert_eq!((&x.method, r.mae, r.rmse, r.mape, x.best_epoch), (&y.method, s.mae, s.rmse, s.mape, y.best_epoch));
    }
}

#[test]
fn ablation_covers_variants_tasks_and_seeds() {
    let data = small_data();
    let table = run_ablation(&data, &quick(), &Task::ALL, &[0, 1], 1).unwrap();
    assert_eq!(table.rows.len(), 3 * 3 * 2);
    for v in Variant::ALL {
        for task in Task::ALL {
            let s = table.summary(v.label(), task).unwrap();
            assert_eq!(s.n_seeds, 2);
            assert!(s.rmse >= s.mae);
        }
    }
    let csv = {
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(leadtime::trainer::ResultTable::read_csv(csv.as_slice(), &table.title).unwrap(), table);
}
