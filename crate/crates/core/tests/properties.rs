mod common;

use std::collections::HashSet;

use leadtime::features::fit_encoder;
use leadtime::trainer::{mae, mape, rmse, split, SplitSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("id{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_partitions_are_disjoint_covering_and_sized(n in 10usize..600, seed in any::<u64>()) {
        let spec = SplitSpec { seed, ..Default::default() };
        let s = split(&ids(n), &spec).unwrap();
        prop_assert_eq!(s.train.len(), n * 7 / 10);
        prop_assert_eq!(s.valid.len(), n / 10);
        prop_assert_eq!(s.train.len() + s.valid.len() + s.test.len(), n);
        let all: HashSet<&String> = s.train.iter().chain(&s.valid).chain(&s.test).collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(&s, &split(&ids(n), &spec).unwrap());
    }

    #[test]
    fn split_ignores_input_order(n in 10usize..300, seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let spec = SplitSpec { seed, ..Default::default() };
        let mut shuffled = ids(n);
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(split(&ids(n), &spec).unwrap(), split(&shuffled, &spec).unwrap());
    }

    #[test]
    fn encoded_widths_match_declared_dimensions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = common::random_dataset(&mut rng, 12, 6);
        let enc = fit_encoder(&data.subset(&data.case_ids()[..6])).unwrap();
        for case in &data.cases {
            prop_assert_eq!(enc.encode_static(&case.record).len(), enc.static_dim());
            for blocks in [leadtime::features::TemporalBlocks::Include, leadtime::features::TemporalBlocks::Omit] {
                let m = enc.encode_trace(&case.trace, blocks);
                prop_assert_eq!(m.cols(), enc.step_dim(blocks));
                prop_assert_eq!(m.rows(), case.trace.len());
                prop_assert!(m.is_finite());
            }
        }
    }
}

#[test]
fn rmse_never_below_mae_on_random_reports() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..40);
        let truth: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..150.0)).collect();
        let (a, r) = (mae(&pred, &truth).unwrap(), rmse(&pred, &truth).unwrap());
        assert!(r >= a * (1.0 - 1e-12), "rmse {r} < mae {a}");
        assert!(mape(&pred, &truth).unwrap() >= 0.0);
    }
}

#[test]
fn one_hot_blocks_sum_to_one_on_every_event() {
    use leadtime::features::{AttrKind, TemporalBlocks, DOW_WIDTH};
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut events = 0;
    while events < 10_000 {
        let data = common::random_dataset(&mut rng, 40, 12);
        // Fitting on a quarter of the cases leaves unseen categories for OOV.
        let enc = fit_encoder(&data.subset(&data.case_ids()[..10])).unwrap();
        for case in &data.cases {
            let m = enc.encode_trace(&case.trace, TemporalBlocks::Include);
            for r in 0..m.rows() {
                let row = m.row(r);
                let dow = enc.temporal_columns().start;
                let mut blocks = vec![0..enc.activity_width(), dow..dow + DOW_WIDTH];
                let mut off = enc.temporal_columns().end;
                for a in &enc.dyn_attrs {
                    if matches!(a.kind, AttrKind::Categorical { .. }) {
                        blocks.push(off..off + a.width());
                    }
                    off += a.width();
                }
                assert_eq!(off, row.len());
                for b in blocks {
                    assert_eq!(row[b.clone()].iter().sum::<f64>(), 1.0, "block {b:?} of {row:?}");
                }
                events += 1;
            }
        }
    }
}

#[test]
fn target_normalization_round_trips() {
    use leadtime::features::Task;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let data = common::random_dataset(&mut rng, 30, 3);
    let enc = fit_encoder(&data).unwrap();
    for _ in 0..1000 {
        let y = rng.gen_range(0.0..500.0);
        for task in Task::ALL {
            let back = enc.denormalize_target(enc.normalize_target(y, task), task);
            assert!((back - y).abs() <= 1e-9, "{task}: {y} -> {back}");
        }
        let mean = enc.targets.get(Task::Procurement).mean;
        assert_eq!(enc.normalize_target(mean, Task::Procurement), 0.0);
    }
}
