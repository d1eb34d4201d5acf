mod common;

use common::{check_fusion_gradients, check_mlp_gradients, check_predictor_gradients, FD_TOL};
use leadtime::{CellType, ModelConfig, Variant};

fn small(cell: CellType, bidirectional: bool, variant: Variant) -> ModelConfig {
    ModelConfig {
        cell,
        bidirectional,
        hidden_dim: 5,
        mlp_dims: vec![4, 3],
        fc_dims: vec![0, 4, 1],
        variant,
        seed: 0,
    }
    .with_consistent_fc()
}

#[test]
fn recurrent_predictors_match_finite_differences() {
    for cell in [CellType::Rnn, CellType::Lstm, CellType::Gru] {
        for bi in [false, true] {
            for seed in 0..3 {
                let (err, at) = check_predictor_gradients(seed, small(cell, bi, Variant::Full));
                assert!(err <= FD_TOL, "{cell:?} bi={bi} seed={seed}: {err:e} at {at}");
            }
        }
    }
}

#[test]
fn ablated_variants_match_finite_differences() {
    for variant in [Variant::NoTrf, Variant::NoEl] {
        for seed in 0..3 {
            let (err, at) = check_predictor_gradients(seed, small(CellType::Gru, true, variant));
            assert!(err <= FD_TOL, "{variant} seed={seed}: {err:e} at {at}");
        }
    }
}

#[test]
fn mlp_and_fusion_head_match_finite_differences() {
    for seed in 0..5 {
        let (err, at) = check_mlp_gradients(seed);
        assert!(err <= FD_TOL, "mlp seed={seed}: {err:e} at {at}");
        let (err, at) = check_fusion_gradients(seed);
        assert!(err <= FD_TOL, "fusion seed={seed}: {err:e} at {at}");
    }
}
