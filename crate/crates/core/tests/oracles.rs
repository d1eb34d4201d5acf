//! Library outputs against independent re-implementations: straight-line
//! recurrent cells, and temporal features recomputed with a different
//! date-time library.

mod common;

use common::oracle::*;

#[test]
fn cell_steps_match_reference() {
    for (i, cell) in CELLS.into_iter().enumerate() {
        check_cell_steps(cell, 11 + i as u64, 500).unwrap();
    }
}

#[test]
fn unrolled_and_reversed_runs_match_reference() {
    for (i, cell) in CELLS.into_iter().enumerate() {
        check_unrolled_runs(cell, 14 + i as u64, 100).unwrap();
    }
}

#[test]
fn temporal_features_match_independent_datetime_oracle() {
    check_temporal_features(16, 1000).unwrap();
}

#[test]
fn week_translation_leaves_features_unchanged() {
    check_week_translation(17, 200).unwrap();
}
