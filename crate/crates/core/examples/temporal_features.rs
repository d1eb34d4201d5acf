//! Computes elapsed time, lagged time and day of week for every event of a
//! trace, and shows the full input row the encoder builds from them.
//!
//! Usage: cargo run --example temporal_features

use leadtime::eventlog::{parse_log, Schema};
use leadtime::features::{fit_encoder, parse_statics, temporal_features, Dataset, TemporalBlocks};

const LOG: &str = "\
case_id,activity,timestamp,location
SP1,material_release,2024-03-01T08:00:00Z,store
SP1,cutting_start,2024-03-02T09:30:00Z,shop
SP1,welding_start,2024-03-04T13:00:00Z,shop
SP1,inspection_pass,2024-03-06T10:45:00Z,shop
SP1,release,2024-03-11T16:00:00Z,yard
";

const STATICS: &str = "\
case_id,s_diameter_mm,s_material_grade,y_production,y_postprocessing,y_procurement
SP1,150,CS,5.114583333333333,5.21875,10.333333333333334
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let log = parse_log(LOG.as_bytes(), &Schema::default())?;
    let trace = &log.traces[0];
    const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
    println!("{:<18} {:>10} {:>10}  dow", "activity", "elapsed d", "lagged d");
    for (e, f) in trace.events.iter().zip(temporal_features(trace)) {
        println!("{:<18} {:>10.4} {:>10.4}  {}", e.activity, f.elapsed, f.lagged, DAYS[f.dow as usize]);
    }

    let data = Dataset::join(&log, &parse_statics(STATICS.as_bytes())?)?;
    let encoder = fit_encoder(&data)?;
    let rows = encoder.encode_trace(trace, TemporalBlocks::Include);
    println!(
        "\nencoded step width {} (without temporal blocks {})",
        rows.cols(),
        encoder.step_dim(TemporalBlocks::Omit)
    );
    println!("last row: {:?}", rows.row(rows.rows() - 1));
    Ok(())
}
