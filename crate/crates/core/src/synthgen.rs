//! Seeded generator of synthetic pipe-spool procurement datasets, and a
//! linear-probe audit of how much target variance the event sequence adds
//! over the static attributes.
//!
//! Each spool walks material preparation → cutting → fit-up → welding →
//! inspection (failing inspections loop back to fit-up) → transport →
//! waiting → receipt inspection → storage → release. Processing stages have
//! log-normal durations whose means are linear in the static attributes.
//! Queue stages carry the process-only signal: a per-case congestion factor
//! and a weekend inflation of the yard waiting stage. Rework loops add six
//! events each and lengthen receipt inspection.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{write_log, AttrValue, Event, EventLog, LogError, Trace};
use crate::features::{
    temporal_features, write_statics, Dataset, FeatureError, StaticRecord, StaticTable, Targets, Task,
};

pub const GEN_MANIFEST_VERSION: u32 = 1;

/// Events in a trace without rework.
pub const BASE_TRACE_LEN: usize = 18;
/// Events added by one rework loop.
pub const REWORK_EVENTS: usize = 6;

pub const EVENT_LOG_FILE: &str = "event_log.csv";
pub const STATIC_FILE: &str = "static.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const MANIFEST_FILE: &str = "gen_manifest.json";

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("audit: {0}")]
    Audit(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_spools: usize,
    pub seed: u64,
    pub min_trace_len: usize,
    pub max_trace_len: usize,
    /// Probability that an inspection fails and triggers a rework loop.
    pub rework_prob: f64,
    pub n_vendors: usize,
    /// Standard deviation in days of each processing stage's duration.
    pub noise_scale: f64,
    /// When false, congestion is fixed at 1, no rework happens and the
    /// weekend inflation is off, so targets depend on static attributes
    /// and processing noise only.
    pub latent_factors: bool,
    /// Log-scale standard deviation of the per-case congestion factor.
    pub congestion_sigma: f64,
    /// Multiplier on the yard waiting stage when it starts on a weekend.
    pub weekend_factor: f64,
    /// Case start times are uniform over this calendar year.
    pub start_year: i32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_spools: 5000,
            seed: 7,
            min_trace_len: 18,
            max_trace_len: 36,
            rework_prob: 0.15,
            n_vendors: 5,
            noise_scale: 0.25,
            latent_factors: true,
            congestion_sigma: 0.5,
            weekend_factor: 1.5,
            start_year: 2024,
        }
    }
}

impl GenConfig {
    /// Range of rework loops compatible with the trace length range.
    pub fn rework_bounds(&self) -> (usize, usize) {
        let lo = self.min_trace_len.saturating_sub(BASE_TRACE_LEN).div_ceil(REWORK_EVENTS);
        let hi = self.max_trace_len.saturating_sub(BASE_TRACE_LEN) / REWORK_EVENTS;
        (lo, hi)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Config(m));
        if self.n_spools == 0 {
            return bad("n_spools must be positive".into());
        }
        if !(2 <= self.min_trace_len && self.min_trace_len <= self.max_trace_len && self.max_trace_len <= 64) {
            return bad(format!(
                "trace length range {}..={} must lie within 2..=64",
                self.min_trace_len, self.max_trace_len
            ));
        }
        let (lo, hi) = self.rework_bounds();
        if self.max_trace_len < BASE_TRACE_LEN || lo > hi {
            return bad(format!(
                "no trace length {BASE_TRACE_LEN} + {REWORK_EVENTS}k lies in {}..={}",
                self.min_trace_len, self.max_trace_len
            ));
        }
        if !(0.0..=1.0).contains(&self.rework_prob) {
            return bad(format!("rework_prob {} outside [0, 1]", self.rework_prob));
        }
        if self.n_vendors == 0 || self.n_vendors > 50 {
            return bad("n_vendors must be in 1..=50".into());
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("congestion_sigma", self.congestion_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !(self.weekend_factor > 0.0 && self.weekend_factor.is_finite()) {
            return bad("weekend_factor must be positive".into());
        }
        if NaiveDate::from_ymd_opt(self.start_year, 1, 1).is_none() || self.start_year.abs() > 9000 {
            return bad(format!("start_year {} out of range", self.start_year));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Static attributes

pub const MATERIAL_GRADES: [&str; 4] = ["CS", "SS", "CUNI", "ALLOY"];
pub const COATINGS: [&str; 3] = ["bare", "galvanized", "painted"];
pub const SYSTEMS: [&str; 6] = ["ballast", "bilge", "cooling", "fire", "fuel", "hydraulic"];
pub const BLOCK_ZONES: [&str; 4] = ["ZA", "ZB", "ZC", "ZD"];
const DIAMETERS: [f64; 9] = [50.0, 80.0, 100.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0];

/// Column order of the generated static table.
pub const STATIC_ATTRS: [&str; 12] = [
    "diameter_mm",
    "weight_kg",
    "length_m",
    "wall_thickness_mm",
    "flange_count",
    "valve_count",
    "bend_count",
    "material_grade",
    "vendor_id",
    "coating",
    "system",
    "block_zone",
];

/// Column order of the generated dynamic attributes.
pub const DYN_ATTRS: [&str; 5] = ["machine_id", "location", "inspector", "queue_tag", "vendor_lot"];

/// Static description of one spool, with numerics already rounded to the
/// precision written to the static CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoolSpec {
    pub diameter_mm: f64,
    pub weight_kg: f64,
    pub length_m: f64,
    pub wall_thickness_mm: f64,
    pub flange_count: u32,
    pub valve_count: u32,
    pub bend_count: u32,
    pub grade: usize,
    pub vendor: usize,
    pub coating: usize,
    pub system: usize,
    pub zone: usize,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

impl SpoolSpec {
    fn sample<R: Rng>(rng: &mut R, n_vendors: usize) -> Self {
        let diameter_mm = DIAMETERS[rng.gen_range(0..DIAMETERS.len())];
        let wall_thickness_mm = round_to(3.0 + diameter_mm * 0.03 + rng.gen_range(0.0..4.0), 1);
        let length_m = round_to(rng.gen_range(0.5..12.0), 2);
        // Steel shell mass, density 7.85 kg/dm³.
        let shell = std::f64::consts::PI * diameter_mm * wall_thickness_mm * length_m * 7.85e-3;
        let flange_count = rng.gen_range(0..=6);
        let weight_kg = round_to(shell + 4.0 * flange_count as f64, 1);
        Self {
            diameter_mm,
            weight_kg,
            length_m,
            wall_thickness_mm,
            flange_count,
            valve_count: rng.gen_range(0..=3),
            bend_count: rng.gen_range(0..=5),
            grade: rng.gen_range(0..MATERIAL_GRADES.len()),
            vendor: rng.gen_range(0..n_vendors),
            coating: rng.gen_range(0..COATINGS.len()),
            system: rng.gen_range(0..SYSTEMS.len()),
            zone: rng.gen_range(0..BLOCK_ZONES.len()),
        }
    }

    pub fn vendor_id(&self) -> String {
        format!("V{}", self.vendor + 1)
    }

    fn attrs(&self) -> Vec<AttrValue> {
        vec![
            AttrValue::Real(self.diameter_mm),
            AttrValue::Real(self.weight_kg),
            AttrValue::Real(self.length_m),
            AttrValue::Real(self.wall_thickness_mm),
            AttrValue::Real(self.flange_count as f64),
            AttrValue::Real(self.valve_count as f64),
            AttrValue::Real(self.bend_count as f64),
            AttrValue::Text(MATERIAL_GRADES[self.grade].into()),
            AttrValue::Text(self.vendor_id()),
            AttrValue::Text(COATINGS[self.coating].into()),
            AttrValue::Text(SYSTEMS[self.system].into()),
            AttrValue::Text(BLOCK_ZONES[self.zone].into()),
        ]
    }
}

/// Vendor-specific multiplier on the transport stage. Vendor `V1` is the
/// fastest.
pub fn vendor_speed(vendor: usize) -> f64 {
    0.8 + 0.2 * vendor as f64
}

// ---------------------------------------------------------------------------
// Stage model

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    /// Waiting for a resource; stretched by congestion.
    Queue,
    /// Hands-on work; carries processing noise.
    Process,
}

/// Activities whose incoming lag is a queue wait.
pub const QUEUE_ACTIVITIES: [&str; 5] = [
    "material_prep_start",
    "cutting_start",
    "welding_start",
    "transport_dispatch",
    "waiting_cleared",
];

pub const START_ACTIVITY: &str = "material_release";
pub const PASS_ACTIVITY: &str = "inspection_pass";
pub const FAIL_ACTIVITY: &str = "inspection_fail";
pub const END_ACTIVITY: &str = "release";

pub fn is_queue_activity(activity: &str) -> bool {
    QUEUE_ACTIVITIES.contains(&activity)
}

const GRADE_PREP: [f64; 4] = [0.0, 0.4, 0.8, 1.2];
const GRADE_WELD: [f64; 4] = [0.0, 0.6, 0.9, 1.5];
const COATING_QUEUE: [f64; 3] = [0.0, 1.0, 0.6];
const ZONE_TRANSPORT: [f64; 4] = [0.0, 0.3, 0.6, 0.9];
const SYSTEM_WAIT: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Mean durations in days of the stages, linear in the static attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMeans {
    pub work_order: f64,
    pub prep_queue: f64,
    pub prep: f64,
    pub cutting_queue: f64,
    pub cutting: f64,
    pub fitup_handling: f64,
    pub fitup: f64,
    pub welding_queue: f64,
    pub welding: f64,
    pub inspection_setup: f64,
    pub inspection: f64,
    pub rework_handling: f64,
    /// Fraction of the first-pass fit-up and welding time a rework takes.
    pub rework_fraction: f64,
    pub transport_queue: f64,
    pub transport: f64,
    pub yard_wait: f64,
    pub receipt_inspection: f64,
    /// Extra receipt inspection time per rework loop.
    pub receipt_per_rework: f64,
    pub storage: f64,
    pub release: f64,
}

impl StageMeans {
    pub fn for_spool(s: &SpoolSpec) -> Self {
        let (flanges, valves, bends) = (s.flange_count as f64, s.valve_count as f64, s.bend_count as f64);
        Self {
            work_order: 0.5,
            prep_queue: 1.0,
            prep: 0.3 + 0.0015 * s.weight_kg + GRADE_PREP[s.grade],
            cutting_queue: 0.6,
            cutting: 0.2 + 0.001 * s.diameter_mm + 0.04 * s.length_m + 0.05 * bends,
            fitup_handling: 0.25,
            fitup: 0.4 + 0.2 * flanges + 0.3 * valves + 0.08 * bends + 0.0005 * s.diameter_mm,
            welding_queue: 0.8,
            welding: 0.3 + 0.002 * s.weight_kg + 0.03 * s.wall_thickness_mm + 0.1 * flanges + GRADE_WELD[s.grade],
            inspection_setup: 0.15,
            inspection: 0.25 + 0.04 * flanges,
            rework_handling: 0.5,
            rework_fraction: 0.6,
            transport_queue: 0.7 + COATING_QUEUE[s.coating],
            transport: 1.0 * vendor_speed(s.vendor) + ZONE_TRANSPORT[s.zone],
            yard_wait: 1.5 + SYSTEM_WAIT[s.system],
            receipt_inspection: 0.3 + 0.15 * valves,
            receipt_per_rework: 0.8,
            storage: 0.3,
            release: 0.4,
        }
    }

    /// Production and post-processing durations with no noise, congestion,
    /// rework or weekend effect.
    pub fn nominal_segments(&self) -> (f64, f64) {
        let production = self.work_order
            + self.prep_queue
            + self.prep
            + self.cutting_queue
            + self.cutting
            + self.fitup_handling
            + self.fitup
            + self.welding_queue
            + self.welding
            + self.inspection_setup
            + self.inspection;
        let post = self.transport_queue
            + self.transport
            + self.yard_wait
            + self.receipt_inspection
            + self.storage
            + self.release;
        (production, post)
    }
}

// ---------------------------------------------------------------------------
// Ground truth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub case_id: String,
    pub congestion: f64,
    pub rework_count: usize,
    pub vendor_speed: f64,
    pub weekend_wait: bool,
    pub production_days: f64,
    pub post_processing_days: f64,
    pub procurement_days: f64,
    /// Index of the final inspection-pass event (end of production).
    pub pass_index: usize,
    /// Index of the release event (end of procurement).
    pub end_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub cases: Vec<CaseTruth>,
}

impl GroundTruth {
    pub fn by_case(&self) -> HashMap<&str, &CaseTruth> {
        self.cases.iter().map(|c| (c.case_id.as_str(), c)).collect()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), GenError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "case_id",
            "congestion",
            "rework_count",
            "vendor_speed",
            "weekend_wait",
            "production_days",
            "post_processing_days",
            "procurement_days",
            "pass_index",
            "end_index",
        ])?;
        let t = crate::decimal::to_text;
        for c in &self.cases {
            w.write_record([
                c.case_id.clone(),
                t(c.congestion),
                c.rework_count.to_string(),
                t(c.vendor_speed),
                c.weekend_wait.to_string(),
                t(c.production_days),
                t(c.post_processing_days),
                t(c.procurement_days),
                c.pass_index.to_string(),
                c.end_index.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, GenError> {
        let mut r = csv::Reader::from_reader(source);
        let cases = r.deserialize().collect::<Result<Vec<CaseTruth>, _>>()?;
        Ok(Self { cases })
    }
}

// ---------------------------------------------------------------------------
// Generation

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub log: EventLog,
    pub statics: StaticTable,
    pub truth: GroundTruth,
}

impl Generated {
    pub fn dataset(&self) -> Result<Dataset, GenError> {
        Ok(Dataset::join(&self.log, &self.statics)?)
    }
}

const CONGESTION_LEVELS: [&str; 5] = ["q1", "q2", "q3", "q4", "q5"];
/// Standard-normal quintile boundaries.
const QUINTILES: [f64; 4] = [-0.8416, -0.2533, 0.2533, 0.8416];
/// Probability that a queue tag reports a neighbouring congestion level.
const TAG_NOISE: f64 = 0.15;

struct CaseBuilder<'a> {
    case_id: String,
    start: DateTime<Utc>,
    /// Days since start of the last emitted event.
    clock: f64,
    events: Vec<Event>,
    rng: &'a mut ChaCha8Rng,
    noise: f64,
}

impl CaseBuilder<'_> {
    fn timestamp(&self, days: f64) -> DateTime<Utc> {
        self.start + Duration::seconds((days * 86_400.0).round() as i64)
    }

    fn emit(&mut self, activity: &str, attrs: [Option<String>; 5]) {
        let timestamp = self.timestamp(self.clock);
        self.events.push(Event {
            case_id: self.case_id.clone(),
            activity: activity.to_string(),
            timestamp,
            attrs: attrs
                .into_iter()
                .map(|a| a.map_or(AttrValue::Absent, AttrValue::Text))
                .collect(),
        });
    }

    /// Log-normal duration with the given mean and standard deviation
    /// `noise` days; exactly `mean` when noise is zero. Always consumes one
    /// normal draw so the random stream is independent of the noise level.
    fn processing(&mut self, mean: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.noise == 0.0 {
            return mean;
        }
        let s2 = (1.0 + (self.noise / mean).powi(2)).ln();
        mean * (z * s2.sqrt() - s2 / 2.0).exp()
    }

    fn advance(&mut self, days: f64) {
        // At least one minute per stage keeps timestamps strictly increasing.
        self.clock += days.max(1.0 / 1440.0);
    }
}

fn congestion_tag(z: f64, rng: &mut ChaCha8Rng) -> String {
    let level = QUINTILES.iter().filter(|q| z >= **q).count() as i64;
    let u: f64 = rng.gen();
    let shifted = if u < TAG_NOISE / 2.0 {
        level - 1
    } else if u < TAG_NOISE {
        level + 1
    } else {
        level
    };
    CONGESTION_LEVELS[shifted.clamp(0, 4) as usize].to_string()
}

fn is_weekend(t: DateTime<Utc>) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

fn generate_case(cfg: &GenConfig, index: usize) -> (Trace, StaticRecord, CaseTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let case_id = format!("SP{:06}", index + 1);
    let spool = SpoolSpec::sample(&mut rng, cfg.n_vendors);
    let means = StageMeans::for_spool(&spool);

    // Latent draws happen unconditionally so that switching the latent
    // factors off leaves the static attributes and timestamps aligned.
    let z_cong: f64 = rng.sample(StandardNormal);
    let congestion = if cfg.latent_factors {
        (cfg.congestion_sigma * z_cong - cfg.congestion_sigma.powi(2) / 2.0).exp()
    } else {
        1.0
    };
    let (min_rw, max_rw) = cfg.rework_bounds();
    let mut rework_count = min_rw;
    for _ in min_rw..max_rw {
        let u: f64 = rng.gen();
        if cfg.latent_factors && u < cfg.rework_prob {
            rework_count += 1;
        } else {
            break;
        }
    }
    if !cfg.latent_factors {
        rework_count = min_rw;
    }
    let year_start = NaiveDate::from_ymd_opt(cfg.start_year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("validated year")
        .and_utc();
    let year_secs = if NaiveDate::from_ymd_opt(cfg.start_year, 2, 29).is_some() { 366 } else { 365 } * 86_400;
    let start = year_start + Duration::seconds(rng.gen_range(0..year_secs));

    let lot = format!("{}-L{}", spool.vendor_id(), rng.gen_range(1..=4));
    let shop = format!("shop-{}", spool.zone % 2 + 1);
    let yard = format!("yard-{}", BLOCK_ZONES[spool.zone]);
    let cutter = format!("CUT-{}", rng.gen_range(1..=4));
    let fitter = format!("FIT-{}", rng.gen_range(1..=4));
    let welder = format!("WLD-{}", rng.gen_range(1..=6));
    let qc = format!("QC-{}", rng.gen_range(1..=3));

    let mut b = CaseBuilder {
        case_id: case_id.clone(),
        start,
        clock: 0.0,
        events: Vec::with_capacity(BASE_TRACE_LEN + REWORK_EVENTS * rework_count),
        rng: &mut rng,
        noise: cfg.noise_scale,
    };
    let some = |s: &str| Some(s.to_string());
    let queue = |b: &mut CaseBuilder, mean: f64| -> Option<String> {
        b.advance(mean * congestion);
        Some(congestion_tag(z_cong, b.rng))
    };

    b.emit(START_ACTIVITY, [None, some("office"), None, None, Some(lot.clone())]);
    let d = b.processing(means.work_order);
    b.advance(d);
    b.emit("work_order_issued", [None, some("office"), None, None, None]);
    let tag = queue(&mut b, means.prep_queue);
    b.emit("material_prep_start", [None, Some(shop.clone()), None, tag, Some(lot.clone())]);
    let d = b.processing(means.prep);
    b.advance(d);
    b.emit("material_prep_complete", [None, Some(shop.clone()), None, None, None]);
    let tag = queue(&mut b, means.cutting_queue);
    b.emit("cutting_start", [Some(cutter.clone()), Some(shop.clone()), None, tag, None]);
    let d = b.processing(means.cutting);
    b.advance(d);
    b.emit("cutting_complete", [Some(cutter), Some(shop.clone()), None, None, None]);

    let mut pass_index = 0;
    for round in 0..=rework_count {
        let scale = if round == 0 { 1.0 } else { means.rework_fraction };
        let handling = if round == 0 { means.fitup_handling } else { means.rework_handling };
        let d = b.processing(handling);
        b.advance(d);
        b.emit("fitup_start", [Some(fitter.clone()), Some(shop.clone()), None, None, None]);
        let d = b.processing(means.fitup * scale);
        b.advance(d);
        b.emit("fitup_complete", [Some(fitter.clone()), Some(shop.clone()), None, None, None]);
        let tag = queue(&mut b, means.welding_queue);
        b.emit("welding_start", [Some(welder.clone()), Some(shop.clone()), None, tag, None]);
        let d = b.processing(means.welding * scale);
        b.advance(d);
        b.emit("welding_complete", [Some(welder.clone()), Some(shop.clone()), None, None, None]);
        let inspector = format!("INS-{}", b.rng.gen_range(1..=5));
        let d = b.processing(means.inspection_setup);
        b.advance(d);
        b.emit("inspection_start", [None, Some(shop.clone()), Some(inspector.clone()), None, None]);
        let d = b.processing(means.inspection);
        b.advance(d);
        let outcome = if round == rework_count { PASS_ACTIVITY } else { FAIL_ACTIVITY };
        b.emit(outcome, [None, Some(shop.clone()), Some(inspector), None, None]);
        pass_index = b.events.len() - 1;
    }
    let pass_clock = b.clock;

    let tag = queue(&mut b, means.transport_queue);
    b.emit("transport_dispatch", [None, Some(shop), None, tag, None]);
    let d = b.processing(means.transport);
    b.advance(d);
    b.emit("transport_arrival", [None, Some(yard.clone()), None, None, Some(lot)]);
    let arrival = b.events.last().expect("non-empty").timestamp;
    let weekend_wait = cfg.latent_factors && is_weekend(arrival);
    let wait = means.yard_wait * if weekend_wait { cfg.weekend_factor } else { 1.0 };
    let tag = queue(&mut b, wait);
    b.emit("waiting_cleared", [None, Some(yard.clone()), None, tag, None]);
    let d = b.processing(means.receipt_inspection + means.receipt_per_rework * rework_count as f64);
    b.advance(d);
    b.emit("receipt_inspection", [None, Some(yard.clone()), Some(qc), None, None]);
    let d = b.processing(means.storage);
    b.advance(d);
    b.emit("storage", [None, Some(yard.clone()), None, None, None]);
    let d = b.processing(means.release);
    b.advance(d);
    b.emit(END_ACTIVITY, [None, Some(yard), None, None, None]);
    let end_clock = b.clock;

    let events = std::mem::take(&mut b.events);
    let t0 = events[0].timestamp;
    let days = |t: DateTime<Utc>| (t - t0).num_seconds() as f64 / 86_400.0;
    let production = days(events[pass_index].timestamp);
    let post = days(events[events.len() - 1].timestamp) - production;
    debug_assert!(pass_clock > 0.0 && end_clock > pass_clock);
    let targets = Targets::from_segments(production, post);
    let end_index = events.len() - 1;
    let truth = CaseTruth {
        case_id: case_id.clone(),
        congestion,
        rework_count,
        vendor_speed: vendor_speed(spool.vendor),
        weekend_wait,
        production_days: targets.production,
        post_processing_days: targets.post_processing,
        procurement_days: targets.procurement,
        pass_index,
        end_index,
    };
    let record = StaticRecord {
        case_id: case_id.clone(),
        attrs: spool.attrs(),
        targets,
    };
    (Trace { case_id, events }, record, truth)
}

/// Generates `n_spools` cases. Each case draws from its own stream derived
/// from `(seed, case index)`, so output does not depend on thread count.
pub fn generate(cfg: &GenConfig) -> Result<Generated, GenError> {
    cfg.validate()?;
    let cases: Vec<_> = (0..cfg.n_spools).into_par_iter().map(|i| generate_case(cfg, i)).collect();
    let mut traces = Vec::with_capacity(cases.len());
    let mut records = Vec::with_capacity(cases.len());
    let mut truth = Vec::with_capacity(cases.len());
    for (t, r, g) in cases {
        traces.push(t);
        records.push(r);
        truth.push(g);
    }
    Ok(Generated {
        log: EventLog {
            attr_names: DYN_ATTRS.iter().map(|s| s.to_string()).collect(),
            traces,
        },
        statics: StaticTable {
            attr_names: STATIC_ATTRS.iter().map(|s| s.to_string()).collect(),
            records,
        },
        truth: GroundTruth { cases: truth },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub manifest_version: u32,
    pub config: GenConfig,
    pub n_cases: usize,
    pub n_events: usize,
    pub files: Vec<String>,
}

/// Writes the event log, static table, ground truth and manifest into `dir`.
pub fn write_outputs(dir: &Path, cfg: &GenConfig, out: &Generated) -> Result<GenManifest, GenError> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<File>, GenError> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    write_log(&out.log, create(EVENT_LOG_FILE)?)?;
    write_statics(&out.statics, create(STATIC_FILE)?)?;
    out.truth.write_csv(create(GROUND_TRUTH_FILE)?)?;
    let manifest = GenManifest {
        manifest_version: GEN_MANIFEST_VERSION,
        config: cfg.clone(),
        n_cases: out.log.traces.len(),
        n_events: out.log.n_events(),
        files: [EVENT_LOG_FILE, STATIC_FILE, GROUND_TRUTH_FILE]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let mut f = create(MANIFEST_FILE)?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Signal audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub task: Task,
    /// R² of a linear probe on static attributes alone.
    pub static_r2: f64,
    /// R² after adding per-trace process aggregates.
    pub combined_r2: f64,
}

impl AuditRow {
    pub fn gap(&self) -> f64 {
        self.combined_r2 - self.static_r2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_cases: usize,
    pub static_features: usize,
    pub process_features: Vec<String>,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn row(&self, task: Task) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.task == task)
    }

    pub fn min_gap(&self) -> f64 {
        self.rows.iter().map(AuditRow::gap).fold(f64::INFINITY, f64::min)
    }
}

impl std::fmt::Display for AuditReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "| task | static R² | static+process R² | gap |")?;
        writeln!(f, "|---|---:|---:|---:|")?;
        for r in &self.rows {
            writeln!(f, "| {} | {:.4} | {:.4} | {:.4} |", r.task, r.static_r2, r.combined_r2, r.gap())?;
        }
        Ok(())
    }
}

/// Static design columns: numeric attributes as-is and one indicator per
/// categorical level except the first (sorted) level.
pub fn static_design(data: &Dataset) -> Vec<Vec<f64>> {
    let n_attrs = data.static_attr_names.len();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for k in 0..n_attrs {
        let cells: Vec<&AttrValue> = data.cases.iter().map(|c| &c.record.attrs[k]).collect();
        if cells.iter().all(|v| matches!(v, AttrValue::Real(_))) {
            cols.push(
                cells
                    .iter()
                    .map(|v| if let AttrValue::Real(x) = v { *x } else { 0.0 })
                    .collect(),
            );
        } else {
            let levels: BTreeSet<String> = cells.iter().filter_map(|v| v.as_category()).collect();
            for level in levels.iter().skip(1) {
                cols.push(
                    cells
                        .iter()
                        .map(|v| f64::from(v.as_category().as_deref() == Some(level.as_str())))
                        .collect(),
                );
            }
        }
    }
    cols
}

pub const PROCESS_FEATURES: [&str; 3] = ["rework_count", "queue_lag_before_pass", "queue_lag_after_pass"];

/// Per-trace process aggregates: rework count and total queue lag before
/// and after the final inspection pass.
pub fn process_aggregates(trace: &Trace) -> [f64; 3] {
    let feats = temporal_features(trace);
    let pass = trace
        .events
        .iter()
        .rposition(|e| e.activity == PASS_ACTIVITY)
        .unwrap_or(trace.events.len());
    let reworks = trace.events.iter().filter(|e| e.activity == FAIL_ACTIVITY).count();
    let mut before = 0.0;
    let mut after = 0.0;
    for (i, (e, f)) in trace.events.iter().zip(&feats).enumerate() {
        if is_queue_activity(&e.activity) {
            if i <= pass {
                before += f.lagged;
            } else {
                after += f.lagged;
            }
        }
    }
    [reworks as f64, before, after]
}

/// In-sample R² of an ordinary least squares fit with intercept.
pub fn ols_r2(columns: &[Vec<f64>], y: &[f64]) -> Result<f64, GenError> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= 1e-12 * n as f64 {
        return Err(GenError::Audit("target has zero variance".into()));
    }
    let p = columns.len() + 1;
    // Centre and scale columns for conditioning; R² is unaffected.
    let x = DMatrix::from_fn(n, p, |i, j| {
        if j == 0 {
            return 1.0;
        }
        let c = &columns[j - 1];
        let m = c.iter().sum::<f64>() / n as f64;
        let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        if s > 0.0 {
            (c[i] - m) / s
        } else {
            0.0
        }
    });
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&yv, 1e-9)
        .map_err(|e| GenError::Audit(format!("least squares failed: {e}")))?;
    let resid = &yv - &x * beta;
    Ok(1.0 - resid.norm_squared() / sst)
}

/// Fits a static-only and a static-plus-process linear probe per task.
pub fn signal_audit(data: &Dataset) -> Result<AuditReport, GenError> {
    if data.cases.len() < 3 {
        return Err(GenError::Audit(format!("{} cases are too few to audit", data.cases.len())));
    }
    let static_cols = static_design(data);
    let mut combined = static_cols.clone();
    let aggs: Vec<[f64; 3]> = data.cases.iter().map(|c| process_aggregates(&c.trace)).collect();
    for k in 0..PROCESS_FEATURES.len() {
        combined.push(aggs.iter().map(|a| a[k]).collect());
    }
    let mut rows = Vec::new();
    for task in Task::ALL {
        let y: Vec<f64> = data.cases.iter().map(|c| c.record.targets.get(task)).collect();
        rows.push(AuditRow {
            task,
            static_r2: ols_r2(&static_cols, &y)?,
            combined_r2: ols_r2(&combined, &y)?,
        });
    }
    Ok(AuditReport {
        n_cases: data.cases.len(),
        static_features: static_cols.len(),
        process_features: PROCESS_FEATURES.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}
