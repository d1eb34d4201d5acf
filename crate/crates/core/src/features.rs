//! Temporal features, static records, and the train-fitted encoder that turns
//! traces and static records into numeric inputs.
//!
//! Encoded event rows are laid out as
//! `[activity one-hot | day-of-week one-hot | elapsed | lagged | dyn attrs]`,
//! with the three temporal blocks dropped when [`TemporalBlocks::Omit`] is
//! requested. Categorical blocks carry one trailing out-of-vocabulary slot,
//! which also receives absent values.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eventlog::{type_column, AttrValue, EventLog, Trace};
use crate::neural::Matrix;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const STD_FLOOR: f64 = 1e-8;
pub const ENCODER_SCHEMA_VERSION: u32 = 1;

/// Absolute tolerance for `procurement = production + post_processing`.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid target {column}={value:?}")]
    Target {
        line: u64,
        column: String,
        value: String,
    },
    #[error("case {case_id}: {message}")]
    Data { case_id: String, message: String },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("encoder schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The three lead-time prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Production,
    #[serde(rename = "postprocessing")]
    PostProcessing,
    Procurement,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Production, Task::PostProcessing, Task::Procurement];

    pub fn name(self) -> &'static str {
        match self {
            Task::Production => "production",
            Task::PostProcessing => "postprocessing",
            Task::Procurement => "procurement",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            Task::Production => "y_production",
            Task::PostProcessing => "y_postprocessing",
            Task::Procurement => "y_procurement",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "production" => Ok(Task::Production),
            "postprocessing" => Ok(Task::PostProcessing),
            "procurement" | "plt" => Ok(Task::Procurement),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Lead-time labels in days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub production: f64,
    pub post_processing: f64,
    pub procurement: f64,
}

impl Targets {
    /// Builds a consistent label triple from its two segments.
    pub fn from_segments(production: f64, post_processing: f64) -> Self {
        Self {
            production,
            post_processing,
            procurement: production + post_processing,
        }
    }

    pub fn get(&self, task: Task) -> f64 {
        match task {
            Task::Production => self.production,
            Task::PostProcessing => self.post_processing,
            Task::Procurement => self.procurement,
        }
    }

    pub fn is_additive(&self) -> bool {
        (self.production + self.post_processing - self.procurement).abs() <= ADDITIVITY_TOLERANCE
    }
}

/// One spool's static attributes and labels. `attrs` aligns with the owning
/// table's `attr_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRecord {
    pub case_id: String,
    pub attrs: Vec<AttrValue>,
    pub targets: Targets,
}

/// Reads the label for `task`, rejecting negative or non-finite durations.
pub fn extract_target(record: &StaticRecord, task: Task) -> Result<f64, FeatureError> {
    let y = record.targets.get(task);
    if !y.is_finite() || y < 0.0 {
        return Err(FeatureError::Data {
            case_id: record.case_id.clone(),
            message: format!("{task} target {y} is not a non-negative duration"),
        });
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticTable {
    pub attr_names: Vec<String>,
    pub records: Vec<StaticRecord>,
}

/// Reads the static CSV (`case_id,s_<name>...,y_production,y_postprocessing,y_procurement`).
pub fn parse_statics<R: Read>(source: R) -> Result<StaticTable, FeatureError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FeatureError::MissingColumn(name.to_string()))
    };
    let case_col = col("case_id")?;
    let target_cols: Vec<usize> = Task::ALL.iter().map(|t| col(t.column())).collect::<Result<_, _>>()?;
    let attr_cols: Vec<usize> = (0..header.len())
        .filter(|i| *i != case_col && !target_cols.contains(i))
        .collect();
    let attr_names = attr_cols
        .iter()
        .map(|&i| header[i].strip_prefix("s_").unwrap_or(&header[i]).to_string())
        .collect();

    let mut ids = Vec::new();
    let mut targets = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(FeatureError::Arity {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut y = [0.0; 3];
        for (k, &c) in target_cols.iter().enumerate() {
            y[k] = crate::eventlog::parse_real(&record[c]).ok_or_else(|| FeatureError::Target {
                line,
                column: header[c].to_string(),
                value: record[c].to_string(),
            })?;
        }
        let t = Targets {
            production: y[0],
            post_processing: y[1],
            procurement: y[2],
        };
        let case_id = record[case_col].to_string();
        if !t.is_additive() {
            return Err(FeatureError::Data {
                case_id,
                message: "procurement target is not production + post-processing".into(),
            });
        }
        ids.push(case_id);
        targets.push(t);
        for (k, &c) in attr_cols.iter().enumerate() {
            cells[k].push(record[c].to_string());
        }
    }
    if ids.is_empty() {
        return Err(FeatureError::Empty("static table"));
    }
    let mut typed: Vec<std::vec::IntoIter<AttrValue>> = cells
        .iter()
        .map(|col| {
            let refs: Vec<&str> = col.iter().map(String::as_str).collect();
            type_column(&refs).into_iter()
        })
        .collect();
    let records = ids
        .into_iter()
        .zip(targets)
        .map(|(case_id, targets)| StaticRecord {
            case_id,
            attrs: typed.iter_mut().map(|c| c.next().expect("column length")).collect(),
            targets,
        })
        .collect();
    Ok(StaticTable {
        attr_names,
        records,
    })
}

pub fn write_statics<W: Write>(table: &StaticTable, sink: W) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["case_id".to_string()];
    header.extend(table.attr_names.iter().map(|n| format!("s_{n}")));
    header.extend(Task::ALL.iter().map(|t| t.column().to_string()));
    w.write_record(&header)?;
    for r in &table.records {
        let mut row = vec![r.case_id.clone()];
        row.extend(r.attrs.iter().map(AttrValue::to_cell));
        row.extend(Task::ALL.iter().map(|t| crate::decimal::to_text(r.targets.get(*t))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A trace joined with its static record.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub trace: Trace,
    pub record: StaticRecord,
}

impl Case {
    pub fn case_id(&self) -> &str {
        &self.record.case_id
    }
}

/// Event log and static table joined on case id, in static-table order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub dyn_attr_names: Vec<String>,
    pub static_attr_names: Vec<String>,
    pub cases: Vec<Case>,
}

impl Dataset {
    /// Joins `log` and `statics`; every static record needs a trace.
    pub fn join(log: &EventLog, statics: &StaticTable) -> Result<Self, FeatureError> {
        let index = log.case_index();
        let cases = statics
            .records
            .iter()
            .map(|r| {
                let trace = index.get(r.case_id.as_str()).ok_or_else(|| FeatureError::Data {
                    case_id: r.case_id.clone(),
                    message: "no trace in the event log".into(),
                })?;
                Ok(Case {
                    trace: (*trace).clone(),
                    record: r.clone(),
                })
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        Ok(Self {
            dyn_attr_names: log.attr_names.clone(),
            static_attr_names: statics.attr_names.clone(),
            cases,
        })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn case_ids(&self) -> Vec<String> {
        self.cases.iter().map(|c| c.record.case_id.clone()).collect()
    }

    /// The cases named in `ids`, in that order. Unknown ids are skipped.
    pub fn subset(&self, ids: &[String]) -> Self {
        let index: HashMap<&str, &Case> = self.cases.iter().map(|c| (c.case_id(), c)).collect();
        Self {
            dyn_attr_names: self.dyn_attr_names.clone(),
            static_attr_names: self.static_attr_names.clone(),
            cases: ids
                .iter()
                .filter_map(|id| index.get(id.as_str()).map(|c| (*c).clone()))
                .collect(),
        }
    }

    pub fn event_log(&self) -> EventLog {
        EventLog::new(
            self.dyn_attr_names.clone(),
            self.cases.iter().map(|c| c.trace.clone()).collect(),
        )
    }

    pub fn static_table(&self) -> StaticTable {
        StaticTable {
            attr_names: self.static_attr_names.clone(),
            records: self.cases.iter().map(|c| c.record.clone()).collect(),
        }
    }
}

/// Per-event temporal attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFeatures {
    /// Days since the first event of the trace.
    pub elapsed: f64,
    /// Days since the previous event.
    pub lagged: f64,
    /// Day of week, Monday = 0.
    pub dow: u8,
    /// Whole seconds since the first event.
    pub elapsed_seconds: i64,
    /// Whole seconds since the previous event.
    pub lagged_seconds: i64,
}

/// Elapsed, lagged and day-of-week features for each event of a sorted trace.
///
/// Both durations are derived from whole-second differences, so
/// `elapsed_seconds[i] == lagged_seconds[1] + … + lagged_seconds[i]` holds
/// exactly, and each day value is the correctly rounded quotient of its
/// second count.
pub fn temporal_features(trace: &Trace) -> Vec<TemporalFeatures> {
    let mut out = Vec::with_capacity(trace.len());
    let mut elapsed_seconds = 0i64;
    let mut prev: Option<chrono::DateTime<chrono::Utc>> = None;
    for e in &trace.events {
        let lagged_seconds = prev.map_or(0, |p| (e.timestamp - p).num_seconds());
        elapsed_seconds += lagged_seconds;
        out.push(TemporalFeatures {
            elapsed: elapsed_seconds as f64 / SECONDS_PER_DAY,
            lagged: lagged_seconds as f64 / SECONDS_PER_DAY,
            dow: e.timestamp.weekday().num_days_from_monday() as u8,
            elapsed_seconds,
            lagged_seconds,
        });
        prev = Some(e.timestamp);
    }
    out
}

/// Mean and (population) standard deviation used for z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    #[serde(with = "crate::decimal")]
    pub mean: f64,
    #[serde(with = "crate::decimal")]
    pub std: f64,
}

impl Standardizer {
    /// Fits over `values`; the bool reports whether the std floor was hit.
    pub fn fit(values: impl IntoIterator<Item = f64>) -> (Self, bool) {
        let (mut n, mut sum) = (0usize, 0.0);
        let vals: Vec<f64> = values.into_iter().collect();
        for v in &vals {
            n += 1;
            sum += v;
        }
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        let var = if n == 0 {
            0.0
        } else {
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
        };
        let std = var.sqrt();
        let floored = std < STD_FLOOR;
        (
            Self {
                mean,
                std: std.max(STD_FLOOR),
            },
            floored,
        )
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttrKind {
    /// Sorted training vocabulary; the OOV slot follows it.
    Categorical { vocab: Vec<String> },
    Numeric {
        #[serde(flatten)]
        stats: Standardizer,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrEncoding {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttrKind,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl AttrEncoding {
    fn categorical(name: &str, vocab: Vec<String>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Self {
            name: name.to_string(),
            kind: AttrKind::Categorical { vocab },
            index,
        }
    }

    fn numeric(name: &str, stats: Standardizer) -> Self {
        Self {
            name: name.to_string(),
            kind: AttrKind::Numeric { stats },
            index: HashMap::new(),
        }
    }

    fn rebuild_index(&mut self) {
        if let AttrKind::Categorical { vocab } = &self.kind {
            self.index = vocab.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        }
    }

    fn fit<'a>(name: &str, values: impl Iterator<Item = &'a AttrValue>, warnings: &mut Vec<String>) -> Self {
        let values: Vec<&AttrValue> = values.filter(|v| !v.is_absent()).collect();
        let numeric = !values.is_empty() && values.iter().all(|v| matches!(v, AttrValue::Real(_)));
        if numeric {
            let (stats, floored) = Standardizer::fit(values.iter().map(|v| match v {
                AttrValue::Real(x) => *x,
                _ => unreachable!(),
            }));
            if floored {
                warnings.push(format!("attribute {name:?} is constant in training data; std floored"));
            }
            Self::numeric(name, stats)
        } else {
            let vocab: BTreeSet<String> = values.iter().filter_map(|v| v.as_category()).collect();
            Self::categorical(name, vocab.into_iter().collect())
        }
    }

    pub fn width(&self) -> usize {
        match &self.kind {
            AttrKind::Categorical { vocab } => vocab.len() + 1,
            AttrKind::Numeric { .. } => 1,
        }
    }

    fn encode_into(&self, value: &AttrValue, out: &mut [f64]) {
        match &self.kind {
            AttrKind::Categorical { vocab } => {
                let slot = value
                    .as_category()
                    .and_then(|k| self.index.get(&k).copied())
                    .unwrap_or(vocab.len());
                out[slot] = 1.0;
            }
            AttrKind::Numeric { stats } => {
                out[0] = match value {
                    AttrValue::Real(x) => stats.apply(*x),
                    _ => 0.0,
                };
            }
        }
    }
}

/// Whether encoded event rows carry the elapsed, lagged and day-of-week
/// blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalBlocks {
    Include,
    Omit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub production: Standardizer,
    #[serde(rename = "postprocessing")]
    pub post_processing: Standardizer,
    pub procurement: Standardizer,
}

impl TargetStats {
    pub fn get(&self, task: Task) -> &Standardizer {
        match task {
            Task::Production => &self.production,
            Task::PostProcessing => &self.post_processing,
            Task::Procurement => &self.procurement,
        }
    }
}

/// Vocabularies and normalization statistics fitted on a training
/// partition. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub schema_version: u32,
    pub activity_vocab: Vec<String>,
    pub dyn_attrs: Vec<AttrEncoding>,
    pub static_attrs: Vec<AttrEncoding>,
    pub elapsed: Standardizer,
    pub lagged: Standardizer,
    pub targets: TargetStats,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(skip)]
    activity_index: HashMap<String, usize>,
}

pub const DOW_WIDTH: usize = 7;

/// Fits an [`Encoder`] on the training partition only.
pub fn fit_encoder(train: &Dataset) -> Result<Encoder, FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::Empty("training partition"));
    }
    let mut warnings = Vec::new();
    let activities: BTreeSet<&str> = train
        .cases
        .iter()
        .flat_map(|c| c.trace.events.iter().map(|e| e.activity.as_str()))
        .collect();
    let activity_vocab: Vec<String> = activities.into_iter().map(str::to_string).collect();

    let dyn_attrs = train
        .dyn_attr_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals = train.cases.iter().flat_map(|c| c.trace.events.iter().map(move |e| e.attr(k)));
            AttrEncoding::fit(name, vals, &mut warnings)
        })
        .collect();
    let static_attrs = train
        .static_attr_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals = train.cases.iter().map(move |c| c.record.attrs.get(k).unwrap_or(&AttrValue::Absent));
            AttrEncoding::fit(name, vals, &mut warnings)
        })
        .collect();

    let temporal: Vec<Vec<TemporalFeatures>> = train.cases.iter().map(|c| temporal_features(&c.trace)).collect();
    let (elapsed, fe) = Standardizer::fit(temporal.iter().flatten().map(|t| t.elapsed));
    let (lagged, fl) = Standardizer::fit(temporal.iter().flatten().map(|t| t.lagged));
    if fe {
        warnings.push("elapsed time is constant in training data; std floored".into());
    }
    if fl {
        warnings.push("lagged time is constant in training data; std floored".into());
    }

    let mut target_stats = Vec::with_capacity(3);
    for task in Task::ALL {
        let ys = train
            .cases
            .iter()
            .map(|c| extract_target(&c.record, task))
            .collect::<Result<Vec<_>, _>>()?;
        let (s, floored) = Standardizer::fit(ys);
        if floored {
            warnings.push(format!("{task} target is constant in training data; std floored"));
        }
        target_stats.push(s);
    }

    let mut enc = Encoder {
        schema_version: ENCODER_SCHEMA_VERSION,
        activity_vocab,
        dyn_attrs,
        static_attrs,
        elapsed,
        lagged,
        targets: TargetStats {
            production: target_stats[0],
            post_processing: target_stats[1],
            procurement: target_stats[2],
        },
        warnings,
        activity_index: HashMap::new(),
    };
    enc.rebuild_indexes();
    Ok(enc)
}

impl Encoder {
    fn rebuild_indexes(&mut self) {
        self.activity_index = self
            .activity_vocab
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        for a in self.dyn_attrs.iter_mut().chain(self.static_attrs.iter_mut()) {
            a.rebuild_index();
        }
    }

    /// Width of the activity block, including the OOV slot.
    pub fn activity_width(&self) -> usize {
        self.activity_vocab.len() + 1
    }

    /// Width of an encoded event row.
    pub fn step_dim(&self, blocks: TemporalBlocks) -> usize {
        let temporal = match blocks {
            TemporalBlocks::Include => DOW_WIDTH + 2,
            TemporalBlocks::Omit => 0,
        };
        self.activity_width() + temporal + self.dyn_attrs.iter().map(AttrEncoding::width).sum::<usize>()
    }

    pub fn static_dim(&self) -> usize {
        self.static_attrs.iter().map(AttrEncoding::width).sum()
    }

    /// Columns of the day-of-week, elapsed and lagged blocks in a row encoded
    /// with [`TemporalBlocks::Include`].
    pub fn temporal_columns(&self) -> std::ops::Range<usize> {
        let a = self.activity_width();
        a..a + DOW_WIDTH + 2
    }

    pub fn encode_trace(&self, trace: &Trace, blocks: TemporalBlocks) -> Matrix {
        let d = self.step_dim(blocks);
        let mut m = Matrix::zeros(trace.len(), d);
        let temporal = temporal_features(trace);
        for (r, (e, tf)) in trace.events.iter().zip(&temporal).enumerate() {
            let row = m.row_mut(r);
            let slot = self
                .activity_index
                .get(&e.activity)
                .copied()
                .unwrap_or(self.activity_vocab.len());
            row[slot] = 1.0;
            let mut off = self.activity_width();
            if blocks == TemporalBlocks::Include {
                row[off + tf.dow as usize] = 1.0;
                off += DOW_WIDTH;
                row[off] = self.elapsed.apply(tf.elapsed);
                row[off + 1] = self.lagged.apply(tf.lagged);
                off += 2;
            }
            for (k, a) in self.dyn_attrs.iter().enumerate() {
                let w = a.width();
                a.encode_into(e.attr(k), &mut row[off..off + w]);
                off += w;
            }
        }
        m
    }

    pub fn encode_static(&self, record: &StaticRecord) -> Vec<f64> {
        let mut v = vec![0.0; self.static_dim()];
        let mut off = 0;
        for (k, a) in self.static_attrs.iter().enumerate() {
            let w = a.width();
            a.encode_into(record.attrs.get(k).unwrap_or(&AttrValue::Absent), &mut v[off..off + w]);
            off += w;
        }
        v
    }

    pub fn normalize_target(&self, y: f64, task: Task) -> f64 {
        self.targets.get(task).apply(y)
    }

    pub fn denormalize_target(&self, z: f64, task: Task) -> f64 {
        self.targets.get(task).invert(z)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("encoder serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, FeatureError> {
        let mut enc: Encoder = serde_json::from_str(s)?;
        if enc.schema_version != ENCODER_SCHEMA_VERSION {
            return Err(FeatureError::Version {
                found: enc.schema_version,
                expected: ENCODER_SCHEMA_VERSION,
            });
        }
        enc.rebuild_indexes();
        Ok(enc)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_string(self).expect("encoder serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// One encoded case.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCase {
    pub case_id: String,
    pub steps: Matrix,
    pub static_vec: Vec<f64>,
    /// z-scored target.
    pub target: f64,
    /// Target in days.
    pub target_days: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub task: Task,
    pub blocks: TemporalBlocks,
    pub cases: Vec<EncodedCase>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

pub fn encode_dataset(
    data: &Dataset,
    encoder: &Encoder,
    task: Task,
    blocks: TemporalBlocks,
) -> Result<EncodedDataset, FeatureError> {
    let cases = data
        .cases
        .iter()
        .map(|c| {
            let y = extract_target(&c.record, task)?;
            Ok(EncodedCase {
                case_id: c.record.case_id.clone(),
                steps: encoder.encode_trace(&c.trace, blocks),
                static_vec: encoder.encode_static(&c.record),
                target: encoder.normalize_target(y, task),
                target_days: y,
            })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok(EncodedDataset { task, blocks, cases })
}
