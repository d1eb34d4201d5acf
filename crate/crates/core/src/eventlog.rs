//! Event logs: events grouped into per-case traces.
//!
//! An [`EventLog`] is a set of [`Trace`]s, each a non-empty, timestamp-ordered
//! sequence of [`Event`]s sharing one case id. Dynamic attributes are stored
//! positionally and named once at the log level (`attr_names`).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use thiserror::Error;

/// Timestamp layout used by every CSV this crate reads or writes.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid timestamp {value:?}")]
    Timestamp { line: u64, value: String },
    #[error("line {line}: empty {field}")]
    EmptyField { line: u64, field: &'static str },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("event log is empty")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A dynamic or static attribute value. Columns are typed on read: a column
/// is real iff every non-empty cell parses as a finite real.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Text(String),
    Real(f64),
    Absent,
}

impl AttrValue {
    pub fn is_absent(&self) -> bool {
        matches!(self, AttrValue::Absent)
    }

    /// Cell text as written to CSV. Reals use the shortest round-trip form.
    pub fn to_cell(&self) -> String {
        match self {
            AttrValue::Text(s) => s.clone(),
            AttrValue::Real(v) => format!("{v}"),
            AttrValue::Absent => String::new(),
        }
    }

    /// Category key used by encoders.
    pub fn as_category(&self) -> Option<String> {
        match self {
            AttrValue::Absent => None,
            other => Some(other.to_cell()),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cell())
    }
}

pub(crate) fn parse_real(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Types a column of raw cells: reals if every non-empty cell is a real.
pub(crate) fn type_column(cells: &[&str]) -> Vec<AttrValue> {
    let numeric = cells
        .iter()
        .filter(|c| !c.is_empty())
        .all(|c| parse_real(c).is_some());
    cells
        .iter()
        .map(|c| {
            if c.is_empty() {
                AttrValue::Absent
            } else if numeric {
                AttrValue::Real(parse_real(c).expect("checked numeric"))
            } else {
                AttrValue::Text((*c).to_string())
            }
        })
        .collect()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .ok()
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    /// Values aligned with the owning log's `attr_names`.
    pub attrs: Vec<AttrValue>,
}

impl Event {
    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn activity(&self) -> &str {
        &self.activity
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn attr(&self, index: usize) -> &AttrValue {
        self.attrs.get(index).unwrap_or(&AttrValue::Absent)
    }

    fn same_content(&self, other: &Event) -> bool {
        self.activity == other.activity
            && self.timestamp == other.timestamp
            && self.attrs == other.attrs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first(&self) -> Option<&Event> {
        self.events.first()
    }

    pub fn last(&self) -> Option<&Event> {
        self.events.last()
    }
}

/// Column mapping for [`parse_log`]. Every column that is not the case,
/// activity, or timestamp column is a dynamic attribute; `attr_prefix` is
/// stripped from its name when present.
#[derive(Debug, Clone)]
pub struct Schema {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: String,
    pub attr_prefix: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            case_column: "case_id".into(),
            activity_column: "activity".into(),
            timestamp_column: "timestamp".into(),
            attr_prefix: "d_".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub attr_names: Vec<String>,
    pub traces: Vec<Trace>,
}

impl EventLog {
    pub fn new(attr_names: Vec<String>, traces: Vec<Trace>) -> Self {
        Self { attr_names, traces }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn trace(&self, case_id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.case_id == case_id)
    }

    pub fn case_index(&self) -> HashMap<&str, &Trace> {
        self.traces
            .iter()
            .map(|t| (t.case_id.as_str(), t))
            .collect()
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attr_names.iter().position(|n| n == name)
    }
}

/// Reads an event-log CSV. Events are grouped by case in first-appearance
/// order and sorted stably by timestamp, so ties keep file order.
pub fn parse_log<R: Read>(source: R, schema: &Schema) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(LogError::Empty);
    }
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))
    };
    let case_col = column(&schema.case_column)?;
    let act_col = column(&schema.activity_column)?;
    let ts_col = column(&schema.timestamp_column)?;
    let attr_cols: Vec<usize> = (0..header.len())
        .filter(|i| ![case_col, act_col, ts_col].contains(i))
        .collect();
    let attr_names: Vec<String> = attr_cols
        .iter()
        .map(|&i| {
            let h = &header[i];
            h.strip_prefix(schema.attr_prefix.as_str())
                .unwrap_or(h)
                .to_string()
        })
        .collect();

    struct Row {
        case_id: String,
        activity: String,
        timestamp: DateTime<Utc>,
        cells: Vec<String>,
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(LogError::Arity {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let case_id = record[case_col].to_string();
        if case_id.is_empty() {
            return Err(LogError::EmptyField {
                line,
                field: "case id",
            });
        }
        let activity = record[act_col].to_string();
        if activity.is_empty() {
            return Err(LogError::EmptyField {
                line,
                field: "activity",
            });
        }
        let raw_ts = &record[ts_col];
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| LogError::Timestamp {
            line,
            value: raw_ts.to_string(),
        })?;
        let cells = attr_cols.iter().map(|&i| record[i].to_string()).collect();
        rows.push(Row {
            case_id,
            activity,
            timestamp,
            cells,
        });
    }
    if rows.is_empty() {
        return Err(LogError::Empty);
    }

    let mut typed: Vec<Vec<AttrValue>> = Vec::with_capacity(attr_cols.len());
    for k in 0..attr_cols.len() {
        let cells: Vec<&str> = rows.iter().map(|r| r.cells[k].as_str()).collect();
        typed.push(type_column(&cells));
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Event>> = HashMap::new();
    for (i, row) in rows.into_iter().enumerate() {
        let attrs = typed.iter_mut().map(|col| std::mem::replace(&mut col[i], AttrValue::Absent)).collect();
        let event = Event {
            case_id: row.case_id.clone(),
            activity: row.activity,
            timestamp: row.timestamp,
            attrs,
        };
        groups
            .entry(row.case_id)
            .or_insert_with_key(|k| {
                order.push(k.clone());
                Vec::new()
            })
            .push(event);
    }
    let traces = order
        .into_iter()
        .map(|case_id| {
            let mut events = groups.remove(&case_id).expect("grouped");
            events.sort_by_key(|e| e.timestamp);
            Trace { case_id, events }
        })
        .collect();
    Ok(EventLog { attr_names, traces })
}

/// Writes `log` in the event-log CSV format, traces in log order.
pub fn write_log<W: Write>(log: &EventLog, sink: W) -> Result<(), LogError> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec![
        "case_id".to_string(),
        "activity".to_string(),
        "timestamp".to_string(),
    ];
    header.extend(log.attr_names.iter().map(|n| format!("d_{n}")));
    writer.write_record(&header)?;
    for trace in &log.traces {
        for event in &trace.events {
            let mut row = vec![
                event.case_id.clone(),
                event.activity.clone(),
                format_timestamp(&event.timestamp),
            ];
            row.extend((0..log.attr_names.len()).map(|k| event.attr(k).to_cell()));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    EmptyTrace,
    EmptyCaseId,
    EmptyActivity,
    CaseMismatch,
    Unsorted,
    DuplicateEvent,
    DuplicateCaseId,
    AttrArity,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::EmptyTrace => "empty trace",
            Rule::EmptyCaseId => "empty case id",
            Rule::EmptyActivity => "empty activity",
            Rule::CaseMismatch => "case id mismatch",
            Rule::Unsorted => "timestamps not sorted",
            Rule::DuplicateEvent => "duplicate event",
            Rule::DuplicateCaseId => "duplicate case id",
            Rule::AttrArity => "attribute count mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub case_id: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {:?}: {}", self.case_id, self.rule)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn validate_trace(trace: &Trace, n_attrs: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule, detail: String| {
        out.push(Violation {
            case_id: trace.case_id.clone(),
            rule,
            detail,
        })
    };
    if trace.case_id.is_empty() {
        push(Rule::EmptyCaseId, String::new());
    }
    if trace.events.is_empty() {
        push(Rule::EmptyTrace, String::new());
        return out;
    }
    for (i, e) in trace.events.iter().enumerate() {
        if e.case_id != trace.case_id {
            push(Rule::CaseMismatch, format!("event {i} has case {:?}", e.case_id));
        }
        if e.activity.is_empty() {
            push(Rule::EmptyActivity, format!("event {i}"));
        }
        if e.attrs.len() != n_attrs {
            push(
                Rule::AttrArity,
                format!("event {i} has {} attributes, log has {n_attrs}", e.attrs.len()),
            );
        }
    }
    for (i, pair) in trace.events.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            push(Rule::Unsorted, format!("events {i} and {}", i + 1));
        }
    }
    // Equal content implies equal timestamps, so only runs of equal
    // timestamps need pairwise comparison in a sorted trace.
    let mut by_time: HashMap<DateTime<Utc>, Vec<usize>> = HashMap::new();
    for (i, e) in trace.events.iter().enumerate() {
        by_time.entry(e.timestamp).or_default().push(i);
    }
    let mut dupes: Vec<(usize, usize)> = Vec::new();
    for idx in by_time.values() {
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                if trace.events[idx[a]].same_content(&trace.events[idx[b]]) {
                    dupes.push((idx[a], idx[b]));
                }
            }
        }
    }
    dupes.sort_unstable();
    for (a, b) in dupes {
        push(Rule::DuplicateEvent, format!("events {a} and {b}"));
    }
    out
}

/// Checks every trace and log invariant. An empty result means the log is
/// well formed.
pub fn validate_log(log: &EventLog) -> Vec<Violation> {
    use rayon::prelude::*;
    let n_attrs = log.attr_names.len();
    let mut out: Vec<Violation> = log
        .traces
        .par_iter()
        .map(|t| validate_trace(t, n_attrs))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut seen = HashSet::new();
    for t in &log.traces {
        if !seen.insert(t.case_id.as_str()) {
            out.push(Violation {
                case_id: t.case_id.clone(),
                rule: Rule::DuplicateCaseId,
                detail: String::new(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogStats {
    pub n_traces: usize,
    pub n_events: usize,
    pub trace_len_min: usize,
    pub trace_len_max: usize,
    pub activity_vocab_size: usize,
    pub dyn_attr_names: Vec<String>,
}

pub fn log_stats(log: &EventLog) -> Result<LogStats, LogError> {
    if log.is_empty() {
        return Err(LogError::Empty);
    }
    let lens = log.traces.iter().map(Trace::len);
    let activities: HashSet<&str> = log
        .traces
        .iter()
        .flat_map(|t| t.events.iter().map(|e| e.activity.as_str()))
        .collect();
    Ok(LogStats {
        n_traces: log.len(),
        n_events: log.n_events(),
        trace_len_min: lens.clone().min().unwrap_or(0),
        trace_len_max: lens.max().unwrap_or(0),
        activity_vocab_size: activities.len(),
        dyn_attr_names: log.attr_names.clone(),
    })
}

impl fmt::Display for LogStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "traces:            {}", self.n_traces)?;
        writeln!(f, "events:            {}", self.n_events)?;
        writeln!(
            f,
            "trace length:      {}-{}",
            self.trace_len_min, self.trace_len_max
        )?;
        writeln!(f, "activities:        {}", self.activity_vocab_size)?;
        write!(f, "dynamic attributes: {}", self.dyn_attr_names.join(", "))
    }
}
