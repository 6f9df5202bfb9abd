//! Event-log data model and ingestion.
//!
//! An [`EventLog`] is an ordered collection of [`Trace`]s, each an ordered,
//! non-empty sequence of activity-labelled [`Event`]s. Logs are read from XES
//! (optionally gzip-compressed) or from CSV, and can be written back to the
//! canonical CSV layout. [`variants`] and [`build_dfg`] provide the two
//! abstractions every downstream module consumes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or ingesting an event log.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log contains no traces")]
    Empty,
    #[error("trace {trace} ({case_id}) has no events")]
    EmptyTrace { trace: usize, case_id: String },
    #[error("trace {trace}: event {event} has an empty activity label")]
    EmptyActivity { trace: usize, event: usize },
    #[error("trace {trace} ({case_id}): timestamps decrease at event {event}")]
    UnorderedTimestamps {
        trace: usize,
        case_id: String,
        event: usize,
    },
    #[error("malformed XES at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("trace {trace}: event {event} lacks a `concept:name` attribute")]
    MissingActivity { trace: usize, event: usize },
    #[error("trace {trace}: event {event} has an unparseable timestamp `{value}`")]
    XesTimestamp {
        trace: usize,
        event: usize,
        value: String,
    },
    #[error("CSV header lacks the mapped column `{0}`")]
    MissingColumn(String),
    #[error("CSV row {row}: unparseable timestamp `{value}`")]
    CsvTimestamp { row: usize, value: String },
    #[error("CSV row {row}: {message}")]
    CsvRow { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single recorded activity execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub timestamp: Option<DateTime<Utc>>,
}

impl Event {
    pub fn new(activity: impl Into<String>) -> Self {
        Event {
            activity: activity.into(),
            timestamp: None,
        }
    }

    pub fn with_timestamp(activity: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Event {
            activity: activity.into(),
            timestamp: Some(timestamp.trunc_subsecs(6)),
        }
    }
}

/// The events recorded for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    events: Vec<Event>,
}

impl Trace {
    /// Builds a trace, trimming activity labels. Fails on an empty event list,
    /// an empty label or decreasing timestamps.
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Result<Self, LogError> {
        Self::validated(0, case_id.into(), events)
    }

    /// Convenience constructor for label-only traces.
    pub fn from_activities<S: AsRef<str>>(
        case_id: impl Into<String>,
        activities: &[S],
    ) -> Result<Self, LogError> {
        let events = activities.iter().map(|a| Event::new(a.as_ref())).collect();
        Self::new(case_id, events)
    }

    fn validated(index: usize, case_id: String, mut events: Vec<Event>) -> Result<Self, LogError> {
        if events.is_empty() {
            return Err(LogError::EmptyTrace {
                trace: index,
                case_id,
            });
        }
        let mut last: Option<DateTime<Utc>> = None;
        for (i, event) in events.iter_mut().enumerate() {
            let trimmed = event.activity.trim();
            if trimmed.is_empty() {
                return Err(LogError::EmptyActivity {
                    trace: index,
                    event: i,
                });
            }
            if trimmed.len() != event.activity.len() {
                event.activity = trimmed.to_string();
            }
            if let Some(ts) = event.timestamp {
                if matches!(last, Some(prev) if ts < prev) {
                    return Err(LogError::UnorderedTimestamps {
                        trace: index,
                        case_id,
                        event: i,
                    });
                }
                last = Some(ts);
            }
        }
        Ok(Trace { case_id, events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Always false; traces hold at least one event.
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.activity.as_str())
    }
}

/// A non-empty collection of traces with its derived activity alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    traces: Vec<Trace>,
    alphabet: BTreeSet<String>,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Result<Self, LogError> {
        if traces.is_empty() {
            return Err(LogError::Empty);
        }
        let alphabet = traces
            .iter()
            .flat_map(|t| t.activities().map(str::to_string))
            .collect();
        Ok(EventLog { traces, alphabet })
    }

    /// Builds a log from label sequences with case ids `0, 1, ...`.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Result<Self, LogError> {
        let traces = sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| Trace::from_activities(i.to_string(), seq))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(traces)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Activity sequences in log order.
    pub fn sequences(&self) -> Vec<Vec<&str>> {
        self.traces.iter().map(|t| t.activities().collect()).collect()
    }

    /// Traces encoded as indices into the sorted alphabet.
    pub fn encoded(&self) -> (Vec<String>, Vec<Vec<u32>>) {
        let names: Vec<String> = self.alphabet.iter().cloned().collect();
        let index: HashMap<&str, u32> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as u32))
            .collect();
        let encoded = self
            .traces
            .iter()
            .map(|t| t.activities().map(|a| index[a]).collect())
            .collect();
        (names, encoded)
    }
}

/// Occurrence count per distinct activity sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantTable {
    pub entries: BTreeMap<Vec<String>, usize>,
    pub total: usize,
}

impl VariantTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Counts sorted in descending order, ties broken by variant order.
    pub fn counts_descending(&self) -> Vec<usize> {
        let mut counts: Vec<usize> = self.entries.values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        counts
    }
}

pub fn variants(log: &EventLog) -> VariantTable {
    let mut entries: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for trace in log.traces() {
        let key: Vec<String> = trace.activities().map(str::to_string).collect();
        *entries.entry(key).or_default() += 1;
    }
    VariantTable {
        entries,
        total: log.traces().len(),
    }
}

/// Directly-follows graph with start and end activity frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectlyFollowsGraph {
    pub nodes: BTreeSet<String>,
    pub edge_counts: BTreeMap<(String, String), usize>,
    pub start_counts: BTreeMap<String, usize>,
    pub end_counts: BTreeMap<String, usize>,
}

impl DirectlyFollowsGraph {
    pub fn edge(&self, from: &str, to: &str) -> usize {
        self.edge_counts
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_edge_count(&self) -> usize {
        self.edge_counts.values().sum()
    }
}

pub fn build_dfg(log: &EventLog) -> DirectlyFollowsGraph {
    let mut dfg = DirectlyFollowsGraph {
        nodes: log.alphabet().clone(),
        ..Default::default()
    };
    for trace in log.traces() {
        let events = trace.events();
        *dfg.start_counts
            .entry(events[0].activity.clone())
            .or_default() += 1;
        *dfg.end_counts
            .entry(events[events.len() - 1].activity.clone())
            .or_default() += 1;
        for pair in events.windows(2) {
            *dfg.edge_counts
                .entry((pair[0].activity.clone(), pair[1].activity.clone()))
                .or_default() += 1;
        }
    }
    dfg
}

// ---------------------------------------------------------------------------
// Timestamps

pub(crate) fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc).trunc_subsecs(6));
    }
    // XES writers frequently emit offsets without a colon (`+0100`).
    if let Ok(dt) = DateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some(dt.with_timezone(&Utc).trunc_subsecs(6));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc().trunc_subsecs(6));
        }
    }
    None
}

pub(crate) fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string()
}

/// Stable-sorts by timestamp when every event carries one.
fn sort_if_timed(events: &mut [Event]) {
    if events.iter().all(|e| e.timestamp.is_some()) {
        events.sort_by_key(|e| e.timestamp);
    }
}

// ---------------------------------------------------------------------------
// XES

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parses an XES document (plain or gzip-compressed).
///
/// Only `concept:name` and `time:timestamp` attributes placed directly on a
/// `<trace>` or `<event>` are read; everything else is skipped.
pub fn parse_xes<R: Read>(mut input: R) -> Result<EventLog, LogError> {
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut decoded = Vec::new();
        flate2::read::MultiGzDecoder::new(raw.as_slice()).read_to_end(&mut decoded)?;
        raw = decoded;
    }
    XesParser::new(&raw).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Trace,
    Event,
    Other,
}

struct PendingEvent {
    activity: Option<String>,
    timestamp: Option<Result<DateTime<Utc>, String>>,
}

struct XesParser<'a> {
    raw: &'a [u8],
    stack: Vec<Scope>,
    traces: Vec<Trace>,
    case_id: Option<String>,
    events: Vec<Event>,
    event: Option<PendingEvent>,
}

impl<'a> XesParser<'a> {
    fn new(raw: &'a [u8]) -> Self {
        XesParser {
            raw,
            stack: Vec::new(),
            traces: Vec::new(),
            case_id: None,
            events: Vec::new(),
            event: None,
        }
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> LogError {
        let pos = pos.min(self.raw.len());
        let before = &self.raw[..pos];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = pos - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
        LogError::Xml {
            line,
            column,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<EventLog, LogError> {
        let mut reader = Reader::from_reader(self.raw);
        let mut buf = Vec::new();
        let mut saw_root = false;
        loop {
            let pos = reader.buffer_position() as usize;
            let ev = reader
                .read_event_into(&mut buf)
                .map_err(|e| self.error_at(reader.error_position() as usize, e.to_string()))?;
            match ev {
                XmlEvent::Start(start) => {
                    saw_root = true;
                    self.open(&start, pos)?;
                }
                XmlEvent::Empty(start) => {
                    saw_root = true;
                    self.open(&start, pos)?;
                    self.close(pos)?;
                }
                XmlEvent::End(_) => self.close(pos)?,
                XmlEvent::Eof => break,
                _ => {}
            }
            buf.clear();
        }
        if !saw_root {
            return Err(self.error_at(0, "document has no root element"));
        }
        if !self.stack.is_empty() {
            return Err(self.error_at(self.raw.len(), "unexpected end of document"));
        }
        EventLog::new(self.traces)
    }

    fn open(&mut self, start: &BytesStart<'_>, pos: usize) -> Result<(), LogError> {
        let name = start.local_name();
        let name = name.as_ref();
        let scope = match name {
            b"trace" if self.stack.is_empty() || self.stack.iter().all(|s| *s == Scope::Other) => {
                self.case_id = None;
                self.events.clear();
                Scope::Trace
            }
            b"event" if self.stack.last() == Some(&Scope::Trace) => {
                self.event = Some(PendingEvent {
                    activity: None,
                    timestamp: None,
                });
                Scope::Event
            }
            _ => {
                // Attribute elements directly under a trace or event.
                if let Some(parent) = self.stack.last().copied() {
                    if parent != Scope::Other {
                        self.attribute(parent, name, start, pos)?;
                    }
                }
                Scope::Other
            }
        };
        self.stack.push(scope);
        Ok(())
    }

    fn attribute(
        &mut self,
        parent: Scope,
        tag: &[u8],
        start: &BytesStart<'_>,
        pos: usize,
    ) -> Result<(), LogError> {
        let mut key = None;
        let mut value = None;
        for attr in start.attributes() {
            let attr = attr.map_err(|e| self.error_at(pos, e.to_string()))?;
            let text = attr
                .unescape_value()
                .map_err(|e| self.error_at(pos, e.to_string()))?
                .into_owned();
            match attr.key.local_name().as_ref() {
                b"key" => key = Some(text),
                b"value" => value = Some(text),
                _ => {}
            }
        }
        let (Some(key), Some(value)) = (key, value) else {
            return Ok(());
        };
        match (parent, tag, key.as_str()) {
            (Scope::Trace, b"string", "concept:name") => self.case_id = Some(value),
            (Scope::Event, b"string", "concept:name") => {
                if let Some(ev) = self.event.as_mut() {
                    ev.activity = Some(value);
                }
            }
            (Scope::Event, b"date", "time:timestamp") => {
                if let Some(ev) = self.event.as_mut() {
                    ev.timestamp = Some(parse_timestamp(&value).ok_or(value));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self, pos: usize) -> Result<(), LogError> {
        let scope = self
            .stack
            .pop()
            .ok_or_else(|| self.error_at(pos, "unbalanced closing tag"))?;
        let trace_index = self.traces.len();
        match scope {
            Scope::Event => {
                let pending = self.event.take().expect("event scope without pending event");
                let event_index = self.events.len();
                let activity = pending.activity.ok_or(LogError::MissingActivity {
                    trace: trace_index,
                    event: event_index,
                })?;
                let timestamp = match pending.timestamp {
                    Some(Ok(ts)) => Some(ts),
                    Some(Err(value)) => {
                        return Err(LogError::XesTimestamp {
                            trace: trace_index,
                            event: event_index,
                            value,
                        })
                    }
                    None => None,
                };
                self.events.push(Event {
                    activity,
                    timestamp,
                });
            }
            Scope::Trace => {
                let mut events = std::mem::take(&mut self.events);
                sort_if_timed(&mut events);
                let case_id = self
                    .case_id
                    .take()
                    .unwrap_or_else(|| trace_index.to_string());
                self.traces
                    .push(Trace::validated(trace_index, case_id, events)?);
            }
            Scope::Other => {}
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV

/// Column names used to read and write CSV logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub case: String,
    pub activity: String,
    pub timestamp: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            case: "case:concept:name".into(),
            activity: "concept:name".into(),
            timestamp: Some("time:timestamp".into()),
        }
    }
}

/// Parses a CSV log. Rows are grouped by case id (cases ordered by first
/// appearance); within a case events keep file order unless the timestamp
/// column is mapped, in which case they are stable-sorted by timestamp.
/// Empty timestamp cells are read as absent.
pub fn parse_csv<R: Read>(input: R, mapping: &ColumnMapping) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))
    };
    let case_col = column(&mapping.case)?;
    let activity_col = column(&mapping.activity)?;
    let ts_col = mapping.timestamp.as_deref().map(column).transpose()?;

    let mut order: Vec<String> = Vec::new();
    let mut cases: HashMap<String, Vec<Event>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        // Header occupies row 1.
        let row = i + 2;
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let case = field(case_col).to_string();
        let activity = field(activity_col).trim().to_string();
        if activity.is_empty() {
            return Err(LogError::CsvRow {
                row,
                message: "empty activity".into(),
            });
        }
        let timestamp = match ts_col.map(field).map(str::trim) {
            None | Some("") => None,
            Some(raw) => Some(parse_timestamp(raw).ok_or_else(|| LogError::CsvTimestamp {
                row,
                value: raw.to_string(),
            })?),
        };
        let events = cases.entry(case.clone()).or_insert_with(|| {
            order.push(case);
            Vec::new()
        });
        events.push(Event {
            activity,
            timestamp,
        });
    }
    let traces = order
        .into_iter()
        .enumerate()
        .map(|(i, case)| {
            let mut events = cases.remove(&case).unwrap_or_default();
            if ts_col.is_some() {
                sort_if_timed(&mut events);
            }
            Trace::validated(i, case, events)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventLog::new(traces)
}

/// Writes the canonical CSV layout: one row per event, cases in log order.
pub fn write_csv<W: Write>(log: &EventLog, output: W, mapping: &ColumnMapping) -> Result<(), LogError> {
    let mut writer = csv::Writer::from_writer(output);
    let mut header = vec![mapping.case.as_str(), mapping.activity.as_str()];
    if let Some(ts) = mapping.timestamp.as_deref() {
        header.push(ts);
    }
    writer.write_record(&header)?;
    for trace in log.traces() {
        for event in trace.events() {
            let mut row = vec![trace.case_id.clone(), event.activity.clone()];
            if mapping.timestamp.is_some() {
                row.push(event.timestamp.as_ref().map(format_timestamp).unwrap_or_default());
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a log from disk, choosing the parser from the file extension
/// (`.xes`, `.xes.gz`, otherwise CSV).
pub fn read_log_file(path: &std::path::Path, mapping: &ColumnMapping) -> Result<EventLog, LogError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if name.ends_with(".xes") || name.ends_with(".xes.gz") {
        parse_xes(file)
    } else {
        parse_csv(file, mapping)
    }
}
