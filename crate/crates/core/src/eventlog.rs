//! Event logs: CSV ingestion, outcome labeling, length truncation, the
//! temporal train/thresholding/test split, and prefix extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamp format used by the canonical CSV writer.
pub const CANONICAL_TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

/// Name of the label column in canonical CSV output.
pub const CANONICAL_LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("row {line}: {message}")]
    Row { line: usize, message: String },
    #[error("labeling error for case `{case_id}`: {message}")]
    Label { case_id: String, message: String },
    #[error("split error: {0}")]
    Split(String),
    #[error("empty log")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Attribute value carried by an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Numeric(f64),
    Categorical(String),
}

impl AttrValue {
    fn render(&self) -> String {
        match self {
            AttrValue::Numeric(v) => v.to_string(),
            AttrValue::Categorical(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    pub resource: Option<String>,
    /// Missing cells are absent from the map.
    pub attrs: BTreeMap<String, AttrValue>,
}

/// A non-empty, timestamp-ordered event sequence of one case.
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

    pub fn start(&self) -> DateTime<Utc> {
        self.events[0].timestamp
    }
}

/// A prefix `hd^k` of a trace: its first `k` events.
pub type Prefix<'a> = &'a [Event];

/// Yields the prefixes of length `1..=min(|trace|, max_len)` in order.
pub fn prefixes(trace: &Trace, max_len: usize) -> impl Iterator<Item = Prefix<'_>> {
    let n = trace.events.len().min(max_len);
    (1..=n).map(move |k| &trace.events[..k])
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub traces: BTreeMap<String, Trace>,
    /// `true` marks an undesired outcome.
    pub labels: BTreeMap<String, bool>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn label(&self, case_id: &str) -> Option<bool> {
        self.labels.get(case_id).copied()
    }

    pub fn max_trace_len(&self) -> usize {
        self.traces.values().map(Trace::len).max().unwrap_or(0)
    }

    pub fn event_count(&self) -> usize {
        self.traces.values().map(Trace::len).sum()
    }

    /// Sub-log restricted to the given case ids.
    pub fn select<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> EventLog {
        let mut out = EventLog::default();
        for id in ids {
            if let Some(t) = self.traces.get(id) {
                out.traces.insert(id.clone(), t.clone());
                if let Some(l) = self.labels.get(id) {
                    out.labels.insert(id.clone(), *l);
                }
            }
        }
        out
    }
}

/// How case outcomes are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// A column that is constant within each case. Numeric values are
    /// undesired when non-zero; text values when they equal `positive`
    /// (or, without `positive`, one of `true`, `yes`, `1`).
    Column {
        column: String,
        #[serde(default)]
        positive: Option<String>,
    },
    /// The case is undesired when `activity` occurs; the trace is cut right
    /// before its first occurrence.
    Occurrence { activity: String },
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub case_id_col: String,
    pub activity_col: String,
    pub timestamp_col: String,
    pub timestamp_format: String,
    #[serde(default)]
    pub resource_col: Option<String>,
    #[serde(default)]
    pub label: Option<LabelRule>,
}

impl Schema {
    /// Schema matching [`write_canonical_csv`] output.
    pub fn canonical(labeled: bool) -> Self {
        Schema {
            case_id_col: "case_id".into(),
            activity_col: "activity".into(),
            timestamp_col: "timestamp".into(),
            timestamp_format: CANONICAL_TIMESTAMP_FORMAT.into(),
            resource_col: Some("resource".into()),
            label: labeled.then(|| LabelRule::Column { column: CANONICAL_LABEL_COLUMN.into(), positive: None }),
        }
    }
}

fn parse_timestamp(raw: &str, format: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    let parsed = if let Ok(naive) = NaiveDateTime::parse_from_str(raw, format) {
        Some(Utc.from_utc_datetime(&naive))
    } else if let Ok(dt) = DateTime::parse_from_str(raw, format) {
        Some(dt.with_timezone(&Utc))
    } else if let Ok(d) = chrono::NaiveDate::parse_from_str(raw, format) {
        d.and_hms_opt(0, 0, 0).map(|n| Utc.from_utc_datetime(&n))
    } else {
        None
    }?;
    // millisecond precision
    let ms = parsed.timestamp_millis();
    DateTime::from_timestamp_millis(ms)
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a CSV event log. Extra columns become attributes, typed numeric
/// when every non-empty value parses as a finite number. When the schema
/// carries a label rule it is applied before returning.
pub fn parse_event_log<R: Read>(source: R, schema: &Schema) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize, LogError> {
        headers.iter().position(|h| h == name).ok_or_else(|| LogError::MissingColumn(name.to_string()))
    };
    let case_idx = find(&schema.case_id_col)?;
    let act_idx = find(&schema.activity_col)?;
    let ts_idx = find(&schema.timestamp_col)?;
    let res_idx = match &schema.resource_col {
        Some(c) => Some(find(c)?),
        None => None,
    };
    if let Some(LabelRule::Column { column, .. }) = &schema.label {
        find(column)?;
    }
    let reserved: BTreeSet<usize> =
        [Some(case_idx), Some(act_idx), Some(ts_idx), res_idx].into_iter().flatten().collect();
    let attr_cols: Vec<(usize, String)> =
        headers.iter().enumerate().filter(|(i, _)| !reserved.contains(i)).map(|(i, h)| (i, h.to_string())).collect();

    struct Row {
        case_id: String,
        activity: String,
        timestamp: DateTime<Utc>,
        resource: Option<String>,
        raw_attrs: Vec<String>,
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        let case_id = get(case_idx).to_string();
        if case_id.is_empty() {
            return Err(LogError::Row { line, message: "empty case id".into() });
        }
        let activity = get(act_idx).to_string();
        if activity.is_empty() {
            return Err(LogError::Row { line, message: "empty activity".into() });
        }
        let raw_ts = get(ts_idx);
        let timestamp = parse_timestamp(raw_ts, &schema.timestamp_format).ok_or_else(|| LogError::Row {
            line,
            message: format!("unparseable timestamp `{raw_ts}` for format `{}`", schema.timestamp_format),
        })?;
        let resource = res_idx.map(get).filter(|s| !s.is_empty()).map(str::to_string);
        let raw_attrs = attr_cols.iter().map(|(idx, _)| get(*idx).to_string()).collect();
        rows.push(Row { case_id, activity, timestamp, resource, raw_attrs });
    }

    let numeric: Vec<bool> = (0..attr_cols.len())
        .map(|c| {
            rows.iter().map(|r| r.raw_attrs[c].as_str()).filter(|v| !v.is_empty()).all(|v| parse_number(v).is_some())
        })
        .collect();

    let mut log = EventLog::default();
    for row in rows {
        let mut attrs = BTreeMap::new();
        for (c, raw) in row.raw_attrs.into_iter().enumerate() {
            if raw.is_empty() {
                continue;
            }
            let value = if numeric[c] {
                AttrValue::Numeric(parse_number(&raw).expect("checked numeric"))
            } else {
                AttrValue::Categorical(raw)
            };
            attrs.insert(attr_cols[c].1.clone(), value);
        }
        let event = Event {
            case_id: row.case_id.clone(),
            activity: row.activity,
            timestamp: row.timestamp,
            resource: row.resource,
            attrs,
        };
        log.traces
            .entry(row.case_id.clone())
            .or_insert_with(|| Trace { case_id: row.case_id, events: Vec::new() })
            .events
            .push(event);
    }
    for trace in log.traces.values_mut() {
        // stable: ties keep file order
        trace.events.sort_by_key(|e| e.timestamp);
    }

    match &schema.label {
        Some(rule) => label_outcomes(log, rule),
        None => Ok(log),
    }
}

fn truthy(value: &AttrValue, positive: Option<&str>) -> bool {
    match (value, positive) {
        (AttrValue::Categorical(s), Some(p)) => s == p,
        (AttrValue::Numeric(v), Some(p)) => parse_number(p) == Some(*v),
        (AttrValue::Numeric(v), None) => *v != 0.0,
        (AttrValue::Categorical(s), None) => {
            matches!(s.to_ascii_lowercase().as_str(), "true" | "yes" | "1")
        }
    }
}

/// Labels every trace. Cases whose trace becomes empty after cutting
/// (the target activity is the first event) are dropped.
pub fn label_outcomes(mut log: EventLog, rule: &LabelRule) -> Result<EventLog, LogError> {
    log.labels.clear();
    match rule {
        LabelRule::Column { column, positive } => {
            for (case_id, trace) in log.traces.iter_mut() {
                let mut label: Option<bool> = None;
                for event in trace.events.iter_mut() {
                    if let Some(v) = event.attrs.remove(column) {
                        let this = truthy(&v, positive.as_deref());
                        if label.is_some_and(|l| l != this) {
                            return Err(LogError::Label {
                                case_id: case_id.clone(),
                                message: format!("column `{column}` is not constant within the case"),
                            });
                        }
                        label = Some(this);
                    }
                }
                let label = label.ok_or_else(|| LogError::Label {
                    case_id: case_id.clone(),
                    message: format!("column `{column}` has no value in this case"),
                })?;
                log.labels.insert(case_id.clone(), label);
            }
        }
        LabelRule::Occurrence { activity } => {
            let mut emptied = Vec::new();
            for (case_id, trace) in log.traces.iter_mut() {
                match trace.events.iter().position(|e| &e.activity == activity) {
                    Some(pos) => {
                        trace.events.truncate(pos);
                        if trace.events.is_empty() {
                            emptied.push(case_id.clone());
                        } else {
                            log.labels.insert(case_id.clone(), true);
                        }
                    }
                    None => {
                        log.labels.insert(case_id.clone(), false);
                    }
                }
            }
            for id in emptied {
                log.traces.remove(&id);
            }
        }
    }
    Ok(log)
}

/// Nearest-rank length cut: the smallest length `M` such that at least a
/// `percentile` fraction of the lengths are `<= M`.
pub fn truncation_length(lengths: &[usize], percentile: f64) -> Result<usize, LogError> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(LogError::InvalidArgument(format!("percentile must be in (0, 1], got {percentile}")));
    }
    if lengths.is_empty() {
        return Err(LogError::Empty);
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let needed = required_count(sorted.len(), percentile);
    Ok(sorted[needed - 1])
}

/// `ceil(p * n)` with a small tolerance against representation error, at least 1.
pub(crate) fn required_count(n: usize, p: f64) -> usize {
    let raw = p * n as f64;
    let c = (raw - 1e-9).ceil().max(1.0) as usize;
    c.min(n)
}

/// Truncates every trace to the nearest-rank `percentile` of case lengths.
pub fn truncate_log(mut log: EventLog, percentile: f64) -> Result<(EventLog, usize), LogError> {
    let lengths: Vec<usize> = log.traces.values().map(Trace::len).collect();
    let max_len = truncation_length(&lengths, percentile)?;
    for trace in log.traces.values_mut() {
        trace.events.truncate(max_len);
    }
    Ok((log, max_len))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: EventLog,
    pub thres: EventLog,
    pub test: EventLog,
}

/// Bookkeeping of a [`temporal_split`] run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub n_cases: usize,
    /// Partition sizes before the overlap discard.
    pub n_train: usize,
    pub n_thres: usize,
    pub n_test: usize,
    /// Events at or after this instant were dropped from train/thres.
    pub cut: String,
    pub dropped_events: usize,
    pub dropped_cases: usize,
    /// Partition sizes after the overlap discard.
    pub final_train: usize,
    pub final_thres: usize,
    pub final_test: usize,
}

/// Partition sizes `(train, thres, test)` for `n` cases.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let pool = n * 4 / 5;
    let train = pool * 4 / 5;
    (train, pool - train, n - pool)
}

/// Temporal split: cases ordered by start time; a seeded shuffle of the
/// earliest 80% assigns 80% of them to training and 20% to thresholding;
/// the latest 20% form the test set. Train/thres events at or after the
/// earliest test-case start are discarded.
pub fn temporal_split(log: &EventLog, seed: u64) -> Result<(DatasetSplit, SplitManifest), LogError> {
    let n = log.len();
    if n < 5 {
        return Err(LogError::Split(format!("need at least 5 cases, got {n}")));
    }
    let mut ordered: Vec<&Trace> = log.traces.values().collect();
    ordered.sort_by(|a, b| a.start().cmp(&b.start()).then_with(|| a.case_id.cmp(&b.case_id)));
    let (n_train, n_thres, n_test) = split_sizes(n);
    let pool_len = n_train + n_thres;
    let mut pool: Vec<String> = ordered[..pool_len].iter().map(|t| t.case_id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let test_ids: Vec<String> = ordered[pool_len..].iter().map(|t| t.case_id.clone()).collect();
    let cut = ordered[pool_len..].iter().map(|t| t.start()).min().expect("test partition non-empty");

    let mut dropped_events = 0;
    let mut dropped_cases = 0;
    let mut discard = |part: EventLog| -> EventLog {
        let mut out = EventLog::default();
        for (id, mut trace) in part.traces {
            let before = trace.len();
            trace.events.retain(|e| e.timestamp < cut);
            dropped_events += before - trace.len();
            if trace.is_empty() {
                dropped_cases += 1;
                continue;
            }
            if let Some(l) = part.labels.get(&id) {
                out.labels.insert(id.clone(), *l);
            }
            out.traces.insert(id, trace);
        }
        out
    };
    let train = discard(log.select(&pool[..n_train]));
    let thres = discard(log.select(&pool[n_train..]));
    let test = log.select(&test_ids);
    for (name, part) in [("train", &train), ("thres", &thres), ("test", &test)] {
        if part.is_empty() {
            return Err(LogError::Split(format!("{name} partition is empty after discarding overlap")));
        }
    }
    let manifest = SplitManifest {
        seed,
        n_cases: n,
        n_train,
        n_thres,
        n_test,
        cut: cut.format(CANONICAL_TIMESTAMP_FORMAT).to_string(),
        dropped_events,
        dropped_cases,
        final_train: train.len(),
        final_thres: thres.len(),
        final_test: test.len(),
    };
    Ok((DatasetSplit { train, thres, test }, manifest))
}

/// Writes the canonical CSV form: `case_id, activity, timestamp, resource`,
/// then `label` when the log is labeled, then attributes in lexicographic
/// order. Rows are grouped by case id, events in trace order.
pub fn write_canonical_csv<W: Write>(log: &EventLog, sink: W) -> Result<(), LogError> {
    let labeled = !log.labels.is_empty();
    let attr_names: BTreeSet<&String> =
        log.traces.values().flat_map(|t| t.events.iter()).flat_map(|e| e.attrs.keys()).collect();
    let fixed = ["case_id", "activity", "timestamp", "resource"];
    for name in &attr_names {
        if fixed.contains(&name.as_str()) || (labeled && name.as_str() == CANONICAL_LABEL_COLUMN) {
            return Err(LogError::InvalidArgument(format!("attribute `{name}` collides with a canonical column")));
        }
    }
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = fixed.to_vec();
    if labeled {
        header.push(CANONICAL_LABEL_COLUMN);
    }
    header.extend(attr_names.iter().map(|s| s.as_str()));
    writer.write_record(&header)?;
    for (case_id, trace) in &log.traces {
        let label = log.labels.get(case_id);
        if labeled && label.is_none() {
            return Err(LogError::Label { case_id: case_id.clone(), message: "partially labeled log".into() });
        }
        for e in &trace.events {
            let mut rec = vec![
                e.case_id.clone(),
                e.activity.clone(),
                e.timestamp.format(CANONICAL_TIMESTAMP_FORMAT).to_string(),
                e.resource.clone().unwrap_or_default(),
            ];
            if let Some(l) = label {
                rec.push(if *l { "1" } else { "0" }.to_string());
            }
            for name in &attr_names {
                rec.push(e.attrs.get(*name).map(AttrValue::render).unwrap_or_default());
            }
            writer.write_record(&rec)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a log previously written by [`write_canonical_csv`].
pub fn read_canonical_csv<R: Read>(source: R) -> Result<EventLog, LogError> {
    let mut buf = Vec::new();
    let mut source = source;
    source.read_to_end(&mut buf)?;
    let labeled = {
        let mut r = csv::Reader::from_reader(buf.as_slice());
        r.headers()?.iter().any(|h| h == CANONICAL_LABEL_COLUMN)
    };
    parse_event_log(buf.as_slice(), &Schema::canonical(labeled))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema {
            case_id_col: "case".into(),
            activity_col: "act".into(),
            timestamp_col: "time".into(),
            timestamp_format: "%Y-%m-%d %H:%M:%S".into(),
            resource_col: None,
            label: None,
        }
    }

    fn event(case: &str, act: &str, secs: i64) -> Event {
        Event {
            case_id: case.into(),
            activity: act.into(),
            timestamp: DateTime::from_timestamp(secs, 0).unwrap(),
            resource: None,
            attrs: BTreeMap::new(),
        }
    }

    fn log_of(traces: Vec<(&str, Vec<Event>)>) -> EventLog {
        let mut log = EventLog::default();
        for (id, events) in traces {
            log.traces.insert(id.into(), Trace { case_id: id.into(), events });
        }
        log
    }

    #[test]
    fn two_rows_one_case() {
        let csv = "case,act,time\nc1,A,2020-01-01 10:00:00\nc1,B,2020-01-01 11:00:00\n";
        let log = parse_event_log(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.traces["c1"].len(), 2);
    }

    #[test]
    fn out_of_order_rows_are_sorted_stably() {
        let csv = "case,act,time\n\
                   c1,C,2020-01-01 12:00:00\n\
                   c1,A,2020-01-01 10:00:00\n\
                   c1,B1,2020-01-01 11:00:00\n\
                   c1,B2,2020-01-01 11:00:00\n";
        let log = parse_event_log(csv.as_bytes(), &schema()).unwrap();
        let acts: Vec<_> = log.traces["c1"].events.iter().map(|e| e.activity.as_str()).collect();
        assert_eq!(acts, ["A", "B1", "B2", "C"]);
    }

    #[test]
    fn numeric_and_categorical_typing() {
        let csv = "case,act,time,amount,kind\n\
                   c1,A,2020-01-01 10:00:00,12.5,x\n\
                   c1,B,2020-01-01 11:00:00,12.5,3\n";
        let log = parse_event_log(csv.as_bytes(), &schema()).unwrap();
        let e = &log.traces["c1"].events[0];
        assert_eq!(e.attrs["amount"], AttrValue::Numeric(12.5));
        assert_eq!(e.attrs["kind"], AttrValue::Categorical("x".into()));
        assert_eq!(log.traces["c1"].events[1].attrs["kind"], AttrValue::Categorical("3".into()));
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "case,activity,time\nc1,A,2020-01-01 10:00:00\n";
        match parse_event_log(csv.as_bytes(), &schema()) {
            Err(LogError::MissingColumn(c)) => assert_eq!(c, "act"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_reports_line() {
        let csv = "case,act,time\nc1,A,2020-01-01 10:00:00\nc1,B,yesterday\n";
        match parse_event_log(csv.as_bytes(), &schema()) {
            Err(LogError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn occurrence_rule_cuts_trace() {
        let log = log_of(vec![
            (
                "c1",
                vec![
                    event("c1", "a", 1),
                    event("c1", "b", 2),
                    event("c1", "c", 3),
                    event("c1", "credit collection", 4),
                    event("c1", "d", 5),
                ],
            ),
            ("c2", vec![event("c2", "a", 1), event("c2", "b", 2)]),
        ]);
        let rule = LabelRule::Occurrence { activity: "credit collection".into() };
        let log = label_outcomes(log, &rule).unwrap();
        assert!(log.labels["c1"]);
        assert_eq!(log.traces["c1"].len(), 3);
        assert!(!log.labels["c2"]);
        assert_eq!(log.traces["c2"].len(), 2);
    }

    #[test]
    fn occurrence_at_first_event_drops_case() {
        let log = log_of(vec![("c1", vec![event("c1", "x", 1), event("c1", "a", 2)])]);
        let log = label_outcomes(log, &LabelRule::Occurrence { activity: "x".into() }).unwrap();
        assert!(log.is_empty());
        assert!(log.labels.is_empty());
    }

    #[test]
    fn column_rule_labels_and_strips_column() {
        let csv = "case,act,time,deviant\n\
                   c1,A,2020-01-01 10:00:00,1\n\
                   c1,B,2020-01-01 11:00:00,1\n\
                   c2,A,2020-01-01 10:00:00,0\n";
        let mut s = schema();
        s.label = Some(LabelRule::Column { column: "deviant".into(), positive: None });
        let log = parse_event_log(csv.as_bytes(), &s).unwrap();
        assert!(log.labels["c1"]);
        assert!(!log.labels["c2"]);
        assert!(log.traces["c1"].events[0].attrs.is_empty());
    }

    #[test]
    fn inconsistent_label_column_is_an_error() {
        let csv = "case,act,time,deviant\n\
                   c1,A,2020-01-01 10:00:00,1\n\
                   c1,B,2020-01-01 11:00:00,0\n";
        let mut s = schema();
        s.label = Some(LabelRule::Column { column: "deviant".into(), positive: None });
        assert!(matches!(parse_event_log(csv.as_bytes(), &s), Err(LogError::Label { .. })));
    }

    #[test]
    fn truncation_percentile() {
        let lengths: Vec<usize> = (1..=10).collect();
        // brute force: smallest l with #(len <= l) / 10 >= 0.9
        let brute = (1..=10).find(|l| lengths.iter().filter(|x| *x <= l).count() * 10 >= 9 * 10).unwrap();
        assert_eq!(brute, 9);
        assert_eq!(truncation_length(&lengths, 0.9).unwrap(), 9);
        assert_eq!(truncation_length(&lengths, 1.0).unwrap(), 10);
        assert_eq!(truncation_length(&[4, 4, 4], 0.5).unwrap(), 4);
        assert!(truncation_length(&[], 0.9).is_err());
        assert!(truncation_length(&[1], 0.0).is_err());
    }

    #[test]
    fn truncate_log_cuts_longest() {
        let traces = (1..=10)
            .map(|len| {
                let id = format!("c{len:02}");
                let events: Vec<_> = (0..len).map(|i| event(&id, "a", i as i64)).collect();
                (id, events)
            })
            .collect::<Vec<_>>();
        let log = log_of(traces.iter().map(|(id, ev)| (id.as_str(), ev.clone())).collect());
        let (cut, m) = truncate_log(log.clone(), 0.9).unwrap();
        assert_eq!(m, 9);
        assert_eq!(cut.traces["c10"].len(), 9);
        assert_eq!(cut.traces["c09"].len(), 9);
        let (same, _) = truncate_log(log.clone(), 1.0).unwrap();
        assert_eq!(same, log);
        assert!(matches!(truncate_log(EventLog::default(), 0.9), Err(LogError::Empty)));
    }

    fn staggered_log(n: usize) -> EventLog {
        let mut log = EventLog::default();
        for i in 0..n {
            let id = format!("c{i:03}");
            let start = (i as i64) * 100;
            let events = vec![event(&id, "a", start), event(&id, "b", start + 10)];
            log.traces.insert(id.clone(), Trace { case_id: id.clone(), events });
            log.labels.insert(id, i % 2 == 0);
        }
        log
    }

    #[test]
    fn split_sizes_hundred() {
        assert_eq!(split_sizes(100), (64, 16, 20));
        let (split, manifest) = temporal_split(&staggered_log(100), 7).unwrap();
        assert_eq!((manifest.n_train, manifest.n_thres, manifest.n_test), (64, 16, 20));
        assert_eq!(split.test.len(), 20);
        let (again, _) = temporal_split(&staggered_log(100), 7).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn split_drops_events_at_cut_instant() {
        // five cases; four pool cases start at 0, the test case too
        let mut log = EventLog::default();
        for i in 0..5 {
            let id = format!("c{i}");
            let events = vec![event(&id, "a", 0), event(&id, "b", 5)];
            log.traces.insert(id.clone(), Trace { case_id: id.clone(), events });
            log.labels.insert(id, false);
        }
        // pool events at the boundary instant 0 are dropped, so every pool case vanishes
        assert!(matches!(temporal_split(&log, 1), Err(LogError::Split(_))));

        // now the test case starts at 5: events at 5 are dropped, those at 0 kept
        let mut log2 = log.clone();
        let t = log2.traces.get_mut("c4").unwrap();
        t.events = vec![event("c4", "a", 5), event("c4", "b", 6)];
        let (split, manifest) = temporal_split(&log2, 1).unwrap();
        assert_eq!(manifest.dropped_events, 4);
        for part in [&split.train, &split.thres] {
            for t in part.traces.values() {
                assert_eq!(t.len(), 1);
            }
        }
        assert_eq!(split.test.traces["c4"].len(), 2);
    }

    #[test]
    fn split_needs_five_cases() {
        assert!(temporal_split(&staggered_log(4), 0).is_err());
    }

    #[test]
    fn prefix_lengths() {
        let t = Trace { case_id: "c".into(), events: vec![event("c", "a", 1), event("c", "b", 2), event("c", "c", 3)] };
        assert_eq!(prefixes(&t, 5).map(|p| p.len()).collect::<Vec<_>>(), [1, 2, 3]);
        assert_eq!(prefixes(&t, 2).map(|p| p.len()).collect::<Vec<_>>(), [1, 2]);
        let single = Trace { case_id: "c".into(), events: vec![event("c", "a", 1)] };
        let ps: Vec<_> = prefixes(&single, 3).collect();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0], single.events.as_slice());
    }

    #[test]
    fn canonical_roundtrip_with_labels() {
        let csv = "case,act,time,amount,kind,res\n\
                   c1,A,2020-01-01 10:00:00,12.5,x,r1\n\
                   c1,B,2020-01-01 11:00:00,,y,\n\
                   c2,A,2020-01-02 10:00:00,3,,r2\n";
        let mut s = schema();
        s.resource_col = Some("res".into());
        let mut log = parse_event_log(csv.as_bytes(), &s).unwrap();
        log.labels.insert("c1".into(), true);
        log.labels.insert("c2".into(), false);
        let mut out = Vec::new();
        write_canonical_csv(&log, &mut out).unwrap();
        let back = read_canonical_csv(out.as_slice()).unwrap();
        assert_eq!(back, log);
    }
}
