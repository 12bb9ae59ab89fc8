//! Aggregation encoding of trace prefixes into fixed-length feature vectors.
//!
//! Layout of an encoded vector, in order:
//!
//! 1. one occurrence-count column per categorical value (activity, resource,
//!    and every categorical attribute), each vocabulary ending in `other`;
//! 2. `min`, `max`, `mean`, `sum` for every numeric attribute, after
//!    carrying the most recent preceding value forward (zero before the
//!    first observation);
//! 3. event number, hour, weekday (0 = Monday), month (1..=12), seconds
//!    since case start and seconds since the previous event, all taken
//!    from the last event of the prefix (UTC).

use std::collections::BTreeMap;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::eventlog::{AttrValue, Event, EventLog};

/// Reserved vocabulary entry collecting infrequent and unseen values.
pub const OTHER: &str = "other";

/// Values seen fewer times than this in the training log collapse to `other`.
pub const DEFAULT_MIN_FREQUENCY: usize = 10;

/// Pseudo-attribute names for the event's built-in fields.
pub const ACTIVITY_ATTR: &str = "activity";
pub const RESOURCE_ATTR: &str = "resource";

const TEMPORAL_COLUMNS: [&str; 6] = ["event_nr", "hour", "weekday", "month", "time_since_start", "time_since_last"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalVocab {
    pub attribute: String,
    /// Frequent values in column order; `other` is always last.
    pub values: Vec<String>,
}

impl CategoricalVocab {
    fn slot(&self, value: &str) -> usize {
        let frequent = &self.values[..self.values.len() - 1];
        frequent.binary_search_by(|v| v.as_str().cmp(value)).unwrap_or(self.values.len() - 1)
    }
}

/// Fitted encoder: vocabularies, numeric attributes and the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub categorical: Vec<CategoricalVocab>,
    pub numeric: Vec<String>,
    pub columns: Vec<String>,
    /// Event-level occurrence counts seen while fitting.
    pub frequencies: BTreeMap<String, BTreeMap<String, usize>>,
    pub min_frequency: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn categorical_values(event: &Event) -> impl Iterator<Item = (&str, &str)> {
    let builtin = std::iter::once((ACTIVITY_ATTR, event.activity.as_str()))
        .chain(event.resource.as_deref().map(|r| (RESOURCE_ATTR, r)));
    let attrs = event.attrs.iter().filter_map(|(k, v)| match v {
        AttrValue::Categorical(s) => Some((k.as_str(), s.as_str())),
        AttrValue::Numeric(_) => None,
    });
    builtin.chain(attrs)
}

/// Fits an encoder with the default infrequency cut-off.
pub fn fit_encoder(train: &EventLog) -> EncoderState {
    fit_encoder_with(train, DEFAULT_MIN_FREQUENCY)
}

/// Fits an encoder; categorical values occurring fewer than `min_frequency`
/// times (counted per event) are mapped to `other`.
pub fn fit_encoder_with(train: &EventLog, min_frequency: usize) -> EncoderState {
    let mut frequencies: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    frequencies.entry(ACTIVITY_ATTR.to_string()).or_default();
    // attribute -> seen any numeric / any categorical
    let mut kinds: BTreeMap<String, (bool, bool)> = BTreeMap::new();
    for event in train.traces.values().flat_map(|t| t.events.iter()) {
        for (attr, value) in categorical_values(event) {
            *frequencies.entry(attr.to_string()).or_default().entry(value.to_string()).or_default() += 1;
        }
        for (k, v) in &event.attrs {
            let entry = kinds.entry(k.clone()).or_default();
            match v {
                AttrValue::Numeric(_) => entry.0 = true,
                AttrValue::Categorical(_) => entry.1 = true,
            }
        }
    }
    // an attribute seen with both kinds is treated as categorical
    for (attr, (num, cat)) in &kinds {
        if *num && *cat {
            let counts = frequencies.entry(attr.clone()).or_default();
            for event in train.traces.values().flat_map(|t| t.events.iter()) {
                if let Some(AttrValue::Numeric(v)) = event.attrs.get(attr) {
                    *counts.entry(v.to_string()).or_default() += 1;
                }
            }
        }
    }
    let numeric: Vec<String> = kinds.iter().filter(|(_, (num, cat))| *num && !*cat).map(|(k, _)| k.clone()).collect();

    let categorical: Vec<CategoricalVocab> = frequencies
        .iter()
        .map(|(attr, counts)| {
            let mut values: Vec<String> = counts
                .iter()
                .filter(|(v, c)| **c >= min_frequency && v.as_str() != OTHER)
                .map(|(v, _)| v.clone())
                .collect();
            values.push(OTHER.to_string());
            CategoricalVocab { attribute: attr.clone(), values }
        })
        .collect();

    let mut columns = Vec::new();
    for vocab in &categorical {
        for v in &vocab.values {
            columns.push(format!("{}={}", vocab.attribute, v));
        }
    }
    for attr in &numeric {
        for stat in ["min", "max", "mean", "sum"] {
            columns.push(format!("{attr}_{stat}"));
        }
    }
    columns.extend(TEMPORAL_COLUMNS.iter().map(|c| c.to_string()));

    EncoderState { categorical, numeric, columns, frequencies, min_frequency }
}

impl EncoderState {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Encodes a prefix. An empty prefix yields the all-zero vector.
    pub fn encode(&self, prefix: &[Event]) -> FeatureVector {
        let mut out = vec![0.0; self.dim()];
        let mut offset = 0;
        for vocab in &self.categorical {
            for event in prefix {
                let value = if vocab.attribute == ACTIVITY_ATTR {
                    Some(event.activity.clone())
                } else if vocab.attribute == RESOURCE_ATTR {
                    event.resource.clone()
                } else {
                    event.attrs.get(&vocab.attribute).map(|v| match v {
                        AttrValue::Categorical(s) => s.clone(),
                        AttrValue::Numeric(x) => x.to_string(),
                    })
                };
                if let Some(value) = value {
                    out[offset + vocab.slot(&value)] += 1.0;
                }
            }
            offset += vocab.values.len();
        }

        for attr in &self.numeric {
            let mut last = 0.0;
            let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for event in prefix {
                if let Some(AttrValue::Numeric(v)) = event.attrs.get(attr) {
                    last = *v;
                }
                min = min.min(last);
                max = max.max(last);
                sum += last;
            }
            if !prefix.is_empty() {
                out[offset] = min;
                out[offset + 1] = max;
                out[offset + 2] = sum / prefix.len() as f64;
                out[offset + 3] = sum;
            }
            offset += 4;
        }

        if let (Some(first), Some(last)) = (prefix.first(), prefix.last()) {
            let ts = last.timestamp;
            let prev = if prefix.len() > 1 { prefix[prefix.len() - 2].timestamp } else { ts };
            out[offset] = prefix.len() as f64;
            out[offset + 1] = ts.hour() as f64;
            out[offset + 2] = ts.weekday().num_days_from_monday() as f64;
            out[offset + 3] = ts.month() as f64;
            out[offset + 4] = (ts - first.timestamp).num_milliseconds() as f64 / 1000.0;
            out[offset + 5] = (ts - prev).num_milliseconds() as f64 / 1000.0;
        }
        FeatureVector(out)
    }
}

/// Free-function form of [`EncoderState::encode`].
pub fn encode_prefix(prefix: &[Event], state: &EncoderState) -> FeatureVector {
    state.encode(prefix)
}
