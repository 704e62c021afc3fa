//! Invocation datasets: types, windowing and splitting.
//!
//! A dataset is a fixed window of one-minute slots. Every function carries one
//! count per slot; the absolute index of the first slot is kept so that a
//! simulation window can continue the clock of its training window.

mod azure;
mod synthetic;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use azure::{load_azure_csv, write_trace_csv, write_trace_days};
pub use synthetic::{generate_synthetic, Generator, IntDist, SyntheticGroup, SyntheticSpec};

pub const MINUTES_PER_DAY: usize = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerType {
    Http,
    Timer,
    Queue,
    Storage,
    Event,
    Orchestration,
    Others,
}

impl TriggerType {
    pub const ALL: [TriggerType; 7] = [
        TriggerType::Http,
        TriggerType::Timer,
        TriggerType::Queue,
        TriggerType::Storage,
        TriggerType::Event,
        TriggerType::Orchestration,
        TriggerType::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TriggerType::Http => "http",
            TriggerType::Timer => "timer",
            TriggerType::Queue => "queue",
            TriggerType::Storage => "storage",
            TriggerType::Event => "event",
            TriggerType::Orchestration => "orchestration",
            TriggerType::Others => "others",
        }
    }

    /// Unknown labels map to `Others`; parsing never fails.
    pub fn from_label(label: &str) -> Self {
        let label = label.trim();
        TriggerType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(label))
            .unwrap_or(TriggerType::Others)
    }
}

impl fmt::Display for TriggerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TriggerType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(TriggerType::from_label(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionMeta {
    pub owner_id: String,
    pub app_id: String,
    pub function_id: String,
    pub trigger: TriggerType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationSeries {
    pub function_id: String,
    pub counts: Vec<u32>,
    /// Absolute slot index of `counts[0]`.
    pub origin_minute: u64,
}

impl InvocationSeries {
    pub fn new(function_id: impl Into<String>, counts: Vec<u32>, origin_minute: u64) -> Self {
        Self {
            function_id: function_id.into(),
            counts,
            origin_minute,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn invoked_slots(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Sub-series over `range` (offsets relative to `counts`).
    pub fn slice(&self, range: Range<usize>) -> InvocationSeries {
        InvocationSeries {
            function_id: self.function_id.clone(),
            origin_minute: self.origin_minute + range.start as u64,
            counts: self.counts[range].to_vec(),
        }
    }
}

/// An immutable set of functions observed over one slot-aligned window.
///
/// Functions are stored sorted by `function_id`, which fixes iteration order
/// everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceDataset {
    origin_minute: u64,
    window: usize,
    metas: Vec<FunctionMeta>,
    series: Vec<InvocationSeries>,
    index: HashMap<String, usize>,
}

impl TraceDataset {
    /// Build a dataset from `(meta, counts)` pairs covering `window` slots.
    pub fn new(
        window: usize,
        origin_minute: u64,
        entries: impl IntoIterator<Item = (FunctionMeta, Vec<u32>)>,
    ) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.function_id.cmp(&b.0.function_id));
        let mut metas = Vec::with_capacity(entries.len());
        let mut series = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (meta, counts) in entries {
            if counts.len() != window {
                return Err(Error::InvalidDataset(format!(
                    "function {} has {} slots, window is {window}",
                    meta.function_id,
                    counts.len()
                )));
            }
            if index
                .insert(meta.function_id.clone(), metas.len())
                .is_some()
            {
                return Err(Error::InvalidDataset(format!(
                    "duplicate function id {}",
                    meta.function_id
                )));
            }
            series.push(InvocationSeries::new(
                meta.function_id.clone(),
                counts,
                origin_minute,
            ));
            metas.push(meta);
        }
        Ok(Self {
            origin_minute,
            window,
            metas,
            series,
            index,
        })
    }

    pub fn empty(window: usize, origin_minute: u64) -> Self {
        Self {
            origin_minute,
            window,
            metas: vec![],
            series: vec![],
            index: HashMap::new(),
        }
    }

    pub fn origin_minute(&self) -> u64 {
        self.origin_minute
    }

    /// Window length in slots.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Absolute slot range covered by the window.
    pub fn slot_range(&self) -> Range<u64> {
        self.origin_minute..self.origin_minute + self.window as u64
    }

    /// Whole days in the window.
    pub fn days(&self) -> usize {
        self.window / MINUTES_PER_DAY
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn metas(&self) -> &[FunctionMeta] {
        &self.metas
    }

    pub fn series(&self) -> &[InvocationSeries] {
        &self.series
    }

    pub fn position(&self, function_id: &str) -> Option<usize> {
        self.index.get(function_id).copied()
    }

    pub fn meta(&self, function_id: &str) -> Option<&FunctionMeta> {
        self.position(function_id).map(|i| &self.metas[i])
    }

    pub fn get(&self, function_id: &str) -> Option<&InvocationSeries> {
        self.position(function_id).map(|i| &self.series[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FunctionMeta, &InvocationSeries)> {
        self.metas.iter().zip(&self.series)
    }

    /// The same functions restricted to slot offsets `range`.
    pub fn window_slice(&self, range: Range<usize>) -> Result<TraceDataset> {
        if range.start > range.end || range.end > self.window {
            return Err(Error::InvalidSplit(format!(
                "slot range {range:?} outside window of {} slots",
                self.window
            )));
        }
        let origin = self.origin_minute + range.start as u64;
        let series = self.series.iter().map(|s| s.slice(range.clone())).collect();
        Ok(TraceDataset {
            origin_minute: origin,
            window: range.len(),
            metas: self.metas.clone(),
            series,
            index: self.index.clone(),
        })
    }

    /// A dataset holding only the listed functions (unknown ids are skipped).
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> TraceDataset {
        let entries = ids.into_iter().filter_map(|id| {
            let i = self.position(id)?;
            Some((self.metas[i].clone(), self.series[i].counts.clone()))
        });
        let mut entries: Vec<_> = entries.collect();
        entries.dedup_by(|a, b| a.0.function_id == b.0.function_id);
        TraceDataset::new(self.window, self.origin_minute, entries)
            .expect("subset of a valid dataset is valid")
    }
}

/// Split into a training window of `train_days` followed by a simulation window
/// of `sim_days`.
pub fn split_dataset(
    ds: &TraceDataset,
    train_days: usize,
    sim_days: usize,
) -> Result<(TraceDataset, TraceDataset)> {
    if train_days == 0 {
        return Err(Error::InvalidSplit(
            "training window must cover at least one day".into(),
        ));
    }
    if train_days + sim_days > ds.days() {
        return Err(Error::InvalidSplit(format!(
            "{train_days} training + {sim_days} simulation days exceed the {}-day dataset",
            ds.days()
        )));
    }
    let train_end = train_days * MINUTES_PER_DAY;
    let sim_end = train_end + sim_days * MINUTES_PER_DAY;
    Ok((
        ds.window_slice(0..train_end)?,
        ds.window_slice(train_end..sim_end)?,
    ))
}
