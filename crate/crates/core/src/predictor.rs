//! Per-function runtime state: predicted invocation times, the pre-load test
//! and online adjustment of predictive values.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    classify_wt_sequence, CategorizedFunction, FunctionCategory, PredictiveValues, WtStats,
};
use crate::config::{GivenupTable, SpesConfig};
use crate::correlation::CorrelationLink;
use crate::error::{Error, Result};
use crate::timing::{median_of_sorted, round_half_up, top_modes_from_counts};

/// Waiting times observed during simulation, with a sorted copy and value
/// counts kept up to date on every push.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<u32>", into = "Vec<u32>")]
pub struct OnlineWtLog {
    values: Vec<u32>,
    sorted: Vec<u32>,
    counts: BTreeMap<u32, usize>,
}

impl From<Vec<u32>> for OnlineWtLog {
    fn from(values: Vec<u32>) -> Self {
        let mut log = OnlineWtLog::default();
        for v in values {
            log.push(v);
        }
        log
    }
}

impl From<OnlineWtLog> for Vec<u32> {
    fn from(log: OnlineWtLog) -> Self {
        log.values
    }
}

impl OnlineWtLog {
    pub fn push(&mut self, v: u32) {
        self.values.push(v);
        let i = self.sorted.partition_point(|&x| x <= v);
        self.sorted.insert(i, v);
        *self.counts.entry(v).or_default() += 1;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// In arrival order.
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn median(&self) -> Option<f64> {
        (!self.sorted.is_empty()).then(|| median_of_sorted(&self.sorted))
    }

    pub fn top_modes(&self, n: usize) -> Vec<(u32, usize)> {
        top_modes_from_counts(self.counts.iter().map(|(&v, &c)| (v, c)), n)
    }

    /// Values seen more than once, ascending.
    pub fn repeated(&self) -> Vec<u32> {
        self.counts
            .iter()
            .filter(|&(_, &c)| c > 1)
            .map(|(&v, _)| v)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionProfile {
    pub function_id: String,
    pub category: FunctionCategory,
    pub predictive: PredictiveValues,
    pub last_invoked: Option<u64>,
    /// Idle slots since the last invocation.
    pub current_wt: u32,
    pub online_wts: OnlineWtLog,
    pub offline: WtStats,
    pub theta_givenup: u32,
    pub links: Vec<CorrelationLink>,
    pub invocations: u64,
    pub cold_starts: u64,
    /// Created at its first invocation during simulation.
    pub unseen: bool,
    /// Set once an Unknown profile has been re-categorized from online WTs.
    pub recategorized: bool,
}

impl FunctionProfile {
    pub fn from_categorized(cf: &CategorizedFunction, givenup: &GivenupTable) -> Self {
        FunctionProfile {
            function_id: cf.function_id.clone(),
            category: cf.category,
            predictive: cf.predictive.clone(),
            last_invoked: None,
            current_wt: 0,
            online_wts: OnlineWtLog::default(),
            offline: cf.offline.clone(),
            theta_givenup: givenup.get(cf.category),
            links: cf.links.clone(),
            invocations: 0,
            cold_starts: 0,
            unseen: false,
            recategorized: false,
        }
    }

    pub fn unseen(function_id: impl Into<String>, givenup: &GivenupTable) -> Self {
        FunctionProfile {
            function_id: function_id.into(),
            category: FunctionCategory::Unknown,
            predictive: PredictiveValues::None,
            last_invoked: None,
            current_wt: 0,
            online_wts: OnlineWtLog::default(),
            offline: WtStats::default(),
            theta_givenup: givenup.get(FunctionCategory::Unknown),
            links: vec![],
            invocations: 0,
            cold_starts: 0,
            unseen: true,
            recategorized: false,
        }
    }

    /// The predictive values as a list of WTs, or an inclusive range.
    fn prediction_shape(&self, possible_range_limit: u32) -> Option<Shape<'_>> {
        match (&self.category, &self.predictive) {
            (
                FunctionCategory::Regular | FunctionCategory::ApproRegular,
                PredictiveValues::DiscreteSet(v),
            ) => Some(Shape::Discrete(v)),
            (_, PredictiveValues::Range { lo, hi }) => Some(Shape::Range(*lo, *hi)),
            (
                FunctionCategory::Possible | FunctionCategory::NewlyPossible,
                PredictiveValues::DiscreteSet(v),
            ) => {
                let lo = *v.iter().min()?;
                let hi = *v.iter().max()?;
                if hi - lo > possible_range_limit {
                    Some(Shape::Discrete(v))
                } else {
                    Some(Shape::Range(lo, hi))
                }
            }
            _ => None,
        }
    }

    /// Absolute slots at which the next invocation is predicted, ascending.
    pub fn predicted_invocation_times(&self, possible_range_limit: u32) -> Vec<u64> {
        let (Some(last), Some(shape)) = (
            self.last_invoked,
            self.prediction_shape(possible_range_limit),
        ) else {
            return vec![];
        };
        let mut out: Vec<u64> = match shape {
            Shape::Discrete(v) => v.iter().map(|&w| last + u64::from(w)).collect(),
            Shape::Range(lo, hi) => (lo..=hi).map(|w| last + u64::from(w)).collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether a predicted invocation time falls in `[lo, hi]`.
    pub fn predicts_within(&self, lo: u64, hi: u64, possible_range_limit: u32) -> bool {
        let (Some(last), Some(shape)) = (
            self.last_invoked,
            self.prediction_shape(possible_range_limit),
        ) else {
            return false;
        };
        if hi < last {
            return false;
        }
        let wlo = lo.saturating_sub(last);
        let whi = hi - last;
        match shape {
            Shape::Discrete(v) => v.iter().any(|&w| (wlo..=whi).contains(&u64::from(w))),
            Shape::Range(a, b) => u64::from(a) <= whi && u64::from(b) >= wlo,
        }
    }

    /// Pre-load test at slot `t`. `indicator_last(k)` is the latest slot at
    /// which the indicator of `links[k]` was invoked, if any.
    pub fn should_preload(
        &self,
        t: u64,
        theta_prewarm: u32,
        possible_range_limit: u32,
        indicator_last: impl Fn(usize) -> Option<u64>,
    ) -> bool {
        let theta = u64::from(theta_prewarm);
        match self.category {
            FunctionCategory::Correlated => self.links.iter().enumerate().any(|(k, link)| {
                indicator_last(k).is_some_and(|s| s + u64::from(link.lag) + theta >= t)
            }),
            FunctionCategory::Regular
            | FunctionCategory::ApproRegular
            | FunctionCategory::Dense
            | FunctionCategory::Possible
            | FunctionCategory::NewlyPossible => {
                self.predicts_within(t.saturating_sub(theta), t + theta, possible_range_limit)
            }
            _ => false,
        }
    }

    /// Record an invocation at slot `t`, then adjust if enabled.
    pub fn on_invoked(&mut self, t: u64, cfg: &SpesConfig) {
        if self.last_invoked.is_some() && self.current_wt > 0 {
            self.online_wts.push(self.current_wt);
        }
        self.last_invoked = Some(t);
        self.current_wt = 0;
        self.invocations += 1;
        if cfg.provision.adjusting {
            self.adjust(cfg);
        }
    }

    /// Move predictive values toward what has been observed online.
    pub fn adjust(&mut self, cfg: &SpesConfig) {
        if self.online_wts.len() < cfg.provision.min_online_wts {
            return;
        }
        let ccfg = &cfg.classifier;
        let sigma = self.offline.stddev;
        let pull = |old: u32, new: f64| -> u32 {
            if (new - f64::from(old)).abs() > sigma {
                round_half_up((f64::from(old) + new) / 2.0).max(1)
            } else {
                old
            }
        };
        match self.category {
            FunctionCategory::Regular => {
                if let (PredictiveValues::DiscreteSet(v), Some(m)) =
                    (&mut self.predictive, self.online_wts.median())
                {
                    for x in v.iter_mut() {
                        *x = pull(*x, m);
                    }
                }
            }
            FunctionCategory::ApproRegular => {
                let modes: Vec<u32> = self
                    .online_wts
                    .top_modes(ccfg.n_modes)
                    .into_iter()
                    .map(|(v, _)| v)
                    .collect();
                if let PredictiveValues::DiscreteSet(v) = &mut self.predictive {
                    for x in v.iter_mut() {
                        let old = *x;
                        if let Some(&near) = modes.iter().min_by_key(|&&m| (m.abs_diff(old), m)) {
                            *x = pull(old, f64::from(near));
                        }
                    }
                    v.sort_unstable();
                    v.dedup();
                }
            }
            FunctionCategory::Dense => {
                let modes = self.online_wts.top_modes(ccfg.k_modes);
                let lo1 = modes.iter().map(|&(v, _)| v).min();
                let hi1 = modes.iter().map(|&(v, _)| v).max();
                if let (PredictiveValues::Range { lo, hi }, Some(lo1), Some(hi1)) =
                    (&mut self.predictive, lo1, hi1)
                {
                    let (a, b) = (pull(*lo, f64::from(lo1)), pull(*hi, f64::from(hi1)));
                    *lo = a.min(b);
                    *hi = a.max(b);
                }
            }
            FunctionCategory::Possible | FunctionCategory::NewlyPossible => {
                let repeated = self.online_wts.repeated();
                if let PredictiveValues::DiscreteSet(v) = &mut self.predictive {
                    v.extend(repeated);
                    v.sort_unstable();
                    v.dedup();
                }
            }
            FunctionCategory::Unknown if !self.recategorized => {
                self.recategorized = true;
                if let Some(c) = classify_wt_sequence(self.online_wts.values(), ccfg) {
                    self.category = c.category;
                    self.predictive = c.predictive;
                    self.offline = c.stats;
                } else {
                    let repeated = self.online_wts.repeated();
                    if repeated.is_empty() {
                        return;
                    }
                    self.category = FunctionCategory::NewlyPossible;
                    self.predictive = PredictiveValues::DiscreteSet(repeated);
                    self.offline =
                        WtStats::of(self.online_wts.values(), ccfg.n_modes.max(ccfg.k_modes));
                }
                self.theta_givenup = cfg.provision.theta_givenup.get(self.category);
            }
            _ => {}
        }
    }
}

enum Shape<'a> {
    Discrete(&'a [u32]),
    Range(u32, u32),
}

/// Write profiles as JSON lines.
pub fn write_profiles_jsonl<'a>(
    profiles: impl IntoIterator<Item = &'a FunctionProfile>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for p in profiles {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
