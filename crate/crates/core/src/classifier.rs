//! Function categorization.
//!
//! Deterministic categories are tested in priority order (AlwaysWarm, Regular,
//! ApproRegular, Dense, Successive) and the first match wins. Functions that
//! match none are retried on recent suffixes of the fit window (forgetting),
//! and the rest are assigned Pulsed, Correlated or Possible by replaying each
//! candidate strategy over a held-out validation window.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ClassifierConfig, SpesConfig, SuccessiveRule};
use crate::correlation::{mine_links_with, CorrelationLink, PeerIndex};
use crate::error::{Error, Result};
use crate::predictor::FunctionProfile;
use crate::provision::evaluate_single;
use crate::timing::{
    self, coeff_of_variation, merge_adjacent_wts, percentile, scan_runs, top_modes,
    trim_boundary_wts, WtSequence,
};
use crate::trace_store::{InvocationSeries, TraceDataset, MINUTES_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionCategory {
    AlwaysWarm,
    Regular,
    ApproRegular,
    Dense,
    Successive,
    Pulsed,
    Correlated,
    Possible,
    Unknown,
    /// Assigned online to functions whose new waiting times repeat.
    NewlyPossible,
}

impl FunctionCategory {
    pub const ALL: [FunctionCategory; 10] = [
        FunctionCategory::AlwaysWarm,
        FunctionCategory::Regular,
        FunctionCategory::ApproRegular,
        FunctionCategory::Dense,
        FunctionCategory::Successive,
        FunctionCategory::Pulsed,
        FunctionCategory::Correlated,
        FunctionCategory::Possible,
        FunctionCategory::Unknown,
        FunctionCategory::NewlyPossible,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionCategory::AlwaysWarm => "always_warm",
            FunctionCategory::Regular => "regular",
            FunctionCategory::ApproRegular => "appro_regular",
            FunctionCategory::Dense => "dense",
            FunctionCategory::Successive => "successive",
            FunctionCategory::Pulsed => "pulsed",
            FunctionCategory::Correlated => "correlated",
            FunctionCategory::Possible => "possible",
            FunctionCategory::Unknown => "unknown",
            FunctionCategory::NewlyPossible => "newly_possible",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(
            self,
            FunctionCategory::AlwaysWarm
                | FunctionCategory::Regular
                | FunctionCategory::ApproRegular
                | FunctionCategory::Dense
                | FunctionCategory::Successive
        )
    }
}

impl fmt::Display for FunctionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown category `{s}`")))
    }
}

/// What a category predicts the next waiting time to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum PredictiveValues {
    DiscreteSet(Vec<u32>),
    Range {
        lo: u32,
        hi: u32,
    },
    #[default]
    None,
}

impl PredictiveValues {
    pub fn kind(&self) -> &'static str {
        match self {
            PredictiveValues::DiscreteSet(_) => "discrete",
            PredictiveValues::Range { .. } => "range",
            PredictiveValues::None => "none",
        }
    }

    pub fn values(&self) -> Vec<u32> {
        match self {
            PredictiveValues::DiscreteSet(v) => v.clone(),
            PredictiveValues::Range { lo, hi } => vec![*lo, *hi],
            PredictiveValues::None => vec![],
        }
    }

    fn parse(kind: &str, values: &str) -> Result<Self> {
        let nums = values
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| Error::Config(format!("bad value `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match (kind, nums.as_slice()) {
            ("discrete", _) => Ok(PredictiveValues::DiscreteSet(nums)),
            ("range", [lo, hi]) => Ok(PredictiveValues::Range { lo: *lo, hi: *hi }),
            ("none", []) => Ok(PredictiveValues::None),
            _ => Err(Error::Config(format!(
                "bad predictive values `{kind}` / `{values}`"
            ))),
        }
    }
}

/// Summary of the waiting times a category was accepted on; the adjusting
/// strategy compares online waiting times against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct WtStats {
    pub median: f64,
    pub stddev: f64,
    pub modes: Vec<(u32, usize)>,
}

impl WtStats {
    pub fn of(wts: &[u32], n_modes: usize) -> Self {
        if wts.is_empty() {
            return WtStats::default();
        }
        WtStats {
            median: timing::median(wts).expect("non-empty"),
            stddev: timing::std_dev(wts).expect("non-empty"),
            modes: top_modes(wts, n_modes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub category: FunctionCategory,
    pub predictive: PredictiveValues,
    pub stats: WtStats,
}

/// The deterministic rules, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    AlwaysWarm,
    Regular,
    ApproRegular,
    Dense,
    Successive,
}

/// Raw, boundary-trimmed, and trimmed-then-merged WTs; the slacked views the
/// Regular and ApproRegular rules are retried on.
fn slacked_stages(raw: &[u32], cfg: &ClassifierConfig) -> Vec<Vec<u32>> {
    let mut stages = vec![raw.to_vec()];
    let raw_seq = WtSequence(raw.to_vec());
    let trimmed = trim_boundary_wts(&raw_seq);
    let merge_base = if trimmed.len() >= cfg.min_wts {
        stages.push(trimmed.0.clone());
        trimmed
    } else {
        raw_seq
    };
    let merged = merge_adjacent_wts(&merge_base, cfg.mode_tolerance, cfg.small_threshold);
    if merged.len() >= cfg.min_wts && !stages.contains(&merged.0) {
        stages.push(merged.0);
    }
    stages.retain(|s| s.len() >= cfg.min_wts);
    stages
}

fn is_regular(wts: &[u32], cfg: &ClassifierConfig) -> bool {
    let p95 = percentile(wts, 95.0).expect("non-empty");
    let p5 = percentile(wts, 5.0).expect("non-empty");
    p95 - p5 <= 1 || coeff_of_variation(wts).expect("non-empty") <= cfg.cv_limit
}

fn appro_modes(wts: &[u32], cfg: &ClassifierConfig) -> Option<Vec<u32>> {
    let modes = top_modes(wts, cfg.n_modes);
    let covered: usize = modes.iter().map(|&(_, n)| n).sum();
    (covered as f64 >= cfg.appro_coverage * wts.len() as f64)
        .then(|| modes.into_iter().map(|(v, _)| v).collect())
}

fn dense_range(wts: &[u32], cfg: &ClassifierConfig) -> Option<PredictiveValues> {
    if percentile(wts, 90.0).expect("non-empty") > cfg.dense_constant {
        return None;
    }
    let modes = top_modes(wts, cfg.k_modes);
    let lo = modes.iter().map(|&(v, _)| v).min()?;
    let hi = modes.iter().map(|&(v, _)| v).max()?;
    Some(PredictiveValues::Range { lo, hi })
}

/// The WT-only rules (Regular, ApproRegular, Dense) on one sequence.
fn classify_wts_observed(
    raw: &[u32],
    cfg: &ClassifierConfig,
    observe: &mut dyn FnMut(Rule),
) -> Option<Classification> {
    if raw.len() < cfg.min_wts {
        return None;
    }
    let stages = slacked_stages(raw, cfg);
    let stats = |wts: &[u32]| WtStats::of(wts, cfg.n_modes.max(cfg.k_modes));

    observe(Rule::Regular);
    for stage in &stages {
        if is_regular(stage, cfg) {
            let median = timing::round_half_up(timing::median(stage).expect("non-empty")).max(1);
            return Some(Classification {
                category: FunctionCategory::Regular,
                predictive: PredictiveValues::DiscreteSet(vec![median]),
                stats: stats(stage),
            });
        }
    }
    observe(Rule::ApproRegular);
    for stage in &stages {
        if let Some(mut modes) = appro_modes(stage, cfg) {
            modes.sort_unstable();
            return Some(Classification {
                category: FunctionCategory::ApproRegular,
                predictive: PredictiveValues::DiscreteSet(modes),
                stats: stats(stage),
            });
        }
    }
    observe(Rule::Dense);
    dense_range(raw, cfg).map(|predictive| Classification {
        category: FunctionCategory::Dense,
        predictive,
        stats: stats(raw),
    })
}

/// Regular, ApproRegular or Dense from a bare WT sequence (used online).
pub fn classify_wt_sequence(wts: &[u32], cfg: &ClassifierConfig) -> Option<Classification> {
    classify_wts_observed(wts, cfg, &mut |_| {})
}

pub(crate) fn classify_counts_observed(
    counts: &[u32],
    cfg: &ClassifierConfig,
    observe: &mut dyn FnMut(Rule),
) -> Option<Classification> {
    let runs = scan_runs(counts);
    if runs.ats.is_empty() {
        return None;
    }
    let stats = |wts: &[u32]| WtStats::of(wts, cfg.n_modes.max(cfg.k_modes));

    observe(Rule::AlwaysWarm);
    let idle = counts.iter().filter(|&&c| c == 0).count();
    if idle == 0 || idle as f64 <= cfg.warm_ratio * counts.len() as f64 {
        return Some(Classification {
            category: FunctionCategory::AlwaysWarm,
            predictive: PredictiveValues::None,
            stats: stats(&runs.wts),
        });
    }
    if let Some(c) = classify_wts_observed(&runs.wts, cfg, observe) {
        return Some(c);
    }
    observe(Rule::Successive);
    let long_runs = runs.ats.iter().min().is_some_and(|&m| m >= cfg.gamma1);
    let heavy_runs = runs.ans.iter().min().is_some_and(|&m| m >= cfg.gamma2);
    let successive = match cfg.successive_rule {
        SuccessiveRule::Or => long_runs || heavy_runs,
        SuccessiveRule::And => long_runs && heavy_runs,
    };
    successive.then(|| Classification {
        category: FunctionCategory::Successive,
        predictive: PredictiveValues::None,
        stats: stats(&runs.wts),
    })
}

/// Like [`classify_counts`], also returning the rules evaluated, in order.
pub fn classify_counts_traced(
    counts: &[u32],
    cfg: &ClassifierConfig,
) -> (Option<Classification>, Vec<Rule>) {
    let mut rules = vec![];
    let c = classify_counts_observed(counts, cfg, &mut |r| rules.push(r));
    (c, rules)
}

/// Deterministic categorization of a count slice, with the WT statistics of
/// the sequence the winning rule accepted.
pub fn classify_counts(counts: &[u32], cfg: &ClassifierConfig) -> Option<Classification> {
    classify_counts_observed(counts, cfg, &mut |_| {})
}

pub fn classify_deterministic(
    s: &InvocationSeries,
    cfg: &ClassifierConfig,
) -> Option<(FunctionCategory, PredictiveValues)> {
    classify_counts(&s.counts, cfg).map(|c| (c.category, c.predictive))
}

/// Retry deterministic categorization on suffixes starting at day 2, 3, …,
/// ⌊days/2⌋ (1-based). Returns the first success and the day it starts on.
pub fn apply_forgetting(
    s: &InvocationSeries,
    cfg: &ClassifierConfig,
    days: usize,
) -> Option<(FunctionCategory, PredictiveValues, usize)> {
    forget_counts(&s.counts, cfg, days).map(|(c, day)| (c.category, c.predictive, day))
}

fn forget_counts(
    counts: &[u32],
    cfg: &ClassifierConfig,
    days: usize,
) -> Option<(Classification, usize)> {
    (2..=days / 2).find_map(|start_day| {
        let offset = (start_day - 1) * MINUTES_PER_DAY;
        if offset >= counts.len() {
            return None;
        }
        classify_counts(&counts[offset..], cfg).map(|c| (c, start_day))
    })
}

/// Indeterminate strategies in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Pulsed,
    Correlated,
    Possible,
}

impl Strategy {
    pub fn category(self) -> FunctionCategory {
        match self {
            Strategy::Pulsed => FunctionCategory::Pulsed,
            Strategy::Correlated => FunctionCategory::Correlated,
            Strategy::Possible => FunctionCategory::Possible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub cold_starts: u64,
    pub wasted: u64,
}

/// Pick among validated strategies.
///
/// A strategy minimal in both cold starts and wasted memory wins outright
/// (earliest in priority order on ties). Otherwise, with `i` the cold-start
/// minimizer and `j` the wasted-memory minimizer, `i` is chosen iff
/// `alpha × Δcs ≤ Δwm` where `Δcs = (cs_j − cs_i)/cs_i` and
/// `Δwm = (wm_i − wm_j)/wm_j`. A zero-cold-start `i` always wins; a zero
/// `wm_j` makes `Δwm` infinite.
pub fn select_strategy(outcomes: &[StrategyOutcome], alpha: f64) -> Option<Strategy> {
    let min_cs = outcomes.iter().map(|o| o.cold_starts).min()?;
    let min_wm = outcomes.iter().map(|o| o.wasted).min()?;
    let mut sorted = outcomes.to_vec();
    sorted.sort_by_key(|o| o.strategy);
    if let Some(o) = sorted
        .iter()
        .find(|o| o.cold_starts == min_cs && o.wasted == min_wm)
    {
        return Some(o.strategy);
    }
    let i = *sorted
        .iter()
        .min_by_key(|o| (o.cold_starts, o.wasted, o.strategy))?;
    let j = *sorted
        .iter()
        .min_by_key(|o| (o.wasted, o.cold_starts, o.strategy))?;
    if i.cold_starts == 0 {
        return Some(i.strategy);
    }
    // Cross-multiplied so the comparison is exact and scale-free:
    // alpha·(cs_j − cs_i)/cs_i ≤ (wm_i − wm_j)/wm_j.
    let lhs = alpha * ((j.cold_starts - i.cold_starts) as u128 * j.wasted as u128) as f64;
    let rhs = ((i.wasted - j.wasted) as u128 * i.cold_starts as u128) as f64;
    Some(if lhs <= rhs { i.strategy } else { j.strategy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizedFunction {
    pub function_id: String,
    pub category: FunctionCategory,
    pub predictive: PredictiveValues,
    /// Non-empty iff the category is Correlated.
    pub links: Vec<CorrelationLink>,
    /// Absolute slots the category was derived from (after forgetting).
    pub trained_on: Range<u64>,
    pub offline: WtStats,
    /// Whether the function had any invocation in the training window.
    pub seen: bool,
}

/// Result of [`categorize_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct Categorization {
    pub fit: Range<u64>,
    pub validation: Range<u64>,
    pub functions: BTreeMap<String, CategorizedFunction>,
}

impl Categorization {
    pub fn category_counts(&self) -> BTreeMap<FunctionCategory, usize> {
        let mut counts = BTreeMap::new();
        for f in self.functions.values() {
            *counts.entry(f.category).or_default() += 1;
        }
        counts
    }

    pub fn all_links(&self) -> impl Iterator<Item = &CorrelationLink> {
        self.functions.values().flat_map(|f| f.links.iter())
    }

    /// `function_id,category,predictive_kind,predictive_values,link_ids,trained_from_day`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "function_id",
            "category",
            "predictive_kind",
            "predictive_values",
            "link_ids",
            "trained_from_day",
        ])?;
        for f in self.functions.values() {
            let values: Vec<String> = f.predictive.values().iter().map(u32::to_string).collect();
            let links: Vec<&str> = f.links.iter().map(|l| l.indicator_id.as_str()).collect();
            let day =
                (f.trained_on.start.saturating_sub(self.fit.start)) as usize / MINUTES_PER_DAY + 1;
            w.write_record([
                f.function_id.as_str(),
                f.category.as_str(),
                f.predictive.kind(),
                &values.join(";"),
                &links.join(";"),
                &day.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// `target_id,indicator_id,lag,score`
    pub fn write_links_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["target_id", "indicator_id", "lag", "score"])?;
        for l in self.all_links() {
            w.write_record([
                l.target_id.as_str(),
                l.indicator_id.as_str(),
                &l.lag.to_string(),
                &l.score.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Rebuild a categorization from its CSV files and the training data it
    /// was computed on. Offline statistics are recomputed from the data.
    pub fn read_csv(
        categories: impl AsRef<Path>,
        links: impl AsRef<Path>,
        train_ds: &TraceDataset,
        cfg: &ClassifierConfig,
    ) -> Result<Categorization> {
        let (fit, validation) = fit_validation_windows(train_ds, cfg)?;
        let mut by_target: HashMap<String, Vec<CorrelationLink>> = HashMap::new();
        let links = links.as_ref();
        let mut reader = csv::Reader::from_path(links)?;
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |msg: &str| Error::Parse {
                path: links.to_path_buf(),
                line: n as u64 + 2,
                msg: msg.into(),
            };
            if rec.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let link = CorrelationLink {
                target_id: rec[0].to_string(),
                indicator_id: rec[1].to_string(),
                lag: rec[2].parse().map_err(|_| bad("bad lag"))?,
                score: rec[3].parse().map_err(|_| bad("bad score"))?,
            };
            by_target
                .entry(link.target_id.clone())
                .or_default()
                .push(link);
        }

        let path = categories.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let mut functions = BTreeMap::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = n as u64 + 2;
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            };
            if rec.len() != 6 {
                return Err(bad("expected 6 columns".into()));
            }
            let function_id = rec[0].to_string();
            let category: FunctionCategory =
                rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
            let predictive =
                PredictiveValues::parse(&rec[2], &rec[3]).map_err(|e| bad(e.to_string()))?;
            let day: usize = rec[5]
                .parse()
                .map_err(|_| bad(format!("bad day `{}`", &rec[5])))?;
            let start = fit.start + (day.max(1) - 1) as u64 * MINUTES_PER_DAY as u64;
            let trained_on = start.min(fit.end)..fit.end;
            let links = by_target.remove(&function_id).unwrap_or_default();
            let (offline, seen) = match train_ds.get(&function_id) {
                Some(s) => {
                    let lo = (trained_on.start - train_ds.origin_minute()) as usize;
                    let hi = (trained_on.end - train_ds.origin_minute()) as usize;
                    (
                        offline_stats(&s.counts[lo..hi], category, cfg),
                        s.total() > 0,
                    )
                }
                None => (WtStats::default(), false),
            };
            functions.insert(
                function_id.clone(),
                CategorizedFunction {
                    function_id,
                    category,
                    predictive,
                    links,
                    trained_on,
                    offline,
                    seen,
                },
            );
        }
        Ok(Categorization {
            fit,
            validation,
            functions,
        })
    }
}

fn offline_stats(counts: &[u32], category: FunctionCategory, cfg: &ClassifierConfig) -> WtStats {
    match classify_counts(counts, cfg) {
        Some(c) if c.category == category => c.stats,
        _ => WtStats::of(&scan_runs(counts).wts, cfg.n_modes.max(cfg.k_modes)),
    }
}

/// Fit and validation windows (absolute slots) inside a training dataset.
pub fn fit_validation_windows(
    train_ds: &TraceDataset,
    cfg: &ClassifierConfig,
) -> Result<(Range<u64>, Range<u64>)> {
    let days = train_ds.days();
    if days < 2 {
        return Err(Error::Config(format!(
            "categorization needs at least 2 training days, got {days}"
        )));
    }
    let validation_days = cfg.validation_days.min(days - 1);
    let origin = train_ds.origin_minute();
    let fit_end = origin + ((days - validation_days) * MINUTES_PER_DAY) as u64;
    let val_end = origin + (days * MINUTES_PER_DAY) as u64;
    Ok((origin..fit_end, fit_end..val_end))
}

fn values_seen_twice(wts: &[u32]) -> Vec<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &w in wts {
        *counts.entry(w).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(v, _)| v)
        .collect()
}

/// Validation-driven assignment of a function no deterministic rule accepted.
pub struct IndeterminateContext<'a> {
    pub fit: &'a TraceDataset,
    pub validation: &'a TraceDataset,
    pub peers: &'a PeerIndex,
    pub cfg: &'a SpesConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub category: FunctionCategory,
    pub predictive: PredictiveValues,
    pub links: Vec<CorrelationLink>,
    pub offline: WtStats,
    pub outcomes: Vec<StrategyOutcome>,
}

pub fn assign_indeterminate(
    function_id: &str,
    ctx: &IndeterminateContext<'_>,
) -> Result<Assignment> {
    let ccfg = &ctx.cfg.classifier;
    let unknown = Assignment {
        category: FunctionCategory::Unknown,
        predictive: PredictiveValues::None,
        links: vec![],
        offline: WtStats::default(),
        outcomes: vec![],
    };
    let (Some(pos), Some(val)) = (
        ctx.fit.position(function_id),
        ctx.validation.get(function_id),
    ) else {
        return Ok(unknown);
    };
    if val.total() == 0 {
        return Ok(unknown);
    }
    let fit_series = &ctx.fit.series()[pos];
    let meta = &ctx.fit.metas()[pos];
    let fit_wts = scan_runs(&fit_series.counts).wts;
    let offline = WtStats::of(&fit_wts, ccfg.n_modes.max(ccfg.k_modes));
    let givenup = &ctx.cfg.provision.theta_givenup;

    let mut candidates: Vec<(Strategy, FunctionProfile)> = Vec::with_capacity(3);
    let base = |category, predictive, links| CategorizedFunction {
        function_id: function_id.to_string(),
        category,
        predictive,
        links,
        trained_on: ctx.fit.slot_range(),
        offline: offline.clone(),
        seen: true,
    };
    candidates.push((
        Strategy::Pulsed,
        FunctionProfile::from_categorized(
            &base(FunctionCategory::Pulsed, PredictiveValues::None, vec![]),
            givenup,
        ),
    ));
    let links = if ccfg.correlation && fit_series.total() > 0 {
        mine_links_with(pos, ctx.fit, ctx.peers, ccfg)
    } else {
        vec![]
    };
    if !links.is_empty() {
        candidates.push((
            Strategy::Correlated,
            FunctionProfile::from_categorized(
                &base(
                    FunctionCategory::Correlated,
                    PredictiveValues::None,
                    links.clone(),
                ),
                givenup,
            ),
        ));
    }
    let repeated = values_seen_twice(&fit_wts);
    if !repeated.is_empty() {
        candidates.push((
            Strategy::Possible,
            FunctionProfile::from_categorized(
                &base(
                    FunctionCategory::Possible,
                    PredictiveValues::DiscreteSet(repeated.clone()),
                    vec![],
                ),
                givenup,
            ),
        ));
    }

    let indicator_series: Vec<_> = links
        .iter()
        .filter_map(|l| {
            let i = ctx.validation.position(&l.indicator_id)?;
            Some((
                l.indicator_id.clone(),
                ctx.validation.metas()[i].trigger,
                ctx.validation.series()[i].counts.as_slice(),
            ))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(candidates.len());
    for (strategy, profile) in candidates {
        let indicators: &[_] = if strategy == Strategy::Correlated {
            &indicator_series
        } else {
            &[]
        };
        let (cold_starts, wasted) = evaluate_single(
            profile,
            meta.trigger,
            &val.counts,
            indicators,
            ctx.cfg,
            ctx.validation.origin_minute(),
        )?;
        outcomes.push(StrategyOutcome {
            strategy,
            cold_starts,
            wasted,
        });
    }
    let chosen = select_strategy(&outcomes, ccfg.alpha).unwrap_or(Strategy::Pulsed);
    let (predictive, links) = match chosen {
        Strategy::Pulsed => (PredictiveValues::None, vec![]),
        Strategy::Correlated => (PredictiveValues::None, links),
        Strategy::Possible => (PredictiveValues::DiscreteSet(repeated), vec![]),
    };
    Ok(Assignment {
        category: chosen.category(),
        predictive,
        links,
        offline,
        outcomes,
    })
}

enum FirstPass {
    Done(CategorizedFunction),
    Pending,
}

/// Categorize every function of a training dataset.
///
/// The training window is split into a fit window and a trailing validation
/// window of `validation_days`. Deterministic rules and forgetting run on the
/// fit window in parallel; the remaining functions are then assigned over a
/// read-only snapshot of both windows.
pub fn categorize_all(train_ds: &TraceDataset, cfg: &SpesConfig) -> Result<Categorization> {
    cfg.validate()?;
    if train_ds.is_empty() {
        let r = train_ds.slot_range();
        return Ok(Categorization {
            fit: r.clone(),
            validation: r.end..r.end,
            functions: BTreeMap::new(),
        });
    }
    let ccfg = &cfg.classifier;
    let (fit_range, val_range) = fit_validation_windows(train_ds, ccfg)?;
    let origin = train_ds.origin_minute();
    let fit = train_ds.window_slice(0..(fit_range.end - origin) as usize)?;
    let validation = train_ds
        .window_slice((val_range.start - origin) as usize..(val_range.end - origin) as usize)?;
    let fit_days = fit.days();

    let first: Vec<FirstPass> = fit
        .series()
        .par_iter()
        .map(|s| {
            let found = classify_counts(&s.counts, ccfg)
                .map(|c| (c, 1))
                .or_else(|| {
                    if ccfg.forgetting {
                        forget_counts(&s.counts, ccfg, fit_days)
                    } else {
                        None
                    }
                });
            match found {
                Some((c, start_day)) => FirstPass::Done(CategorizedFunction {
                    function_id: s.function_id.clone(),
                    category: c.category,
                    predictive: c.predictive,
                    links: vec![],
                    trained_on: fit_range.start + ((start_day - 1) * MINUTES_PER_DAY) as u64
                        ..fit_range.end,
                    offline: c.stats,
                    seen: true,
                }),
                None => FirstPass::Pending,
            }
        })
        .collect();

    let peers = PeerIndex::new(&fit);
    let ctx = IndeterminateContext {
        fit: &fit,
        validation: &validation,
        peers: &peers,
        cfg,
    };
    let functions = first
        .into_par_iter()
        .enumerate()
        .map(|(i, pass)| match pass {
            FirstPass::Done(cf) => Ok(cf),
            FirstPass::Pending => {
                let id = &fit.metas()[i].function_id;
                let a = assign_indeterminate(id, &ctx)?;
                let seen = fit.series()[i].total() > 0 || validation.series()[i].total() > 0;
                Ok(CategorizedFunction {
                    function_id: id.clone(),
                    category: a.category,
                    predictive: a.predictive,
                    links: a.links,
                    trained_on: fit_range.clone(),
                    offline: a.offline,
                    seen,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Categorization {
        fit: fit_range,
        validation: val_range,
        functions: functions
            .into_iter()
            .map(|f| (f.function_id.clone(), f))
            .collect(),
    })
}
