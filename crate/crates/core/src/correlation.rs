//! Co-occurrence between functions, offline link mining and the online
//! correlation tracker used for functions without training history.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::config::ClassifierConfig;
use crate::error::{Error, Result};
use crate::trace_store::{InvocationSeries, TraceDataset, TriggerType};

/// An indicator whose invocations tend to precede the target's by at most `lag` slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLink {
    pub indicator_id: String,
    pub target_id: String,
    pub lag: u32,
    pub score: f64,
}

fn check_len(a: &InvocationSeries, b: &InvocationSeries) -> Result<()> {
    if a.len() != b.len() || a.origin_minute != b.origin_minute {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Fraction of the target's invoked slots in which `other` was also invoked.
pub fn cooccurrence_rate(target: &InvocationSeries, other: &InvocationSeries) -> Result<f64> {
    lagged_cooccurrence_rate(target, other, 0)
}

/// Fraction of the target's invoked slots `t` such that the indicator was
/// invoked somewhere in `[t - lag, t]`.
pub fn lagged_cooccurrence_rate(
    target: &InvocationSeries,
    indicator: &InvocationSeries,
    lag: u32,
) -> Result<f64> {
    check_len(target, indicator)?;
    let targets = invoked_slots(&target.counts);
    if targets.is_empty() {
        return Ok(0.0);
    }
    let hits = lag_histogram(&targets, &invoked_slots(&indicator.counts), lag)
        .iter()
        .sum::<u64>();
    Ok(hits as f64 / targets.len() as f64)
}

fn invoked_slots(counts: &[u32]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, _)| i)
        .collect()
}

/// `h[d]` counts target slots whose most recent indicator invocation (at or
/// before the slot) lies exactly `d` slots back, for `d ≤ max_lag`.
fn lag_histogram(targets: &[usize], indicators: &[usize], max_lag: u32) -> Vec<u64> {
    let mut h = vec![0u64; max_lag as usize + 1];
    for &t in targets {
        let i = indicators.partition_point(|&s| s <= t);
        if i > 0 {
            let d = t - indicators[i - 1];
            if d <= max_lag as usize {
                h[d] += 1;
            }
        }
    }
    h
}

/// Best lag for an indicator: the score is taken at `max_lag` (coverage only
/// grows with the lag) and the lag is the smallest one reaching that score.
fn best_lag(targets: &[usize], indicators: &[usize], max_lag: u32) -> Option<(u32, f64)> {
    let h = lag_histogram(targets, indicators, max_lag);
    let best: u64 = h.iter().sum();
    if best == 0 || targets.is_empty() {
        return None;
    }
    let mut acc = 0;
    let lag = h
        .iter()
        .position(|&n| {
            acc += n;
            acc == best
        })
        .expect("cumulative sum reaches the total");
    Some((lag as u32, best as f64 / targets.len() as f64))
}

/// Functions sharing an application or an owner with each other.
#[derive(Debug, Clone, Default)]
pub struct PeerIndex {
    groups: Vec<Vec<usize>>,
    member_of: Vec<[usize; 2]>,
}

impl PeerIndex {
    pub fn new(ds: &TraceDataset) -> Self {
        let mut keys: HashMap<(u8, &str), usize> = HashMap::new();
        let mut groups: Vec<Vec<usize>> = vec![];
        let mut member_of = Vec::with_capacity(ds.len());
        for (i, m) in ds.metas().iter().enumerate() {
            let mut slot = [0; 2];
            for (k, key) in [(0u8, m.app_id.as_str()), (1, m.owner_id.as_str())]
                .into_iter()
                .enumerate()
            {
                let g = *keys.entry(key).or_insert_with(|| {
                    groups.push(vec![]);
                    groups.len() - 1
                });
                groups[g].push(i);
                slot[k] = g;
            }
            member_of.push(slot);
        }
        PeerIndex { groups, member_of }
    }

    /// Sorted indices of functions sharing an app or owner with `i`, excluding `i`.
    pub fn peers(&self, i: usize) -> Vec<usize> {
        let Some(groups) = self.member_of.get(i) else {
            return vec![];
        };
        let mut out: Vec<usize> = groups
            .iter()
            .flat_map(|&g| self.groups[g].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out.retain(|&j| j != i);
        out
    }
}

/// Mine links for the function at position `target` in `ds` against its peers.
pub fn mine_links_with(
    target: usize,
    ds: &TraceDataset,
    peers: &PeerIndex,
    cfg: &ClassifierConfig,
) -> Vec<CorrelationLink> {
    let series = ds.series();
    let targets = invoked_slots(&series[target].counts);
    if targets.is_empty() {
        return vec![];
    }
    peers
        .peers(target)
        .into_iter()
        .filter_map(|j| {
            let (lag, score) = best_lag(
                &targets,
                &invoked_slots(&series[j].counts),
                cfg.tcor_max_lag,
            )?;
            (score >= cfg.tcor_threshold).then(|| CorrelationLink {
                indicator_id: series[j].function_id.clone(),
                target_id: series[target].function_id.clone(),
                lag,
                score,
            })
        })
        .collect()
}

/// Mine links for `target_id` against functions sharing its app or owner.
pub fn mine_offline_links(
    target_id: &str,
    ds: &TraceDataset,
    cfg: &ClassifierConfig,
) -> Vec<CorrelationLink> {
    match ds.position(target_id) {
        Some(i) => mine_links_with(i, ds, &PeerIndex::new(ds), cfg),
        None => vec![],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateState {
    pub co_hits: u64,
    pub active: bool,
}

/// Online co-occurrence tracking for a target with no history.
///
/// Candidates are functions with the target's trigger type. Each time the
/// target is invoked the COR of every candidate is refreshed and the running
/// maximum updated; candidates falling more than `deactivation_gap` below it
/// stop counting as indicators and come back within `reactivation_gap`.
/// Candidates never seen alongside the target share one state with COR 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineCorrelationTracker<K: Ord> {
    target: K,
    trigger: TriggerType,
    target_invocations: u64,
    touched: BTreeMap<K, CandidateState>,
    untouched_active: bool,
    max_cor: f64,
    deactivation_gap: f64,
    reactivation_gap: f64,
}

impl<K: Ord + Clone> OnlineCorrelationTracker<K> {
    pub fn new(
        target: K,
        trigger: TriggerType,
        deactivation_gap: f64,
        reactivation_gap: f64,
    ) -> Self {
        Self {
            target,
            trigger,
            target_invocations: 0,
            touched: BTreeMap::new(),
            untouched_active: true,
            max_cor: 0.0,
            deactivation_gap,
            reactivation_gap,
        }
    }

    pub fn target(&self) -> &K {
        &self.target
    }

    pub fn max_cor(&self) -> f64 {
        self.max_cor
    }

    pub fn target_invocations(&self) -> u64 {
        self.target_invocations
    }

    pub fn cor(&self, k: &K) -> f64 {
        match (self.touched.get(k), self.target_invocations) {
            (Some(s), n) if n > 0 => s.co_hits as f64 / n as f64,
            _ => 0.0,
        }
    }

    pub fn is_active(&self, k: &K) -> bool {
        self.touched
            .get(k)
            .map_or(self.untouched_active, |s| s.active)
    }

    fn next_active(&self, active: bool, cor: f64) -> bool {
        let gap = self.max_cor - cor;
        if active {
            gap <= self.deactivation_gap
        } else {
            gap <= self.reactivation_gap
        }
    }

    /// Feed one slot: the functions invoked in it (with their triggers) and
    /// whether the target was invoked. Returns true when an active candidate
    /// was invoked, i.e. the target should be pre-warmed.
    pub fn update<'a, I>(&mut self, invoked: I, target_invoked: bool) -> bool
    where
        I: IntoIterator<Item = (&'a K, TriggerType)>,
        K: 'a,
    {
        let candidates: Vec<&K> = invoked
            .into_iter()
            .filter(|&(k, trig)| trig == self.trigger && *k != self.target)
            .map(|(k, _)| k)
            .collect();
        if target_invoked {
            self.target_invocations += 1;
            for &k in &candidates {
                let fallback = self.untouched_active;
                self.touched
                    .entry(k.clone())
                    .or_insert(CandidateState {
                        co_hits: 0,
                        active: fallback,
                    })
                    .co_hits += 1;
            }
            let n = self.target_invocations as f64;
            let current = self
                .touched
                .values()
                .map(|s| s.co_hits as f64 / n)
                .fold(0.0, f64::max);
            self.max_cor = self.max_cor.max(current);
            let updates: Vec<bool> = self
                .touched
                .values()
                .map(|s| self.next_active(s.active, s.co_hits as f64 / n))
                .collect();
            for (s, a) in self.touched.values_mut().zip(updates) {
                s.active = a;
            }
            self.untouched_active = self.next_active(self.untouched_active, 0.0);
        }
        candidates.into_iter().any(|k| self.is_active(k))
    }
}
