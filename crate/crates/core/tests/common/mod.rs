//! Shared fixtures and a naive reference interpreter for the provisioning
//! engine and its accounting.
//!
//! The interpreter keeps every piece of state explicitly per function and per
//! slot: predicted times are enumerated into sets, statistics are recomputed
//! from scratch, correlation candidates are tracked one by one, and memory is
//! counted by scanning the resident set every minute.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spes_core::classifier::{classify_wt_sequence, CategorizedFunction, WtStats};
use spes_core::correlation::CorrelationLink;
use spes_core::predictor::FunctionProfile;
use spes_core::provision::PolicyKind;
use spes_core::{
    FunctionCategory, FunctionMeta, PredictiveValues, SpesConfig, TraceDataset, TriggerType,
};

pub fn meta(id: &str, trigger: TriggerType) -> FunctionMeta {
    FunctionMeta {
        owner_id: format!("o-{id}"),
        app_id: format!("a-{id}"),
        function_id: id.into(),
        trigger,
    }
}

pub fn dataset(entries: Vec<(FunctionMeta, Vec<u32>)>) -> TraceDataset {
    let window = entries.first().map_or(0, |e| e.1.len());
    TraceDataset::new(window, 0, entries).unwrap()
}

pub fn categorized(
    id: &str,
    category: FunctionCategory,
    predictive: PredictiveValues,
) -> CategorizedFunction {
    CategorizedFunction {
        function_id: id.into(),
        category,
        predictive,
        links: vec![],
        trained_on: 0..1,
        offline: WtStats::default(),
        seen: true,
    }
}

/// Counts with one invocation every `period` slots starting at `phase`.
pub fn periodic(slots: usize, period: usize, phase: usize) -> Vec<u32> {
    (0..slots)
        .map(|t| u32::from(t >= phase && (t - phase).is_multiple_of(period)))
        .collect()
}

/// A random small trace: mixed invocation patterns over `slots` minutes.
pub fn random_counts(rng: &mut ChaCha8Rng, slots: usize, others: &[Vec<u32>]) -> Vec<u32> {
    let mut c = vec![0u32; slots];
    match rng.gen_range(0..7) {
        0 => {
            let period = rng.gen_range(2..200);
            let jitter = rng.gen_range(0..=period / 4);
            let mut t = rng.gen_range(0..period);
            while t < slots {
                c[t] = rng.gen_range(1..3);
                t += rng.gen_range(period - jitter..=period + jitter).max(1);
            }
        }
        1 => {
            let rate = rng.gen_range(0.001..0.2);
            for x in c.iter_mut() {
                if rng.gen_bool(rate) {
                    *x = rng.gen_range(1..4);
                }
            }
        }
        2 => {
            let mut t = rng.gen_range(0..100);
            while t < slots {
                let len = rng.gen_range(1..8);
                for x in c.iter_mut().skip(t).take(len) {
                    *x = rng.gen_range(1..10);
                }
                t += len + rng.gen_range(1..300);
            }
        }
        3 => {
            for x in c.iter_mut() {
                *x = u32::from(rng.gen_bool(0.97));
            }
        }
        4 => {}
        5 if !others.is_empty() => {
            let src = &others[rng.gen_range(0..others.len())];
            let lag = rng.gen_range(0..6);
            c[lag..].copy_from_slice(&src[..slots - lag]);
        }
        _ => {
            let mut t = rng.gen_range(0..10);
            while t < slots {
                c[t] = 1;
                t += 1 + rng.gen_range(0..6);
            }
        }
    }
    c
}

/// A random starting profile, or `None` for an unseen function.
pub fn random_profile(
    rng: &mut ChaCha8Rng,
    id: &str,
    ids: &[String],
    cfg: &SpesConfig,
) -> Option<FunctionProfile> {
    use FunctionCategory::*;
    let cats = [
        AlwaysWarm,
        Regular,
        ApproRegular,
        Dense,
        Successive,
        Pulsed,
        Correlated,
        Possible,
        Unknown,
    ];
    if rng.gen_bool(0.1) {
        return None;
    }
    let category = cats[rng.gen_range(0..cats.len())];
    let predictive = match category {
        Regular => PredictiveValues::DiscreteSet(vec![rng.gen_range(1..150)]),
        ApproRegular => {
            let mut v: Vec<u32> = (0..3).map(|_| rng.gen_range(1..150)).collect();
            v.sort_unstable();
            v.dedup();
            PredictiveValues::DiscreteSet(v)
        }
        Dense => {
            let lo = rng.gen_range(1..5);
            PredictiveValues::Range {
                lo,
                hi: lo + rng.gen_range(0..4),
            }
        }
        Possible => {
            let mut v: Vec<u32> = (0..rng.gen_range(1..5))
                .map(|_| rng.gen_range(1..60))
                .collect();
            v.sort_unstable();
            v.dedup();
            PredictiveValues::DiscreteSet(v)
        }
        _ => PredictiveValues::None,
    };
    let links = if category == Correlated {
        (0..rng.gen_range(1..3))
            .map(|_| CorrelationLink {
                indicator_id: ids[rng.gen_range(0..ids.len())].clone(),
                target_id: id.into(),
                lag: rng.gen_range(0..6),
                score: 1.0,
            })
            .filter(|l| l.indicator_id != id)
            .collect()
    } else {
        vec![]
    };
    let category = if category == Correlated && links.is_empty() {
        Pulsed
    } else {
        category
    };
    let cf = CategorizedFunction {
        function_id: id.into(),
        category,
        predictive,
        links,
        trained_on: 0..1,
        offline: WtStats {
            median: 0.0,
            stddev: rng.gen_range(0.0..6.0),
            modes: vec![],
        },
        seen: true,
    };
    Some(FunctionProfile::from_categorized(
        &cf,
        &cfg.provision.theta_givenup,
    ))
}

#[derive(Clone, Debug)]
enum Pred {
    Set(Vec<u32>),
    Span(u32, u32),
    Nothing,
}

#[derive(Clone, Debug)]
struct NaiveFn {
    active: bool,
    category: FunctionCategory,
    pred: Pred,
    sigma: f64,
    links: Vec<(Option<usize>, u32)>,
    givenup: u32,
    loaded: bool,
    last: Option<u64>,
    idle_run: u32,
    wts: Vec<u32>,
    recategorized: bool,
    tracker: Option<NaiveTracker>,
    keepalive_idle: u32,
}

#[derive(Clone, Debug)]
struct NaiveTracker {
    target_count: u64,
    co: HashMap<usize, u64>,
    active: HashMap<usize, bool>,
    max: f64,
}

/// What the naive interpreter reports.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveResult {
    /// Per slot, indices of functions with a cold start.
    pub cold_sets: Vec<BTreeSet<usize>>,
    pub wmt: Vec<u64>,
    pub cold_starts: Vec<u64>,
    pub emcr: Option<f64>,
}

fn naive_median(v: &[u32]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n % 2 == 1 {
        f64::from(s[n / 2])
    } else {
        (f64::from(s[n / 2 - 1]) + f64::from(s[n / 2])) / 2.0
    }
}

fn naive_modes(v: &[u32], n: usize) -> Vec<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &x in v {
        *counts.entry(x).or_default() += 1;
    }
    let mut pairs: Vec<(u32, usize)> = counts.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    pairs.into_iter().take(n).map(|p| p.0).collect()
}

fn naive_round(x: f64) -> u32 {
    let f = x.floor();
    (if x - f >= 0.5 { f + 1.0 } else { f }) as u32
}

fn repeated(v: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = v
        .iter()
        .copied()
        .filter(|x| v.iter().filter(|y| *y == x).count() > 1)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl NaiveFn {
    fn predicted(&self, limit: u32) -> BTreeSet<u64> {
        let Some(last) = self.last else {
            return BTreeSet::new();
        };
        let values: Vec<u32> = match (&self.pred, self.category) {
            (Pred::Set(v), FunctionCategory::Regular | FunctionCategory::ApproRegular) => v.clone(),
            (Pred::Span(a, b), _) => (*a..=*b).collect(),
            (Pred::Set(v), FunctionCategory::Possible | FunctionCategory::NewlyPossible)
                if !v.is_empty() =>
            {
                let lo = *v.iter().min().unwrap();
                let hi = *v.iter().max().unwrap();
                if hi - lo > limit {
                    v.clone()
                } else {
                    (lo..=hi).collect()
                }
            }
            _ => vec![],
        };
        values.into_iter().map(|v| last + u64::from(v)).collect()
    }

    fn wants_preload(&self, t: u64, theta: u32, limit: u32, recent: &[Option<u64>]) -> bool {
        use FunctionCategory::*;
        match self.category {
            Correlated => self.links.iter().any(|&(j, lag)| {
                j.and_then(|j| recent[j])
                    .is_some_and(|s| t >= s && t - s <= u64::from(lag + theta))
            }),
            Regular | ApproRegular | Dense | Possible | NewlyPossible => self
                .predicted(limit)
                .iter()
                .any(|&p| p.abs_diff(t) <= u64::from(theta)),
            _ => false,
        }
    }

    fn adjust(&mut self, cfg: &SpesConfig) {
        use FunctionCategory::*;
        if self.wts.len() < cfg.provision.min_online_wts {
            return;
        }
        let sigma = self.sigma;
        let pull = |old: u32, new: f64| {
            if (new - f64::from(old)).abs() > sigma {
                naive_round((f64::from(old) + new) / 2.0).max(1)
            } else {
                old
            }
        };
        match self.category {
            Regular => {
                let m = naive_median(&self.wts);
                if let Pred::Set(v) = &mut self.pred {
                    for x in v.iter_mut() {
                        *x = pull(*x, m);
                    }
                }
            }
            ApproRegular => {
                let modes = naive_modes(&self.wts, cfg.classifier.n_modes);
                if let Pred::Set(v) = &mut self.pred {
                    let mut out: Vec<u32> = v
                        .iter()
                        .map(|&x| {
                            let mut best = modes[0];
                            for &m in &modes {
                                if m.abs_diff(x) < best.abs_diff(x)
                                    || (m.abs_diff(x) == best.abs_diff(x) && m < best)
                                {
                                    best = m;
                                }
                            }
                            pull(x, f64::from(best))
                        })
                        .collect();
                    out.sort_unstable();
                    out.dedup();
                    *v = out;
                }
            }
            Dense => {
                let modes = naive_modes(&self.wts, cfg.classifier.k_modes);
                let lo1 = *modes.iter().min().unwrap();
                let hi1 = *modes.iter().max().unwrap();
                if let Pred::Span(lo, hi) = &mut self.pred {
                    let a = pull(*lo, f64::from(lo1));
                    let b = pull(*hi, f64::from(hi1));
                    *lo = a.min(b);
                    *hi = a.max(b);
                }
            }
            Possible | NewlyPossible => {
                if let Pred::Set(v) = &mut self.pred {
                    v.extend(repeated(&self.wts));
                    v.sort_unstable();
                    v.dedup();
                }
            }
            Unknown if !self.recategorized => {
                self.recategorized = true;
                if let Some(c) = classify_wt_sequence(&self.wts, &cfg.classifier) {
                    self.category = c.category;
                    self.pred = to_pred(&c.predictive);
                    self.sigma = c.stats.stddev;
                } else {
                    let r = repeated(&self.wts);
                    if r.is_empty() {
                        return;
                    }
                    self.category = NewlyPossible;
                    self.pred = Pred::Set(r);
                    let n = self.wts.len() as f64;
                    let mean = self.wts.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
                    self.sigma = (self
                        .wts
                        .iter()
                        .map(|&x| (f64::from(x) - mean).powi(2))
                        .sum::<f64>()
                        / n)
                        .sqrt();
                }
                self.givenup = cfg.provision.theta_givenup.get(self.category);
            }
            _ => {}
        }
    }
}

fn to_pred(p: &PredictiveValues) -> Pred {
    match p {
        PredictiveValues::DiscreteSet(v) => Pred::Set(v.clone()),
        PredictiveValues::Range { lo, hi } => Pred::Span(*lo, *hi),
        PredictiveValues::None => Pred::Nothing,
    }
}

/// Replay `ds` minute by minute. `profiles` maps function ids to starting
/// profiles; the rest are unseen. Function indices follow the dataset order.
pub fn naive_replay(
    ds: &TraceDataset,
    profiles: &BTreeMap<String, FunctionProfile>,
    policy: &PolicyKind,
) -> NaiveResult {
    let n = ds.len();
    let slots = ds.window();
    let ids: Vec<&str> = ds.metas().iter().map(|m| m.function_id.as_str()).collect();
    let triggers: Vec<TriggerType> = ds.metas().iter().map(|m| m.trigger).collect();
    let default_cfg = SpesConfig::default();
    let (spes, keepalive) = match policy {
        PolicyKind::Spes(c) => (c, None),
        PolicyKind::FixedKeepAlive { minutes } => (&default_cfg, Some(*minutes)),
    };
    let mut fns: Vec<NaiveFn> = ids
        .iter()
        .map(|id| match profiles.get(*id) {
            Some(p) => NaiveFn {
                active: true,
                category: p.category,
                pred: to_pred(&p.predictive),
                sigma: p.offline.stddev,
                links: p
                    .links
                    .iter()
                    .map(|l| (ids.iter().position(|x| *x == l.indicator_id), l.lag))
                    .collect(),
                givenup: p.theta_givenup,
                loaded: keepalive.is_none()
                    && spes.provision.carry_warm
                    && p.category == FunctionCategory::AlwaysWarm,
                last: None,
                idle_run: 0,
                wts: vec![],
                recategorized: false,
                tracker: None,
                keepalive_idle: 0,
            },
            None => NaiveFn {
                active: keepalive.is_some(),
                category: FunctionCategory::Unknown,
                pred: Pred::Nothing,
                sigma: 0.0,
                links: vec![],
                givenup: spes.provision.theta_givenup.get(FunctionCategory::Unknown),
                loaded: false,
                last: None,
                idle_run: 0,
                wts: vec![],
                recategorized: false,
                tracker: None,
                keepalive_idle: 0,
            },
        })
        .collect();

    let mut recent: Vec<Option<u64>> = vec![None; n];
    let mut cold_sets = Vec::with_capacity(slots);
    let mut wmt = vec![0u64; n];
    let mut cold_starts = vec![0u64; n];
    let (mut ratio_sum, mut ratio_n) = (0.0, 0usize);

    for s in 0..slots {
        let t = ds.origin_minute() + s as u64;
        let inv: Vec<bool> = ds.series().iter().map(|x| x.counts[s] > 0).collect();
        for i in 0..n {
            if inv[i] {
                recent[i] = Some(t);
            }
        }
        let mut cold = BTreeSet::new();
        for i in 0..n {
            let f = &mut fns[i];
            if let Some(d) = keepalive {
                if inv[i] {
                    if !f.loaded {
                        cold.insert(i);
                    }
                    f.loaded = true;
                    f.keepalive_idle = 0;
                } else if f.loaded {
                    f.keepalive_idle += 1;
                    if f.keepalive_idle >= d {
                        f.loaded = false;
                    }
                }
                continue;
            }
            if !f.active {
                if !inv[i] {
                    continue;
                }
                f.active = true;
                if spes.provision.online_corr {
                    f.tracker = Some(NaiveTracker {
                        target_count: 0,
                        co: HashMap::new(),
                        active: HashMap::new(),
                        max: 0.0,
                    });
                }
            }
            if inv[i] {
                if f.last.is_some() && f.idle_run > 0 {
                    f.wts.push(f.idle_run);
                }
                f.last = Some(t);
                f.idle_run = 0;
                if spes.provision.adjusting {
                    f.adjust(spes);
                }
                if !f.loaded {
                    cold.insert(i);
                    f.loaded = true;
                }
            } else {
                f.idle_run += 1;
                if f.category != FunctionCategory::AlwaysWarm {
                    if f.wants_preload(
                        t,
                        spes.provision.theta_prewarm,
                        spes.classifier.possible_range_limit,
                        &recent,
                    ) {
                        f.loaded = true;
                    } else if f.idle_run >= f.givenup {
                        f.loaded = false;
                    }
                }
            }
            if let Some(tr) = &mut f.tracker {
                let candidates: Vec<usize> = (0..n)
                    .filter(|&j| j != i && triggers[j] == triggers[i])
                    .collect();
                if inv[i] {
                    tr.target_count += 1;
                    for &j in &candidates {
                        if inv[j] {
                            *tr.co.entry(j).or_default() += 1;
                        }
                    }
                    let cor =
                        |j: usize| *tr.co.get(&j).unwrap_or(&0) as f64 / tr.target_count as f64;
                    for &j in &candidates {
                        tr.max = tr.max.max(cor(j));
                    }
                    let mut next = HashMap::new();
                    for &j in &candidates {
                        let was = *tr.active.get(&j).unwrap_or(&true);
                        let gap = tr.max - cor(j);
                        let now = if was {
                            gap <= spes.provision.deactivation_gap
                        } else {
                            gap <= spes.provision.reactivation_gap
                        };
                        next.insert(j, now);
                    }
                    tr.active = next;
                }
                if candidates
                    .iter()
                    .any(|&j| inv[j] && *tr.active.get(&j).unwrap_or(&true))
                {
                    f.loaded = true;
                }
            }
        }
        let loaded = fns.iter().filter(|f| f.loaded).count();
        let used = (0..n).filter(|&i| fns[i].loaded && inv[i]).count();
        for i in 0..n {
            if fns[i].loaded && !inv[i] {
                wmt[i] += 1;
            }
        }
        for &i in &cold {
            cold_starts[i] += 1;
        }
        if loaded > 0 {
            ratio_sum += used as f64 / loaded as f64;
            ratio_n += 1;
        }
        cold_sets.push(cold);
    }
    NaiveResult {
        cold_sets,
        wmt,
        cold_starts,
        emcr: (ratio_n > 0).then(|| ratio_sum / ratio_n as f64),
    }
}
