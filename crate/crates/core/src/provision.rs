//! The slot-by-slot provisioning engine.
//!
//! Each slot the engine applies invocations (cold start or warm hit), then
//! decides for every idle function whether to evict, keep, or pre-load it.
//! The set of loaded functions at the end of a slot is what counts as
//! resident for that minute.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::FunctionCategory;
use crate::config::SpesConfig;
use crate::correlation::OnlineCorrelationTracker;
use crate::error::{Error, Result};
use crate::predictor::FunctionProfile;
use crate::trace_store::TriggerType;

/// Functions per slot above which per-function work is spread over threads.
const PARALLEL_THRESHOLD: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyKind {
    Spes(SpesConfig),
    /// Keep every function loaded for `minutes` idle minutes after an invocation.
    FixedKeepAlive {
        minutes: u32,
    },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Spes(_) => "spes",
            PolicyKind::FixedKeepAlive { .. } => "fixed_keepalive",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyKind::Spes(cfg) => cfg.validate(),
            PolicyKind::FixedKeepAlive { minutes: 0 } => Err(Error::Config(
                "keep-alive minutes must be at least 1".into(),
            )),
            PolicyKind::FixedKeepAlive { .. } => Ok(()),
        }
    }
}

/// How the engine treats one function.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Provisioning {
    /// Categorized from training data.
    Known(FunctionProfile),
    /// No training history; a profile is created at the first invocation.
    Unseen,
    /// Present only as an indicator for other functions; never provisioned.
    ObserveOnly,
}

pub struct EngineFunction<'a> {
    pub function_id: String,
    pub trigger: TriggerType,
    pub counts: &'a [u32],
    pub provisioning: Provisioning,
}

/// What changed in one slot, as indices into [`Engine::function_ids`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SlotDecision {
    pub slot: u64,
    /// Every function that became resident, including cold starts.
    pub loads: Vec<usize>,
    pub evictions: Vec<usize>,
    pub cold_starts: Vec<usize>,
    pub warm_hits: Vec<usize>,
}

impl SlotDecision {
    /// Loads that were not caused by an invocation.
    pub fn preloads(&self) -> impl Iterator<Item = usize> + '_ {
        self.loads
            .iter()
            .copied()
            .filter(|i| self.cold_starts.binary_search(i).is_err())
    }
}

/// The set of resident functions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemSet {
    loaded: Vec<bool>,
    count: usize,
}

impl MemSet {
    pub fn contains(&self, i: usize) -> bool {
        self.loaded.get(i).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.loaded
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Nothing,
    Cold,
    Warm,
    Preload,
    Evict,
}

struct FnState {
    provisioning: Provisioning,
    /// Engine indices of the indicators behind the profile's links.
    link_targets: Vec<Option<usize>>,
    tracker: Option<OnlineCorrelationTracker<usize>>,
    loaded: bool,
    idle: u32,
}

enum Policy {
    Spes(SpesConfig),
    KeepAlive(u32),
}

/// Read-only view of the current slot shared by all per-function steps.
struct SlotView<'s> {
    t: u64,
    offset: usize,
    counts: &'s [&'s [u32]],
    triggers: &'s [TriggerType],
    ids: &'s [String],
    invoked: &'s [usize],
    recent: &'s [Option<u64>],
}

pub struct Engine<'a> {
    policy: Policy,
    ids: Vec<String>,
    triggers: Vec<TriggerType>,
    counts: Vec<&'a [u32]>,
    states: Vec<FnState>,
    recent: Vec<Option<u64>>,
    origin: u64,
    window: usize,
    cursor: usize,
    initial: Vec<usize>,
}

impl<'a> Engine<'a> {
    /// Build an engine over `window` slots starting at absolute slot `origin`.
    /// Functions are ordered by id.
    pub fn new(
        policy: &PolicyKind,
        mut functions: Vec<EngineFunction<'a>>,
        origin: u64,
        window: usize,
    ) -> Result<Self> {
        policy.validate()?;
        functions.sort_by(|a, b| a.function_id.cmp(&b.function_id));
        if let Some(w) = functions
            .windows(2)
            .find(|w| w[0].function_id == w[1].function_id)
        {
            return Err(Error::InvalidDataset(format!(
                "duplicate function id {}",
                w[0].function_id
            )));
        }
        if let Some(f) = functions.iter().find(|f| f.counts.len() != window) {
            return Err(Error::LengthMismatch(f.counts.len(), window));
        }
        let index: HashMap<&str, usize> = functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.function_id.as_str(), i))
            .collect();
        let policy = match policy {
            PolicyKind::Spes(cfg) => Policy::Spes(cfg.clone()),
            PolicyKind::FixedKeepAlive { minutes } => Policy::KeepAlive(*minutes),
        };
        let mut states = Vec::with_capacity(functions.len());
        let mut initial = vec![];
        for (i, f) in functions.iter().enumerate() {
            let link_targets = match &f.provisioning {
                Provisioning::Known(p) => p
                    .links
                    .iter()
                    .map(|l| index.get(l.indicator_id.as_str()).copied())
                    .collect(),
                _ => vec![],
            };
            let loaded = match (&policy, &f.provisioning) {
                (Policy::Spes(cfg), Provisioning::Known(p)) => {
                    cfg.provision.carry_warm && p.category == FunctionCategory::AlwaysWarm
                }
                _ => false,
            };
            if loaded {
                initial.push(i);
            }
            states.push(FnState {
                provisioning: f.provisioning.clone(),
                link_targets,
                tracker: None,
                loaded,
                idle: 0,
            });
        }
        let ids = functions.iter().map(|f| f.function_id.clone()).collect();
        let triggers = functions.iter().map(|f| f.trigger).collect();
        let counts = functions.iter().map(|f| f.counts).collect();
        let n = states.len();
        Ok(Engine {
            policy,
            ids,
            triggers,
            counts,
            states,
            recent: vec![None; n],
            origin,
            window,
            cursor: 0,
            initial,
        })
    }

    pub fn function_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, function_id: &str) -> Option<usize> {
        self.ids
            .binary_search_by(|id| id.as_str().cmp(function_id))
            .ok()
    }

    /// Functions resident before the first slot.
    pub fn initial_mem(&self) -> &[usize] {
        &self.initial
    }

    pub fn mem(&self) -> MemSet {
        let loaded: Vec<bool> = self.states.iter().map(|s| s.loaded).collect();
        let count = loaded.iter().filter(|&&l| l).count();
        MemSet { loaded, count }
    }

    pub fn is_loaded(&self, i: usize) -> bool {
        self.states[i].loaded
    }

    pub fn counts(&self, i: usize) -> &'a [u32] {
        self.counts[i]
    }

    pub fn origin(&self) -> u64 {
        self.origin
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn profile(&self, i: usize) -> Option<&FunctionProfile> {
        match &self.states[i].provisioning {
            Provisioning::Known(p) => Some(p),
            _ => None,
        }
    }

    /// Profiles of every provisioned function that has one, by index.
    pub fn profiles(&self) -> impl Iterator<Item = (usize, &FunctionProfile)> {
        (0..self.states.len()).filter_map(|i| self.profile(i).map(|p| (i, p)))
    }

    fn step_slot(&mut self) -> Option<SlotDecision> {
        if self.cursor >= self.window {
            return None;
        }
        let offset = self.cursor;
        let t = self.origin + offset as u64;
        let invoked: Vec<usize> = (0..self.counts.len())
            .filter(|&i| self.counts[i][offset] > 0)
            .collect();
        for &i in &invoked {
            self.recent[i] = Some(t);
        }
        let view = SlotView {
            t,
            offset,
            counts: &self.counts,
            triggers: &self.triggers,
            ids: &self.ids,
            invoked: &invoked,
            recent: &self.recent,
        };
        let policy = &self.policy;
        let step = |(i, st): (usize, &mut FnState)| match policy {
            Policy::Spes(cfg) => spes_step(i, st, &view, cfg),
            Policy::KeepAlive(d) => keepalive_step(i, st, &view, *d),
        };
        let outcomes: Vec<Outcome> =
            if self.states.len() >= PARALLEL_THRESHOLD && rayon::current_num_threads() > 1 {
                self.states.par_iter_mut().enumerate().map(step).collect()
            } else {
                self.states.iter_mut().enumerate().map(step).collect()
            };
        let mut d = SlotDecision {
            slot: t,
            ..Default::default()
        };
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Outcome::Nothing => {}
                Outcome::Cold => {
                    d.cold_starts.push(i);
                    d.loads.push(i);
                }
                Outcome::Warm => d.warm_hits.push(i),
                Outcome::Preload => d.loads.push(i),
                Outcome::Evict => d.evictions.push(i),
            }
        }
        self.cursor += 1;
        Some(d)
    }
}

impl Iterator for Engine<'_> {
    type Item = SlotDecision;

    fn next(&mut self) -> Option<SlotDecision> {
        self.step_slot()
    }
}

fn spes_step(i: usize, st: &mut FnState, v: &SlotView<'_>, cfg: &SpesConfig) -> Outcome {
    let invoked = v.counts[i][v.offset] > 0;
    if matches!(st.provisioning, Provisioning::ObserveOnly) {
        return Outcome::Nothing;
    }
    if matches!(st.provisioning, Provisioning::Unseen) {
        if !invoked {
            return Outcome::Nothing;
        }
        st.provisioning = Provisioning::Known(FunctionProfile::unseen(
            v.ids[i].clone(),
            &cfg.provision.theta_givenup,
        ));
        if cfg.provision.online_corr {
            st.tracker = Some(OnlineCorrelationTracker::new(
                i,
                v.triggers[i],
                cfg.provision.deactivation_gap,
                cfg.provision.reactivation_gap,
            ));
        }
    }
    let Provisioning::Known(p) = &mut st.provisioning else {
        unreachable!()
    };
    let was_loaded = st.loaded;
    if invoked {
        p.on_invoked(v.t, cfg);
        if !st.loaded {
            p.cold_starts += 1;
            st.loaded = true;
        }
    } else {
        p.current_wt = p.current_wt.saturating_add(1);
        if p.category != FunctionCategory::AlwaysWarm {
            let links = &st.link_targets;
            let preload = p.should_preload(
                v.t,
                cfg.provision.theta_prewarm,
                cfg.classifier.possible_range_limit,
                |k| links.get(k).copied().flatten().and_then(|j| v.recent[j]),
            );
            if preload {
                st.loaded = true;
            } else if p.current_wt >= p.theta_givenup {
                st.loaded = false;
            }
        }
    }
    if let Some(tr) = &mut st.tracker {
        if tr.update(v.invoked.iter().map(|j| (j, v.triggers[*j])), invoked) {
            st.loaded = true;
        }
    }
    outcome(invoked, was_loaded, st.loaded)
}

fn keepalive_step(i: usize, st: &mut FnState, v: &SlotView<'_>, minutes: u32) -> Outcome {
    if matches!(st.provisioning, Provisioning::ObserveOnly) {
        return Outcome::Nothing;
    }
    let invoked = v.counts[i][v.offset] > 0;
    let was_loaded = st.loaded;
    if invoked {
        st.idle = 0;
        st.loaded = true;
    } else if st.loaded {
        st.idle += 1;
        if st.idle >= minutes {
            st.loaded = false;
        }
    }
    outcome(invoked, was_loaded, st.loaded)
}

fn outcome(invoked: bool, was_loaded: bool, loaded: bool) -> Outcome {
    match (invoked, was_loaded, loaded) {
        (true, false, _) => Outcome::Cold,
        (true, true, _) => Outcome::Warm,
        (false, false, true) => Outcome::Preload,
        (false, true, false) => Outcome::Evict,
        _ => Outcome::Nothing,
    }
}

/// Replay one function over a window with a fixed profile and return its
/// (cold starts, wasted memory minutes). `indicators` are observed only.
pub fn evaluate_single(
    profile: FunctionProfile,
    trigger: TriggerType,
    counts: &[u32],
    indicators: &[(String, TriggerType, &[u32])],
    cfg: &SpesConfig,
    origin: u64,
) -> Result<(u64, u64)> {
    let target_id = profile.function_id.clone();
    let mut functions = vec![EngineFunction {
        function_id: target_id.clone(),
        trigger,
        counts,
        provisioning: Provisioning::Known(profile),
    }];
    for (id, trig, c) in indicators {
        if *id != target_id {
            functions.push(EngineFunction {
                function_id: id.clone(),
                trigger: *trig,
                counts: c,
                provisioning: Provisioning::ObserveOnly,
            });
        }
    }
    let mut engine = Engine::new(
        &PolicyKind::Spes(cfg.clone()),
        functions,
        origin,
        counts.len(),
    )?;
    let target = engine.position(&target_id).expect("target is present");
    let (mut cold, mut wasted) = (0, 0);
    let mut offset = 0;
    while let Some(d) = engine.next() {
        if d.cold_starts.binary_search(&target).is_ok() {
            cold += 1;
        }
        if engine.is_loaded(target) && counts[offset] == 0 {
            wasted += 1;
        }
        offset += 1;
    }
    Ok((cold, wasted))
}

/// Writes `slot,function_id,event` rows.
pub struct DecisionLogWriter<W: Write> {
    inner: W,
}

impl DecisionLogWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        DecisionLogWriter::new(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }
}

impl<W: Write> DecisionLogWriter<W> {
    pub fn new(mut inner: W) -> std::io::Result<Self> {
        writeln!(inner, "slot,function_id,event")?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, d: &SlotDecision, ids: &[String]) -> std::io::Result<()> {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        rows.extend(d.cold_starts.iter().map(|&i| (i, "cold_start")));
        rows.extend(d.warm_hits.iter().map(|&i| (i, "warm_hit")));
        rows.extend(d.preloads().map(|i| (i, "preload")));
        rows.extend(d.evictions.iter().map(|&i| (i, "evict")));
        rows.sort_unstable();
        for (i, event) in rows {
            writeln!(self.inner, "{},{},{}", d.slot, ids[i], event)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}
