//! Simulation driver, cold-start and memory accounting, reports and sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{categorize_all, Categorization, FunctionCategory};
use crate::config::{CsrDenominator, EmcrMode, MetricsConfig, SimConfig, SpesConfig};
use crate::error::{Error, Result};
use crate::predictor::FunctionProfile;
use crate::provision::{Engine, EngineFunction, PolicyKind, Provisioning, SlotDecision};
use crate::timing::percentile;
use crate::trace_store::TraceDataset;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionAccount {
    pub invocations: u64,
    pub invoked_slots: u64,
    pub cold_starts: u64,
    pub loaded_minutes: u64,
    pub invoked_loaded_minutes: u64,
}

impl FunctionAccount {
    pub fn wmt(&self) -> u64 {
        self.loaded_minutes - self.invoked_loaded_minutes
    }
}

/// Folds slot decisions into per-function and per-slot counters. Residency
/// is tracked as load/evict timestamps, so work per slot is proportional to
/// the number of changes.
#[derive(Debug, Clone)]
pub struct SimAccumulator {
    functions: Vec<FunctionAccount>,
    loaded_since: Vec<Option<u64>>,
    loaded_count: u32,
    loaded_per_slot: Vec<u32>,
    invoked_loaded_per_slot: Vec<u32>,
    next_slot: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accounts {
    pub functions: Vec<FunctionAccount>,
    pub loaded_per_slot: Vec<u32>,
    pub invoked_loaded_per_slot: Vec<u32>,
}

impl SimAccumulator {
    /// `initial` are the functions resident before `first_slot`.
    pub fn new(n: usize, initial: &[usize], first_slot: u64) -> Self {
        let mut loaded_since = vec![None; n];
        for &i in initial {
            loaded_since[i] = Some(first_slot);
        }
        SimAccumulator {
            functions: vec![FunctionAccount::default(); n],
            loaded_since,
            loaded_count: initial.len() as u32,
            loaded_per_slot: vec![],
            invoked_loaded_per_slot: vec![],
            next_slot: first_slot,
        }
    }

    /// `count(i)` is function `i`'s invocation count in the decision's slot.
    pub fn observe(&mut self, d: &SlotDecision, count: impl Fn(usize) -> u32) {
        for &i in &d.evictions {
            let since = self.loaded_since[i]
                .take()
                .expect("evicted function was loaded");
            self.functions[i].loaded_minutes += d.slot - since;
            self.loaded_count -= 1;
        }
        for &i in &d.loads {
            debug_assert!(self.loaded_since[i].is_none());
            self.loaded_since[i] = Some(d.slot);
            self.loaded_count += 1;
        }
        for &i in d.cold_starts.iter().chain(&d.warm_hits) {
            let f = &mut self.functions[i];
            f.invoked_slots += 1;
            f.invocations += u64::from(count(i));
            f.invoked_loaded_minutes += 1;
        }
        for &i in &d.cold_starts {
            self.functions[i].cold_starts += 1;
        }
        self.loaded_per_slot.push(self.loaded_count);
        self.invoked_loaded_per_slot
            .push((d.cold_starts.len() + d.warm_hits.len()) as u32);
        self.next_slot = d.slot + 1;
    }

    pub fn finish(mut self) -> Accounts {
        for (f, since) in self.functions.iter_mut().zip(&self.loaded_since) {
            if let Some(s) = since {
                f.loaded_minutes += self.next_slot - s;
            }
        }
        Accounts {
            functions: self.functions,
            loaded_per_slot: self.loaded_per_slot,
            invoked_loaded_per_slot: self.invoked_loaded_per_slot,
        }
    }
}

/// Cold starts over the configured denominator; `None` for uninvoked functions.
pub fn csr(f: &FunctionAccount, denominator: CsrDenominator) -> Option<f64> {
    let n = match denominator {
        CsrDenominator::InvokedSlots => f.invoked_slots,
        CsrDenominator::InvocationCount => f.invocations,
    };
    (n > 0).then(|| f.cold_starts as f64 / n as f64)
}

/// Effective memory consumption: invoked over loaded instances, averaged over
/// slots with something loaded (macro) or pooled over all slots.
pub fn emcr(acc: &Accounts, mode: EmcrMode) -> Option<f64> {
    let pairs = acc
        .loaded_per_slot
        .iter()
        .zip(&acc.invoked_loaded_per_slot)
        .filter(|(&l, _)| l > 0);
    match mode {
        EmcrMode::Macro => {
            let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (&l, &i)| {
                (s + f64::from(i) / f64::from(l), n + 1)
            });
            (n > 0).then(|| sum / n as f64)
        }
        EmcrMode::Pooled => {
            let (inv, loaded) = pairs.fold((0u64, 0u64), |(a, b), (&l, &i)| {
                (a + u64::from(i), b + u64::from(l))
            });
            (loaded > 0).then(|| inv as f64 / loaded as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionMetrics {
    pub function_id: String,
    pub category: Option<FunctionCategory>,
    pub invocations: u64,
    pub invoked_slots: u64,
    pub cold_starts: u64,
    pub csr: f64,
    pub wmt: u64,
    pub loaded_minutes: u64,
}

/// Nearest-rank quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            count: v.len(),
            min: *v.first()?,
            q1: percentile(&v, 25.0).ok()?,
            median: percentile(&v, 50.0).ok()?,
            q3: percentile(&v, 75.0).ok()?,
            max: *v.last()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub functions: usize,
    pub mean_csr: f64,
    pub wmt_ratio: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub functions_total: usize,
    pub functions_invoked: usize,
    pub total_invocations: u64,
    pub total_invoked_slots: u64,
    pub total_cold_starts: u64,
    pub csr_mean: Option<f64>,
    pub csr_p50: Option<f64>,
    pub csr_q3: Option<f64>,
    pub csr_p90: Option<f64>,
    pub zero_cold_fraction: Option<f64>,
    pub always_cold_fraction: Option<f64>,
    pub total_wmt: u64,
    pub total_loaded_minutes: u64,
    pub emcr: Option<f64>,
    /// Mean resident instances per slot.
    pub mean_memory_usage: f64,
    pub peak_memory_usage: u32,
    pub per_type: BTreeMap<FunctionCategory, TypeBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub policy: String,
    pub parameters: PolicyKind,
    pub metrics: MetricsConfig,
    pub seed: Option<u64>,
    pub sim_origin_minute: u64,
    pub sim_slots: usize,
    pub functions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub metadata: RunMetadata,
    pub aggregates: Aggregates,
    /// Functions invoked at least once in the simulation window.
    pub functions: Vec<FunctionMetrics>,
    pub loaded_per_slot: Vec<u32>,
    /// Kept out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl SimReport {
    /// Q3 of per-function CSR.
    pub fn q3_csr(&self) -> Option<f64> {
        self.aggregates.csr_q3
    }
}

/// Per-function WMT per invoked slot, grouped by category.
pub fn wmt_ratio_by_type(report: &SimReport) -> BTreeMap<FunctionCategory, Quartiles> {
    let mut groups: BTreeMap<FunctionCategory, Vec<f64>> = BTreeMap::new();
    for f in &report.functions {
        if let (Some(c), true) = (f.category, f.invoked_slots > 0) {
            groups
                .entry(c)
                .or_default()
                .push(f.wmt as f64 / f.invoked_slots as f64);
        }
    }
    groups
        .into_iter()
        .filter_map(|(c, v)| Some((c, Quartiles::of(&v)?)))
        .collect()
}

fn build_report(
    acc: Accounts,
    ids: &[String],
    categories: &[Option<FunctionCategory>],
    metadata: RunMetadata,
    metrics: &MetricsConfig,
) -> SimReport {
    let functions: Vec<FunctionMetrics> = acc
        .functions
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            Some(FunctionMetrics {
                function_id: ids[i].clone(),
                category: categories[i],
                invocations: f.invocations,
                invoked_slots: f.invoked_slots,
                cold_starts: f.cold_starts,
                csr: csr(f, metrics.csr_denominator)?,
                wmt: f.wmt(),
                loaded_minutes: f.loaded_minutes,
            })
        })
        .collect();
    let csrs: Vec<f64> = {
        let mut v: Vec<f64> = functions.iter().map(|f| f.csr).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let fraction = |n: usize| (!csrs.is_empty()).then(|| n as f64 / csrs.len() as f64);
    let mut per_type_csr: BTreeMap<FunctionCategory, Vec<f64>> = BTreeMap::new();
    for f in &functions {
        if let Some(c) = f.category {
            per_type_csr.entry(c).or_default().push(f.csr);
        }
    }
    let mut ratios = wmt_ratio_by_type(&SimReport {
        metadata: metadata.clone(),
        aggregates: empty_aggregates(),
        functions: functions.clone(),
        loaded_per_slot: vec![],
        wall_clock: Duration::ZERO,
    });
    let per_type = per_type_csr
        .into_iter()
        .filter_map(|(c, v)| {
            Some((
                c,
                TypeBreakdown {
                    functions: v.len(),
                    mean_csr: v.iter().sum::<f64>() / v.len() as f64,
                    wmt_ratio: ratios.remove(&c)?,
                },
            ))
        })
        .collect();
    let slots = acc.loaded_per_slot.len();
    let aggregates = Aggregates {
        functions_total: ids.len(),
        functions_invoked: functions.len(),
        total_invocations: acc.functions.iter().map(|f| f.invocations).sum(),
        total_invoked_slots: acc.functions.iter().map(|f| f.invoked_slots).sum(),
        total_cold_starts: acc.functions.iter().map(|f| f.cold_starts).sum(),
        csr_mean: (!csrs.is_empty()).then(|| csrs.iter().sum::<f64>() / csrs.len() as f64),
        csr_p50: percentile(&csrs, 50.0).ok(),
        csr_q3: percentile(&csrs, 75.0).ok(),
        csr_p90: percentile(&csrs, 90.0).ok(),
        zero_cold_fraction: fraction(functions.iter().filter(|f| f.cold_starts == 0).count()),
        always_cold_fraction: fraction(
            functions
                .iter()
                .filter(|f| f.cold_starts == f.invoked_slots)
                .count(),
        ),
        total_wmt: acc.functions.iter().map(FunctionAccount::wmt).sum(),
        total_loaded_minutes: acc.functions.iter().map(|f| f.loaded_minutes).sum(),
        emcr: emcr(&acc, metrics.emcr),
        mean_memory_usage: if slots == 0 {
            0.0
        } else {
            acc.loaded_per_slot
                .iter()
                .map(|&l| u64::from(l))
                .sum::<u64>() as f64
                / slots as f64
        },
        peak_memory_usage: acc.loaded_per_slot.iter().copied().max().unwrap_or(0),
        per_type,
    };
    SimReport {
        metadata,
        aggregates,
        functions,
        loaded_per_slot: acc.loaded_per_slot,
        wall_clock: Duration::ZERO,
    }
}

fn empty_aggregates() -> Aggregates {
    Aggregates {
        functions_total: 0,
        functions_invoked: 0,
        total_invocations: 0,
        total_invoked_slots: 0,
        total_cold_starts: 0,
        csr_mean: None,
        csr_p50: None,
        csr_q3: None,
        csr_p90: None,
        zero_cold_fraction: None,
        always_cold_fraction: None,
        total_wmt: 0,
        total_loaded_minutes: 0,
        emcr: None,
        mean_memory_usage: 0.0,
        peak_memory_usage: 0,
        per_type: BTreeMap::new(),
    }
}

/// Runtime profiles for every function categorized from training data.
pub fn build_profiles(
    categorization: &Categorization,
    cfg: &SpesConfig,
) -> BTreeMap<String, FunctionProfile> {
    categorization
        .functions
        .iter()
        .filter(|(_, cf)| cf.seen)
        .map(|(id, cf)| {
            (
                id.clone(),
                FunctionProfile::from_categorized(cf, &cfg.provision.theta_givenup),
            )
        })
        .collect()
}

pub struct SimRun {
    pub report: SimReport,
    /// Final profiles of provisioned functions, by id.
    pub profiles: Vec<FunctionProfile>,
}

/// Callback receiving each slot decision with the engine's function ids.
pub type DecisionSink<'s> = &'s mut dyn FnMut(&SlotDecision, &[String]) -> Result<()>;

/// Replay `sim_ds` under `policy`. SPES needs the training categorization.
pub fn simulate(
    categorization: Option<&Categorization>,
    sim_ds: &TraceDataset,
    policy: &PolicyKind,
    cfg: &SimConfig,
    sink: Option<DecisionSink<'_>>,
) -> Result<SimRun> {
    let profiles = match (policy, categorization) {
        (PolicyKind::Spes(spes), Some(c)) => build_profiles(c, spes),
        (PolicyKind::Spes(_), None) => {
            return Err(Error::Config(
                "the spes policy needs a categorization".into(),
            ));
        }
        (PolicyKind::FixedKeepAlive { .. }, _) => BTreeMap::new(),
    };
    simulate_profiles(profiles, sim_ds, policy, cfg, sink)
}

/// Replay `sim_ds` with explicit starting profiles. Functions without a
/// profile are treated as unseen.
pub fn simulate_profiles(
    mut profiles: BTreeMap<String, FunctionProfile>,
    sim_ds: &TraceDataset,
    policy: &PolicyKind,
    cfg: &SimConfig,
    mut sink: Option<DecisionSink<'_>>,
) -> Result<SimRun> {
    let started = Instant::now();
    let functions: Vec<EngineFunction<'_>> = sim_ds
        .iter()
        .map(|(meta, series)| EngineFunction {
            function_id: meta.function_id.clone(),
            trigger: meta.trigger,
            counts: &series.counts,
            provisioning: match profiles.remove(&meta.function_id) {
                Some(p) => Provisioning::Known(p),
                None => Provisioning::Unseen,
            },
        })
        .collect();
    let mut engine = Engine::new(policy, functions, sim_ds.origin_minute(), sim_ds.window())?;
    let mut acc = SimAccumulator::new(
        engine.function_ids().len(),
        engine.initial_mem(),
        sim_ds.origin_minute(),
    );
    let mut offset = 0;
    while let Some(d) = engine.next() {
        acc.observe(&d, |i| engine.counts(i)[offset]);
        if let Some(sink) = sink.as_mut() {
            sink(&d, engine.function_ids())?;
        }
        offset += 1;
    }
    let ids = engine.function_ids().to_vec();
    let categories: Vec<Option<FunctionCategory>> = (0..ids.len())
        .map(|i| engine.profile(i).map(|p| p.category))
        .collect();
    let metadata = RunMetadata {
        policy: policy.name().into(),
        parameters: policy.clone(),
        metrics: cfg.metrics,
        seed: cfg.seed,
        sim_origin_minute: sim_ds.origin_minute(),
        sim_slots: sim_ds.window(),
        functions: ids.len(),
    };
    let mut report = build_report(acc.finish(), &ids, &categories, metadata, &cfg.metrics);
    report.wall_clock = started.elapsed();
    let profiles = engine.profiles().map(|(_, p)| p.clone()).collect();
    Ok(SimRun { report, profiles })
}

/// Run `f` on a pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Categorize on `train_ds` (SPES only) and replay `sim_ds` under `policy`.
pub fn run_simulation(
    train_ds: &TraceDataset,
    sim_ds: &TraceDataset,
    policy: &PolicyKind,
    cfg: &SimConfig,
) -> Result<SimReport> {
    let started = Instant::now();
    with_workers(cfg.workers, || {
        let categorization = match policy {
            PolicyKind::Spes(spes) => Some(categorize_all(train_ds, spes)?),
            PolicyKind::FixedKeepAlive { .. } => None,
        };
        let mut run = simulate(categorization.as_ref(), sim_ds, policy, cfg, None)?;
        run.report.wall_clock = started.elapsed();
        Ok(run.report)
    })?
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub theta_prewarm: Vec<u32>,
    pub givenup_multipliers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta_prewarm: u32,
    pub givenup_multiplier: u32,
    pub q3_csr: Option<f64>,
    /// Mean memory usage over that of the unmodified configuration.
    pub normalized_memory: Option<f64>,
    pub total_wmt: u64,
    pub total_cold_starts: u64,
    pub mean_memory_usage: f64,
}

/// One SPES simulation per grid point, on a categorization computed once
/// with `cfg`. Rows are ordered by prewarm window, then multiplier.
pub fn sweep(
    train_ds: &TraceDataset,
    sim_ds: &TraceDataset,
    grid: &SweepGrid,
    cfg: &SimConfig,
) -> Result<Vec<SweepRow>> {
    with_workers(cfg.workers, || {
        let categorization = categorize_all(train_ds, &cfg.spes)?;
        sweep_categorized(&categorization, sim_ds, grid, cfg)
    })?
}

pub fn sweep_categorized(
    categorization: &Categorization,
    sim_ds: &TraceDataset,
    grid: &SweepGrid,
    cfg: &SimConfig,
) -> Result<Vec<SweepRow>> {
    if grid.theta_prewarm.is_empty() || grid.givenup_multipliers.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if grid.givenup_multipliers.contains(&0) {
        return Err(Error::Config("give-up multipliers must be positive".into()));
    }
    let base = cfg.spes.provision.theta_prewarm;
    let mut points: Vec<(u32, u32)> = grid
        .theta_prewarm
        .iter()
        .flat_map(|&t| grid.givenup_multipliers.iter().map(move |&m| (t, m)))
        .collect();
    let baseline_listed = points.contains(&(base, 1));
    if !baseline_listed {
        points.push((base, 1));
    }
    let results = points
        .par_iter()
        .map(|&(theta, mult)| {
            let mut spes = cfg.spes.clone();
            spes.provision.theta_prewarm = theta;
            spes.provision.theta_givenup = spes.provision.theta_givenup.scaled(mult);
            let run = simulate(
                Some(categorization),
                sim_ds,
                &PolicyKind::Spes(spes),
                cfg,
                None,
            )?;
            Ok(run.report.aggregates)
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = results[points
        .iter()
        .position(|&p| p == (base, 1))
        .expect("baseline present")]
    .mean_memory_usage;
    let n = if baseline_listed {
        points.len()
    } else {
        points.len() - 1
    };
    Ok(points[..n]
        .iter()
        .zip(&results)
        .map(|(&(theta, mult), a)| SweepRow {
            theta_prewarm: theta,
            givenup_multiplier: mult,
            q3_csr: a.csr_q3,
            normalized_memory: (baseline > 0.0).then(|| a.mean_memory_usage / baseline),
            total_wmt: a.total_wmt,
            total_cold_starts: a.total_cold_starts,
            mean_memory_usage: a.mean_memory_usage,
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "theta_prewarm",
        "givenup_multiplier",
        "q3_csr",
        "normalized_memory",
        "total_wmt",
    ])?;
    for r in rows {
        w.write_record([
            r.theta_prewarm.to_string(),
            r.givenup_multiplier.to_string(),
            opt(r.q3_csr),
            opt(r.normalized_memory),
            r.total_wmt.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    metadata: &'a RunMetadata,
    aggregates: &'a Aggregates,
}

/// Write `report.json`, `per_function.csv` and `csr_cdf.csv` into `dir`.
pub fn export_report(report: &SimReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let json_path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&ReportFile {
        metadata: &report.metadata,
        aggregates: &report.aggregates,
    })?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let path = dir.join("per_function.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "function_id",
        "category",
        "invocations",
        "cold_starts",
        "csr",
        "wmt",
        "loaded_minutes",
    ])?;
    for f in &report.functions {
        w.write_record([
            f.function_id.clone(),
            f.category
                .map(|c| c.as_str().to_string())
                .unwrap_or_default(),
            f.invocations.to_string(),
            f.cold_starts.to_string(),
            f.csr.to_string(),
            f.wmt.to_string(),
            f.loaded_minutes.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("csr_cdf.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["csr", "cum_fraction"])?;
    for (x, y) in csr_cdf(report) {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// `(csr, fraction of invoked functions with CSR ≤ csr)` at each distinct CSR.
pub fn csr_cdf(report: &SimReport) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = report.functions.iter().map(|f| f.csr).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let y = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = y,
            _ => out.push((x, y)),
        }
    }
    out
}

/// Write wall-clock timing next to a report.
pub fn write_run_timing(report: &SimReport, dir: impl AsRef<Path>) -> Result<()> {
    let path = dir.as_ref().join("run_timing.json");
    let body = serde_json::json!({ "wall_clock_seconds": report.wall_clock.as_secs_f64() });
    fs::write(&path, format!("{body:#}\n")).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(
        slot: u64,
        loads: &[usize],
        evictions: &[usize],
        cold: &[usize],
        warm: &[usize],
    ) -> SlotDecision {
        SlotDecision {
            slot,
            loads: loads.to_vec(),
            evictions: evictions.to_vec(),
            cold_starts: cold.to_vec(),
            warm_hits: warm.to_vec(),
        }
    }

    #[test]
    fn accumulator_identity_and_emcr() {
        // f0: cold at 0, warm at 1, idle at 2, evicted at 3.
        // f1: preloaded at 1, cold never, warm at 2, resident to the end (slot 4).
        let mut acc = SimAccumulator::new(2, &[], 0);
        acc.observe(&decision(0, &[0], &[], &[0], &[]), |_| 1);
        acc.observe(&decision(1, &[1], &[], &[], &[0]), |_| 2);
        acc.observe(&decision(2, &[], &[], &[], &[1]), |_| 1);
        acc.observe(&decision(3, &[], &[0], &[], &[]), |_| 0);
        let a = acc.finish();
        assert_eq!(
            a.functions[0],
            FunctionAccount {
                invocations: 3,
                invoked_slots: 2,
                cold_starts: 1,
                loaded_minutes: 3,
                invoked_loaded_minutes: 2
            }
        );
        assert_eq!(
            a.functions[1],
            FunctionAccount {
                invocations: 1,
                invoked_slots: 1,
                cold_starts: 0,
                loaded_minutes: 3,
                invoked_loaded_minutes: 1
            }
        );
        assert_eq!(a.loaded_per_slot, vec![1, 2, 2, 1]);
        assert_eq!(a.invoked_loaded_per_slot, vec![1, 1, 1, 0]);
        let macro_ = (1.0 + 0.5 + 0.5 + 0.0) / 4.0;
        assert_eq!(emcr(&a, EmcrMode::Macro), Some(macro_));
        assert_eq!(emcr(&a, EmcrMode::Pooled), Some(3.0 / 6.0));
        assert_eq!(
            csr(&a.functions[0], CsrDenominator::InvokedSlots),
            Some(0.5)
        );
        assert_eq!(
            csr(&a.functions[0], CsrDenominator::InvocationCount),
            Some(1.0 / 3.0)
        );
        assert_eq!(
            csr(&FunctionAccount::default(), CsrDenominator::InvokedSlots),
            None
        );
    }

    #[test]
    fn emcr_not_applicable_without_loads() {
        let acc = SimAccumulator::new(1, &[], 0);
        assert_eq!(emcr(&acc.finish(), EmcrMode::Macro), None);
    }

    #[test]
    fn quartiles_nearest_rank() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(
            (q.min, q.q1, q.median, q.q3, q.max),
            (1.0, 1.0, 2.0, 3.0, 4.0)
        );
        assert!(Quartiles::of(&[]).is_none());
    }
}
