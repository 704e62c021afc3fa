mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spes_core::classifier::categorize_all;
use spes_core::metrics::{
    csr_cdf, export_report, simulate, simulate_profiles, sweep_categorized, wmt_ratio_by_type,
    Quartiles, SimReport, SweepGrid,
};
use spes_core::provision::PolicyKind;
use spes_core::{FunctionCategory, SimConfig, TraceDataset, TriggerType, MINUTES_PER_DAY};

fn random_dataset(seed: u64, n: usize, slots: usize) -> TraceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<u32>> = vec![];
    for _ in 0..n {
        let c = random_counts(&mut rng, slots, &rows);
        rows.push(c);
    }
    dataset(
        rows.into_iter()
            .enumerate()
            .map(|(i, c)| (meta(&format!("f{i:02}"), TriggerType::Http), c))
            .collect(),
    )
}

fn spes_report(seed: u64) -> SimReport {
    let ds = random_dataset(seed, 12, 4 * MINUTES_PER_DAY);
    let (train, sim) = spes_core::trace_store::split_dataset(&ds, 3, 1).unwrap();
    let cfg = SimConfig::default();
    let cat = categorize_all(&train, &cfg.spes).unwrap();
    simulate(
        Some(&cat),
        &sim,
        &PolicyKind::Spes(cfg.spes.clone()),
        &cfg,
        None,
    )
    .unwrap()
    .report
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accounting_identities(seed in any::<u64>(), keepalive in 1u32..30) {
        let ds = random_dataset(seed, 10, 1000);
        let cfg = SimConfig::default();
        for policy in [PolicyKind::Spes(cfg.spes.clone()), PolicyKind::FixedKeepAlive { minutes: keepalive }] {
            let r = simulate_profiles(BTreeMap::new(), &ds, &policy, &cfg, None).unwrap().report;
            let a = &r.aggregates;
            prop_assert_eq!(r.loaded_per_slot.len(), ds.window());
            prop_assert_eq!(r.loaded_per_slot.iter().map(|&x| u64::from(x)).sum::<u64>(), a.total_loaded_minutes);
            prop_assert_eq!(a.total_loaded_minutes, a.total_wmt + a.total_invoked_slots);
            prop_assert!(a.total_cold_starts <= a.total_invoked_slots);
            for f in &r.functions {
                prop_assert_eq!(f.loaded_minutes, f.wmt + f.invoked_slots);
                prop_assert_eq!(f.invoked_slots, ds.get(&f.function_id).unwrap().invoked_slots() as u64);
                prop_assert_eq!(f.csr, f.cold_starts as f64 / f.invoked_slots as f64);
            }
            let cdf = csr_cdf(&r);
            prop_assert_eq!(cdf.last().map(|p| p.1), (!r.functions.is_empty()).then_some(1.0));
            prop_assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        }
    }

    #[test]
    fn quartiles_use_nearest_rank(values in prop::collection::vec(0.0f64..1.0, 1..100)) {
        let q = Quartiles::of(&values).unwrap();
        let mut s = values.clone();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p / 100.0 * s.len() as f64).ceil() as usize).max(1) - 1];
        prop_assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (s[0], rank(25.0), rank(50.0), rank(75.0), s[s.len() - 1]));
        prop_assert_eq!(q.count, values.len());
    }
}

#[test]
fn wmt_ratio_example() {
    let mut r = spes_report(1);
    r.functions.truncate(1);
    r.functions[0].category = Some(FunctionCategory::Regular);
    r.functions[0].wmt = 30;
    r.functions[0].invoked_slots = 10;
    let q = wmt_ratio_by_type(&r)[&FunctionCategory::Regular];
    assert_eq!((q.count, q.median), (1, 3.0));
}

#[test]
fn per_type_ratios_group_the_flat_list() {
    let r = spes_report(2);
    let by_type = wmt_ratio_by_type(&r);
    let mut total = 0;
    for (cat, q) in &by_type {
        let v: Vec<f64> = r
            .functions
            .iter()
            .filter(|f| f.category == Some(*cat))
            .map(|f| f.wmt as f64 / f.invoked_slots as f64)
            .collect();
        assert_eq!(Quartiles::of(&v).as_ref(), Some(q));
        assert_eq!(r.aggregates.per_type[cat].wmt_ratio, *q);
        total += q.count;
    }
    assert_eq!(total, r.functions.len());
}

#[test]
fn export_is_reproducible() {
    let r = spes_report(3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export_report(&r, a.path()).unwrap();
    export_report(&spes_report(3), b.path()).unwrap();
    for name in ["report.json", "per_function.csv", "csr_cdf.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let rows = std::fs::read_to_string(a.path().join("per_function.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, r.aggregates.functions_invoked + 1);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["policy"], "spes");
    assert!(json.get("functions").is_none());
}

#[test]
fn sweep_normalizes_to_the_default_point() {
    let ds = random_dataset(4, 12, 4 * MINUTES_PER_DAY);
    let (train, sim) = spes_core::trace_store::split_dataset(&ds, 3, 1).unwrap();
    let cfg = SimConfig::default();
    let cat = categorize_all(&train, &cfg.spes).unwrap();
    let base = cfg.spes.provision.theta_prewarm;
    let one = SweepGrid {
        theta_prewarm: vec![base],
        givenup_multipliers: vec![1],
    };
    let rows = sweep_categorized(&cat, &sim, &one, &cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].normalized_memory, Some(1.0));

    let reference = rows[0].mean_memory_usage;
    let grid = SweepGrid {
        theta_prewarm: vec![0, 5],
        givenup_multipliers: vec![2],
    };
    let rows = sweep_categorized(&cat, &sim, &grid, &cfg).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.normalized_memory, Some(r.mean_memory_usage / reference));
    }
    let empty = SweepGrid {
        theta_prewarm: vec![],
        givenup_multipliers: vec![1],
    };
    assert!(sweep_categorized(&cat, &sim, &empty, &cfg).is_err());
}
