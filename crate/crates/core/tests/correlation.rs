mod common;

use common::*;
use proptest::prelude::*;
use spes_core::correlation::{
    cooccurrence_rate, lagged_cooccurrence_rate, mine_offline_links, OnlineCorrelationTracker,
};
use spes_core::{ClassifierConfig, InvocationSeries, TriggerType};

fn arb_pair() -> impl Strategy<Value = (InvocationSeries, InvocationSeries)> {
    (1usize..300).prop_flat_map(|n| {
        (
            prop::collection::vec(0u32..3, n),
            prop::collection::vec(0u32..3, n),
        )
            .prop_map(|(a, b)| {
                (
                    InvocationSeries::new("t", a, 0),
                    InvocationSeries::new("i", b, 0),
                )
            })
    })
}

proptest! {
    #[test]
    fn cor_is_a_rate((t, i) in arb_pair(), lag in 0u32..20) {
        let c = lagged_cooccurrence_rate(&t, &i, lag).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn lagged_cor_is_monotone_in_lag((t, i) in arb_pair(), lag in 0u32..20) {
        let a = lagged_cooccurrence_rate(&t, &i, lag).unwrap();
        let b = lagged_cooccurrence_rate(&t, &i, lag + 1).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn self_cor_is_one((t, _) in arb_pair()) {
        prop_assume!(t.total() > 0);
        prop_assert_eq!(cooccurrence_rate(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn lagged_cor_matches_window_oracle((t, i) in arb_pair(), lag in 0u32..10) {
        let targets: Vec<usize> = (0..t.len()).filter(|&s| t.counts[s] > 0).collect();
        prop_assume!(!targets.is_empty());
        let hits = targets
            .iter()
            .filter(|&&s| (s.saturating_sub(lag as usize)..=s).any(|u| i.counts[u] > 0))
            .count();
        let expected = hits as f64 / targets.len() as f64;
        prop_assert_eq!(lagged_cooccurrence_rate(&t, &i, lag).unwrap(), expected);
    }

    #[test]
    fn tracker_scores_stay_bounded(
        slots in prop::collection::vec((any::<bool>(), prop::collection::btree_set(0u8..5, 0..4)), 1..200)
    ) {
        let mut tr = OnlineCorrelationTracker::new(99u8, TriggerType::Http, 0.3, 0.1);
        for (target, invoked) in &slots {
            tr.update(invoked.iter().map(|k| (k, TriggerType::Http)), *target);
            for k in 0..5u8 {
                let c = tr.cor(&k);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!(c <= tr.max_cor());
            }
        }
        prop_assert_eq!(tr.target_invocations(), slots.iter().filter(|s| s.0).count() as u64);
    }
}

#[test]
fn mismatched_lengths_are_rejected() {
    let a = InvocationSeries::new("a", vec![1, 0, 1], 0);
    let b = InvocationSeries::new("b", vec![1, 0], 0);
    assert!(cooccurrence_rate(&a, &b).is_err());
}

#[test]
fn tracker_ignores_other_triggers_and_itself() {
    let mut tr = OnlineCorrelationTracker::new(0u8, TriggerType::Http, 0.3, 0.1);
    for _ in 0..10 {
        assert!(!tr.update(
            [(&0u8, TriggerType::Http), (&1u8, TriggerType::Timer)],
            true
        ));
    }
    assert_eq!(tr.cor(&1), 0.0);
    assert_eq!(tr.cor(&0), 0.0);
}

#[test]
fn mining_is_reproducible() {
    let slots = 2000;
    let lead = periodic(slots, 37, 3);
    let mut follow = vec![0; slots];
    follow[4..].copy_from_slice(&lead[..slots - 4]);
    let noise = periodic(slots, 500, 0);
    let mut m = vec![
        (meta("lead", TriggerType::Http), lead),
        (meta("follow", TriggerType::Http), follow),
        (meta("noise", TriggerType::Http), noise),
    ];
    for e in m.iter_mut() {
        e.0.app_id = "app".into();
    }
    let ds = dataset(m);
    let cfg = ClassifierConfig::default();
    let a = mine_offline_links("follow", &ds, &cfg);
    assert_eq!(a, mine_offline_links("follow", &ds, &cfg));
    assert_eq!(a.len(), 1);
    assert_eq!(
        (a[0].indicator_id.as_str(), a[0].lag, a[0].score),
        ("lead", 4, 1.0)
    );
    assert!(mine_offline_links("missing", &ds, &cfg).is_empty());
}
