//! Labelled synthetic traces.
//!
//! Each group of a [`SyntheticSpec`] produces `count` functions from one
//! generator. The generator fixes the ground-truth category attached to every
//! function it emits; the seed fixes every count.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FunctionMeta, TraceDataset, TriggerType};
use crate::classifier::FunctionCategory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntDist {
    Const(u32),
    Uniform { lo: u32, hi: u32 },
}

impl IntDist {
    fn sample(&self, rng: &mut impl Rng) -> u32 {
        match *self {
            IntDist::Const(v) => v,
            IntDist::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            IntDist::Uniform { lo, hi } if lo > hi => Err(Error::InvalidSpec(format!(
                "{what}: uniform lo {lo} exceeds hi {hi}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// At least one invocation in every slot.
    AlwaysActive {
        #[serde(default = "one")]
        max_count: u32,
    },
    /// One invocation every `period ± jitter` slots, first at `phase`.
    Periodic {
        period: u32,
        #[serde(default)]
        jitter: u32,
        #[serde(default)]
        phase: u32,
    },
    /// Intervals drawn from `periods` with the given weights.
    MultiModal {
        periods: Vec<u32>,
        #[serde(default)]
        weights: Vec<f64>,
    },
    /// Single active slots separated by short idle gaps.
    Dense { idle_gap: IntDist },
    /// Runs of `burst_len` active slots, `burst_count` invocations each, separated by `gap`.
    Bursty {
        burst_len: IntDist,
        burst_count: IntDist,
        gap: IntDist,
    },
    /// Copies the matching function of `leader_group`, delayed by `lag` slots.
    Chained { leader_group: usize, lag: u32 },
    /// Independent Bernoulli(`rate`) invocation per slot.
    SparseRandom { rate: f64 },
    /// `before` up to `at_slot`, `after` from there on.
    Shift {
        at_slot: usize,
        before: Box<Generator>,
        after: Box<Generator>,
    },
}

fn one() -> u32 {
    1
}

impl Generator {
    pub fn label(&self) -> FunctionCategory {
        match self {
            Generator::AlwaysActive { .. } => FunctionCategory::AlwaysWarm,
            Generator::Periodic { jitter: 0, .. } => FunctionCategory::Regular,
            Generator::Periodic { .. } | Generator::MultiModal { .. } => {
                FunctionCategory::ApproRegular
            }
            Generator::Dense { .. } => FunctionCategory::Dense,
            Generator::Bursty { .. } => FunctionCategory::Successive,
            Generator::Chained { .. } => FunctionCategory::Correlated,
            Generator::SparseRandom { .. } => FunctionCategory::Unknown,
            Generator::Shift { after, .. } => after.label(),
        }
    }

    fn default_trigger(&self) -> TriggerType {
        match self {
            Generator::AlwaysActive { .. }
            | Generator::Periodic { .. }
            | Generator::MultiModal { .. } => TriggerType::Timer,
            Generator::Dense { .. } => TriggerType::Queue,
            Generator::Shift { after, .. } => after.default_trigger(),
            _ => TriggerType::Http,
        }
    }

    fn validate(&self, slots: usize, group: usize, nested: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("group {group}: {msg}")));
        match self {
            Generator::AlwaysActive { max_count } if *max_count == 0 => {
                bad("max_count must be at least 1".into())
            }
            Generator::Periodic { period, jitter, .. } if *period == 0 || jitter >= period => {
                bad(format!("period {period} must exceed jitter {jitter}"))
            }
            Generator::MultiModal { periods, weights } => {
                if periods.is_empty() || periods.contains(&0) {
                    return bad("periods must be non-empty and positive".into());
                }
                if !weights.is_empty() && weights.len() != periods.len() {
                    return bad("weights must match periods".into());
                }
                if !weights.is_empty() && WeightedIndex::new(weights).is_err() {
                    return bad("weights must be non-negative with a positive sum".into());
                }
                Ok(())
            }
            Generator::Dense { idle_gap } => idle_gap.validate("idle_gap"),
            Generator::Bursty {
                burst_len,
                burst_count,
                gap,
            } => {
                burst_len.validate("burst_len")?;
                burst_count.validate("burst_count")?;
                gap.validate("gap")
            }
            Generator::Chained { leader_group, .. } => {
                if nested {
                    bad("chained generators cannot be nested in a shift".into())
                } else if *leader_group >= group {
                    bad(format!(
                        "leader group {leader_group} must precede the follower"
                    ))
                } else {
                    Ok(())
                }
            }
            Generator::SparseRandom { rate } if !(0.0..=1.0).contains(rate) => {
                bad(format!("rate {rate} outside [0, 1]"))
            }
            Generator::Shift {
                at_slot,
                before,
                after,
            } => {
                if *at_slot > slots {
                    return bad(format!("shift slot {at_slot} beyond window {slots}"));
                }
                before.validate(slots, group, true)?;
                after.validate(slots, group, true)
            }
            _ => Ok(()),
        }
    }

    /// Counts for one function. `Chained` is resolved by the caller.
    fn generate(&self, slots: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let mut counts = vec![0u32; slots];
        match self {
            Generator::AlwaysActive { max_count } => {
                for c in counts.iter_mut() {
                    *c = rng.gen_range(1..=*max_count);
                }
            }
            Generator::Periodic {
                period,
                jitter,
                phase,
            } => {
                let mut t = *phase as usize;
                while t < slots {
                    counts[t] = 1;
                    let step = if *jitter == 0 {
                        *period
                    } else {
                        rng.gen_range(period - jitter..=period + jitter)
                    };
                    t += step as usize;
                }
            }
            Generator::MultiModal { periods, weights } => {
                let weights = if weights.is_empty() {
                    vec![1.0; periods.len()]
                } else {
                    weights.clone()
                };
                let pick = WeightedIndex::new(&weights).expect("validated weights");
                let longest = *periods.iter().max().expect("validated periods");
                let mut t = rng.gen_range(0..longest) as usize;
                while t < slots {
                    counts[t] = 1;
                    t += periods[pick.sample(rng)] as usize;
                }
            }
            Generator::Dense { idle_gap } => {
                let mut t = rng.gen_range(0..10usize);
                while t < slots {
                    counts[t] = rng.gen_range(1..=3);
                    t += 1 + idle_gap.sample(rng) as usize;
                }
            }
            Generator::Bursty {
                burst_len,
                burst_count,
                gap,
            } => {
                let mut t = gap.sample(rng) as usize;
                while t < slots {
                    let len = burst_len.sample(rng).max(1) as usize;
                    for slot in counts.iter_mut().skip(t).take(len) {
                        *slot = burst_count.sample(rng).max(1);
                    }
                    t += len + gap.sample(rng).max(1) as usize;
                }
            }
            Generator::SparseRandom { rate } => {
                for c in counts.iter_mut() {
                    if rng.gen_bool(*rate) {
                        *c = 1;
                    }
                }
            }
            Generator::Shift {
                at_slot,
                before,
                after,
            } => {
                let head = before.generate(slots, rng);
                let tail = after.generate(slots, rng);
                counts[..*at_slot].copy_from_slice(&head[..*at_slot]);
                counts[*at_slot..].copy_from_slice(&tail[*at_slot..]);
            }
            Generator::Chained { .. } => unreachable!("chained counts are derived from the leader"),
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroup {
    /// Prefix of generated ids; defaults to `g<index>`.
    #[serde(default)]
    pub name: Option<String>,
    pub count: usize,
    #[serde(default)]
    pub trigger: Option<TriggerType>,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Window length in one-minute slots.
    pub slots: usize,
    pub groups: Vec<SyntheticGroup>,
}

impl SyntheticSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidSpec(
                "window must contain at least one slot".into(),
            ));
        }
        for (g, group) in self.groups.iter().enumerate() {
            group.generator.validate(self.slots, g, false)?;
            if let Generator::Chained { leader_group, .. } = group.generator {
                if self.groups[leader_group].count == 0 && group.count > 0 {
                    return Err(Error::InvalidSpec(format!(
                        "group {g}: leader group is empty"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generate the dataset described by `spec` together with ground-truth labels.
///
/// Chained followers share owner and application with their leader, so the
/// offline correlation search can find them.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
) -> Result<(TraceDataset, BTreeMap<String, FunctionCategory>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups: Vec<Vec<(FunctionMeta, Vec<u32>)>> = Vec::with_capacity(spec.groups.len());
    let mut labels = BTreeMap::new();

    for (g, group) in spec.groups.iter().enumerate() {
        let name = group.name.clone().unwrap_or_else(|| format!("g{g:02}"));
        let mut members = Vec::with_capacity(group.count);
        for j in 0..group.count {
            let function_id = format!("{name}-{j:05}");
            let (meta, counts) = match &group.generator {
                Generator::Chained { leader_group, lag } => {
                    let leaders = &groups[*leader_group];
                    let (leader, leader_counts) = &leaders[j % leaders.len()];
                    let mut counts = vec![0u32; spec.slots];
                    let lag = *lag as usize;
                    if lag < spec.slots {
                        counts[lag..].copy_from_slice(&leader_counts[..spec.slots - lag]);
                    }
                    let meta = FunctionMeta {
                        owner_id: leader.owner_id.clone(),
                        app_id: leader.app_id.clone(),
                        function_id: function_id.clone(),
                        trigger: group.trigger.unwrap_or(leader.trigger),
                    };
                    (meta, counts)
                }
                generator => {
                    let meta = FunctionMeta {
                        owner_id: format!("own-{name}-{j:05}"),
                        app_id: format!("app-{name}-{j:05}"),
                        function_id: function_id.clone(),
                        trigger: group.trigger.unwrap_or_else(|| generator.default_trigger()),
                    };
                    (meta, generator.generate(spec.slots, &mut rng))
                }
            };
            labels.insert(function_id, group.generator.label());
            members.push((meta, counts));
        }
        groups.push(members);
    }

    let ds = TraceDataset::new(spec.slots, 0, groups.into_iter().flatten())
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    Ok((ds, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(generator: Generator, count: usize, slots: usize) -> SyntheticSpec {
        SyntheticSpec {
            seed: 11,
            slots,
            groups: vec![SyntheticGroup {
                name: None,
                count,
                trigger: None,
                generator,
            }],
        }
    }

    #[test]
    fn always_active_counts_every_slot() {
        let (ds, labels) =
            generate_synthetic(&spec(Generator::AlwaysActive { max_count: 3 }, 1, 100)).unwrap();
        assert!(ds.series()[0].counts.iter().all(|&c| c >= 1));
        assert_eq!(labels.values().next(), Some(&FunctionCategory::AlwaysWarm));
    }

    #[test]
    fn periodic_without_jitter_hits_exact_slots() {
        let g = Generator::Periodic {
            period: 10,
            jitter: 0,
            phase: 0,
        };
        let (ds, _) = generate_synthetic(&spec(g, 1, 1440)).unwrap();
        let invoked: Vec<usize> = ds.series()[0]
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i + 1)
            .collect();
        let expected: Vec<usize> = (0..144).map(|k| 1 + 10 * k).collect();
        assert_eq!(invoked, expected);
    }

    #[test]
    fn same_seed_same_dataset() {
        let g = Generator::Bursty {
            burst_len: IntDist::Uniform { lo: 3, hi: 6 },
            burst_count: IntDist::Uniform { lo: 1, hi: 4 },
            gap: IntDist::Uniform { lo: 30, hi: 300 },
        };
        let s = spec(g, 5, 5000);
        assert_eq!(
            generate_synthetic(&s).unwrap(),
            generate_synthetic(&s).unwrap()
        );
    }

    #[test]
    fn zero_window_rejected() {
        let s = spec(Generator::SparseRandom { rate: 0.1 }, 1, 0);
        assert!(matches!(generate_synthetic(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn chained_follower_copies_leader_with_lag() {
        let s = SyntheticSpec {
            seed: 3,
            slots: 2000,
            groups: vec![
                SyntheticGroup {
                    name: Some("lead".into()),
                    count: 2,
                    trigger: None,
                    generator: Generator::SparseRandom { rate: 0.05 },
                },
                SyntheticGroup {
                    name: Some("follow".into()),
                    count: 2,
                    trigger: None,
                    generator: Generator::Chained {
                        leader_group: 0,
                        lag: 3,
                    },
                },
            ],
        };
        let (ds, labels) = generate_synthetic(&s).unwrap();
        let leader = ds.get("lead-00001").unwrap();
        let follower = ds.get("follow-00001").unwrap();
        assert_eq!(&follower.counts[3..], &leader.counts[..1997]);
        assert_eq!(
            ds.meta("follow-00001").unwrap().app_id,
            ds.meta("lead-00001").unwrap().app_id
        );
        assert_eq!(labels["follow-00000"], FunctionCategory::Correlated);
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(
            Generator::Dense {
                idle_gap: IntDist::Uniform { lo: 1, hi: 5 },
            },
            2,
            10,
        );
        let text = serde_json::to_string(&s).unwrap();
        let back: SyntheticSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
