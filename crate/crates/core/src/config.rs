//! Tunable parameters for categorization, provisioning and accounting.
//!
//! Every struct deserializes from partial JSON (missing fields take their
//! defaults), so a config file only needs to name what it changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::FunctionCategory;
use crate::error::{Error, Result};

/// How the Successive rule combines its active-time and active-number tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SuccessiveRule {
    #[default]
    Or,
    And,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Number of modes kept for ApproRegular.
    pub n_modes: usize,
    /// Number of modes spanning the Dense range.
    pub k_modes: usize,
    /// Minutes; P90 of waiting times at or below this is Dense.
    pub dense_constant: u32,
    /// Minimum active-run length for Successive.
    pub gamma1: u32,
    /// Minimum active-run invocation count for Successive.
    pub gamma2: u64,
    pub successive_rule: SuccessiveRule,
    /// Weight on the cold-start rise when picking between indeterminate strategies.
    pub alpha: f64,
    pub appro_coverage: f64,
    pub cv_limit: f64,
    /// Idle slots allowed, as a fraction of the window, for AlwaysWarm.
    pub warm_ratio: f64,
    pub tcor_threshold: f64,
    pub tcor_max_lag: u32,
    /// Possible predictions wider than this are treated as discrete values.
    pub possible_range_limit: u32,
    /// Relative distance from the mode counted as "close to the mode" when merging.
    pub mode_tolerance: f64,
    /// Fraction of the mode below which a waiting time is "small" when merging.
    pub small_threshold: f64,
    /// Minimum number of waiting times before any waiting-time rule applies.
    pub min_wts: usize,
    /// Trailing training days held out to validate indeterminate strategies.
    pub validation_days: usize,
    /// Retry categorization on recent suffixes of the fit window.
    pub forgetting: bool,
    /// Allow the Correlated strategy during indeterminate assignment.
    pub correlation: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            n_modes: 3,
            k_modes: 3,
            dense_constant: 5,
            gamma1: 3,
            gamma2: 5,
            successive_rule: SuccessiveRule::Or,
            alpha: 0.5,
            appro_coverage: 0.9,
            cv_limit: 0.01,
            warm_ratio: 0.001,
            tcor_threshold: 0.5,
            tcor_max_lag: 10,
            possible_range_limit: 10,
            mode_tolerance: 0.01,
            small_threshold: 0.1,
            min_wts: 2,
            validation_days: 2,
            forgetting: true,
            correlation: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if u64::from(self.gamma1) >= self.gamma2 {
            return Err(Error::Config(format!(
                "gamma1 ({}) must be smaller than gamma2 ({})",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let fractions = [
            ("appro_coverage", self.appro_coverage),
            ("cv_limit", self.cv_limit),
            ("warm_ratio", self.warm_ratio),
            ("tcor_threshold", self.tcor_threshold),
            ("mode_tolerance", self.mode_tolerance),
            ("small_threshold", self.small_threshold),
        ];
        for (name, value) in fractions {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.n_modes == 0 || self.k_modes == 0 || self.min_wts == 0 {
            return Err(Error::Config(
                "n_modes, k_modes and min_wts must be at least 1".into(),
            ));
        }
        if self.dense_constant == 0 || self.gamma1 == 0 {
            return Err(Error::Config(
                "dense_constant and gamma1 must be positive".into(),
            ));
        }
        if self.validation_days == 0 {
            return Err(Error::Config("validation_days must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-category idle minutes after which a loaded instance is evicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GivenupTable(BTreeMap<FunctionCategory, u32>);

impl Default for GivenupTable {
    fn default() -> Self {
        let map = FunctionCategory::ALL
            .iter()
            .map(|&c| {
                let minutes = match c {
                    FunctionCategory::Dense | FunctionCategory::Pulsed => 5,
                    _ => 1,
                };
                (c, minutes)
            })
            .collect();
        GivenupTable(map)
    }
}

impl GivenupTable {
    pub fn get(&self, category: FunctionCategory) -> u32 {
        self.0.get(&category).copied().unwrap_or(1)
    }

    pub fn set(&mut self, category: FunctionCategory, minutes: u32) {
        self.0.insert(category, minutes);
    }

    /// Every entry multiplied by `factor`, as used by the trade-off sweep.
    pub fn scaled(&self, factor: u32) -> Self {
        GivenupTable(
            self.0
                .iter()
                .map(|(&c, &m)| (c, m.saturating_mul(factor)))
                .collect(),
        )
    }

    /// Fill categories missing from a partially specified table with defaults.
    pub fn completed(&self) -> Self {
        let mut full = GivenupTable::default();
        for (&c, &m) in &self.0 {
            full.0.insert(c, m);
        }
        full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProvisionConfig {
    /// Half-width of the pre-load window around a predicted invocation.
    pub theta_prewarm: u32,
    pub theta_givenup: GivenupTable,
    /// Start the simulation with AlwaysWarm functions already loaded.
    pub carry_warm: bool,
    /// Attach online correlation trackers to functions unseen in training.
    pub online_corr: bool,
    /// Adjust predictive values from waiting times observed online.
    pub adjusting: bool,
    pub min_online_wts: usize,
    pub deactivation_gap: f64,
    pub reactivation_gap: f64,
}

impl Default for ProvisionConfig {
    fn default() -> Self {
        Self {
            theta_prewarm: 2,
            theta_givenup: GivenupTable::default(),
            carry_warm: false,
            online_corr: true,
            adjusting: true,
            min_online_wts: 5,
            deactivation_gap: 0.3,
            reactivation_gap: 0.1,
        }
    }
}

impl ProvisionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_online_wts == 0 {
            return Err(Error::Config("min_online_wts must be at least 1".into()));
        }
        if !(self.reactivation_gap >= 0.0 && self.reactivation_gap <= self.deactivation_gap) {
            return Err(Error::Config(format!(
                "reactivation_gap ({}) must lie in [0, deactivation_gap ({})]",
                self.reactivation_gap, self.deactivation_gap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SpesConfig {
    pub classifier: ClassifierConfig,
    pub provision: ProvisionConfig,
}

impl SpesConfig {
    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        self.provision.validate()
    }
}

/// Denominator of the per-function cold-start rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsrDenominator {
    /// Slots with at least one invocation.
    #[default]
    InvokedSlots,
    /// Sum of invocation counts.
    InvocationCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmcrMode {
    /// Mean of per-slot ratios.
    #[default]
    Macro,
    /// Total invoked instance-minutes over total loaded instance-minutes.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MetricsConfig {
    pub csr_denominator: CsrDenominator,
    pub emcr: EmcrMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub spes: SpesConfig,
    pub metrics: MetricsConfig,
    /// Recorded in report metadata; the simulator itself is deterministic.
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this, so it is never echoed.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            spes: SpesConfig::default(),
            metrics: MetricsConfig::default(),
            seed: None,
            workers: 1,
        }
    }
}
