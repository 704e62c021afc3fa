use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spes_core::config::{CsrDenominator, EmcrMode, SuccessiveRule};
use spes_core::provision::PolicyKind;
use spes_core::{FunctionCategory, SimConfig};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Spes,
    FixedKeepalive,
}

/// Everything a run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub policy: PolicyName,
    pub keepalive_minutes: u32,
    /// Training days; defaults to everything before the simulation window.
    pub train_days: Option<usize>,
    pub sim_days: usize,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            policy: PolicyName::Spes,
            keepalive_minutes: 10,
            train_days: None,
            sim_days: 1,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn policy_kind(&self) -> PolicyKind {
        match self.policy {
            PolicyName::Spes => PolicyKind::Spes(self.sim.spes.clone()),
            PolicyName::FixedKeepalive => PolicyKind::FixedKeepAlive {
                minutes: self.keepalive_minutes,
            },
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            workers: self.workers,
            ..self.sim.clone()
        }
    }

    pub fn split_days(&self, total: usize) -> anyhow::Result<(usize, usize)> {
        let train = match self.train_days {
            Some(d) => d,
            None => total.checked_sub(self.sim_days).ok_or_else(|| {
                UsageError(format!(
                    "trace has {total} days, fewer than the {} simulation days",
                    self.sim_days
                ))
            })?,
        };
        Ok((train, self.sim_days))
    }
}

fn parse_json_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

fn parse_givenup(s: &str) -> Result<(FunctionCategory, u32), String> {
    let (cat, minutes) = s.split_once('=').ok_or("expected CATEGORY=MINUTES")?;
    Ok((
        cat.parse().map_err(|e| format!("{e}"))?,
        minutes.parse().map_err(|e| format!("{e}"))?,
    ))
}

/// Flags shared by every command that reads a configuration.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, env = "SPES_SIM_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_json_enum::<PolicyName>)]
    pub policy: Option<PolicyName>,
    #[arg(long)]
    pub keepalive_minutes: Option<u32>,
    #[arg(long)]
    pub train_days: Option<usize>,
    #[arg(long)]
    pub sim_days: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub theta_prewarm: Option<u32>,
    /// Give-up minutes for one category, e.g. `dense=5`. Repeatable.
    #[arg(long = "givenup", value_parser = parse_givenup)]
    pub givenup: Vec<(FunctionCategory, u32)>,
    #[arg(long)]
    pub carry_warm: Option<bool>,
    #[arg(long)]
    pub min_online_wts: Option<usize>,
    #[arg(long)]
    pub deactivation_gap: Option<f64>,
    #[arg(long)]
    pub reactivation_gap: Option<f64>,

    #[arg(long)]
    pub disable_corr: bool,
    #[arg(long)]
    pub disable_online_corr: bool,
    #[arg(long)]
    pub disable_forgetting: bool,
    #[arg(long)]
    pub disable_adjusting: bool,

    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub k_modes: Option<usize>,
    #[arg(long)]
    pub dense_constant: Option<u32>,
    #[arg(long)]
    pub gamma1: Option<u32>,
    #[arg(long)]
    pub gamma2: Option<u64>,
    #[arg(long, value_parser = parse_json_enum::<SuccessiveRule>)]
    pub successive_rule: Option<SuccessiveRule>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub appro_coverage: Option<f64>,
    #[arg(long)]
    pub cv_limit: Option<f64>,
    #[arg(long)]
    pub warm_ratio: Option<f64>,
    #[arg(long)]
    pub tcor_threshold: Option<f64>,
    #[arg(long)]
    pub tcor_max_lag: Option<u32>,
    #[arg(long)]
    pub possible_range_limit: Option<u32>,
    #[arg(long)]
    pub mode_tolerance: Option<f64>,
    #[arg(long)]
    pub small_threshold: Option<f64>,
    #[arg(long)]
    pub min_wts: Option<usize>,
    #[arg(long)]
    pub validation_days: Option<usize>,

    #[arg(long, value_parser = parse_json_enum::<CsrDenominator>)]
    pub csr_denominator: Option<CsrDenominator>,
    #[arg(long, value_parser = parse_json_enum::<EmcrMode>)]
    pub emcr: Option<EmcrMode>,
}

fn load_file(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())).into())
}

macro_rules! set {
    ($($flag:expr => $field:expr),* $(,)?) => {
        $(if let Some(v) = $flag { $field = v; })*
    };
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => load_file(p)?,
            None => RunConfig::default(),
        };
        let cl = &mut c.sim.spes.classifier;
        set! {
            self.n_modes => cl.n_modes,
            self.k_modes => cl.k_modes,
            self.dense_constant => cl.dense_constant,
            self.gamma1 => cl.gamma1,
            self.gamma2 => cl.gamma2,
            self.successive_rule => cl.successive_rule,
            self.alpha => cl.alpha,
            self.appro_coverage => cl.appro_coverage,
            self.cv_limit => cl.cv_limit,
            self.warm_ratio => cl.warm_ratio,
            self.tcor_threshold => cl.tcor_threshold,
            self.tcor_max_lag => cl.tcor_max_lag,
            self.possible_range_limit => cl.possible_range_limit,
            self.mode_tolerance => cl.mode_tolerance,
            self.small_threshold => cl.small_threshold,
            self.min_wts => cl.min_wts,
            self.validation_days => cl.validation_days,
        }
        if self.disable_corr {
            cl.correlation = false;
        }
        if self.disable_forgetting {
            cl.forgetting = false;
        }
        let pv = &mut c.sim.spes.provision;
        set! {
            self.theta_prewarm => pv.theta_prewarm,
            self.carry_warm => pv.carry_warm,
            self.min_online_wts => pv.min_online_wts,
            self.deactivation_gap => pv.deactivation_gap,
            self.reactivation_gap => pv.reactivation_gap,
        }
        for &(cat, minutes) in &self.givenup {
            pv.theta_givenup.set(cat, minutes);
        }
        if self.disable_online_corr {
            pv.online_corr = false;
        }
        if self.disable_adjusting {
            pv.adjusting = false;
        }
        set! {
            self.csr_denominator => c.sim.metrics.csr_denominator,
            self.emcr => c.sim.metrics.emcr,
            self.policy => c.policy,
            self.keepalive_minutes => c.keepalive_minutes,
            self.sim_days => c.sim_days,
            self.workers => c.workers,
        }
        if self.train_days.is_some() {
            c.train_days = self.train_days;
        }
        if self.seed.is_some() {
            c.sim.seed = self.seed;
        }
        c.sim.spes.provision.theta_givenup = c.sim.spes.provision.theta_givenup.completed();
        if c.workers == 0 {
            bail!(UsageError("--workers must be at least 1".into()));
        }
        c.policy_kind()
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
        c.sim
            .spes
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
        Ok(c)
    }
}
