//! Simulation configuration: schema, defaults and validation.
//!
//! Defaults describe the baseline setup used throughout the experiments:
//! 100 equal-weight honest nodes, 100 blocks per second, eight references,
//! θ = 2/3, a Watts-Strogatz overlay with eight neighbours and full rewiring,
//! 0.1 s per-hop latency and a 60 s horizon.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("fixture preconditions not met: {0}")]
    WrongFixture(String),
    #[error("no partition size satisfies the safety-breaker inequality for q = {q}, θ = {theta}, N_h = {n_h}")]
    InfeasiblePartition { q: f64, theta: f64, n_h: usize },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// How a node breaks exact ties between equally heavy candidate conflicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakRule {
    #[default]
    MinDigest,
    /// Keep the currently preferred conflict on ties.
    PreferCurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologyConfig {
    Complete,
    WattsStrogatz { neighbours: usize, rewiring: f64 },
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self::WattsStrogatz { neighbours: 8, rewiring: 1.0 }
    }
}

/// Per-package delay distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayModel {
    Constant { h: f64 },
    /// Uniform on (0, Δ] with probability 1 − ε; otherwise Δ + Δ·Exp(1).
    ProbSync { delta: f64, eps: f64 },
    /// The adversary's schedule decides; packages it does not touch take `h`.
    AdversaryControlled { h: f64 },
}

impl Default for DelayModel {
    fn default() -> Self {
        Self::Constant { h: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IssuanceMode {
    /// Node `i` issues as a Poisson process of rate `λ·w(i)`.
    #[default]
    Poisson,
    /// Every honest node issues at `offset + r·period`, r = 0, 1, …
    Periodic { period: f64, offset: f64 },
}

/// When the minority voter of the second metastability attack switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MinorityTrigger {
    /// Switch as soon as an honest defection makes the adversary's side the
    /// honest majority.
    #[default]
    Defection,
    /// Re-evaluate on a fixed timer instead.
    Timer { interval: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryConfig {
    #[default]
    None,
    /// A weightless dealer publishes two conflicting spends at time `at`,
    /// each to a different random honest node.
    DoubleSpend { at: f64 },
    /// Keeps re-spending one output so honest nodes chase the newest spend.
    BaitAndSwitch {
        q: f64,
        #[serde(default = "default_attack_start")]
        start: f64,
        /// Spend again once the honest support of the current favourite
        /// reaches `alpha·q`; when unset, at its first honest vote.
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default = "default_max_spends")]
        max_spends: usize,
    },
    /// Four-node delay schedule inverting every opinion once per round.
    #[serde(rename = "metastability-i")]
    MetastabilityI {
        delta: f64,
        gamma: f64,
        #[serde(default = "default_rounds")]
        rounds: usize,
        /// When false all packages follow the configured delay model.
        #[serde(default = "default_true")]
        attack: bool,
    },
    /// Adversary identities always vote for the honest minority.
    #[serde(rename = "metastability-ii")]
    MetastabilityII {
        q: f64,
        #[serde(default = "default_identities")]
        identities: usize,
        #[serde(default)]
        mute_after: Option<f64>,
        #[serde(default)]
        trigger: MinorityTrigger,
    },
    /// Partition-and-switch strategy breaking safety when q > θ − ½.
    SafetyBreaker {
        q: f64,
        /// Size of group X; chosen automatically when unset.
        #[serde(default)]
        n_star: Option<usize>,
        #[serde(default = "default_attack_start")]
        start: f64,
        /// Give up waiting for group X to confirm after this many seconds.
        #[serde(default = "default_switch_timeout")]
        switch_timeout: f64,
        /// Delay between the adversary's switch and lifting the partition.
        #[serde(default = "default_release_after")]
        release_after: f64,
        /// Upper bound on how long a cross-group package may be held
        /// (`None`: held until release).
        #[serde(default)]
        hold_cap: Option<f64>,
    },
}

fn default_attack_start() -> f64 {
    1.0
}
fn default_max_spends() -> usize {
    500
}
fn default_rounds() -> usize {
    12
}
fn default_true() -> bool {
    true
}
fn default_identities() -> usize {
    3
}
fn default_switch_timeout() -> f64 {
    20.0
}
fn default_release_after() -> f64 {
    1.0
}

impl AdversaryConfig {
    /// Total adversarial weight.
    pub fn q(&self) -> f64 {
        match *self {
            Self::BaitAndSwitch { q, .. } | Self::MetastabilityII { q, .. } | Self::SafetyBreaker { q, .. } => q,
            _ => 0.0,
        }
    }

    /// Number of weighted adversary identities.
    pub fn identities(&self) -> usize {
        match *self {
            Self::BaitAndSwitch { .. } | Self::SafetyBreaker { .. } => 1,
            Self::MetastabilityII { identities, .. } => identities,
            _ => 0,
        }
    }

    /// Whether a weightless dealer identity publishes the initial conflict.
    pub fn has_dealer(&self) -> bool {
        matches!(self, Self::DoubleSpend { .. } | Self::MetastabilityI { .. } | Self::MetastabilityII { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::DoubleSpend { .. } => "double-spend",
            Self::BaitAndSwitch { .. } => "bait-and-switch",
            Self::MetastabilityI { .. } => "metastability-i",
            Self::MetastabilityII { .. } => "metastability-ii",
            Self::SafetyBreaker { .. } => "safety-breaker",
        }
    }
}

/// Synchronised random reality selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrrsConfig {
    pub enabled: bool,
    /// Epoch length 𝒟 in seconds.
    pub epoch: f64,
    /// Beacon delivery bound **d** in seconds.
    pub jitter: f64,
    /// Probability that a node misses an epoch's beacon value.
    pub loss: f64,
}

impl Default for SrrsConfig {
    fn default() -> Self {
        Self { enabled: false, epoch: 5.0, jitter: 0.5, loss: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Tip-pool / AW sampling cadence in seconds.
    pub sample_interval: f64,
    /// Start of the measurement window (tip pool, confirmation sampling).
    pub warmup: f64,
    /// Blocks issued later than `horizon − confirmation_window` are not
    /// sampled for confirmation times.
    pub confirmation_window: f64,
    /// Number of honest nodes tracking Witness Weight (`None`: 25 or all
    /// honest nodes if fewer).
    pub observers: Option<usize>,
    /// Every n-th block issued inside the window is a WW-growth probe.
    pub probe_every: usize,
    /// Record every change of preferred reality.
    pub record_opinions: bool,
    /// Keep a full event trace for `events.jsonl`.
    pub events: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            sample_interval: 0.1,
            warmup: 5.0,
            confirmation_window: 15.0,
            observers: None,
            probe_every: 50,
            record_opinions: false,
            events: false,
        }
    }
}

pub const DEFAULT_OBSERVERS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of honest nodes.
    pub nodes: usize,
    /// Zipf exponent of the honest weight distribution.
    pub zipf_s: f64,
    /// Total issuance rate in blocks per second.
    pub lambda: f64,
    /// References per block.
    pub k: usize,
    pub theta: f64,
    pub horizon: f64,
    pub seed: u64,
    pub tie_break: TieBreakRule,
    pub topology: TopologyConfig,
    /// Forward solid blocks to neighbours. Only meaningful to disable on a
    /// complete graph, where the issuer reaches everyone directly.
    pub relay: bool,
    pub delay: DelayModel,
    pub issuance: IssuanceMode,
    pub adversary: AdversaryConfig,
    pub srrs: SrrsConfig,
    pub metrics: MetricsConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nodes: 100,
            zipf_s: 0.0,
            lambda: 100.0,
            k: 8,
            theta: 2.0 / 3.0,
            horizon: 60.0,
            seed: 1,
            tie_break: TieBreakRule::MinDigest,
            topology: TopologyConfig::default(),
            relay: true,
            delay: DelayModel::default(),
            issuance: IssuanceMode::Poisson,
            adversary: AdversaryConfig::None,
            srrs: SrrsConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl SimConfig {
    /// Parses TOML or JSON, chosen by file extension (TOML otherwise).
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let is_json = path.extension().map(|e| e == "json").unwrap_or(false);
        let cfg = if is_json { Self::from_json(&text) } else { Self::from_toml(&text) };
        cfg.map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.display().to_string(), message },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: "<toml>".into(), message: e.to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse { path: "<json>".into(), message: e.to_string() })
    }

    /// Honest nodes plus weighted adversary identities (the weightless dealer
    /// is not a network member).
    pub fn network_size(&self) -> usize {
        self.nodes + self.adversary.identities()
    }

    pub fn observer_count(&self) -> usize {
        self.metrics.observers.unwrap_or(DEFAULT_OBSERVERS).min(self.nodes)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes == 0 {
            return Err(invalid("at least one honest node is required"));
        }
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return Err(invalid(format!("zipf_s must be finite and non-negative, got {}", self.zipf_s)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.k < 2 {
            return Err(invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return Err(invalid(format!("theta must lie in (0.5, 1], got {}", self.theta)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        match self.topology {
            TopologyConfig::Complete => {}
            TopologyConfig::WattsStrogatz { neighbours, rewiring } => {
                if neighbours < 2 || neighbours % 2 != 0 {
                    return Err(invalid("watts-strogatz neighbours must be even and at least 2"));
                }
                if neighbours >= self.network_size() {
                    return Err(invalid("watts-strogatz neighbours must be smaller than the network"));
                }
                if !(0.0..=1.0).contains(&rewiring) {
                    return Err(invalid("rewiring probability must lie in [0, 1]"));
                }
                if !self.relay {
                    return Err(invalid("relay can only be disabled on a complete topology"));
                }
            }
        }
        match self.delay {
            DelayModel::Constant { h } | DelayModel::AdversaryControlled { h } => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(invalid("delays must be positive"));
                }
            }
            DelayModel::ProbSync { delta, eps } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(invalid("prob-sync delta must be positive"));
                }
                if !(0.0..1.0).contains(&eps) {
                    return Err(invalid("prob-sync eps must lie in [0, 1)"));
                }
            }
        }
        if let IssuanceMode::Periodic { period, offset } = self.issuance {
            if !(period > 0.0) || !(offset >= 0.0) {
                return Err(invalid("periodic issuance needs a positive period and non-negative offset"));
            }
        }
        if self.srrs.enabled {
            let s = &self.srrs;
            if !(s.epoch > 0.0) || !(s.jitter > 0.0) || s.jitter >= s.epoch {
                return Err(invalid("srrs needs 0 < jitter < epoch"));
            }
            if !(0.0..1.0).contains(&s.loss) {
                return Err(invalid("srrs loss must lie in [0, 1)"));
            }
        }
        let m = &self.metrics;
        if !(m.sample_interval > 0.0) || !(m.warmup >= 0.0) || !(m.confirmation_window >= 0.0) || m.probe_every == 0 {
            return Err(invalid("metrics cadence, warmup, window and probe_every must be positive"));
        }
        let q = self.adversary.q();
        if !(0.0..1.0).contains(&q) {
            return Err(invalid(format!("adversary weight q must lie in [0, 1), got {q}")));
        }
        match &self.adversary {
            AdversaryConfig::None => {}
            AdversaryConfig::DoubleSpend { at } => {
                if !(*at >= 0.0 && *at < self.horizon) {
                    return Err(invalid("double-spend time must lie inside the horizon"));
                }
            }
            AdversaryConfig::BaitAndSwitch { q, alpha, max_spends, .. } => {
                if *q <= 0.0 {
                    return Err(invalid("bait-and-switch needs q > 0"));
                }
                if let Some(a) = alpha {
                    if !(*a > 0.0) {
                        return Err(invalid("alpha must be positive"));
                    }
                }
                if *max_spends < 2 {
                    return Err(invalid("bait-and-switch needs at least two spends"));
                }
            }
            AdversaryConfig::MetastabilityI { delta, gamma, rounds, .. } => {
                if self.nodes != 4 {
                    return Err(ConfigError::WrongFixture(format!("needs exactly 4 honest nodes, got {}", self.nodes)));
                }
                if self.topology != TopologyConfig::Complete {
                    return Err(ConfigError::WrongFixture("needs the complete graph".into()));
                }
                if self.zipf_s != 0.0 {
                    return Err(ConfigError::WrongFixture("needs equal weights".into()));
                }
                if !(*delta > 0.0 && gamma > delta) || *rounds == 0 {
                    return Err(ConfigError::WrongFixture("needs 0 < δ < γ and at least one round".into()));
                }
            }
            AdversaryConfig::MetastabilityII { q, identities, .. } => {
                if *identities == 0 || *q <= 0.0 {
                    return Err(invalid("metastability-ii needs weighted adversary identities"));
                }
                if !self.nodes.is_multiple_of(2) {
                    return Err(ConfigError::WrongFixture("needs an even number of honest nodes".into()));
                }
            }
            AdversaryConfig::SafetyBreaker { q, n_star, switch_timeout, release_after, hold_cap, .. } => {
                if *q <= 0.0 {
                    return Err(invalid("safety-breaker needs q > 0"));
                }
                if self.topology != TopologyConfig::Complete {
                    return Err(ConfigError::WrongFixture("the partition schedule needs the complete graph".into()));
                }
                if let Some(n) = n_star {
                    if *n == 0 || *n >= self.nodes {
                        return Err(invalid("n_star must split the honest nodes"));
                    }
                }
                if !(*switch_timeout > 0.0) || !(*release_after >= 0.0) {
                    return Err(invalid("safety-breaker timings must be positive"));
                }
                if let Some(c) = hold_cap {
                    if !(*c > 0.0) {
                        return Err(invalid("hold_cap must be positive"));
                    }
                }
            }
        }
        if matches!(self.delay, DelayModel::AdversaryControlled { .. })
            && !matches!(self.adversary, AdversaryConfig::MetastabilityI { .. } | AdversaryConfig::SafetyBreaker { .. })
        {
            return Err(invalid("adversary-controlled delays need a scheduling adversary"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let text = r#"
            nodes = 20
            lambda = 50.0
            [topology]
            kind = "complete"
            [delay]
            kind = "prob-sync"
            delta = 0.2
            eps = 0.01
            [adversary]
            kind = "bait-and-switch"
            q = 0.25
            [srrs]
            enabled = true
        "#;
        let cfg = SimConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.nodes, 20);
        assert_eq!(cfg.k, 8);
        assert_eq!(cfg.adversary.q(), 0.25);
        assert_eq!(cfg.delay, DelayModel::ProbSync { delta: 0.2, eps: 0.01 });
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut SimConfig)| {
            let mut c = SimConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.k = 1));
        assert!(bad(|c| c.theta = 0.5));
        assert!(bad(|c| c.lambda = 0.0));
        assert!(bad(|c| c.relay = false));
        assert!(bad(|c| c.adversary = AdversaryConfig::BaitAndSwitch { q: 1.0, start: 1.0, alpha: None, max_spends: 10 }));
        assert!(bad(|c| c.adversary = AdversaryConfig::MetastabilityI { delta: 1.0, gamma: 2.0, rounds: 3, attack: true }));
        assert!(SimConfig::from_toml("unknown_field = 3").is_err());
    }
}
