//! Declarative run configuration, loaded from TOML.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Round, Slot, ValidatorId};
use crate::validator::{Clock, Mode, Params};

/// Upper bound on `horizon` (in slots).
pub const MAX_HORIZON: u64 = 5_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    A,
    B,
    /// Both modes on the same schedule, compared by the equivalence checker.
    AB,
}

impl RunMode {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            RunMode::A => vec![Mode::A],
            RunMode::B => vec![Mode::B],
            RunMode::AB => vec![Mode::A, Mode::B],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Latency {
    /// Every post-GST message takes exactly Δ rounds.
    #[default]
    Max,
    /// Post-GST delays drawn uniformly from `1..=Δ`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerRule {
    #[default]
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposerOverride {
    pub slot: Slot,
    pub validator: ValidatorId,
}

/// The validator sleeps during rounds `[from, until)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepInterval {
    pub validator: ValidatorId,
    pub from: Round,
    pub until: Round,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub validator: ValidatorId,
    pub round: Round,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxInjection {
    pub round: Round,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Corrupted validators keep behaving honestly.
    #[default]
    None,
    /// Corrupted validators send nothing.
    Silent,
    /// Corrupted validators vote and propose twice, splitting recipients.
    Equivocate,
    /// Colluders run one honest copy per partition side and feed each side
    /// its own messages, so both sides finalize conflicting chains.
    DoubleFinalization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub delta: u64,
    pub kappa: i64,
    #[serde(default)]
    pub gst: Round,
    #[serde(default)]
    pub gat: Round,
    /// Number of slots to simulate.
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default)]
    pub latency: Latency,
    #[serde(default)]
    pub proposers: ProposerRule,
    #[serde(default)]
    pub proposer_override: Vec<ProposerOverride>,
    #[serde(default)]
    pub sleep: Vec<SleepInterval>,
    #[serde(default)]
    pub corrupt: Vec<Corruption>,
    #[serde(default)]
    pub adversary: Strategy,
    /// Before GST, messages between members of the same group (and to or from
    /// corrupted validators) arrive after Δ; everything else waits for GST.
    #[serde(default)]
    pub partition: Vec<Vec<ValidatorId>>,
    /// Round at which the partition starts; all links are fast before it.
    #[serde(default)]
    pub partition_from: Round,
    /// Transactions injected at every vote round.
    #[serde(default = "default_tx_per_slot")]
    pub tx_per_slot: u32,
    #[serde(default)]
    pub tx: Vec<TxInjection>,
    /// Checkers whose failure is the expected outcome of this scenario.
    #[serde(default)]
    pub expected_fail: Vec<String>,
}

fn default_mode() -> RunMode {
    RunMode::B
}

fn default_tx_per_slot() -> u32 {
    1
}

impl Scenario {
    /// A fully honest, fully awake, synchronous scenario.
    pub fn honest(n: usize, delta: u64, kappa: i64, horizon: u64, seed: u64) -> Scenario {
        Scenario {
            n,
            delta,
            kappa,
            gst: 0,
            gat: 0,
            horizon,
            seed,
            mode: RunMode::B,
            latency: Latency::Max,
            proposers: ProposerRule::Random,
            proposer_override: Vec::new(),
            sleep: Vec::new(),
            corrupt: Vec::new(),
            adversary: Strategy::None,
            partition: Vec::new(),
            partition_from: 0,
            tx_per_slot: 1,
            tx: Vec::new(),
            expected_fail: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 {
            return Err(invalid("n", "need at least one validator"));
        }
        if self.delta == 0 {
            return Err(invalid("delta", "must be at least 1"));
        }
        if self.kappa < 2 {
            return Err(invalid("kappa", format!("must be greater than 1, got {}", self.kappa)));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(invalid("horizon", format!("must be in 1..={MAX_HORIZON}, got {}", self.horizon)));
        }
        let in_range = |v: ValidatorId| v.index() < self.n;
        for o in &self.proposer_override {
            if !in_range(o.validator) || o.slot < 0 {
                return Err(invalid("proposer_override", format!("bad entry for slot {}", o.slot)));
            }
        }
        for s in &self.sleep {
            if !in_range(s.validator) {
                return Err(invalid("sleep", format!("unknown validator {}", s.validator)));
            }
            if s.from >= s.until {
                return Err(invalid("sleep", format!("empty interval [{}, {}) for {}", s.from, s.until, s.validator)));
            }
            if s.until > self.gat {
                return Err(invalid("sleep", format!("{} sleeps until {} after gat {}", s.validator, s.until, self.gat)));
            }
        }
        let mut corrupted = BTreeSet::new();
        for c in &self.corrupt {
            if !in_range(c.validator) || !corrupted.insert(c.validator) {
                return Err(invalid("corrupt", format!("bad or repeated validator {}", c.validator)));
            }
        }
        let mut grouped = BTreeSet::new();
        for g in &self.partition {
            for v in g {
                if !in_range(*v) || !grouped.insert(*v) {
                    return Err(invalid("partition", format!("bad or repeated validator {v}")));
                }
            }
        }
        if self.adversary == Strategy::DoubleFinalization {
            if self.partition.len() != 2 {
                return Err(invalid("partition", "double_finalization needs exactly two groups"));
            }
            if self.corrupt.iter().any(|c| c.round != 0) {
                return Err(invalid("corrupt", "double_finalization colluders must be corrupted at round 0"));
            }
        }
        Ok(())
    }

    pub fn clock(&self) -> Clock {
        Clock::new(self.delta)
    }

    pub fn params(&self, mode: Mode) -> Params {
        Params { n: self.n, delta: self.delta, kappa: self.kappa, mode }
    }

    pub fn horizon_rounds(&self) -> Round {
        self.horizon * 4 * self.delta
    }

    /// Validators corrupted at some point of the run.
    pub fn corrupted_set(&self) -> BTreeSet<ValidatorId> {
        self.corrupt.iter().map(|c| c.validator).collect()
    }

    pub fn corruption_round(&self, v: ValidatorId) -> Option<Round> {
        self.corrupt.iter().find(|c| c.validator == v).map(|c| c.round)
    }

    /// Whether `v` is still honest at round `r`.
    pub fn honest_at(&self, v: ValidatorId, r: Round) -> bool {
        self.corruption_round(v).is_none_or(|c| r < c)
    }

    /// First round at which post-stabilization guarantees are checked:
    /// zero in a synchronous, always-awake run, else `max(GST, GAT) + 4Δ`.
    pub fn t_after(&self) -> Round {
        if self.gst == 0 && self.gat == 0 {
            0
        } else {
            self.gst.max(self.gat) + 4 * self.delta
        }
    }

    /// First round at which the available chain is checked for safety and
    /// liveness: zero under synchrony even with sleepy validators, since
    /// dynamic availability does not wait for GAT.
    pub fn available_from(&self) -> Round {
        if self.gst == 0 {
            0
        } else {
            self.t_after()
        }
    }

    pub fn is_expected_fail(&self, checker: &str) -> bool {
        self.expected_fail.iter().any(|c| c == checker)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let s = Scenario::from_toml("n = 4\ndelta = 1\nkappa = 2\ngst = 0\nhorizon = 6\n").unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.mode, RunMode::B);
        assert_eq!(s.tx_per_slot, 1);
        assert_eq!(s.horizon_rounds(), 24);
    }

    #[test]
    fn rejects_kappa_one() {
        let err = Scenario::from_toml("n = 4\ndelta = 1\nkappa = 1\nhorizon = 6\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { field: "kappa", .. }));
    }

    #[test]
    fn rejects_unknown_field_and_oversized_horizon() {
        assert!(matches!(
            Scenario::from_toml("n = 4\ndelta = 1\nkappa = 2\nhorizon = 6\nbogus = 1\n"),
            Err(ScenarioError::Parse(_))
        ));
        let big = format!("n = 4\ndelta = 1\nkappa = 2\nhorizon = {}\n", MAX_HORIZON + 1);
        assert!(matches!(Scenario::from_toml(&big), Err(ScenarioError::Invalid { field: "horizon", .. })));
    }

    #[test]
    fn sleep_must_end_by_gat() {
        let text = "n = 4\ndelta = 1\nkappa = 2\nhorizon = 6\ngat = 8\n[[sleep]]\nvalidator = 1\nfrom = 2\nuntil = 9\n";
        assert!(matches!(Scenario::from_toml(text), Err(ScenarioError::Invalid { field: "sleep", .. })));
    }

    #[test]
    fn toml_round_trip() {
        let mut s = Scenario::honest(5, 2, 3, 10, 9);
        s.sleep.push(SleepInterval { validator: ValidatorId(1), from: 0, until: 4 });
        s.gat = 4;
        s.mode = RunMode::AB;
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }
}
