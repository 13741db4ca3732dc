//! Scenario execution, checker selection and canned attack scenarios.

use thiserror::Error;

use crate::checkers::{all_checkers, check_trace, Verdict};
use crate::ids::ValidatorId;
use crate::scenario::{Corruption, ProposerRule, Scenario, ScenarioError, Strategy};
use crate::sim::World;
use crate::trace::{Header, Record, Trace};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("unknown checker `{0}`")]
    UnknownChecker(String),
    #[error("unknown attack `{0}` (expected one of: {1})")]
    UnknownAttack(String, String),
    #[error("attack needs {0}")]
    AttackParams(String),
}

/// Resolves `all` or a comma-separated list of checker names.
pub fn select_checkers(list: &str) -> Result<Vec<&'static str>, RunError> {
    let all = all_checkers();
    if list.trim() == "all" {
        return Ok(all);
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| all.iter().copied().find(|c| *c == name).ok_or_else(|| RunError::UnknownChecker(name.into())))
        .collect()
}

/// Simulates every mode the scenario asks for. The trace has no verdicts.
pub fn simulate(scenario: &Scenario) -> Result<Trace, RunError> {
    scenario.validate()?;
    let mut records = Vec::new();
    for mode in scenario.mode.modes() {
        records.extend(World::new(scenario, mode).run());
    }
    Ok(Trace { header: Header::new(scenario.clone()), records })
}

/// Simulates and appends the verdicts of the selected checkers.
pub fn run_and_check(scenario: &Scenario, selected: &[&str]) -> Result<Trace, RunError> {
    let mut trace = simulate(scenario)?;
    let verdicts = check_trace(&trace, selected);
    trace.records.extend(verdicts.into_iter().map(Record::Verdict));
    Ok(trace)
}

/// Re-runs the selected checkers on a loaded trace, ignoring stored verdicts.
pub fn recheck(trace: &Trace, selected: &[&str]) -> Vec<Verdict> {
    check_trace(&trace.without_verdicts(), selected)
}

pub const ATTACKS: &[&str] = &["double-finalization", "equivocation", "silent"];

/// Builds a canned attack with `colluders` corrupted validators `0..colluders`.
pub fn attack_scenario(name: &str, n: usize, colluders: usize) -> Result<Scenario, RunError> {
    if colluders > n {
        return Err(RunError::AttackParams(format!("at most n = {n} colluders, got {colluders}")));
    }
    let corrupt = (0..colluders as u32).map(|i| Corruption { validator: ValidatorId(i), round: 0 }).collect();
    let mut s = Scenario::honest(n, 1, 3, 40, 0);
    s.corrupt = corrupt;
    match name {
        "double-finalization" => {
            // Colluders propose the first slots; each side sees a quorum of
            // its own half plus every colluder and nothing from the other half.
            let honest: Vec<ValidatorId> = (colluders as u32..n as u32).map(ValidatorId).collect();
            if colluders == 0 || honest.len() < 2 {
                return Err(RunError::AttackParams("at least one colluder and two honest validators".into()));
            }
            let (left, right) = honest.split_at(honest.len() / 2);
            s.horizon = 12;
            s.gst = s.horizon_rounds() + 1;
            s.adversary = Strategy::DoubleFinalization;
            s.proposers = ProposerRule::RoundRobin;
            s.partition = vec![left.to_vec(), right.to_vec()];
            s.expected_fail = vec![crate::checkers::FIN_SAFETY.to_string()];
        }
        "equivocation" => s.adversary = Strategy::Equivocate,
        "silent" => s.adversary = Strategy::Silent,
        other => return Err(RunError::UnknownAttack(other.into(), ATTACKS.join(", "))),
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_selection() {
        assert_eq!(select_checkers("all").unwrap().len(), all_checkers().len());
        assert_eq!(select_checkers("safety, prefix").unwrap(), vec!["safety", "prefix"]);
        assert!(matches!(select_checkers("safety,bogus"), Err(RunError::UnknownChecker(c)) if c == "bogus"));
    }

    #[test]
    fn attack_parameters_are_checked() {
        assert!(attack_scenario("double-finalization", 9, 3).is_ok());
        assert!(attack_scenario("double-finalization", 3, 3).is_err());
        assert!(attack_scenario("nope", 4, 1).is_err());
        assert!(attack_scenario("silent", 4, 5).is_err());
    }
}
