//! Browser bindings for the simulator. Every export takes plain strings or
//! numbers and returns a JSON string, either a report or `{"error": ...}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ebbflow::checkers::{all_checkers, attribution, Verdict};
use ebbflow::ids::Slot;
use ebbflow::runner::{attack_scenario, recheck, run_and_check};
use ebbflow::scenario::Scenario;
use ebbflow::trace::{RunIndex, Trace};
use ebbflow::validator::Mode;

/// Lowest and highest tip slot among honest validators at the end of a slot.
#[derive(Debug, Serialize, PartialEq)]
pub struct SlotRow {
    pub slot: Slot,
    pub ava: (Slot, Slot),
    pub fin: (Slot, Slot),
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub slots: Vec<SlotRow>,
    pub implicated: Option<Vec<u32>>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub ok: bool,
    pub runs: Vec<RunSummary>,
    pub verdicts: Vec<Verdict>,
}

fn summarize(trace: &Trace, verdicts: Vec<Verdict>) -> Report {
    let s = trace.scenario();
    let clock = s.clock();
    let mut runs = Vec::new();
    for mode in trace.runs() {
        let run = RunIndex::build(trace, mode);
        let mut slots = Vec::new();
        for t in 0..s.horizon as Slot {
            let r = clock.merge(t);
            let states = run.active_snapshots(r);
            if states.is_empty() {
                continue;
            }
            let slot_of = |id: &ebbflow::ids::BlockId| run.tree.slot(id).unwrap_or(-1);
            let span = |f: &dyn Fn(&ebbflow::trace::StateRecord) -> Slot| {
                let all: Vec<Slot> = states.iter().map(|(_, st)| f(st)).collect();
                (*all.iter().min().unwrap(), *all.iter().max().unwrap())
            };
            slots.push(SlotRow {
                slot: t,
                ava: span(&|st| slot_of(&st.state.chain_ava)),
                fin: span(&|st| slot_of(&st.state.chain_fin)),
            });
        }
        let implicated = attribution(&run).map(|(_, _, named)| named.iter().map(|v| v.0).collect());
        runs.push(RunSummary { mode, slots, implicated });
    }
    let ok = verdicts.iter().all(Verdict::ok);
    Report { ok, runs, verdicts }
}

fn to_json<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).expect("report serializes"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

pub fn simulate_report(scenario_toml: &str) -> Result<Report, String> {
    let s = Scenario::from_toml(scenario_toml).map_err(|e| e.to_string())?;
    let trace = run_and_check(&s, &all_checkers()).map_err(|e| e.to_string())?;
    let verdicts = trace.verdicts().into_iter().cloned().collect();
    Ok(summarize(&trace, verdicts))
}

pub fn attack_report(name: &str, n: usize, colluders: usize) -> Result<Report, String> {
    let s = attack_scenario(name, n, colluders).map_err(|e| e.to_string())?;
    let trace = run_and_check(&s, &all_checkers()).map_err(|e| e.to_string())?;
    let verdicts = trace.verdicts().into_iter().cloned().collect();
    Ok(summarize(&trace, verdicts))
}

pub fn check_report(trace_jsonl: &str) -> Result<Report, String> {
    let trace = Trace::read_jsonl(trace_jsonl.as_bytes()).map_err(|e| e.to_string())?;
    let verdicts = recheck(&trace, &all_checkers());
    Ok(summarize(&trace, verdicts))
}

/// Runs a TOML scenario and reports per-slot chain progress and verdicts.
#[wasm_bindgen]
pub fn simulate(scenario_toml: &str) -> String {
    to_json(simulate_report(scenario_toml))
}

/// Runs one of the canned attacks (`double-finalization`, `equivocation`,
/// `silent`) with validators `0..colluders` corrupted.
#[wasm_bindgen]
pub fn attack(name: &str, n: usize, colluders: usize) -> String {
    to_json(attack_report(name, n, colluders))
}

/// Re-checks a JSON-lines trace.
#[wasm_bindgen]
pub fn check(trace_jsonl: &str) -> String {
    to_json(check_report(trace_jsonl))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "n = 4\ndelta = 1\nkappa = 3\nhorizon = 8\n";

    #[test]
    fn simulate_reports_progress() {
        let report = simulate_report(SMALL).unwrap();
        assert!(report.ok);
        let rows = &report.runs[0].slots;
        assert_eq!(rows.len(), 8);
        assert!(rows.windows(2).all(|w| w[0].ava.0 <= w[1].ava.0));
        assert!(rows.iter().all(|r| r.fin.1 <= r.ava.1));
        assert!(rows.last().unwrap().fin.0 >= 0);
    }

    #[test]
    fn errors_become_json() {
        let out: serde_json::Value = serde_json::from_str(&simulate("n = 4\nkappa = 1\n")).unwrap();
        assert!(out["error"].as_str().is_some());
        let out: serde_json::Value = serde_json::from_str(&attack("nope", 4, 1)).unwrap();
        assert!(out["error"].as_str().unwrap().contains("nope"));
    }

    #[test]
    fn attack_names_the_colluders() {
        let out: serde_json::Value = serde_json::from_str(&attack("double-finalization", 9, 3)).unwrap();
        assert_eq!(out["ok"], true);
        assert_eq!(out["runs"][0]["implicated"], serde_json::json!([0, 1, 2]));
    }

    #[test]
    fn check_round_trips_a_trace() {
        let s = Scenario::from_toml(SMALL).unwrap();
        let trace = run_and_check(&s, &all_checkers()).unwrap();
        let text = String::from_utf8(trace.to_jsonl()).unwrap();
        let report = check_report(&text).unwrap();
        let stored: Vec<Verdict> = trace.verdicts().into_iter().cloned().collect();
        assert_eq!(report.verdicts, stored);
        assert!(check_report("garbage").is_err());
    }
}
