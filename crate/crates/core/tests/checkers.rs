//! Checkers flag tampered traces, and their witnesses re-verify.

use std::sync::Arc;

use ebbflow::chain::Block;
use ebbflow::checkers::{check_trace, Verdict, Witness};
use ebbflow::ids::{BlockId, TxId, ValidatorId};
use ebbflow::messages::{Checkpoint, Message, VoteMsg};
use ebbflow::runner::simulate;
use ebbflow::scenario::Scenario;
use ebbflow::trace::{Record, RunIndex, Trace};
use ebbflow::validator::Mode;

fn honest_trace() -> Trace {
    simulate(&Scenario::honest(4, 1, 3, 12, 9)).unwrap()
}

fn genesis(trace: &Trace) -> BlockId {
    RunIndex::build(trace, Mode::B).tree.genesis()
}

/// Adds a slot-0 block off genesis that conflicts with every proposal.
fn add_fork(trace: &mut Trace) -> BlockId {
    let block = Block::new(Some(genesis(trace)), 0, vec![TxId::derive(99_999, 0)]);
    let id = block.id;
    trace.records.push(Record::Block { run: Mode::B, round: 0, block });
    id
}

/// Rewrites the last snapshot of `v`.
fn edit_last_snapshot(trace: &mut Trace, v: ValidatorId, f: impl FnOnce(&mut ebbflow::trace::StateRecord)) {
    let rec = trace
        .records
        .iter_mut()
        .rev()
        .find(|r| matches!(r, Record::Snapshot { validator, .. } if *validator == v))
        .unwrap();
    if let Record::Snapshot { state, .. } = rec {
        f(state);
    }
}

fn single(trace: &Trace, checker: &str) -> Verdict {
    let mut v = check_trace(trace, &[checker]);
    assert_eq!(v.len(), 1);
    v.remove(0)
}

fn assert_flagged(trace: &Trace, checker: &str) -> Witness {
    let v = single(trace, checker);
    assert!(!v.pass, "{checker} should fail: {}", v.detail);
    let w = v.witness.expect("failure carries a witness");
    assert!(w.reverify(&RunIndex::build(trace, Mode::B)), "{checker} witness does not re-verify: {w:?}");
    // and the witness is not confirmed by the untampered trace
    assert!(!w.reverify(&RunIndex::build(&honest_trace(), Mode::B)));
    w
}

#[test]
fn honest_trace_passes_everything() {
    let trace = honest_trace();
    for v in check_trace(&trace, &ebbflow::checkers::all_checkers()) {
        assert!(v.pass, "{}: {}", v.checker, v.detail);
        assert!(v.witness.is_none());
    }
}

#[test]
fn conflicting_available_chain_breaks_safety_and_reorg_resilience() {
    let mut trace = honest_trace();
    let fork = add_fork(&mut trace);
    edit_last_snapshot(&mut trace, ValidatorId(2), |s| s.state.chain_ava = fork);
    assert!(matches!(assert_flagged(&trace, "safety"), Witness::ConflictingChains { .. }));
    assert!(matches!(assert_flagged(&trace, "reorg_resilience"), Witness::Reorged { .. }));
}

#[test]
fn stale_chain_breaks_liveness() {
    let mut trace = honest_trace();
    let g = genesis(&trace);
    edit_last_snapshot(&mut trace, ValidatorId(1), |s| {
        s.state.chain_ava = g;
        s.state.chain_fin = g;
    });
    assert!(matches!(assert_flagged(&trace, "liveness"), Witness::MissingTx { .. }));
    assert!(matches!(assert_flagged(&trace, "fin_monotonicity"), Witness::FinRegressed { .. }));
}

#[test]
fn finalized_chain_off_the_available_chain_breaks_prefix() {
    let mut trace = honest_trace();
    let fork = add_fork(&mut trace);
    edit_last_snapshot(&mut trace, ValidatorId(0), |s| s.state.chain_fin = fork);
    assert!(matches!(assert_flagged(&trace, "prefix"), Witness::FinNotPrefix { .. }));
}

#[test]
fn honest_double_vote_is_reported() {
    let mut trace = honest_trace();
    let fork = add_fork(&mut trace);
    let g = Checkpoint::genesis(genesis(&trace));
    let first = trace
        .records
        .iter()
        .find_map(|r| match r {
            Record::Send { msg: Message::Vote(v), honest: true, .. } if v.slot == 1 => Some(v.clone()),
            _ => None,
        })
        .unwrap();
    let twin = VoteMsg::with_link(fork, g, Checkpoint::new(fork, first.fin_vote.unwrap().target.c), 1, first.voter);
    let msg = Message::Vote(Arc::new(twin));
    let idx = trace.records.iter().filter(|r| matches!(r, Record::Send { run: Mode::B, .. })).count() as u32;
    trace.records.push(Record::Send { run: Mode::B, round: 5, idx, id: msg.id(), sender: first.voter, honest: true, msg });
    assert!(matches!(assert_flagged(&trace, "never_slashed"), Witness::Slashed { .. }));
}

#[test]
fn missed_fast_confirmation_is_reported() {
    let mut trace = honest_trace();
    let g = genesis(&trace);
    // v3's state at the fast-confirm round of slot 4 (Δ = 1: round 18)
    let rec = trace
        .records
        .iter_mut()
        .find(|r| matches!(r, Record::Snapshot { validator: ValidatorId(3), round: 18, .. }))
        .unwrap();
    if let Record::Snapshot { state, .. } = rec {
        state.state.chain_ava = g;
    }
    let w = assert_flagged(&trace, "fast_confirm");
    assert!(matches!(w, Witness::Late { slot: 4, .. }));
}

#[test]
fn expected_failures_are_tolerated_but_reported() {
    let mut trace = honest_trace();
    trace.header.scenario.expected_fail = vec!["safety".into()];
    let fork = add_fork(&mut trace);
    edit_last_snapshot(&mut trace, ValidatorId(2), |s| s.state.chain_ava = fork);
    let v = single(&trace, "safety");
    assert!(!v.pass && v.expected_fail && v.ok());
}
