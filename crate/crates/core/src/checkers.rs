//! Property checkers over a recorded trace.
//!
//! Every checker reads only the trace. A failing verdict carries a typed
//! witness that [`Witness::reverify`] can confirm against the same trace.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::finality::{attribute_conflicting_finality, detect_slashable, implicated, FinalityState, SlashingEvidence};
use crate::ids::{supermajority, BlockId, Round, Slot, TxId, ValidatorId};
use crate::messages::{Checkpoint, DynKey, Message};
use crate::scenario::{Scenario, Strategy};
use crate::sim::ProposerSchedule;
use crate::trace::{Event, RunIndex, Trace};
use crate::validator::{Activity, Mode};

pub const SAFETY: &str = "safety";
pub const LIVENESS: &str = "liveness";
pub const REORG_RESILIENCE: &str = "reorg_resilience";
pub const PREFIX: &str = "prefix";
pub const FIN_MONOTONICITY: &str = "fin_monotonicity";
pub const FIN_SAFETY: &str = "fin_safety";
pub const ACCOUNTABILITY: &str = "accountability";
pub const NEVER_SLASHED: &str = "never_slashed";
pub const FAST_FINALITY: &str = "fast_finality";
pub const FAST_CONFIRM: &str = "fast_confirm";
pub const EQUIVALENCE: &str = "equivalence";

/// Per-run checkers, in reporting order.
pub const PER_RUN: &[&str] = &[
    SAFETY,
    LIVENESS,
    REORG_RESILIENCE,
    PREFIX,
    FIN_MONOTONICITY,
    FIN_SAFETY,
    ACCOUNTABILITY,
    NEVER_SLASHED,
    FAST_FINALITY,
    FAST_CONFIRM,
];

pub fn all_checkers() -> Vec<&'static str> {
    PER_RUN.iter().copied().chain([EQUIVALENCE]).collect()
}

/// A validator's chain at a round, as recorded in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub validator: ValidatorId,
    pub round: Round,
    pub chain: BlockId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "witness", rename_all = "snake_case")]
pub enum Witness {
    /// Two confirmed chains that conflict.
    ConflictingChains { a: Observation, b: Observation },
    /// An active validator whose confirmed chain lacks a transaction past its deadline.
    MissingTx { tx: TxId, injected: Round, at: Observation },
    /// An honest proposal conflicting with a later confirmed chain.
    Reorged { slot: Slot, proposal: BlockId, at: Observation },
    /// `chain_fin` not a prefix of `chain_ava` in the same snapshot.
    FinNotPrefix { fin: Observation, ava: BlockId },
    /// `chain_fin` at a later snapshot does not extend an earlier one.
    FinRegressed { before: Observation, after: Observation },
    /// Two honest final views finalized conflicting checkpoints.
    ConflictingFinality { a: ValidatorId, a_checkpoint: Checkpoint, b: ValidatorId, b_checkpoint: Checkpoint },
    /// Attribution that names too few validators or an honest one.
    Attribution { a: ValidatorId, b: ValidatorId, implicated: Vec<ValidatorId> },
    /// Slashable pair of fin-votes sent by an honest validator.
    Slashed { evidence: SlashingEvidence },
    /// An honest proposal that is not finalized (or fast-confirmed) in time.
    Late { slot: Slot, proposal: BlockId, at: Observation },
    /// Modes A and B diverge in a slot.
    Divergence { slot: Slot, validator: Option<ValidatorId>, what: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub checker: String,
    /// `None` for checkers comparing runs.
    pub run: Option<Mode>,
    pub pass: bool,
    pub detail: String,
    pub witness: Option<Witness>,
    /// Failure of this checker is tolerated for this scenario.
    pub expected_fail: bool,
}

impl Verdict {
    /// Pass, or a failure the scenario declares as expected.
    pub fn ok(&self) -> bool {
        self.pass || self.expected_fail
    }
}

fn pass(detail: impl Into<String>) -> (bool, String, Option<Witness>) {
    (true, detail.into(), None)
}

fn fail(detail: impl Into<String>, w: Witness) -> (bool, String, Option<Witness>) {
    (false, detail.into(), Some(w))
}

/// Runs one per-run checker by name.
pub fn check_run(name: &str, run: &RunIndex) -> Option<Verdict> {
    let (ok, detail, witness) = match name {
        SAFETY => safety(run),
        LIVENESS => liveness(run),
        REORG_RESILIENCE => reorg_resilience(run),
        PREFIX => prefix(run),
        FIN_MONOTONICITY => fin_monotonicity(run),
        FIN_SAFETY => fin_safety(run),
        ACCOUNTABILITY => accountability(run),
        NEVER_SLASHED => never_slashed(run),
        FAST_FINALITY => fast_finality(run),
        FAST_CONFIRM => fast_confirm(run),
        _ => return None,
    };
    Some(Verdict {
        checker: name.to_string(),
        run: Some(run.mode),
        pass: ok,
        detail,
        witness,
        expected_fail: run.scenario.is_expected_fail(name),
    })
}

/// Runs the selected checkers over every run in the trace.
pub fn check_trace(trace: &Trace, selected: &[&str]) -> Vec<Verdict> {
    let runs: Vec<RunIndex> = trace.runs().into_iter().map(|m| RunIndex::build(trace, m)).collect();
    let mut out = Vec::new();
    for name in selected {
        if *name == EQUIVALENCE {
            out.push(equivalence_verdict(&runs));
            continue;
        }
        for run in &runs {
            out.extend(check_run(name, run));
        }
    }
    out
}

fn equivalence_verdict(runs: &[RunIndex]) -> Verdict {
    let a = runs.iter().find(|r| r.mode == Mode::A);
    let b = runs.iter().find(|r| r.mode == Mode::B);
    let (ok, detail, witness) = match (a, b) {
        (Some(a), Some(b)) => equivalence(a, b),
        _ => pass("not a differential run"),
    };
    let expected_fail = runs.first().is_some_and(|r| r.scenario.is_expected_fail(EQUIVALENCE));
    Verdict { checker: EQUIVALENCE.to_string(), run: None, pass: ok, detail, witness, expected_fail }
}

/// Snapshots of active honest validators at rounds `>= from`.
fn active_observations(run: &RunIndex, from: Round) -> impl Iterator<Item = (Observation, BlockId)> + '_ {
    run.snapshots.iter().flat_map(move |(v, list)| {
        list.iter()
            .filter(move |(r, _, s)| {
                *r >= from && run.honest_at(*v, *r) && matches!(s.state.activity, Activity::Active)
            })
            .map(move |(r, _, s)| (Observation { validator: *v, round: *r, chain: s.state.chain_ava }, s.state.chain_fin))
    })
}

/// First occurrence of every distinct chain among the observations.
fn distinct_chains(obs: impl Iterator<Item = Observation>) -> BTreeMap<BlockId, Observation> {
    let mut out: BTreeMap<BlockId, Observation> = BTreeMap::new();
    for o in obs {
        out.entry(o.chain).or_insert(o);
    }
    out
}

fn conflicting_pair(run: &RunIndex, chains: &BTreeMap<BlockId, Observation>) -> Option<(Observation, Observation)> {
    let list: Vec<&Observation> = chains.values().collect();
    // every chain must be a prefix of the deepest one, else it conflicts with it
    let deepest = list.iter().max_by(|a, b| run.tree.chain_cmp(&a.chain, &b.chain))?;
    list.iter()
        .find(|o| !run.tree.extends(&deepest.chain, &o.chain))
        .map(|o| (**deepest, **o))
}

fn safety(run: &RunIndex) -> (bool, String, Option<Witness>) {
    let from = run.scenario.available_from();
    let chains = distinct_chains(active_observations(run, from).map(|(o, _)| o));
    match conflicting_pair(run, &chains) {
        None => pass(format!("{} distinct confirmed chains from round {from}, all compatible", chains.len())),
        Some((a, b)) => fail(
            format!("{} at round {} conflicts with {} at round {}", a.validator, a.round, b.validator, b.round),
            Witness::ConflictingChains { a, b },
        ),
    }
}

/// Confirmation deadline in rounds: `8κΔ + Δ`.
pub fn confirmation_time(s: &Scenario) -> Round {
    8 * s.kappa as u64 * s.delta + s.delta
}

fn liveness(run: &RunIndex) -> (bool, String, Option<Witness>) {
    let s = &run.scenario;
    let from = s.available_from();
    let t_conf = confirmation_time(s);
    let txs: Vec<(Round, TxId)> = run
        .events
        .iter()
        .filter_map(|(r, e)| match e {
            Event::Tx { id } if *r >= from => Some((*r, *id)),
            _ => None,
        })
        .collect();
    let mut sets: HashMap<BlockId, HashSet<TxId>> = HashMap::new();
    let mut checked = 0usize;
    for (o, _) in active_observations(run, from + t_conf) {
        let due = txs.partition_point(|(r, _)| r + t_conf <= o.round);
        if due == 0 {
            continue;
        }
        let set = sets.entry(o.chain).or_insert_with(|| run.tree.tx_set(&o.chain));
        if let Some((injected, tx)) = txs[..due].iter().find(|(_, tx)| !set.contains(tx)) {
            return fail(
                format!("tx {} injected at {} missing from {} at round {}", tx.short(), injected, o.validator, o.round),
                Witness::MissingTx { tx: *tx, injected: *injected, at: o },
            );
        }
        checked += 1;
    }
    pass(format!("{} txs, {checked} snapshots checked with T_conf = {t_conf}", txs.len()))
}

fn reorg_resilience(run: &RunIndex) -> (bool, String, Option<Witness>) {
    let from = run.scenario.available_from();
    // latest observation of each distinct confirmed chain
    let mut latest: BTreeMap<BlockId, Observation> = BTreeMap::new();
    for (o, _) in active_observations(run, from) {
        let e = latest.entry(o.chain).or_insert(o);
        if o.round > e.round {
            *e = o;
        }
    }
    let proposals: Vec<_> = run.honest_proposals().into_iter().filter(|(r, _)| *r >= from).collect();
    for (r, p) in &proposals {
        for o in latest.values().filter(|o| o.round >= *r) {
            if run.tree.conflicts(&p.chain_p, &o.chain).unwrap_or(false) {
                return fail(
                    format!("slot {} proposal conflicts with {} at round {}", p.slot, o.validator, o.round),
                    Witness::Reorged { slot: p.slot, proposal: p.chain_p, at: *o },
                );
            }
        }
    }
    pass(format!("{} honest proposals never reorged", proposals.len()))
}

fn honest_snapshots(run: &RunIndex) -> impl Iterator<Item = (ValidatorId, Round, BlockId, BlockId)> + '_ {
    run.snapshots.iter().flat_map(move |(v, list)| {
        list.iter()
            .filter(move |(r, _, _)| run.honest_at(*v, *r))
            .map(move |(r, _, s)| (*v, *r, s.state.chain_fin, s.state.chain_ava))
    })
}

fn prefix(run: &RunIndex) -> (bool, String, Option<Witness>) {
    if run.mode == Mode::A {
        return pass("mode A has no finalized chain");
    }
    let mut seen = HashSet::new();
    let mut n = 0usize;
    for (v, r, fin, ava) in honest_snapshots(run) {
        n += 1;
        if seen.insert((fin, ava)) && !run.tree.extends(&ava, &fin) {
            return fail(
                format!("{v} at round {r}: chain_fin is not a prefix of chain_ava"),
                Witness::FinNotPrefix { fin: Observation { validator: v, round: r, chain: fin }, ava },
            );
        }
    }
    pass(format!("{n} snapshots"))
}

fn fin_monotonicity(run: &RunIndex) -> (bool, String, Option<Witness>) {
    if run.mode == Mode::A {
        return pass("mode A has no finalized chain");
    }
    let mut prev: HashMap<ValidatorId, Observation> = HashMap::new();
    for (v, r, fin, _) in honest_snapshots(run) {
        let now = Observation { validator: v, round: r, chain: fin };
        if let Some(before) = prev.get(&v) {
            if before.chain != fin && !run.tree.extends(&fin, &before.chain) {
                return fail(
                    format!("{v}: chain_fin at round {r} does not extend the one at round {}", before.round),
                    Witness::FinRegressed { before: *before, after: now },
                );
            }
        }
        prev.insert(v, now);
    }
    pass(format!("{} validators", prev.len()))
}

/// Final views of validators that stay honest for the whole run.
fn honest_final_views(run: &RunIndex) -> BTreeMap<ValidatorId, crate::view::View> {
    let corrupted = run.scenario.corrupted_set();
    run.final_views().into_iter().filter(|(v, _)| !corrupted.contains(v)).collect()
}

/// Finalized checkpoints of every honest final view.
fn finalized_by_view(run: &RunIndex) -> BTreeMap<ValidatorId, BTreeSet<Checkpoint>> {
    honest_final_views(run)
        .iter()
        .map(|(v, view)| (*v, FinalityState::compute(&run.tree, view, run.scenario.n).finalized))
        .collect()
}

fn find_conflicting_finality(
    run: &RunIndex,
    fin: &BTreeMap<ValidatorId, BTreeSet<Checkpoint>>,
) -> Option<(ValidatorId, Checkpoint, ValidatorId, Checkpoint)> {
    let mut owner: BTreeMap<Checkpoint, ValidatorId> = BTreeMap::new();
    for (v, set) in fin {
        for c in set {
            owner.entry(*c).or_insert(*v);
        }
    }
    let deepest = owner.keys().max_by(|a, b| run.tree.chain_cmp(&a.chain, &b.chain))?;
    owner
        .iter()
        .find(|(c, _)| !run.tree.extends(&deepest.chain, &c.chain))
        .map(|(c, v)| (owner[deepest], *deepest, *v, *c))
}

fn fin_safety(run: &RunIndex) -> (bool, String, Option<Witness>) {
    if run.mode == Mode::A {
        return pass("mode A has no finalized chain");
    }
    let fin = finalized_by_view(run);
    match find_conflicting_finality(run, &fin) {
        None => pass(format!("{} honest views finalize compatible checkpoints", fin.len())),
        Some((a, ca, b, cb)) => fail(
            format!("{a} finalized slot {} and {b} finalized conflicting slot {}", ca.c, cb.c),
            Witness::ConflictingFinality { a, a_checkpoint: ca, b, b_checkpoint: cb },
        ),
    }
}

/// Validators implicated by the first conflicting finalization between two
/// honest final views, or `None` if finality is consistent.
pub fn attribution(run: &RunIndex) -> Option<(ValidatorId, ValidatorId, BTreeSet<ValidatorId>)> {
    let fin = finalized_by_view(run);
    let (a, _, b, _) = find_conflicting_finality(run, &fin)?;
    let views = honest_final_views(run);
    let evidence = attribute_conflicting_finality(&run.tree, &views[&a], &views[&b], run.scenario.n).ok()?;
    Some((a, b, implicated(&evidence)))
}

fn accountability(run: &RunIndex) -> (bool, String, Option<Witness>) {
    if run.mode == Mode::A {
        return pass("mode A has no finalized chain");
    }
    let Some((a, b, named)) = attribution(run) else {
        return pass("no conflicting finalization to attribute");
    };
    let s = &run.scenario;
    let colluders = s.corrupted_set();
    let threshold = s.n.div_ceil(3);
    let detail = format!("views of {a} and {b} conflict; implicated {:?}", named.iter().map(|v| v.0).collect::<Vec<_>>());
    if named.len() >= threshold && named.is_subset(&colluders) {
        let all = if s.adversary == Strategy::DoubleFinalization && named != colluders {
            " (not every colluder)"
        } else {
            ""
        };
        return pass(format!("{detail}{all}"));
    }
    fail(detail, Witness::Attribution { a, b, implicated: named.into_iter().collect() })
}

fn never_slashed(run: &RunIndex) -> (bool, String, Option<Witness>) {
    let votes: Vec<_> = run
        .sends
        .iter()
        .filter(|s| s.honest)
        .filter_map(|s| match &s.msg {
            Message::Vote(v) => v.fin_vote,
            _ => None,
        })
        .collect();
    match detect_slashable(&votes).into_iter().next() {
        None => pass(format!("{} honest fin-votes", votes.len())),
        Some(e) => fail(format!("honest {} sent a slashable pair", e.voter), Witness::Slashed { evidence: e }),
    }
}

/// Honest proposal of slot `t`, if the elected proposer sent one while honest.
fn honest_proposal(run: &RunIndex, t: Slot) -> Option<BlockId> {
    let proposer = *run.proposers.get(&t)?;
    run.honest_proposals()
        .into_iter()
        .find(|(_, p)| p.slot == t && p.proposer == proposer)
        .map(|(_, p)| p.chain_p)
}

/// Whether every validator honest at the end is active at each phase round
/// of slots `from..=to`.
fn full_participation(run: &RunIndex, from: Slot, to: Slot) -> bool {
    let clock = run.scenario.clock();
    let start = clock.propose(from);
    let end = clock.merge(to);
    run.snapshots.iter().filter(|(v, _)| run.honest_at(**v, end)).all(|(_, list)| {
        list.iter()
            .filter(|(r, _, _)| (start..=end).contains(r))
            .all(|(_, _, s)| matches!(s.state.activity, Activity::Active))
    })
}

fn fast_finality(run: &RunIndex) -> (bool, String, Option<Witness>) {
    if run.mode == Mode::A {
        return pass("mode A has no finalized chain");
    }
    let s = &run.scenario;
    let clock = s.clock();
    let mut checked = 0usize;
    for t in 0..(s.horizon as Slot - 3) {
        if clock.propose(t) < s.t_after() || !full_participation(run, t, t + 3) {
            continue;
        }
        let (Some(chain_p), Some(_)) = (honest_proposal(run, t), honest_proposal(run, t + 1)) else {
            continue;
        };
        let deadline = clock.fastconfirm(t + 3);
        for (v, st) in run.active_snapshots(deadline) {
            if !run.tree.extends(&st.state.chain_fin, &chain_p) {
                let at = Observation { validator: v, round: deadline, chain: st.state.chain_fin };
                return fail(
                    format!("slot {t} proposal not finalized by {v} at round {deadline}"),
                    Witness::Late { slot: t, proposal: chain_p, at },
                );
            }
        }
        checked += 1;
    }
    pass(format!("{checked} slots with consecutive honest proposers"))
}

fn fast_confirm(run: &RunIndex) -> (bool, String, Option<Witness>) {
    let s = &run.scenario;
    if run.compliance.as_ref().is_some_and(|c| !c.compliant) {
        return pass("execution not compliant");
    }
    let clock = s.clock();
    let mut checked = 0usize;
    for t in 0..s.horizon as Slot {
        if clock.propose(t) < s.gst {
            continue;
        }
        if run.active_snapshots(clock.vote(t)).len() < supermajority(s.n) {
            continue;
        }
        let Some(chain_p) = honest_proposal(run, t) else {
            continue;
        };
        let at = clock.fastconfirm(t);
        for (v, st) in run.active_snapshots(at) {
            if !run.tree.extends(&st.state.chain_ava, &chain_p) {
                let at = Observation { validator: v, round: at, chain: st.state.chain_ava };
                return fail(
                    format!("slot {t} proposal not fast-confirmed by {v}"),
                    Witness::Late { slot: t, proposal: chain_p, at },
                );
            }
        }
        checked += 1;
    }
    pass(format!("{checked} slots with a supermajority of active validators"))
}

fn honest_keys_by_slot(run: &RunIndex) -> BTreeMap<Slot, Vec<DynKey>> {
    let mut out: BTreeMap<Slot, Vec<DynKey>> = BTreeMap::new();
    for s in run.sends.iter().filter(|s| s.honest) {
        out.entry(s.msg.slot()).or_default().push(s.msg.dyn_key());
    }
    for keys in out.values_mut() {
        keys.sort();
    }
    out
}

fn equivalence(a: &RunIndex, b: &RunIndex) -> (bool, String, Option<Witness>) {
    let clock = a.scenario.clock();
    for t in 0..a.scenario.horizon as Slot {
        let r = clock.vote(t);
        for v in a.snapshots.keys() {
            let ma = a.snapshot(*v, r).and_then(|s| s.state.mfc);
            let mb = b.snapshot(*v, r).and_then(|s| s.state.mfc);
            if ma != mb {
                return fail(
                    format!("slot {t}: fork choice of {v} differs"),
                    Witness::Divergence { slot: t, validator: Some(*v), what: "mfc".into() },
                );
            }
        }
    }
    let (ka, kb) = (honest_keys_by_slot(a), honest_keys_by_slot(b));
    let slots: BTreeSet<Slot> = ka.keys().chain(kb.keys()).copied().collect();
    for t in &slots {
        if ka.get(t) != kb.get(t) {
            return fail(
                format!("slot {t}: honest messages differ beyond finality components"),
                Witness::Divergence { slot: *t, validator: None, what: "messages".into() },
            );
        }
    }
    pass(format!("{} slots equivalent", slots.len()))
}

impl Witness {
    /// Re-derives the failure from the trace alone.
    pub fn reverify(&self, run: &RunIndex) -> bool {
        let tree = &run.tree;
        let recorded = |o: &Observation, fin: bool| {
            run.snapshot(o.validator, o.round).is_some_and(|s| {
                let chain = if fin { s.state.chain_fin } else { s.state.chain_ava };
                chain == o.chain
            }) && run.honest_at(o.validator, o.round)
        };
        match self {
            Witness::ConflictingChains { a, b } => {
                recorded(a, false) && recorded(b, false) && tree.conflicts(&a.chain, &b.chain).unwrap_or(false)
            }
            Witness::MissingTx { tx, injected, at } => {
                run.events.iter().any(|(r, e)| r == injected && *e == Event::Tx { id: *tx })
                    && at.round >= injected + confirmation_time(&run.scenario)
                    && recorded(at, false)
                    && !tree.contains_tx(&at.chain, tx)
            }
            Witness::Reorged { slot, proposal, at } => {
                honest_proposal(run, *slot) == Some(*proposal)
                    && recorded(at, false)
                    && tree.conflicts(proposal, &at.chain).unwrap_or(false)
            }
            Witness::FinNotPrefix { fin, ava } => {
                recorded(fin, true)
                    && recorded(&Observation { chain: *ava, ..*fin }, false)
                    && !tree.extends(ava, &fin.chain)
            }
            Witness::FinRegressed { before, after } => {
                before.validator == after.validator
                    && before.round < after.round
                    && recorded(before, true)
                    && recorded(after, true)
                    && !tree.extends(&after.chain, &before.chain)
            }
            Witness::ConflictingFinality { a, a_checkpoint, b, b_checkpoint } => {
                let views = honest_final_views(run);
                let finalized = |v: &ValidatorId, c: &Checkpoint| {
                    views.get(v).is_some_and(|view| FinalityState::compute(tree, view, run.scenario.n).is_finalized(c))
                };
                finalized(a, a_checkpoint)
                    && finalized(b, b_checkpoint)
                    && tree.conflicts(&a_checkpoint.chain, &b_checkpoint.chain).unwrap_or(false)
            }
            Witness::Attribution { a, b, implicated: named } => {
                let views = honest_final_views(run);
                let (Some(va), Some(vb)) = (views.get(a), views.get(b)) else {
                    return false;
                };
                let Ok(evidence) = attribute_conflicting_finality(tree, va, vb, run.scenario.n) else {
                    return false;
                };
                let got: Vec<ValidatorId> = implicated(&evidence).into_iter().collect();
                let colluders = run.scenario.corrupted_set();
                got == *named && (got.len() < run.scenario.n.div_ceil(3) || got.iter().any(|v| !colluders.contains(v)))
            }
            Witness::Slashed { evidence } => {
                let sent = |fv| {
                    run.sends.iter().any(|s| {
                        s.honest && matches!(&s.msg, Message::Vote(v) if v.fin_vote == Some(fv))
                    })
                };
                evidence.verify() && sent(evidence.vote_a) && sent(evidence.vote_b)
            }
            Witness::Late { slot, proposal, at } => {
                honest_proposal(run, *slot) == Some(*proposal)
                    && (recorded(at, true) || recorded(at, false))
                    && !tree.extends(&at.chain, proposal)
            }
            Witness::Divergence { .. } => true,
        }
    }
}

/// Empirical check of the consecutive-honest-proposers bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposerStat {
    pub seeds: u64,
    pub honest_fraction: f64,
    pub kappa: i64,
    /// Fraction of seeds whose first κ slots contain two consecutive honest proposers.
    pub observed: f64,
    pub bound: f64,
    pub sigma: f64,
    /// `observed >= bound - 3σ`.
    pub within_band: bool,
}

/// Samples `seeds` proposer schedules with validators `0..n-f` honest.
pub fn consecutive_honest_proposers(n: usize, f: usize, kappa: i64, seeds: u64) -> ProposerStat {
    let p = (n - f) as f64 / n as f64;
    let bound = 1.0 - (1.0 - p * p).powi((kappa / 2) as i32);
    let mut hits = 0u64;
    for seed in 0..seeds {
        let s = Scenario::honest(n, 1, kappa, kappa as u64, seed);
        let sched = ProposerSchedule::new(&s);
        let honest: Vec<bool> = (0..kappa).map(|t| sched.proposer(t).index() < n - f).collect();
        if honest.windows(2).any(|w| w[0] && w[1]) {
            hits += 1;
        }
    }
    let observed = hits as f64 / seeds as f64;
    let sigma = (bound * (1.0 - bound) / seeds as f64).sqrt();
    ProposerStat {
        seeds,
        honest_fraction: p,
        kappa,
        observed,
        bound,
        sigma,
        within_band: observed >= bound - 3.0 * sigma,
    }
}
