//! Deterministic round-by-round simulation.
//!
//! Each round runs, in order: schedule events (corruption, sleep, wake),
//! message deliveries, the phase handler of every honest validator, the
//! adversary, then state snapshots. Messages sent at round `r` arrive at
//! `r + 1` at the earliest.

pub mod adversary;
pub mod network;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Block, BlockTree, InsertOutcome};
use crate::finality::FinalityState;
use crate::ids::{sha256, MsgId, Round, Slot, TxId, ValidatorId};
use crate::messages::Message;
use crate::scenario::{ProposerRule, Scenario};
use crate::trace::{Event, Record, RunIndex, StateRecord};
use crate::validator::{Activity, Clock, Mode, Phase, ValidatorState};

use adversary::{Adversary, Ctx, Emission, Targets};
use network::Network;

/// Slot leader election: explicit overrides, else round-robin or a seeded
/// uniform draw per slot.
#[derive(Debug, Clone)]
pub struct ProposerSchedule {
    n: usize,
    seed: u64,
    rule: ProposerRule,
    overrides: BTreeMap<Slot, ValidatorId>,
}

impl ProposerSchedule {
    pub fn new(s: &Scenario) -> ProposerSchedule {
        ProposerSchedule {
            n: s.n,
            seed: s.seed,
            rule: s.proposers,
            overrides: s.proposer_override.iter().map(|o| (o.slot, o.validator)).collect(),
        }
    }

    pub fn proposer(&self, t: Slot) -> ValidatorId {
        if let Some(v) = self.overrides.get(&t) {
            return *v;
        }
        match self.rule {
            ProposerRule::RoundRobin => ValidatorId(t.rem_euclid(self.n as i64) as u32),
            ProposerRule::Random => {
                let mut input = Vec::with_capacity(16);
                input.extend_from_slice(&self.seed.to_le_bytes());
                input.extend_from_slice(&t.to_le_bytes());
                let mut rng = ChaCha20Rng::from_seed(sha256(&input));
                ValidatorId(rng.random_range(0..self.n as u32))
            }
        }
    }
}

/// Sleepiness-constraint check, per slot and overall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    /// `(slot, honest active at the previous vote round and still honest,
    /// adversarial at this vote round, compliant)`.
    pub slots: Vec<(Slot, usize, usize, bool)>,
    pub compliant: bool,
    /// Number of validators ever corrupted.
    pub f: usize,
    pub f_below_third: bool,
}

/// Evaluates, for every slot `t >= 1` starting at or after GST, whether the
/// honest validators active at the vote round of `t-1` that are not corrupted
/// by the vote round of `t` outnumber the corrupted ones.
pub fn check_compliance(run: &RunIndex) -> ComplianceReport {
    let s = &run.scenario;
    let clock = s.clock();
    let mut slots = Vec::new();
    for t in 1..s.horizon as Slot {
        if clock.propose(t) < s.gst {
            continue;
        }
        let prev = clock.vote(t - 1);
        let now = clock.vote(t);
        let adversarial = (0..s.n as u32).map(ValidatorId).filter(|v| !s.honest_at(*v, now)).count();
        let honest = run
            .active_snapshots(prev)
            .into_iter()
            .filter(|(v, _)| s.honest_at(*v, now))
            .count();
        slots.push((t, honest, adversarial, honest > adversarial));
    }
    let f = s.corrupted_set().len();
    ComplianceReport { compliant: slots.iter().all(|x| x.3), slots, f, f_below_third: 3 * f < s.n }
}

struct Sent {
    msg: Message,
    honest: bool,
}

/// One simulated execution in a fixed mode.
pub struct World {
    scenario: Scenario,
    mode: Mode,
    clock: Clock,
    tree: BlockTree,
    validators: Vec<ValidatorState>,
    corrupted: Vec<bool>,
    schedule: ProposerSchedule,
    pool: Vec<TxId>,
    net: Network,
    sent: Vec<Sent>,
    ids: HashMap<MsgId, u32>,
    regossiped: Vec<bool>,
    adversary: Box<dyn Adversary>,
    records: Vec<Record>,
}

impl World {
    pub fn new(scenario: &Scenario, mode: Mode) -> World {
        let tree = BlockTree::new();
        let genesis = tree.genesis();
        let params = scenario.params(mode);
        World {
            scenario: scenario.clone(),
            mode,
            clock: scenario.clock(),
            validators: (0..scenario.n as u32).map(|i| ValidatorState::new(ValidatorId(i), params, genesis)).collect(),
            tree,
            corrupted: vec![false; scenario.n],
            schedule: ProposerSchedule::new(scenario),
            pool: Vec::new(),
            net: Network::new(scenario),
            sent: Vec::new(),
            ids: HashMap::new(),
            regossiped: Vec::new(),
            adversary: adversary::build(scenario),
            records: Vec::new(),
        }
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn validators(&self) -> &[ValidatorState] {
        &self.validators
    }

    fn event(&mut self, round: Round, event: Event) {
        self.records.push(Record::Event { run: self.mode, round, event });
    }

    fn add_block(&mut self, round: Round, block: Block) {
        match self.tree.insert(block.clone()) {
            Ok(InsertOutcome::Accepted) => self.records.push(Record::Block { run: self.mode, round, block }),
            Ok(_) => {}
            Err(e) => debug!("dropping block: {e}"),
        }
    }

    /// Registers a message, returning its index and whether it is new.
    fn register(&mut self, round: Round, msg: Message, sender: ValidatorId, honest: bool) -> (u32, bool) {
        let id = msg.id();
        if let Some(idx) = self.ids.get(&id) {
            return (*idx, false);
        }
        let idx = self.sent.len() as u32;
        self.ids.insert(id, idx);
        self.records.push(Record::Send { run: self.mode, round, idx, id, sender, honest, msg: msg.clone() });
        self.sent.push(Sent { msg, honest });
        self.regossiped.push(false);
        (idx, true)
    }

    /// Hands message `idx` to validator `to` at round `r`.
    fn hand(&mut self, r: Round, to: ValidatorId, idx: u32) {
        let msg = self.sent[idx as usize].msg.clone();
        if self.corrupted[to.index()] {
            self.adversary.deliver(to, &msg, r);
            return;
        }
        if self.validators[to.index()].receive(&msg, r) {
            self.on_accepted(r, to, idx);
        }
    }

    /// Records that `idx` entered `to`'s view and re-gossips it if it came
    /// from an adversarial sender.
    fn on_accepted(&mut self, r: Round, to: ValidatorId, idx: u32) {
        self.records.push(Record::Deliver { run: self.mode, round: r, to, idx });
        let sent = &self.sent[idx as usize];
        if sent.honest || self.regossiped[idx as usize] {
            return;
        }
        if let Message::Propose(p) = &sent.msg {
            if r > self.clock.vote(p.slot) || r < self.clock.propose(p.slot) {
                return;
            }
        }
        self.regossiped[idx as usize] = true;
        for v in 0..self.scenario.n as u32 {
            let v = ValidatorId(v);
            if v != to {
                let at = self.net.arrival(r, to, v, &self.corrupted);
                self.net.schedule(idx, v, at);
            }
        }
    }

    fn broadcast_honest(&mut self, r: Round, sender: ValidatorId, msg: Message) {
        let (idx, fresh) = self.register(r, msg, sender, true);
        if !fresh {
            return;
        }
        self.net.mark_delivered(idx, sender);
        self.hand(r, sender, idx);
        for v in 0..self.scenario.n as u32 {
            let v = ValidatorId(v);
            if v != sender {
                let at = self.net.arrival(r, sender, v, &self.corrupted);
                self.net.schedule(idx, v, at);
            }
        }
    }

    fn emit_adversarial(&mut self, r: Round, e: Emission) {
        if !self.corrupted[e.sender.index()] {
            log::error!("adversary tried to send as honest validator {}", e.sender);
            return;
        }
        for b in e.blocks {
            self.add_block(r, b);
        }
        let (idx, _) = self.register(r, e.msg, e.sender, false);
        let targets: Vec<ValidatorId> = match e.to {
            Targets::All => (0..self.scenario.n as u32).map(ValidatorId).collect(),
            Targets::Only(list) => list,
        };
        for v in targets {
            if v != e.sender && !self.net.known(idx, v) {
                let at = self.net.arrival(r, e.sender, v, &self.corrupted);
                self.net.schedule(idx, v, at);
            }
        }
    }

    fn apply_schedule_events(&mut self, r: Round) {
        let s = self.scenario.clone();
        for c in s.corrupt.iter().filter(|c| c.round == r) {
            let i = c.validator.index();
            if self.corrupted[i] {
                continue;
            }
            self.corrupted[i] = true;
            let state = self.validators[i].clone();
            self.validators[i].activity = Activity::Corrupted;
            self.adversary.corrupt(c.validator, state);
            self.event(r, Event::Corrupt { validator: c.validator });
        }
        for sl in s.sleep.iter().filter(|sl| sl.from == r) {
            if !self.corrupted[sl.validator.index()] {
                self.validators[sl.validator.index()].sleep();
                self.event(r, Event::Sleep { validator: sl.validator });
            }
        }
        for sl in s.sleep.iter().filter(|sl| sl.until == r) {
            let i = sl.validator.index();
            if self.corrupted[i] || self.validators[i].activity != Activity::Asleep {
                continue;
            }
            let flushed = self.validators[i].wake(r);
            if let Activity::Joining { active_from } = self.validators[i].activity {
                self.event(r, Event::Wake { validator: sl.validator, active_from });
            }
            for msg in flushed {
                let idx = self.ids[&msg.id()];
                self.on_accepted(r, sl.validator, idx);
            }
        }
        for v in self.validators.iter_mut() {
            v.tick(r);
        }
        for tx in s.tx.iter().filter(|tx| tx.round == r) {
            self.inject(r, tx.count);
        }
    }

    fn inject(&mut self, r: Round, count: u32) {
        let start = self.pool.len() as u32;
        for k in 0..count {
            let id = TxId::derive(r, start + k);
            self.pool.push(id);
            self.event(r, Event::Tx { id });
        }
    }

    fn honest_ids(&self) -> Vec<ValidatorId> {
        (0..self.scenario.n as u32).map(ValidatorId).filter(|v| !self.corrupted[v.index()]).collect()
    }

    fn run_phase(&mut self, r: Round, phase: Phase, t: Slot) {
        let proposer = self.schedule.proposer(t);
        match phase {
            Phase::Propose => {
                self.event(r, Event::Proposer { slot: t, validator: proposer });
                let p = proposer.index();
                if !self.corrupted[p] && self.validators[p].is_active() {
                    match self.validators[p].on_propose(&self.tree, t, &self.pool) {
                        Ok((block, msg)) => {
                            self.add_block(r, block);
                            self.broadcast_honest(r, proposer, Message::Propose(Arc::new(msg)));
                        }
                        Err(e) => self.event(r, Event::ProposeFailed { validator: proposer, reason: e.to_string() }),
                    }
                }
            }
            Phase::Vote => {
                if self.scenario.tx_per_slot > 0 {
                    self.inject(r, self.scenario.tx_per_slot);
                }
                let mut votes = Vec::new();
                for v in self.honest_ids() {
                    let st = &mut self.validators[v.index()];
                    if st.is_active() {
                        votes.push((v, st.on_vote(&self.tree, t, proposer)));
                    }
                }
                for (v, vote) in votes {
                    self.broadcast_honest(r, v, Message::Vote(Arc::new(vote)));
                }
            }
            Phase::FastConfirm => {
                for v in self.honest_ids() {
                    let st = &mut self.validators[v.index()];
                    if st.is_active() {
                        st.on_fastconfirm(&self.tree, t);
                    }
                }
            }
            Phase::Merge => {
                for v in self.honest_ids() {
                    let st = &mut self.validators[v.index()];
                    if st.is_awake() {
                        st.on_merge(&self.tree, t);
                    }
                }
            }
        }
        let ctx = Ctx { tree: &self.tree, pool: &self.pool, n: self.scenario.n, proposer, round: r, phase, slot: t };
        let mut emissions = self.adversary.act(&ctx);
        emissions.sort_by_key(|e| (e.sender, e.msg.id()));
        for e in emissions {
            self.emit_adversarial(r, e);
        }
        self.snapshot(r, phase);
    }

    fn snapshot(&mut self, r: Round, phase: Phase) {
        for v in self.honest_ids() {
            let st = &self.validators[v.index()];
            let (gj, gf) = match self.mode {
                Mode::A => (None, None),
                Mode::B => {
                    let fin = FinalityState::compute(&self.tree, &st.view, self.scenario.n);
                    (Some(fin.greatest_justified()), Some(fin.greatest_finalized()))
                }
            };
            let state = StateRecord { state: st.snapshot(), gj, gf };
            self.records.push(Record::Snapshot { run: self.mode, round: r, phase, validator: v, state });
        }
    }

    /// Advances the world through round `r`.
    pub fn step(&mut self, r: Round) {
        self.apply_schedule_events(r);
        for (to, idx) in self.net.due(r) {
            self.hand(r, to, idx);
        }
        if let Some(phase) = self.clock.phase(r) {
            self.run_phase(r, phase, self.clock.slot(r));
        }
    }

    /// Runs every round of the horizon and returns the records of this run.
    pub fn run(mut self) -> Vec<Record> {
        let end = self.scenario.horizon_rounds();
        for r in 0..end {
            self.step(r);
        }
        for (_, to, idx) in self.net.in_flight() {
            if self.sent[idx as usize].honest {
                self.event(end, Event::Undelivered { idx, to });
            }
        }
        let index = RunIndex::from_records(&self.scenario, self.mode, &self.records);
        let report = check_compliance(&index);
        info!(
            "run {:?}: {} blocks, {} messages, compliant={}",
            self.mode,
            self.tree.len(),
            self.sent.len(),
            report.compliant
        );
        self.records.push(Record::Compliance { run: self.mode, report });
        self.records
    }
}
