//! Honest validator state machine.
//!
//! Mode A runs the available chain only; mode B adds fin-votes, the frozen
//! greatest justified checkpoint and the finalized output. The simulator calls
//! one handler per phase round and feeds received messages through
//! [`ValidatorState::receive`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::chain::{Block, BlockTree, ChainError};
use crate::finality::FinalityState;
use crate::forkchoice::mfc;
use crate::ids::{supermajority, BlockId, Round, Slot, TxId, ValidatorId};
use crate::messages::{Checkpoint, Message, ProposeMsg, VoteMsg};
use crate::view::View;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub delta: u64,
    pub kappa: i64,
    pub mode: Mode,
}

/// Round arithmetic for slots of `4Δ` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub delta: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Propose,
    Vote,
    FastConfirm,
    Merge,
}

impl Clock {
    pub fn new(delta: u64) -> Clock {
        Clock { delta }
    }

    pub fn slot_len(&self) -> u64 {
        4 * self.delta
    }

    pub fn slot(&self, r: Round) -> Slot {
        (r / self.slot_len()) as Slot
    }

    /// First round of a slot; negative slots map to round 0.
    fn base(&self, t: Slot) -> Round {
        if t < 0 {
            0
        } else {
            t as u64 * self.slot_len()
        }
    }

    pub fn propose(&self, t: Slot) -> Round {
        self.base(t)
    }

    pub fn vote(&self, t: Slot) -> Round {
        self.base(t) + self.delta
    }

    pub fn fastconfirm(&self, t: Slot) -> Round {
        self.base(t) + 2 * self.delta
    }

    pub fn merge(&self, t: Slot) -> Round {
        self.base(t) + 3 * self.delta
    }

    pub fn phase(&self, r: Round) -> Option<Phase> {
        let off = r % self.slot_len();
        match off / self.delta {
            _ if !off.is_multiple_of(self.delta) => None,
            0 => Some(Phase::Propose),
            1 => Some(Phase::Vote),
            2 => Some(Phase::FastConfirm),
            _ => Some(Phase::Merge),
        }
    }

    /// Whether `r` lies in the proposal window `[4Δt, 4Δt+Δ]` of slot `t`.
    pub fn in_proposal_window(&self, r: Round, t: Slot) -> bool {
        t >= 0 && r >= self.propose(t) && r <= self.vote(t)
    }

    /// Slot whose vote round a validator waking at `r` first takes part in:
    /// the `t` with `vote(t-2)+Δ < r <= vote(t-1)+Δ`.
    pub fn joining_slot(&self, r: Round) -> Slot {
        ((r + 2 * self.delta).div_ceil(self.slot_len())) as Slot
    }

    /// Round from which a validator waking at `r` is active.
    pub fn activation_round(&self, r: Round) -> Round {
        self.vote(self.joining_slot(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Activity {
    Active,
    Asleep,
    Joining { active_from: Round },
    Corrupted,
}

/// Result of the fast confirmation rule: the confirmed chain and the votes
/// certifying it (empty when nothing was fast-confirmed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastConfirm {
    pub chain: BlockId,
    pub qc: Vec<VoteMsg>,
}

/// Greatest chain extended by slot-`t` votes of at least `⌈2n/3⌉` distinct
/// validators, with those votes; `(genesis, ∅)` if no chain has the support.
pub fn fastconfirm_simple(tree: &BlockTree, view: &View, t: Slot, n: usize) -> FastConfirm {
    let threshold = supermajority(n);
    let votes: Vec<&Arc<VoteMsg>> = view.votes_in_slot(t).collect();
    let mut by_chain: BTreeMap<BlockId, BTreeSet<ValidatorId>> = BTreeMap::new();
    for v in &votes {
        by_chain.entry(v.chain).or_default().insert(v.voter);
    }
    let mut support: HashMap<BlockId, BTreeSet<ValidatorId>> = HashMap::new();
    for (chain, voters) in &by_chain {
        for b in tree.ancestors(chain) {
            support.entry(b.id).or_default().extend(voters.iter().copied());
        }
    }
    let best = support
        .iter()
        .filter(|(_, s)| s.len() >= threshold)
        .map(|(id, _)| *id)
        .max_by(|a, b| tree.chain_cmp(a, b));
    match best {
        Some(chain) => {
            let qc = votes.iter().filter(|v| tree.extends(&v.chain, &chain)).map(|v| (***v).clone()).collect();
            FastConfirm { chain, qc }
        }
        None => FastConfirm { chain: tree.genesis(), qc: Vec::new() },
    }
}

/// [`fastconfirm_simple`] constrained to extend the view's greatest justified
/// checkpoint; falls back to that checkpoint's chain with an empty certificate.
pub fn fastconfirm(tree: &BlockTree, view: &View, t: Slot, n: usize, fin: &FinalityState) -> FastConfirm {
    let simple = fastconfirm_simple(tree, view, t, n);
    let gj = fin.greatest_justified();
    if tree.extends(&simple.chain, &gj.chain) {
        simple
    } else {
        FastConfirm { chain: gj.chain, qc: Vec::new() }
    }
}

/// Externally visible state, recorded in traces at phase rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub chain_ava: BlockId,
    pub chain_fin: BlockId,
    /// Fork-choice output of the latest vote round.
    pub mfc: Option<BlockId>,
    pub gj_frozen: Checkpoint,
    pub activity: Activity,
}

#[derive(Debug, Clone)]
pub struct ValidatorState {
    pub id: ValidatorId,
    pub params: Params,
    pub view: View,
    pub v_frozen: View,
    pub chain_frozen: BlockId,
    pub gj_frozen: Checkpoint,
    /// The confirmed chain; in mode A this is the only output.
    pub chain_ava: BlockId,
    pub chain_fin: BlockId,
    pub activity: Activity,
    /// Proposals received inside the current slot's window, applied at the
    /// vote round.
    pending: Vec<Arc<ProposeMsg>>,
    /// Messages queued while asleep.
    inbox: Vec<Message>,
    last_mfc: Option<BlockId>,
}

impl ValidatorState {
    pub fn new(id: ValidatorId, params: Params, genesis: BlockId) -> ValidatorState {
        ValidatorState {
            id,
            params,
            view: View::new(),
            v_frozen: View::new(),
            chain_frozen: genesis,
            gj_frozen: Checkpoint::genesis(genesis),
            chain_ava: genesis,
            chain_fin: genesis,
            activity: Activity::Active,
            pending: Vec::new(),
            inbox: Vec::new(),
            last_mfc: None,
        }
    }

    fn clock(&self) -> Clock {
        Clock::new(self.params.delta)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            chain_ava: self.chain_ava,
            chain_fin: self.chain_fin,
            mfc: self.last_mfc,
            gj_frozen: self.gj_frozen,
            activity: self.activity,
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self.activity, Activity::Active)
    }

    pub fn is_awake(&self) -> bool {
        matches!(self.activity, Activity::Active | Activity::Joining { .. })
    }

    /// Delivers a message at round `r`. Returns true if it was new to the view.
    pub fn receive(&mut self, msg: &Message, r: Round) -> bool {
        match self.activity {
            Activity::Asleep => {
                self.inbox.push(msg.clone());
                false
            }
            _ => self.accept(msg, r),
        }
    }

    fn accept(&mut self, msg: &Message, r: Round) -> bool {
        let fresh = self.view.insert(msg);
        if let Message::Propose(p) = msg {
            if fresh && self.clock().in_proposal_window(r, p.slot) {
                self.pending.push(p.clone());
            }
        }
        fresh
    }

    pub fn sleep(&mut self) {
        if self.activity != Activity::Corrupted {
            self.activity = Activity::Asleep;
        }
    }

    /// Wakes at round `r`: drains the inbox and starts the joining protocol.
    /// Returns the drained messages that were new to the view.
    pub fn wake(&mut self, r: Round) -> Vec<Message> {
        if self.activity != Activity::Asleep {
            return Vec::new();
        }
        self.activity = Activity::Joining { active_from: self.clock().activation_round(r) };
        self.pending.clear();
        let inbox = std::mem::take(&mut self.inbox);
        inbox.into_iter().filter(|m| self.accept(m, r)).collect()
    }

    /// Promotes a joining validator once its activation round is reached.
    pub fn tick(&mut self, r: Round) {
        if let Activity::Joining { active_from } = self.activity {
            if r >= active_from {
                self.activity = Activity::Active;
            }
        }
    }

    fn finality(&self, tree: &BlockTree) -> FinalityState {
        FinalityState::compute(tree, &self.view, self.params.n)
    }

    fn confirm(&self, tree: &BlockTree, t: Slot, fin: &FinalityState) -> FastConfirm {
        match self.params.mode {
            Mode::A => fastconfirm_simple(tree, &self.view, t, self.params.n),
            Mode::B => fastconfirm(tree, &self.view, t, self.params.n, fin),
        }
    }

    /// Builds this slot's proposal. The caller checks the proposer schedule and
    /// inserts the returned block into the tree before gossiping the message.
    pub fn on_propose(&self, tree: &BlockTree, t: Slot, pool: &[TxId]) -> Result<(Block, ProposeMsg), ChainError> {
        let fin = self.finality(tree);
        let FastConfirm { chain: chain_c, qc } = self.confirm(tree, t - 1, &fin);
        let can = mfc(tree, &self.view, &self.view, &chain_c, t);
        let block = tree.build_extension(&can, t, pool)?;
        let gj = match self.params.mode {
            Mode::A => None,
            Mode::B => Some(fin.greatest_justified()),
        };
        let msg = ProposeMsg::new(block.id, chain_c, qc, gj, t, self.id);
        Ok((block, msg))
    }

    /// Structural validity of a slot-`t` proposal against this validator's view.
    pub fn valid_proposal(&self, tree: &BlockTree, p: &ProposeMsg, t: Slot, proposer: ValidatorId) -> bool {
        valid_proposal(tree, p, t, proposer, self.params)
    }

    fn apply_pending(&mut self, tree: &BlockTree, t: Slot, proposer: ValidatorId, fin: &FinalityState) {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort();
        for p in pending.into_iter().filter(|p| p.slot == t) {
            if !self.valid_proposal(tree, &p, t, proposer) {
                debug!("{} ignores invalid proposal for slot {} from {}", self.id, t, p.proposer);
                continue;
            }
            match self.params.mode {
                Mode::A => {
                    if tree.extends(&p.chain_c, &self.chain_frozen) {
                        self.chain_frozen = p.chain_c;
                    }
                }
                Mode::B => {
                    let gj = p.gj.expect("validated");
                    if !fin.is_justified(&gj) || gj.c < self.gj_frozen.c {
                        continue;
                    }
                    self.gj_frozen = gj;
                    if !tree.extends(&self.chain_frozen, &gj.chain) {
                        self.chain_frozen = gj.chain;
                    }
                    if tree.extends(&p.chain_c, &self.chain_frozen) {
                        self.chain_frozen = p.chain_c;
                    }
                }
            }
        }
    }

    /// Vote round of slot `t`; `proposer` is the slot's elected proposer.
    pub fn on_vote(&mut self, tree: &BlockTree, t: Slot, proposer: ValidatorId) -> VoteMsg {
        let fin = self.finality(tree);
        self.apply_pending(tree, t, proposer, &fin);

        let can = mfc(tree, &self.v_frozen, &self.view, &self.chain_frozen, t);
        self.last_mfc = Some(can);
        let deep = tree.kappa_deep_prefix(&can, t, self.params.kappa).unwrap_or(tree.genesis());
        let mut options = vec![self.chain_ava, deep];
        if self.params.mode == Mode::B {
            options.push(self.gj_frozen.chain);
        }
        self.chain_ava = options
            .into_iter()
            .filter(|c| tree.extends(&can, c))
            .max_by(|a, b| tree.chain_cmp(a, b))
            .unwrap_or(deep);

        let chain = self
            .view
            .proposals()
            .filter(|p| p.slot == t && tree.slot(&p.chain_p) == Ok(t) && tree.extends(&p.chain_p, &can))
            .filter(|p| self.valid_proposal(tree, p, t, proposer))
            .map(|p| p.chain_p)
            .min()
            .unwrap_or(can);

        match self.params.mode {
            Mode::A => VoteMsg::plain(chain, t, self.id),
            Mode::B => {
                let gf = fin.greatest_finalized();
                self.chain_fin = tree.common_prefix(&self.chain_ava, &gf.chain).unwrap_or(self.chain_fin);
                let target = if self.gj_frozen.c == t - 1 {
                    Checkpoint::new(self.chain_ava, t)
                } else {
                    Checkpoint::new(self.gj_frozen.chain, t)
                };
                VoteMsg::with_link(chain, self.gj_frozen, target, t, self.id)
            }
        }
    }

    pub fn on_fastconfirm(&mut self, tree: &BlockTree, t: Slot) {
        let fin = self.finality(tree);
        let cand = self.confirm(tree, t, &fin);
        match self.params.mode {
            Mode::A => {
                if !cand.qc.is_empty() {
                    self.chain_ava = cand.chain;
                }
            }
            Mode::B => {
                if !tree.extends(&self.chain_ava, &cand.chain) {
                    self.chain_ava = cand.chain;
                }
                self.chain_fin = fin.greatest_finalized().chain;
            }
        }
    }

    pub fn on_merge(&mut self, tree: &BlockTree, t: Slot) {
        let fin = self.finality(tree);
        self.v_frozen = self.view.clone();
        self.chain_frozen = self.confirm(tree, t, &fin).chain;
        if self.params.mode == Mode::B {
            self.gj_frozen = fin.greatest_justified();
        }
    }
}

/// Proposal validity: elected proposer, a slot-`t` block extending the carried
/// confirmed chain, and a certificate that is either a supermajority of
/// distinct slot-`t-1` votes extending that chain or empty with the default
/// chain (genesis in mode A, the carried checkpoint's chain in mode B).
pub fn valid_proposal(tree: &BlockTree, p: &ProposeMsg, t: Slot, proposer: ValidatorId, params: Params) -> bool {
    if p.slot != t || p.proposer != proposer || tree.slot(&p.chain_p) != Ok(t) {
        return false;
    }
    if !tree.extends(&p.chain_p, &p.chain_c) {
        return false;
    }
    let default_chain = match (params.mode, p.gj) {
        (Mode::A, None) => tree.genesis(),
        (Mode::B, Some(gj)) => {
            if !tree.extends(&p.chain_c, &gj.chain) {
                return false;
            }
            gj.chain
        }
        _ => return false,
    };
    if p.qc.is_empty() {
        return p.chain_c == default_chain;
    }
    let mut voters = BTreeSet::new();
    for v in &p.qc {
        if v.slot != t - 1 || !tree.extends(&v.chain, &p.chain_c) {
            return false;
        }
        voters.insert(v.voter);
    }
    voters.len() >= supermajority(params.n)
}
