//! Behaviour of corrupted validators.
//!
//! Corrupted validators hand their state to the adversary, which may keep
//! running it as a shadow honest machine and add protocol-violating messages
//! on top.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::debug;

use crate::chain::{Block, BlockTree};
use crate::ids::{MsgId, Round, Slot, TxId, ValidatorId};
use crate::messages::{Message, VoteMsg};
use crate::scenario::{Scenario, Strategy};
use crate::validator::{Activity, Phase, ValidatorState};

/// Recipients of an adversarial message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    All,
    Only(Vec<ValidatorId>),
}

/// A message injected by the adversary, together with any new blocks it
/// references.
#[derive(Debug, Clone)]
pub struct Emission {
    pub sender: ValidatorId,
    pub msg: Message,
    pub to: Targets,
    pub blocks: Vec<Block>,
}

/// What the adversary can see when it acts.
pub struct Ctx<'a> {
    pub tree: &'a BlockTree,
    pub pool: &'a [TxId],
    pub n: usize,
    pub proposer: ValidatorId,
    pub round: Round,
    pub phase: Phase,
    pub slot: Slot,
}

pub trait Adversary {
    /// Takes over `v` with its state at the moment of corruption.
    fn corrupt(&mut self, v: ValidatorId, state: ValidatorState);
    /// A message addressed to corrupted validator `to` arrived.
    fn deliver(&mut self, to: ValidatorId, msg: &Message, r: Round);
    fn act(&mut self, ctx: &Ctx<'_>) -> Vec<Emission>;
}

pub fn build(s: &Scenario) -> Box<dyn Adversary> {
    match s.adversary {
        Strategy::None => Box::new(Shadowing::new(false)),
        Strategy::Silent => Box::new(Silent),
        Strategy::Equivocate => Box::new(Shadowing::new(true)),
        Strategy::DoubleFinalization => Box::new(DoubleFinalization::new(s)),
    }
}

/// Corrupted validators go quiet: indistinguishable from sleeping ones.
pub struct Silent;

impl Adversary for Silent {
    fn corrupt(&mut self, _: ValidatorId, _: ValidatorState) {}
    fn deliver(&mut self, _: ValidatorId, _: &Message, _: Round) {}
    fn act(&mut self, _: &Ctx<'_>) -> Vec<Emission> {
        Vec::new()
    }
}

/// Transaction id used to make an adversarial block differ from its twin.
fn marker(v: ValidatorId, t: Slot, k: u32) -> TxId {
    TxId::derive(u64::MAX - u64::from(v.0), (t as u32).wrapping_mul(4).wrapping_add(k))
}

/// Runs the honest handler for the current phase on a shadow machine.
/// Returns the blocks and message the honest validator would send.
fn step_shadow(shadow: &mut ValidatorState, ctx: &Ctx<'_>, extra_tx: Option<TxId>) -> Option<(Vec<Block>, Message)> {
    match ctx.phase {
        Phase::Propose => {
            if ctx.proposer != shadow.id {
                return None;
            }
            let mut pool = ctx.pool.to_vec();
            pool.extend(extra_tx);
            match shadow.on_propose(ctx.tree, ctx.slot, &pool) {
                Ok((block, p)) => Some((vec![block], Message::Propose(Arc::new(p)))),
                Err(e) => {
                    debug!("adversarial proposer {} could not propose: {e}", shadow.id);
                    None
                }
            }
        }
        Phase::Vote => {
            let v = shadow.on_vote(ctx.tree, ctx.slot, ctx.proposer);
            Some((Vec::new(), Message::Vote(Arc::new(v))))
        }
        Phase::FastConfirm => {
            shadow.on_fastconfirm(ctx.tree, ctx.slot);
            None
        }
        Phase::Merge => {
            shadow.on_merge(ctx.tree, ctx.slot);
            None
        }
    }
}

/// Keeps each corrupted validator's honest machine running. With
/// `equivocate`, every vote and proposal gets a conflicting twin; the honest
/// version goes to even-numbered validators and the twin to odd ones.
pub struct Shadowing {
    equivocate: bool,
    shadows: BTreeMap<ValidatorId, ValidatorState>,
}

impl Shadowing {
    pub fn new(equivocate: bool) -> Shadowing {
        Shadowing { equivocate, shadows: BTreeMap::new() }
    }

    fn twin(&mut self, ctx: &Ctx<'_>, v: ValidatorId, msg: &Message, blocks: &[Block]) -> Option<(Vec<Block>, Message)> {
        match msg {
            Message::Vote(vote) => {
                let block = conflicting_block(ctx.tree, &vote.chain, ctx.slot, marker(v, ctx.slot, 0))?;
                let twin = VoteMsg { chain: block.id, ..(**vote).clone() };
                Some((vec![block], Message::Vote(Arc::new(twin))))
            }
            Message::Propose(p) => {
                let honest = blocks.first()?;
                let mut body = honest.body.clone();
                body.push(marker(v, ctx.slot, 1));
                let block = Block::new(honest.parent, honest.slot, body);
                let mut twin = (**p).clone();
                twin.chain_p = block.id;
                Some((vec![block], Message::Propose(Arc::new(twin))))
            }
        }
    }
}

/// A block at the same height as `chain` but on a different branch.
fn conflicting_block(tree: &BlockTree, chain: &crate::ids::BlockId, t: Slot, tx: TxId) -> Option<Block> {
    let b = tree.get(chain)?;
    match b.parent {
        Some(parent) => Some(Block::new(Some(parent), b.slot, vec![tx])),
        None => Some(Block::new(Some(*chain), t, vec![tx])),
    }
}

impl Adversary for Shadowing {
    fn corrupt(&mut self, v: ValidatorId, mut state: ValidatorState) {
        state.activity = Activity::Active;
        self.shadows.insert(v, state);
    }

    fn deliver(&mut self, to: ValidatorId, msg: &Message, r: Round) {
        if let Some(s) = self.shadows.get_mut(&to) {
            s.receive(msg, r);
        }
    }

    fn act(&mut self, ctx: &Ctx<'_>) -> Vec<Emission> {
        let mut out = Vec::new();
        let ids: Vec<ValidatorId> = self.shadows.keys().copied().collect();
        for v in ids {
            let shadow = self.shadows.get_mut(&v).expect("present");
            let Some((blocks, msg)) = step_shadow(shadow, ctx, None) else {
                continue;
            };
            shadow.receive(&msg, ctx.round);
            if !self.equivocate {
                out.push(Emission { sender: v, msg, to: Targets::All, blocks });
                continue;
            }
            match self.twin(ctx, v, &msg, &blocks) {
                Some((twin_blocks, twin)) => {
                    let (even, odd): (Vec<ValidatorId>, Vec<ValidatorId>) =
                        (0..ctx.n as u32).map(ValidatorId).partition(|x| x.0 % 2 == 0);
                    out.push(Emission { sender: v, msg, to: Targets::Only(even), blocks });
                    out.push(Emission { sender: v, msg: twin, to: Targets::Only(odd), blocks: twin_blocks });
                }
                None => out.push(Emission { sender: v, msg, to: Targets::All, blocks }),
            }
        }
        out
    }
}

/// Colluders keep one shadow machine per partition side and only ever show a
/// side the messages of its own shadows, so each side sees a full quorum.
pub struct DoubleFinalization {
    sides: Vec<Vec<ValidatorId>>,
    side_of: Vec<Option<usize>>,
    shadows: BTreeMap<(ValidatorId, usize), ValidatorState>,
    msg_side: HashMap<MsgId, usize>,
}

impl DoubleFinalization {
    pub fn new(s: &Scenario) -> DoubleFinalization {
        let mut side_of = vec![None; s.n];
        for (g, members) in s.partition.iter().enumerate() {
            for v in members {
                side_of[v.index()] = Some(g);
            }
        }
        DoubleFinalization { sides: s.partition.clone(), side_of, shadows: BTreeMap::new(), msg_side: HashMap::new() }
    }
}

impl Adversary for DoubleFinalization {
    fn corrupt(&mut self, v: ValidatorId, mut state: ValidatorState) {
        state.activity = Activity::Active;
        for side in 0..self.sides.len() {
            self.shadows.insert((v, side), state.clone());
        }
    }

    fn deliver(&mut self, to: ValidatorId, msg: &Message, r: Round) {
        let side = self.msg_side.get(&msg.id()).copied().or(self.side_of[msg.sender().index()]);
        for ((v, s), shadow) in self.shadows.iter_mut() {
            if *v == to && side.is_none_or(|x| x == *s) {
                shadow.receive(msg, r);
            }
        }
    }

    fn act(&mut self, ctx: &Ctx<'_>) -> Vec<Emission> {
        let mut out = Vec::new();
        let keys: Vec<(ValidatorId, usize)> = self.shadows.keys().copied().collect();
        let mut produced: Vec<(usize, Message)> = Vec::new();
        for (v, side) in keys {
            let shadow = self.shadows.get_mut(&(v, side)).expect("present");
            let extra = (side > 0).then(|| marker(v, ctx.slot, side as u32));
            let Some((blocks, msg)) = step_shadow(shadow, ctx, extra) else {
                continue;
            };
            self.msg_side.insert(msg.id(), side);
            produced.push((side, msg.clone()));
            out.push(Emission { sender: v, msg, to: Targets::Only(self.sides[side].clone()), blocks });
        }
        // colluders share each side's messages among themselves at once
        for (side, msg) in produced {
            for ((_, s), shadow) in self.shadows.iter_mut() {
                if *s == side {
                    shadow.receive(&msg, ctx.round);
                }
            }
        }
        out
    }
}
