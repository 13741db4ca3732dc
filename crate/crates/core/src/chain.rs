//! Content-addressed block tree.
//!
//! A chain is identified with its tip block, so every chain-valued quantity in
//! the crate is a [`BlockId`]. The tree is append-only and rooted at genesis;
//! blocks whose parent is unknown are refused with
//! [`InsertOutcome::MissingParent`] and must be buffered by the caller.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{sha256, BlockId, Slot, TxId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {id} is malformed: {reason}")]
    Malformed { id: BlockId, reason: String },
    #[error("cannot extend chain at slot {chain_slot} to slot {target}")]
    ExtendPrecondition { chain_slot: Slot, target: Slot },
    #[error("kappa must be at least 2, got {0}")]
    BadKappa(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub slot: Slot,
    pub body: Vec<TxId>,
}

impl Block {
    pub fn new(parent: Option<BlockId>, slot: Slot, body: Vec<TxId>) -> Block {
        let id = BlockId(sha256(&Block::canonical_bytes(parent, slot, &body)));
        Block { id, parent, slot, body }
    }

    pub fn genesis() -> Block {
        Block::new(None, -1, Vec::new())
    }

    /// `parent (32 bytes, zero for genesis) ∥ slot (i64 LE) ∥ tx count (u32 LE) ∥ tx ids`.
    pub fn canonical_bytes(parent: Option<BlockId>, slot: Slot, body: &[TxId]) -> Vec<u8> {
        let mut buf = Vec::with_capacity(44 + 32 * body.len());
        buf.extend_from_slice(parent.unwrap_or(BlockId::ZERO).as_bytes());
        buf.extend_from_slice(&slot.to_le_bytes());
        buf.extend_from_slice(&(body.len() as u32).to_le_bytes());
        for tx in body {
            buf.extend_from_slice(tx.as_bytes());
        }
        buf
    }

    pub fn encode(&self) -> Vec<u8> {
        Block::canonical_bytes(self.parent, self.slot, &self.body)
    }

    pub fn hash_matches(&self) -> bool {
        BlockId(sha256(&self.encode())) == self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Accepted,
    Duplicate,
    MissingParent,
}

#[derive(Debug, Clone)]
pub struct BlockTree {
    genesis: BlockId,
    blocks: HashMap<BlockId, Block>,
    children: HashMap<BlockId, BTreeSet<BlockId>>,
    /// Insertion order, for deterministic iteration.
    order: Vec<BlockId>,
}

impl Default for BlockTree {
    fn default() -> Self {
        BlockTree::new()
    }
}

impl BlockTree {
    pub fn new() -> BlockTree {
        let genesis = Block::genesis();
        let id = genesis.id;
        let mut blocks = HashMap::new();
        blocks.insert(id, genesis);
        BlockTree { genesis: id, blocks, children: HashMap::new(), order: vec![id] }
    }

    pub fn genesis(&self) -> BlockId {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, id: &BlockId) -> Option<&Block> {
        self.blocks.get(id)
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.blocks.contains_key(id)
    }

    fn block(&self, id: &BlockId) -> Result<&Block, ChainError> {
        self.blocks.get(id).ok_or(ChainError::UnknownBlock(*id))
    }

    pub fn slot(&self, id: &BlockId) -> Result<Slot, ChainError> {
        Ok(self.block(id)?.slot)
    }

    /// Blocks in insertion order (genesis first).
    pub fn iter(&self) -> impl Iterator<Item = &Block> {
        self.order.iter().map(move |id| &self.blocks[id])
    }

    pub fn children(&self, id: &BlockId) -> impl Iterator<Item = &BlockId> {
        self.children.get(id).into_iter().flatten()
    }

    pub fn insert(&mut self, block: Block) -> Result<InsertOutcome, ChainError> {
        if !block.hash_matches() {
            return Err(ChainError::Malformed { id: block.id, reason: "id does not match contents".into() });
        }
        if self.blocks.contains_key(&block.id) {
            return Ok(InsertOutcome::Duplicate);
        }
        let Some(parent) = block.parent else {
            return Err(ChainError::Malformed { id: block.id, reason: "second parentless block".into() });
        };
        let Some(parent_block) = self.blocks.get(&parent) else {
            return Ok(InsertOutcome::MissingParent);
        };
        if block.slot <= parent_block.slot {
            return Err(ChainError::Malformed {
                id: block.id,
                reason: format!("slot {} not greater than parent slot {}", block.slot, parent_block.slot),
            });
        }
        self.children.entry(parent).or_default().insert(block.id);
        self.order.push(block.id);
        self.blocks.insert(block.id, block);
        Ok(InsertOutcome::Accepted)
    }

    /// `a ⪯ b`: `a` lies on the ancestor path of `b` (inclusive).
    pub fn is_prefix(&self, a: &BlockId, b: &BlockId) -> Result<bool, ChainError> {
        let a_slot = self.slot(a)?;
        let mut cur = self.block(b)?;
        while cur.slot > a_slot {
            match cur.parent {
                Some(p) => cur = self.block(&p)?,
                None => return Ok(false),
            }
        }
        Ok(cur.id == *a)
    }

    /// Infallible `⪯` for ids known to be in the tree; unknown ids are never prefixes.
    pub fn extends(&self, descendant: &BlockId, ancestor: &BlockId) -> bool {
        self.is_prefix(ancestor, descendant).unwrap_or(false)
    }

    pub fn conflicts(&self, a: &BlockId, b: &BlockId) -> Result<bool, ChainError> {
        Ok(!self.is_prefix(a, b)? && !self.is_prefix(b, a)?)
    }

    /// Ancestors of `tip` from the tip down to genesis.
    pub fn ancestors<'a>(&'a self, tip: &BlockId) -> Ancestors<'a> {
        Ancestors { tree: self, next: self.blocks.get(tip) }
    }

    /// Longest prefix of `tip` whose slot is at most `t - kappa`.
    pub fn kappa_deep_prefix(&self, tip: &BlockId, t: Slot, kappa: i64) -> Result<BlockId, ChainError> {
        if kappa < 2 {
            return Err(ChainError::BadKappa(kappa));
        }
        self.block(tip)?;
        let bound = t - kappa;
        Ok(self
            .ancestors(tip)
            .find(|b| b.slot <= bound)
            .map(|b| b.id)
            .unwrap_or(self.genesis))
    }

    /// Longest chain that is a prefix of both `a` and `b`.
    pub fn common_prefix(&self, a: &BlockId, b: &BlockId) -> Result<BlockId, ChainError> {
        let mut x = self.block(a)?;
        let mut y = self.block(b)?;
        while x.id != y.id {
            if x.slot >= y.slot {
                x = self.block(&x.parent.ok_or(ChainError::UnknownBlock(x.id))?)?;
            } else {
                y = self.block(&y.parent.ok_or(ChainError::UnknownBlock(y.id))?)?;
            }
        }
        Ok(x.id)
    }

    /// Chain order: by tip slot, ties broken by smaller tip hash ranking higher.
    ///
    /// Equal slots only happen between distinct blocks, which is the adversarial
    /// case where a deterministic rule is needed.
    pub fn chain_cmp(&self, a: &BlockId, b: &BlockId) -> Ordering {
        let sa = self.slot(a).unwrap_or(i64::MIN);
        let sb = self.slot(b).unwrap_or(i64::MIN);
        sa.cmp(&sb).then_with(|| b.cmp(a))
    }

    pub fn tx_set(&self, tip: &BlockId) -> HashSet<TxId> {
        self.ancestors(tip).flat_map(|b| b.body.iter().copied()).collect()
    }

    pub fn contains_tx(&self, tip: &BlockId, tx: &TxId) -> bool {
        self.ancestors(tip).any(|b| b.body.contains(tx))
    }

    /// Builds the single-block extension of `chain` at slot `t` carrying every
    /// pool transaction not already in `chain`, in pool order, and inserts it.
    pub fn extend(&mut self, chain: &BlockId, t: Slot, pool: &[TxId]) -> Result<BlockId, ChainError> {
        let block = self.build_extension(chain, t, pool)?;
        let id = block.id;
        self.insert(block)?;
        Ok(id)
    }

    /// [`BlockTree::extend`] without inserting.
    pub fn build_extension(&self, chain: &BlockId, t: Slot, pool: &[TxId]) -> Result<Block, ChainError> {
        let chain_slot = self.slot(chain)?;
        if chain_slot >= t {
            return Err(ChainError::ExtendPrecondition { chain_slot, target: t });
        }
        let included = self.tx_set(chain);
        let mut seen = HashSet::new();
        let body: Vec<TxId> =
            pool.iter().copied().filter(|tx| !included.contains(tx) && seen.insert(*tx)).collect();
        Ok(Block::new(Some(*chain), t, body))
    }
}

pub struct Ancestors<'a> {
    tree: &'a BlockTree,
    next: Option<&'a Block>,
}

impl<'a> Iterator for Ancestors<'a> {
    type Item = &'a Block;

    fn next(&mut self) -> Option<&'a Block> {
        let cur = self.next?;
        self.next = cur.parent.and_then(|p| self.tree.blocks.get(&p));
        Some(cur)
    }
}
