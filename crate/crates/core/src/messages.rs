//! Wire messages and their canonical byte encodings.
//!
//! Integers are little-endian; optional components carry a one-byte presence
//! flag. A message id is the SHA-256 of its encoding.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ids::{sha256, BlockId, MsgId, Slot, ValidatorId};

const VOTE_TAG: u8 = 0x01;
const PROPOSE_TAG: u8 = 0x02;

/// A chain together with the slot in which it is proposed for justification.
///
/// Field order makes the derived `Ord` sort by slot first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Checkpoint {
    pub c: Slot,
    pub chain: BlockId,
}

impl Checkpoint {
    pub fn new(chain: BlockId, c: Slot) -> Checkpoint {
        Checkpoint { c, chain }
    }

    pub fn genesis(genesis: BlockId) -> Checkpoint {
        Checkpoint { c: 0, chain: genesis }
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(self.chain.as_bytes());
        buf.extend_from_slice(&self.c.to_le_bytes());
    }

    /// Greater slot wins; on equal slots the smaller chain hash wins.
    pub fn better_than(&self, other: &Checkpoint) -> bool {
        self.c > other.c || (self.c == other.c && self.chain < other.chain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FinVote {
    pub source: Checkpoint,
    pub target: Checkpoint,
    pub voter: ValidatorId,
}

impl FinVote {
    /// `source tip ∥ source c ∥ target tip ∥ target c ∥ voter`.
    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        self.source.encode_into(buf);
        self.target.encode_into(buf);
        buf.extend_from_slice(&self.voter.0.to_le_bytes());
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(84);
        self.encode_into(&mut buf);
        buf
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoteMsg {
    pub chain: BlockId,
    pub fin_vote: Option<FinVote>,
    pub slot: Slot,
    pub voter: ValidatorId,
}

impl VoteMsg {
    /// A vote without a finality component.
    pub fn plain(chain: BlockId, slot: Slot, voter: ValidatorId) -> VoteMsg {
        VoteMsg { chain, fin_vote: None, slot, voter }
    }

    pub fn with_link(chain: BlockId, source: Checkpoint, target: Checkpoint, slot: Slot, voter: ValidatorId) -> VoteMsg {
        VoteMsg { chain, fin_vote: Some(FinVote { source, target, voter }), slot, voter }
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.push(VOTE_TAG);
        buf.extend_from_slice(self.chain.as_bytes());
        match &self.fin_vote {
            Some(fv) => {
                buf.push(1);
                fv.encode_into(buf);
            }
            None => buf.push(0),
        }
        buf.extend_from_slice(&self.slot.to_le_bytes());
        buf.extend_from_slice(&self.voter.0.to_le_bytes());
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(130);
        self.encode_into(&mut buf);
        buf
    }

    /// The message with its finality component erased.
    pub fn dyn_key(&self) -> (BlockId, Slot, ValidatorId) {
        (self.chain, self.slot, self.voter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProposeMsg {
    pub chain_p: BlockId,
    pub chain_c: BlockId,
    /// Quorum certificate for `chain_c`, kept sorted.
    pub qc: Vec<VoteMsg>,
    pub gj: Option<Checkpoint>,
    pub slot: Slot,
    pub proposer: ValidatorId,
}

/// A certificate vote reduced to `(chain, slot, voter)`.
pub type BareVote = (BlockId, Slot, ValidatorId);

/// A proposal with its finality components erased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProposeDynKey {
    pub chain_p: BlockId,
    /// `None` when the certificate is empty: the carried chain is then the
    /// finality-derived fallback, not a fast-confirmed chain.
    pub certified: Option<(BlockId, Vec<BareVote>)>,
    pub slot: Slot,
    pub proposer: ValidatorId,
}

impl ProposeMsg {
    pub fn new(
        chain_p: BlockId,
        chain_c: BlockId,
        mut qc: Vec<VoteMsg>,
        gj: Option<Checkpoint>,
        slot: Slot,
        proposer: ValidatorId,
    ) -> ProposeMsg {
        qc.sort();
        qc.dedup();
        ProposeMsg { chain_p, chain_c, qc, gj, slot, proposer }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(120 + 130 * self.qc.len());
        buf.push(PROPOSE_TAG);
        buf.extend_from_slice(self.chain_p.as_bytes());
        buf.extend_from_slice(self.chain_c.as_bytes());
        buf.extend_from_slice(&(self.qc.len() as u32).to_le_bytes());
        for v in &self.qc {
            v.encode_into(&mut buf);
        }
        match &self.gj {
            Some(cp) => {
                buf.push(1);
                cp.encode_into(&mut buf);
            }
            None => buf.push(0),
        }
        buf.extend_from_slice(&self.slot.to_le_bytes());
        buf.extend_from_slice(&self.proposer.0.to_le_bytes());
        buf
    }

    pub fn dyn_key(&self) -> ProposeDynKey {
        let certified = if self.qc.is_empty() {
            None
        } else {
            let mut keys: Vec<_> = self.qc.iter().map(VoteMsg::dyn_key).collect();
            keys.sort();
            keys.dedup();
            Some((self.chain_c, keys))
        };
        ProposeDynKey { chain_p: self.chain_p, certified, slot: self.slot, proposer: self.proposer }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Vote(Arc<VoteMsg>),
    Propose(Arc<ProposeMsg>),
}

/// Either message kind with finality components erased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DynKey {
    Vote((BlockId, Slot, ValidatorId)),
    Propose(ProposeDynKey),
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            Message::Vote(v) => v.encode(),
            Message::Propose(p) => p.encode(),
        }
    }

    pub fn id(&self) -> MsgId {
        MsgId(sha256(&self.encode()))
    }

    pub fn sender(&self) -> ValidatorId {
        match self {
            Message::Vote(v) => v.voter,
            Message::Propose(p) => p.proposer,
        }
    }

    pub fn slot(&self) -> Slot {
        match self {
            Message::Vote(v) => v.slot,
            Message::Propose(p) => p.slot,
        }
    }

    pub fn dyn_key(&self) -> DynKey {
        match self {
            Message::Vote(v) => DynKey::Vote(v.dyn_key()),
            Message::Propose(p) => DynKey::Propose(p.dyn_key()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: u8) -> BlockId {
        BlockId([x; 32])
    }

    #[test]
    fn vote_encoding_layout() {
        let v = VoteMsg::with_link(b(1), Checkpoint::new(b(2), 0), Checkpoint::new(b(3), 4), 5, ValidatorId(7));
        let enc = v.encode();
        assert_eq!(enc.len(), 1 + 32 + 1 + 84 + 8 + 4);
        assert_eq!(enc[0], VOTE_TAG);
        assert_eq!(&enc[1..33], &[1u8; 32]);
        assert_eq!(enc[33], 1);
        assert_eq!(&enc[34..66], &[2u8; 32]);
        assert_eq!(&enc[66..74], &0i64.to_le_bytes());
        assert_eq!(&enc[106..114], &4i64.to_le_bytes());
        assert_eq!(&enc[114..118], &7u32.to_le_bytes());
        assert_eq!(&enc[118..126], &5i64.to_le_bytes());
        assert_eq!(&enc[126..130], &7u32.to_le_bytes());

        let plain = VoteMsg::plain(b(1), 5, ValidatorId(7));
        assert_eq!(plain.encode().len(), 1 + 32 + 1 + 8 + 4);
    }

    #[test]
    fn propose_id_ignores_qc_order() {
        let v1 = VoteMsg::plain(b(1), 0, ValidatorId(0));
        let v2 = VoteMsg::plain(b(1), 0, ValidatorId(1));
        let p1 = ProposeMsg::new(b(2), b(1), vec![v1.clone(), v2.clone()], None, 1, ValidatorId(3));
        let p2 = ProposeMsg::new(b(2), b(1), vec![v2, v1], None, 1, ValidatorId(3));
        assert_eq!(Message::Propose(Arc::new(p1)).id(), Message::Propose(Arc::new(p2)).id());
    }

    #[test]
    fn dyn_key_erases_finality() {
        let a = VoteMsg::with_link(b(1), Checkpoint::new(b(0), 0), Checkpoint::new(b(1), 2), 2, ValidatorId(1));
        let plain = VoteMsg::plain(b(1), 2, ValidatorId(1));
        assert_ne!(a, plain);
        assert_eq!(a.dyn_key(), plain.dyn_key());

        let pa = ProposeMsg::new(b(5), b(4), vec![], Some(Checkpoint::new(b(4), 3)), 5, ValidatorId(0));
        let pb = ProposeMsg::new(b(5), b(0), vec![], None, 5, ValidatorId(0));
        assert_eq!(pa.dyn_key(), pb.dyn_key());
    }

    #[test]
    fn checkpoint_order() {
        let lo = Checkpoint::new(b(9), 1);
        let hi = Checkpoint::new(b(1), 2);
        assert!(lo < hi);
        assert!(hi.better_than(&lo));
        let tie = Checkpoint::new(b(0), 2);
        assert!(tie.better_than(&hi));
    }
}
