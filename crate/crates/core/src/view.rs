//! A validator's view: the set of messages it has received.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use indexmap::IndexSet;

use crate::ids::{Slot, ValidatorId};
use crate::messages::{Checkpoint, FinVote, Message, ProposeMsg, VoteMsg};

/// Set of received messages, iterated in arrival order.
///
/// Receiving a proposal also receives the votes of its quorum certificate.
/// Besides the message sets the view keeps a per-slot vote index and a tally
/// of distinct fin-vote voters per (source, target) link.
#[derive(Debug, Clone, Default)]
pub struct View {
    votes: IndexSet<Arc<VoteMsg>>,
    proposals: IndexSet<Arc<ProposeMsg>>,
    by_slot: BTreeMap<Slot, Vec<usize>>,
    links: BTreeMap<(Checkpoint, Checkpoint), BTreeSet<ValidatorId>>,
}

impl View {
    pub fn new() -> View {
        View::default()
    }

    pub fn from_votes<I: IntoIterator<Item = VoteMsg>>(votes: I) -> View {
        let mut v = View::new();
        for vote in votes {
            v.insert_vote(Arc::new(vote));
        }
        v
    }

    pub(crate) fn from_arcs<'a, I: IntoIterator<Item = &'a Arc<VoteMsg>>>(votes: I) -> View {
        let mut v = View::new();
        for vote in votes {
            v.insert_vote(vote.clone());
        }
        v
    }

    /// Returns true if the vote was not already present.
    pub fn insert_vote(&mut self, vote: Arc<VoteMsg>) -> bool {
        let (idx, fresh) = self.votes.insert_full(vote);
        if fresh {
            let vote = &self.votes[idx];
            self.by_slot.entry(vote.slot).or_default().push(idx);
            if let Some(fv) = &vote.fin_vote {
                self.links.entry((fv.source, fv.target)).or_default().insert(fv.voter);
            }
        }
        fresh
    }

    /// Inserts the proposal and the votes of its certificate. Returns true if
    /// the proposal itself was new.
    pub fn insert_proposal(&mut self, proposal: Arc<ProposeMsg>) -> bool {
        for v in &proposal.qc {
            if !self.votes.contains(v) {
                self.insert_vote(Arc::new(v.clone()));
            }
        }
        self.proposals.insert(proposal)
    }

    pub fn insert(&mut self, msg: &Message) -> bool {
        match msg {
            Message::Vote(v) => self.insert_vote(v.clone()),
            Message::Propose(p) => self.insert_proposal(p.clone()),
        }
    }

    pub fn merge(&mut self, other: &View) {
        for v in &other.votes {
            self.insert_vote(v.clone());
        }
        for p in &other.proposals {
            self.insert_proposal(p.clone());
        }
    }

    pub fn votes(&self) -> impl Iterator<Item = &Arc<VoteMsg>> {
        self.votes.iter()
    }

    pub fn proposals(&self) -> impl Iterator<Item = &Arc<ProposeMsg>> {
        self.proposals.iter()
    }

    pub fn votes_in_slot(&self, slot: Slot) -> impl Iterator<Item = &Arc<VoteMsg>> {
        self.by_slot.get(&slot).into_iter().flatten().map(move |&i| &self.votes[i])
    }

    pub fn contains_vote(&self, vote: &VoteMsg) -> bool {
        self.votes.contains(vote)
    }

    pub fn contains_proposal(&self, p: &ProposeMsg) -> bool {
        self.proposals.contains(p)
    }

    pub fn vote_count(&self) -> usize {
        self.votes.len()
    }

    pub fn proposal_count(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty() && self.proposals.is_empty()
    }

    pub fn fin_votes(&self) -> impl Iterator<Item = &FinVote> {
        self.votes.iter().filter_map(|v| v.fin_vote.as_ref())
    }

    /// Distinct voters per fin-vote link, ordered by source slot.
    pub fn links(&self) -> &BTreeMap<(Checkpoint, Checkpoint), BTreeSet<ValidatorId>> {
        &self.links
    }

    /// Vote-set equality, ignoring arrival order and proposals.
    pub fn same_votes(&self, other: &View) -> bool {
        self.votes.len() == other.votes.len() && self.votes.iter().all(|v| other.votes.contains(v))
    }

    pub fn is_vote_subset_of(&self, other: &View) -> bool {
        self.votes.iter().all(|v| other.votes.contains(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::BlockId;

    #[test]
    fn set_semantics_and_qc_expansion() {
        let mut v = View::new();
        let a = VoteMsg::plain(BlockId([1; 32]), 0, ValidatorId(0));
        assert!(v.insert_vote(Arc::new(a.clone())));
        assert!(!v.insert_vote(Arc::new(a.clone())));
        assert_eq!(v.vote_count(), 1);

        let b = VoteMsg::plain(BlockId([1; 32]), 0, ValidatorId(1));
        let p = ProposeMsg::new(BlockId([2; 32]), BlockId([1; 32]), vec![a, b.clone()], None, 1, ValidatorId(2));
        assert!(v.insert_proposal(Arc::new(p)));
        assert_eq!(v.vote_count(), 2);
        assert!(v.contains_vote(&b));
        assert_eq!(v.votes_in_slot(0).count(), 2);
        assert_eq!(v.votes_in_slot(1).count(), 0);
    }

    #[test]
    fn link_tally_counts_distinct_voters() {
        let s = Checkpoint::new(BlockId([0; 32]), 0);
        let t = Checkpoint::new(BlockId([1; 32]), 1);
        let mut v = View::new();
        v.insert_vote(Arc::new(VoteMsg::with_link(BlockId([1; 32]), s, t, 1, ValidatorId(0))));
        v.insert_vote(Arc::new(VoteMsg::with_link(BlockId([2; 32]), s, t, 1, ValidatorId(0))));
        v.insert_vote(Arc::new(VoteMsg::with_link(BlockId([1; 32]), s, t, 1, ValidatorId(1))));
        assert_eq!(v.links()[&(s, t)].len(), 2);
    }
}
