//! Justification and finalization of checkpoints, plus slashing detection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::BlockTree;
use crate::ids::{supermajority, ValidatorId};
use crate::messages::{Checkpoint, FinVote};
use crate::view::View;

/// A fin-vote counts only if its source slot is strictly below the target
/// slot and the source chain is a prefix of the target chain.
pub fn valid_finvote(tree: &BlockTree, v: &FinVote) -> bool {
    valid_link(tree, &v.source, &v.target)
}

fn valid_link(tree: &BlockTree, source: &Checkpoint, target: &Checkpoint) -> bool {
    source.c < target.c && tree.is_prefix(&source.chain, &target.chain).unwrap_or(false)
}

/// Justified and finalized checkpoints of one view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalityState {
    pub justified: BTreeSet<Checkpoint>,
    pub finalized: BTreeSet<Checkpoint>,
}

impl FinalityState {
    /// Single forward pass over the view's links in increasing source slot.
    /// Every valid link raises the slot, so a source is settled before any
    /// link leaving it is visited.
    pub fn compute(tree: &BlockTree, view: &View, n: usize) -> FinalityState {
        let threshold = supermajority(n);
        let genesis = Checkpoint::genesis(tree.genesis());
        let strong: Vec<&(Checkpoint, Checkpoint)> = view
            .links()
            .iter()
            .filter(|((s, t), voters)| voters.len() >= threshold && valid_link(tree, s, t))
            .map(|(k, _)| k)
            .collect();

        let mut justified = BTreeSet::from([genesis]);
        for (s, t) in &strong {
            if justified.contains(s) {
                justified.insert(*t);
            }
        }
        let mut finalized = BTreeSet::from([genesis]);
        for (s, t) in &strong {
            if t.c == s.c + 1 && justified.contains(s) {
                finalized.insert(*s);
            }
        }
        FinalityState { justified, finalized }
    }

    pub fn is_justified(&self, c: &Checkpoint) -> bool {
        self.justified.contains(c)
    }

    pub fn is_finalized(&self, c: &Checkpoint) -> bool {
        self.finalized.contains(c)
    }

    pub fn greatest_justified(&self) -> Checkpoint {
        greatest(&self.justified)
    }

    pub fn greatest_finalized(&self) -> Checkpoint {
        greatest(&self.finalized)
    }
}

fn greatest(set: &BTreeSet<Checkpoint>) -> Checkpoint {
    let mut it = set.iter();
    let mut best = *it.next().expect("genesis is always present");
    for c in it {
        if c.better_than(&best) {
            best = *c;
        }
    }
    best
}

pub fn is_justified(tree: &BlockTree, c: &Checkpoint, view: &View, n: usize) -> bool {
    FinalityState::compute(tree, view, n).is_justified(c)
}

pub fn is_finalized(tree: &BlockTree, c: &Checkpoint, view: &View, n: usize) -> bool {
    FinalityState::compute(tree, view, n).is_finalized(c)
}

pub fn greatest_justified(tree: &BlockTree, view: &View, n: usize) -> Checkpoint {
    FinalityState::compute(tree, view, n).greatest_justified()
}

pub fn greatest_finalized(tree: &BlockTree, view: &View, n: usize) -> Checkpoint {
    FinalityState::compute(tree, view, n).greatest_finalized()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashKind {
    /// Two distinct fin-votes with the same target slot.
    DoubleVote,
    /// `vote_a` strictly surrounds `vote_b`.
    SurroundVote,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlashingEvidence {
    pub voter: ValidatorId,
    pub kind: SlashKind,
    pub vote_a: FinVote,
    pub vote_b: FinVote,
}

impl SlashingEvidence {
    /// Re-checks the slashing predicate on the two recorded votes.
    pub fn verify(&self) -> bool {
        let (a, b) = (&self.vote_a, &self.vote_b);
        if a.voter != self.voter || b.voter != self.voter || a == b {
            return false;
        }
        match self.kind {
            SlashKind::DoubleVote => a.target.c == b.target.c,
            SlashKind::SurroundVote => surrounds(a, b),
        }
    }
}

fn surrounds(outer: &FinVote, inner: &FinVote) -> bool {
    outer.source.c < inner.source.c && inner.source.c < inner.target.c && inner.target.c < outer.target.c
}

fn classify(a: &FinVote, b: &FinVote) -> Option<SlashingEvidence> {
    if a == b || a.voter != b.voter {
        return None;
    }
    let voter = a.voter;
    if a.target.c == b.target.c {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        return Some(SlashingEvidence { voter, kind: SlashKind::DoubleVote, vote_a: *x, vote_b: *y });
    }
    if surrounds(a, b) {
        return Some(SlashingEvidence { voter, kind: SlashKind::SurroundVote, vote_a: *a, vote_b: *b });
    }
    if surrounds(b, a) {
        return Some(SlashingEvidence { voter, kind: SlashKind::SurroundVote, vote_a: *b, vote_b: *a });
    }
    None
}

/// All double and surround votes among `votes`, one record per offending pair.
pub fn detect_slashable<'a, I: IntoIterator<Item = &'a FinVote>>(votes: I) -> BTreeSet<SlashingEvidence> {
    let mut by_voter: BTreeMap<ValidatorId, BTreeSet<FinVote>> = BTreeMap::new();
    for v in votes {
        by_voter.entry(v.voter).or_default().insert(*v);
    }
    let mut out = BTreeSet::new();
    for group in by_voter.values() {
        let list: Vec<&FinVote> = group.iter().collect();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if let Some(e) = classify(a, b) {
                    out.insert(e);
                }
            }
        }
    }
    out
}

/// Validators named by a set of evidence.
pub fn implicated(evidence: &BTreeSet<SlashingEvidence>) -> BTreeSet<ValidatorId> {
    evidence.iter().map(|e| e.voter).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttributionError {
    #[error("the two views do not finalize conflicting checkpoints")]
    NoConflict,
}

/// Finalized checkpoints of the two views whose chains conflict, if any.
pub fn conflicting_finality(
    tree: &BlockTree,
    view_a: &View,
    view_b: &View,
    n: usize,
) -> Option<(Checkpoint, Checkpoint)> {
    let fa = FinalityState::compute(tree, view_a, n);
    let fb = FinalityState::compute(tree, view_b, n);
    for a in &fa.finalized {
        for b in &fb.finalized {
            if tree.conflicts(&a.chain, &b.chain).unwrap_or(false) {
                return Some((*a, *b));
            }
        }
    }
    None
}

/// Slashing evidence explaining why two views finalized conflicting chains.
pub fn attribute_conflicting_finality(
    tree: &BlockTree,
    view_a: &View,
    view_b: &View,
    n: usize,
) -> Result<BTreeSet<SlashingEvidence>, AttributionError> {
    if conflicting_finality(tree, view_a, view_b, n).is_none() {
        return Err(AttributionError::NoConflict);
    }
    Ok(detect_slashable(view_a.fin_votes().chain(view_b.fin_votes())))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ids::{BlockId, TxId};
    use crate::messages::VoteMsg;

    fn vid(i: u32) -> ValidatorId {
        ValidatorId(i)
    }

    fn link_view(links: &[(Checkpoint, Checkpoint, &[u32])]) -> View {
        let mut v = View::new();
        for (s, t, voters) in links {
            for &i in voters.iter() {
                v.insert_vote(Arc::new(VoteMsg::with_link(t.chain, *s, *t, t.c, vid(i))));
            }
        }
        v
    }

    fn fv(s: (BlockId, i64), t: (BlockId, i64), voter: u32) -> FinVote {
        FinVote { source: Checkpoint::new(s.0, s.1), target: Checkpoint::new(t.0, t.1), voter: vid(voter) }
    }

    #[test]
    fn finvote_validity() {
        let mut tree = BlockTree::new();
        let g = tree.genesis();
        let x = tree.extend(&g, 0, &[]).unwrap();
        let y = tree.extend(&g, 0, &[TxId::derive(0, 1)]).unwrap();
        assert!(valid_finvote(&tree, &fv((g, 0), (x, 1), 0)));
        assert!(!valid_finvote(&tree, &fv((x, 1), (x, 1), 0)));
        assert!(!valid_finvote(&tree, &fv((x, 1), (y, 2), 0)));
        assert!(!valid_finvote(&tree, &fv((g, 0), (BlockId([9; 32]), 2), 0)));
    }

    #[test]
    fn justification_threshold() {
        let mut tree = BlockTree::new();
        let g = tree.genesis();
        let x = tree.extend(&g, 0, &[]).unwrap();
        let gen = Checkpoint::genesis(g);
        let cx = Checkpoint::new(x, 1);
        assert!(is_justified(&tree, &gen, &View::new(), 3));
        assert!(is_justified(&tree, &cx, &link_view(&[(gen, cx, &[0, 1])]), 3));
        assert!(!is_justified(&tree, &cx, &link_view(&[(gen, cx, &[0])]), 3));
    }

    #[test]
    fn finalization_needs_gap_one() {
        let mut tree = BlockTree::new();
        let g = tree.genesis();
        let x = tree.extend(&g, 0, &[]).unwrap();
        let y = tree.extend(&x, 1, &[]).unwrap();
        let gen = Checkpoint::genesis(g);
        let c1 = Checkpoint::new(x, 1);
        let c2 = Checkpoint::new(y, 2);
        let c3 = Checkpoint::new(y, 3);
        let all: &[u32] = &[0, 1, 2];
        assert!(is_finalized(&tree, &gen, &View::new(), 3));

        let v = link_view(&[(gen, c1, all), (c1, c2, all)]);
        assert!(is_finalized(&tree, &c1, &v, 3));
        assert_eq!(greatest_finalized(&tree, &v, 3), c1);
        assert_eq!(greatest_justified(&tree, &v, 3), c2);

        let gap = link_view(&[(gen, c1, all), (c1, c3, all)]);
        assert!(!is_finalized(&tree, &c1, &gap, 3));
        assert_eq!(greatest_finalized(&tree, &gap, 3), gen);
        assert_eq!(greatest_justified(&tree, &gap, 3), c3);
    }

    #[test]
    fn gj_tie_break_is_smallest_hash() {
        let mut tree = BlockTree::new();
        let g = tree.genesis();
        let x = tree.extend(&g, 0, &[]).unwrap();
        let y = tree.extend(&g, 0, &[TxId::derive(0, 1)]).unwrap();
        let gen = Checkpoint::genesis(g);
        let v = link_view(&[(gen, Checkpoint::new(x, 1), &[0, 1, 2]), (gen, Checkpoint::new(y, 1), &[0, 1, 2])]);
        let gj = greatest_justified(&tree, &v, 4);
        assert_eq!(gj, Checkpoint::new(x.min(y), 1));
    }

    #[test]
    fn slashing_examples() {
        let (a, b, c) = (BlockId([1; 32]), BlockId([2; 32]), BlockId([3; 32]));
        let single = [fv((a, 0), (b, 2), 0)];
        assert!(detect_slashable(&single).is_empty());

        let double = [fv((a, 0), (b, 2), 0), fv((a, 0), (c, 2), 0)];
        let ev = detect_slashable(&double);
        assert_eq!(ev.len(), 1);
        let e = ev.iter().next().unwrap();
        assert_eq!(e.kind, SlashKind::DoubleVote);
        assert!(e.verify());

        let surround = [fv((c, 1), (c, 5), 0), fv((a, 2), (b, 4), 0)];
        let ev = detect_slashable(&surround);
        let e = ev.iter().next().unwrap();
        assert_eq!(e.kind, SlashKind::SurroundVote);
        assert_eq!(e.vote_a.target.c, 5);
        assert!(e.verify());

        let rev: Vec<FinVote> = surround.iter().rev().copied().collect();
        assert_eq!(detect_slashable(&rev), detect_slashable(&surround));
    }

    #[test]
    fn attribution_requires_conflict() {
        let tree = BlockTree::new();
        let v = View::new();
        assert_eq!(attribute_conflicting_finality(&tree, &v, &v, 4), Err(AttributionError::NoConflict));
    }
}
