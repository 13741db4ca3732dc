//! Random instance generators and definition-level oracles shared by the
//! integration tests. The oracles use only the block tree's parent links and
//! plain vectors of votes, not the library's filters or indexes.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ebbflow::chain::{Block, BlockTree};
use ebbflow::ids::{BlockId, Slot, TxId, ValidatorId};
use ebbflow::messages::{Checkpoint, FinVote, VoteMsg};
use rand::seq::IndexedRandom;
use rand::Rng;

/// A random tree of `size` blocks besides genesis. Each block picks a random
/// parent and a slot 1 to 3 past it.
pub fn random_tree<R: Rng>(rng: &mut R, size: usize) -> (BlockTree, Vec<BlockId>) {
    let mut tree = BlockTree::new();
    let mut ids = vec![tree.genesis()];
    for i in 0..size {
        let parent = *ids.choose(rng).unwrap();
        let slot = tree.slot(&parent).unwrap() + rng.random_range(1..=3);
        let block = Block::new(Some(parent), slot, vec![TxId::derive(1_000_000, i as u32)]);
        ids.push(block.id);
        tree.insert(block).unwrap();
    }
    (tree, ids)
}

/// `a ⪯ b` by walking parent links from `b`.
pub fn prefix_oracle(tree: &BlockTree, a: &BlockId, b: &BlockId) -> bool {
    let mut cur = Some(*b);
    while let Some(id) = cur {
        if id == *a {
            return true;
        }
        cur = tree.get(&id).and_then(|blk| blk.parent);
    }
    false
}

/// Majority fork-choice evaluated from its definition: filter, then test
/// every chain in the tree.
pub fn mfc_oracle(tree: &BlockTree, v: &[VoteMsg], v_prime: &[VoteMsg], base: &BlockId, t: Slot) -> BlockId {
    fn filtered(votes: &[VoteMsg], t: Slot) -> Vec<VoteMsg> {
        // drop every vote of a (voter, slot) with two different chains
        let mut chains: BTreeMap<(ValidatorId, Slot), BTreeSet<BlockId>> = BTreeMap::new();
        for x in votes {
            chains.entry((x.voter, x.slot)).or_default().insert(x.chain);
        }
        let eq: Vec<&VoteMsg> = votes.iter().filter(|x| chains[&(x.voter, x.slot)].len() == 1).collect();
        let unexpired: Vec<&VoteMsg> = eq.into_iter().filter(|x| x.slot == t || x.slot == t - 1).collect();
        let mut latest: BTreeMap<ValidatorId, Slot> = BTreeMap::new();
        for x in &unexpired {
            let e = latest.entry(x.voter).or_insert(x.slot);
            *e = (*e).max(x.slot);
        }
        unexpired.into_iter().filter(|x| latest[&x.voter] == x.slot).cloned().collect()
    }
    let fv = filtered(v, t);
    let fp = filtered(v_prime, t);
    let s: BTreeSet<ValidatorId> =
        v_prime.iter().filter(|x| x.slot == t || x.slot == t - 1).map(|x| x.voter).collect();

    let mut best: Option<BlockId> = None;
    for b in tree.iter() {
        let chi = b.id;
        if !prefix_oracle(tree, base, &chi) {
            continue;
        }
        let voters: BTreeSet<ValidatorId> = fv
            .iter()
            .filter(|x| fp.contains(x) && prefix_oracle(tree, &chi, &x.chain))
            .map(|x| x.voter)
            .collect();
        if chi != *base && 2 * voters.len() <= s.len() {
            continue;
        }
        let better = match best {
            None => true,
            Some(cur) => {
                let (sc, sb) = (tree.slot(&chi).unwrap(), tree.slot(&cur).unwrap());
                sc > sb || (sc == sb && chi < cur)
            }
        };
        if better {
            best = Some(chi);
        }
    }
    best.unwrap_or(*base)
}

fn link_voters(votes: &[FinVote], s: &Checkpoint, c: &Checkpoint) -> usize {
    votes.iter().filter(|x| x.source == *s && x.target == *c).map(|x| x.voter).collect::<BTreeSet<_>>().len()
}

fn valid_link(tree: &BlockTree, s: &Checkpoint, c: &Checkpoint) -> bool {
    s.c < c.c && prefix_oracle(tree, &s.chain, &c.chain)
}

/// Recursive justification: genesis, or some justified source with a valid
/// supermajority link to `c`.
pub fn justified_oracle(tree: &BlockTree, votes: &[FinVote], c: &Checkpoint, n: usize) -> bool {
    if *c == Checkpoint::genesis(tree.genesis()) {
        return true;
    }
    let threshold = (2 * n).div_ceil(3);
    let sources: BTreeSet<Checkpoint> = votes.iter().filter(|x| x.target == *c).map(|x| x.source).collect();
    sources.iter().any(|s| {
        valid_link(tree, s, c) && link_voters(votes, s, c) >= threshold && justified_oracle(tree, votes, s, n)
    })
}

pub fn finalized_oracle(tree: &BlockTree, votes: &[FinVote], c: &Checkpoint, n: usize) -> bool {
    if *c == Checkpoint::genesis(tree.genesis()) {
        return true;
    }
    let threshold = (2 * n).div_ceil(3);
    justified_oracle(tree, votes, c, n)
        && votes.iter().any(|x| {
            x.source == *c
                && x.target.c == c.c + 1
                && valid_link(tree, c, &x.target)
                && link_voters(votes, c, &x.target) >= threshold
        })
}

/// Every checkpoint mentioned by the votes, plus genesis.
pub fn mentioned_checkpoints(tree: &BlockTree, votes: &[FinVote]) -> BTreeSet<Checkpoint> {
    let mut out: BTreeSet<Checkpoint> = votes.iter().flat_map(|x| [x.source, x.target]).collect();
    out.insert(Checkpoint::genesis(tree.genesis()));
    out
}

/// Slashable pairs by direct comparison of every ordered pair:
/// `(voter, first, second, is_double)` with `first < second` for double votes
/// and `first` surrounding `second` otherwise.
pub fn slashing_oracle(votes: &[FinVote]) -> BTreeSet<(ValidatorId, FinVote, FinVote, bool)> {
    let mut out = BTreeSet::new();
    for a in votes {
        for b in votes {
            if a == b || a.voter != b.voter {
                continue;
            }
            if a.target.c == b.target.c && a < b {
                out.insert((a.voter, *a, *b, true));
            }
            if a.source.c < b.source.c && b.source.c < b.target.c && b.target.c < a.target.c {
                out.insert((a.voter, *a, *b, false));
            }
        }
    }
    out
}

/// A random checkpoint on one of `chains`, at or after the chain's slot.
pub fn random_checkpoint<R: Rng>(rng: &mut R, tree: &BlockTree, chains: &[BlockId]) -> Checkpoint {
    let chain = *chains.choose(rng).unwrap();
    let base = tree.slot(&chain).unwrap().max(0);
    Checkpoint::new(chain, base + rng.random_range(0..3))
}

/// Fin-votes from a small pool of links, each backed by a random voter set,
/// so that supermajority links actually occur.
pub fn random_finvotes<R: Rng>(rng: &mut R, tree: &BlockTree, chains: &[BlockId], n: usize) -> Vec<FinVote> {
    let genesis = Checkpoint::genesis(tree.genesis());
    let mut pool = vec![genesis];
    for _ in 0..rng.random_range(2..7) {
        pool.push(random_checkpoint(rng, tree, chains));
    }
    let mut votes = Vec::new();
    for _ in 0..rng.random_range(1..8) {
        let s = *pool.choose(rng).unwrap();
        let t = *pool.choose(rng).unwrap();
        let k = rng.random_range(0..=n);
        for v in 0..k {
            votes.push(FinVote { source: s, target: t, voter: ValidatorId(v as u32) });
        }
    }
    votes
}

pub fn vote_with(fv: FinVote, slot: Slot) -> VoteMsg {
    VoteMsg::with_link(fv.target.chain, fv.source, fv.target, slot, fv.voter)
}
