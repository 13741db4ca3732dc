//! Vote filters and the majority fork-choice function.
//!
//! The filters operate on the vote component of a view; their outputs carry
//! no proposals. [`mfc`] uses an indexed fast path that is checked against the
//! literal filter composition in the tests.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::chain::BlockTree;
use crate::ids::{BlockId, Slot, ValidatorId};
use crate::messages::VoteMsg;
use crate::view::View;

/// Drops every vote a validator cast in a slot where it voted for two
/// different chains. Votes in its other slots are kept.
pub fn fil_eq(view: &View) -> View {
    let bad = equivocating_slots(view.votes());
    View::from_arcs(view.votes().filter(|v| !bad.contains(&(v.voter, v.slot))))
}

fn equivocating_slots<'a, I: Iterator<Item = &'a Arc<VoteMsg>>>(votes: I) -> BTreeSet<(ValidatorId, Slot)> {
    let mut first: HashMap<(ValidatorId, Slot), BlockId> = HashMap::new();
    let mut bad = BTreeSet::new();
    for v in votes {
        match first.get(&(v.voter, v.slot)) {
            Some(chain) if *chain != v.chain => {
                bad.insert((v.voter, v.slot));
            }
            Some(_) => {}
            None => {
                first.insert((v.voter, v.slot), v.chain);
            }
        }
    }
    bad
}

/// Keeps only votes from slots `t - 1` and `t`.
pub fn fil_1exp(view: &View, t: Slot) -> View {
    View::from_arcs(view.votes().filter(|v| v.slot == t || v.slot == t - 1))
}

/// Keeps, per validator, only the votes of its highest slot.
pub fn fil_lmd(view: &View) -> View {
    let mut latest: HashMap<ValidatorId, Slot> = HashMap::new();
    for v in view.votes() {
        let e = latest.entry(v.voter).or_insert(v.slot);
        *e = (*e).max(v.slot);
    }
    View::from_arcs(view.votes().filter(|v| latest[&v.voter] == v.slot))
}

/// Latest, non-expired, non-equivocating votes for chains extending `chain`.
pub fn supporting_votes(tree: &BlockTree, view: &View, chain: &BlockId, t: Slot) -> View {
    let filtered = fil_lmd(&fil_1exp(&fil_eq(view), t));
    View::from_arcs(filtered.votes().filter(|v| tree.extends(&v.chain, chain)))
}

/// Validators with at least one non-expired vote. Equivocators still count.
pub fn voter_set(view: &View, t: Slot) -> BTreeSet<ValidatorId> {
    view.votes_in_slot(t - 1).chain(view.votes_in_slot(t)).map(|v| v.voter).collect()
}

/// `fil_lmd(fil_1exp(fil_eq(view), t))` computed from the slot index.
///
/// Equivocation removal is per slot, so only slots `t - 1` and `t` need to be
/// inspected.
pub fn latest_votes(view: &View, t: Slot) -> Vec<&Arc<VoteMsg>> {
    let window: Vec<&Arc<VoteMsg>> = view.votes_in_slot(t - 1).chain(view.votes_in_slot(t)).collect();
    let bad = equivocating_slots(window.iter().copied());
    let mut latest: HashMap<ValidatorId, Slot> = HashMap::new();
    for v in window.iter().filter(|v| !bad.contains(&(v.voter, v.slot))) {
        let e = latest.entry(v.voter).or_insert(v.slot);
        *e = (*e).max(v.slot);
    }
    window
        .into_iter()
        .filter(|v| !bad.contains(&(v.voter, v.slot)) && latest.get(&v.voter) == Some(&v.slot))
        .collect()
}

/// Majority fork-choice.
///
/// Returns the longest chain `χ ⪰ base` whose supporting votes, taken in both
/// views, come from more than half of the non-expired voters of `v_prime`;
/// `base` when no extension qualifies. Support counts distinct validators.
/// Among equally long qualifying chains the smallest tip hash wins.
pub fn mfc(tree: &BlockTree, v: &View, v_prime: &View, base: &BlockId, t: Slot) -> BlockId {
    let Ok(base_slot) = tree.slot(base) else {
        return *base;
    };
    let threshold = voter_set(v_prime, t).len();
    let in_prime: HashSet<&VoteMsg> = latest_votes(v_prime, t).into_iter().map(|m| m.as_ref()).collect();

    let mut by_chain: BTreeMap<BlockId, BTreeSet<ValidatorId>> = BTreeMap::new();
    for m in latest_votes(v, t) {
        if in_prime.contains(m.as_ref()) {
            by_chain.entry(m.chain).or_default().insert(m.voter);
        }
    }
    let mut support: BTreeMap<BlockId, BTreeSet<ValidatorId>> = BTreeMap::new();
    for (chain, voters) in &by_chain {
        let path: Vec<BlockId> = tree.ancestors(chain).take_while(|b| b.slot >= base_slot).map(|b| b.id).collect();
        if path.last() != Some(base) {
            continue;
        }
        for id in path {
            support.entry(id).or_default().extend(voters.iter().copied());
        }
    }

    let mut best = *base;
    for (id, voters) in &support {
        if 2 * voters.len() > threshold && tree.chain_cmp(id, &best).is_gt() {
            best = *id;
        }
    }
    best
}
