//! Message scheduling: who receives what, and when.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ids::{Round, ValidatorId};
use crate::scenario::{Latency, Scenario};

/// Delivery state of one (message, recipient) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slotting {
    Pending(Round),
    Delivered,
}

#[derive(Debug)]
pub struct Network {
    delta: u64,
    gst: Round,
    partition_from: Round,
    latency: Latency,
    group_of: Vec<Option<usize>>,
    rng: ChaCha8Rng,
    queue: BTreeMap<Round, Vec<(ValidatorId, u32)>>,
    state: HashMap<(u32, ValidatorId), Slotting>,
}

impl Network {
    pub fn new(s: &Scenario) -> Network {
        let mut group_of = vec![None; s.n];
        for (g, members) in s.partition.iter().enumerate() {
            for v in members {
                group_of[v.index()] = Some(g);
            }
        }
        Network {
            delta: s.delta,
            gst: s.gst,
            partition_from: s.partition_from,
            latency: s.latency,
            group_of,
            // distinct stream from proposer election, which hashes the seed per slot
            rng: ChaCha8Rng::seed_from_u64(s.seed ^ 0x6e65_7477_6f72_6b00),
            queue: BTreeMap::new(),
            state: HashMap::new(),
        }
    }

    fn hop(&mut self) -> u64 {
        match self.latency {
            Latency::Max => self.delta,
            Latency::Uniform => self.rng.random_range(1..=self.delta),
        }
    }

    /// Arrival round for a message sent at `r`. After GST, and before the
    /// partition starts, every hop takes at most Δ. Otherwise only links
    /// inside a partition group, or touching a corrupted validator, are fast;
    /// the rest are held until `GST + Δ`.
    pub fn arrival(&mut self, r: Round, from: ValidatorId, to: ValidatorId, corrupted: &[bool]) -> Round {
        if r >= self.gst || r < self.partition_from {
            return r + self.hop();
        }
        let same_group = matches!(
            (self.group_of[from.index()], self.group_of[to.index()]),
            (Some(a), Some(b)) if a == b
        );
        if same_group || corrupted[from.index()] || corrupted[to.index()] {
            r + self.hop()
        } else {
            self.gst + self.delta
        }
    }

    /// Schedules delivery, keeping the earliest round if already scheduled.
    pub fn schedule(&mut self, idx: u32, to: ValidatorId, at: Round) {
        match self.state.get(&(idx, to)) {
            Some(Slotting::Delivered) => {}
            Some(Slotting::Pending(old)) if *old <= at => {}
            _ => {
                self.state.insert((idx, to), Slotting::Pending(at));
                self.queue.entry(at).or_default().push((to, idx));
            }
        }
    }

    /// Whether `(idx, to)` is delivered or already scheduled.
    pub fn known(&self, idx: u32, to: ValidatorId) -> bool {
        self.state.contains_key(&(idx, to))
    }

    pub fn mark_delivered(&mut self, idx: u32, to: ValidatorId) {
        self.state.insert((idx, to), Slotting::Delivered);
    }

    /// Due deliveries for round `r`, sorted by recipient then message.
    pub fn due(&mut self, r: Round) -> Vec<(ValidatorId, u32)> {
        let mut out: Vec<(ValidatorId, u32)> = self
            .queue
            .remove(&r)
            .unwrap_or_default()
            .into_iter()
            .filter(|(to, idx)| self.state.get(&(*idx, *to)) == Some(&Slotting::Pending(r)))
            .collect();
        out.sort();
        out.dedup();
        for (to, idx) in &out {
            self.state.insert((*idx, *to), Slotting::Delivered);
        }
        out
    }

    /// Everything still pending, in delivery order.
    pub fn in_flight(&self) -> Vec<(Round, ValidatorId, u32)> {
        let mut out = Vec::new();
        for (r, list) in &self.queue {
            let mut list = list.clone();
            list.sort();
            list.dedup();
            for (to, idx) in list {
                if self.state.get(&(idx, to)) == Some(&Slotting::Pending(*r)) {
                    out.push((*r, to, idx));
                }
            }
        }
        out
    }
}
