//! JSON-lines run trace: a header, then one record per event, then verdicts.
//!
//! The record layout is documented in `docs/trace-format.md`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, BlockTree};
use crate::ids::{MsgId, Round, Slot, ValidatorId, HASH_FUNCTION};
use crate::messages::{Checkpoint, Message};
use crate::scenario::Scenario;
use crate::validator::{Mode, Phase, Snapshot};
use crate::view::View;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace has no header record")]
    MissingHeader,
    #[error("unsupported trace version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub code_version: String,
    pub hash: String,
    pub scenario: Scenario,
}

impl Header {
    pub fn new(scenario: Scenario) -> Header {
        Header {
            version: TRACE_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            hash: HASH_FUNCTION.to_string(),
            scenario,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Proposer { slot: Slot, validator: ValidatorId },
    Corrupt { validator: ValidatorId },
    Sleep { validator: ValidatorId },
    Wake { validator: ValidatorId, active_from: Round },
    Tx { id: crate::ids::TxId },
    ProposeFailed { validator: ValidatorId, reason: String },
    /// A message from an honest sender still in flight at the horizon.
    Undelivered { idx: u32, to: ValidatorId },
}

/// Per-phase validator state plus the finality status of its current view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    #[serde(flatten)]
    pub state: Snapshot,
    pub gj: Option<Checkpoint>,
    pub gf: Option<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Block {
        run: Mode,
        round: Round,
        block: Block,
    },
    /// `idx` numbers the messages of one run in send order.
    Send {
        run: Mode,
        round: Round,
        idx: u32,
        id: MsgId,
        sender: ValidatorId,
        honest: bool,
        msg: Message,
    },
    /// The message entered the recipient's view.
    Deliver {
        run: Mode,
        round: Round,
        to: ValidatorId,
        idx: u32,
    },
    Snapshot {
        run: Mode,
        round: Round,
        phase: Phase,
        validator: ValidatorId,
        state: StateRecord,
    },
    Event {
        run: Mode,
        round: Round,
        #[serde(flatten)]
        event: Event,
    },
    Compliance {
        run: Mode,
        report: crate::sim::ComplianceReport,
    },
    Verdict(crate::checkers::Verdict),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: Header,
    pub records: Vec<Record>,
}

impl Trace {
    pub fn scenario(&self) -> &Scenario {
        &self.header.scenario
    }

    pub fn runs(&self) -> Vec<Mode> {
        self.header.scenario.mode.modes()
    }

    pub fn verdicts(&self) -> Vec<&crate::checkers::Verdict> {
        self.records
            .iter()
            .filter_map(|r| match r {
                Record::Verdict(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &Record::Header(self.header.clone()))?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match rec {
                Record::Header(h) if header.is_none() => {
                    if h.version != TRACE_VERSION {
                        return Err(TraceError::Version(h.version));
                    }
                    header = Some(h);
                }
                other => records.push(other),
            }
        }
        Ok(Trace { header: header.ok_or(TraceError::MissingHeader)?, records })
    }

    /// Drops verdict records, e.g. before re-checking.
    pub fn without_verdicts(&self) -> Trace {
        Trace {
            header: self.header.clone(),
            records: self.records.iter().filter(|r| !matches!(r, Record::Verdict(_))).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SendInfo {
    pub round: Round,
    pub sender: ValidatorId,
    pub honest: bool,
    pub msg: Message,
}

/// Indexed view of one run of a trace, rebuilt from its records.
#[derive(Debug, Clone)]
pub struct RunIndex {
    pub mode: Mode,
    pub scenario: Scenario,
    pub tree: BlockTree,
    pub sends: Vec<SendInfo>,
    /// `(round, recipient, message index)` in trace order.
    pub deliveries: Vec<(Round, ValidatorId, u32)>,
    /// Per validator, snapshots in round order.
    pub snapshots: BTreeMap<ValidatorId, Vec<(Round, Phase, StateRecord)>>,
    pub proposers: BTreeMap<Slot, ValidatorId>,
    pub events: Vec<(Round, Event)>,
    pub compliance: Option<crate::sim::ComplianceReport>,
}

impl RunIndex {
    pub fn build(trace: &Trace, mode: Mode) -> RunIndex {
        RunIndex::from_records(&trace.header.scenario, mode, &trace.records)
    }

    pub fn from_records(scenario: &Scenario, mode: Mode, records: &[Record]) -> RunIndex {
        let scenario = scenario.clone();
        let mut tree = BlockTree::new();
        let mut sends = Vec::new();
        let mut deliveries = Vec::new();
        let mut snapshots: BTreeMap<ValidatorId, Vec<_>> = BTreeMap::new();
        let mut proposers = BTreeMap::new();
        let mut events = Vec::new();
        let mut compliance = None;
        for rec in records {
            match rec {
                Record::Block { run, block, .. } if *run == mode => {
                    let _ = tree.insert(block.clone());
                }
                Record::Send { run, round, sender, honest, msg, .. } if *run == mode => {
                    sends.push(SendInfo { round: *round, sender: *sender, honest: *honest, msg: msg.clone() });
                }
                Record::Deliver { run, round, to, idx } if *run == mode => deliveries.push((*round, *to, *idx)),
                Record::Snapshot { run, round, phase, validator, state } if *run == mode => {
                    snapshots.entry(*validator).or_default().push((*round, *phase, state.clone()));
                }
                Record::Event { run, round, event } if *run == mode => {
                    if let Event::Proposer { slot, validator } = event {
                        proposers.insert(*slot, *validator);
                    }
                    events.push((*round, event.clone()));
                }
                Record::Compliance { run, report } if *run == mode => compliance = Some(report.clone()),
                _ => {}
            }
        }
        RunIndex { mode, scenario, tree, sends, deliveries, snapshots, proposers, events, compliance }
    }

    pub fn honest_at(&self, v: ValidatorId, r: Round) -> bool {
        self.scenario.honest_at(v, r)
    }

    /// The view of `v` after all deliveries up to and including round `r`.
    pub fn view_at(&self, v: ValidatorId, r: Round) -> View {
        let mut view = View::new();
        for &(round, to, idx) in &self.deliveries {
            if round > r {
                break;
            }
            if to == v {
                view.insert(&self.sends[idx as usize].msg);
            }
        }
        view
    }

    /// Every validator's view at the end of the run.
    pub fn final_views(&self) -> HashMap<ValidatorId, View> {
        let mut views: HashMap<ValidatorId, View> = HashMap::new();
        for &(_, to, idx) in &self.deliveries {
            views.entry(to).or_default().insert(&self.sends[idx as usize].msg);
        }
        views
    }

    /// The snapshot of `v` taken at round `r`, if any.
    pub fn snapshot(&self, v: ValidatorId, r: Round) -> Option<&StateRecord> {
        let list = self.snapshots.get(&v)?;
        let i = list.partition_point(|(round, _, _)| *round < r);
        list.get(i).filter(|(round, _, _)| *round == r).map(|(_, _, s)| s)
    }

    /// Honest, active validators' snapshots at round `r`.
    pub fn active_snapshots(&self, r: Round) -> Vec<(ValidatorId, &StateRecord)> {
        self.snapshots
            .keys()
            .filter(|v| self.honest_at(**v, r))
            .filter_map(|v| self.snapshot(*v, r).map(|s| (*v, s)))
            .filter(|(_, s)| matches!(s.state.activity, crate::validator::Activity::Active))
            .collect()
    }

    /// Honest proposals by slot: the proposer was honest when it proposed.
    pub fn honest_proposals(&self) -> Vec<(Round, &crate::messages::ProposeMsg)> {
        self.sends
            .iter()
            .filter(|s| s.honest)
            .filter_map(|s| match &s.msg {
                Message::Propose(p) => Some((s.round, p.as_ref())),
                _ => None,
            })
            .collect()
    }
}
