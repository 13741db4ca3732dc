//! Ebb-and-flow consensus: a dynamically available chain with fast and
//! κ-deep confirmation, a checkpoint finality gadget on top, and a
//! deterministic round-based simulator with property checkers.

pub mod chain;
pub mod checkers;
pub mod finality;
pub mod forkchoice;
pub mod ids;
pub mod messages;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod validator;
pub mod view;
