//! Core data structures and algorithms for a leaderless DAG ledger with
//! On Tangle Voting (OTV).
//!
//! The crate is organised bottom-up:
//!
//! * [`identity_weights`] – node identities and the normalised weight function.
//! * [`tangle_core`] – blocks, local Tangle views, solidification, Witness Weight.
//! * [`utxo_ledger`] – transactions, the Ledger DAG, conflicts and branches.
//! * [`reality_engine`] – deterministic and common-coin reality selection.
//! * [`voting`] – voting cones, supporter tracking and Approval Weight.
//! * [`tip_selection`] – uniform random tip selection restricted to a reality.
//! * [`analytics`] – closed-form performance heuristics and their oracles.
//! * [`properties`] – randomised structural checks used by the test suites.
//! * [`toy`] – the four-node worked example used as a golden fixture.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod digest;
pub mod identity_weights;
pub mod properties;
pub mod reality_engine;
pub mod tangle_core;
pub mod tip_selection;
pub mod toy;
pub mod utxo_ledger;
pub mod voting;

pub use identity_weights::{NodeId, WeightTable};
pub use tangle_core::{Block, BlockId, RefLabel, Reference, TangleView};
pub use utxo_ledger::{LedgerState, OutputId, Transaction, TransactionId};
