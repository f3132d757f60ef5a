//! On Tangle Voting: voting cones, supporter tracking and Approval Weight.
//!
//! A block votes for everything in its voting past cone: its own transaction
//! and that transaction's Ledger past, the Ledger past of every
//! transaction-referenced block's transaction, and recursively the voting
//! past cones of block-referenced blocks. Blocks are processed in the order
//! they become solid in this view; a later vote of a node for a transaction
//! revokes its earlier votes for everything conflicting with it.

use crate::identity_weights::{NodeId, WeightTable};
use crate::reality_engine::ConflictWeightFn;
use crate::tangle_core::{check_theta, Block, BlockId, RefLabel, TangleError, TangleView};
use crate::utxo_ledger::{LedgerError, LedgerState, Transaction, TransactionId};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VotingError {
    #[error(transparent)]
    Tangle(#[from] TangleError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("block {block} carries {carried} but {supplied} was supplied")]
    TransactionMismatch { block: BlockId, carried: TransactionId, supplied: TransactionId },
    #[error("block {0} has an invalid voting branch")]
    InvalidVotingBranch(BlockId),
    #[error("unknown transaction {0}")]
    UnknownTransaction(TransactionId),
    #[error("the given set is not a branch")]
    NotABranch,
}

/// Vertices of a block's voting past cone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VotingCone {
    pub blocks: BTreeSet<BlockId>,
    pub transactions: BTreeSet<TransactionId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VotingBranchResult {
    pub branch: BTreeSet<TransactionId>,
    pub valid: bool,
}

/// Supporter changes caused by one block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    pub added: Vec<(TransactionId, NodeId)>,
    pub revoked: Vec<(TransactionId, NodeId)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReceiveOutcome {
    pub solidified: Vec<BlockId>,
    pub missing: Vec<BlockId>,
    /// Vote processing result per solidified block.
    pub votes: Vec<(BlockId, Result<ChangeSet, VotingError>)>,
}

/// One node's Tangle, ledger and supporter state.
#[derive(Debug, Clone)]
pub struct VotingView {
    tangle: TangleView,
    ledger: LedgerState,
    /// Transactions of received blocks, keyed by block.
    contents: HashMap<BlockId, Transaction>,
    valid: HashMap<BlockId, bool>,
    tx_supporters: HashMap<TransactionId, BTreeSet<NodeId>>,
    last_vote_time: HashMap<(NodeId, TransactionId), f64>,
    aw_highwater: HashMap<TransactionId, f64>,
    aw_log: Vec<(f64, TransactionId, f64)>,
}

impl VotingView {
    pub fn new(owner: NodeId, genesis: Block, genesis_tx: Transaction, weights: Arc<WeightTable>, max_refs: usize) -> Self {
        let gid = genesis.id;
        let tangle = TangleView::new(owner, genesis, weights, max_refs);
        let ledger = LedgerState::new(genesis_tx.clone());
        let mut v = Self {
            tangle,
            ledger,
            contents: HashMap::new(),
            valid: HashMap::new(),
            tx_supporters: HashMap::new(),
            last_vote_time: HashMap::new(),
            aw_highwater: HashMap::new(),
            aw_log: Vec::new(),
        };
        v.contents.insert(gid, genesis_tx.clone());
        v.valid.insert(gid, true);
        v.tx_supporters.insert(genesis_tx.id, BTreeSet::new());
        v
    }

    pub fn tangle(&self) -> &TangleView {
        &self.tangle
    }

    pub fn ledger(&self) -> &LedgerState {
        &self.ledger
    }

    pub fn weights(&self) -> &Arc<WeightTable> {
        self.tangle.weights()
    }

    /// Transaction carried by a received block.
    pub fn content(&self, b: BlockId) -> Option<&Transaction> {
        self.contents.get(&b)
    }

    /// Whether a solid block's votes were accepted.
    pub fn is_vote_valid(&self, b: BlockId) -> Option<bool> {
        self.valid.get(&b).copied()
    }

    /// Receives a block with its transaction; solidifies, applies the
    /// transactions and processes votes of every block that became solid.
    pub fn receive(&mut self, block: Block, tx: Transaction, now: f64) -> Result<ReceiveOutcome, VotingError> {
        if block.transaction != tx.id {
            return Err(VotingError::TransactionMismatch { block: block.id, carried: block.transaction, supplied: tx.id });
        }
        let id = block.id;
        let sol = self.tangle.receive_block(block, now)?;
        self.contents.insert(id, tx);
        let mut out = ReceiveOutcome { solidified: sol.solidified.clone(), missing: sol.missing, votes: Vec::new() };
        for b in sol.solidified {
            let tx = self.contents[&b].clone();
            let applied = if self.ledger.contains(tx.id) { Ok(()) } else { self.ledger.apply_transaction(tx).map(|_| ()) };
            let result = match applied {
                Ok(()) => self.update_supporters_on_block(b, now),
                Err(e) => {
                    self.valid.insert(b, false);
                    Err(VotingError::Ledger(e))
                }
            };
            out.votes.push((b, result));
        }
        Ok(out)
    }

    /// Whether every transaction in a voting past cone made it into the ledger.
    fn cone_in_ledger(&self, cone: &VotingCone) -> bool {
        cone.transactions.iter().all(|t| self.ledger.contains(*t))
    }

    /// Voting past cone of a solid block.
    pub fn voting_past_cone(&self, x: BlockId) -> Result<VotingCone, VotingError> {
        if !self.tangle.is_solid(x) {
            return Err(if self.tangle.contains(x) { TangleError::NotSolid(x) } else { TangleError::UnknownBlock(x) }.into());
        }
        let mut cone = VotingCone::default();
        let mut roots: Vec<TransactionId> = Vec::new();
        let mut stack = vec![x];
        cone.blocks.insert(x);
        while let Some(b) = stack.pop() {
            let block = self.tangle.block(b).expect("solid block present");
            roots.push(block.transaction);
            for r in &block.references {
                match r.label {
                    RefLabel::BlockVote => {
                        if cone.blocks.insert(r.target) {
                            stack.push(r.target);
                        }
                    }
                    RefLabel::TransactionVote => {
                        roots.push(self.tangle.block(r.target).expect("parent present").transaction);
                    }
                }
            }
        }
        let mut stack = roots;
        while let Some(t) = stack.pop() {
            if cone.transactions.insert(t) {
                stack.extend(self.ledger.ledger_parents(t).iter().copied());
            }
        }
        Ok(cone)
    }

    /// Conflicts in the voting past cone, with the conflict-freeness check.
    pub fn voting_branch(&self, x: BlockId) -> Result<VotingBranchResult, VotingError> {
        let cone = self.voting_past_cone(x)?;
        let branch: BTreeSet<TransactionId> = cone.transactions.into_iter().filter(|t| self.ledger.is_conflict(*t)).collect();
        let valid = self.ledger.is_conflict_free(&branch);
        Ok(VotingBranchResult { branch, valid })
    }

    /// The voting branch assembled from inherited branches: the branch of the
    /// block's transaction, of transaction-referenced transactions and the
    /// voting branches of block-referenced blocks. Equal to
    /// [`VotingView::voting_branch`]; kept as an independent cross-check.
    pub fn voting_branch_inherited(&self, x: BlockId) -> Result<BTreeSet<TransactionId>, VotingError> {
        let mut memo: HashMap<BlockId, BTreeSet<TransactionId>> = HashMap::new();
        self.inherit(x, &mut memo)
    }

    fn inherit(&self, x: BlockId, memo: &mut HashMap<BlockId, BTreeSet<TransactionId>>) -> Result<BTreeSet<TransactionId>, VotingError> {
        if let Some(b) = memo.get(&x) {
            return Ok(b.clone());
        }
        let block = self.tangle.block(x).ok_or(TangleError::UnknownBlock(x))?.clone();
        let mut out = self.ledger.maximal_contained_branch(block.transaction)?;
        for r in &block.references {
            match r.label {
                RefLabel::BlockVote => out.extend(self.inherit(r.target, memo)?),
                RefLabel::TransactionVote => {
                    let t = self.tangle.block(r.target).ok_or(TangleError::UnknownBlock(r.target))?.transaction;
                    out.extend(self.ledger.maximal_contained_branch(t)?);
                }
            }
        }
        memo.insert(x, out.clone());
        Ok(out)
    }

    /// Applies the votes of a solid block. Called by [`VotingView::receive`]
    /// for every block in solidification order.
    pub fn update_supporters_on_block(&mut self, x: BlockId, now: f64) -> Result<ChangeSet, VotingError> {
        let cone = self.voting_past_cone(x)?;
        if self.tangle.block(x).map(|b| b.is_genesis()).unwrap_or(false) {
            return Ok(ChangeSet::default());
        }
        let branch: BTreeSet<TransactionId> = cone.transactions.iter().copied().filter(|t| self.ledger.is_conflict(*t)).collect();
        if !self.cone_in_ledger(&cone) || !self.ledger.is_conflict_free(&branch) {
            self.valid.insert(x, false);
            return Err(VotingError::InvalidVotingBranch(x));
        }
        self.valid.insert(x, true);
        let j = self.tangle.block(x).expect("solid").issuer;
        let mut changes = ChangeSet::default();
        let mut touched: BTreeSet<TransactionId> = BTreeSet::new();
        for &t in &cone.transactions {
            self.last_vote_time.insert((j, t), now);
            if self.tx_supporters.entry(t).or_default().insert(j) {
                changes.added.push((t, j));
                touched.insert(t);
            }
        }
        let mut opposed: BTreeSet<TransactionId> = BTreeSet::new();
        for &c in &branch {
            for d in self.ledger.direct_partners(c) {
                opposed.extend(self.ledger.future_cone(d)?);
            }
        }
        for t in opposed {
            if let Some(s) = self.tx_supporters.get_mut(&t) {
                if s.remove(&j) {
                    changes.revoked.push((t, j));
                    touched.insert(t);
                }
            }
        }
        for t in touched {
            let aw = self.aw_of(t);
            let hw = self.aw_highwater.entry(t).or_insert(0.0);
            if aw > *hw {
                *hw = aw;
            }
            if self.ledger.is_conflict(t) {
                self.aw_log.push((now, t, aw));
            }
        }
        Ok(changes)
    }

    fn aw_of(&self, t: TransactionId) -> f64 {
        self.tx_supporters
            .get(&t)
            .map(|s| self.weights().weight_of_set(s.iter().copied()).unwrap_or(0.0))
            .unwrap_or(0.0)
    }

    pub fn supporters(&self, tx: TransactionId) -> Result<BTreeSet<NodeId>, VotingError> {
        if !self.ledger.contains(tx) {
            return Err(VotingError::UnknownTransaction(tx));
        }
        Ok(self.tx_supporters.get(&tx).cloned().unwrap_or_default())
    }

    /// Time of the latest vote of `node` covering `tx`, if any.
    pub fn last_vote_time(&self, node: NodeId, tx: TransactionId) -> Option<f64> {
        self.last_vote_time.get(&(node, tx)).copied()
    }

    pub fn approval_weight(&self, tx: TransactionId) -> Result<f64, VotingError> {
        if !self.ledger.contains(tx) {
            return Err(VotingError::UnknownTransaction(tx));
        }
        Ok(self.aw_of(tx))
    }

    /// Weight of the nodes supporting every conflict of `b`; 1 for the main branch.
    pub fn branch_approval_weight(&self, b: &BTreeSet<TransactionId>) -> Result<f64, VotingError> {
        match self.ledger.is_branch(b) {
            Ok(true) => {}
            Ok(false) | Err(LedgerError::NotAConflict(_)) => return Err(VotingError::NotABranch),
            Err(e) => return Err(e.into()),
        }
        let mut it = b.iter();
        let Some(first) = it.next() else { return Ok(1.0) };
        let mut common = self.tx_supporters.get(first).cloned().unwrap_or_default();
        for t in it {
            let s = self.tx_supporters.get(t).cloned().unwrap_or_default();
            common = common.intersection(&s).copied().collect();
        }
        Ok(self.weights().weight_of_set(common).unwrap_or(0.0))
    }

    /// Running maximum of the Approval Weight of `tx`.
    pub fn aw_highwater(&self, tx: TransactionId) -> Result<f64, VotingError> {
        if !self.ledger.contains(tx) {
            return Err(VotingError::UnknownTransaction(tx));
        }
        Ok(self.aw_highwater.get(&tx).copied().unwrap_or(0.0))
    }

    /// True iff the Approval Weight of `tx` ever reached `theta`.
    pub fn is_tx_confirmed(&self, tx: TransactionId, theta: f64) -> Result<bool, VotingError> {
        check_theta(theta)?;
        Ok(self.aw_highwater(tx)? >= theta)
    }

    /// Approval Weight restricted to the conflicts.
    pub fn conflict_weight_fn(&self) -> ConflictWeightFn {
        ConflictWeightFn::new(self.ledger.conflicts().iter().map(|&c| (c, self.aw_of(c))).collect())
    }

    /// `time,conflict,aw` rows, one per supporter change of a conflict.
    pub fn aw_log_csv(&self) -> String {
        let mut s = String::from("time,conflict,aw\n");
        for (t, c, aw) in &self.aw_log {
            s.push_str(&format!("{t},{c},{aw}\n"));
        }
        s
    }

    /// Supporters recomputed from the definition: node `j` supports `t` iff
    /// some valid block of `j` votes for `t` and no later valid block of `j`
    /// votes for a transaction conflicting with `t`.
    pub fn supporters_from_scratch(&self) -> BTreeMap<TransactionId, BTreeSet<NodeId>> {
        let blocks: Vec<(usize, NodeId, BTreeSet<TransactionId>)> = self
            .tangle
            .solid_order()
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| {
                let block = self.tangle.block(b)?;
                if block.is_genesis() {
                    return None;
                }
                let cone = self.voting_past_cone(b).ok()?.transactions;
                let known = cone.iter().all(|t| self.ledger.contains(*t));
                let conflicts: Vec<TransactionId> = cone.iter().copied().filter(|t| self.ledger.is_conflict(*t)).collect();
                let free = conflicts
                    .iter()
                    .all(|&a| conflicts.iter().all(|&c| !self.ledger.conflicting(a, c).unwrap_or(true)));
                (known && free).then_some((i, block.issuer, cone))
            })
            .collect();
        let mut out = BTreeMap::new();
        for &t in self.ledger.transactions() {
            let mut last_add: HashMap<NodeId, usize> = HashMap::new();
            let mut last_remove: HashMap<NodeId, usize> = HashMap::new();
            for (i, j, cone) in &blocks {
                if cone.contains(&t) {
                    last_add.insert(*j, *i);
                }
                if cone.iter().any(|&s| self.ledger.conflicting(s, t).unwrap_or(false)) {
                    last_remove.insert(*j, *i);
                }
            }
            let set: BTreeSet<NodeId> = last_add
                .into_iter()
                .filter(|(j, a)| last_remove.get(j).map(|r| a > r).unwrap_or(true))
                .map(|(j, _)| j)
                .collect();
            out.insert(t, set);
        }
        out
    }

    /// Incrementally maintained supporters of every known transaction.
    pub fn all_supporters(&self) -> BTreeMap<TransactionId, BTreeSet<NodeId>> {
        self.ledger
            .transactions()
            .iter()
            .map(|&t| (t, self.tx_supporters.get(&t).cloned().unwrap_or_default()))
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tangle_core::Reference;
    use crate::toy::{Toy, ToyBlock, ToyTx};
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= EPS
    }

    #[test]
    fn worked_example_cones() {
        let toy = Toy::build();
        let v = &toy.view;
        let w = toy.block(ToyBlock::W);
        let branch = v.voting_branch(w).unwrap();
        assert!(branch.valid);
        assert_eq!(branch.branch, BTreeSet::from([toy.tx(ToyTx::X), toy.tx(ToyTx::W)]));
        let cone = v.voting_past_cone(w).unwrap();
        assert!(!cone.blocks.contains(&toy.block(ToyBlock::Z)));
        assert!(!cone.blocks.contains(&toy.block(ToyBlock::Y)));
        assert!(!cone.transactions.contains(&toy.tx(ToyTx::Y)));
        assert!(cone.transactions.contains(&toy.tx(ToyTx::Z)));
        for b in ToyBlock::ALL {
            let id = toy.block(b);
            assert_eq!(v.voting_branch(id).unwrap().branch, v.voting_branch_inherited(id).unwrap());
        }
        let x = toy.block(ToyBlock::X);
        let cone = v.voting_past_cone(x).unwrap();
        assert_eq!(cone.blocks, BTreeSet::from([x, toy.block(ToyBlock::Rho)]));
        assert_eq!(cone.transactions, BTreeSet::from([toy.tx(ToyTx::X), toy.tx(ToyTx::Rho)]));
    }

    #[test]
    fn worked_example_approval_weights() {
        let toy = Toy::build();
        let v = &toy.view;
        for (t, want) in Toy::AW_TABLE {
            assert!(close(v.approval_weight(toy.tx(t)).unwrap(), want), "{t:?}");
        }
        let theta = 2.0 / 3.0;
        for (t, want) in [(ToyTx::X, true), (ToyTx::Z, true), (ToyTx::Y, false), (ToyTx::U, false), (ToyTx::W, false), (ToyTx::V, false)] {
            assert_eq!(v.is_tx_confirmed(toy.tx(t), theta).unwrap(), want, "{t:?}");
        }
        assert!(close(v.branch_approval_weight(&BTreeSet::new()).unwrap(), 1.0));
        let xw = BTreeSet::from([toy.tx(ToyTx::X), toy.tx(ToyTx::W)]);
        assert!(close(v.branch_approval_weight(&xw).unwrap(), 0.4));
        assert!(close(v.branch_approval_weight(&BTreeSet::from([toy.tx(ToyTx::X)])).unwrap(), 0.7));
        assert_eq!(v.branch_approval_weight(&BTreeSet::from([toy.tx(ToyTx::Z)])), Err(VotingError::NotABranch));
        let cw = v.conflict_weight_fn();
        assert_eq!(cw.values().len(), 4);
        assert!(close(cw.eval(toy.tx(ToyTx::U)), 0.3));
        assert!(v.aw_log_csv().starts_with("time,conflict,aw\n"));
    }

    #[test]
    fn brown_revote_revokes() {
        let mut toy = Toy::build();
        let out = toy.brown_revote();
        let changes = out.votes[0].1.as_ref().unwrap();
        assert!(changes.revoked.contains(&(toy.tx(ToyTx::Y), Toy::BROWN)));
        let v = &toy.view;
        assert!(close(v.approval_weight(toy.tx(ToyTx::Y)).unwrap(), 0.1));
        assert!(close(v.approval_weight(toy.tx(ToyTx::X)).unwrap(), 0.9));
        // Sticky confirmation: ȳ never confirmed, x̄ remains confirmed.
        assert!(v.is_tx_confirmed(toy.tx(ToyTx::X), 2.0 / 3.0).unwrap());
        assert!(close(v.conflict_weight_fn().eval(toy.tx(ToyTx::Y)), 0.1));
    }

    #[test]
    fn repeated_vote_is_idempotent() {
        let mut toy = Toy::build();
        toy.brown_revote();
        let out = toy.brown_revote();
        let changes = out.votes[0].1.as_ref().unwrap();
        // Only the fresh transaction of the new block is added.
        assert_eq!(changes.added.len(), 1);
        assert!(changes.revoked.is_empty());
    }

    #[test]
    fn conflicting_references_are_invalid() {
        let mut toy = Toy::build();
        let (x, y) = (toy.block(ToyBlock::X), toy.block(ToyBlock::Y));
        let out = toy.issue(Toy::RED, vec![Reference::block(x), Reference::block(y)]);
        assert!(matches!(out.votes[0].1, Err(VotingError::InvalidVotingBranch(_))));
        let b = out.solidified[0];
        assert!(!toy.view.voting_branch(b).unwrap().valid);
        // Still counts for Witness Weight.
        assert!(toy.view.tangle().block_supporters(y).unwrap().contains(&Toy::RED));
        assert!(close(toy.view.approval_weight(toy.tx(ToyTx::Y)).unwrap(), 0.3));
    }

    #[test]
    fn fresh_transaction_has_issuer_weight() {
        let mut toy = Toy::build();
        let out = toy.issue(Toy::GREEN, vec![Reference::block(toy.block(ToyBlock::W)); 2]);
        let b = out.solidified[0];
        let t = toy.view.tangle().block(b).unwrap().transaction;
        assert!(close(toy.view.approval_weight(t).unwrap(), 0.4));
        assert_eq!(toy.view.approval_weight(TransactionId(u64::MAX)), Err(VotingError::UnknownTransaction(TransactionId(u64::MAX))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn incremental_supporters_match_definition(seed in any::<u64>(), n in 1usize..40) {
            let r = crate::properties::check_supporters(seed, n);
            prop_assert!(r.is_ok(), "{:?}", r);
        }
    }
}
