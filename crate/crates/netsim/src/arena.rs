//! Global, immutable-once-written block and transaction store.
//!
//! Block content is identical in every node's view, so everything that only
//! depends on content — parents, the contested transactions in the voting
//! past cone, the conflicts a vote opposes, validity — is computed once at
//! creation. Views keep only per-node state (what has arrived, tips, votes).
//!
//! Honest payload transactions each spend a fresh output and can never
//! conflict; they are represented by their id only. The ledger holds the
//! genesis and the *contested* transactions minted by adversaries or the
//! dealer, which is where all conflicts live.

use otv_core::digest::IdGen;
use otv_core::reality_engine::ConflictGraph;
use otv_core::tangle_core::{BlockId, RefLabel, Reference};
use otv_core::utxo_ledger::{LedgerState, Output, OutputId, Owner, Transaction, TransactionId};
use otv_core::NodeId;
use std::collections::{BTreeSet, HashMap};

/// Outputs of the genesis transaction available for contested spends.
pub const GENESIS_OUTPUTS: u16 = 4096;

pub type BlockIx = u32;
/// Index into the contested-transaction table.
pub type TxIx = u32;

#[derive(Debug, Clone)]
pub struct BlockRec {
    pub issuer: NodeId,
    pub issue_time: f64,
    pub refs: Vec<(BlockIx, RefLabel)>,
    /// Distinct parents, both labels.
    pub parents: Vec<BlockIx>,
    pub tx: TransactionId,
    pub contested: Option<TxIx>,
    /// Contested transactions in the voting past cone (sorted).
    pub cone: Vec<TxIx>,
    /// Contested transactions this block votes against (sorted).
    pub against: Vec<TxIx>,
    /// Voting past cone is conflict-free.
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct ContestedTx {
    pub id: TransactionId,
    pub carrier: BlockIx,
    pub created: f64,
    pub spends: OutputId,
    /// Contested ledger past cone including itself (sorted).
    pub past: Vec<TxIx>,
}

#[derive(Debug)]
pub struct Arena {
    pub blocks: Vec<BlockRec>,
    pub children: Vec<Vec<BlockIx>>,
    pub ledger: LedgerState,
    pub contested: Vec<ContestedTx>,
    index: HashMap<TransactionId, TxIx>,
    pub graph: ConflictGraph,
    /// Graph index per contested transaction (None while not a conflict).
    pub graph_of: Vec<Option<usize>>,
    /// Contested index per graph node.
    pub contested_of: Vec<TxIx>,
    /// Direct double-spend partners.
    pub partners: Vec<Vec<TxIx>>,
    /// Union of the ledger future cones of the direct partners.
    pub opposed: Vec<Vec<TxIx>>,
    ids: IdGen,
    next_output: u16,
}

fn merge_into(dst: &mut Vec<TxIx>, src: &[TxIx]) {
    if src.is_empty() {
        return;
    }
    dst.extend_from_slice(src);
    dst.sort_unstable();
    dst.dedup();
}

impl Arena {
    /// Creates the store with the genesis block (index 0) issued by `genesis_issuer`.
    pub fn new(genesis_issuer: NodeId, salt: u64) -> Self {
        let mut ids = IdGen::new(salt);
        let genesis_tx = Transaction {
            id: TransactionId(ids.next_digest()),
            inputs: vec![],
            outputs: (0..GENESIS_OUTPUTS).map(|_| Output { value: 1, owner: Owner::User(0) }).collect(),
            issue_time: 0.0,
        };
        let gid = genesis_tx.id;
        let genesis = BlockRec {
            issuer: genesis_issuer,
            issue_time: 0.0,
            refs: vec![],
            parents: vec![],
            tx: gid,
            contested: None,
            cone: vec![],
            against: vec![],
            valid: true,
        };
        Self {
            blocks: vec![genesis],
            children: vec![vec![]],
            ledger: LedgerState::new(genesis_tx),
            contested: vec![],
            index: HashMap::new(),
            graph: ConflictGraph::default(),
            graph_of: vec![],
            contested_of: vec![],
            partners: vec![],
            opposed: vec![],
            ids,
            next_output: 0,
        }
    }

    pub const GENESIS: BlockIx = 0;

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, b: BlockIx) -> &BlockRec {
        &self.blocks[b as usize]
    }

    pub fn block_id(b: BlockIx) -> BlockId {
        BlockId(b as u64)
    }

    pub fn ix(b: BlockId) -> BlockIx {
        b.0 as BlockIx
    }

    pub fn tx_index(&self, id: TransactionId) -> Option<TxIx> {
        self.index.get(&id).copied()
    }

    pub fn is_conflict(&self, t: TxIx) -> bool {
        self.graph_of[t as usize].is_some()
    }

    /// Reserves a fresh genesis output for a family of contested spends.
    pub fn fresh_output(&mut self) -> OutputId {
        assert!(self.next_output < GENESIS_OUTPUTS, "genesis outputs exhausted");
        let o = OutputId { tx: self.ledger.genesis(), index: self.next_output };
        self.next_output += 1;
        o
    }

    /// Creates a block. `spend` makes its transaction a contested spend of
    /// the given output; otherwise it carries a fresh payload transaction.
    pub fn add_block(&mut self, issuer: NodeId, time: f64, refs: &[Reference], spend: Option<(OutputId, Owner)>) -> BlockIx {
        let b = self.blocks.len() as BlockIx;
        let refs: Vec<(BlockIx, RefLabel)> = refs.iter().map(|r| (Self::ix(r.target), r.label)).collect();
        let mut parents: Vec<BlockIx> = refs.iter().map(|r| r.0).collect();
        parents.sort_unstable();
        parents.dedup();
        for &p in &parents {
            assert!((p as usize) < self.blocks.len(), "reference to unknown block");
            self.children[p as usize].push(b);
        }
        let id = TransactionId(self.ids.next_digest());
        let contested = spend.map(|(output, owner)| self.add_contested(id, b, time, output, owner));
        let mut cone = self.cone_of(&refs);
        if let Some(t) = contested {
            merge_into(&mut cone, &self.contested[t as usize].past.clone());
        }
        let branch: BTreeSet<TransactionId> =
            cone.iter().filter(|&&t| self.is_conflict(t)).map(|&t| self.contested[t as usize].id).collect();
        let valid = self.ledger.is_conflict_free(&branch);
        let mut against = Vec::new();
        if valid {
            for &t in &cone {
                if self.is_conflict(t) {
                    merge_into(&mut against, &self.opposed[t as usize]);
                }
            }
        }
        self.blocks.push(BlockRec { issuer, issue_time: time, refs, parents, tx: id, contested, cone, against, valid });
        self.children.push(vec![]);
        b
    }

    /// Contested transactions a block with these references would vote for
    /// (its own transaction aside).
    pub fn cone_of(&self, refs: &[(BlockIx, RefLabel)]) -> Vec<TxIx> {
        let mut cone = Vec::new();
        for &(p, label) in refs {
            let pb = &self.blocks[p as usize];
            match label {
                RefLabel::BlockVote => merge_into(&mut cone, &pb.cone),
                RefLabel::TransactionVote => {
                    if let Some(t) = pb.contested {
                        merge_into(&mut cone, &self.contested[t as usize].past);
                    }
                }
            }
        }
        cone
    }

    fn add_contested(&mut self, id: TransactionId, carrier: BlockIx, time: f64, output: OutputId, owner: Owner) -> TxIx {
        let tx = Transaction { id, inputs: vec![output], outputs: vec![Output { value: 1, owner }], issue_time: time };
        self.ledger.apply_transaction(tx).expect("contested spends are well formed");
        let t = self.contested.len() as TxIx;
        let mut past = vec![t];
        if output.tx != self.ledger.genesis() {
            let parent = self.index[&output.tx];
            merge_into(&mut past, &self.contested[parent as usize].past.clone());
        }
        self.contested.push(ContestedTx { id, carrier, created: time, spends: output, past });
        self.index.insert(id, t);
        self.rebuild_conflicts();
        t
    }

    fn rebuild_conflicts(&mut self) {
        self.graph = ConflictGraph::from_ledger(&self.ledger);
        let n = self.contested.len();
        self.graph_of = vec![None; n];
        self.contested_of = Vec::with_capacity(self.graph.len());
        for (g, node) in self.graph.nodes().iter().enumerate() {
            let t = self.index[&node.tx];
            self.graph_of[t as usize] = Some(g);
            self.contested_of.push(t);
        }
        self.partners = (0..n)
            .map(|t| {
                let mut v: Vec<TxIx> =
                    self.ledger.direct_partners(self.contested[t].id).iter().filter_map(|d| self.index.get(d).copied()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        self.opposed = (0..n)
            .map(|t| {
                let mut v = Vec::new();
                for &d in &self.partners[t] {
                    let fut = self.ledger.future_cone(self.contested[d as usize].id).expect("partner is in the ledger");
                    v.extend(fut.iter().filter_map(|f| self.index.get(f).copied()));
                }
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
    }

    /// Connected components of the Conflict Graph, as contested indices.
    pub fn conflict_sets(&self) -> Vec<Vec<TxIx>> {
        let n = self.graph.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                comp.push(self.contested_of[v]);
                for &w in &self.graph.nodes()[v].neighbours {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort();
        out
    }

    pub fn are_conflicting(&self, a: TxIx, b: TxIx) -> bool {
        match (self.graph_of[a as usize], self.graph_of[b as usize]) {
            (Some(x), Some(y)) => self.graph.are_adjacent(x, y),
            _ => false,
        }
    }

    /// Blocks in the future cone of `b`, including `b`.
    pub fn future_cone(&self, b: BlockIx) -> Vec<BlockIx> {
        let mut seen = vec![false; self.blocks.len()];
        let mut out = vec![b];
        seen[b as usize] = true;
        let mut i = 0;
        while i < out.len() {
            let v = out[i];
            for &c in &self.children[v as usize] {
                if !seen[c as usize] {
                    seen[c as usize] = true;
                    out.push(c);
                }
            }
            i += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(targets: &[(BlockIx, RefLabel)]) -> Vec<Reference> {
        targets.iter().map(|&(t, l)| Reference { target: Arena::block_id(t), label: l }).collect()
    }

    #[test]
    fn cones_follow_reference_labels() {
        let mut a = Arena::new(NodeId(0), 1);
        let g = Arena::GENESIS;
        let o = a.fresh_output();
        let owner = Owner::Node(NodeId(9));
        let x = a.add_block(NodeId(9), 1.0, &refs(&[(g, RefLabel::BlockVote), (g, RefLabel::BlockVote)]), Some((o, owner)));
        assert!(!a.is_conflict(0));
        let y = a.add_block(NodeId(9), 1.1, &refs(&[(g, RefLabel::BlockVote), (g, RefLabel::BlockVote)]), Some((o, owner)));
        assert!(a.is_conflict(0) && a.is_conflict(1));
        assert_eq!(a.partners[0], vec![1]);
        assert_eq!(a.opposed[1], vec![0]);
        // Block-ref to x votes x̄ and, being created after ȳ exists, opposes ȳ.
        let h = a.add_block(NodeId(1), 2.0, &refs(&[(x, RefLabel::BlockVote), (g, RefLabel::BlockVote)]), None);
        assert_eq!(a.block(h).cone, vec![0]);
        assert_eq!(a.block(h).against, vec![1]);
        assert!(a.block(h).valid);
        // Tx-ref to y adds only y's ledger past.
        let h2 = a.add_block(NodeId(2), 2.0, &refs(&[(h, RefLabel::TransactionVote), (y, RefLabel::TransactionVote)]), None);
        assert_eq!(a.block(h2).cone, vec![1]);
        // Block-refs to both sides make an invalid vote.
        let bad = a.add_block(NodeId(3), 2.0, &refs(&[(h, RefLabel::BlockVote), (y, RefLabel::BlockVote)]), None);
        assert!(!a.block(bad).valid);
        assert!(a.block(bad).against.is_empty());
        assert_eq!(a.conflict_sets(), vec![vec![0, 1]]);
        assert_eq!(a.future_cone(x), vec![x, h, h2, bad]);
    }
}
