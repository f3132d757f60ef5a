//! Blocks and local Tangle views.
//!
//! A [`TangleView`] is one node's perception of the Tangle: blocks are
//! received in arbitrary order, parked until their whole past cone is
//! present (solidification), and only solid blocks take part in tips, cones
//! and Witness Weight.

use crate::identity_weights::{NodeId, WeightTable};
use crate::utxo_ledger::TransactionId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Default maximal number of references per block.
pub const DEFAULT_MAX_REFS: usize = 8;

/// Opaque 64-bit content identifier of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{:016x}", self.0)
    }
}

/// Reference label: a block reference votes for the whole voting past cone of
/// the target, a transaction reference only for the target's transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefLabel {
    BlockVote,
    TransactionVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub target: BlockId,
    pub label: RefLabel,
}

impl Reference {
    pub fn block(target: BlockId) -> Self {
        Self { target, label: RefLabel::BlockVote }
    }

    pub fn tx(target: BlockId) -> Self {
        Self { target, label: RefLabel::TransactionVote }
    }
}

/// A Tangle vertex carrying exactly one transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    /// Empty for the genesis, otherwise 2..=k entries (duplicates allowed).
    pub references: Vec<Reference>,
    pub transaction: TransactionId,
    pub issuer: NodeId,
    pub issue_time: f64,
}

impl Block {
    pub fn is_genesis(&self) -> bool {
        self.references.is_empty()
    }

    /// Distinct parents in first-occurrence order.
    pub fn parents(&self) -> Vec<BlockId> {
        let mut out: Vec<BlockId> = Vec::with_capacity(self.references.len());
        for r in &self.references {
            if !out.contains(&r.target) {
                out.push(r.target);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolidificationOutcome {
    /// Blocks that became solid, in topological order.
    pub solidified: Vec<BlockId>,
    /// Parents never seen by this view; to be requested from peers.
    pub missing: Vec<BlockId>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TangleError {
    #[error("block {0} already received")]
    DuplicateBlock(BlockId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {0} is not solid")]
    NotSolid(BlockId),
    #[error("block {id} has {count} references, at least 2 required")]
    TooFewReferences { id: BlockId, count: usize },
    #[error("block {id} has {count} references, at most {max} allowed")]
    TooManyReferences { id: BlockId, count: usize, max: usize },
    #[error("confirmation threshold {0} outside (0.5, 1]")]
    ThetaOutOfRange(f64),
}

/// Validates a confirmation threshold.
pub fn check_theta(theta: f64) -> Result<(), TangleError> {
    if theta > 0.5 && theta <= 1.0 {
        Ok(())
    } else {
        Err(TangleError::ThetaOutOfRange(theta))
    }
}

/// One node's local Tangle.
#[derive(Debug, Clone)]
pub struct TangleView {
    owner: NodeId,
    genesis: BlockId,
    max_refs: usize,
    weights: Arc<WeightTable>,
    blocks: HashMap<BlockId, Block>,
    children: HashMap<BlockId, Vec<BlockId>>,
    solid: HashSet<BlockId>,
    solid_order: Vec<BlockId>,
    solid_time: HashMap<BlockId, f64>,
    pending: HashMap<BlockId, BTreeSet<BlockId>>,
    waiting: HashMap<BlockId, Vec<BlockId>>,
    tips: BTreeSet<BlockId>,
    supporters: HashMap<BlockId, BTreeSet<NodeId>>,
    ww_highwater: HashMap<BlockId, f64>,
}

impl TangleView {
    /// Creates a view containing only the (solid) genesis.
    pub fn new(owner: NodeId, genesis: Block, weights: Arc<WeightTable>, max_refs: usize) -> Self {
        let gid = genesis.id;
        let mut v = Self {
            owner,
            genesis: gid,
            max_refs,
            weights,
            blocks: HashMap::new(),
            children: HashMap::new(),
            solid: HashSet::new(),
            solid_order: Vec::new(),
            solid_time: HashMap::new(),
            pending: HashMap::new(),
            waiting: HashMap::new(),
            tips: BTreeSet::new(),
            supporters: HashMap::new(),
            ww_highwater: HashMap::new(),
        };
        v.blocks.insert(gid, genesis);
        v.mark_solid(gid, 0.0);
        v
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn genesis(&self) -> BlockId {
        self.genesis
    }

    pub fn max_refs(&self) -> usize {
        self.max_refs
    }

    pub fn weights(&self) -> &Arc<WeightTable> {
        &self.weights
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn is_solid(&self, id: BlockId) -> bool {
        self.solid.contains(&id)
    }

    pub fn solid_time(&self, id: BlockId) -> Option<f64> {
        self.solid_time.get(&id).copied()
    }

    /// Solid blocks in the order they became solid.
    pub fn solid_order(&self) -> &[BlockId] {
        &self.solid_order
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Adds a block. Solidifies it (and any parked descendants) when its
    /// whole past is present; otherwise parks it and reports unknown parents.
    pub fn receive_block(&mut self, block: Block, now: f64) -> Result<SolidificationOutcome, TangleError> {
        let id = block.id;
        if self.blocks.contains_key(&id) {
            return Err(TangleError::DuplicateBlock(id));
        }
        let count = block.references.len();
        if count < 2 {
            return Err(TangleError::TooFewReferences { id, count });
        }
        if count > self.max_refs {
            return Err(TangleError::TooManyReferences { id, count, max: self.max_refs });
        }
        let parents = block.parents();
        self.blocks.insert(id, block);

        let mut outcome = SolidificationOutcome::default();
        let unsolid: BTreeSet<BlockId> = parents.iter().copied().filter(|p| !self.solid.contains(p)).collect();
        for &p in &parents {
            if !self.blocks.contains_key(&p) {
                outcome.missing.push(p);
            }
        }
        if unsolid.is_empty() {
            self.cascade(id, now, &mut outcome.solidified);
        } else {
            for &p in &parents {
                if unsolid.contains(&p) {
                    self.waiting.entry(p).or_default().push(id);
                }
            }
            self.pending.insert(id, unsolid);
        }
        Ok(outcome)
    }

    fn cascade(&mut self, root: BlockId, now: f64, out: &mut Vec<BlockId>) {
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            self.mark_solid(b, now);
            out.push(b);
            for w in self.waiting.remove(&b).unwrap_or_default() {
                let done = match self.pending.get_mut(&w) {
                    Some(missing) => {
                        missing.remove(&b);
                        missing.is_empty()
                    }
                    None => false,
                };
                if done {
                    self.pending.remove(&w);
                    queue.push_back(w);
                }
            }
        }
    }

    fn mark_solid(&mut self, id: BlockId, now: f64) {
        self.solid.insert(id);
        self.solid_order.push(id);
        self.solid_time.insert(id, now);
        let block = &self.blocks[&id];
        let parents = block.parents();
        let issuer = block.issuer;
        let genesis = block.is_genesis();
        for p in &parents {
            self.children.entry(*p).or_default().push(id);
            self.tips.remove(p);
        }
        self.tips.insert(id);
        self.supporters.entry(id).or_default();
        if !genesis {
            self.add_supporter(id, issuer);
        }
        self.ww_highwater.entry(id).or_insert(0.0);
    }

    /// Adds `node` to the supporters of `from` and its past cone. Stops at
    /// blocks already supported by `node`: by monotonicity their past is too.
    fn add_supporter(&mut self, from: BlockId, node: NodeId) {
        let mut stack = vec![from];
        while let Some(b) = stack.pop() {
            let set = self.supporters.entry(b).or_default();
            if !set.insert(node) {
                continue;
            }
            let ww = self.weights.weight_of_set(set.iter().copied()).unwrap_or(0.0);
            let hw = self.ww_highwater.entry(b).or_insert(0.0);
            if ww > *hw {
                *hw = ww;
            }
            stack.extend(self.blocks[&b].parents());
        }
    }

    fn require_solid(&self, x: BlockId) -> Result<(), TangleError> {
        if self.solid.contains(&x) {
            Ok(())
        } else if self.blocks.contains_key(&x) {
            Err(TangleError::NotSolid(x))
        } else {
            Err(TangleError::UnknownBlock(x))
        }
    }

    /// Solid blocks without solid children.
    pub fn tips(&self) -> BTreeSet<BlockId> {
        self.tips.clone()
    }

    /// Reflexive-transitive closure along references.
    pub fn past_cone(&self, x: BlockId) -> Result<BTreeSet<BlockId>, TangleError> {
        self.require_solid(x)?;
        let mut seen = BTreeSet::from([x]);
        let mut stack = vec![x];
        while let Some(b) = stack.pop() {
            for p in self.blocks[&b].parents() {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        Ok(seen)
    }

    /// Reflexive-transitive closure along (solid) children.
    pub fn future_cone(&self, x: BlockId) -> Result<BTreeSet<BlockId>, TangleError> {
        self.require_solid(x)?;
        let mut seen = BTreeSet::from([x]);
        let mut stack = vec![x];
        while let Some(b) = stack.pop() {
            if let Some(ch) = self.children.get(&b) {
                for &c in ch {
                    if seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
        }
        Ok(seen)
    }

    /// Issuers of blocks in the future cone of `x`.
    pub fn block_supporters(&self, x: BlockId) -> Result<BTreeSet<NodeId>, TangleError> {
        self.require_solid(x)?;
        Ok(self.supporters.get(&x).cloned().unwrap_or_default())
    }

    /// Issuers recomputed from the future cone; used to cross-check the
    /// incremental supporter sets.
    pub fn block_supporters_from_cone(&self, x: BlockId) -> Result<BTreeSet<NodeId>, TangleError> {
        Ok(self
            .future_cone(x)?
            .into_iter()
            .filter_map(|b| self.blocks.get(&b))
            .filter(|b| !b.is_genesis())
            .map(|b| b.issuer)
            .collect())
    }

    pub fn witness_weight(&self, x: BlockId) -> Result<f64, TangleError> {
        let s = self.block_supporters(x)?;
        Ok(self.weights.weight_of_set(s).unwrap_or(0.0))
    }

    /// Running maximum of the Witness Weight of `x` in this view.
    pub fn ww_highwater(&self, x: BlockId) -> Result<f64, TangleError> {
        self.require_solid(x)?;
        Ok(self.ww_highwater.get(&x).copied().unwrap_or(0.0))
    }

    /// True iff the Witness Weight of `x` ever reached `theta`.
    pub fn is_block_confirmed(&self, x: BlockId, theta: f64) -> Result<bool, TangleError> {
        check_theta(theta)?;
        Ok(self.ww_highwater(x)? >= theta)
    }

    /// JSONL snapshot of the solid blocks in solidification order.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for id in &self.solid_order {
            let b = &self.blocks[id];
            let line = serde_json::json!({
                "id": b.id,
                "issuer": b.issuer,
                "issue_time": b.issue_time,
                "refs": b.references.iter().map(|r| serde_json::json!({"target": r.target, "label": r.label})).collect::<Vec<_>>(),
                "tx": b.transaction,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::IdGen;
    use proptest::prelude::*;

    struct Builder {
        ids: IdGen,
        blocks: Vec<Block>,
    }

    impl Builder {
        fn new() -> Self {
            let mut ids = IdGen::new(1);
            let g = Block {
                id: BlockId(ids.next_digest()),
                references: vec![],
                transaction: TransactionId(0),
                issuer: NodeId(0),
                issue_time: 0.0,
            };
            Self { ids, blocks: vec![g] }
        }

        fn add(&mut self, issuer: u32, parents: &[usize]) -> usize {
            let mut refs: Vec<Reference> = parents.iter().map(|&p| Reference::block(self.blocks[p].id)).collect();
            if refs.len() == 1 {
                refs.push(refs[0]);
            }
            let b = Block {
                id: BlockId(self.ids.next_digest()),
                references: refs,
                transaction: TransactionId(self.blocks.len() as u64),
                issuer: NodeId(issuer),
                issue_time: self.blocks.len() as f64,
            };
            self.blocks.push(b);
            self.blocks.len() - 1
        }

        fn view(&self, n: usize) -> TangleView {
            TangleView::new(NodeId(0), self.blocks[0].clone(), Arc::new(WeightTable::uniform(n).unwrap()), 8)
        }
    }

    #[test]
    fn genesis_child_solidifies() {
        let mut t = Builder::new();
        let c = t.add(3, &[0]);
        let mut v = t.view(4);
        assert_eq!(v.tips(), BTreeSet::from([t.blocks[0].id]));
        let out = v.receive_block(t.blocks[c].clone(), 1.0).unwrap();
        assert_eq!(out.solidified, vec![t.blocks[c].id]);
        assert!(out.missing.is_empty());
        assert_eq!(v.block_supporters(t.blocks[c].id).unwrap(), BTreeSet::from([NodeId(3)]));
        assert_eq!(v.witness_weight(t.blocks[c].id).unwrap(), 0.25);
        assert_eq!(v.past_cone(t.blocks[0].id).unwrap(), BTreeSet::from([t.blocks[0].id]));
    }

    #[test]
    fn out_of_order_delivery_parks_then_cascades() {
        let mut t = Builder::new();
        let a = t.add(1, &[0]);
        let b = t.add(2, &[a]);
        let mut v = t.view(4);
        let out = v.receive_block(t.blocks[b].clone(), 1.0).unwrap();
        assert!(out.solidified.is_empty());
        assert_eq!(out.missing, vec![t.blocks[a].id]);
        let out = v.receive_block(t.blocks[a].clone(), 2.0).unwrap();
        assert_eq!(out.solidified, vec![t.blocks[a].id, t.blocks[b].id]);
        assert_eq!(v.tips(), BTreeSet::from([t.blocks[b].id]));
        assert_eq!(
            v.receive_block(t.blocks[a].clone(), 3.0),
            Err(TangleError::DuplicateBlock(t.blocks[a].id))
        );
    }

    #[test]
    fn reference_count_is_validated() {
        let t = Builder::new();
        let mut v = t.view(2);
        let lone = Block {
            id: BlockId(99),
            references: vec![Reference::block(t.blocks[0].id)],
            transaction: TransactionId(9),
            issuer: NodeId(1),
            issue_time: 1.0,
        };
        assert!(matches!(v.receive_block(lone, 1.0), Err(TangleError::TooFewReferences { .. })));
        let wide = Block {
            id: BlockId(100),
            references: vec![Reference::block(t.blocks[0].id); 9],
            transaction: TransactionId(10),
            issuer: NodeId(1),
            issue_time: 1.0,
        };
        assert!(matches!(v.receive_block(wide, 1.0), Err(TangleError::TooManyReferences { .. })));
    }

    #[test]
    fn confirmation_threshold_checks() {
        let mut t = Builder::new();
        let a = t.add(0, &[0]);
        let b = t.add(1, &[a]);
        let mut v = t.view(2);
        v.receive_block(t.blocks[a].clone(), 1.0).unwrap();
        assert!(!v.is_block_confirmed(t.blocks[a].id, 1.0).unwrap());
        v.receive_block(t.blocks[b].clone(), 2.0).unwrap();
        assert!(v.is_block_confirmed(t.blocks[a].id, 1.0).unwrap());
        assert!(!v.is_block_confirmed(t.blocks[b].id, 1.0).unwrap());
        assert_eq!(v.is_block_confirmed(t.blocks[a].id, 0.5), Err(TangleError::ThetaOutOfRange(0.5)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// Monotonicity, growth, closure and order independence on random Tangles.
        #[test]
        fn witness_weight_lemmas(seed in any::<u64>(), n in 1usize..40, perm_seed in any::<u64>()) {
            let r = crate::properties::check_ww_lemmas(seed, n, perm_seed);
            prop_assert!(r.is_ok(), "{:?}", r);
        }
    }
}
