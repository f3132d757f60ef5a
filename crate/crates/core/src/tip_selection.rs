//! Uniform random tip selection restricted to a reality (R-URTS).
//!
//! A tip whose whole voting branch lies in the preferred reality is approved
//! with a block reference. Otherwise, if the branch of its transaction lies in
//! the reality, only the transaction is approved. Tips satisfying neither are
//! discarded and another tip is drawn.

use crate::tangle_core::{BlockId, RefLabel, Reference};
use crate::utxo_ledger::TransactionId;
use crate::voting::VotingView;
use rand::Rng;
use std::collections::BTreeSet;
use thiserror::Error;

/// Draw budget per requested reference.
pub const DRAWS_PER_REFERENCE: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TipError {
    #[error("k must be at least 2, got {0}")]
    TooFewParents(usize),
    #[error("no eligible tip after {draws} draws")]
    NoEligibleTip { draws: usize },
}

/// What tip selection needs to know about a node's state.
pub trait TipContext {
    /// Current tips in a deterministic order.
    fn tips(&self) -> Vec<BlockId>;
    /// Conflicts in the voting past cone of a block.
    fn voting_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId>;
    /// Conflicts in the Ledger past cone of a block's transaction.
    fn tx_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId>;
    fn is_conflict_free(&self, s: &BTreeSet<TransactionId>) -> bool;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TipChoice {
    pub block_refs: BTreeSet<BlockId>,
    pub tx_refs: BTreeSet<BlockId>,
    /// Total draws, including discarded ones.
    pub draws: usize,
    /// Successful draws (counted towards k, duplicates included).
    pub successes: usize,
}

impl TipChoice {
    /// References for a new block; a single parent is referenced twice so
    /// the block carries the minimum of two references.
    pub fn references(&self) -> Vec<Reference> {
        let mut refs: Vec<Reference> = self.block_refs.iter().map(|&b| Reference::block(b)).collect();
        refs.extend(self.tx_refs.iter().map(|&b| Reference::tx(b)));
        if refs.len() == 1 {
            refs.push(refs[0]);
        }
        refs
    }

    pub fn is_empty(&self) -> bool {
        self.block_refs.is_empty() && self.tx_refs.is_empty()
    }
}

/// Label a block would receive against `reality`, if any.
pub fn classify<C: TipContext + ?Sized>(ctx: &C, reality: &BTreeSet<TransactionId>, tip: BlockId) -> Option<(Reference, BTreeSet<TransactionId>)> {
    let vb = ctx.voting_branch_of(tip);
    if vb.is_subset(reality) && ctx.is_conflict_free(&vb) {
        return Some((Reference::block(tip), vb));
    }
    let tb = ctx.tx_branch_of(tip);
    if tb.is_subset(reality) {
        return Some((Reference::tx(tip), tb));
    }
    None
}

/// Draws `k` times (with replacement) among eligible tips.
pub fn r_urts<C: TipContext + ?Sized, R: Rng + ?Sized>(
    ctx: &C,
    reality: &BTreeSet<TransactionId>,
    k: usize,
    rng: &mut R,
) -> Result<TipChoice, TipError> {
    if k < 2 {
        return Err(TipError::TooFewParents(k));
    }
    let tips = ctx.tips();
    let budget = DRAWS_PER_REFERENCE * k;
    let mut choice = TipChoice::default();
    let mut combined: BTreeSet<TransactionId> = BTreeSet::new();
    while choice.successes < k && choice.draws < budget && !tips.is_empty() {
        choice.draws += 1;
        let tip = tips[rng.random_range(0..tips.len())];
        let Some((reference, branch)) = classify(ctx, reality, tip) else { continue };
        let mut next = combined.clone();
        next.extend(branch);
        if !ctx.is_conflict_free(&next) {
            continue;
        }
        combined = next;
        choice.successes += 1;
        match reference.label {
            RefLabel::BlockVote => choice.block_refs.insert(tip),
            RefLabel::TransactionVote => choice.tx_refs.insert(tip),
        };
    }
    if choice.is_empty() {
        return Err(TipError::NoEligibleTip { draws: choice.draws });
    }
    Ok(choice)
}

/// Fallback when no tip is eligible: approve the given block (typically the
/// issuer's own last block) with the label the selection rule gives it, or
/// the genesis if even that is not eligible.
pub fn fallback_choice<C: TipContext + ?Sized>(
    ctx: &C,
    reality: &BTreeSet<TransactionId>,
    own_last: Option<BlockId>,
    genesis: BlockId,
) -> TipChoice {
    let mut choice = TipChoice::default();
    match own_last.and_then(|b| classify(ctx, reality, b)) {
        Some((r, _)) if r.label == RefLabel::BlockVote => {
            choice.block_refs.insert(r.target);
        }
        Some((r, _)) => {
            choice.tx_refs.insert(r.target);
        }
        None => {
            choice.block_refs.insert(genesis);
        }
    }
    choice
}

impl TipContext for VotingView {
    fn tips(&self) -> Vec<BlockId> {
        self.tangle().tips().into_iter().collect()
    }

    fn voting_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId> {
        match self.voting_branch(b) {
            Ok(r) => r.branch,
            Err(_) => BTreeSet::new(),
        }
    }

    fn tx_branch_of(&self, b: BlockId) -> BTreeSet<TransactionId> {
        self.tangle()
            .block(b)
            .and_then(|blk| self.ledger().maximal_contained_branch(blk.transaction).ok())
            .unwrap_or_default()
    }

    fn is_conflict_free(&self, s: &BTreeSet<TransactionId>) -> bool {
        self.ledger().is_conflict_free(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{Toy, ToyBlock, ToyTx};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Synthetic context: every tip is eligible with an empty branch.
    struct Flat(Vec<BlockId>);

    impl TipContext for Flat {
        fn tips(&self) -> Vec<BlockId> {
            self.0.clone()
        }
        fn voting_branch_of(&self, _: BlockId) -> BTreeSet<TransactionId> {
            BTreeSet::new()
        }
        fn tx_branch_of(&self, _: BlockId) -> BTreeSet<TransactionId> {
            BTreeSet::new()
        }
        fn is_conflict_free(&self, _: &BTreeSet<TransactionId>) -> bool {
            true
        }
    }

    #[test]
    fn green_node_before_w() {
        // Tips are x and z; the preferred reality is {x̄}.
        let toy = Toy::build_prefix(3);
        let (x, z) = (toy.block(ToyBlock::X), toy.block(ToyBlock::Z));
        let mut want = vec![x, z];
        want.sort();
        assert_eq!(TipContext::tips(&toy.view), want);
        let r = BTreeSet::from([toy.tx(ToyTx::X)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let choice = r_urts(&toy.view, &r, 8, &mut rng).unwrap();
        assert_eq!(choice.block_refs, BTreeSet::from([x]));
        assert_eq!(choice.tx_refs, BTreeSet::from([z]));
        assert_eq!(choice.successes, 8);
    }

    #[test]
    fn worked_example_final_tips() {
        // Tips v, w, u against {x̄, w̄}: w fits entirely, only v̄ fits of v,
        // and u carries ū, which conflicts with w̄.
        let toy = Toy::build();
        let r = toy.reality();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let choice = r_urts(&toy.view, &r, 8, &mut rng).unwrap();
        assert_eq!(choice.block_refs, BTreeSet::from([toy.block(ToyBlock::W)]));
        assert_eq!(choice.tx_refs, BTreeSet::from([toy.block(ToyBlock::V)]));
        assert!(choice.draws > choice.successes);
    }

    #[test]
    fn no_eligible_tip_falls_back() {
        // Tips x and z against reality {ȳ}: neither x nor x̄ fits, z does.
        let toy = Toy::build_prefix(3);
        let r = BTreeSet::from([toy.tx(ToyTx::Y)]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let choice = r_urts(&toy.view, &r, 2, &mut rng).unwrap();
        assert_eq!(choice.block_refs, BTreeSet::from([toy.block(ToyBlock::Z)]));
        // Tips x and y against the empty reality: both carry a conflict in
        // their own transaction, so nothing is eligible.
        let xy = Toy::build_prefix(2);
        let empty = BTreeSet::new();
        let err = r_urts(&xy.view, &empty, 2, &mut rng).unwrap_err();
        assert_eq!(err, TipError::NoEligibleTip { draws: 2 * DRAWS_PER_REFERENCE });
        let fb = fallback_choice(&xy.view, &empty, Some(toy.block(ToyBlock::X)), toy.block(ToyBlock::Rho));
        assert_eq!(fb.block_refs, BTreeSet::from([toy.block(ToyBlock::Rho)]));
        assert_eq!(fb.references().len(), 2);
    }

    #[test]
    fn rejects_small_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(r_urts(&Flat(vec![BlockId(1)]), &BTreeSet::new(), 1, &mut rng), Err(TipError::TooFewParents(1)));
    }

    #[test]
    fn draws_are_uniform() {
        let tips: Vec<BlockId> = (0..10).map(BlockId).collect();
        let ctx = Flat(tips.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts: HashMap<BlockId, usize> = HashMap::new();
        let rounds = 5_000;
        for _ in 0..rounds {
            // k = 2 draws per round: 10,000 draws in total.
            let c = r_urts(&ctx, &BTreeSet::new(), 2, &mut rng).unwrap();
            assert_eq!(c.draws, 2);
            for b in c.block_refs {
                *counts.entry(b).or_default() += 1;
            }
        }
        // Presence per round: P = 1 - (9/10)^2 = 0.19.
        let p = 0.19;
        let mean = rounds as f64 * p;
        let sd = (rounds as f64 * p * (1.0 - p)).sqrt();
        for t in tips {
            let c = counts[&t] as f64;
            assert!((c - mean).abs() <= 3.0 * sd, "tip {t}: {c} vs {mean} ± {sd}");
        }
    }
}
