//! Randomised structural checks shared by the property tests and the
//! acceptance suite: each `check_*` builds one random instance from a seed
//! and returns a description of the first violated property.

use crate::digest::IdGen;
use crate::identity_weights::{NodeId, WeightTable};
use crate::reality_engine::{enumerate_realities, select_reality, select_reality_with_coin, Admission, ConflictGraph};
use crate::tangle_core::{Block, BlockId, Reference, TangleView};
use crate::utxo_ledger::{Output, OutputId, Owner, Transaction, TransactionId};
use crate::voting::VotingView;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Random conflict structure that is realisable by a ledger: a random
/// forest-like ancestry where every edge is inherited by descendants.
pub fn random_conflict_graph(seed: u64, n: usize) -> ConflictGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut direct: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let p = if i > 0 && rng.random_bool(0.4) { Some(rng.random_range(0..i)) } else { None };
        parent.push(p);
        if i > 0 && rng.random_bool(0.7) {
            let j = rng.random_range(0..i);
            direct.push((j, i));
        }
    }
    let ancestors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut a = Vec::new();
            let mut cur = parent[i];
            while let Some(p) = cur {
                a.push(p);
                cur = parent[p];
            }
            a
        })
        .collect();
    let self_and_anc = |i: usize| {
        let mut v = ancestors[i].clone();
        v.push(i);
        v
    };
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (sa, sb) = (self_and_anc(a), self_and_anc(b));
            if sa.iter().any(|x| sb.contains(x)) {
                continue;
            }
            if direct.iter().any(|&(p, q)| (sa.contains(&p) && sb.contains(&q)) || (sa.contains(&q) && sb.contains(&p))) {
                edges.push((a, b));
            }
        }
    }
    ConflictGraph::from_parts((0..n as u64).map(|i| TransactionId(i * 7919 + 1)).collect(), &edges, ancestors).unwrap()
}

/// Coarse weights in {0, .1, …, .4} so that ties actually occur.
pub fn coarse_weights(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    (0..n).map(|_| rng.random_range(0..5) as f64 / 10.0).collect()
}

/// Both selectors return a maximal independent, past-closed set (checked
/// against brute-force enumeration), deterministically, and the coin
/// selector admits by weight only above `x` and only before any coin step.
pub fn check_selectors(seed: u64, n: usize, x: f64) -> Result<(), String> {
    let g = random_conflict_graph(seed, n);
    let w = coarse_weights(seed, n);
    let all = enumerate_realities(&g);
    ensure!(!all.is_empty(), "no reality enumerated");
    let r = select_reality(&g, &w);
    ensure!(all.contains(&r.branch), "greedy selection {:?} is not a reality", r.branch);
    let rc = select_reality_with_coin(&g, &w, x, 2.0 / 3.0).map_err(|e| e.to_string())?;
    ensure!(all.contains(&rc.branch), "coin selection {:?} is not a reality", rc.branch);
    ensure!(select_reality(&g, &w) == r, "greedy selection is not deterministic");
    ensure!(select_reality_with_coin(&g, &w, x, 2.0 / 3.0).ok().as_ref() == Some(&rc), "coin selection is not deterministic");
    let mut weight_phase = true;
    for &(_, wt, how) in &rc.trace {
        match how {
            Admission::Weight => {
                ensure!(weight_phase, "weight admission after a coin admission");
                ensure!(wt > x, "admitted weight {wt} not above x = {x}");
            }
            Admission::Coin => weight_phase = false,
        }
    }
    Ok(())
}

/// A small random run: a few nodes, a handful of genesis outputs that are
/// double spent, blocks referencing recent blocks with random labels.
pub fn random_voting_run(seed: u64, n_blocks: usize) -> VotingView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = 4u32;
    let weights = Arc::new(WeightTable::new(&[0.4, 0.3, 0.2, 0.1]).unwrap());
    let mut ids = IdGen::new(seed);
    let genesis_tx = Transaction {
        id: TransactionId(ids.next_digest()),
        inputs: vec![],
        outputs: (0..4).map(|i| Output { value: 1, owner: Owner::User(i) }).collect(),
        issue_time: 0.0,
    };
    let genesis = Block { id: BlockId(ids.next_digest()), references: vec![], transaction: genesis_tx.id, issuer: NodeId(0), issue_time: 0.0 };
    let mut view = VotingView::new(NodeId(0), genesis.clone(), genesis_tx.clone(), weights, 8);
    let mut blocks = vec![(genesis, genesis_tx)];
    for step in 0..n_blocks {
        let len = blocks.len();
        let lo = len.saturating_sub(5);
        let k = rng.random_range(2..=3);
        let refs: Vec<Reference> = (0..k)
            .map(|_| {
                let t = blocks[rng.random_range(lo..len)].0.id;
                if rng.random_bool(0.3) { Reference::tx(t) } else { Reference::block(t) }
            })
            .collect();
        // Spend an output of a transaction in the block's Tangle past so the
        // past-cone completeness assumption holds.
        let parent = refs[0].target;
        let ptx = view.content(parent).unwrap().clone();
        let idx = rng.random_range(0..ptx.outputs.len()) as u16;
        let value = ptx.outputs[idx as usize].value;
        let tx = Transaction {
            id: TransactionId(ids.next_digest()),
            inputs: vec![OutputId { tx: ptx.id, index: idx }],
            outputs: vec![Output { value, owner: Owner::User(0) }],
            issue_time: step as f64,
        };
        let b = Block {
            id: BlockId(ids.next_digest()),
            references: refs,
            transaction: tx.id,
            issuer: NodeId(rng.random_range(0..n_nodes)),
            issue_time: step as f64 + 1.0,
        };
        view.receive(b.clone(), tx.clone(), step as f64 + 1.0).unwrap();
        blocks.push((b, tx));
    }
    view
}

/// Incrementally maintained supporters equal the from-scratch definition;
/// supporters of conflicting transactions are disjoint and inherited by the
/// branch; block voting branches agree with their inherited form.
pub fn check_supporters(seed: u64, n: usize) -> Result<(), String> {
    let v = random_voting_run(seed, n);
    ensure!(v.all_supporters() == v.supporters_from_scratch(), "incremental supporters differ from the definition");
    for &a in v.ledger().conflicts() {
        let sa = v.supporters(a).map_err(|e| e.to_string())?;
        for b in v.ledger().conflict_neighbours(a) {
            ensure!(sa.is_disjoint(&v.supporters(b).map_err(|e| e.to_string())?), "conflicting supporters overlap");
        }
        for c in v.ledger().maximal_contained_branch(a).map_err(|e| e.to_string())? {
            ensure!(sa.is_subset(&v.supporters(c).map_err(|e| e.to_string())?), "supporters not inherited by the branch");
        }
    }
    for &b in v.tangle().solid_order() {
        let direct = v.voting_branch(b).map_err(|e| e.to_string())?.branch;
        ensure!(direct == v.voting_branch_inherited(b).map_err(|e| e.to_string())?, "voting branch differs from inherited form");
    }
    Ok(())
}

/// Random Tangle of `n_blocks` blocks over `n_nodes` issuers; each block
/// references one to three of the six most recent blocks.
pub fn random_tangle(seed: u64, n_blocks: usize, n_nodes: u32) -> Vec<Block> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = IdGen::new(1);
    let mut blocks = vec![Block {
        id: BlockId(ids.next_digest()),
        references: vec![],
        transaction: TransactionId(0),
        issuer: NodeId(0),
        issue_time: 0.0,
    }];
    for _ in 0..n_blocks {
        let len = blocks.len();
        let k = rng.random_range(1..=3);
        let lo = len.saturating_sub(6);
        let mut references: Vec<Reference> = (0..k).map(|_| Reference::block(blocks[rng.random_range(lo..len)].id)).collect();
        if references.len() == 1 {
            references.push(references[0]);
        }
        let issuer = NodeId(rng.random_range(0..n_nodes));
        blocks.push(Block {
            id: BlockId(ids.next_digest()),
            references,
            transaction: TransactionId(len as u64),
            issuer,
            issue_time: len as f64,
        });
    }
    blocks
}

/// Witness Weight lemmas on a random Tangle delivered in random order:
/// per-block WW never decreases, the solid set is past-closed, supporters
/// shrink along the future (a block's supporters are a subset of each
/// ancestor's), and the final state matches in-order delivery.
pub fn check_ww_lemmas(seed: u64, n: usize, perm_seed: u64) -> Result<(), String> {
    const NODES: u32 = 5;
    let blocks = random_tangle(seed, n, NODES);
    let weights = Arc::new(WeightTable::uniform(NODES as usize).map_err(|e| e.to_string())?);
    let fresh = || TangleView::new(NodeId(0), blocks[0].clone(), weights.clone(), 8);
    let mut order: Vec<usize> = (1..blocks.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let err = |e: crate::tangle_core::TangleError| e.to_string();
    let mut v = fresh();
    let mut last_ww: HashMap<BlockId, f64> = HashMap::new();
    for (step, &i) in order.iter().enumerate() {
        v.receive_block(blocks[i].clone(), step as f64).map_err(err)?;
        for &b in v.solid_order() {
            let ww = v.witness_weight(b).map_err(err)?;
            let prev = last_ww.insert(b, ww).unwrap_or(0.0);
            ensure!(ww + 1e-15 >= prev, "WW of {b:?} decreased from {prev} to {ww}");
        }
        for &b in v.solid_order() {
            for p in v.block(b).expect("solid block is stored").parents() {
                ensure!(v.is_solid(p), "solid block {b:?} has non-solid parent {p:?}");
            }
        }
    }
    for &x in v.solid_order() {
        let sx = v.block_supporters(x).map_err(err)?;
        ensure!(sx == v.block_supporters_from_cone(x).map_err(err)?, "incremental supporters of {x:?} differ from the cone");
        for y in v.past_cone(x).map_err(err)? {
            ensure!(sx.is_subset(&v.block_supporters(y).map_err(err)?), "supporters of {x:?} not contained in ancestor {y:?}");
        }
    }
    let mut w = fresh();
    for (i, b) in blocks.iter().enumerate().skip(1) {
        w.receive_block(b.clone(), i as f64).map_err(err)?;
    }
    let s1: BTreeSet<_> = v.solid_order().iter().copied().collect();
    let s2: BTreeSet<_> = w.solid_order().iter().copied().collect();
    ensure!(s1 == s2, "solid sets depend on delivery order");
    for b in s1 {
        ensure!(v.witness_weight(b).map_err(err)? == w.witness_weight(b).map_err(err)?, "WW of {b:?} depends on delivery order");
    }
    ensure!(v.tips() == w.tips(), "tips depend on delivery order");
    Ok(())
}
