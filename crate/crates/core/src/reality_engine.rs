//! Reality selection over the Conflict Graph.
//!
//! Both selectors walk the conflicts from oldest to youngest: at every step
//! only conflicts without a remaining ancestor (the maximal elements of the
//! unresolved set `U` in the Conflict DAG order) are candidates, so the chosen
//! set stays past-closed. Admitting a conflict removes it and its Conflict
//! Graph neighbours from `U`; neighbourhoods are inherited by descendants, so
//! the result is a maximal independent set.

use crate::digest::{digest_pair, mix64, quantize_fraction};
use crate::utxo_ledger::{LedgerState, TransactionId};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RealityError {
    #[error("coin value {x} outside [0.5, {theta}]")]
    CoinOutOfRange { x: f64, theta: f64 },
    #[error("weight function inconsistent: {0}")]
    InconsistentWeights(String),
    #[error("weight vector has {got} entries, graph has {want} conflicts")]
    WeightLength { got: usize, want: usize },
    #[error("conflict {0} unknown to the graph")]
    UnknownConflict(TransactionId),
    #[error("edge ({0}, {1}) out of range")]
    BadEdge(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictNode {
    pub tx: TransactionId,
    /// Tie-breaking digest.
    pub digest: u64,
    /// Conflict Graph neighbours (indices).
    pub neighbours: Vec<usize>,
    /// Strict ancestors among the conflicts (indices).
    pub ancestors: Vec<usize>,
}

/// Conflict Graph together with the Conflict DAG ancestry, indexed densely.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictGraph {
    nodes: Vec<ConflictNode>,
    index: HashMap<TransactionId, usize>,
}

impl ConflictGraph {
    /// Snapshot of a ledger's conflicts, indexed in ascending id order.
    pub fn from_ledger(ledger: &LedgerState) -> Self {
        let ids: Vec<TransactionId> = ledger.conflicts().iter().copied().collect();
        let index: HashMap<TransactionId, usize> = ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let nodes = ids
            .iter()
            .map(|&t| {
                let neighbours = ledger.conflict_neighbours(t).iter().map(|n| index[n]).collect();
                let ancestors = ledger
                    .maximal_contained_branch(t)
                    .unwrap_or_default()
                    .iter()
                    .filter(|&&a| a != t)
                    .map(|a| index[a])
                    .collect();
                ConflictNode { tx: t, digest: mix64(t.0), neighbours, ancestors }
            })
            .collect();
        Self { nodes, index }
    }

    /// Builds a graph from explicit parts. `ancestors[i]` must be the strict
    /// ancestor set of node `i`; edges are made symmetric.
    pub fn from_parts(
        ids: Vec<TransactionId>,
        edges: &[(usize, usize)],
        ancestors: Vec<Vec<usize>>,
    ) -> Result<Self, RealityError> {
        let n = ids.len();
        let mut neigh: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(RealityError::BadEdge(a, b));
            }
            neigh[a].insert(b);
            neigh[b].insert(a);
        }
        let mut anc = ancestors;
        anc.resize(n, Vec::new());
        let index = ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let nodes = ids
            .into_iter()
            .zip(neigh)
            .zip(anc)
            .map(|((tx, ns), a)| ConflictNode { tx, digest: mix64(tx.0), neighbours: ns.into_iter().collect(), ancestors: a })
            .collect();
        Ok(Self { nodes, index })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ConflictNode] {
        &self.nodes
    }

    pub fn index_of(&self, tx: TransactionId) -> Option<usize> {
        self.index.get(&tx).copied()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.nodes[a].neighbours.contains(&b)
    }

    /// Dense weight vector from a per-transaction map (missing entries are 0).
    pub fn weights_from(&self, w: &BTreeMap<TransactionId, f64>) -> Vec<f64> {
        self.nodes.iter().map(|n| w.get(&n.tx).copied().unwrap_or(0.0)).collect()
    }
}

/// Which phase of the selection admitted a conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Weight,
    Coin,
}

/// A maximal branch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reality {
    pub branch: BTreeSet<TransactionId>,
    /// Admission sequence: (conflict, weight at admission, phase).
    pub trace: Vec<(TransactionId, f64, Admission)>,
}

impl Reality {
    pub fn contains(&self, tx: TransactionId) -> bool {
        self.branch.contains(&tx)
    }
}

/// Tie-breaking rule among equal-weight candidates.
#[derive(Debug, Clone, Copy)]
pub enum TieBreak<'a> {
    MinDigest,
    MaxDigest,
    /// Prefer members of the given set, then the minimum digest.
    PreferCurrent(&'a BTreeSet<TransactionId>),
}

/// Evaluator `w: 𝒞 → [0, 1]` backed by a map; missing conflicts weigh 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConflictWeightFn {
    values: BTreeMap<TransactionId, f64>,
}

impl ConflictWeightFn {
    pub fn new(values: BTreeMap<TransactionId, f64>) -> Self {
        Self { values }
    }

    pub fn eval(&self, c: TransactionId) -> f64 {
        self.values.get(&c).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &BTreeMap<TransactionId, f64> {
        &self.values
    }

    pub fn dense(&self, g: &ConflictGraph) -> Vec<f64> {
        g.weights_from(&self.values)
    }

    /// Strict mode: monotone along ancestry and pairwise consistent
    /// (adjacent conflicts weigh at most 1 together).
    pub fn validate(&self, g: &ConflictGraph) -> Result<(), RealityError> {
        const TOL: f64 = 1e-12;
        let w = self.dense(g);
        for (i, n) in g.nodes().iter().enumerate() {
            if !(0.0..=1.0 + TOL).contains(&w[i]) {
                return Err(RealityError::InconsistentWeights(format!("{} has weight {}", n.tx, w[i])));
            }
            for &a in &n.ancestors {
                if w[i] > w[a] + TOL {
                    return Err(RealityError::InconsistentWeights(format!(
                        "{} outweighs its ancestor {}",
                        n.tx,
                        g.nodes()[a].tx
                    )));
                }
            }
            for &j in &n.neighbours {
                if w[i] + w[j] > 1.0 + TOL {
                    return Err(RealityError::InconsistentWeights(format!(
                        "{} and {} weigh more than 1 together",
                        n.tx,
                        g.nodes()[j].tx
                    )));
                }
            }
        }
        Ok(())
    }
}

struct Selector<'g> {
    g: &'g ConflictGraph,
    unresolved: Vec<bool>,
    remaining: usize,
    reality: Reality,
}

impl<'g> Selector<'g> {
    fn new(g: &'g ConflictGraph, active: Option<&[bool]>) -> Self {
        let unresolved: Vec<bool> = match active {
            Some(mask) => (0..g.len()).map(|i| mask.get(i).copied().unwrap_or(false)).collect(),
            None => vec![true; g.len()],
        };
        let remaining = unresolved.iter().filter(|&&u| u).count();
        Self { g, unresolved, remaining, reality: Reality::default() }
    }

    fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.g.len()).filter(move |&i| {
            self.unresolved[i] && self.g.nodes[i].ancestors.iter().all(|&a| !self.unresolved[a])
        })
    }

    fn admit(&mut self, i: usize, w: f64, how: Admission) {
        let node = &self.g.nodes[i];
        self.reality.branch.insert(node.tx);
        self.reality.trace.push((node.tx, w, how));
        for j in std::iter::once(i).chain(node.neighbours.iter().copied()) {
            if self.unresolved[j] {
                self.unresolved[j] = false;
                self.remaining -= 1;
            }
        }
    }

    /// argmax by weight, then by the tie-break rule.
    fn best_by_weight(&self, w: &[f64], tie: TieBreak) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in self.candidates() {
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = match w[i].total_cmp(&w[b]) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => {
                            let (di, db) = (self.g.nodes[i].digest, self.g.nodes[b].digest);
                            match tie {
                                TieBreak::MinDigest => di < db,
                                TieBreak::MaxDigest => di > db,
                                TieBreak::PreferCurrent(cur) => {
                                    let (ci, cb) = (cur.contains(&self.g.nodes[i].tx), cur.contains(&self.g.nodes[b].tx));
                                    if ci != cb {
                                        ci
                                    } else {
                                        di < db
                                    }
                                }
                            }
                        }
                    };
                    Some(if better { i } else { b })
                }
            };
        }
        best
    }
}

fn check_len(g: &ConflictGraph, w: &[f64]) {
    assert_eq!(w.len(), g.len(), "weight vector length must match the conflict graph");
}

/// Deterministic weight-greedy selection with minimum-digest tie-breaking.
pub fn select_reality(g: &ConflictGraph, w: &[f64]) -> Reality {
    select_reality_with(g, w, None, TieBreak::MinDigest)
}

/// Weight-greedy selection restricted to `active` conflicts (all when `None`)
/// with a configurable tie-break.
pub fn select_reality_with(g: &ConflictGraph, w: &[f64], active: Option<&[bool]>, tie: TieBreak) -> Reality {
    check_len(g, w);
    let mut s = Selector::new(g, active);
    while s.remaining > 0 {
        let i = s.best_by_weight(w, tie).expect("a non-empty past-closed set has a maximal element");
        s.admit(i, w[i], Admission::Weight);
    }
    s.reality
}

/// Validates the weight function first (strict mode).
pub fn select_reality_strict(g: &ConflictGraph, w: &ConflictWeightFn) -> Result<Reality, RealityError> {
    w.validate(g)?;
    Ok(select_reality(g, &w.dense(g)))
}

/// Common-coin selection: admit heaviest candidates while their weight exceeds
/// `x` (ties by maximum digest), then fill by the maximum of `digest(c ‖ x)`.
pub fn select_reality_with_coin(g: &ConflictGraph, w: &[f64], x: f64, theta: f64) -> Result<Reality, RealityError> {
    if !(0.5..=theta).contains(&x) {
        return Err(RealityError::CoinOutOfRange { x, theta });
    }
    Ok(select_reality_with_coin_unchecked(g, w, x, None))
}

/// Coin selection without the range check on `x`; the voting loop starts
/// with `x = 0` before the first beacon value exists.
pub fn select_reality_with_coin_unchecked(g: &ConflictGraph, w: &[f64], x: f64, active: Option<&[bool]>) -> Reality {
    check_len(g, w);
    let mut s = Selector::new(g, active);
    while s.remaining > 0 {
        let i = s.best_by_weight(w, TieBreak::MaxDigest).expect("candidate exists");
        if w[i] > x {
            s.admit(i, w[i], Admission::Weight);
        } else {
            break;
        }
    }
    let xq = quantize_fraction(x);
    while s.remaining > 0 {
        let i = s
            .candidates()
            .max_by_key(|&i| digest_pair(s.g.nodes[i].digest, xq))
            .expect("candidate exists");
        s.admit(i, w[i], Admission::Coin);
    }
    s.reality
}

/// True iff `r` is conflict-free, past-closed and maximal.
pub fn verify_reality(g: &ConflictGraph, r: &BTreeSet<TransactionId>) -> bool {
    verify_reality_masked(g, r, None)
}

/// [`verify_reality`] restricted to the `active` conflicts.
pub fn verify_reality_masked(g: &ConflictGraph, r: &BTreeSet<TransactionId>, active: Option<&[bool]>) -> bool {
    let on = |i: usize| active.map(|m| m[i]).unwrap_or(true);
    let mut member = vec![false; g.len()];
    for t in r {
        match g.index_of(*t) {
            Some(i) if on(i) => member[i] = true,
            _ => return false,
        }
    }
    for (i, n) in g.nodes.iter().enumerate() {
        if member[i] {
            if n.neighbours.iter().any(|&j| member[j]) || n.ancestors.iter().any(|&a| !member[a]) {
                return false;
            }
        } else if on(i) && !n.neighbours.iter().any(|&j| member[j]) {
            // Addable unless it has an ancestor outside r; an ancestor outside r
            // is itself either addable or adjacent to r (then so is i).
            return false;
        }
    }
    true
}

/// Brute-force enumeration of all past-closed maximal independent sets
/// (realities). Exponential; intended as an oracle for graphs of ≤ 16 nodes.
pub fn enumerate_realities(g: &ConflictGraph) -> Vec<BTreeSet<TransactionId>> {
    let n = g.len();
    assert!(n <= 16, "brute force limited to 16 conflicts");
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let set: BTreeSet<TransactionId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| g.nodes[i].tx).collect();
        if verify_reality(g, &set) {
            out.push(set);
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::toy::{Toy, ToyTx};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cycle() -> ConflictGraph {
        ConflictGraph::from_parts(vec![TransactionId(1), TransactionId(2)], &[(0, 1)], vec![vec![], vec![]]).unwrap()
    }

    #[test]
    fn worked_example_reality() {
        let toy = Toy::build();
        let g = ConflictGraph::from_ledger(toy.view.ledger());
        let w = toy.view.conflict_weight_fn();
        let r = select_reality_strict(&g, &w).unwrap();
        assert_eq!(r.branch, BTreeSet::from([toy.tx(ToyTx::X), toy.tx(ToyTx::W)]));
        assert!(verify_reality(&g, &r.branch));
        assert!(!verify_reality(&g, &BTreeSet::from([toy.tx(ToyTx::X)])));
    }

    #[test]
    fn simple_double_spend() {
        let g = two_cycle();
        assert_eq!(select_reality(&g, &[0.6, 0.4]).branch, BTreeSet::from([TransactionId(1)]));
        assert_eq!(select_reality(&g, &[0.4, 0.6]).branch, BTreeSet::from([TransactionId(2)]));
        // Equal weights: the smaller digest wins; both candidates are realities.
        let r = select_reality(&g, &[0.5, 0.5]);
        let winner = if g.nodes()[0].digest < g.nodes()[1].digest { TransactionId(1) } else { TransactionId(2) };
        assert_eq!(r.branch, BTreeSet::from([winner]));
        assert_eq!(enumerate_realities(&g).len(), 2);
        // Max-digest ties pick the other one.
        let r = select_reality_with(&g, &[0.5, 0.5], None, TieBreak::MaxDigest);
        assert_ne!(r.branch, BTreeSet::from([winner]));
    }

    #[test]
    fn empty_graph_gives_main_branch() {
        let g = ConflictGraph::default();
        assert!(select_reality(&g, &[]).branch.is_empty());
        assert!(verify_reality(&g, &BTreeSet::new()));
    }

    #[test]
    fn coin_range_is_checked() {
        let g = two_cycle();
        assert!(matches!(
            select_reality_with_coin(&g, &[0.5, 0.5], 0.4, 2.0 / 3.0),
            Err(RealityError::CoinOutOfRange { .. })
        ));
        assert!(select_reality_with_coin(&g, &[0.5, 0.5], 0.7, 2.0 / 3.0).is_err());
    }

    #[test]
    fn heavy_conflict_wins_for_every_coin() {
        let g = two_cycle();
        let theta = 2.0 / 3.0;
        let mut x = 0.5;
        while x <= theta {
            let r = select_reality_with_coin(&g, &[0.9, 0.1], x, theta).unwrap();
            assert_eq!(r.branch, BTreeSet::from([TransactionId(1)]));
            x += 0.05;
        }
    }

    #[test]
    fn light_conflicts_are_digest_driven() {
        let g = two_cycle();
        let x = 0.6;
        let r = select_reality_with_coin(&g, &[0.3, 0.3], x, 2.0 / 3.0).unwrap();
        assert!(r.trace.iter().all(|t| t.2 == Admission::Coin));
        let xq = quantize_fraction(x);
        let want = g.nodes().iter().max_by_key(|n| digest_pair(n.digest, xq)).unwrap().tx;
        assert_eq!(r.branch, BTreeSet::from([want]));
    }

    #[test]
    fn worked_example_with_coin() {
        let toy = Toy::build();
        let g = ConflictGraph::from_ledger(toy.view.ledger());
        let w = toy.view.conflict_weight_fn().dense(&g);
        let x = 0.65;
        let r = select_reality_with_coin(&g, &w, x, 2.0 / 3.0).unwrap();
        let (tx, tu, tw) = (toy.tx(ToyTx::X), toy.tx(ToyTx::U), toy.tx(ToyTx::W));
        assert_eq!(r.trace[0], (tx, 0.7, Admission::Weight));
        // ū and w̄ are both children of x̄; the larger digest(c ‖ x) wins.
        let xq = quantize_fraction(x);
        let d = |t| digest_pair(g.nodes()[g.index_of(t).unwrap()].digest, xq);
        let second = if d(tu) > d(tw) { tu } else { tw };
        assert_eq!(r.branch, BTreeSet::from([tx, second]));
    }

    #[test]
    fn strict_mode_rejects_inconsistent_weights() {
        let g = two_cycle();
        let w = ConflictWeightFn::new(BTreeMap::from([(TransactionId(1), 0.7), (TransactionId(2), 0.6)]));
        assert!(matches!(select_reality_strict(&g, &w), Err(RealityError::InconsistentWeights(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn selectors_emit_realities(seed in any::<u64>(), n in 0usize..=12, x in 0.5f64..=2.0/3.0) {
            let r = crate::properties::check_selectors(seed, n, x);
            prop_assert!(r.is_ok(), "{:?}", r);
        }

        /// Two parties whose weights differ only inside intervals that avoid
        /// `x` select the same reality.
        #[test]
        fn coin_agreement(seed in any::<u64>(), n in 1usize..=12, x in 0.5f64..=2.0/3.0, q in 0.0f64..0.15) {
            let g = crate::properties::random_conflict_graph(seed, n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut honest: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.85)).collect();
            // Honest weights are monotone along ancestry (ancestors have smaller indices).
            for i in 0..n {
                for &a in &g.nodes()[i].ancestors {
                    honest[i] = honest[i].min(honest[a]);
                }
            }
            prop_assume!(honest.iter().all(|&h| !(h..=h + q).contains(&x)));
            let a: Vec<f64> = honest.iter().map(|&h| h + rng.random_range(0.0..=q)).collect();
            let b: Vec<f64> = honest.iter().map(|&h| h + rng.random_range(0.0..=q)).collect();
            let ra = select_reality_with_coin(&g, &a, x, 2.0 / 3.0).unwrap();
            let rb = select_reality_with_coin(&g, &b, x, 2.0 / 3.0).unwrap();
            let above_a: BTreeSet<_> = (0..n).filter(|&i| a[i] > x).collect();
            let above_b: BTreeSet<_> = (0..n).filter(|&i| b[i] > x).collect();
            prop_assert_eq!(&above_a, &above_b);
            // With consistent weights the above-threshold conflicts are independent;
            // phase 1 then admits exactly them and phase 2 runs on identical state.
            let consistent = above_a.iter().all(|&i| above_a.iter().all(|&j| !g.are_adjacent(i, j)));
            if consistent {
                prop_assert_eq!(ra.branch, rb.branch);
            }
        }
    }
}
