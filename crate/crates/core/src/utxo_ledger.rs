//! UTXO transactions, the Ledger DAG, conflicts and branches.
//!
//! The Ledger DAG has an edge from a transaction to every transaction whose
//! outputs it consumes, so the past cone of a transaction is everything it
//! (transitively) spends from. Two transactions *directly* conflict when they
//! share an input; they *conflict* when something in one past cone directly
//! conflicts with something in the other. Conflicts (members of 𝒞) are the
//! transactions that directly conflict with at least one other transaction.

use crate::identity_weights::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransactionId(pub u64);

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{:016x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutputId {
    pub tx: TransactionId,
    pub index: u16,
}

/// Owner tag standing in for an unlock condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Node(NodeId),
    User(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub value: u64,
    pub owner: Owner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TransactionId,
    /// Empty only for the genesis transaction.
    pub inputs: Vec<OutputId>,
    pub outputs: Vec<Output>,
    pub issue_time: f64,
}

impl Transaction {
    pub fn is_genesis(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyOutcome {
    /// Transactions that joined 𝒞 because of this insertion.
    pub new_conflicts: BTreeSet<TransactionId>,
    /// Number of Conflict Graph edges added.
    pub updated_edges: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LedgerError {
    #[error("transaction {0} already in the ledger")]
    DuplicateTransaction(TransactionId),
    #[error("input {0:?} does not reference an existing output")]
    UnknownInput(OutputId),
    #[error("inputs carry {inputs} but outputs {outputs}")]
    ValueMismatch { inputs: u64, outputs: u64 },
    #[error("transaction {0} double spends inside its own past cone")]
    PastConeDoubleSpend(TransactionId),
    #[error("unknown transaction {0}")]
    UnknownTransaction(TransactionId),
    #[error("{0} is not a conflict")]
    NotAConflict(TransactionId),
    #[error("the given set is not a reality")]
    NotAReality,
    #[error("the given set is not a branch")]
    NotABranch,
}

#[derive(Debug, Clone)]
struct Entry {
    tx: Transaction,
    /// Distinct producers of the inputs (Ledger-DAG parents).
    parents: Vec<TransactionId>,
    /// Transactions spending any output of this one (Ledger-DAG children).
    children: Vec<TransactionId>,
}

/// One node's ledger: the transactions it knows and the conflict structure.
#[derive(Debug, Clone)]
pub struct LedgerState {
    genesis: TransactionId,
    txs: HashMap<TransactionId, Entry>,
    order: Vec<TransactionId>,
    spenders: HashMap<OutputId, Vec<TransactionId>>,
    conflicts: BTreeSet<TransactionId>,
    conflict_edges: BTreeMap<TransactionId, BTreeSet<TransactionId>>,
    conflict_dag_parents: BTreeMap<TransactionId, BTreeSet<TransactionId>>,
}

impl LedgerState {
    pub fn new(genesis: Transaction) -> Self {
        let gid = genesis.id;
        let mut txs = HashMap::new();
        txs.insert(gid, Entry { tx: genesis, parents: vec![], children: vec![] });
        Self {
            genesis: gid,
            txs,
            order: vec![gid],
            spenders: HashMap::new(),
            conflicts: BTreeSet::new(),
            conflict_edges: BTreeMap::new(),
            conflict_dag_parents: BTreeMap::new(),
        }
    }

    pub fn genesis(&self) -> TransactionId {
        self.genesis
    }

    pub fn contains(&self, id: TransactionId) -> bool {
        self.txs.contains_key(&id)
    }

    pub fn transaction(&self, id: TransactionId) -> Option<&Transaction> {
        self.txs.get(&id).map(|e| &e.tx)
    }

    /// Transactions in insertion order.
    pub fn transactions(&self) -> &[TransactionId] {
        &self.order
    }

    pub fn conflicts(&self) -> &BTreeSet<TransactionId> {
        &self.conflicts
    }

    pub fn is_conflict(&self, id: TransactionId) -> bool {
        self.conflicts.contains(&id)
    }

    /// Conflict Graph neighbours of a conflict.
    pub fn conflict_neighbours(&self, c: TransactionId) -> BTreeSet<TransactionId> {
        self.conflict_edges.get(&c).cloned().unwrap_or_default()
    }

    /// Parents of a conflict in the Conflict DAG (the genesis for root conflicts).
    pub fn conflict_dag_parents(&self, c: TransactionId) -> BTreeSet<TransactionId> {
        self.conflict_dag_parents.get(&c).cloned().unwrap_or_default()
    }

    pub fn spenders(&self, o: &OutputId) -> &[TransactionId] {
        self.spenders.get(o).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn ledger_parents(&self, id: TransactionId) -> &[TransactionId] {
        self.txs.get(&id).map(|e| e.parents.as_slice()).unwrap_or(&[])
    }

    fn entry(&self, id: TransactionId) -> Result<&Entry, LedgerError> {
        self.txs.get(&id).ok_or(LedgerError::UnknownTransaction(id))
    }

    fn output(&self, o: &OutputId) -> Option<&Output> {
        self.txs.get(&o.tx).and_then(|e| e.tx.outputs.get(o.index as usize))
    }

    /// Reflexive past cone in the Ledger DAG.
    pub fn past_cone(&self, id: TransactionId) -> Result<BTreeSet<TransactionId>, LedgerError> {
        self.entry(id)?;
        let mut seen = BTreeSet::from([id]);
        let mut stack = vec![id];
        while let Some(t) = stack.pop() {
            for &p in &self.txs[&t].parents {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        Ok(seen)
    }

    /// Reflexive future cone in the Ledger DAG.
    pub fn future_cone(&self, id: TransactionId) -> Result<BTreeSet<TransactionId>, LedgerError> {
        self.entry(id)?;
        let mut seen = BTreeSet::from([id]);
        let mut stack = vec![id];
        while let Some(t) = stack.pop() {
            for &c in &self.txs[&t].children {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        Ok(seen)
    }

    /// Transactions sharing an input with `id` (excluding `id`).
    pub fn direct_partners(&self, id: TransactionId) -> BTreeSet<TransactionId> {
        let mut out = BTreeSet::new();
        if let Some(e) = self.txs.get(&id) {
            for i in &e.tx.inputs {
                for &s in self.spenders(i) {
                    if s != id {
                        out.insert(s);
                    }
                }
            }
        }
        out
    }

    /// Inserts a transaction, updating 𝒞, the Conflict Graph and Conflict DAG.
    pub fn apply_transaction(&mut self, tx: Transaction) -> Result<ApplyOutcome, LedgerError> {
        if self.txs.contains_key(&tx.id) {
            return Err(LedgerError::DuplicateTransaction(tx.id));
        }
        if tx.inputs.is_empty() {
            // A second input-less transaction would be a second genesis.
            return Err(LedgerError::PastConeDoubleSpend(tx.id));
        }
        let mut in_value = 0u64;
        for i in &tx.inputs {
            in_value += self.output(i).ok_or(LedgerError::UnknownInput(*i))?.value;
        }
        let out_value: u64 = tx.outputs.iter().map(|o| o.value).sum();
        if in_value != out_value {
            return Err(LedgerError::ValueMismatch { inputs: in_value, outputs: out_value });
        }
        let inputs: BTreeSet<OutputId> = tx.inputs.iter().copied().collect();
        if inputs.len() != tx.inputs.len() {
            return Err(LedgerError::PastConeDoubleSpend(tx.id));
        }
        let mut parents: Vec<TransactionId> = Vec::new();
        for i in &tx.inputs {
            if !parents.contains(&i.tx) {
                parents.push(i.tx);
            }
        }
        // The strict past cone must not consume any of our inputs and must be
        // conflict-free itself.
        let mut past = BTreeSet::new();
        for &p in &parents {
            past.extend(self.past_cone(p)?);
        }
        for &a in &past {
            let e = &self.txs[&a];
            for i in &e.tx.inputs {
                if inputs.contains(i) {
                    return Err(LedgerError::PastConeDoubleSpend(tx.id));
                }
                if self.spenders(i).iter().filter(|s| past.contains(s)).count() > 1 {
                    return Err(LedgerError::PastConeDoubleSpend(tx.id));
                }
            }
        }

        let id = tx.id;
        for &p in &parents {
            self.txs.get_mut(&p).expect("parent present").children.push(id);
        }
        let mut outcome = ApplyOutcome::default();
        for i in &tx.inputs {
            let list = self.spenders.entry(*i).or_default();
            list.push(id);
            if list.len() >= 2 {
                for &s in list.iter() {
                    if !self.conflicts.contains(&s) {
                        outcome.new_conflicts.insert(s);
                    }
                }
            }
        }
        self.txs.insert(id, Entry { tx, parents, children: vec![] });
        self.order.push(id);

        for &c in &outcome.new_conflicts {
            self.conflicts.insert(c);
        }
        // Only edges incident to new conflicts can appear: any new direct
        // conflict involves the new transaction, which lies in no other past cone.
        for &c in &outcome.new_conflicts {
            let neigh = self.conflicting_conflicts(c);
            for n in neigh {
                if self.conflict_edges.entry(c).or_default().insert(n) {
                    outcome.updated_edges += 1;
                }
                self.conflict_edges.entry(n).or_default().insert(c);
            }
        }
        // Conflict-DAG parents change for the new conflicts and everything
        // conflicting below them.
        let mut refresh = BTreeSet::new();
        for &c in &outcome.new_conflicts {
            for f in self.future_cone(c)? {
                if self.conflicts.contains(&f) {
                    refresh.insert(f);
                }
            }
        }
        for c in refresh {
            let p = self.nearest_conflict_ancestors(c);
            self.conflict_dag_parents.insert(c, p);
        }
        Ok(outcome)
    }

    /// All conflicts conflicting with `c`, computed from the definition.
    fn conflicting_conflicts(&self, c: TransactionId) -> BTreeSet<TransactionId> {
        let mut direct = BTreeSet::new();
        for a in self.past_cone(c).unwrap_or_default() {
            direct.extend(self.direct_partners(a));
        }
        let mut out = BTreeSet::new();
        for d in direct {
            for f in self.future_cone(d).unwrap_or_default() {
                if f != c && self.conflicts.contains(&f) {
                    out.insert(f);
                }
            }
        }
        out
    }

    fn nearest_conflict_ancestors(&self, c: TransactionId) -> BTreeSet<TransactionId> {
        let mut anc: BTreeSet<TransactionId> = self.past_cone(c).unwrap_or_default();
        anc.remove(&c);
        let anc_conf: Vec<TransactionId> = anc.into_iter().filter(|a| self.conflicts.contains(a)).collect();
        let mut out = BTreeSet::new();
        for &a in &anc_conf {
            let shadowed = anc_conf.iter().any(|&w| w != a && self.past_cone(w).map(|p| p.contains(&a)).unwrap_or(false));
            if !shadowed {
                out.insert(a);
            }
        }
        if out.is_empty() {
            out.insert(self.genesis);
        }
        out
    }

    /// True iff `a ≠ b` and their input sets intersect.
    pub fn directly_conflicting(&self, a: TransactionId, b: TransactionId) -> Result<bool, LedgerError> {
        let ea = self.entry(a)?;
        let eb = self.entry(b)?;
        if a == b {
            return Ok(false);
        }
        Ok(ea.tx.inputs.iter().any(|i| eb.tx.inputs.contains(i)))
    }

    /// True iff something in past*(a) directly conflicts with something in past*(b).
    pub fn conflicting(&self, a: TransactionId, b: TransactionId) -> Result<bool, LedgerError> {
        let pa = self.past_cone(a)?;
        let pb = self.past_cone(b)?;
        if a == b {
            return Ok(false);
        }
        for &x in &pa {
            for y in self.direct_partners(x) {
                if pb.contains(&y) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Conflicts in the Ledger past cone of `tx` (excluding the genesis).
    pub fn maximal_contained_branch(&self, tx: TransactionId) -> Result<BTreeSet<TransactionId>, LedgerError> {
        Ok(self.past_cone(tx)?.into_iter().filter(|t| self.conflicts.contains(t)).collect())
    }

    /// True iff no two members are adjacent in the Conflict Graph.
    pub fn is_conflict_free(&self, s: &BTreeSet<TransactionId>) -> bool {
        s.iter().all(|c| {
            self.conflict_edges
                .get(c)
                .map(|n| n.iter().all(|m| !s.contains(m)))
                .unwrap_or(true)
        })
    }

    /// Conflict-free and past-closed in the Conflict DAG.
    pub fn is_branch(&self, s: &BTreeSet<TransactionId>) -> Result<bool, LedgerError> {
        for &c in s {
            if !self.conflicts.contains(&c) {
                return Err(LedgerError::NotAConflict(c));
            }
        }
        if !self.is_conflict_free(s) {
            return Ok(false);
        }
        for &c in s {
            if !self.maximal_contained_branch(c)?.is_subset(s) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A branch to which no further conflict can be added.
    pub fn is_reality(&self, s: &BTreeSet<TransactionId>) -> Result<bool, LedgerError> {
        if !self.is_branch(s)? {
            return Ok(false);
        }
        for &c in &self.conflicts {
            if s.contains(&c) {
                continue;
            }
            let mut t = s.clone();
            t.extend(self.maximal_contained_branch(c)?);
            if self.is_branch(&t)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All transactions whose maximal contained branch lies inside `r`.
    pub fn ledger_of_reality(&self, r: &BTreeSet<TransactionId>) -> Result<BTreeSet<TransactionId>, LedgerError> {
        if !self.is_reality(r)? {
            return Err(LedgerError::NotAReality);
        }
        let mut out = BTreeSet::new();
        for &t in &self.order {
            if self.maximal_contained_branch(t)?.is_subset(r) {
                out.insert(t);
            }
        }
        Ok(out)
    }

    /// JSONL export: `{id, inputs, outputs, conflicts_with}` per transaction.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for id in &self.order {
            let e = &self.txs[id];
            let line = serde_json::json!({
                "id": id,
                "inputs": e.tx.inputs,
                "outputs": e.tx.outputs,
                "conflicts_with": self.conflict_neighbours(*id),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    /// Conflict Graph in DOT format, with Conflict-DAG edges dashed.
    pub fn conflict_graph_dot(&self) -> String {
        let mut s = String::from("graph conflicts {\n");
        for c in &self.conflicts {
            s.push_str(&format!("  \"{c}\";\n"));
        }
        for (a, ns) in &self.conflict_edges {
            for b in ns {
                if a < b {
                    s.push_str(&format!("  \"{a}\" -- \"{b}\";\n"));
                }
            }
        }
        for (c, ps) in &self.conflict_dag_parents {
            for p in ps {
                s.push_str(&format!("  \"{c}\" -- \"{p}\" [style=dashed];\n"));
            }
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{Toy, ToyTx};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[TransactionId]) -> BTreeSet<TransactionId> {
        v.iter().copied().collect()
    }

    #[test]
    fn worked_example_conflicts() {
        let toy = Toy::build();
        let l = toy.view.ledger();
        let t = |x| toy.tx(x);
        use ToyTx::*;
        assert_eq!(*l.conflicts(), set(&[t(X), t(Y), t(U), t(W)]));
        assert!(l.directly_conflicting(t(X), t(Y)).unwrap());
        assert!(!l.directly_conflicting(t(X), t(X)).unwrap());
        assert!(!l.directly_conflicting(t(X), t(Z)).unwrap());
        assert!(l.conflicting(t(Y), t(U)).unwrap());
        assert!(l.conflicting(t(Y), t(W)).unwrap());
        assert!(!l.conflicting(t(Z), t(X)).unwrap());
        assert!(!l.conflicting(t(Y), t(Y)).unwrap());
        assert!(l.is_branch(&BTreeSet::new()).unwrap());
        assert!(l.is_branch(&set(&[t(X), t(W)])).unwrap());
        assert!(!l.is_branch(&set(&[t(W)])).unwrap());
        assert_eq!(l.is_branch(&set(&[t(Z)])), Err(LedgerError::NotAConflict(t(Z))));
        assert_eq!(l.maximal_contained_branch(t(Z)).unwrap(), BTreeSet::new());
        assert_eq!(l.maximal_contained_branch(t(W)).unwrap(), set(&[t(W), t(X)]));
        assert_eq!(l.maximal_contained_branch(t(Rho)).unwrap(), BTreeSet::new());
        assert_eq!(
            l.ledger_of_reality(&set(&[t(X), t(W)])).unwrap(),
            set(&[t(Rho), t(X), t(Z), t(W), t(V)])
        );
        assert_eq!(l.ledger_of_reality(&set(&[t(Y)])).unwrap(), set(&[t(Rho), t(Y), t(Z), t(V)]));
        assert_eq!(l.ledger_of_reality(&set(&[t(X)])), Err(LedgerError::NotAReality));
        assert_eq!(l.conflict_dag_parents(t(W)), set(&[t(X)]));
        assert_eq!(l.conflict_dag_parents(t(X)), set(&[t(Rho)]));
    }

    fn genesis(n_outputs: u16) -> Transaction {
        Transaction {
            id: TransactionId(0),
            inputs: vec![],
            outputs: (0..n_outputs).map(|i| Output { value: 10, owner: Owner::User(i as u32) }).collect(),
            issue_time: 0.0,
        }
    }

    fn spend(id: u64, inputs: &[OutputId], value: u64) -> Transaction {
        Transaction {
            id: TransactionId(id),
            inputs: inputs.to_vec(),
            outputs: vec![Output { value, owner: Owner::User(0) }],
            issue_time: id as f64,
        }
    }

    fn out(tx: u64, index: u16) -> OutputId {
        OutputId { tx: TransactionId(tx), index }
    }

    #[test]
    fn apply_outcomes() {
        let mut l = LedgerState::new(genesis(3));
        let o = l.apply_transaction(spend(1, &[out(0, 0)], 10)).unwrap();
        assert!(o.new_conflicts.is_empty());
        let o = l.apply_transaction(spend(2, &[out(0, 0)], 10)).unwrap();
        assert_eq!(o.new_conflicts, set(&[TransactionId(1), TransactionId(2)]));
        assert_eq!(o.updated_edges, 1);
        let o = l.apply_transaction(spend(3, &[out(0, 1)], 10)).unwrap();
        assert!(o.new_conflicts.is_empty());
        let o = l.apply_transaction(spend(4, &[out(0, 0)], 10)).unwrap();
        assert_eq!(o.new_conflicts, set(&[TransactionId(4)]));
        for (a, b) in [(1, 2), (1, 4), (2, 4)] {
            assert!(l.conflict_neighbours(TransactionId(a)).contains(&TransactionId(b)));
        }
    }

    #[test]
    fn apply_errors() {
        let mut l = LedgerState::new(genesis(2));
        assert_eq!(l.apply_transaction(spend(1, &[out(0, 5)], 10)), Err(LedgerError::UnknownInput(out(0, 5))));
        assert_eq!(
            l.apply_transaction(spend(1, &[out(0, 0)], 11)),
            Err(LedgerError::ValueMismatch { inputs: 10, outputs: 11 })
        );
        l.apply_transaction(spend(1, &[out(0, 0)], 10)).unwrap();
        // Spends genesis output 0 again while also spending tx 1, whose past already consumed it.
        assert_eq!(
            l.apply_transaction(spend(2, &[out(1, 0), out(0, 0)], 20)),
            Err(LedgerError::PastConeDoubleSpend(TransactionId(2)))
        );
        // Merging two mutually conflicting histories is rejected as well.
        l.apply_transaction(spend(3, &[out(0, 0)], 10)).unwrap();
        assert_eq!(
            l.apply_transaction(spend(4, &[out(1, 0), out(3, 0)], 20)),
            Err(LedgerError::PastConeDoubleSpend(TransactionId(4)))
        );
        assert_eq!(l.apply_transaction(spend(1, &[out(0, 1)], 10)), Err(LedgerError::DuplicateTransaction(TransactionId(1))));
    }

    /// Random ledgers: each tx spends 1–2 currently existing outputs, possibly
    /// already spent ones (creating conflicts), while keeping past cones valid.
    pub(crate) fn random_ledger(seed: u64, n: usize) -> LedgerState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = LedgerState::new(genesis(4));
        let mut outputs: Vec<(OutputId, u64)> = (0..4).map(|i| (out(0, i), 10)).collect();
        let mut next = 1u64;
        let mut attempts = 0;
        while l.transactions().len() <= n && attempts < n * 20 {
            attempts += 1;
            let k = rng.random_range(1..=2);
            let mut ins: Vec<(OutputId, u64)> = (0..k).map(|_| outputs[rng.random_range(0..outputs.len())]).collect();
            ins.sort();
            ins.dedup();
            let value: u64 = ins.iter().map(|x| x.1).sum();
            let n_out = rng.random_range(1..=2u16);
            let mut outs = vec![Output { value: value / n_out as u64, owner: Owner::User(0) }; n_out as usize];
            outs[0].value += value - outs.iter().map(|o| o.value).sum::<u64>();
            let tx = Transaction { id: TransactionId(next), inputs: ins.iter().map(|x| x.0).collect(), outputs: outs.clone(), issue_time: next as f64 };
            if l.apply_transaction(tx).is_ok() {
                for (i, o) in outs.iter().enumerate() {
                    outputs.push((out(next, i as u16), o.value));
                }
                next += 1;
            }
        }
        l
    }

    proptest! {
        #[test]
        fn conflict_structure_matches_brute_force(seed in any::<u64>(), n in 1usize..30) {
            let l = random_ledger(seed, n);
            let txs: Vec<TransactionId> = l.transactions().to_vec();
            // 𝒞 membership from the definition.
            for &t in &txs {
                prop_assert_eq!(l.is_conflict(t), !l.direct_partners(t).is_empty());
            }
            // Incrementally maintained edges equal the definition, and are
            // symmetric and irreflexive.
            for &a in l.conflicts() {
                prop_assert!(!l.conflict_neighbours(a).contains(&a));
                for &b in l.conflicts() {
                    let want = l.conflicting(a, b).unwrap();
                    prop_assert_eq!(l.conflict_neighbours(a).contains(&b), want);
                    prop_assert_eq!(want, l.conflicting(b, a).unwrap());
                }
            }
            for &t in &txs {
                prop_assert!(l.is_branch(&l.maximal_contained_branch(t).unwrap()).unwrap());
            }
        }

        #[test]
        fn union_of_compatible_branches_is_branch(seed in any::<u64>(), n in 1usize..30) {
            let l = random_ledger(seed, n);
            let branches: Vec<BTreeSet<TransactionId>> =
                l.transactions().iter().map(|&t| l.maximal_contained_branch(t).unwrap()).collect();
            for a in &branches {
                for b in &branches {
                    let u: BTreeSet<_> = a.union(b).copied().collect();
                    if l.is_conflict_free(&u) {
                        prop_assert!(l.is_branch(&u).unwrap());
                    }
                }
            }
        }

        #[test]
        fn reality_ledgers_are_conflict_free(seed in any::<u64>(), n in 1usize..25) {
            let l = random_ledger(seed, n);
            let g = crate::reality_engine::ConflictGraph::from_ledger(&l);
            let w = vec![0.5; g.len()];
            let r = crate::reality_engine::select_reality(&g, &w);
            let ledger = l.ledger_of_reality(&r.branch).unwrap();
            for &a in &ledger {
                for &b in &ledger {
                    prop_assert!(!l.conflicting(a, b).unwrap());
                }
            }
        }
    }
}
