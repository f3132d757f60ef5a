//! The four-node worked example, used as a golden fixture.
//!
//! Nodes red, blue, brown and green weigh 0.3, 0.1, 0.2 and 0.4. Blocks are
//! issued in the order x, y, z, v, w, u:
//!
//! * x (red) and y (blue) reference the genesis and carry x̄ and ȳ, which
//!   spend the same genesis output;
//! * z (brown) references y and carries z̄, spending another genesis output;
//! * v (blue) references z and carries v̄, spending z̄;
//! * w (green) block-references x and transaction-references z, carrying w̄;
//! * u (red) references x; ū and w̄ spend the same output of x̄.

use crate::digest::mix64;
use crate::identity_weights::{NodeId, WeightTable};
use crate::reality_engine::{select_reality, ConflictGraph};
use crate::tangle_core::{Block, BlockId, Reference, DEFAULT_MAX_REFS};
use crate::utxo_ledger::{Output, OutputId, Owner, Transaction, TransactionId};
use crate::voting::{ReceiveOutcome, VotingView};
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ToyBlock {
    Rho,
    X,
    Y,
    Z,
    V,
    W,
    U,
}

impl ToyBlock {
    /// Genesis followed by the issuance order.
    pub const ALL: [ToyBlock; 7] = [ToyBlock::Rho, ToyBlock::X, ToyBlock::Y, ToyBlock::Z, ToyBlock::V, ToyBlock::W, ToyBlock::U];

    pub fn name(self) -> &'static str {
        match self {
            ToyBlock::Rho => "rho",
            ToyBlock::X => "x",
            ToyBlock::Y => "y",
            ToyBlock::Z => "z",
            ToyBlock::V => "v",
            ToyBlock::W => "w",
            ToyBlock::U => "u",
        }
    }
}

/// Transaction carried by the block of the same name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ToyTx {
    Rho,
    X,
    Y,
    Z,
    V,
    W,
    U,
}

impl ToyTx {
    pub fn name(self) -> &'static str {
        match self {
            ToyTx::Rho => "rho_tx",
            ToyTx::X => "x_tx",
            ToyTx::Y => "y_tx",
            ToyTx::Z => "z_tx",
            ToyTx::V => "v_tx",
            ToyTx::W => "w_tx",
            ToyTx::U => "u_tx",
        }
    }
}

/// Fixture variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyVariant {
    Stock,
    /// w block-references z instead of transaction-referencing it.
    FlippedW,
    /// Block v is never issued.
    WithoutV,
}

#[derive(Debug, Clone)]
pub struct Toy {
    pub view: VotingView,
    next_output: u16,
    next_id: u64,
}

fn block_id(b: ToyBlock) -> BlockId {
    BlockId(mix64(0x70 + b as u64))
}

fn tx_id(t: ToyTx) -> TransactionId {
    TransactionId(mix64(0x170 + t as u64))
}

fn out(t: ToyTx, index: u16) -> OutputId {
    OutputId { tx: tx_id(t), index }
}

const GENESIS_OUTPUTS: u16 = 64;

impl Toy {
    pub const RED: NodeId = NodeId(0);
    pub const BLUE: NodeId = NodeId(1);
    pub const BROWN: NodeId = NodeId(2);
    pub const GREEN: NodeId = NodeId(3);
    pub const WEIGHTS: [f64; 4] = [0.3, 0.1, 0.2, 0.4];

    pub const WW_TABLE: [(ToyBlock, f64); 7] = [
        (ToyBlock::Rho, 1.0),
        (ToyBlock::X, 0.7),
        (ToyBlock::Y, 0.7),
        (ToyBlock::U, 0.3),
        (ToyBlock::Z, 0.7),
        (ToyBlock::W, 0.4),
        (ToyBlock::V, 0.1),
    ];

    pub const AW_TABLE: [(ToyTx, f64); 7] = [
        (ToyTx::Rho, 1.0),
        (ToyTx::X, 0.7),
        (ToyTx::Y, 0.3),
        (ToyTx::U, 0.3),
        (ToyTx::Z, 0.7),
        (ToyTx::W, 0.4),
        (ToyTx::V, 0.1),
    ];

    pub fn build() -> Self {
        Self::build_variant(ToyVariant::Stock, ToyBlock::ALL.len() - 1)
    }

    /// The first `n` blocks of the issuance order (after the genesis).
    pub fn build_prefix(n: usize) -> Self {
        Self::build_variant(ToyVariant::Stock, n)
    }

    pub fn build_variant(variant: ToyVariant, n: usize) -> Self {
        let weights = Arc::new(WeightTable::new(&Self::WEIGHTS).expect("valid weights"));
        let genesis_tx = Transaction {
            id: tx_id(ToyTx::Rho),
            inputs: vec![],
            outputs: (0..GENESIS_OUTPUTS).map(|i| Output { value: 1, owner: Owner::User(i as u32) }).collect(),
            issue_time: 0.0,
        };
        let genesis = Block { id: block_id(ToyBlock::Rho), references: vec![], transaction: genesis_tx.id, issuer: Self::RED, issue_time: 0.0 };
        let view = VotingView::new(Self::GREEN, genesis, genesis_tx, weights, DEFAULT_MAX_REFS);
        let mut toy = Toy { view, next_output: 2, next_id: 1000 };

        let rho = block_id(ToyBlock::Rho);
        let both = |b: ToyBlock| vec![Reference::block(block_id(b)); 2];
        let w_refs = match variant {
            ToyVariant::FlippedW => vec![Reference::block(block_id(ToyBlock::X)), Reference::block(block_id(ToyBlock::Z))],
            _ => vec![Reference::block(block_id(ToyBlock::X)), Reference::tx(block_id(ToyBlock::Z))],
        };
        let script: [(ToyBlock, NodeId, Vec<Reference>, Vec<OutputId>); 6] = [
            (ToyBlock::X, Self::RED, vec![Reference::block(rho); 2], vec![out(ToyTx::Rho, 0)]),
            (ToyBlock::Y, Self::BLUE, vec![Reference::block(rho); 2], vec![out(ToyTx::Rho, 0)]),
            (ToyBlock::Z, Self::BROWN, both(ToyBlock::Y), vec![out(ToyTx::Rho, 1)]),
            (ToyBlock::V, Self::BLUE, both(ToyBlock::Z), vec![out(ToyTx::Z, 0)]),
            (ToyBlock::W, Self::GREEN, w_refs, vec![out(ToyTx::X, 0)]),
            (ToyBlock::U, Self::RED, both(ToyBlock::X), vec![out(ToyTx::X, 0)]),
        ];
        for (step, (b, issuer, refs, inputs)) in script.into_iter().enumerate().take(n) {
            if variant == ToyVariant::WithoutV && b == ToyBlock::V {
                continue;
            }
            let t = Self::tx_of(b);
            let tx = Transaction {
                id: tx_id(t),
                inputs,
                outputs: vec![Output { value: 1, owner: Owner::Node(issuer) }],
                issue_time: step as f64 + 1.0,
            };
            let block = Block { id: block_id(b), references: refs, transaction: tx.id, issuer, issue_time: step as f64 + 1.0 };
            toy.view.receive(block, tx, step as f64 + 1.0).expect("fixture blocks are well formed");
        }
        toy
    }

    fn tx_of(b: ToyBlock) -> ToyTx {
        match b {
            ToyBlock::Rho => ToyTx::Rho,
            ToyBlock::X => ToyTx::X,
            ToyBlock::Y => ToyTx::Y,
            ToyBlock::Z => ToyTx::Z,
            ToyBlock::V => ToyTx::V,
            ToyBlock::W => ToyTx::W,
            ToyBlock::U => ToyTx::U,
        }
    }

    pub fn block(&self, b: ToyBlock) -> BlockId {
        block_id(b)
    }

    pub fn tx(&self, t: ToyTx) -> TransactionId {
        tx_id(t)
    }

    /// Issues a block with the given references carrying a fresh transaction
    /// that spends an unused genesis output.
    pub fn issue(&mut self, issuer: NodeId, references: Vec<Reference>) -> ReceiveOutcome {
        let now = 10.0 + self.next_id as f64;
        let tx = Transaction {
            id: TransactionId(mix64(self.next_id)),
            inputs: vec![out(ToyTx::Rho, self.next_output)],
            outputs: vec![Output { value: 1, owner: Owner::Node(issuer) }],
            issue_time: now,
        };
        let block = Block { id: BlockId(mix64(self.next_id ^ 0xb10c)), references, transaction: tx.id, issuer, issue_time: now };
        self.next_output += 1;
        self.next_id += 1;
        self.view.receive(block, tx, now).expect("fresh block is well formed")
    }

    /// Brown attaches a new block to w with a block reference.
    pub fn brown_revote(&mut self) -> ReceiveOutcome {
        let w = block_id(ToyBlock::W);
        self.issue(Self::BROWN, vec![Reference::block(w); 2])
    }

    pub fn ww(&self, b: ToyBlock) -> f64 {
        self.view.tangle().witness_weight(block_id(b)).unwrap_or(f64::NAN)
    }

    pub fn aw(&self, t: ToyTx) -> f64 {
        self.view.approval_weight(tx_id(t)).unwrap_or(f64::NAN)
    }

    /// Reality selected with Approval Weight restricted to the conflicts.
    pub fn reality(&self) -> BTreeSet<TransactionId> {
        let g = ConflictGraph::from_ledger(self.view.ledger());
        let w = self.view.conflict_weight_fn().dense(&g);
        select_reality(&g, &w).branch
    }
}

/// One line of the fixture verification.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCheck {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

/// Tolerance used for weight comparisons: sums of binary fractions such as
/// 0.1 + 0.2 + 0.4 differ from the literal 0.7 in the last bit.
pub const TOY_TOLERANCE: f64 = 1e-12;

fn weight_check(name: String, expected: f64, actual: f64) -> ToyCheck {
    ToyCheck {
        name,
        expected: format!("{expected}"),
        actual: format!("{actual:.12}"),
        pass: (expected - actual).abs() <= TOY_TOLERANCE,
    }
}

/// Checks every published value of the fixture: both tables, the reality and
/// the effect of brown's re-vote.
pub fn verify_toy() -> Vec<ToyCheck> {
    let toy = Toy::build();
    let mut checks = Vec::new();
    for (b, want) in Toy::WW_TABLE {
        checks.push(weight_check(format!("WW({})", b.name()), want, toy.ww(b)));
    }
    for (t, want) in Toy::AW_TABLE {
        checks.push(weight_check(format!("AW({})", t.name()), want, toy.aw(t)));
    }
    let want: BTreeSet<TransactionId> = [toy.tx(ToyTx::X), toy.tx(ToyTx::W)].into();
    let got = toy.reality();
    let names = |s: &BTreeSet<TransactionId>| {
        let mut v: Vec<&str> = s
            .iter()
            .map(|id| {
                [ToyTx::Rho, ToyTx::X, ToyTx::Y, ToyTx::Z, ToyTx::V, ToyTx::W, ToyTx::U]
                    .into_iter()
                    .find(|&t| tx_id(t) == *id)
                    .map(|t| t.name())
                    .unwrap_or("?")
            })
            .collect();
        v.sort_unstable();
        format!("{{{}}}", v.join(", "))
    };
    checks.push(ToyCheck { name: "reality".into(), expected: names(&want), actual: names(&got), pass: got == want });
    let mut revote = toy.clone();
    revote.brown_revote();
    checks.push(weight_check("AW(y_tx) after brown re-vote".into(), 0.1, revote.aw(ToyTx::Y)));
    checks.push(weight_check("AW(x_tx) after brown re-vote".into(), 0.9, revote.aw(ToyTx::X)));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_fixture_passes() {
        let checks = verify_toy();
        assert_eq!(checks.len(), 17);
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn witness_weight_table() {
        let toy = Toy::build();
        for (b, want) in Toy::WW_TABLE {
            assert!((toy.ww(b) - want).abs() <= TOY_TOLERANCE, "{b:?}");
        }
        // Green witnesses y through w's transaction reference to z.
        assert!(toy.view.tangle().block_supporters(toy.block(ToyBlock::Y)).unwrap().contains(&Toy::GREEN));
    }

    #[test]
    fn flipped_reference_is_detected() {
        let toy = Toy::build_variant(ToyVariant::FlippedW, 6);
        // w would vote for both x̄ and ȳ: its voting branch is invalid, so it
        // contributes no votes at all and the AW table no longer matches.
        assert!(!toy.view.voting_branch(toy.block(ToyBlock::W)).unwrap().valid);
        assert!((toy.aw(ToyTx::W) - 0.0).abs() <= TOY_TOLERANCE);
        assert!((toy.aw(ToyTx::Z) - 0.3).abs() <= TOY_TOLERANCE);
        let mismatch = Toy::AW_TABLE.iter().any(|&(t, want)| (toy.aw(t) - want).abs() > TOY_TOLERANCE);
        assert!(mismatch);
        // Witness Weight is unaffected by reference labels.
        for (b, want) in Toy::WW_TABLE {
            assert!((toy.ww(b) - want).abs() <= TOY_TOLERANCE, "{b:?}");
        }
    }

    #[test]
    fn fixture_without_v() {
        let toy = Toy::build_variant(ToyVariant::WithoutV, 6);
        assert!((toy.ww(ToyBlock::Y) - 0.7).abs() <= TOY_TOLERANCE);
        assert!((toy.aw(ToyTx::Z) - 0.6).abs() <= TOY_TOLERANCE);
    }

    #[test]
    fn verification_is_fast() {
        let start = std::time::Instant::now();
        verify_toy();
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }
}
