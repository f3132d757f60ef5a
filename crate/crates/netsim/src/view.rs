//! Per-node state: which blocks have arrived, solidification, tips, the
//! supporter bookkeeping of contested transactions and (for observers) the
//! Witness Weight of every block.
//!
//! Weights are handled in fixed point ([`WEIGHT_SCALE`]) so that Approval
//! and Witness Weight sums are exact and independent of the order in which
//! votes arrive; exact ties between conflicts therefore stay ties.

use crate::arena::{Arena, BlockIx, TxIx};
use otv_core::utxo_ledger::TransactionId;
use otv_core::NodeId;
use std::collections::{BTreeSet, HashMap};

/// Fixed-point scale for weights: `w ↦ round(w·2^52)`.
pub const WEIGHT_SCALE: f64 = (1u64 << 52) as f64;

pub fn quantize_weights(w: &[f64]) -> Vec<u64> {
    w.iter().map(|x| (x * WEIGHT_SCALE).round() as u64).collect()
}

pub fn to_fraction(q: u64) -> f64 {
    q as f64 / WEIGHT_SCALE
}

const UNKNOWN: u8 = 0;
const REQUESTED: u8 = 1;
const PENDING: u8 = 2;
const SOLID: u8 = 3;

/// Read-only context for processing a block.
pub struct Ctx<'a> {
    pub arena: &'a Arena,
    pub weights: &'a [u64],
    pub theta: f64,
    pub now: f64,
}

/// Buffers filled by [`View::receive`].
#[derive(Debug, Default)]
pub struct Arrival {
    /// Newly solid blocks with the peer that sent them.
    pub solid: Vec<(BlockIx, u32)>,
    /// Missing parents to request from the sender.
    pub requests: Vec<BlockIx>,
    /// Contested transactions that crossed θ for the first time.
    pub confirmed: Vec<TxIx>,
    /// Some approval weight changed.
    pub votes_changed: bool,
    pub duplicate: bool,
}

impl Arrival {
    pub fn clear(&mut self) {
        self.solid.clear();
        self.requests.clear();
        self.confirmed.clear();
        self.votes_changed = false;
        self.duplicate = false;
    }
}

/// Witness Weight bookkeeping of an observer node.
#[derive(Debug, Clone)]
pub struct WwTracker {
    words: usize,
    bits: Vec<u64>,
    ww: Vec<u64>,
    /// First time WW ≥ θ (NaN while unconfirmed).
    pub confirmed: Vec<f64>,
    /// Solidification time (NaN while not solid).
    pub solid_time: Vec<f64>,
    stack: Vec<BlockIx>,
}

impl WwTracker {
    fn new(n_nodes: usize) -> Self {
        Self { words: n_nodes.div_ceil(64), bits: vec![], ww: vec![], confirmed: vec![], solid_time: vec![], stack: vec![] }
    }

    fn ensure(&mut self, len: usize) {
        if self.ww.len() < len {
            let len = len.next_power_of_two();
            self.bits.resize(len * self.words, 0);
            self.ww.resize(len, 0);
            self.confirmed.resize(len, f64::NAN);
            self.solid_time.resize(len, f64::NAN);
        }
    }

    /// Adds the issuer of the newly solid block `b` to the supporters of `b`
    /// and of every unconfirmed ancestor. A supporter of a block supports all
    /// its ancestors and an ancestor of a confirmed block is confirmed, so the
    /// walk stops at blocks already carrying the issuer or already confirmed.
    fn on_solid(&mut self, ctx: &Ctx<'_>, b: BlockIx, theta_q: u64) {
        self.ensure(b as usize + 1);
        self.solid_time[b as usize] = ctx.now;
        let j = ctx.arena.block(b).issuer.index();
        let (word, mask) = (j / 64, 1u64 << (j % 64));
        let wj = ctx.weights[j];
        self.stack.clear();
        self.stack.push(b);
        while let Some(x) = self.stack.pop() {
            let xi = x as usize;
            if x == Arena::GENESIS || !self.confirmed[xi].is_nan() {
                continue;
            }
            let slot = &mut self.bits[xi * self.words + word];
            if *slot & mask != 0 {
                continue;
            }
            *slot |= mask;
            self.ww[xi] += wj;
            if self.ww[xi] >= theta_q {
                self.confirmed[xi] = ctx.now;
            }
            self.stack.extend_from_slice(&ctx.arena.block(x).parents);
        }
    }

    pub fn witness_weight(&self, b: BlockIx) -> f64 {
        self.ww.get(b as usize).map(|&w| to_fraction(w)).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct View {
    pub node: NodeId,
    n_nodes: usize,
    state: Vec<u8>,
    waiting: HashMap<BlockIx, Vec<BlockIx>>,
    missing: HashMap<BlockIx, u32>,
    sender: HashMap<BlockIx, u32>,
    tips: Vec<BlockIx>,
    pub solid_count: usize,
    known: Vec<Option<f64>>,
    local_conflict: Vec<Option<f64>>,
    vote_time: Vec<Vec<f64>>,
    vote_for: Vec<Vec<bool>>,
    aw: Vec<u64>,
    confirmed_at: Vec<Option<f64>>,
    /// Currently preferred reality.
    pub reality: BTreeSet<TransactionId>,
    /// Last beacon value in use (SRRS).
    pub coin: f64,
    pub own_last: Option<BlockIx>,
    pub ww: Option<WwTracker>,
}

impl View {
    pub fn new(node: NodeId, n_nodes: usize, observer: bool) -> Self {
        Self {
            node,
            n_nodes,
            state: vec![],
            waiting: HashMap::new(),
            missing: HashMap::new(),
            sender: HashMap::new(),
            tips: vec![],
            solid_count: 0,
            known: vec![],
            local_conflict: vec![],
            vote_time: vec![],
            vote_for: vec![],
            aw: vec![],
            confirmed_at: vec![],
            reality: BTreeSet::new(),
            coin: 0.0,
            own_last: None,
            ww: observer.then(|| WwTracker::new(n_nodes)),
        }
    }

    fn ensure(&mut self, len: usize) {
        if self.state.len() < len {
            self.state.resize(len.next_power_of_two(), UNKNOWN);
        }
    }

    /// Grows the supporter tables to `n` contested transactions.
    pub fn sync_contested(&mut self, n: usize) {
        while self.aw.len() < n {
            self.known.push(None);
            self.local_conflict.push(None);
            self.vote_time.push(vec![f64::NEG_INFINITY; self.n_nodes]);
            self.vote_for.push(vec![false; self.n_nodes]);
            self.aw.push(0);
            self.confirmed_at.push(None);
        }
    }

    pub fn is_solid(&self, b: BlockIx) -> bool {
        self.state.get(b as usize).copied() == Some(SOLID)
    }

    pub fn has_received(&self, b: BlockIx) -> bool {
        self.state.get(b as usize).map(|&s| s >= PENDING).unwrap_or(false)
    }

    pub fn tips(&self) -> &[BlockIx] {
        &self.tips
    }

    pub fn pending_count(&self) -> usize {
        self.missing.len()
    }

    pub fn knows(&self, t: TxIx) -> bool {
        self.known.get(t as usize).map(|k| k.is_some()).unwrap_or(false)
    }

    /// Time at which this node learned that `t` is a conflict.
    pub fn conflict_since(&self, t: TxIx) -> Option<f64> {
        self.local_conflict.get(t as usize).copied().flatten()
    }

    pub fn approval_weight(&self, t: TxIx) -> f64 {
        self.aw.get(t as usize).map(|&w| to_fraction(w)).unwrap_or(0.0)
    }

    pub fn confirmed_at(&self, t: TxIx) -> Option<f64> {
        self.confirmed_at.get(t as usize).copied().flatten()
    }

    pub fn supports(&self, t: TxIx, j: usize) -> bool {
        self.vote_for.get(t as usize).map(|v| v[j]).unwrap_or(false)
    }

    /// Marks the genesis (or a pre-installed block) solid without a sender.
    pub fn install(&mut self, ctx: &Ctx<'_>, b: BlockIx, theta_q: u64, out: &mut Arrival) {
        self.ensure(ctx.arena.len());
        if self.state[b as usize] >= PENDING {
            return;
        }
        self.state[b as usize] = PENDING;
        self.solidify_from(ctx, b, u32::MAX, theta_q, out);
    }

    /// Handles an incoming block from `from`.
    pub fn receive(&mut self, ctx: &Ctx<'_>, b: BlockIx, from: u32, theta_q: u64, out: &mut Arrival) {
        self.ensure(ctx.arena.len());
        if self.state[b as usize] >= PENDING {
            out.duplicate = true;
            return;
        }
        self.state[b as usize] = PENDING;
        let mut missing = 0u32;
        for &p in &ctx.arena.block(b).parents {
            let s = self.state[p as usize];
            if s == SOLID {
                continue;
            }
            missing += 1;
            self.waiting.entry(p).or_default().push(b);
            if s == UNKNOWN {
                self.state[p as usize] = REQUESTED;
                out.requests.push(p);
            }
        }
        if missing > 0 {
            self.missing.insert(b, missing);
            self.sender.insert(b, from);
            return;
        }
        self.solidify_from(ctx, b, from, theta_q, out);
    }

    fn solidify_from(&mut self, ctx: &Ctx<'_>, b: BlockIx, from: u32, theta_q: u64, out: &mut Arrival) {
        let mut queue = vec![(b, from)];
        while let Some((x, src)) = queue.pop() {
            self.solidify(ctx, x, theta_q, out);
            out.solid.push((x, src));
            if let Some(children) = self.waiting.remove(&x) {
                for c in children {
                    let m = self.missing.get_mut(&c).expect("waiting child is pending");
                    *m -= 1;
                    if *m == 0 {
                        self.missing.remove(&c);
                        let s = self.sender.remove(&c).unwrap_or(u32::MAX);
                        queue.push((c, s));
                    }
                }
            }
        }
    }

    fn solidify(&mut self, ctx: &Ctx<'_>, b: BlockIx, theta_q: u64, out: &mut Arrival) {
        self.state[b as usize] = SOLID;
        self.solid_count += 1;
        let rec = ctx.arena.block(b);
        for p in &rec.parents {
            if let Some(pos) = self.tips.iter().position(|t| t == p) {
                self.tips.swap_remove(pos);
            }
        }
        self.tips.push(b);
        if let Some(ww) = self.ww.as_mut() {
            ww.on_solid(ctx, b, theta_q);
        }
        if let Some(t) = rec.contested {
            if self.learn(ctx, t) {
                out.votes_changed = true;
            }
        }
        if b == Arena::GENESIS || !rec.valid {
            return;
        }
        let j = rec.issuer.index();
        for &t in &rec.cone {
            self.set_vote(ctx, t, j, rec.issue_time, true, theta_q, out);
        }
        for &t in &rec.against {
            self.set_vote(ctx, t, j, rec.issue_time, false, theta_q, out);
        }
    }

    /// Records that `t` is known; returns whether a new local conflict appeared.
    fn learn(&mut self, ctx: &Ctx<'_>, t: TxIx) -> bool {
        self.sync_contested(ctx.arena.contested.len());
        if self.known[t as usize].is_some() {
            return false;
        }
        self.known[t as usize] = Some(ctx.now);
        let mut fresh = false;
        for &d in &ctx.arena.partners[t as usize] {
            if self.known[d as usize].is_some() {
                for x in [t, d] {
                    if self.local_conflict[x as usize].is_none() {
                        self.local_conflict[x as usize] = Some(ctx.now);
                        fresh = true;
                    }
                }
            }
        }
        fresh
    }

    /// Latest-issued vote wins per (transaction, issuer); equal times are
    /// resolved in favour of the later-processed block.
    #[allow(clippy::too_many_arguments)]
    fn set_vote(&mut self, ctx: &Ctx<'_>, t: TxIx, j: usize, time: f64, support: bool, theta_q: u64, out: &mut Arrival) {
        let ti = t as usize;
        if time < self.vote_time[ti][j] {
            return;
        }
        self.vote_time[ti][j] = time;
        if self.vote_for[ti][j] == support {
            return;
        }
        self.vote_for[ti][j] = support;
        if support {
            self.aw[ti] += ctx.weights[j];
        } else {
            self.aw[ti] -= ctx.weights[j];
        }
        out.votes_changed = true;
        if self.aw[ti] > theta_q && self.confirmed_at[ti].is_none() {
            self.confirmed_at[ti] = Some(ctx.now);
            out.confirmed.push(t);
        }
    }

    /// Contested transactions in `cone` that this node knows to be conflicts.
    pub fn local_branch(&self, arena: &Arena, cone: &[TxIx]) -> BTreeSet<TransactionId> {
        cone.iter().filter(|&&t| self.conflict_since(t).is_some()).map(|&t| arena.contested[t as usize].id).collect()
    }
}

/// Strict threshold in fixed point: `aw > theta_q` ⇔ `aw/2^52 > θ` up to rounding.
pub fn theta_fixed(theta: f64) -> u64 {
    (theta * WEIGHT_SCALE).floor() as u64
}
