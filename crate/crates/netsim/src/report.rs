//! Turns the final simulator state into a [`RunReport`].

use crate::arena::{Arena, BlockIx, TxIx};
use crate::engine::{tx_label, Sim};
use crate::metrics::{ConflictOutcome, Quantiles, RunReport, SafetyEvent, WwGrowthPoint};
use otv_core::analytics::ww_growth_bound;

/// Offsets (seconds after issuance) at which WW growth is evaluated.
const GROWTH_STEP: f64 = 0.25;
const GROWTH_MAX: f64 = 10.0;

pub(crate) fn build(sim: &Sim) -> RunReport {
    let cfg = &sim.cfg;
    let arena = &sim.arena;
    let horizon = cfg.horizon;
    let warmup = cfg.metrics.warmup;
    let window_end = horizon - cfg.metrics.confirmation_window;
    let in_window = |b: BlockIx| {
        let t = arena.block(b).issue_time;
        b != Arena::GENESIS && t >= warmup && t <= window_end
    };
    let sampled: Vec<BlockIx> = (0..arena.len() as BlockIx).filter(|&b| in_window(b)).collect();

    let mut conf = Vec::new();
    for &o in &sim.observers {
        let ww = sim.views[o as usize].ww.as_ref().expect("observer tracks WW");
        for &b in &sampled {
            let c = ww.confirmed.get(b as usize).copied().unwrap_or(f64::NAN);
            conf.push(if c.is_nan() { f64::INFINITY } else { c - arena.block(b).issue_time });
        }
    }

    let pool: Vec<f64> = sim.samples.iter().filter(|s| s.t >= warmup).map(|s| s.tip_pool).collect();
    let tip_pool_mean = if pool.is_empty() { 0.0 } else { pool.iter().sum::<f64>() / pool.len() as f64 };

    let honest_blocks = (1..arena.len()).filter(|&b| sim.is_honest(arena.blocks[b].issuer.0)).count();
    let orphaned_blocks = sampled
        .iter()
        .filter(|&&b| sim.is_honest(arena.block(b).issuer.0) && arena.children[b as usize].is_empty())
        .count();

    let (conflicts, consensus) = conflict_outcomes(sim);
    let broken_safety = safety_events(sim);
    let mut warnings = Vec::new();
    if !arena.contested.is_empty() && !conflicts.is_empty() && conflicts.iter().all(|c| c.consensus_time.is_none()) {
        warnings.push("HorizonTooShort: no conflict set reached consensus before the horizon".to_string());
    }
    if sampled.is_empty() {
        warnings.push("HorizonTooShort: no blocks inside the confirmation window".to_string());
    }

    RunReport {
        seed: cfg.seed,
        nodes: cfg.nodes,
        horizon,
        blocks: arena.len() - 1,
        honest_blocks,
        contested_transactions: arena.contested.len(),
        confirmation: Quantiles::from_samples(conf),
        tip_pool_mean,
        ww_growth: ww_growth(sim, &sampled),
        conflicts,
        consensus,
        broken_safety,
        orphaned_blocks,
        network: sim.counters.clone(),
        adversary: sim.strategy_report(),
        warnings,
        opinions: sim.opinions.clone(),
        samples: sim.samples.clone(),
    }
}

/// Mean weight of distinct issuers of blocks in the future cone of a probe
/// block that the first observer had received `t` seconds after the probe
/// was issued, next to the analytic bound.
fn ww_growth(sim: &Sim, sampled: &[BlockIx]) -> Vec<WwGrowthPoint> {
    let arena = &sim.arena;
    let Some(ww) = sim.observers.first().and_then(|&o| sim.views[o as usize].ww.as_ref()) else { return vec![] };
    let span = sim.cfg.metrics.confirmation_window.min(GROWTH_MAX);
    let steps = (span / GROWTH_STEP).floor() as usize;
    if steps == 0 {
        return vec![];
    }
    let w = sim.weights.weights();
    let probes: Vec<BlockIx> = sampled
        .iter()
        .copied()
        .filter(|&b| sim.is_honest(arena.block(b).issuer.0))
        .step_by(sim.cfg.metrics.probe_every)
        .collect();
    if probes.is_empty() {
        return vec![];
    }
    let mut sums = vec![0.0; steps + 1];
    for &p in &probes {
        let t0 = arena.block(p).issue_time;
        let mut first = vec![f64::INFINITY; w.len()];
        for b in arena.future_cone(p) {
            let s = ww.solid_time.get(b as usize).copied().unwrap_or(f64::NAN);
            if !s.is_nan() {
                let j = arena.block(b).issuer.index();
                first[j] = first[j].min(s - t0);
            }
        }
        for (k, sum) in sums.iter_mut().enumerate() {
            let t = k as f64 * GROWTH_STEP;
            *sum += first.iter().zip(w).filter(|(f, _)| **f <= t).map(|(_, w)| w).sum::<f64>();
        }
    }
    sums.iter()
        .enumerate()
        .map(|(k, s)| {
            let t = k as f64 * GROWTH_STEP;
            WwGrowthPoint { t, simulated: s / probes.len() as f64, bound: ww_growth_bound(t, &sim.weights, sim.cfg.lambda) }
        })
        .collect()
}

fn conflict_outcomes(sim: &Sim) -> (Vec<ConflictOutcome>, bool) {
    let arena = &sim.arena;
    let honest = &sim.views[..sim.n_honest];
    let mut out = Vec::new();
    for set in arena.conflict_sets() {
        let mut created: Vec<f64> = set.iter().map(|&t| arena.contested[t as usize].created).collect();
        created.sort_by(f64::total_cmp);
        let created = created.get(1).copied().unwrap_or(created[0]);
        let mut best: Option<(f64, TxIx)> = None;
        for &t in &set {
            let all: Option<Vec<f64>> = honest.iter().map(|v| v.confirmed_at(t)).collect();
            if let Some(times) = all {
                let last = times.into_iter().fold(f64::NEG_INFINITY, f64::max);
                if best.is_none_or(|(b, _)| last < b) {
                    best = Some((last, t));
                }
            }
        }
        out.push(ConflictOutcome {
            members: set.iter().map(|&t| tx_label(t)).collect(),
            created,
            consensus_time: best.map(|(t, _)| (t - created).max(0.0)),
            winner: best.map(|(_, t)| tx_label(t)),
        });
    }
    let consensus = !out.is_empty() && out.iter().all(|c| c.consensus_time.is_some());
    (out, consensus)
}

/// Pairs of adjacent conflicts both confirmed by honest nodes.
fn safety_events(sim: &Sim) -> Vec<SafetyEvent> {
    let arena = &sim.arena;
    let first_confirm = |t: TxIx| -> Option<(f64, u32)> {
        (0..sim.n_honest as u32)
            .filter_map(|i| sim.views[i as usize].confirmed_at(t).map(|c| (c, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    let confirmed: Vec<(TxIx, f64, u32)> = arena
        .contested_of
        .iter()
        .filter_map(|&t| first_confirm(t).map(|(c, i)| (t, c, i)))
        .collect();
    let mut events = Vec::new();
    for (k, &(a, ta, na)) in confirmed.iter().enumerate() {
        for &(b, tb, nb) in &confirmed[k + 1..] {
            if arena.are_conflicting(a, b) {
                events.push(SafetyEvent { a: tx_label(a), b: tx_label(b), node_a: na, node_b: nb, time: ta.max(tb) });
            }
        }
    }
    events
}
