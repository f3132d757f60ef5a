//! End-to-end scenarios on small networks.

use otv_netsim::{run, safety_partition, ConfigError, SimConfig};

fn small(extra: &str) -> SimConfig {
    let text = format!(
        "nodes = 20\nhorizon = 20.0\nlambda = 40.0\n{extra}\n[metrics]\nwarmup = 2.0\nconfirmation_window = 8.0\n"
    );
    SimConfig::from_toml(&text).expect("valid config")
}

#[test]
fn same_seed_gives_identical_reports() {
    let cfg = small("seed = 7");
    let a = run(cfg.clone()).unwrap();
    let b = run(cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_seeds_differ() {
    let a = run(small("seed = 1")).unwrap();
    let b = run(small("seed = 2")).unwrap();
    assert_ne!(a.blocks, b.blocks);
}

#[test]
fn honest_network_confirms_everything_without_conflicts() {
    let r = run(small("")).unwrap();
    assert_eq!(r.contested_transactions, 0);
    assert!(r.conflicts.is_empty());
    assert!(r.broken_safety.is_empty());
    assert_eq!(r.confirmation.censored, 0, "{:?}", r.confirmation);
    let median = r.confirmation.median.unwrap();
    assert!(median > 0.0 && median < 8.0, "median {median}");
    assert!(r.tip_pool_mean > 1.0);
    assert_eq!(r.network.unanswered_requests, 0);
}

#[test]
fn public_double_spend_is_resolved() {
    let r = run(small("[adversary]\nkind = \"double-spend\"\nat = 4.0")).unwrap();
    assert_eq!(r.contested_transactions, 2);
    assert_eq!(r.conflicts.len(), 1);
    assert!(r.consensus, "{:?}", r.conflicts);
    assert!(r.broken_safety.is_empty());
}

#[test]
fn ww_growth_stays_under_the_bound() {
    let r = run(small("")).unwrap();
    assert!(!r.ww_growth.is_empty());
    for p in &r.ww_growth {
        assert!(p.simulated <= p.bound + 0.05, "{p:?}");
    }
}

const META_I: &str = "nodes = 4\nhorizon = 13.0\nrelay = false\ntheta = 0.8\n\
    [topology]\nkind = \"complete\"\n[delay]\nkind = \"adversary-controlled\"\nh = 0.1\n\
    [adversary]\nkind = \"metastability-i\"\ndelta = 0.3\ngamma = 1.0\nrounds = 12\n\
    [metrics]\nwarmup = 0.0\nconfirmation_window = 0.0\n";

#[test]
fn metastability_i_inverts_every_round() {
    let r = run(SimConfig::from_toml(META_I).unwrap()).unwrap();
    let m = r.adversary.metastability.expect("metastability report");
    assert_eq!(m.preferences[0], vec!['x', 'x', 'y', 'y']);
    assert_eq!(m.preferences[1], vec!['y', 'y', 'x', 'x']);
    assert!(m.exact_inversion_at_first_round);
    assert_eq!(m.sustained_rounds, 12);
    assert!(!r.consensus);
}

#[test]
fn metastability_i_rejects_other_topologies() {
    let text = META_I.replace("relay = false", "relay = true").replace("kind = \"complete\"", "kind = \"watts-strogatz\"\nneighbours = 2\nrewiring = 0.0");
    let cfg = SimConfig::from_toml(&text).unwrap();
    let err = run(cfg).unwrap_err();
    assert!(matches!(err, ConfigError::WrongFixture(_)), "{err}");
}

#[test]
fn srrs_ends_the_metastability_i_deadlock() {
    let text = META_I.replace("horizon = 13.0", "horizon = 20.0").replace("rounds = 12", "rounds = 19")
        + "[srrs]\nenabled = true\nepoch = 5.0\njitter = 0.5\n";
    let r = run(SimConfig::from_toml(&text).unwrap()).unwrap();
    assert!(r.consensus, "{:?}", r.conflicts);
    assert!(r.broken_safety.is_empty());
}

const SAFETY: &str = "nodes = 100\nhorizon = 30.0\nrelay = false\n\
    [topology]\nkind = \"complete\"\n[metrics]\nobservers = 1\n[adversary]\nkind = \"safety-breaker\"\n";

#[test]
fn safety_breaker_needs_a_feasible_partition() {
    let plan = safety_partition(0.2, 2.0 / 3.0, 100).unwrap();
    assert_eq!(plan.feasible, vec![59, 60, 61, 62]);
    let r = run(SimConfig::from_toml(&format!("{SAFETY}q = 0.2")).unwrap()).unwrap();
    assert!(!r.broken_safety.is_empty(), "{:?}", r.adversary);

    assert!(safety_partition(0.1, 2.0 / 3.0, 100).is_err());
    let r = run(SimConfig::from_toml(&format!("{SAFETY}q = 0.1")).unwrap()).unwrap();
    assert!(r.broken_safety.is_empty());
    assert!(r.adversary.partition.as_ref().is_none_or(|p| p.n_star.is_none()));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(SimConfig::from_toml("nodes = 0").unwrap().validate().is_err());
    assert!(SimConfig::from_toml("theta = 0.4").unwrap().validate().is_err());
    assert!(SimConfig::from_toml("bogus = 1").is_err());
}
