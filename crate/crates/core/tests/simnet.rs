use std::collections::HashMap;

use qmine::chain::{Block, BlockId, MinerId};
use qmine::simnet::*;
use qmine::strategy::{MinerSpec, QDistribution, StrategyKind, SECOND};
use qmine::tiebreak::TieBreakRule;

fn pqms(n: usize, t: f64, delay: DelayModel, blocks: u64, seed: u64) -> SimConfig {
    SimConfig::homogeneous(
        n,
        StrategyKind::QuantumPeaceful,
        TieBreakRule::FirstSeen,
        delay,
        Horizon::MainChainBlocks { blocks },
        Calibration::with_t(t),
        seed,
    )
}

#[test]
fn same_seed_same_run() {
    let cfg = pqms(50, 2.0, DelayModel::Constant { d: 0.05 }, 500, 11);
    let a = run_replication(&cfg).unwrap();
    let b = run_replication(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.network.seed = 12;
    assert_ne!(run_replication(&other).unwrap().trace_digest, a.trace_digest);
}

#[test]
fn single_miner_never_forks() {
    let r = run_replication(&pqms(1, 3.0, DelayModel::Zero, 200, 1)).unwrap();
    assert_eq!(r.stale_stats.stale_rate, 0.0);
    assert_eq!(r.stale_stats.main_chain_blocks, 200);
    assert_eq!(r.fork_events, 0);
}

#[derive(Default)]
struct Arrivals {
    created: HashMap<BlockId, (MinerId, f64)>,
    seen: Vec<(MinerId, BlockId, f64)>,
}

impl Observer for Arrivals {
    fn on_block(&mut self, b: &Block, _early: bool) {
        self.created.insert(b.id(), (b.miner().unwrap(), b.created_at()));
    }
    fn on_arrival(&mut self, node: MinerId, b: &Block, at: f64) {
        self.seen.push((node, b.id(), at));
    }
}

fn check_causality(cfg: &SimConfig) {
    let mut obs = Arrivals::default();
    run_replication_observed(cfg, &mut obs).unwrap();
    assert!(!obs.seen.is_empty());
    let delays = &cfg.network.delay_model;
    for &(node, id, at) in &obs.seen {
        let (from, created) = obs.created[&id];
        assert!(at >= created + delays.delay(from, node), "block {id} at node {node}");
    }
}

#[test]
fn arrivals_respect_delays() {
    check_causality(&pqms(30, 4.0, DelayModel::Constant { d: 0.2 }, 300, 5));
    let n = 12;
    let matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 0.01 * ((i * 7 + j * 3) % 11) as f64 }).collect())
        .collect();
    check_causality(&pqms(n, 4.0, DelayModel::PerEdge { matrix }, 300, 6));
}

#[test]
fn trace_is_consistent() {
    let mut cfg = pqms(40, 6.0, DelayModel::Constant { d: 0.1 }, 400, 9);
    cfg.emit_trace = true;
    let r = run_replication(&cfg).unwrap();
    assert_eq!(r.trace.len() as u64, r.stale_stats.total_blocks);
    assert_eq!(r.trace.iter().filter(|b| b.in_main_chain).count() as u64, r.stale_stats.main_chain_blocks);
    assert_eq!(r.per_miner_total_blocks.iter().sum::<u64>(), r.stale_stats.total_blocks);
    assert_eq!(r.per_miner_main_chain_blocks.iter().sum::<u64>(), r.stale_stats.main_chain_blocks);
    let by_id: HashMap<u64, _> = r.trace.iter().map(|b| (b.id, b)).collect();
    for b in &r.trace {
        let parent_height = by_id.get(&b.parent).map_or(0, |p| p.height);
        assert_eq!(b.height, parent_height + 1);
        // peaceful miners commit to the scheduled end of a completed run
        assert!((b.timestamp - b.created_at).abs() <= cfg.calibration.t_iteration);
    }
}

#[test]
fn aggressive_miners_measure_together() {
    // Spread run lengths so that miners fall out of lockstep.
    let roster = |strategy| {
        let mut cfg = pqms(50, 3.0, DelayModel::Constant { d: 0.1 }, 300, 0);
        for m in &mut cfg.miners {
            m.strategy = strategy;
            m.q_distribution = Some(QDistribution::Uniform { min: 150, max: 450 });
        }
        cfg
    };
    for seed in 0..4 {
        let mut p = roster(StrategyKind::QuantumPeaceful);
        p.network.seed = seed;
        let p = run_replication(&p).unwrap();
        let mut a = roster(StrategyKind::QuantumAggressive);
        a.network.seed = seed;
        let a = run_replication(&a).unwrap();
        assert!(a.measure_correlation >= p.measure_correlation, "seed {seed}");
        assert!(a.early_blocks > 0);
        assert_eq!(p.early_blocks, 0);
    }
}

#[test]
fn classical_network_hits_block_interval() {
    let mut cfg = pqms(20, 1.0, DelayModel::Zero, 3000, 3);
    cfg.miners.iter_mut().for_each(|m| m.strategy = StrategyKind::ClassicalPeaceful);
    let r = run_replication(&cfg).unwrap();
    // zero delay: simultaneous finds have probability zero
    assert_eq!(r.stale_stats.stale_rate, 0.0);
    // 3000 exponential gaps of mean 10: relative sd ≈ 1.8%
    let interval = r.end_time / r.stale_stats.main_chain_blocks as f64;
    assert!((interval - 10.0).abs() < 0.6, "{interval}");
}

#[test]
fn classical_stale_rate_with_delay() {
    // A block goes stale when a rival finds within d of it: ≈ 1 − e^{−d/I}.
    let d = 0.5;
    let mut cfg = pqms(20, 1.0, DelayModel::Constant { d }, 4000, 4);
    cfg.miners.iter_mut().for_each(|m| m.strategy = StrategyKind::ClassicalPeaceful);
    let r = run_replication(&cfg).unwrap();
    let expected = 1.0 - (-d / 10.0f64).exp();
    assert!((r.stale_stats.stale_rate - expected).abs() < 0.02, "{}", r.stale_stats.stale_rate);
}

#[test]
fn batch_rows_follow_sweep_and_seeds() {
    let base = pqms(20, 1.0, DelayModel::Zero, 100, 0);
    assert!(run_batch(&base, &[], 3, 7).unwrap().is_empty());
    assert!(run_batch(&base, &[SweepOverride::t(2.0)], 0, 7).is_err());

    let sweep = [SweepOverride::t(2.0), SweepOverride::t(5.0), SweepOverride::rule(TieBreakRule::NewPenalty)];
    let rows = run_batch(&base, &sweep, 3, 7).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].t, 2.0);
    assert_eq!(rows[1].t, 5.0);
    assert_eq!(rows[2].rule, TieBreakRule::NewPenalty);
    for (k, r) in rows[1].results.iter().enumerate() {
        let mut cfg = sweep[1].apply(&base);
        cfg.network.seed = 7 + k as u64;
        assert_eq!(r, &run_replication(&cfg).unwrap());
    }
    let mean = rows[1].results.iter().map(|r| r.stale_stats.stale_rate).sum::<f64>() / 3.0;
    assert!((rows[1].stale_rate_mean - mean).abs() < 1e-15);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = pqms(10, 1.0, DelayModel::Zero, 10, 0);
    cfg.calibration.t = 10.0;
    assert!(run_replication(&cfg).is_err());

    let mut cfg = pqms(10, 1.0, DelayModel::Zero, 10, 0);
    cfg.miners.pop();
    assert!(run_replication(&cfg).is_err());

    let mut cfg = pqms(3, 1.0, DelayModel::PerEdge { matrix: vec![vec![0.0; 2]; 2] }, 10, 0);
    assert!(run_replication(&cfg).is_err());
    cfg.network.delay_model = DelayModel::Constant { d: -1.0 };
    assert!(run_replication(&cfg).is_err());

    let mut cfg = pqms(3, 1.0, DelayModel::Zero, 10, 0);
    cfg.miners[1] = MinerSpec::mallory(MinerId(1), MinerId(7), SECOND);
    assert!(run_replication(&cfg).is_err());

    let mut cfg = pqms(3, 1.0, DelayModel::Zero, 10, 0);
    cfg.miners[0] = cfg.miners[0].clone().with_q(QDistribution::Uniform { min: 5, max: 4 });
    assert!(run_replication(&cfg).is_err());
}

#[test]
fn attack_under_each_rule() {
    for (rule, rate) in [
        (TieBreakRule::OldPenalty, 1.0),
        (TieBreakRule::NewPenalty, 0.0),
        (TieBreakRule::FirstSeen, 0.0),
    ] {
        let mut s = AttackScenario::new(rule);
        s.replications = 10;
        let report = run_attack(&s).unwrap();
        assert_eq!(report.success_rate, rate, "{rule}");
        for o in &report.outcomes {
            assert!(o.alice_block.is_some() && o.mallory_block.is_some());
            assert!((o.alice_delta.unwrap() - SECOND).abs() < 1e-9);
            // committed one second after Alice, delivered 1 + 100 + 1 seconds after her
            assert!((o.mallory_delta.unwrap() - 101.0 * SECOND).abs() < 1e-9);
        }
    }
}

#[test]
fn stochastic_mallory_runs() {
    let mut cfg = pqms(6, 2.0, DelayModel::Constant { d: SECOND }, 200, 2);
    cfg.miners[5] = MinerSpec::mallory(MinerId(5), MinerId(0), SECOND)
        .with_mallory_find(qmine::strategy::MalloryFind::Stochastic)
        .with_p_full(0.5);
    let r = run_replication(&cfg).unwrap();
    assert!(r.per_miner_total_blocks[5] > 0);
}
