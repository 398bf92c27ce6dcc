use proptest::prelude::*;
use qmine::strategy::{StrategyKind, TimestampPolicy, SECOND};
use qmine::tiebreak::TieBreakRule;
use qmine_cli::config::*;
use qmine_cli::duration::Minutes;

const MIXED: &str = include_str!("data/mixed.toml");

#[test]
fn example_round_trips() {
    let cfg = RunConfig::from_toml(MIXED).unwrap();
    let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn example_expands_roster() {
    let cfg = RunConfig::from_toml(MIXED).unwrap();
    let sim = cfg.to_sim_config().unwrap();
    assert_eq!(sim.miners.len(), 12);
    assert_eq!(sim.miners[5].strategy, StrategyKind::QuantumAggressive);
    assert_eq!(sim.miners[6].timestamp_policy, TimestampPolicy::CommitStart);
    assert_eq!(sim.miners[10].strategy, StrategyKind::ClassicalPeaceful);
    let m = &sim.miners[11];
    assert_eq!(m.miner_id.0, 11);
    assert_eq!(m.timestamp_policy, TimestampPolicy::MalloryOffset { offset: SECOND });
    assert_eq!(sim.calibration.t, 3.0);
    assert!((sim.calibration.t_iteration - SECOND).abs() < 1e-15);
    assert_eq!(sim.tie_break_rule, TieBreakRule::NewPenalty);
}

fn path_of(doc: &str) -> String {
    RunConfig::from_toml(doc).and_then(|c| c.to_sim_config()).unwrap_err().path
}

#[test]
fn errors_name_the_field() {
    assert_eq!(path_of(&MIXED.replace("t = \"3min\"", "t = \"10min\"")), "calibration.t");
    assert_eq!(path_of(&MIXED.replace("t = \"3min\"", "t = \"12min\"")), "calibration.t");
    assert_eq!(path_of(&MIXED.replace("replications = 2", "replications = 0")), "replications");
    assert_eq!(path_of(&MIXED.replace("n_miners = 12", "n_miners = 13")), "miners");
    assert_eq!(path_of(&MIXED.replace("target_victim = 0", "target_victim = 40")), "miners[3].target_victim");
    assert_eq!(path_of(&MIXED.replace("min = 100, max = 260", "min = 300, max = 260")), "miners[0].q_distribution");
    assert_eq!(path_of(&MIXED.replace("d = \"1s\"", "d = \"-1s\"")), "network.delay_model.d");
    // times need a unit
    assert_eq!(path_of(&MIXED.replace("t = \"3min\"", "t = 3")), "config");
    assert_eq!(path_of(&MIXED.replace("\"new_penalty\"", "\"longest\"")), "config");
    // n = 1 cannot reach λ(9 min) ≈ 2.3 successes per epoch
    let lone = MIXED
        .replace("n_miners = 12", "n_miners = 1")
        .replace("t = \"3min\"", "t = \"9min\"");
    let lone = lone.split("[[miners]]").next().unwrap();
    assert_eq!(path_of(lone), "calibration.t");
}

fn doc() -> impl Strategy<Value = RunConfig> {
    (
        1usize..20,
        prop::sample::select(TieBreakRule::ALL.to_vec()),
        1usize..200,
        any::<u64>(),
        0.0f64..1.0,
        (0.01f64..9.9, 1u64..100_000),
        any::<bool>(),
    )
        .prop_map(|(replications, rule, n, seed, d, (t, blocks), trace)| RunConfig {
            replications,
            tie_break_rule: rule,
            network: NetworkSection {
                n_miners: n,
                topology: Default::default(),
                delay_model: DelaySection::Constant { d: Minutes(d) },
                horizon: HorizonSection::MainChainBlocks { blocks },
                seed,
            },
            calibration: CalibrationSection {
                t: Minutes(t),
                block_interval: Minutes(10.0),
                t_iteration: Minutes(t / 100.0),
            },
            miners: vec![
                RosterEntry {
                    count: n,
                    strategy: StrategyKind::QuantumAggressive,
                    q_distribution: None,
                    timestamp_policy: None,
                    target_victim: None,
                    mallory_find: None,
                    p_full: Some(d),
                },
            ],
            output: OutputSection {
                format: if trace { Format::Json } else { Format::Csv },
                path: None,
                emit_trace: trace,
            },
            restart_delay: Minutes(d / 3.0),
            aggressive_on_tie: !trace,
        })
}

proptest! {
    #[test]
    fn serialization_round_trips(cfg in doc()) {
        let text = cfg.to_toml();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
