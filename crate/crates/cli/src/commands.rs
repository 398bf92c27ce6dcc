use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qmine::analytics::{
    analytic_stale_rate, blocks_per_minute, double_spend_threshold, extension_probability, lambda_of_t,
    SyncModelParams,
};
use qmine::simnet::{
    run_attack, run_batch, AttackScenario, BatchRow, Calibration, DelayModel, Horizon, SimConfig, SimResult,
    SweepOverride,
};
use qmine::strategy::{StrategyKind, SECOND};
use qmine::tiebreak::TieBreakRule;

use crate::config::{Format, RunConfig};
use crate::output::*;
use crate::{AnalyticArgs, AttackArgs, Cli, CliError, Figure1Args};

fn runtime(e: qmine::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::from_toml(&text)?)
}

fn replication_row(cfg: &SimConfig, r: &SimResult) -> SimulateRow {
    SimulateRow {
        t: cfg.calibration.t,
        rule: cfg.tie_break_rule.to_string(),
        n: cfg.network.n_miners,
        replications: 1,
        stale_rate_mean: r.stale_stats.stale_rate,
        stale_rate_stderr: r.stale_stats.binomial_stderr(),
        fork_events: r.fork_events as f64,
        measure_correlation: r.measure_correlation,
    }
}

fn aggregate_row(row: &BatchRow) -> SimulateRow {
    SimulateRow {
        t: row.t,
        rule: row.rule.to_string(),
        n: row.n,
        replications: row.replications,
        stale_rate_mean: row.stale_rate_mean,
        stale_rate_stderr: row.stale_rate_stderr,
        fork_events: row.fork_events_mean,
        measure_correlation: row.measure_correlation_mean,
    }
}

fn trace_rows(r: &SimResult) -> Vec<TraceRow> {
    r.trace
        .iter()
        .map(|b| TraceRow {
            id: b.id,
            parent: b.parent,
            miner: b.miner,
            timestamp: b.timestamp,
            created_at: b.created_at,
            height: b.height,
            in_main_chain: b.in_main_chain,
        })
        .collect()
}

/// `out.csv` becomes `out.trace-3.csv` for replication 3.
pub fn trace_path(output: &Path, replication: usize) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.trace-{replication}.csv"))
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    replications: &'a [SimulateRow],
    aggregate: &'a SimulateRow,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    traces: Vec<Vec<TraceRow>>,
}

pub fn simulate(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let config = load_config(path)?;
    let mut base = config.to_sim_config()?;
    if let Some(seed) = cli.seed {
        base.network.seed = seed;
    }
    let format = cli.format.unwrap_or(config.output.format);
    let output = cli.output.clone().or_else(|| config.output.path.clone());
    if config.output.emit_trace && format == Format::Csv && output.is_none() {
        return Err(CliError::Validation(
            "output.path: block traces are written next to the output file, so a path is required".into(),
        ));
    }

    let rows = run_batch(&base, &[SweepOverride::default()], config.replications, base.network.seed)
        .map_err(runtime)?;
    let batch = &rows[0];
    let per_rep: Vec<SimulateRow> = batch.results.iter().map(|r| replication_row(&base, r)).collect();
    let aggregate = aggregate_row(batch);

    let mut sink = Sink::open(output.as_ref(), format)?;
    match format {
        Format::Csv => {
            let mut all = per_rep;
            all.push(aggregate);
            sink.csv(&SIMULATE_HEADER, &all)?;
            if config.output.emit_trace {
                let out = output.as_ref().expect("checked above");
                for (k, r) in batch.results.iter().enumerate() {
                    write_csv(create(&trace_path(out, k))?, &TRACE_HEADER, &trace_rows(r))?;
                }
            }
        }
        Format::Json => sink.json(&SimulateJson {
            replications: &per_rep,
            aggregate: &aggregate,
            traces: batch.results.iter().filter(|r| !r.trace.is_empty()).map(trace_rows).collect(),
        })?,
    }
    sink.finish()
}

fn invalid(e: qmine::Error) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn stale_rows(ts: &[f64], block_interval: f64) -> Result<Vec<StaleRow>, qmine::Error> {
    ts.iter()
        .map(|&t| {
            let p = SyncModelParams::new(block_interval, t)?;
            Ok(StaleRow {
                t,
                lambda: lambda_of_t(&p)?,
                extension_prob: extension_probability(&p)?,
                stale_rate: analytic_stale_rate(&p)?,
                blocks_per_minute: blocks_per_minute(&p)?,
            })
        })
        .collect()
}

pub fn analytic(cli: &Cli, a: &AnalyticArgs) -> Result<(), CliError> {
    let stale = stale_rows(&a.t, a.block_interval).map_err(invalid)?;
    let thresholds = a
        .p_stale
        .iter()
        .map(|&p| Ok(ThresholdRow { p_stale: p, threshold: double_spend_threshold(p)? }))
        .collect::<Result<Vec<_>, qmine::Error>>()
        .map_err(invalid)?;

    let mut sink = Sink::open(cli.output.as_ref(), cli.format.unwrap_or_default())?;
    match sink.format() {
        Format::Csv => {
            sink.csv(&STALE_HEADER, &stale)?;
            if !a.p_stale.is_empty() {
                sink.blank_line()?;
                sink.csv(&THRESHOLD_HEADER, &thresholds)?;
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Tables<'a> {
                stale: &'a [StaleRow],
                threshold: &'a [ThresholdRow],
            }
            sink.json(&Tables {
                stale: &stale,
                threshold: &thresholds,
            })?
        }
    }
    sink.finish()
}

/// The all-peaceful, zero-delay network behind the stale-rate curve.
pub fn figure1_config(a: &Figure1Args, seed: u64) -> SimConfig {
    SimConfig::homogeneous(
        a.n,
        StrategyKind::QuantumPeaceful,
        TieBreakRule::FirstSeen,
        DelayModel::Zero,
        Horizon::MainChainBlocks { blocks: a.blocks },
        Calibration::new(a.t_grid.first().copied().unwrap_or(1.0), a.block_interval, a.t_iteration),
        seed,
    )
}

pub fn figure1_rows(a: &Figure1Args, seed: u64) -> Result<Vec<Figure1Row>, CliError> {
    if a.replications == 0 {
        return Err(CliError::Validation("replications: must be at least 1".into()));
    }
    if a.n == 0 {
        return Err(CliError::Validation("n: must be at least 1".into()));
    }
    if a.blocks == 0 {
        return Err(CliError::Validation("blocks: must be at least 1".into()));
    }
    if !(a.t_iteration > 0.0) {
        return Err(CliError::Validation("t_iteration: must be positive".into()));
    }
    let mut analytic = Vec::with_capacity(a.t_grid.len());
    for &t in &a.t_grid {
        if !(t > 0.0 && t < a.block_interval) {
            return Err(CliError::Validation(format!(
                "t_grid: {t} lies outside (0, {})",
                a.block_interval
            )));
        }
        let p = SyncModelParams::new(a.block_interval, t).map_err(invalid)?;
        Calibration::new(t, a.block_interval, a.t_iteration)
            .quantum(a.n)
            .map_err(|e| CliError::Validation(format!("t_grid: {e}")))?;
        analytic.push(analytic_stale_rate(&p).map_err(invalid)?);
    }
    let base = figure1_config(a, seed);
    let sweep: Vec<SweepOverride> = a.t_grid.iter().map(|&t| SweepOverride::t(t)).collect();
    let rows = run_batch(&base, &sweep, a.replications, seed).map_err(runtime)?;
    Ok(rows
        .iter()
        .zip(analytic)
        .map(|(r, analytic)| Figure1Row {
            t: r.t,
            analytic,
            simulated_mean: r.stale_rate_mean,
            simulated_stderr: r.stale_rate_stderr,
        })
        .collect())
}

pub fn figure1(cli: &Cli, a: &Figure1Args) -> Result<(), CliError> {
    let rows = figure1_rows(a, cli.seed.unwrap_or(0))?;
    let mut sink = Sink::open(cli.output.as_ref(), cli.format.unwrap_or_default())?;
    match sink.format() {
        Format::Csv => sink.csv(&FIGURE1_HEADER, &rows)?,
        Format::Json => sink.json(&rows)?,
    }
    sink.finish()
}

pub fn attack(cli: &Cli, a: &AttackArgs) -> Result<(), CliError> {
    let mut scenario = AttackScenario::new(a.rule);
    scenario.victim_delay = a.victim_delay;
    scenario.mallory_delay = a.mallory_delay;
    scenario.mallory_offset = a.mallory_offset;
    scenario.observers = a.observers;
    scenario.replications = a.replications;
    scenario.seed = cli.seed.unwrap_or(0);
    let report = run_attack(&scenario).map_err(|e| match e {
        qmine::Error::InvalidParameter { .. } => invalid(e),
        e => runtime(e),
    })?;

    let mut sink = Sink::open(cli.output.as_ref(), cli.format.unwrap_or_default())?;
    match sink.format() {
        Format::Csv => {
            let rows: Vec<AttackRow> = report
                .outcomes
                .iter()
                .map(|o| AttackRow {
                    replication: o.replication,
                    seed: o.seed,
                    rule: report.rule.to_string(),
                    adopted: match (o.observers_on_mallory, o.observers_on_alice) {
                        (0, 0) => "none",
                        (_, 0) => "mallory",
                        (0, _) => "alice",
                        _ => "split",
                    }
                    .to_string(),
                    observers_on_mallory: o.observers_on_mallory,
                    observers_on_alice: o.observers_on_alice,
                    alice_delta_s: o.alice_delta.map(|d| d / SECOND),
                    mallory_delta_s: o.mallory_delta.map(|d| d / SECOND),
                    success: o.success,
                })
                .collect();
            sink.csv(&ATTACK_HEADER, &rows)?;
        }
        Format::Json => sink.json(&report)?,
    }
    sink.finish()?;
    eprintln!("rule={} success_rate={}", report.rule, report.success_rate);
    Ok(())
}
