use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_replication, DelayModel, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::tiebreak::TieBreakRule;

/// Parameters replaced at one sweep point; `None` keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break_rule: Option<TieBreakRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_model: Option<DelayModel>,
}

impl SweepOverride {
    pub fn t(t: f64) -> Self {
        Self {
            t: Some(t),
            ..Self::default()
        }
    }

    pub fn rule(rule: TieBreakRule) -> Self {
        Self {
            tie_break_rule: Some(rule),
            ..Self::default()
        }
    }

    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        if let Some(t) = self.t {
            cfg.calibration.t = t;
        }
        if let Some(rule) = self.tie_break_rule {
            cfg.tie_break_rule = rule;
        }
        if let Some(delay) = &self.delay_model {
            cfg.network.delay_model = delay.clone();
        }
        cfg
    }
}

/// Aggregate over the replications of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub point: usize,
    pub t: f64,
    pub rule: TieBreakRule,
    pub n: usize,
    pub replications: usize,
    pub stale_rate_mean: f64,
    /// Standard error of the mean across replications; with a single
    /// replication, the binomial standard error of its estimate.
    pub stale_rate_stderr: f64,
    pub fork_events_mean: f64,
    pub measure_correlation_mean: f64,
    pub results: Vec<SimResult>,
}

impl BatchRow {
    pub fn from_results(point: usize, cfg: &SimConfig, results: Vec<SimResult>) -> Self {
        let r = results.len();
        let rates: Vec<f64> = results.iter().map(|x| x.stale_stats.stale_rate).collect();
        let mean = rates.iter().sum::<f64>() / r as f64;
        let stderr = if r == 1 {
            results[0].stale_stats.binomial_stderr()
        } else {
            let var = rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            (var / r as f64).sqrt()
        };
        Self {
            point,
            t: cfg.calibration.t,
            rule: cfg.tie_break_rule,
            n: cfg.network.n_miners,
            replications: r,
            stale_rate_mean: mean,
            stale_rate_stderr: stderr,
            fork_events_mean: results.iter().map(|x| x.fork_events as f64).sum::<f64>() / r as f64,
            measure_correlation_mean: results.iter().map(|x| x.measure_correlation).sum::<f64>() / r as f64,
            results,
        }
    }
}

/// Runs `replications` independent replications per sweep point.
///
/// Replication `k` uses seed `seed_base + k` at every point. Rows come back in
/// sweep order regardless of which replications finish first.
pub fn run_batch(base: &SimConfig, sweep: &[SweepOverride], replications: usize, seed_base: u64) -> Result<Vec<BatchRow>> {
    if replications == 0 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "must be at least 1".into(),
        });
    }
    let jobs: Vec<(usize, u64)> = (0..sweep.len())
        .flat_map(|p| (0..replications as u64).map(move |k| (p, k)))
        .collect();
    let outcomes: Vec<Result<SimResult>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let mut cfg = sweep[p].apply(base);
            cfg.network.seed = seed_base.wrapping_add(k);
            run_replication(&cfg).map_err(|e| Error::SweepPoint {
                index: p,
                source: Box::new(e),
            })
        })
        .collect();
    let mut outcomes = outcomes.into_iter();
    sweep
        .iter()
        .enumerate()
        .map(|(p, o)| {
            let results = outcomes.by_ref().take(replications).collect::<Result<Vec<_>>>()?;
            Ok(BatchRow::from_results(p, &o.apply(base), results))
        })
        .collect()
}
