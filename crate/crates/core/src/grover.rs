//! Success-probability models for a single mining attempt.
//!
//! A quantum miner that applies `q` Grover iterations against a search space
//! in which a fraction `K/N` of the nonces are valid succeeds with
//! probability `sin²((2q + 1)·θ)`, where `θ = arcsin(√(K/N))`. A classical
//! miner making `q` independent hash attempts succeeds with probability
//! `1 − (1 − p)^q`.
//!
//! The simulator does not fix `K/N` from hardware constants. Instead,
//! [`calibrate`] back-solves an effective angle so that a network of `n`
//! miners, each measuring after `t` minutes, extends the chain at the rate
//! required by the target block interval.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::analytics::{self, SyncModelParams};
use crate::error::{Error, Result};

/// Grover success model: rotation angle per iteration and iteration duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroverModel {
    theta: f64,
    t_iteration: f64,
}

impl GroverModel {
    pub fn new(theta: f64, t_iteration: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must lie in (0, π/2], got {theta}"),
            });
        }
        if !(t_iteration > 0.0 && t_iteration.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_iteration",
                reason: format!("must be positive, got {t_iteration}"),
            });
        }
        Ok(Self { theta, t_iteration })
    }

    /// Builds the model from the marked fraction `K/N`.
    pub fn from_marked_fraction(marked_fraction: f64, t_iteration: f64) -> Result<Self> {
        if !(marked_fraction > 0.0 && marked_fraction <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "marked_fraction",
                reason: format!("must lie in (0, 1], got {marked_fraction}"),
            });
        }
        Self::new(marked_fraction.sqrt().asin(), t_iteration)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Minutes per Grover iteration.
    pub fn t_iteration(&self) -> f64 {
        self.t_iteration
    }

    /// `sin²(θ)`, the success probability of measuring without iterating.
    pub fn marked_fraction(&self) -> f64 {
        let s = self.theta.sin();
        s * s
    }

    /// Largest iteration count for which the success probability is still
    /// nondecreasing, i.e. `(2q + 1)·θ ≤ π/2`.
    pub fn optimal_iterations(&self) -> u64 {
        ((FRAC_PI_2 / self.theta - 1.0) / 2.0).floor().max(0.0) as u64
    }
}

/// Classical model: per-hash success probability and hash rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    p_hash: f64,
    hashes_per_minute: f64,
}

impl ClassicalModel {
    pub fn new(p_hash: f64, hashes_per_minute: f64) -> Result<Self> {
        if !(p_hash > 0.0 && p_hash <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_hash",
                reason: format!("must lie in (0, 1], got {p_hash}"),
            });
        }
        if !(hashes_per_minute > 0.0 && hashes_per_minute.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "hashes_per_minute",
                reason: format!("must be positive, got {hashes_per_minute}"),
            });
        }
        Ok(Self {
            p_hash,
            hashes_per_minute,
        })
    }

    /// Model for one of `n_miners` equal classical miners whose combined
    /// finds average one block per `block_interval` minutes.
    pub fn calibrated(n_miners: usize, block_interval: f64, hashes_per_minute: f64) -> Result<Self> {
        if n_miners == 0 {
            return Err(Error::InvalidParameter {
                name: "n_miners",
                reason: "must be at least 1".into(),
            });
        }
        let rate = 1.0 / (n_miners as f64 * block_interval);
        Self::new(rate / hashes_per_minute, hashes_per_minute)
    }

    pub fn p_hash(&self) -> f64 {
        self.p_hash
    }

    pub fn hashes_per_minute(&self) -> f64 {
        self.hashes_per_minute
    }

    /// Expected finds per minute for a single miner.
    pub fn find_rate(&self) -> f64 {
        self.p_hash * self.hashes_per_minute
    }
}

/// Probability that measuring after `q` Grover iterations yields a valid nonce.
pub fn grover_success_probability(q: u64, model: &GroverModel) -> f64 {
    amplitude_probability(q, model.theta)
}

pub(crate) fn amplitude_probability(q: u64, theta: f64) -> f64 {
    let angle = (2.0 * q as f64 + 1.0) * theta;
    let s = angle.sin();
    (s * s).clamp(0.0, 1.0)
}

/// Probability that at least one of `q` independent hashes succeeds.
pub fn classical_success_probability(q: u64, model: &ClassicalModel) -> f64 {
    if q == 0 {
        return 0.0;
    }
    // 1 − (1 − p)^q without cancellation for tiny p.
    let log_fail = (q as f64) * (-model.p_hash).ln_1p();
    (-log_fail.exp_m1()).clamp(0.0, 1.0)
}

/// Per-miner calibration of a synchronous quantum network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedRun {
    /// Iterations a miner commits to per run.
    pub q_total: u64,
    /// Success probability after all `q_total` iterations.
    pub p_full: f64,
    /// Effective per-iteration angle reproducing `p_full` at `q_total`.
    pub theta_eff: f64,
    /// Minutes per iteration.
    pub t_iteration: f64,
}

impl CalibratedRun {
    /// Success probability if the run is measured after `elapsed` iterations.
    pub fn success_after(&self, elapsed: u64) -> f64 {
        amplitude_probability(elapsed.min(self.q_total), self.theta_eff)
    }

    /// Success probability for an arbitrary iteration count at this angle.
    pub fn success_for(&self, q: u64) -> f64 {
        amplitude_probability(q, self.theta_eff)
    }

    /// Minutes one full run takes.
    pub fn run_minutes(&self) -> f64 {
        self.q_total as f64 * self.t_iteration
    }

    pub fn model(&self) -> GroverModel {
        GroverModel {
            theta: self.theta_eff,
            t_iteration: self.t_iteration,
        }
    }
}

/// Calibrates the per-miner success probability so that `n_miners`
/// measuring together every `t` minutes produce on average
/// `λ(t) = ln(I / (I − t))` successes per measurement.
pub fn calibrate(n_miners: usize, t: f64, block_interval: f64, t_iteration: f64) -> Result<CalibratedRun> {
    if n_miners == 0 {
        return Err(Error::InvalidParameter {
            name: "n_miners",
            reason: "must be at least 1".into(),
        });
    }
    if !(t_iteration > 0.0 && t_iteration.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_iteration",
            reason: format!("must be positive, got {t_iteration}"),
        });
    }
    let lambda = analytics::lambda_of_t(&SyncModelParams::new(block_interval, t)?)?;
    let p_full = lambda / n_miners as f64;
    if p_full > 1.0 {
        return Err(Error::CalibrationInfeasible {
            p_full,
            n_miners,
            t,
            block_interval,
        });
    }
    let q_total = (t / t_iteration).round() as u64;
    let theta_eff = p_full.sqrt().asin() / (2.0 * q_total as f64 + 1.0);
    Ok(CalibratedRun {
        q_total,
        p_full,
        theta_eff,
        t_iteration,
    })
}
