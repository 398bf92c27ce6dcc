//! Closed forms for the synchronous stale-rate model and the double-spend
//! threshold.
//!
//! In the synchronous model every miner starts a Grover run at the same
//! moment, runs for `t` minutes and measures. The number of successes per
//! measurement is Poisson with mean `λ(t)`. Requiring that the chain grows by
//! one block per `I` minutes on average gives `1 − e^{−λ(t)} = t / I`, so
//!
//! ```text
//! λ(t)        = ln(I / (I − t))
//! blocks/min  = λ(t) / t
//! p_stale(t)  = 1 − t / (I · λ(t))
//! ```
//!
//! All functions take the block interval `I` explicitly; Bitcoin uses 10.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default expected minutes between main-chain blocks.
pub const DEFAULT_BLOCK_INTERVAL: f64 = 10.0;

/// Parameters of the synchronous model; `0 < t < block_interval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncModelParams {
    block_interval: f64,
    t: f64,
}

impl SyncModelParams {
    pub fn new(block_interval: f64, t: f64) -> Result<Self> {
        if !(block_interval > 0.0 && block_interval.is_finite()) {
            return Err(Error::Domain {
                name: "block_interval",
                value: block_interval,
                domain: "(0, ∞)",
            });
        }
        if !(t > 0.0 && t < block_interval) {
            return Err(Error::Domain {
                name: "t",
                value: t,
                domain: "(0, block_interval)",
            });
        }
        Ok(Self { block_interval, t })
    }

    /// Uses the ten-minute Bitcoin interval.
    pub fn with_t(t: f64) -> Result<Self> {
        Self::new(DEFAULT_BLOCK_INTERVAL, t)
    }

    pub fn block_interval(&self) -> f64 {
        self.block_interval
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Expected number of successful miners per synchronous measurement.
pub fn lambda_of_t(p: &SyncModelParams) -> Result<f64> {
    // ln(I/(I−t)) = −ln(1 − t/I), accurate for small t.
    Ok(-(-p.t / p.block_interval).ln_1p())
}

/// Probability that a measurement round extends the longest chain.
pub fn extension_probability(p: &SyncModelParams) -> Result<f64> {
    let lambda = lambda_of_t(p)?;
    let pr = -(-lambda).exp_m1();
    debug_assert!((pr - p.t / p.block_interval).abs() <= 1e-12);
    Ok(pr)
}

/// Expected fraction of blocks that end up outside the longest chain.
pub fn analytic_stale_rate(p: &SyncModelParams) -> Result<f64> {
    let lambda = lambda_of_t(p)?;
    let x = p.t / p.block_interval;
    // For small x the direct form cancels; 1 − x/λ with λ = x + x²/2 + …
    if x < 1e-4 {
        // x/λ = 1 − x/2 − x²/12 − x³/24 − …
        return Ok(x / 2.0 + x * x / 12.0 + x * x * x / 24.0);
    }
    Ok(1.0 - x / lambda)
}

/// Expected blocks (main chain and stale) found per minute.
pub fn blocks_per_minute(p: &SyncModelParams) -> Result<f64> {
    Ok(lambda_of_t(p)? / p.t)
}

/// Smallest hash-power fraction `q` satisfying `q > (1 − p_stale)(1 − q)`.
pub fn double_spend_threshold(p_stale: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_stale) {
        return Err(Error::Domain {
            name: "p_stale",
            value: p_stale,
            domain: "[0, 1)",
        });
    }
    Ok((1.0 - p_stale) / (2.0 - p_stale))
}

/// Union bound on the chance that two of `n` classical miners succeed on
/// the same hash round.
pub fn classical_fork_probability(n: u64, p_success: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&p_success) {
        return Err(Error::Domain {
            name: "p_success",
            value: p_success,
            domain: "[0, 1]",
        });
    }
    Ok((n as f64 * p_success).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: f64) -> SyncModelParams {
        SyncModelParams::with_t(t).unwrap()
    }

    #[test]
    fn lambda_examples() {
        assert!(lambda_of_t(&params(1e-12)).unwrap() < 1e-12);
        assert!((lambda_of_t(&params(5.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((lambda_of_t(&params(9.0)).unwrap() - 10f64.ln()).abs() < 1e-14);
        assert!((lambda_of_t(&params(5.0)).unwrap() - 0.6931).abs() < 1e-4);
        assert!((lambda_of_t(&params(9.0)).unwrap() - 2.3026).abs() < 1e-4);
    }

    #[test]
    fn extension_examples() {
        assert!((extension_probability(&params(5.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((extension_probability(&params(9.0)).unwrap() - 0.9).abs() < 1e-15);
        assert!(extension_probability(&params(1e-12)).unwrap() < 1e-12);
    }

    #[test]
    fn stale_rate_examples() {
        let s1 = analytic_stale_rate(&params(1.0)).unwrap();
        assert!((s1 - (1.0 - 0.1 / (10.0f64 / 9.0).ln())).abs() < 1e-15);
        assert!((s1 - 0.0509).abs() < 5e-5);
        let s796 = analytic_stale_rate(&params(7.96)).unwrap();
        assert!((s796 - 0.50).abs() < 5e-3, "{s796}");
        assert!(analytic_stale_rate(&params(1e-9)).unwrap() < 1e-9);
    }

    #[test]
    fn small_t_branch_is_continuous() {
        let below = analytic_stale_rate(&params(1e-3 * (1.0 - 1e-9))).unwrap();
        let above = analytic_stale_rate(&params(1e-3 * (1.0 + 1e-9))).unwrap();
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn blocks_per_minute_examples() {
        assert!((blocks_per_minute(&params(1e-9)).unwrap() - 0.1).abs() < 1e-9);
        assert!((blocks_per_minute(&params(5.0)).unwrap() - 2f64.ln() / 5.0).abs() < 1e-15);
        assert!((blocks_per_minute(&params(5.0)).unwrap() - 0.1386).abs() < 1e-4);
        for t in [0.5, 1.0, 3.0, 7.96, 9.5] {
            let p = params(t);
            let sum = 0.1 / blocks_per_minute(&p).unwrap() + analytic_stale_rate(&p).unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_examples() {
        assert!((double_spend_threshold(1.0 / 3.0).unwrap() - 0.4).abs() < 1e-15);
        let q = double_spend_threshold(0.0024).unwrap();
        assert_eq!(format!("{q:.4}"), "0.4994");
        assert_eq!(double_spend_threshold(0.0).unwrap(), 0.5);
        assert!(double_spend_threshold(1.0).is_err());
        assert!(double_spend_threshold(-0.1).is_err());
    }

    #[test]
    fn classical_fork_examples() {
        assert_eq!(classical_fork_probability(10, 0.0).unwrap(), 0.0);
        assert!((classical_fork_probability(1_000_000, 1e-20).unwrap() - 1e-14).abs() < 1e-27);
        // n·p·h = 1/10 gives 1/(10h) for any h
        for h in [1.0, 6e14, 1e13, 37.5] {
            let n = 1000u64;
            let p = 1.0 / (10.0 * h * n as f64);
            let f = classical_fork_probability(n, p).unwrap();
            assert!((f - 1.0 / (10.0 * h)).abs() <= 1e-15 * f.max(1e-300) + f * 1e-12);
        }
        assert_eq!(classical_fork_probability(10, 0.5).unwrap(), 1.0);
        assert!(classical_fork_probability(0, 0.1).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(SyncModelParams::with_t(0.0).is_err());
        assert!(SyncModelParams::with_t(10.0).is_err());
        assert!(SyncModelParams::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn calibration_identity() {
        for i in 1..1000 {
            let t = i as f64 * 0.00999;
            let p = params(t);
            let lhs = extension_probability(&p).unwrap() / t;
            assert!((lhs - 0.1).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn stale_rate_strictly_increasing() {
        let n = 10_000;
        let mut prev = 0.0;
        for i in 1..n {
            let t = 10.0 * i as f64 / n as f64;
            let s = analytic_stale_rate(&params(t)).unwrap();
            assert!(s > prev, "t={t}");
            assert!((0.0..1.0).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn threshold_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..=999 {
            let p = i as f64 * 0.999 / 999.0;
            let q = double_spend_threshold(p).unwrap();
            assert!(q > 0.0 && q <= 0.5);
            assert!(q < prev);
            prev = q;
        }
    }
}
