//! Fork choice among tips of equal height.
//!
//! Each node sees, for every competing tip, the block's committed timestamp
//! `s` and the time `t` at which the node first received it. The rules are:
//!
//! * `first_seen`: mine on the tip received first (`min t`).
//! * `new_penalty`: minimize `t + |s − t|`. A block whose committed
//!   timestamp is far from when it showed up is penalized by the distance.
//! * `old_penalty`: minimize `|t_min − s|`, where `t_min` is the earliest
//!   arrival among the competitors. Kept because it is exploitable by a
//!   miner who forges `s` to match `t_min`.
//! * `uniform_random`: pick uniformly.
//!
//! Exact ties in the minimized quantity fall back to the earliest arrival and
//! then to the lowest block id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::BlockId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakRule {
    FirstSeen,
    NewPenalty,
    OldPenalty,
    UniformRandom,
}

impl TieBreakRule {
    pub const ALL: [TieBreakRule; 4] = [
        TieBreakRule::FirstSeen,
        TieBreakRule::NewPenalty,
        TieBreakRule::OldPenalty,
        TieBreakRule::UniformRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TieBreakRule::FirstSeen => "first_seen",
            TieBreakRule::NewPenalty => "new_penalty",
            TieBreakRule::OldPenalty => "old_penalty",
            TieBreakRule::UniformRandom => "uniform_random",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self != TieBreakRule::UniformRandom
    }
}

impl fmt::Display for TieBreakRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TieBreakRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TieBreakRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "tie_break_rule",
                reason: format!(
                    "unknown rule `{s}`, expected one of first_seen, new_penalty, old_penalty, uniform_random"
                ),
            })
    }
}

/// What a node knows about one competing tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipView {
    pub block_id: BlockId,
    /// Committed timestamp `s`.
    pub timestamp: f64,
    /// First arrival `t` at this node.
    pub received_at: f64,
}

impl TipView {
    pub fn new(block_id: BlockId, timestamp: f64, received_at: f64) -> Self {
        Self {
            block_id,
            timestamp,
            received_at,
        }
    }

    /// `|s − t|`.
    pub fn delta(&self) -> f64 {
        (self.timestamp - self.received_at).abs()
    }
}

/// `t + |s − t|`.
pub fn penalty_new(view: &TipView) -> f64 {
    view.received_at + view.delta()
}

/// `|t_min − s|`.
pub fn penalty_old(view: &TipView, t_min: f64) -> f64 {
    (t_min - view.timestamp).abs()
}

fn earliest_arrival(tips: &[TipView]) -> f64 {
    tips.iter().map(|v| v.received_at).fold(f64::INFINITY, f64::min)
}

/// The quantity each deterministic rule minimizes, or `None` for
/// [`TieBreakRule::UniformRandom`].
pub fn rule_scores(rule: TieBreakRule, tips: &[TipView]) -> Option<Vec<f64>> {
    match rule {
        TieBreakRule::FirstSeen => Some(tips.iter().map(|v| v.received_at).collect()),
        TieBreakRule::NewPenalty => Some(tips.iter().map(penalty_new).collect()),
        TieBreakRule::OldPenalty => {
            let t_min = earliest_arrival(tips);
            Some(tips.iter().map(|v| penalty_old(v, t_min)).collect())
        }
        TieBreakRule::UniformRandom => None,
    }
}

fn fallback_order(a: &TipView, b: &TipView) -> Ordering {
    a.received_at
        .total_cmp(&b.received_at)
        .then_with(|| a.block_id.cmp(&b.block_id))
}

fn argmin(tips: &[TipView], scores: &[f64]) -> usize {
    (0..tips.len())
        .min_by(|&i, &j| {
            scores[i]
                .total_cmp(&scores[j])
                .then_with(|| fallback_order(&tips[i], &tips[j]))
        })
        .expect("nonempty")
}

/// Picks the tip to mine on.
pub fn select_tip<R: Rng + ?Sized>(rule: TieBreakRule, tips: &[TipView], rng: &mut R) -> Result<BlockId> {
    if tips.is_empty() {
        return Err(Error::EmptyTipSet);
    }
    match rule_scores(rule, tips) {
        Some(scores) => Ok(tips[argmin(tips, &scores)].block_id),
        None => Ok(tips[rng.random_range(0..tips.len())].block_id),
    }
}

/// Decides whether a node currently mining on `current` should move.
///
/// Deterministic rules switch only when another tip is strictly better in the
/// minimized quantity; equality keeps the current tip. The random rule
/// redraws over the full tip set. Returns the tip to mine on afterwards.
pub fn reconsider<R: Rng + ?Sized>(
    rule: TieBreakRule,
    tips: &[TipView],
    current: BlockId,
    rng: &mut R,
) -> Result<BlockId> {
    if tips.is_empty() {
        return Err(Error::EmptyTipSet);
    }
    let Some(pos) = tips.iter().position(|v| v.block_id == current) else {
        return select_tip(rule, tips, rng);
    };
    match rule_scores(rule, tips) {
        Some(scores) => {
            let best = argmin(tips, &scores);
            if scores[best] < scores[pos] {
                Ok(tips[best].block_id)
            } else {
                Ok(current)
            }
        }
        None => select_tip(rule, tips, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn new_penalty_examples() {
        assert_eq!(penalty_new(&TipView::new(BlockId(1), 100.5, 100.0)), 100.5);
        assert_eq!(penalty_new(&TipView::new(BlockId(1), 200.0, 100.2)), 200.0);
        assert_eq!(penalty_new(&TipView::new(BlockId(1), 50.0, 50.0)), 50.0);
    }

    // Alice's block, timestamp s_a, reaches everyone one second later.
    // Mallory forges s_m = s_a + 1 and her block arrives ~100 s after Alice's.
    fn mallory_scenario() -> [TipView; 2] {
        let s_a = 1000.0;
        let t_a = s_a + 1.0;
        let alice = TipView::new(BlockId(1), s_a, t_a);
        let mallory = TipView::new(BlockId(2), s_a + 1.0, t_a + 100.0);
        [alice, mallory]
    }

    #[test]
    fn old_penalty_examples() {
        let [alice, mallory] = mallory_scenario();
        let t_min = alice.received_at;
        assert_eq!(penalty_old(&alice, alice.received_at), 1.0);
        assert_eq!(penalty_old(&mallory, t_min), 0.0);
        assert_eq!(penalty_old(&TipView::new(BlockId(3), 7.0, 9.0), 7.0), 0.0);
    }

    #[test]
    fn mallory_wins_old_loses_new() {
        let tips = mallory_scenario();
        let mut r = rng();
        assert_eq!(select_tip(TieBreakRule::OldPenalty, &tips, &mut r).unwrap(), BlockId(2));
        assert_eq!(select_tip(TieBreakRule::NewPenalty, &tips, &mut r).unwrap(), BlockId(1));
        assert_eq!(select_tip(TieBreakRule::FirstSeen, &tips, &mut r).unwrap(), BlockId(1));
        // Mallory's new penalty is about t_a + 100 + 100.
        assert!((penalty_new(&tips[1]) - (tips[0].received_at + 200.0)).abs() < 1e-9);
    }

    #[test]
    fn single_tip_any_rule() {
        let tips = [TipView::new(BlockId(9), 3.0, 4.0)];
        let mut r = rng();
        for rule in TieBreakRule::ALL {
            assert_eq!(select_tip(rule, &tips, &mut r).unwrap(), BlockId(9));
        }
    }

    #[test]
    fn empty_tip_set() {
        for rule in TieBreakRule::ALL {
            assert_eq!(select_tip(rule, &[], &mut rng()).unwrap_err(), Error::EmptyTipSet);
        }
    }

    #[test]
    fn exact_ties_fall_back_to_arrival_then_id() {
        // equal new penalties: 5 + 1 = 6 and 5.5 + 0.5 = 6
        let tips = [TipView::new(BlockId(4), 6.0, 5.5), TipView::new(BlockId(3), 4.0, 5.0)];
        assert_eq!(select_tip(TieBreakRule::NewPenalty, &tips, &mut rng()).unwrap(), BlockId(3));
        let tips = [TipView::new(BlockId(4), 5.0, 5.0), TipView::new(BlockId(3), 5.0, 5.0)];
        assert_eq!(select_tip(TieBreakRule::FirstSeen, &tips, &mut rng()).unwrap(), BlockId(3));
    }

    #[test]
    fn reconsider_keeps_current_on_equality() {
        let tips = [TipView::new(BlockId(3), 5.0, 5.0), TipView::new(BlockId(4), 5.0, 5.0)];
        let mut r = rng();
        assert_eq!(reconsider(TieBreakRule::FirstSeen, &tips, BlockId(4), &mut r).unwrap(), BlockId(4));
        let tips = [TipView::new(BlockId(3), 5.0, 5.0), TipView::new(BlockId(4), 9.0, 5.0)];
        assert_eq!(reconsider(TieBreakRule::NewPenalty, &tips, BlockId(4), &mut r).unwrap(), BlockId(3));
        // current not among the tips: plain selection
        assert_eq!(reconsider(TieBreakRule::NewPenalty, &tips, BlockId(1), &mut r).unwrap(), BlockId(3));
    }

    #[test]
    fn uniform_random_covers_all_tips() {
        let tips: Vec<_> = (0..4).map(|i| TipView::new(BlockId(i), 0.0, 0.0)).collect();
        let mut counts = [0usize; 4];
        let mut r = rng();
        for _ in 0..4000 {
            counts[select_tip(TieBreakRule::UniformRandom, &tips, &mut r).unwrap().0 as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn rule_names_round_trip() {
        for rule in TieBreakRule::ALL {
            assert_eq!(rule.as_str().parse::<TieBreakRule>().unwrap(), rule);
        }
        assert!("longest".parse::<TieBreakRule>().is_err());
    }
}
