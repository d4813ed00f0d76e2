//! Implementability when a recommended price reaches the threshold `A`.
//!
//! A seller priced at or above `A` is never inspected second, and a rival
//! ranked ahead of it sells to everyone with a positive match surplus. The
//! incentive constraints are rewritten with `π̂ᵢ¹ = pᵢ (1 - F(pᵢ))` for the
//! affected first-rank profits and the dead rank-two profit dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::feasible::{h_value_extended, max_deviation_profit, AlphaInterval, MEMBERSHIP_TOL};
use crate::search::{uniform_profile, PricePair, SearchEnv};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CornerRegime {
    BothBelow,
    P1Above,
    P2Above,
    BothAbove,
}

impl CornerRegime {
    /// A price equal to `A` counts as above.
    pub fn classify(threshold: f64, prices: PricePair) -> Self {
        match (prices.p1 >= threshold, prices.p2 >= threshold) {
            (false, false) => CornerRegime::BothBelow,
            (true, false) => CornerRegime::P1Above,
            (false, true) => CornerRegime::P2Above,
            (true, true) => CornerRegime::BothAbove,
        }
    }
}

/// `p (1 - p)`: first-rank profit when every consumer with a positive match
/// surplus buys at once.
pub fn monopoly_first_profit(p: f64) -> f64 {
    p * (1.0 - p)
}

// Bounds on alpha from `m <= alpha * at_one + (1 - alpha) * at_zero`.
fn linear_ic(m: f64, at_one: f64, at_zero: f64) -> (f64, f64) {
    let slope = at_one - at_zero;
    let need = m - at_zero;
    if slope > 0.0 {
        (need / slope, f64::INFINITY)
    } else if slope < 0.0 {
        (f64::NEG_INFINITY, need / slope)
    } else if need <= 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    }
}

/// `φ̂(p1, p2)` for prices with at least one at or above `A`.
pub fn corner_alpha_interval(env: &SearchEnv, prices: PricePair) -> Result<AlphaInterval> {
    env.require_uniform("corner_alpha_interval")?;
    let a = env.threshold();
    let (p1, p2) = (prices.p1, prices.p2);
    let d = uniform_profile(a, p1, p2);
    let m1 = max_deviation_profit(a, p2);
    let m2 = max_deviation_profit(a, p1);
    let (ic1, ic2) = match CornerRegime::classify(a, prices) {
        CornerRegime::BothBelow => return Err(Error::WrongRegime { p1, p2 }),
        CornerRegime::P1Above => (
            linear_ic(m1, p1 * d.d11, 0.0),
            linear_ic(m2, p2 * d.d22, monopoly_first_profit(p2)),
        ),
        CornerRegime::P2Above => (
            linear_ic(m1, monopoly_first_profit(p1), p1 * d.d12),
            linear_ic(m2, 0.0, p2 * d.d21),
        ),
        CornerRegime::BothAbove => (
            linear_ic(m1, monopoly_first_profit(p1), 0.0),
            linear_ic(m2, 0.0, monopoly_first_profit(p2)),
        ),
    };
    let lo = ic1.0.max(ic2.0);
    let hi = ic1.1.min(ic2.1);
    let (lo_c, hi_c) = (lo.max(0.0), hi.min(1.0));
    if lo_c > hi_c {
        return Ok(AlphaInterval::empty_with(lo, hi));
    }
    Ok(AlphaInterval {
        lo: lo_c,
        hi: hi_c,
        empty: false,
    })
}

/// Membership in `P̂`. Prices below `A` use the plain constraints.
pub fn hat_contains(env: &SearchEnv, prices: PricePair) -> Result<bool> {
    env.require_uniform("hat_contains")?;
    match CornerRegime::classify(env.threshold(), prices) {
        CornerRegime::BothBelow => Ok(h_value_extended(env, prices)? <= MEMBERSHIP_TOL),
        _ => Ok(!corner_alpha_interval(env, prices)?.is_empty()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p1: f64,
    pub p2: f64,
    pub in_plain: bool,
    pub in_hat: bool,
    pub regime: CornerRegime,
}

/// Membership in `P` (untruncated) and `P̂` on the grid `{i/n : i = 1..n}^2`,
/// row-major in `p2`.
pub fn sweep(env: &SearchEnv, n: usize) -> Result<Vec<SweepRow>> {
    env.require_uniform("sweep")?;
    if n == 0 {
        return Err(Error::InvalidArgument("sweep needs n >= 1".into()));
    }
    let a = env.threshold();
    (1..=n)
        .into_par_iter()
        .flat_map_iter(|j| (1..=n).map(move |i| (i, j)))
        .map(|(i, j)| {
            let prices = PricePair {
                p1: i as f64 / n as f64,
                p2: j as f64 / n as f64,
            };
            Ok(SweepRow {
                p1: prices.p1,
                p2: prices.p2,
                in_plain: h_value_extended(env, prices)? <= MEMBERSHIP_TOL,
                in_hat: hat_contains(env, prices)?,
                regime: CornerRegime::classify(a, prices),
            })
        })
        .collect()
}

/// Sweep points in `P̂` but not in `P`.
pub fn inclusion_violations(rows: &[SweepRow]) -> Vec<SweepRow> {
    rows.iter()
        .copied()
        .filter(|r| r.in_hat && !r.in_plain)
        .collect()
}
