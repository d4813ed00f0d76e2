//! Best rank-two deviation: the price a seller picks once it has been demoted
//! behind a rival, and the profit it earns there.
//!
//! Under uniform match values the rank-two profit `x * D2(x, r)` is piecewise
//! quadratic in the deviation price `x`. Inside the band `x >= r - (1 - A)`
//! it is the closed-form polynomial whose first-order condition is
//! `1.5 x^2 - (2 + 2r) x + (r + A - A^2 / 2) = 0`; below the band every
//! consumer who inspects the deviator compares it against the rival and
//! `D2 = 1 - x - (1 - r)^2 / 2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::search::{rank_demands, SearchEnv};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub price: f64,
    pub profit: f64,
}

/// Profit of a seller ranked second at `own` against a rival ranked first at `rival`.
pub fn rank_two_profit(env: &SearchEnv, own: f64, rival: f64) -> f64 {
    own * rank_demands(env, rival, own).1
}

// In-band rank-two demand polynomial.
fn band_demand(a: f64, x: f64, r: f64) -> f64 {
    -0.5 * a * a + 0.5 * x * x - r * x + a + r - x
}

/// Closed-form best deviation for the uniform case, any rival price in
/// `[0, 1]`. Rival prices above `A` are used by the corner-regime constraints.
pub(crate) fn uniform_best_deviation(a: f64, r: f64) -> Result<Deviation> {
    let b = 2.0 + 2.0 * r;
    let c = r + a - 0.5 * a * a;
    let disc = b * b - 6.0 * c;
    if disc < 0.0 {
        return Err(Error::NoInteriorMaximum { rival: r });
    }
    let band_lo = (r - (1.0 - a)).max(0.0);
    let root = (b - disc.sqrt()) / 3.0;
    // Second-order condition at the lower root: 3x - (2 + 2r) < 0.
    debug_assert!(3.0 * root - b < 0.0);
    let x_band = root.clamp(band_lo, a);
    let mut best = Deviation {
        price: x_band,
        profit: x_band * band_demand(a, x_band, r),
    };
    if band_lo > 0.0 {
        let k = 0.5 * (1.0 - r) * (1.0 - r);
        let x_low = (0.5 * (1.0 - k)).clamp(0.0, band_lo);
        let profit = x_low * (1.0 - x_low - k);
        if profit > best.profit || (profit == best.profit && x_low < best.price) {
            best = Deviation {
                price: x_low,
                profit,
            };
        }
    }
    Ok(best)
}

/// `max_x pi^2(x, rival)` over `x in [0, A]` with its argmax.
///
/// Returns the lower root of the first-order condition whenever it lies in the
/// band where the rank-two demand polynomial applies.
pub fn best_deviation(env: &SearchEnv, rival_price: f64) -> Result<Deviation> {
    env.require_uniform("best_deviation")?;
    let a = env.threshold();
    if !rival_price.is_finite()
        || rival_price < 0.0
        || rival_price > a + crate::search::REGION_SLACK
    {
        return Err(Error::InvalidArgument(format!(
            "rival price {rival_price} outside [0, {a}]"
        )));
    }
    uniform_best_deviation(a, rival_price.min(a))
}

/// Exhaustive argmax of the rank-two profit on a uniform grid over `[0, A]`.
///
/// Ties go to the smallest price. Works for any match distribution.
pub fn brute_force_best_deviation(
    env: &SearchEnv,
    rival_price: f64,
    grid_n: usize,
) -> Result<Deviation> {
    if grid_n < 1000 {
        return Err(Error::InvalidArgument(format!("grid_n = {grid_n} < 1000")));
    }
    let a = env.threshold();
    let step = a / (grid_n - 1) as f64;
    let best = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let x = if i == grid_n - 1 { a } else { step * i as f64 };
            Deviation {
                price: x,
                profit: rank_two_profit(env, x, rival_price),
            }
        })
        .reduce_with(|u, v| {
            if v.profit > u.profit || (v.profit == u.profit && v.price < u.price) {
                v
            } else {
                u
            }
        })
        .expect("grid is non-empty");
    Ok(best)
}
