//! Consumer stopping rule and the two-seller demand system.
//!
//! A consumer inspects the seller ranked first for free, learns its match
//! value, and decides whether to buy immediately, to inspect the second seller
//! at cost `s`, or to leave. The reservation threshold `A` solves
//! `V(A) = s` where `V(p) = E[max(0, u - p)]`.
//!
//! Demands are indexed as `d{seller}{rank}`: `d12` is seller 1's demand when
//! it is ranked second.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numeric::{bisect, integrate};
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-10;
/// Slack on the nondegenerate-region guard so roots computed to machine
/// precision on the region edge are accepted.
pub(crate) const REGION_SLACK: f64 = 1e-12;

/// Continuous match-value distribution supported on `[0, 1]`.
pub trait MatchDistribution: Send + Sync + fmt::Debug {
    fn cdf(&self, u: f64) -> f64;
    fn pdf(&self, u: f64) -> f64;
}

/// Uniform on `[0, 1]` expressed through the general trait, so the
/// quadrature path can be checked against the closed forms.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformMatch;

impl MatchDistribution for UniformMatch {
    fn cdf(&self, u: f64) -> f64 {
        u.clamp(0.0, 1.0)
    }
    fn pdf(&self, u: f64) -> f64 {
        if (0.0..=1.0).contains(&u) {
            1.0
        } else {
            0.0
        }
    }
}

/// `F(u) = u^k` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct PowerMatch {
    pub exponent: f64,
}

impl MatchDistribution for PowerMatch {
    fn cdf(&self, u: f64) -> f64 {
        u.clamp(0.0, 1.0).powf(self.exponent)
    }
    fn pdf(&self, u: f64) -> f64 {
        if (0.0..=1.0).contains(&u) {
            self.exponent * u.powf(self.exponent - 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub enum Distribution {
    /// The canonical case; every closed form in the crate assumes it.
    Uniform01,
    /// Demand layer only; evaluated by quadrature.
    General(Arc<dyn MatchDistribution>),
}

impl Distribution {
    pub fn cdf(&self, u: f64) -> f64 {
        match self {
            Distribution::Uniform01 => u.clamp(0.0, 1.0),
            Distribution::General(d) => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    d.cdf(u)
                }
            }
        }
    }

    pub fn pdf(&self, u: f64) -> f64 {
        match self {
            Distribution::Uniform01 => {
                if (0.0..=1.0).contains(&u) {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::General(d) => {
                if (0.0..=1.0).contains(&u) {
                    d.pdf(u)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Distribution::Uniform01)
    }

    /// `V(p) = E[max(0, u - p)]`.
    pub fn reservation_surplus(&self, p: f64) -> Result<f64> {
        check_price(p)?;
        Ok(match self {
            Distribution::Uniform01 => 0.5 * (1.0 - p) * (1.0 - p),
            Distribution::General(_) => integrate(|u| (u - p) * self.pdf(u), p, 1.0, QUAD_TOL),
        })
    }

    /// Largest admissible search cost, `V(0) = E[u]`.
    pub fn max_cost(&self) -> f64 {
        match self {
            Distribution::Uniform01 => 0.5,
            Distribution::General(_) => integrate(|u| u * self.pdf(u), 0.0, 1.0, QUAD_TOL),
        }
    }
}

fn check_price(p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("price {p} outside [0, 1]")))
    }
}

/// Reservation threshold under uniform match values, `A = 1 - sqrt(2 s)`.
pub fn threshold_from_cost(s: f64) -> Result<f64> {
    if !s.is_finite() || !(0.0..=0.5).contains(&s) {
        return Err(Error::CostOutOfRange(s));
    }
    Ok(1.0 - (2.0 * s).sqrt())
}

/// Inverse of [`threshold_from_cost`], `s = (1 - A)^2 / 2`.
pub fn cost_from_threshold(a: f64) -> Result<f64> {
    if !a.is_finite() || !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "threshold {a} outside [0, 1]"
        )));
    }
    Ok(0.5 * (1.0 - a) * (1.0 - a))
}

/// `V(p)` for uniform match values.
pub fn reservation_surplus(p: f64) -> Result<f64> {
    Distribution::Uniform01.reservation_surplus(p)
}

/// Solve `V(A) = s` for any distribution; `V` is strictly decreasing.
pub fn threshold_for(dist: &Distribution, s: f64) -> Result<f64> {
    if dist.is_uniform() {
        return threshold_from_cost(s);
    }
    let top = dist.max_cost();
    if !s.is_finite() || s < 0.0 || s > top + 1e-12 {
        return Err(Error::CostOutOfRange(s));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    if s >= top {
        return Ok(0.0);
    }
    let v = |a: f64| dist.reservation_surplus(a).unwrap_or(f64::NAN) - s;
    bisect(v, 0.0, 1.0, 1e-14)
}

/// Market primitives: search cost, reservation threshold and match distribution.
#[derive(Clone, Debug)]
pub struct SearchEnv {
    cost: f64,
    threshold: f64,
    dist: Distribution,
}

impl SearchEnv {
    pub fn uniform_from_cost(s: f64) -> Result<Self> {
        Ok(Self {
            cost: s,
            threshold: threshold_from_cost(s)?,
            dist: Distribution::Uniform01,
        })
    }

    pub fn uniform_from_threshold(a: f64) -> Result<Self> {
        Ok(Self {
            cost: cost_from_threshold(a)?,
            threshold: a,
            dist: Distribution::Uniform01,
        })
    }

    pub fn general(dist: Distribution, s: f64) -> Result<Self> {
        let threshold = threshold_for(&dist, s)?;
        Ok(Self {
            cost: s,
            threshold,
            dist,
        })
    }

    /// Search cost `s`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Reservation threshold `A`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    pub fn is_uniform(&self) -> bool {
        self.dist.is_uniform()
    }

    pub(crate) fn require_uniform(&self, what: &'static str) -> Result<()> {
        if self.is_uniform() {
            Ok(())
        } else {
            Err(Error::UniformOnly(what))
        }
    }

    /// `max(p) <= A` and `|p1 - p2| <= 1 - A`, boundary included.
    pub fn in_nondegenerate_region(&self, prices: PricePair) -> bool {
        let a = self.threshold;
        prices.max() <= a + REGION_SLACK && prices.delta().abs() <= 1.0 - a + REGION_SLACK
    }

    pub(crate) fn guard(&self, prices: PricePair) -> Result<()> {
        if self.in_nondegenerate_region(prices) {
            Ok(())
        } else {
            Err(Error::Domain {
                p1: prices.p1,
                p2: prices.p2,
                threshold: self.threshold,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seller {
    One,
    Two,
}

impl Seller {
    pub fn other(self) -> Self {
        match self {
            Seller::One => Seller::Two,
            Seller::Two => Seller::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    pub p1: f64,
    pub p2: f64,
}

impl PricePair {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        check_price(p1)?;
        check_price(p2)?;
        Ok(Self { p1, p2 })
    }

    /// `p1 - p2`.
    pub fn delta(&self) -> f64 {
        self.p1 - self.p2
    }

    pub fn max(&self) -> f64 {
        self.p1.max(self.p2)
    }

    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
        }
    }

    pub fn price(&self, seller: Seller) -> f64 {
        match seller {
            Seller::One => self.p1,
            Seller::Two => self.p2,
        }
    }

    pub fn with_price(&self, seller: Seller, price: f64) -> Self {
        match seller {
            Seller::One => Self {
                p1: price,
                p2: self.p2,
            },
            Seller::Two => Self {
                p1: self.p1,
                p2: price,
            },
        }
    }
}

/// Rank-conditional demands `D_i^n` and the bonus `B = D_i^1 - D_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub d11: f64,
    pub d12: f64,
    pub d21: f64,
    pub d22: f64,
    pub bonus: f64,
}

impl DemandProfile {
    pub fn first(&self, seller: Seller) -> f64 {
        match seller {
            Seller::One => self.d11,
            Seller::Two => self.d21,
        }
    }

    pub fn second(&self, seller: Seller) -> f64 {
        match seller {
            Seller::One => self.d12,
            Seller::Two => self.d22,
        }
    }
}

/// Uniform closed forms, evaluated without the region guard. Outside the
/// nondegenerate region these are the polynomial continuation of the demand
/// system, which is what the untruncated implementable set is built from.
pub(crate) fn uniform_profile(a: f64, p1: f64, p2: f64) -> DemandProfile {
    let half_a2 = 0.5 * a * a;
    let d11 = half_a2 - 0.5 * p2 * p2 - a - p1 + p2 + 1.0;
    let d12 = -half_a2 + 0.5 * p1 * p1 - p1 * p2 + a - p1 + p2;
    let d21 = half_a2 - 0.5 * p1 * p1 - a + p1 - p2 + 1.0;
    let d22 = -half_a2 + 0.5 * p2 * p2 - p1 * p2 + a + p1 - p2;
    let dp = p1 - p2;
    DemandProfile {
        d11,
        d12,
        d21,
        d22,
        bonus: (1.0 - a) * (1.0 - a) - 0.5 * dp * dp,
    }
}

fn general_profile(env: &SearchEnv, p1: f64, p2: f64) -> DemandProfile {
    let a = env.threshold;
    let d = env.dist();
    let (cdf, pdf) = (|u: f64| d.cdf(u), |u: f64| d.pdf(u));
    let dp = p1 - p2;
    let survive = 1.0 - cdf(a);
    let d11 = 1.0 - cdf(a + dp) + integrate(|u| cdf(u) * pdf(u + dp), p2, a, QUAD_TOL);
    let d22 = survive * cdf(a + dp) + integrate(|u| cdf(u + dp) * pdf(u), p2, a, QUAD_TOL);
    let d21 = 1.0 - cdf(a - dp) + integrate(|u| cdf(u) * pdf(u - dp), p1, a, QUAD_TOL);
    let d12 = survive * cdf(a - dp) + integrate(|u| cdf(u) * pdf(u + dp), p2, a - dp, QUAD_TOL);
    DemandProfile {
        d11,
        d12,
        d21,
        d22,
        bonus: d11 - d12,
    }
}

/// Rank-conditional demands at a price pair in the nondegenerate region.
pub fn demand_profile(env: &SearchEnv, prices: PricePair) -> Result<DemandProfile> {
    env.guard(prices)?;
    Ok(if env.is_uniform() {
        uniform_profile(env.threshold, prices.p1, prices.p2)
    } else {
        general_profile(env, prices.p1, prices.p2)
    })
}

/// Demands `(first, second)` of the sellers ranked first and second, valid
/// for any prices in `[0, 1]` including the corner regime.
///
/// Computed directly from the stopping rule: a consumer whose first match is
/// dead inspects the second seller iff its price is at most `A`; a live first
/// match is kept without search iff `u - p_first > A - p_second`.
pub fn rank_demands(env: &SearchEnv, first_price: f64, second_price: f64) -> (f64, f64) {
    let a = env.threshold;
    let (pi, pj) = (first_price, second_price);
    if pj > a {
        return (1.0 - env.dist.cdf(pi), 0.0);
    }
    // Live first matches with u below `upper` go on to search.
    let upper = (pi + a - pj).min(1.0);
    match &env.dist {
        Distribution::Uniform01 => {
            let reach = upper - pi + pj;
            let kept = 0.5 * (reach * reach - pj * pj);
            let first = (1.0 - upper) + kept;
            let second = pi * (1.0 - pj) + (upper - pi) - kept;
            (first, second)
        }
        dist => {
            let kept = integrate(|u| dist.cdf(u - pi + pj) * dist.pdf(u), pi, upper, QUAD_TOL);
            let searched = dist.cdf(upper) - dist.cdf(pi);
            let first = (1.0 - dist.cdf(upper)) + kept;
            let second = dist.cdf(pi) * (1.0 - dist.cdf(pj)) + searched - kept;
            (first, second)
        }
    }
}

/// Full demand profile from [`rank_demands`], valid anywhere in `[0, 1]^2`.
pub fn behavioural_profile(env: &SearchEnv, prices: PricePair) -> DemandProfile {
    let (d11, d22) = rank_demands(env, prices.p1, prices.p2);
    let (d21, d12) = rank_demands(env, prices.p2, prices.p1);
    DemandProfile {
        d11,
        d12,
        d21,
        d22,
        bonus: d11 - d12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopDecision {
    BuyNow,
    Continue,
    /// The first match is not worth its price; whether the consumer then
    /// inspects the second seller depends on that seller's price.
    NeverBuyFirst,
}

// Draws this close to the purchase cutoff count as ties and continue.
const CUTOFF_TIE: f64 = 1e-12;

/// What a consumer does after inspecting the first-ranked seller.
///
/// A tie at the immediate-purchase cutoff resolves to `Continue`.
pub fn stopping_decision(
    env: &SearchEnv,
    prices: PricePair,
    first: Seller,
    u_first: f64,
) -> StopDecision {
    let p_first = prices.price(first);
    let p_second = prices.price(first.other());
    if u_first <= p_first {
        StopDecision::NeverBuyFirst
    } else if (u_first - p_first) - (env.threshold - p_second) > CUTOFF_TIE {
        StopDecision::BuyNow
    } else {
        StopDecision::Continue
    }
}

/// Expected match values by rank order and the resulting social welfare.
///
/// `sw1` is welfare when seller 1 is inspected first, net of the expected
/// cost of the second search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocialValues {
    pub v11: f64,
    pub v22: f64,
    pub v21: f64,
    pub v12: f64,
    pub sw1: f64,
    pub sw2: f64,
}

// Value from the first-ranked seller (price `pf`) and from the second-ranked
// seller (price `ps`) under uniform match values.
fn uniform_rank_values(a: f64, pf: f64, ps: f64) -> (f64, f64) {
    let dp = pf - ps;
    let cut = a + dp;
    let v_first = 0.5 * (1.0 - cut * cut) + (cut.powi(3) - pf.powi(3)) / 3.0
        - 0.5 * dp * (cut * cut - pf * pf);
    let v_second =
        cut * 0.5 * (1.0 - a * a) + (a.powi(3) - ps.powi(3)) / 3.0 + 0.5 * dp * (a * a - ps * ps);
    (v_first, v_second)
}

fn general_rank_values(env: &SearchEnv, pf: f64, ps: f64) -> (f64, f64) {
    let a = env.threshold;
    let d = env.dist();
    let dp = pf - ps;
    let cut = a + dp;
    let tail_first = integrate(|u| u * d.pdf(u), cut, 1.0, QUAD_TOL);
    let v_first = tail_first + integrate(|u| u * d.cdf(u - dp) * d.pdf(u), pf, cut, QUAD_TOL);
    let tail_a = integrate(|u| u * d.pdf(u), a, 1.0, QUAD_TOL);
    let v_second =
        d.cdf(cut) * tail_a + integrate(|u| u * d.cdf(u + dp) * d.pdf(u), ps, a, QUAD_TOL);
    (v_first, v_second)
}

pub(crate) fn uniform_social(a: f64, s: f64, p1: f64, p2: f64) -> SocialValues {
    let (v11, v22) = uniform_rank_values(a, p1, p2);
    let (v21, v12) = uniform_rank_values(a, p2, p1);
    let dp = p1 - p2;
    SocialValues {
        v11,
        v22,
        v21,
        v12,
        sw1: v11 + v22 - (a + dp) * s,
        sw2: v21 + v12 - (a - dp) * s,
    }
}

pub fn social_values(env: &SearchEnv, prices: PricePair) -> Result<SocialValues> {
    env.guard(prices)?;
    let (p1, p2) = (prices.p1, prices.p2);
    if env.is_uniform() {
        return Ok(uniform_social(env.threshold, env.cost, p1, p2));
    }
    let (v11, v22) = general_rank_values(env, p1, p2);
    let (v21, v12) = general_rank_values(env, p2, p1);
    let a = env.threshold;
    let dp = p1 - p2;
    let d = env.dist();
    Ok(SocialValues {
        v11,
        v22,
        v21,
        v12,
        sw1: v11 + v22 - d.cdf(a + dp) * env.cost,
        sw2: v21 + v12 - d.cdf(a - dp) * env.cost,
    })
}
