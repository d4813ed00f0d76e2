//! Consumer-level simulation, search algorithms and pure-strategy checks.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Consumers are simulated
//! in blocks of 65 536; block `k` uses the caller's seed with stream `k`, so
//! a run is reproducible bit for bit regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{bisect, golden_section_max};
use crate::objectives::Contract;
use crate::search::{
    rank_demands, stopping_decision, Distribution, PricePair, SearchEnv, Seller, StopDecision,
};
use crate::{Error, Result};

const BLOCK: usize = 65_536;
const PROBE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TablePoint {
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
}

/// A committed map from posted prices to the probability that seller 1 is
/// inspected first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchAlgorithm {
    Prominence {
        favored: Seller,
    },
    Random,
    /// Cheaper seller first; `tie_alpha` at equal prices.
    PriceDirected {
        tie_alpha: f64,
    },
    /// Recommended prices with on-path `α`; a lone deviator is ranked second.
    Contract {
        contract: Contract,
        off_path_alpha: f64,
    },
    /// Nearest tabulated point.
    Tabulated {
        points: Vec<TablePoint>,
    },
}

impl SearchAlgorithm {
    pub fn contract(contract: Contract) -> Self {
        SearchAlgorithm::Contract {
            contract,
            off_path_alpha: 0.5,
        }
    }

    pub fn alpha(&self, prices: PricePair) -> f64 {
        let alpha = match self {
            SearchAlgorithm::Prominence {
                favored: Seller::One,
            } => 1.0,
            SearchAlgorithm::Prominence {
                favored: Seller::Two,
            } => 0.0,
            SearchAlgorithm::Random => 0.5,
            SearchAlgorithm::PriceDirected { tie_alpha } => {
                if prices.p1 < prices.p2 {
                    1.0
                } else if prices.p1 > prices.p2 {
                    0.0
                } else {
                    *tie_alpha
                }
            }
            SearchAlgorithm::Contract {
                contract,
                off_path_alpha,
            } => match (prices.p1 == contract.p1, prices.p2 == contract.p2) {
                (true, true) => contract.alpha,
                (true, false) => 1.0,
                (false, true) => 0.0,
                (false, false) => *off_path_alpha,
            },
            SearchAlgorithm::Tabulated { points } => points
                .iter()
                .min_by(|a, b| {
                    let da = (a.p1 - prices.p1).hypot(a.p2 - prices.p2);
                    let db = (b.p1 - prices.p1).hypot(b.p2 - prices.p2);
                    da.total_cmp(&db)
                })
                .map_or(0.5, |p| p.alpha),
        };
        alpha.clamp(0.0, 1.0)
    }

    /// Own prices at which `seller`'s ranking can jump, given the rival's price.
    pub fn breakpoints(&self, seller: Seller, rival_price: f64) -> Vec<f64> {
        match self {
            SearchAlgorithm::PriceDirected { .. } => vec![rival_price],
            SearchAlgorithm::Contract { contract, .. } => vec![contract.prices().price(seller)],
            SearchAlgorithm::Tabulated { points } => points
                .iter()
                .map(|p| match seller {
                    Seller::One => p.p1,
                    Seller::Two => p.p2,
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Expected profit of `seller` when prices are `prices` and ranking follows
/// `algorithm`, using exact rank-conditional demands.
pub fn seller_profit(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    prices: PricePair,
    seller: Seller,
) -> f64 {
    let alpha = algorithm.alpha(prices);
    let own = prices.price(seller);
    let rival = prices.price(seller.other());
    let first = rank_demands(env, own, rival).0;
    let second = rank_demands(env, rival, own).1;
    let p_first = match seller {
        Seller::One => alpha,
        Seller::Two => 1.0 - alpha,
    };
    own * (p_first * first + (1.0 - p_first) * second)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOutcome {
    pub n: usize,
    pub seed: u64,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    /// Rank-conditional demands, each estimated on every consumer.
    pub d11: Estimate,
    pub d12: Estimate,
    pub d21: Estimate,
    pub d22: Estimate,
    pub bonus: Estimate,
    pub demand1: Estimate,
    pub demand2: Estimate,
    pub trade_prob: Estimate,
    pub profit: Estimate,
    pub sw: Estimate,
    pub cs: Estimate,
    pub sw1: Estimate,
    pub sw2: Estimate,
    /// Paired estimate of `sw1 - sw2`.
    pub sw_diff: Estimate,
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    buy1: bool,
    buy2: bool,
    welfare: f64,
    surplus: f64,
}

fn consumer(env: &SearchEnv, prices: PricePair, first: Seller, u1: f64, u2: f64) -> Outcome {
    let (u_first, u_second) = match first {
        Seller::One => (u1, u2),
        Seller::Two => (u2, u1),
    };
    let p_first = prices.price(first);
    let p_second = prices.price(first.other());
    let a = env.threshold();
    let s = env.cost();
    // (bought first, bought second, searched)
    let (take_first, take_second, searched) = match stopping_decision(env, prices, first, u_first) {
        StopDecision::BuyNow => (true, false, false),
        StopDecision::Continue => {
            if u_second - p_second > u_first - p_first {
                (false, true, true)
            } else {
                (true, false, true)
            }
        }
        StopDecision::NeverBuyFirst => {
            if p_second <= a {
                (false, u_second > p_second, true)
            } else {
                (false, false, false)
            }
        }
    };
    let cost = if searched { s } else { 0.0 };
    let (value, price) = if take_first {
        (u_first, p_first)
    } else if take_second {
        (u_second, p_second)
    } else {
        (0.0, 0.0)
    };
    let (buy1, buy2) = match first {
        Seller::One => (take_first, take_second),
        Seller::Two => (take_second, take_first),
    };
    Outcome {
        buy1,
        buy2,
        welfare: value - cost,
        surplus: value - price - cost,
    }
}

// Fields indexed: d11 d22 d21 d12 bonus demand1 demand2 trade profit sw cs sw1 sw2 sw_diff
const N_STATS: usize = 14;

#[derive(Clone, Copy)]
struct Sums {
    sum: [f64; N_STATS],
    sq: [f64; N_STATS],
}

impl Sums {
    fn new() -> Self {
        Self {
            sum: [0.0; N_STATS],
            sq: [0.0; N_STATS],
        }
    }

    fn push(&mut self, x: [f64; N_STATS]) {
        for ((s, q), v) in self.sum.iter_mut().zip(self.sq.iter_mut()).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    fn merge(mut self, other: &Sums) -> Self {
        for k in 0..N_STATS {
            self.sum[k] += other.sum[k];
            self.sq[k] += other.sq[k];
        }
        self
    }

    fn estimate(&self, k: usize, n: usize, binary: bool) -> Estimate {
        let nf = n as f64;
        let mean = self.sum[k] / nf;
        let var = if binary {
            mean * (1.0 - mean)
        } else if n > 1 {
            ((self.sq[k] - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / nf).sqrt(),
        }
    }
}

fn draw(dist: &Distribution, rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.random();
    match dist {
        Distribution::Uniform01 => v,
        d => bisect(|u| d.cdf(u) - v, 0.0, 1.0, 1e-13).unwrap_or(v),
    }
}

/// Simulate `n` consumers at fixed prices, ranking seller 1 first with
/// probability `alpha`.
///
/// For every consumer both rank orders are played out on the same draws;
/// rank-conditional demands and the welfare difference use both, the realized
/// quantities use the Bernoulli(`alpha`) order.
pub fn simulate(
    env: &SearchEnv,
    prices: PricePair,
    alpha: f64,
    n: usize,
    seed: u64,
) -> Result<EmpiricalOutcome> {
    if n == 0 {
        return Err(Error::InvalidArgument("simulate needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<Sums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(n - b * BLOCK);
            let mut sums = Sums::new();
            for _ in 0..count {
                let u1 = draw(env.dist(), &mut rng);
                let u2 = draw(env.dist(), &mut rng);
                let one_first = rng.random::<f64>() < alpha;
                let o12 = consumer(env, prices, Seller::One, u1, u2);
                let o21 = consumer(env, prices, Seller::Two, u1, u2);
                let real = if one_first { o12 } else { o21 };
                let ind = |b: bool| if b { 1.0 } else { 0.0 };
                let revenue = prices.p1 * ind(real.buy1) + prices.p2 * ind(real.buy2);
                sums.push([
                    ind(o12.buy1),
                    ind(o12.buy2),
                    ind(o21.buy2),
                    ind(o21.buy1),
                    ind(o12.buy1) - ind(o21.buy1),
                    ind(real.buy1),
                    ind(real.buy2),
                    ind(real.buy1 || real.buy2),
                    revenue,
                    real.welfare,
                    real.surplus,
                    o12.welfare,
                    o21.welfare,
                    o12.welfare - o21.welfare,
                ]);
            }
            sums
        })
        .collect();
    let total = partial.iter().fold(Sums::new(), |acc, s| acc.merge(s));
    let est = |k: usize, binary: bool| total.estimate(k, n, binary);
    Ok(EmpiricalOutcome {
        n,
        seed,
        p1: prices.p1,
        p2: prices.p2,
        alpha,
        d11: est(0, true),
        d22: est(1, true),
        d21: est(2, true),
        d12: est(3, true),
        bonus: est(4, false),
        demand1: est(5, true),
        demand2: est(6, true),
        trade_prob: est(7, true),
        profit: est(8, false),
        sw: est(9, false),
        cs: est(10, false),
        sw1: est(11, false),
        sw2: est(12, false),
        sw_diff: est(13, false),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationFound {
    pub seller: Seller,
    pub base_profit: f64,
    pub price: f64,
    pub profit: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub is_equilibrium: bool,
    pub p1: f64,
    pub p2: f64,
    pub seller1: DeviationFound,
    pub seller2: DeviationFound,
    pub grid_n: usize,
    pub tol: f64,
}

fn deviation_prices(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    seller: Seller,
    prices: PricePair,
    grid_n: usize,
) -> Vec<f64> {
    let top = env.threshold().min(1.0);
    let mut xs: Vec<f64> = (0..grid_n)
        .map(|i| {
            if i + 1 == grid_n {
                top
            } else {
                top * i as f64 / (grid_n - 1) as f64
            }
        })
        .collect();
    let rival = prices.price(seller.other());
    for b in algorithm.breakpoints(seller, rival) {
        for x in [b - PROBE, b + PROBE] {
            if (0.0..=top).contains(&x) {
                xs.push(x);
            }
        }
    }
    let own = prices.price(seller);
    xs.retain(|&x| x != own);
    xs
}

fn best_unilateral(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    prices: PricePair,
    seller: Seller,
    grid_n: usize,
) -> DeviationFound {
    let base_profit = seller_profit(env, algorithm, prices, seller);
    let (price, profit) = deviation_prices(env, algorithm, seller, prices, grid_n)
        .into_par_iter()
        .map(|x| {
            (
                x,
                seller_profit(env, algorithm, prices.with_price(seller, x), seller),
            )
        })
        .reduce(
            || (prices.price(seller), f64::NEG_INFINITY),
            |u, v| {
                if v.1 > u.1 || (v.1 == u.1 && v.0 < u.0) {
                    v
                } else {
                    u
                }
            },
        );
    let (price, profit) = if profit.is_finite() {
        (price, profit)
    } else {
        (prices.price(seller), base_profit)
    };
    DeviationFound {
        seller,
        base_profit,
        price,
        profit,
        gain: profit - base_profit,
    }
}

/// Check every unilateral deviation on a `grid_n`-point grid over `[0, A]`,
/// plus points just either side of the algorithm's ranking breakpoints.
pub fn verify_nash(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    prices: PricePair,
    grid_n: usize,
    tol: f64,
) -> Result<VerificationReport> {
    if grid_n < 2 {
        return Err(Error::InvalidArgument(
            "verify_nash needs grid_n >= 2".into(),
        ));
    }
    let seller1 = best_unilateral(env, algorithm, prices, Seller::One, grid_n);
    let seller2 = best_unilateral(env, algorithm, prices, Seller::Two, grid_n);
    Ok(VerificationReport {
        is_equilibrium: seller1.gain <= tol && seller2.gain <= tol,
        p1: prices.p1,
        p2: prices.p2,
        seller1,
        seller2,
        grid_n,
        tol,
    })
}

// Bisection on the sign of a central-difference slope near `x`.
fn polish_stationary(f: &impl Fn(f64) -> f64, x: f64, lo: f64, hi: f64) -> Option<f64> {
    let h = 1e-6;
    let slope = |t: f64| f(t + h) - f(t - h);
    let (mut a, mut b) = ((x - 1e-5).max(lo + h), (x + 1e-5).min(hi - h));
    if a >= b {
        return None;
    }
    let (sa, sb) = (slope(a), slope(b));
    if !(sa > 0.0 && sb < 0.0) {
        return None;
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if slope(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Best response of `seller` to the rival's current price: 201-point grid,
/// golden-section polish around the best point and breakpoint probes.
pub fn best_response(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    prices: PricePair,
    seller: Seller,
) -> f64 {
    let top = env.threshold().min(1.0);
    let profit = |x: f64| seller_profit(env, algorithm, prices.with_price(seller, x), seller);
    let n = 200;
    let step = top / n as f64;
    let (mut best_x, mut best_v) = (0.0, profit(0.0));
    let mut best_i = 0usize;
    for i in 1..=n {
        let x = if i == n { top } else { step * i as f64 };
        let v = profit(x);
        if v > best_v {
            (best_x, best_v, best_i) = (x, v, i);
        }
    }
    let lo = step * best_i.saturating_sub(1) as f64;
    let hi = (step * (best_i + 1) as f64).min(top);
    let (x, v) = golden_section_max(profit, lo, hi, 1e-13);
    if v > best_v {
        (best_x, best_v) = (x, v);
    }
    if let Some(x) = polish_stationary(&profit, best_x, lo, hi) {
        let v = profit(x);
        if v >= best_v - 1e-13 * best_v.abs().max(1.0) {
            (best_x, best_v) = (x, v.max(best_v));
        }
    }
    let rival = prices.price(seller.other());
    for b in algorithm.breakpoints(seller, rival) {
        for x in [b - PROBE, b, b + PROBE] {
            if (0.0..=top).contains(&x) {
                let v = profit(x);
                if v > best_v {
                    (best_x, best_v) = (x, v);
                }
            }
        }
    }
    best_x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSearch {
    /// Converged prices that also pass [`verify_nash`].
    pub prices: Option<PricePair>,
    pub converged: bool,
    pub iterations: usize,
    pub last: PricePair,
    pub report: Option<VerificationReport>,
}

/// Grid size and tolerance used to verify a converged best-response path.
pub const VERIFY_GRID: usize = 1000;
pub const VERIFY_TOL: f64 = 1e-8;

/// Alternating best-response iteration from `start`.
///
/// Stops once neither price moves by more than `tol` in a round. Failing to
/// converge within `max_iter` rounds is reported, not raised.
pub fn find_equilibrium(
    env: &SearchEnv,
    algorithm: &SearchAlgorithm,
    start: PricePair,
    max_iter: usize,
    tol: f64,
) -> Result<EquilibriumSearch> {
    let mut prices = start;
    for iter in 1..=max_iter {
        let p1 = best_response(env, algorithm, prices, Seller::One);
        let after1 = prices.with_price(Seller::One, p1);
        let p2 = best_response(env, algorithm, after1, Seller::Two);
        let next = after1.with_price(Seller::Two, p2);
        let moved = (next.p1 - prices.p1).abs().max((next.p2 - prices.p2).abs());
        prices = next;
        if moved < tol {
            let report = verify_nash(env, algorithm, prices, VERIFY_GRID, VERIFY_TOL)?;
            return Ok(EquilibriumSearch {
                prices: report.is_equilibrium.then_some(prices),
                converged: true,
                iterations: iter,
                last: prices,
                report: Some(report),
            });
        }
    }
    Ok(EquilibriumSearch {
        prices: None,
        converged: false,
        iterations: max_iter,
        last: prices,
        report: None,
    })
}
