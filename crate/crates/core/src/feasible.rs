//! Implementable prices.
//!
//! A price pair is implementable when some on-path ranking probability `α`
//! makes both sellers prefer the recommended prices to their best rank-two
//! deviation. Both incentive constraints collapse into
//!
//! ```text
//! H(p1, p2) = p2 M(p2) + p1 M(p1) + p1 p2 F(p1) F(p2) - p1 p2 <= 0
//! ```
//!
//! where `M(r)` is the best rank-two deviation profit against a rival priced
//! at `r`. Everything here assumes uniform match values.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::uniform_best_deviation;
use crate::numeric::{bisect, golden_section_max, grid_golden_max};
use crate::search::{uniform_profile, PricePair, SearchEnv};
use crate::{Error, Result};

/// `H <= MEMBERSHIP_TOL` counts as implementable (the set is closed).
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Bonus at or below this is treated as zero.
pub const DEGENERATE_BONUS: f64 = 1e-12;

const BOX_LO: f64 = 1e-9;

pub(crate) fn max_deviation_profit(a: f64, rival: f64) -> f64 {
    uniform_best_deviation(a, rival).map_or(f64::NAN, |d| d.profit)
}

pub(crate) fn h_uniform(a: f64, p1: f64, p2: f64) -> f64 {
    p2 * max_deviation_profit(a, p2) + p1 * max_deviation_profit(a, p1) + p1 * p1 * p2 * p2
        - p1 * p2
}

/// `H(p1, p2)` inside the nondegenerate region.
pub fn h_value(env: &SearchEnv, prices: PricePair) -> Result<f64> {
    env.require_uniform("h_value")?;
    env.guard(prices)?;
    Ok(h_uniform(env.threshold(), prices.p1, prices.p2))
}

/// `H` built from the polynomial continuation of the demand system, defined on
/// all of `[0, 1]^2`. This is the untruncated set the corner-regime
/// constraints are compared against.
pub fn h_value_extended(env: &SearchEnv, prices: PricePair) -> Result<f64> {
    env.require_uniform("h_value_extended")?;
    Ok(h_uniform(env.threshold(), prices.p1, prices.p2))
}

/// Virtual demands `(M(p2) / p1, M(p1) / p2)`: the demand each seller would
/// need on path to match its best deviation.
pub fn virtual_demands(env: &SearchEnv, prices: PricePair) -> Result<(f64, f64)> {
    env.require_uniform("virtual_demands")?;
    env.guard(prices)?;
    let a = env.threshold();
    Ok((
        max_deviation_profit(a, prices.p2) / prices.p1,
        max_deviation_profit(a, prices.p1) / prices.p2,
    ))
}

/// Membership through total virtual demand not exceeding total demand.
pub fn contains_by_virtual_demand(env: &SearchEnv, prices: PricePair) -> Result<bool> {
    let (phi1, phi2) = virtual_demands(env, prices)?;
    let (p1, p2) = (prices.p1, prices.p2);
    Ok(phi1 + phi2 <= 1.0 - p1 * p2 + MEMBERSHIP_TOL / (p1 * p2))
}

/// The set of on-path `α` satisfying both incentive constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

impl AlphaInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Self {
                lo,
                hi,
                empty: false,
            }
        } else {
            Self::empty_with(lo, hi)
        }
    }

    pub(crate) fn empty_with(lo: f64, hi: f64) -> Self {
        let clamp = |x: f64, fallback: f64| {
            if x.is_finite() {
                x.clamp(0.0, 1.0)
            } else {
                fallback
            }
        };
        Self {
            lo: clamp(lo, 1.0),
            hi: clamp(hi, 0.0),
            empty: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_singleton(&self, tol: f64) -> bool {
        !self.empty && self.hi - self.lo <= tol
    }

    pub fn contains(&self, alpha: f64, tol: f64) -> bool {
        !self.empty && alpha >= self.lo - tol && alpha <= self.hi + tol
    }

    pub fn intersect(&self, other: &Self) -> Self {
        if self.empty || other.empty {
            return Self::empty_with(self.lo.max(other.lo), self.hi.min(other.hi));
        }
        Self::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

pub(crate) fn interval_uniform(a: f64, p1: f64, p2: f64) -> Result<AlphaInterval> {
    let profile = uniform_profile(a, p1, p2);
    let bonus = profile.bonus;
    if bonus <= DEGENERATE_BONUS {
        return Err(Error::DegenerateBonus(bonus));
    }
    let m1 = max_deviation_profit(a, p2);
    let m2 = max_deviation_profit(a, p1);
    let lo = (m1 - p1 * profile.d12) / (p1 * bonus);
    let hi = 1.0 - (m2 - p2 * profile.d22) / (p2 * bonus);
    let h = h_uniform(a, p1, p2);
    if h.is_nan() || h > MEMBERSHIP_TOL {
        return Ok(AlphaInterval::empty_with(lo, hi));
    }
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    if lo > hi {
        // Within the membership tolerance the constraints cross: one point.
        let mid = 0.5 * (lo + hi);
        return Ok(AlphaInterval {
            lo: mid,
            hi: mid,
            empty: false,
        });
    }
    Ok(AlphaInterval {
        lo,
        hi,
        empty: false,
    })
}

/// `φ(p1, p2) = [α_lo, α_hi]`; empty exactly when `H > 0`.
pub fn alpha_interval(env: &SearchEnv, prices: PricePair) -> Result<AlphaInterval> {
    env.require_uniform("alpha_interval")?;
    env.guard(prices)?;
    interval_uniform(env.threshold(), prices.p1, prices.p2)
}

/// [`alpha_interval`] on the polynomial continuation, without the region guard.
pub fn alpha_interval_extended(env: &SearchEnv, prices: PricePair) -> Result<AlphaInterval> {
    env.require_uniform("alpha_interval_extended")?;
    interval_uniform(env.threshold(), prices.p1, prices.p2)
}

pub fn contains(env: &SearchEnv, prices: PricePair) -> Result<bool> {
    Ok(h_value(env, prices)? <= MEMBERSHIP_TOL)
}

pub fn contains_extended(env: &SearchEnv, prices: PricePair) -> Result<bool> {
    Ok(h_value_extended(env, prices)? <= MEMBERSHIP_TOL)
}

/// Lowest and highest symmetric prices on the boundary, `p_low < p_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRoots {
    pub low: f64,
    pub high: f64,
}

/// Roots of `H(p, p) = 0`.
///
/// `H(p, p) / p^2 = 2 M(p) / p + p^2 - 1` is minimised first; the two roots
/// are then bracketed on either side of the minimiser. Each returned root is
/// the inside end of its final bracket, so `H <= 0` holds there.
pub fn diagonal_roots(env: &SearchEnv) -> Result<DiagonalRoots> {
    env.require_uniform("diagonal_roots")?;
    let a = env.threshold();
    let g = |p: f64| 2.0 * max_deviation_profit(a, p) / p + p * p - 1.0;
    let (p_min, neg_min) = grid_golden_max(|p| -g(p), 1e-3, 1.0, 400, 1e-14);
    if -neg_min > 0.0 {
        return Err(Error::NoRoot(format!(
            "H(p, p) > 0 for all p at threshold {a}; the implementable set is empty"
        )));
    }
    let low = bisect(g, p_min, 1e-9, 1e-15)?;
    let high = bisect(g, p_min, 1.0, 1e-15)?;
    Ok(DiagonalRoots { low, high })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointTag {
    Plain,
    MLeft,
    MRight,
    MLow,
    MHigh,
    DiagLow,
    DiagHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub p1: f64,
    pub p2: f64,
    pub tag: PointTag,
}

impl BoundaryPoint {
    pub fn prices(&self) -> PricePair {
        PricePair {
            p1: self.p1,
            p2: self.p2,
        }
    }
}

/// Ordered sample of the boundary, counterclockwise around the diagonal
/// anchor. The curve is closed; the first point is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub anchor: PricePair,
    pub points: Vec<BoundaryPoint>,
    pub m_left: PricePair,
    pub m_right: PricePair,
    pub m_low: PricePair,
    pub m_high: PricePair,
    pub p_low_diag: f64,
    pub p_high_diag: f64,
}

impl BoundaryCurve {
    /// Rebuild a curve from tagged points, e.g. after reading CSV.
    pub fn from_points(points: Vec<BoundaryPoint>) -> Result<Self> {
        let find = |tag: PointTag| {
            points
                .iter()
                .find(|p| p.tag == tag)
                .map(BoundaryPoint::prices)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("boundary is missing a {tag:?} point"))
                })
        };
        let (m_left, m_right, m_low, m_high) = (
            find(PointTag::MLeft)?,
            find(PointTag::MRight)?,
            find(PointTag::MLow)?,
            find(PointTag::MHigh)?,
        );
        let p_low_diag = find(PointTag::DiagLow)?.p1;
        let p_high_diag = find(PointTag::DiagHigh)?.p1;
        let mid = 0.5 * (p_low_diag + p_high_diag);
        Ok(Self {
            anchor: PricePair { p1: mid, p2: mid },
            points,
            m_left,
            m_right,
            m_low,
            m_high,
            p_low_diag,
            p_high_diag,
        })
    }

    pub fn prices(&self) -> Vec<PricePair> {
        self.points.iter().map(BoundaryPoint::prices).collect()
    }

    /// `(min p1, max p1, min p2, max p2)` over the sample.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.p1), b.max(p.p1), c.min(p.p2), d.max(p.p2)),
        )
    }
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[PricePair], b: &[PricePair]) -> f64 {
    let directed = |x: &[PricePair], y: &[PricePair]| {
        x.par_iter()
            .map(|p| {
                y.iter()
                    .map(|q| (p.p1 - q.p1).hypot(p.p2 - q.p2))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

struct Tracer {
    a: f64,
    centre: f64,
}

impl Tracer {
    fn h(&self, p1: f64, p2: f64) -> f64 {
        h_uniform(self.a, p1, p2)
    }

    fn ray(&self, theta: f64) -> Result<PricePair> {
        let (dy, dx) = theta.sin_cos();
        let c = self.centre;
        let reach = |d: f64| {
            if d > 1e-15 {
                (1.0 - c) / d
            } else if d < -1e-15 {
                (c - BOX_LO) / -d
            } else {
                f64::INFINITY
            }
        };
        let t_max = reach(dx).min(reach(dy));
        let f = |t: f64| self.h(c + t * dx, c + t * dy);
        if f(t_max) <= 0.0 {
            return Err(Error::NoRoot(format!(
                "the implementable set reaches the price box along direction {theta}"
            )));
        }
        let t = bisect(f, 0.0, t_max, 1e-15)?;
        Ok(PricePair {
            p1: c + t * dx,
            p2: c + t * dy,
        })
    }

    fn angle(&self, p: PricePair) -> f64 {
        let theta = (p.p2 - self.centre).atan2(p.p1 - self.centre);
        if theta < 0.0 {
            theta + 2.0 * PI
        } else {
            theta
        }
    }

    // Golden-section polish of an extreme point over neighbouring ray angles.
    fn polish<S>(&self, thetas: &[f64], points: &[PricePair], score: S) -> PricePair
    where
        S: Fn(PricePair) -> f64 + Copy,
    {
        let n = thetas.len();
        let k = (0..n)
            .max_by(|&i, &j| score(points[i]).total_cmp(&score(points[j])))
            .expect("at least one ray");
        let step = 2.0 * PI / n as f64;
        let theta_k = thetas[k];
        let (theta, _) = golden_section_max(
            |t| self.ray(t).map_or(f64::NEG_INFINITY, score),
            theta_k - step,
            theta_k + step,
            1e-13,
        );
        match self.ray(theta) {
            Ok(p) if score(p) >= score(points[k]) => p,
            _ => points[k],
        }
    }
}

/// Trace the boundary with `n` rays from the diagonal anchor.
pub fn trace_boundary(env: &SearchEnv, n: usize) -> Result<BoundaryCurve> {
    if n < 64 {
        return Err(Error::InvalidArgument(format!(
            "boundary trace needs at least 64 rays, got {n}"
        )));
    }
    let roots = diagonal_roots(env)?;
    let tracer = Tracer {
        a: env.threshold(),
        centre: 0.5 * (roots.low + roots.high),
    };
    let thetas: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let rays = thetas
        .par_iter()
        .map(|&t| tracer.ray(t))
        .collect::<Result<Vec<_>>>()?;

    let m_left = tracer.polish(&thetas, &rays, |p| -p.p1);
    let m_right = tracer.polish(&thetas, &rays, |p| p.p1);
    let m_low = tracer.polish(&thetas, &rays, |p| -p.p2);
    let m_high = tracer.polish(&thetas, &rays, |p| p.p2);
    let specials = [
        (m_left, PointTag::MLeft),
        (m_right, PointTag::MRight),
        (m_low, PointTag::MLow),
        (m_high, PointTag::MHigh),
        (
            PricePair {
                p1: roots.low,
                p2: roots.low,
            },
            PointTag::DiagLow,
        ),
        (
            PricePair {
                p1: roots.high,
                p2: roots.high,
            },
            PointTag::DiagHigh,
        ),
    ];

    let mut tagged: Vec<(f64, BoundaryPoint)> = specials
        .iter()
        .map(|&(p, tag)| {
            (
                tracer.angle(p),
                BoundaryPoint {
                    p1: p.p1,
                    p2: p.p2,
                    tag,
                },
            )
        })
        .collect();
    let special_angles: Vec<f64> = tagged.iter().map(|(t, _)| *t).collect();
    for (&theta, p) in thetas.iter().zip(&rays) {
        // A ray that lands on a special point (the diagonal rays) is dropped.
        if special_angles.iter().any(|s| (s - theta).abs() < 1e-12) {
            continue;
        }
        tagged.push((
            theta,
            BoundaryPoint {
                p1: p.p1,
                p2: p.p2,
                tag: PointTag::Plain,
            },
        ));
    }
    tagged.sort_by(|x, y| x.0.total_cmp(&y.0));

    Ok(BoundaryCurve {
        anchor: PricePair {
            p1: tracer.centre,
            p2: tracer.centre,
        },
        points: tagged.into_iter().map(|(_, p)| p).collect(),
        m_left,
        m_right,
        m_low,
        m_high,
        p_low_diag: roots.low,
        p_high_diag: roots.high,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub samples_checked: usize,
    pub boundary_checked: usize,
    pub violations: Vec<PricePair>,
    /// Largest `H` under the larger search cost over the smaller set's boundary.
    pub max_boundary_h: f64,
}

/// Check that the implementable set under the smaller search cost is contained
/// in the set under the larger one, on `samples` interior points plus the
/// traced boundary of the smaller set.
pub fn nesting_check(
    env_small_s: &SearchEnv,
    env_large_s: &SearchEnv,
    samples: usize,
) -> Result<NestingReport> {
    env_small_s.require_uniform("nesting_check")?;
    env_large_s.require_uniform("nesting_check")?;
    if env_small_s.cost() > env_large_s.cost() {
        return Err(Error::InvalidArgument(format!(
            "nesting needs s1 <= s2, got {} > {}",
            env_small_s.cost(),
            env_large_s.cost()
        )));
    }
    let (a_small, a_large) = (env_small_s.threshold(), env_large_s.threshold());
    let curve = trace_boundary(env_small_s, 256)?;
    let (x0, x1, y0, y1) = curve.bounding_box();

    let mut rng = ChaCha8Rng::seed_from_u64(0x6e65_7374);
    let mut interior = Vec::with_capacity(samples);
    let mut attempts = 0usize;
    while interior.len() < samples && attempts < 1000 * samples.max(1) {
        attempts += 1;
        let p = PricePair {
            p1: rng.random_range(x0..=x1),
            p2: rng.random_range(y0..=y1),
        };
        if h_uniform(a_small, p.p1, p.p2) <= MEMBERSHIP_TOL {
            interior.push(p);
        }
    }

    let mut violations: Vec<PricePair> = interior
        .iter()
        .copied()
        .filter(|p| h_uniform(a_large, p.p1, p.p2) > MEMBERSHIP_TOL)
        .collect();
    let mut max_boundary_h = f64::NEG_INFINITY;
    for p in curve.prices() {
        let h = h_uniform(a_large, p.p1, p.p2);
        max_boundary_h = max_boundary_h.max(h);
        if h > MEMBERSHIP_TOL {
            violations.push(p);
        }
    }
    Ok(NestingReport {
        samples_checked: interior.len(),
        boundary_checked: curve.points.len(),
        violations,
        max_boundary_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcConstraint {
    Ic1,
    Ic2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcLocusPoint {
    pub constraint: IcConstraint,
    pub p1: f64,
    pub p2: f64,
}

/// Loci where each incentive constraint binds for a fixed on-path `α`.
///
/// IC1 is solved for `p1` on each of `n` columns `p2`; IC2 for `p2` on each
/// row `p1`. Only the nondegenerate band is searched. Where a constraint is
/// satisfied at a single tangency point (e.g. IC1 at `α = 0`) that point is
/// emitted.
pub fn ic_loci(env: &SearchEnv, alpha: f64, n: usize) -> Result<Vec<IcLocusPoint>> {
    env.require_uniform("ic_loci")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("ic_loci needs n >= 2".into()));
    }
    let a = env.threshold();
    let band = 1.0 - a;
    let rows: Vec<f64> = (1..=n).map(|i| a * i as f64 / n as f64).collect();

    // Slack of seller 1's constraint at own price x against rival r (and by
    // symmetry seller 2's, with the roles of the demands swapped).
    let slack = |x: f64, r: f64| {
        let d = uniform_profile(a, x, r);
        alpha * x * d.d11 + (1.0 - alpha) * x * d.d12 - max_deviation_profit(a, r)
    };
    let slack2 = |x: f64, r: f64| {
        let d = uniform_profile(a, r, x);
        alpha * x * d.d22 + (1.0 - alpha) * x * d.d21 - max_deviation_profit(a, r)
    };

    let solve_line = |r: f64, g: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let lo = (r - band).max(BOX_LO);
        let hi = (r + band).min(a);
        if lo >= hi {
            return Vec::new();
        }
        let (x_max, g_max) = grid_golden_max(g, lo, hi, 200, 1e-14);
        if g_max < -1e-12 {
            return Vec::new();
        }
        if g_max <= 1e-12 {
            return vec![x_max];
        }
        let mut out = Vec::new();
        if g(lo) < 0.0 {
            if let Ok(x) = bisect(|x| -g(x), lo, x_max, 1e-14) {
                out.push(x);
            }
        }
        if g(hi) < 0.0 {
            if let Ok(x) = bisect(|x| -g(x), hi, x_max, 1e-14) {
                out.push(x);
            }
        }
        out
    };

    let mut loci = Vec::new();
    for &r in &rows {
        for x in solve_line(r, &|x| slack(x, r)) {
            loci.push(IcLocusPoint {
                constraint: IcConstraint::Ic1,
                p1: x,
                p2: r,
            });
        }
    }
    for &r in &rows {
        for x in solve_line(r, &|x| slack2(x, r)) {
            loci.push(IcLocusPoint {
                constraint: IcConstraint::Ic2,
                p1: r,
                p2: x,
            });
        }
    }
    Ok(loci)
}

/// Direction of the diagonal rays, `π/4` and `5π/4`.
pub const DIAGONAL_ANGLE: f64 = FRAC_PI_4;
