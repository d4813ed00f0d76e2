//! Contract objectives and optimal contracts.
//!
//! A contract `(p1, p2, α)` recommends prices and ranks seller 1 first with
//! probability `α` on path. Objectives are industry profit, trade
//! probability, social welfare and consumer surplus. The constrained problem
//! is solved in two stages: for fixed prices every objective is linear in `α`,
//! so the inner choice is an endpoint of `φ(p1, p2)`; the outer search over
//! prices combines a diagonal scan, the traced boundary and a nested slice
//! search, and is certified against a full grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::feasible::{diagonal_roots, h_uniform, interval_uniform, trace_boundary, AlphaInterval};
use crate::numeric::{bisect, golden_section_max, grid_golden_max};
use crate::search::{
    demand_profile, social_values, uniform_profile, uniform_social, PricePair, SearchEnv,
    REGION_SLACK,
};
use crate::{Error, Result};

/// Single-price profit maximiser `1/√3`.
pub const UNIFORM_OPTIMUM: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Profit,
    Tp,
    Sw,
    Cs,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Profit,
        Objective::Tp,
        Objective::Sw,
        Objective::Cs,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Max => 1.0,
            Direction::Min => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
}

impl Contract {
    pub fn new(p1: f64, p2: f64, alpha: f64) -> Result<Self> {
        PricePair::new(p1, p2)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        Ok(Self { p1, p2, alpha })
    }

    pub fn prices(&self) -> PricePair {
        PricePair {
            p1: self.p1,
            p2: self.p2,
        }
    }

    /// The same contract with the sellers' labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
            alpha: 1.0 - self.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub profit1: f64,
    pub profit2: f64,
    pub profit: f64,
    pub trade_prob: f64,
    pub sw: f64,
    pub cs: f64,
}

impl ObjectiveValues {
    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Profit => self.profit,
            Objective::Tp => self.trade_prob,
            Objective::Sw => self.sw,
            Objective::Cs => self.cs,
        }
    }
}

fn assemble(
    p1: f64,
    p2: f64,
    alpha: f64,
    d: &crate::search::DemandProfile,
    sw1: f64,
    sw2: f64,
    trade_prob: f64,
) -> ObjectiveValues {
    let profit1 = alpha * p1 * d.d11 + (1.0 - alpha) * p1 * d.d12;
    let profit2 = alpha * p2 * d.d22 + (1.0 - alpha) * p2 * d.d21;
    let profit = profit1 + profit2;
    let sw = alpha * sw1 + (1.0 - alpha) * sw2;
    ObjectiveValues {
        profit1,
        profit2,
        profit,
        trade_prob,
        sw,
        cs: sw - profit,
    }
}

pub(crate) fn uniform_values(a: f64, s: f64, p1: f64, p2: f64, alpha: f64) -> ObjectiveValues {
    let d = uniform_profile(a, p1, p2);
    let social = uniform_social(a, s, p1, p2);
    assemble(p1, p2, alpha, &d, social.sw1, social.sw2, 1.0 - p1 * p2)
}

/// Per-seller profits, trade probability, welfare and consumer surplus of a
/// contract. Feasibility is not checked.
pub fn contract_values(env: &SearchEnv, c: Contract) -> Result<ObjectiveValues> {
    if !(0.0..=1.0).contains(&c.alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {} outside [0, 1]",
            c.alpha
        )));
    }
    let prices = c.prices();
    let d = demand_profile(env, prices)?;
    let social = social_values(env, prices)?;
    let dist = env.dist();
    let trade_prob = 1.0 - dist.cdf(c.p1) * dist.cdf(c.p2);
    Ok(assemble(
        c.p1, c.p2, c.alpha, &d, social.sw1, social.sw2, trade_prob,
    ))
}

// Sign of d J / d alpha at fixed prices.
fn alpha_slope_sign(objective: Objective, delta: f64) -> f64 {
    match objective {
        Objective::Profit => delta.signum(),
        Objective::Sw | Objective::Cs => -delta.signum(),
        Objective::Tp => 0.0,
    }
}

fn pick_alpha(objective: Objective, direction: Direction, delta: f64, phi: &AlphaInterval) -> f64 {
    if delta == 0.0 {
        return 0.5f64.clamp(phi.lo, phi.hi);
    }
    let slope = alpha_slope_sign(objective, delta) * direction.sign();
    if slope > 0.0 {
        phi.hi
    } else if slope < 0.0 {
        phi.lo
    } else {
        0.5f64.clamp(phi.lo, phi.hi)
    }
}

/// Best on-path `α` in `φ(p1, p2)` for the objective.
///
/// Profit rises with `α` when `p1 > p2`, welfare and consumer surplus fall;
/// trade probability and any objective at equal prices ignore `α`, and `1/2`
/// is returned.
pub fn optimal_alpha(
    env: &SearchEnv,
    prices: PricePair,
    objective: Objective,
    direction: Direction,
) -> Result<f64> {
    let phi = crate::feasible::alpha_interval(env, prices)?;
    if phi.is_empty() {
        return Err(Error::Infeasible);
    }
    Ok(pick_alpha(objective, direction, prices.delta(), &phi))
}

/// Maximiser of the single-price profit `p (1 - p^2)`.
pub fn uniform_price_optimum() -> (f64, f64) {
    golden_section_max(|p| p * (1.0 - p * p), 0.0, 1.0, 1e-14)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    SymmetricDiagonal,
    AsymmetricBoundary,
    Interior,
    UnconstrainedFirstBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Binding {
    pub ic1: bool,
    pub ic2: bool,
}

/// Grid check of a solver result. `gap` is how much the solver beats the
/// best grid point, in the direction of optimisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub resolution: usize,
    pub grid_best: f64,
    pub cell_diameter: f64,
    pub lipschitz: f64,
    pub bound: f64,
    pub gap: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub objective: Objective,
    pub direction: Direction,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub value: f64,
    pub regime: Regime,
    pub binding: Binding,
    pub certificate_resolution: usize,
    pub threshold: f64,
    pub cost: f64,
    /// The label-swapped optimum, for asymmetric solutions.
    pub mirror: Option<Contract>,
    pub certificate: Option<Certificate>,
    /// The optimum over the untruncated set lies outside the region where
    /// the demand system is valid, so the reported optimum is the clipped one.
    pub valid_region_clipped: bool,
    pub within_valid_region: bool,
}

impl SolveResult {
    pub fn contract(&self) -> Contract {
        Contract {
            p1: self.p1,
            p2: self.p2,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Points per line in the nested slice search.
    pub slice_grid: usize,
    /// Side of the certification grid (at least 400).
    pub certificate_resolution: usize,
    pub boundary_rays: usize,
    pub restrict_to_valid_region: bool,
    /// Symmetric candidates within this of the best are preferred.
    pub symmetric_tie: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            slice_grid: 160,
            certificate_resolution: 400,
            boundary_rays: 256,
            restrict_to_valid_region: true,
            symmetric_tie: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    p1: f64,
    p2: f64,
    score: f64,
}

struct Problem {
    a: f64,
    s: f64,
    objective: Objective,
    direction: Direction,
    restrict: bool,
}

impl Problem {
    fn admissible(&self, p1: f64, p2: f64) -> bool {
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
            return false;
        }
        if self.restrict
            && (p1.max(p2) > self.a + REGION_SLACK || (p1 - p2).abs() > 1.0 - self.a + REGION_SLACK)
        {
            return false;
        }
        h_uniform(self.a, p1, p2) <= 0.0
    }

    // Signed objective at the best alpha, or None outside the feasible set.
    fn eval(&self, p1: f64, p2: f64) -> Option<(f64, f64)> {
        if !self.admissible(p1, p2) {
            return None;
        }
        let phi = interval_uniform(self.a, p1, p2).ok()?;
        if phi.is_empty() {
            return None;
        }
        let alpha = pick_alpha(self.objective, self.direction, p1 - p2, &phi);
        let v = uniform_values(self.a, self.s, p1, p2, alpha).get(self.objective);
        Some((self.direction.sign() * v, alpha))
    }

    fn score(&self, p1: f64, p2: f64) -> f64 {
        self.eval(p1, p2).map_or(f64::NEG_INFINITY, |(v, _)| v)
    }

    // Grid over [lo, hi], then golden-section on both cells next to the best
    // grid point.
    fn line_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Option<(f64, f64)> {
        if hi.is_nan() || lo.is_nan() || hi < lo {
            return None;
        }
        let step = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n)
            .map(|i| if i == n { hi } else { lo + step * i as f64 })
            .collect();
        let (i_best, f_best) = xs.iter().enumerate().map(|(i, &x)| (i, f(x))).fold(
            (0, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
        if f_best == f64::NEG_INFINITY {
            return None;
        }
        let mut best = (xs[i_best], f_best);
        if i_best > 0 {
            let cand = golden_section_max(&f, xs[i_best - 1], xs[i_best], 1e-13);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        if i_best < n {
            let cand = golden_section_max(&f, xs[i_best], xs[i_best + 1], 1e-13);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        Some(best)
    }

    fn slice_range(&self, p2: f64, bbox: (f64, f64, f64, f64)) -> (f64, f64) {
        let (mut lo, mut hi) = (bbox.0, bbox.1);
        if self.restrict {
            lo = lo.max(p2 - (1.0 - self.a));
            hi = hi.min(self.a).min(p2 + (1.0 - self.a));
        }
        (lo.max(0.0), hi.min(1.0))
    }

    fn slice_best(&self, p2: f64, bbox: (f64, f64, f64, f64), n: usize) -> Option<(f64, f64)> {
        let (lo, hi) = self.slice_range(p2, bbox);
        Self::line_max(|x| self.score(x, p2), lo, hi, n)
    }

    fn slice_search(&self, bbox: (f64, f64, f64, f64), n: usize) -> Option<Candidate> {
        let (y0, mut y1) = (bbox.2, bbox.3);
        if self.restrict {
            y1 = y1.min(self.a);
        }
        if y1.is_nan() || y0.is_nan() || y1 < y0 {
            return None;
        }
        let step = (y1 - y0) / n as f64;
        let ys: Vec<f64> = (0..=n)
            .map(|j| if j == n { y1 } else { y0 + step * j as f64 })
            .collect();
        let g = |y: f64| {
            self.slice_best(y, bbox, n)
                .map_or(f64::NEG_INFINITY, |(_, v)| v)
        };
        let values: Vec<f64> = ys.par_iter().map(|&y| g(y)).collect();
        let (j_best, g_best) =
            values
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
        if g_best == f64::NEG_INFINITY {
            return None;
        }
        let mut best = (ys[j_best], g_best);
        if j_best > 0 {
            let cand = golden_section_max(g, ys[j_best - 1], ys[j_best], 1e-12);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        if j_best < n {
            let cand = golden_section_max(g, ys[j_best], ys[j_best + 1], 1e-12);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        let (x, score) = self.slice_best(best.0, bbox, n)?;
        Some(Candidate {
            p1: x,
            p2: best.0,
            score,
        })
    }

    fn diagonal(&self, low: f64, high: f64) -> Option<Candidate> {
        let (p, score) = grid_golden_max(|p| self.score(p, p), low, high, 200, 1e-14);
        (score > f64::NEG_INFINITY).then_some(Candidate {
            p1: p,
            p2: p,
            score,
        })
    }

    fn certify(&self, bbox: (f64, f64, f64, f64), res: usize, solver_score: f64) -> Certificate {
        let (x0, x1, y0, mut y1) = bbox;
        let x1 = if self.restrict { x1.min(self.a) } else { x1 };
        if self.restrict {
            y1 = y1.min(self.a);
        }
        let (hx, hy) = ((x1 - x0) / (res - 1) as f64, (y1 - y0) / (res - 1) as f64);
        let grid: Vec<Vec<Option<f64>>> = (0..res)
            .into_par_iter()
            .map(|j| {
                let y = y0 + hy * j as f64;
                (0..res)
                    .map(|i| self.eval(x0 + hx * i as f64, y).map(|(v, _)| v))
                    .collect()
            })
            .collect();
        let mut grid_best = f64::NEG_INFINITY;
        let mut lipschitz: f64 = 0.0;
        for j in 0..res {
            for i in 0..res {
                let Some(v) = grid[j][i] else { continue };
                grid_best = grid_best.max(v);
                if i + 1 < res {
                    if let Some(w) = grid[j][i + 1] {
                        lipschitz = lipschitz.max((w - v).abs() / hx);
                    }
                }
                if j + 1 < res {
                    if let Some(w) = grid[j + 1][i] {
                        lipschitz = lipschitz.max((w - v).abs() / hy);
                    }
                }
            }
        }
        let cell_diameter = hx.hypot(hy);
        let bound = 2.0 * cell_diameter * lipschitz;
        let gap = solver_score - grid_best;
        Certificate {
            resolution: res,
            grid_best: self.direction.sign() * grid_best,
            cell_diameter,
            lipschitz,
            bound,
            gap,
            certified: gap >= -1e-12 && gap <= bound,
        }
    }
}

fn best_of(cands: &[Candidate], tie: f64) -> Option<Candidate> {
    let best = cands
        .iter()
        .copied()
        .max_by(|a, b| a.score.total_cmp(&b.score))?;
    let symmetric = cands
        .iter()
        .copied()
        .filter(|c| c.p1 == c.p2)
        .max_by(|a, b| a.score.total_cmp(&b.score));
    match symmetric {
        Some(s) if s.score >= best.score - tie => Some(s),
        _ => Some(best),
    }
}

/// [`solve_with`] under the default configuration.
pub fn solve(env: &SearchEnv, objective: Objective, direction: Direction) -> Result<SolveResult> {
    solve_with(env, objective, direction, &SolverConfig::default())
}

/// Optimal feasible contract for an objective and direction.
pub fn solve_with(
    env: &SearchEnv,
    objective: Objective,
    direction: Direction,
    config: &SolverConfig,
) -> Result<SolveResult> {
    env.require_uniform("solve")?;
    if config.certificate_resolution < 400 {
        return Err(Error::InvalidArgument(format!(
            "certificate resolution {} < 400",
            config.certificate_resolution
        )));
    }
    if config.slice_grid < 8 {
        return Err(Error::InvalidArgument(
            "slice grid needs at least 8 points".into(),
        ));
    }
    let (a, s) = (env.threshold(), env.cost());
    if s <= 0.0 {
        return Err(Error::DegenerateBonus(0.0));
    }
    let roots = diagonal_roots(env).map_err(|_| Error::Infeasible)?;
    let curve = trace_boundary(env, config.boundary_rays)?;
    let (bx0, bx1, by0, by1) = curve.bounding_box();
    let pad = 1e-9;
    let bbox = (
        (bx0 - pad).max(0.0),
        (bx1 + pad).min(1.0),
        (by0 - pad).max(0.0),
        (by1 + pad).min(1.0),
    );

    let run = |restrict: bool| -> Option<Candidate> {
        let problem = Problem {
            a,
            s,
            objective,
            direction,
            restrict,
        };
        let mut cands = Vec::new();
        cands.extend(problem.diagonal(roots.low, roots.high));
        cands.extend(curve.points.iter().filter_map(|p| {
            problem.eval(p.p1, p.p2).map(|(v, _)| Candidate {
                p1: p.p1,
                p2: p.p2,
                score: v,
            })
        }));
        cands.extend(problem.slice_search(bbox, config.slice_grid));
        best_of(&cands, config.symmetric_tie)
    };

    let best = run(config.restrict_to_valid_region).ok_or(Error::Infeasible)?;
    let problem = Problem {
        a,
        s,
        objective,
        direction,
        restrict: config.restrict_to_valid_region,
    };
    let valid_region_clipped = config.restrict_to_valid_region
        && run(false).is_some_and(|u| {
            let outside =
                u.p1.max(u.p2) > a + REGION_SLACK || (u.p1 - u.p2).abs() > 1.0 - a + REGION_SLACK;
            outside && u.score > best.score + 1e-9
        });
    let certificate = problem.certify(bbox, config.certificate_resolution, best.score);

    let phi = interval_uniform(a, best.p1, best.p2)?;
    let alpha = pick_alpha(objective, direction, best.p1 - best.p2, &phi);
    let mut contract = Contract {
        p1: best.p1,
        p2: best.p2,
        alpha,
    };
    let mut binding = Binding {
        ic1: (alpha - phi.lo).abs() <= 1e-9,
        ic2: (alpha - phi.hi).abs() <= 1e-9,
    };
    if contract.p1 < contract.p2 {
        contract = contract.swapped();
        binding = Binding {
            ic1: binding.ic2,
            ic2: binding.ic1,
        };
    }
    let value = uniform_values(a, s, contract.p1, contract.p2, contract.alpha).get(objective);
    let delta = contract.p1 - contract.p2;
    let on_edge = h_uniform(a, contract.p1, contract.p2).abs() <= 1e-7
        || (config.restrict_to_valid_region
            && (a - contract.p1.max(contract.p2) <= 1e-7 || (1.0 - a) - delta.abs() <= 1e-7));
    let regime = if delta.abs() <= 1e-6 {
        Regime::SymmetricDiagonal
    } else if on_edge {
        Regime::AsymmetricBoundary
    } else {
        Regime::Interior
    };
    let within_valid_region = env.in_nondegenerate_region(contract.prices());
    Ok(SolveResult {
        objective,
        direction,
        p1: contract.p1,
        p2: contract.p2,
        alpha: contract.alpha,
        value,
        regime,
        binding,
        certificate_resolution: config.certificate_resolution,
        threshold: a,
        cost: s,
        mirror: (delta != 0.0).then(|| contract.swapped()),
        certificate: Some(certificate),
        valid_region_clipped,
        within_valid_region,
    })
}

/// Joint-profit optimum without incentive constraints: the seller ranked
/// first charges `p1 = 1 / (3 p2)` and `p2` solves
/// `A^2/2 - A + 1 - 2/(3 p2) + 2 p2 - 3 p2^2 / 2 = 0` on `(0.1, 1/√3)`.
pub fn first_best(env: &SearchEnv) -> Result<SolveResult> {
    env.require_uniform("first_best")?;
    let (a, s) = (env.threshold(), env.cost());
    let gamma = |p2: f64| 0.5 * a * a - a + 1.0 - 2.0 / (3.0 * p2) + 2.0 * p2 - 1.5 * p2 * p2;
    let p2 = bisect(gamma, 0.1, UNIFORM_OPTIMUM, 1e-15)?;
    let p1 = 1.0 / (3.0 * p2);
    let contract = Contract { p1, p2, alpha: 1.0 };
    let value = uniform_values(a, s, p1, p2, 1.0).profit;
    Ok(SolveResult {
        objective: Objective::Profit,
        direction: Direction::Max,
        p1,
        p2,
        alpha: 1.0,
        value,
        regime: Regime::UnconstrainedFirstBest,
        binding: Binding::default(),
        certificate_resolution: 0,
        threshold: a,
        cost: s,
        mirror: Some(contract.swapped()),
        certificate: None,
        valid_region_clipped: false,
        within_valid_region: p1 <= 1.0 && env.in_nondegenerate_region(contract.prices()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalThreshold {
    pub cost: f64,
    pub threshold: f64,
    pub p_high: f64,
}

/// Search cost at which the highest implementable symmetric price equals the
/// single-price optimum `1/√3`.
pub fn critical_threshold(s_lo: f64, s_hi: f64) -> Result<CriticalThreshold> {
    let gap = |s: f64| {
        SearchEnv::uniform_from_cost(s)
            .and_then(|e| diagonal_roots(&e))
            .map_or(f64::NAN, |r| r.high - UNIFORM_OPTIMUM)
    };
    let cost = bisect(gap, s_lo.min(s_hi), s_lo.max(s_hi), 1e-13)?;
    let env = SearchEnv::uniform_from_cost(cost)?;
    Ok(CriticalThreshold {
        cost,
        threshold: env.threshold(),
        p_high: diagonal_roots(&env)?.high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttainabilityReport {
    pub first_best_value: f64,
    pub constrained_value: f64,
    pub gap: f64,
    pub unattainable: bool,
}

pub fn attainability_gap(
    first_best: &SolveResult,
    constrained: &SolveResult,
) -> AttainabilityReport {
    let gap = first_best.value - constrained.value;
    AttainabilityReport {
        first_best_value: first_best.value,
        constrained_value: constrained.value,
        gap,
        unattainable: gap > 1e-9,
    }
}

/// Compare the first best with the constrained profit optimum.
pub fn first_best_attainability_check(env: &SearchEnv) -> Result<AttainabilityReport> {
    let fb = first_best(env)?;
    let constrained = solve(env, Objective::Profit, Direction::Max)?;
    Ok(attainability_gap(&fb, &constrained))
}
