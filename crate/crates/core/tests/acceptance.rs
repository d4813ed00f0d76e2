//! Acceptance gate: one line per criterion, non-zero exit on any failure.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use search_contracts::corner::{inclusion_violations, sweep};
use search_contracts::deviation::brute_force_best_deviation;
use search_contracts::feasible::{
    alpha_interval, contains, contains_extended, diagonal_roots, h_value_extended, hausdorff,
    nesting_check, trace_boundary,
};
use search_contracts::objectives::{
    contract_values, critical_threshold, first_best, solve, uniform_price_optimum, Contract,
    Direction, Objective, Regime, SolveResult, UNIFORM_OPTIMUM,
};
use search_contracts::search::{demand_profile, social_values, Distribution, UniformMatch};
use search_contracts::sim::{find_equilibrium, simulate, verify_nash, SearchAlgorithm};
use search_contracts::{PricePair, SearchEnv, Seller};

type Check = std::result::Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    };
}

fn env(a: f64) -> SearchEnv {
    SearchEnv::uniform_from_threshold(a).unwrap()
}

fn pp(p1: f64, p2: f64) -> PricePair {
    PricePair::new(p1, p2).unwrap()
}

fn within_time(start: Instant, limit: Duration) -> Check {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn closed_form_anchors() -> Check {
    let t = Instant::now();
    let (p, _) = uniform_price_optimum();
    ensure!(
        (p - 0.5773503).abs() <= 1e-7 && (p - UNIFORM_OPTIMUM).abs() <= 1e-8,
        "p* = {p}"
    );
    for a in [0.6, 0.7, 0.8, 0.9] {
        let fb = first_best(&env(a)).map_err(|e| e.to_string())?;
        ensure!(
            (fb.p1 * fb.p2 - 1.0 / 3.0).abs() <= 1e-8,
            "A={a}: p1 p2 = {}",
            fb.p1 * fb.p2
        );
        ensure!(
            fb.p2 > 0.1 && fb.p2 < UNIFORM_OPTIMUM,
            "A={a}: p2* = {}",
            fb.p2
        );
    }
    within_time(t, Duration::from_secs(1))
}

// Central-difference partials of the first-rank and second-rank demands.
fn demand_suite() -> Check {
    let t = Instant::now();
    for a in [0.6, 0.7, 0.9] {
        let e = env(a);
        let s = e.cost();
        let quad = SearchEnv::general(Distribution::General(Arc::new(UniformMatch)), s)
            .map_err(|e| e.to_string())?;
        let band = 1.0 - a;
        let h = 1e-5;
        for j in 0..50 {
            let p2 = 0.01 + (a - 0.01 - 1e-4) * j as f64 / 49.0;
            let lo = (p2 - band).max(0.0) + 1e-4;
            let hi = (p2 + band).min(a) - 1e-4;
            for i in 0..50 {
                let p1 = lo + (hi - lo) * i as f64 / 49.0;
                let p = pp(p1, p2);
                let d = demand_profile(&e, p).map_err(|e| e.to_string())?;
                ensure!(
                    (d.d11 + d.d22 - (1.0 - p1 * p2)).abs() <= 1e-12,
                    "adding-up at {p:?}"
                );
                ensure!(
                    (d.d12 + d.d21 - (1.0 - p1 * p2)).abs() <= 1e-12,
                    "adding-up (2) at {p:?}"
                );
                ensure!(
                    ((d.d11 - d.d12) - (d.d21 - d.d22)).abs() <= 1e-12,
                    "bonus symmetry at {p:?}"
                );
                ensure!(d.bonus > 0.0, "bonus sign at {p:?}");
                let f = |x: f64, y: f64| demand_profile(&e, pp(x, y)).unwrap();
                let d11_p2 = (f(p1, p2 + h).d11 - f(p1, p2 - h).d11) / (2.0 * h);
                let d22_p1 = (f(p1 + h, p2).d22 - f(p1 - h, p2).d22) / (2.0 * h);
                let d11_p1 = (f(p1 + h, p2).d11 - f(p1 - h, p2).d11) / (2.0 * h);
                let d22_p2 = (f(p1, p2 + h).d22 - f(p1, p2 - h).d22) / (2.0 * h);
                ensure!(
                    (d11_p2 - (1.0 - p2)).abs() <= 1e-6,
                    "dD11/dp2 at {p:?}: {d11_p2}"
                );
                ensure!(
                    (d22_p1 - (1.0 - p2)).abs() <= 1e-6,
                    "dD22/dp1 at {p:?}: {d22_p1}"
                );
                ensure!((d11_p1 + 1.0).abs() <= 1e-6, "dD11/dp1 at {p:?}: {d11_p1}");
                ensure!(
                    (d22_p2 - (p2 - p1 - 1.0)).abs() <= 1e-6,
                    "dD22/dp2 at {p:?}: {d22_p2}"
                );
                ensure!(
                    d11_p2 >= 0.0 && d11_p1 < 0.0 && d22_p2 <= 1e-6,
                    "derivative signs at {p:?}"
                );
                let g = demand_profile(&quad, p).map_err(|e| e.to_string())?;
                for (x, y) in [
                    (d.d11, g.d11),
                    (d.d12, g.d12),
                    (d.d21, g.d21),
                    (d.d22, g.d22),
                ] {
                    ensure!(
                        (x - y).abs() <= 1e-8,
                        "quadrature vs closed form at {p:?}: {x} {y}"
                    );
                }
            }
        }
    }
    within_time(t, Duration::from_secs(10))
}

fn monte_carlo_oracle() -> Check {
    let t = Instant::now();
    let e = env(0.7);
    let pairs = [
        (0.4, 0.3),
        (0.3, 0.3),
        (0.5, 0.35),
        (0.25, 0.45),
        (0.6, 0.55),
    ];
    for (k, &(p1, p2)) in pairs.iter().enumerate() {
        let p = pp(p1, p2);
        let d = demand_profile(&e, p).map_err(|e| e.to_string())?;
        let out = simulate(&e, p, 1.0, 1_000_000, 1000 + k as u64).map_err(|e| e.to_string())?;
        ensure!(
            out.d11.within(d.d11, 3.0),
            "{p:?}: d11 {:?} vs {}",
            out.d11,
            d.d11
        );
        ensure!(
            out.d22.within(d.d22, 3.0),
            "{p:?}: d22 {:?} vs {}",
            out.d22,
            d.d22
        );
        let target = -(p1 - p2).powi(3) / 3.0;
        ensure!(
            out.sw_diff.within(target, 3.0),
            "{p:?}: sw diff {:?} vs {target}",
            out.sw_diff
        );
        if k == 0 {
            ensure!(
                (d.d11 - 0.4).abs() < 1e-12 && (d.d22 - 0.48).abs() < 1e-12,
                "closed form at (0.4, 0.3)"
            );
            let sv = social_values(&e, p).map_err(|e| e.to_string())?;
            ensure!(
                (sv.sw1 - sv.sw2 + 1.0 / 3000.0).abs() < 1e-12,
                "sw1 - sw2 = {}",
                sv.sw1 - sv.sw2
            );
        }
    }
    within_time(t, Duration::from_secs(30))
}

fn feasible_geometry() -> Check {
    let t = Instant::now();
    let e = env(0.7);
    let curve = trace_boundary(&e, 512).map_err(|e| e.to_string())?;
    for p in &curve.points {
        let h = h_value_extended(&e, p.prices()).unwrap();
        ensure!(h.abs() <= 1e-9, "|H| = {} at {:?}", h.abs(), p);
    }
    let pts = curve.prices();
    let reflected: Vec<PricePair> = pts.iter().map(|p| p.swapped()).collect();
    let hd = hausdorff(&pts, &reflected);
    ensure!(hd <= 1e-8, "swap Hausdorff {hd}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let a = pts[rng.random_range(0..pts.len())];
        let b = pts[rng.random_range(0..pts.len())];
        let m = pp(0.5 * (a.p1 + b.p1), 0.5 * (a.p2 + b.p2));
        ensure!(contains_extended(&e, m).unwrap(), "midpoint {m:?} outside");
    }

    // Independent sign scan of H(p, p) with brute-force deviations.
    let n = 10_000;
    let mut scan = Vec::new();
    let mut prev: Option<bool> = None;
    for i in 1..n {
        let p = 0.7 * i as f64 / n as f64;
        let m = brute_force_best_deviation(&e, p, 1000).unwrap().profit;
        let inside = 2.0 * p * m + p.powi(4) - p * p <= 0.0;
        if prev.is_some_and(|q| q != inside) {
            scan.push(p);
        }
        prev = Some(inside);
    }
    ensure!(scan.len() == 2, "sign scan found {} changes", scan.len());
    let roots = diagonal_roots(&e).map_err(|e| e.to_string())?;
    ensure!(
        (roots.low - 0.2385).abs() <= 5e-3 && (roots.low - scan[0]).abs() <= 5e-3,
        "p_low {} scan {}",
        roots.low,
        scan[0]
    );
    ensure!(
        (roots.high - 0.577).abs() <= 5e-3 && (roots.high - scan[1]).abs() <= 5e-3,
        "p_high {} scan {}",
        roots.high,
        scan[1]
    );
    let phi = alpha_interval(&e, pp(roots.high, roots.high)).map_err(|e| e.to_string())?;
    ensure!(
        !phi.is_empty() && (phi.lo - 0.5).abs() <= 1e-6 && (phi.hi - 0.5).abs() <= 1e-6,
        "phi(p_high) = {phi:?}"
    );

    let small = SearchEnv::uniform_from_cost(0.02).unwrap();
    let large = SearchEnv::uniform_from_cost(0.045).unwrap();
    let report = nesting_check(&small, &large, 1000).map_err(|e| e.to_string())?;
    ensure!(
        report.samples_checked == 1000,
        "only {} samples",
        report.samples_checked
    );
    ensure!(
        report.violations.is_empty(),
        "{} nesting violations",
        report.violations.len()
    );
    within_time(t, Duration::from_secs(30))
}

fn certified(r: &SolveResult) -> Check {
    let c = r.certificate.ok_or("missing certificate")?;
    ensure!(c.resolution >= 400, "resolution {}", c.resolution);
    ensure!(c.certified, "not certified: {c:?}");
    Ok(())
}

fn seller_optimal_regimes() -> Check {
    let t = Instant::now();
    let e = env(0.8);
    let r = solve(&e, Objective::Profit, Direction::Max).map_err(|e| e.to_string())?;
    let roots = diagonal_roots(&e).unwrap();
    let p_bar = roots.high;
    ensure!(
        r.regime == Regime::SymmetricDiagonal,
        "A=0.8 regime {:?}",
        r.regime
    );
    ensure!(
        (r.p1 - p_bar).abs() <= 1e-6 && (r.p2 - p_bar).abs() <= 1e-6,
        "A=0.8 prices ({}, {}) vs {p_bar}",
        r.p1,
        r.p2
    );
    ensure!((r.alpha - 0.5).abs() <= 1e-9, "A=0.8 alpha {}", r.alpha);
    ensure!(
        (r.value - (p_bar - p_bar.powi(3))).abs() <= 1e-9,
        "A=0.8 value {}",
        r.value
    );
    certified(&r)?;
    let fb = first_best(&e).unwrap();
    ensure!(
        fb.value - r.value > 0.0,
        "A=0.8 first best gap {}",
        fb.value - r.value
    );

    let e = env(0.65);
    let r = solve(&e, Objective::Profit, Direction::Max).map_err(|e| e.to_string())?;
    ensure!(
        r.within_valid_region,
        "A=0.65 optimum outside the valid region"
    );
    ensure!(
        (r.p1 - r.p2).abs() > 1e-3,
        "A=0.65 |p1 - p2| = {}",
        (r.p1 - r.p2).abs()
    );
    ensure!((r.alpha - 0.5).abs() > 1e-3, "A=0.65 alpha {}", r.alpha);
    ensure!(
        contains(&e, pp(r.p1, r.p2)).unwrap(),
        "A=0.65 optimum not implementable"
    );
    certified(&r)?;
    let fb = first_best(&e).unwrap();
    ensure!(
        fb.value - r.value > 0.0,
        "A=0.65 first best gap {}",
        fb.value - r.value
    );
    within_time(t, Duration::from_secs(120))
}

fn duality_of_extremes() -> Check {
    let t = Instant::now();
    for a in [0.7, 0.8] {
        let e = env(a);
        let p_low = diagonal_roots(&e).unwrap().low;
        let mut found: Vec<(f64, f64, f64)> = Vec::new();
        for (o, d) in [
            (Objective::Tp, Direction::Max),
            (Objective::Sw, Direction::Max),
            (Objective::Cs, Direction::Max),
            (Objective::Profit, Direction::Min),
        ] {
            let r = solve(&e, o, d).map_err(|e| e.to_string())?;
            ensure!(
                (r.p1 - p_low).abs() <= 1e-4
                    && (r.p2 - p_low).abs() <= 1e-4
                    && (r.alpha - 0.5).abs() <= 1e-4,
                "A={a} {o:?}/{d:?}: ({}, {}, {}) vs p_low {p_low}",
                r.p1,
                r.p2,
                r.alpha
            );
            certified(&r)?;
            for &(q1, q2, al) in &found {
                let gap = (q1 - r.p1)
                    .abs()
                    .max((q2 - r.p2).abs())
                    .max((al - r.alpha).abs());
                ensure!(
                    gap <= 1e-4,
                    "A={a} {o:?}/{d:?}: {gap} away from another extreme"
                );
            }
            found.push((r.p1, r.p2, r.alpha));
        }
    }
    within_time(t, Duration::from_secs(120))
}

fn traffic_allocation_derivatives() -> Check {
    let e = env(0.7);
    let curve = trace_boundary(&e, 128).unwrap();
    let (x0, x1, y0, y1) = curve.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 100 {
        let p = pp(rng.random_range(x0..x1), rng.random_range(y0..y1));
        if !e.in_nondegenerate_region(p) || !contains(&e, p).unwrap() {
            continue;
        }
        let phi = alpha_interval(&e, p).unwrap();
        let h = 1e-4;
        let alpha = rng.random_range(phi.lo..=phi.hi).clamp(h, 1.0 - h);
        let v = |al: f64| contract_values(&e, Contract::new(p.p1, p.p2, al).unwrap()).unwrap();
        let d_profit = (v(alpha + h).profit - v(alpha - h).profit) / (2.0 * h);
        let d_sw = (v(alpha + h).sw - v(alpha - h).sw) / (2.0 * h);
        let bonus = demand_profile(&e, p).unwrap().bonus;
        ensure!(
            (d_profit - p.delta() * bonus).abs() <= 1e-8,
            "dJ/dalpha at {p:?}: {d_profit}"
        );
        ensure!(
            (d_sw + p.delta().powi(3) / 3.0).abs() <= 1e-8,
            "dSW/dalpha at {p:?}: {d_sw}"
        );
        checked += 1;
    }
    let roots = diagonal_roots(&e).unwrap();
    for i in 0..=20 {
        let q = roots.low + (roots.high - roots.low) * i as f64 / 20.0;
        let phi = alpha_interval(&e, pp(q, q)).unwrap();
        let base = contract_values(&e, Contract::new(q, q, phi.lo).unwrap()).unwrap();
        for k in 0..=10 {
            let al = phi.lo + (phi.hi - phi.lo) * k as f64 / 10.0;
            let v = contract_values(&e, Contract::new(q, q, al).unwrap()).unwrap();
            ensure!(
                (v.profit - base.profit).abs() <= 1e-12 && (v.sw - base.sw).abs() <= 1e-12,
                "alpha matters at p = {q}"
            );
        }
    }
    Ok(())
}

fn equilibrium_suite() -> Check {
    let t = Instant::now();
    let e = env(0.7);
    let check =
        |alg: &SearchAlgorithm, start: PricePair| -> std::result::Result<PricePair, String> {
            let res = find_equilibrium(&e, alg, start, 500, 1e-11).map_err(|e| e.to_string())?;
            let p = res
                .prices
                .ok_or(format!("{alg:?}: no equilibrium ({res:?})"))?;
            let report = verify_nash(&e, alg, p, 1000, 1e-8).map_err(|e| e.to_string())?;
            ensure!(
                report.is_equilibrium,
                "{alg:?}: verify_nash failed {report:?}"
            );
            ensure!(
                contains(&e, p).map_err(|e| e.to_string())?,
                "{alg:?}: {p:?} outside P"
            );
            let phi = alpha_interval(&e, p).unwrap();
            let on_path = alg.alpha(p);
            ensure!(
                phi.contains(on_path, 1e-6),
                "{alg:?}: alpha {on_path} not in {phi:?}"
            );
            Ok(p)
        };
    let prom = check(
        &SearchAlgorithm::Prominence {
            favored: Seller::One,
        },
        pp(0.3, 0.3),
    )?;
    ensure!(prom.p1 > prom.p2, "prominence prices {prom:?}");
    let rand_eq = check(&SearchAlgorithm::Random, pp(0.3, 0.5))?;
    ensure!(
        (rand_eq.p1 - rand_eq.p2).abs() <= 1e-8,
        "random prices {rand_eq:?}"
    );

    let pd = SearchAlgorithm::PriceDirected { tie_alpha: 0.5 };
    let n = 200;
    for j in 1..=n {
        for i in 1..=n {
            let p = pp(0.7 * i as f64 / n as f64, 0.7 * j as f64 / n as f64);
            let r = verify_nash(&e, &pd, p, 200, 1e-8).unwrap();
            ensure!(!r.is_equilibrium, "price-directed equilibrium at {p:?}");
        }
    }
    within_time(t, Duration::from_secs(60))
}

fn corner_suite() -> Check {
    let t = Instant::now();
    for a in [0.5, 0.65] {
        let e = env(a);
        let rows = sweep(&e, 100).map_err(|e| e.to_string())?;
        ensure!(rows.len() == 10_000, "sweep size {}", rows.len());
        let bad = inclusion_violations(&rows);
        ensure!(
            bad.is_empty(),
            "A={a}: {} points in P-hat but not in P, e.g. {:?}",
            bad.len(),
            bad[0]
        );
        for (k, &(p1, p2)) in [(a + 0.05, 0.3), (a + 0.1, 0.45), (0.9, a - 0.1)]
            .iter()
            .enumerate()
        {
            let out = simulate(&e, pp(p1, p2), 0.0, 1_000_000, 77 + k as u64)
                .map_err(|e| e.to_string())?;
            ensure!(
                out.d12.within(0.0, 3.0),
                "A={a} ({p1}, {p2}): D1^2 {:?}",
                out.d12
            );
            ensure!(
                out.d21.within(1.0 - p2, 3.0),
                "A={a} ({p1}, {p2}): D2^1 {:?} vs {}",
                out.d21,
                1.0 - p2
            );
        }
    }
    within_time(t, Duration::from_secs(60))
}

fn critical_threshold_check() -> Check {
    let c = critical_threshold(0.02, 0.08).map_err(|e| e.to_string())?;
    let p_bar = diagonal_roots(&SearchEnv::uniform_from_cost(c.cost).unwrap())
        .unwrap()
        .high;
    ensure!(
        (p_bar - UNIFORM_OPTIMUM).abs() <= 1e-6,
        "p_bar(s*) = {p_bar}"
    );
    ensure!((c.threshold - 0.7).abs() <= 0.01, "A* = {}", c.threshold);
    // Regimes on either side of s*.
    let below = solve(&env(0.8), Objective::Profit, Direction::Max).unwrap();
    let above = solve(&env(0.65), Objective::Profit, Direction::Max).unwrap();
    ensure!(
        env(0.8).cost() < c.cost && env(0.65).cost() > c.cost,
        "anchors on the wrong side of s*"
    );
    ensure!(
        below.regime == Regime::SymmetricDiagonal,
        "below s*: {:?}",
        below.regime
    );
    ensure!(
        matches!(above.regime, Regime::AsymmetricBoundary | Regime::Interior),
        "above s*: {:?}",
        above.regime
    );
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form anchors", closed_form_anchors),
        ("demand-system suite", demand_suite),
        ("monte-carlo oracle", monte_carlo_oracle),
        ("feasible-set geometry", feasible_geometry),
        ("seller-optimal regimes", seller_optimal_regimes),
        ("coincidence of extremes", duality_of_extremes),
        (
            "traffic allocation derivatives",
            traffic_allocation_derivatives,
        ),
        ("equilibrium suite", equilibrium_suite),
        ("corner suite", corner_suite),
        ("critical threshold", critical_threshold_check),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let took = t.elapsed();
        match outcome {
            Ok(()) => println!("criterion {:>2} PASS  {name} ({took:.2?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({took:.2?}): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
