//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use datareward::admarket::{ad_stats, advertiser_best_response, optimal_price, SlotClass};
use datareward::operator::{solve_sar, theorem5_limit};
use datareward::oracle::{oracle_stage1, random_type_reward_pairs, user_br_gap, DiscretizedMarket};
use datareward::presets::{preset, random_scenarios, PRESETS};
use datareward::user::{classify_sar, h, solve_theta2, theta1, theta3, v, Case, CaseBounds, Thresholds};
use datareward::{solve, Error, MarketParams, Scheme, SolverConfig, TypeDistribution, Utility};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict, Duration);

fn params(id: &str) -> MarketParams {
    preset(id).expect("preset").scenario.params().expect("valid preset")
}

fn revenue(p: &MarketParams, scheme: Scheme) -> Result<f64, String> {
    solve(p, scheme, SolverConfig::default())
        .map(|s| s.outcome.r_total)
        .map_err(|e| format!("{scheme} solve failed at C = {:e}: {e}", p.capacity))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion1() -> Verdict {
    let base = params("fig5a");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    while draws < 50 {
        let mut j = |x: f64| x * 10f64.powf(rng.gen_range(-0.3..0.3));
        let theta_max = j(155.0);
        let p = MarketParams {
            users: j(base.users),
            fee: j(base.fee),
            quota: j(base.quota),
            ad_cost: j(base.ad_cost),
            advertisers: j(base.advertisers),
            wear_out: j(base.wear_out),
            effectiveness: j(base.effectiveness),
            capacity: f64::INFINITY,
            utility: Utility::Logarithmic,
            dist: TypeDistribution::uniform(theta_max).expect("uniform"),
        };
        let p = p.with_capacity(p.baseline_demand() * 2.0);
        if p.validate().is_err() {
            continue;
        }
        let b = CaseBounds::new(&p);
        let omega = rng.gen_range(b.ab * (1.0 + 1e-3)..b.bc_sar);
        if classify_sar(&p, omega) != Case::B {
            return Err(format!("draw at omega = {omega} not classified as Case B"));
        }
        let s = ad_stats(&p, omega, Scheme::Sar, SlotClass::All).map_err(|e| e.to_string())?;
        let t1 = p.ad_cost * (1.0 + p.quota) / omega;
        let span = theta_max - t1;
        let expect_n = p.users * span / theta_max;
        let expect_ey = span / (2.0 * p.ad_cost);
        let expect_ey2 = span * span / (3.0 * p.ad_cost * p.ad_cost);
        worst = worst
            .max(rel(s.n_ad, expect_n))
            .max(rel(s.ey, expect_ey))
            .max(rel(s.ey2, expect_ey2));
        for price in [optimal_price(&s, &p), 0.25 * p.effectiveness, 0.9 * p.effectiveness] {
            let m = advertiser_best_response(&s, &p, price);
            let expect_m = 0.375 * (p.effectiveness - price) / p.wear_out * span / theta_max * p.users;
            worst = worst.max(rel(m, expect_m));
        }
        draws += 1;
    }
    ensure(worst <= 1e-6, format!("50 draws, worst relative error {worst:.2e} (tol 1e-6)"))
}

fn criterion2() -> Verdict {
    let base = params("fig5a");
    let caps = linspace(base.baseline_demand() * 1.05, 2.2e7, 10);
    let worst = caps
        .par_iter()
        .map(|&c| {
            let o = solve_sar(&base.with_capacity(c)).map_err(|e| e.to_string())?;
            Ok(rel(o.demand, c))
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(0.0, f64::max);
    ensure(worst <= 1e-4, format!("10 capacities, worst |D - C|/C = {worst:.2e} (tol 1e-4)"))
}

fn criterion3() -> Verdict {
    let o = solve_sar(&params("appK")).map_err(|e| e.to_string())?;
    let detail = format!(
        "omega* = {:.5} (0.137 +/- 0.005), D = {:.4e} (1.846e7 +/- 2%), binding = {}",
        o.omega_star, o.demand, o.capacity_binding
    );
    ensure(
        (o.omega_star - 0.137).abs() <= 0.005 && rel(o.demand, 1.846e7) <= 0.02 && !o.capacity_binding,
        detail,
    )
}

fn criterion4() -> Verdict {
    let scenarios = random_scenarios(2024, 204).map_err(|e| e.to_string())?;
    let results: Vec<Result<(f64, f64), String>> = scenarios
        .par_iter()
        .map(|p| Ok((revenue(p, Scheme::Sur)?, revenue(p, Scheme::Surd)?)))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut max_gain: f64 = 0.0;
    for r in results {
        let (sur, surd) = r?;
        worst = worst.max((sur - surd) / sur);
        max_gain = max_gain.max(surd / sur - 1.0);
    }
    ensure(
        worst <= 1e-6,
        format!(
            "{} scenarios over 3 utilities x 2 distributions, worst (SUR - SURD)/SUR = {worst:.2e}, largest gain {:.1}%",
            scenarios.len(),
            100.0 * max_gain
        ),
    )
}

fn criterion5() -> Verdict {
    let base = params("fig5a");
    let caps = linspace(base.baseline_demand(), 2.2e7, 60);
    let rows = caps
        .par_iter()
        .map(|&c| {
            let p = base.with_capacity(c);
            Ok((c, revenue(&p, Scheme::Sar)?, revenue(&p, Scheme::Sur)?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let sur_wins = rows.iter().any(|&(_, sar, sur)| sur > sar * (1.0 + 1e-6));
    let last_sur = rows.iter().rposition(|&(_, sar, sur)| sur >= sar);
    let crossover = match last_sur {
        Some(i) if i + 1 < rows.len() => rows[i + 1].0,
        Some(_) => f64::INFINITY,
        None => rows[0].0,
    };
    let p = base.with_capacity(1.24e7);
    let (sur, surd) = (revenue(&p, Scheme::Sur)?, revenue(&p, Scheme::Surd)?);
    let gain = 100.0 * (surd / sur - 1.0);
    ensure(
        sur_wins && (crossover - 1.54e7).abs() <= 0.1e7 && (gain - 9.4).abs() <= 1.5,
        format!(
            "SUR ahead on a left sub-range: {sur_wins}; SAR ahead for all C >= {crossover:.4e} (1.54e7 +/- 0.1e7); SURD gain at 1.24e7 = {gain:.2}% (9.4 +/- 1.5)"
        ),
    )
}

fn criterion6() -> Verdict {
    let p = params("fig7c").with_capacity(2.07e7);
    let sur = solve(&p, Scheme::Sur, SolverConfig::default()).map_err(|e| e.to_string())?;
    let surd = solve(&p, Scheme::Surd, SolverConfig::default()).map_err(|e| e.to_string())?;
    let gain = 100.0 * (surd.outcome.r_total / sur.outcome.r_total - 1.0);
    let w = sur.outcome.omega_star;
    let i = ad_stats(&p, w, Scheme::Surd, SlotClass::Subscribers).map_err(|e| e.to_string())?;
    let ii = ad_stats(&p, w, Scheme::Surd, SlotClass::NonSubscribers).map_err(|e| e.to_string())?;
    let ratio = ii.ey / i.ey;
    ensure(
        (gain - 20.3).abs() <= 2.0 && rel(ratio, 5.7) <= 0.15,
        format!("SURD gain {gain:.2}% (20.3 +/- 2), E[y_II]/E[y_I] = {ratio:.3} (5.7 +/- 15%)"),
    )
}

fn criterion7() -> Verdict {
    let base = params("fig5a");
    let p = base.with_capacity(1e3 * base.baseline_demand());
    let (sar, sur, surd) = (
        revenue(&p, Scheme::Sar)?,
        revenue(&p, Scheme::Sur)?,
        revenue(&p, Scheme::Surd)?,
    );
    let limit = theorem5_limit(&p).map_err(|e| e.to_string())?;
    let gap = (limit - sar) / limit;
    ensure(
        sar > surd && surd >= sur && (0.0..=0.01).contains(&gap),
        format!("SAR {sar:.5e} > SURD {surd:.5e} >= SUR {sur:.5e}; limit {limit:.5e}, SAR below it by {:.3}% (tol 1%)", 100.0 * gap),
    )
}

fn criterion8() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut draws = 0;
    for (k, id) in ["fig5a", "fig5b", "fig5c", "fig7a", "fig7b", "fig7c"].iter().enumerate() {
        let p = params(id);
        let pairs = random_type_reward_pairs(&p, 100 + k as u64, 1000);
        for scheme in Scheme::ALL {
            let gap = user_br_gap(&p, scheme, &pairs, 2001).map_err(|e| format!("{id} {scheme}: {e}"))?;
            worst = worst.max(gap);
            draws += pairs.len();
        }
    }
    let base = params("fig5a");
    let mut worst_stage1: f64 = 0.0;
    for c in [1.0e7, 1.24e7, 1.6e7] {
        let p = base.with_capacity(c);
        let dm = DiscretizedMarket::standard(&p);
        for scheme in Scheme::ALL {
            let oracle = oracle_stage1(&p, scheme, &dm).map_err(|e| e.to_string())?;
            worst_stage1 = worst_stage1.max(rel(oracle.r_total, revenue(&p, scheme)?));
        }
    }
    ensure(
        worst <= 1e-8 && worst_stage1 <= 5e-3,
        format!(
            "{draws} user draws, worst relative shortfall {worst:.2e} (tol 1e-8); stage-I oracle on 3 capacities x 3 schemes, worst gap {:.3}% (tol 0.5%)",
            100.0 * worst_stage1
        ),
    )
}

fn criterion9() -> Verdict {
    let base = params("fig5d");
    let caps = linspace(base.baseline_demand(), preset("fig5d").expect("preset").sweep_to, 60);
    let rows = caps
        .par_iter()
        .map(|&c| {
            let p = base.with_capacity(c);
            Ok((revenue(&p, Scheme::Sar)?, revenue(&p, Scheme::Sur)?, revenue(&p, Scheme::Surd)?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let worst_order = rows.iter().map(|&(sar, sur, _)| (sar - sur) / sur).fold(f64::NEG_INFINITY, f64::max);
    let worst_overlap = rows.iter().map(|&(_, sur, surd)| rel(surd, sur)).fold(0.0, f64::max);
    ensure(
        worst_order <= 1e-6 && worst_overlap <= 1e-6,
        format!(
            "60 capacities, max (SAR - SUR)/SUR = {worst_order:.2e}, max |SURD - SUR|/SUR = {worst_overlap:.2e} (tol 1e-6)"
        ),
    )
}

/// Bracket signs on a log grid inside Case C and the θ₄ ordering and growth on a log
/// grid inside Case Ĉ, evaluated independently of the solver.
fn structure_on_grid(p: &MarketParams) -> Result<(usize, usize), String> {
    let b = CaseBounds::new(p);
    let (t0, slack) = (p.theta0(), 1e-8 * p.fee);
    // Roots are bisected to 1e-10 θ_max; θ₄ meets θ₀ at the lower end of Ĉ.
    let root_tol = 1e-9 * p.theta_max();
    let mut brackets = 0;
    for w in logspace(b.bc_sar * (1.0 + 1e-6), 20.0 * b.bc_sar, 200) {
        let t1 = theta1(p, w);
        if t1 >= t0 {
            continue;
        }
        if !(h(p, t1, w) < slack && h(p, t0, w) > -slack) {
            return Err(format!("h bracket fails at omega = {w}"));
        }
        brackets += 1;
    }
    let mut prev: Option<f64> = None;
    let mut pairs = 0;
    for w in logspace(b.bc_sur.max(1e-9 * b.cd) * (1.0 + 1e-6), b.cd * (1.0 - 1e-6), 200) {
        let (t1, t3) = (theta1(p, w), theta3(p, w));
        if !(v(p, t3, w) > -slack && v(p, t1, w) < slack) {
            return Err(format!("v bracket fails at omega = {w}"));
        }
        let t: Thresholds = datareward::user::thresholds(p, w, Scheme::Sur).map_err(|e| e.to_string())?;
        let t4 = t.theta4.ok_or(format!("no theta4 in Case Chat at omega = {w}"))?;
        if t4 <= t0 - root_tol {
            return Err(format!("theta4 = {t4} <= theta0 = {t0} at omega = {w}"));
        }
        if let Some(q) = prev {
            if t4 < q - root_tol {
                return Err(format!("theta4 decreases at omega = {w}"));
            }
            pairs += 1;
        }
        prev = Some(t4);
        brackets += 1;
    }
    Ok((brackets, pairs))
}

fn criterion10() -> Verdict {
    let mut brackets = 0;
    let mut pairs = 0;
    let mut solves = 0;
    for pre in &PRESETS {
        let p = pre.params().map_err(|e| e.to_string())?;
        let (gb, gp) = structure_on_grid(&p).map_err(|e| format!("{}: {e}", pre.id))?;
        brackets += gb;
        pairs += gp;
        for scheme in Scheme::ALL {
            let s = solve(&p, scheme, SolverConfig::default()).map_err(|e| format!("{} {scheme}: {e}", pre.id))?;
            // SAR needs a root only when its search reaches Case C; SUR and
            // SURD always scan Case Ĉ.
            let d = &s.diagnostics;
            if scheme != Scheme::Sar && (d.brackets_checked == 0 || d.theta4_pairs_checked == 0) {
                return Err(format!("{} {scheme}: Case Chat scan missing from diagnostics", pre.id));
            }
            brackets += s.diagnostics.brackets_checked;
            pairs += s.diagnostics.theta4_pairs_checked;
            solves += 1;
        }
    }
    let p = params("fig5a");
    let case_b = 0.5 * (CaseBounds::new(&p).ab + CaseBounds::new(&p).bc_sar);
    let aborts = matches!(solve_theta2(&p, case_b), Err(Error::Bracket { .. }));
    ensure(
        aborts,
        format!(
            "{solves} solves over {} presets, {brackets} brackets validated, {pairs} theta4 pairs increasing; misplaced bracket aborts with diagnostics: {aborts}",
            PRESETS.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Example-1 closed forms", criterion1, Duration::from_secs(5)),
        ("SAR capacity exhaustion", criterion2, Duration::from_secs(30)),
        ("unused-capacity scenario", criterion3, Duration::from_secs(10)),
        ("SURD dominates SUR", criterion4, Duration::from_secs(600)),
        ("fig5a crossover and SURD gain", criterion5, Duration::MAX),
        ("fig7c differentiation gain", criterion6, Duration::MAX),
        ("large-capacity asymptotics", criterion7, Duration::MAX),
        ("oracle equivalence", criterion8, Duration::from_secs(900)),
        ("weak wear-out ordering", criterion9, Duration::MAX),
        ("structural checks", criterion10, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over runtime budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {name}: {detail} [{:.2}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
