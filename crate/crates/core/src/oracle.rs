//! Brute-force ground truth. Users, advertisers and the operator are solved
//! by direct search over the raw payoffs on discretised markets, without the
//! threshold solvers or closed-form responses.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::admarket::{advertiser_best_response, advertiser_payoff, AdMarketStats, SlotClass};
use crate::error::{Error, Result};
use crate::model::{MarketParams, Scheme};
use crate::operator::{self, OperatorOutcome, SolverConfig};
use crate::user::{self, classify, user_payoff, CaseBounds, UserDecision};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Resolution of the brute-force searches.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMarket {
    /// Midpoint valuation samples.
    pub theta: Vec<f64>,
    /// `g(θ_i) Δθ`.
    pub weights: Vec<f64>,
    /// Ad counts tried per user in [`oracle_user_br`].
    pub x_points: usize,
    pub omega_points: usize,
    pub price_points: usize,
}

impl DiscretizedMarket {
    pub fn new(params: &MarketParams, theta_points: usize, omega_points: usize, price_points: usize) -> Self {
        let tm = params.theta_max();
        let step = tm / theta_points as f64;
        let theta: Vec<f64> = (0..theta_points).map(|i| (i as f64 + 0.5) * step).collect();
        let weights = theta.iter().map(|&t| params.dist.pdf(t) * step).collect();
        Self {
            theta,
            weights,
            x_points: 2001,
            omega_points,
            price_points,
        }
    }

    pub fn standard(params: &MarketParams) -> Self {
        Self::new(params, 2000, 400, 400)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Ad count that brings consumption to the level where marginal utility
/// equals the per-unit watching cost.
fn implied_ads(params: &MarketParams, theta: f64, omega: f64) -> f64 {
    if omega <= 0.0 || theta <= 0.0 {
        return 0.0;
    }
    params.utility.inv_du(params.ad_cost / (omega * theta)) / omega
}

/// Exhaustive search over `r ∈ {0, 1}` and `x_points` ad counts in
/// `[0, 4 × implied level]`.
pub fn oracle_user_br(
    params: &MarketParams,
    theta: f64,
    omega: f64,
    scheme: Scheme,
    x_points: usize,
) -> UserDecision {
    let x_max = 4.0 * implied_ads(params, theta, omega).max(1.0);
    let mut best = UserDecision {
        subscribe: false,
        ads: 0.0,
    };
    let mut best_pay = user_payoff(params, theta, false, 0.0, omega);
    for subscribe in [false, true] {
        if !subscribe && scheme.user_rule() == Scheme::Sar {
            continue;
        }
        for j in 0..x_points {
            let ads = x_max * j as f64 / (x_points - 1) as f64;
            let pay = user_payoff(params, theta, subscribe, ads, omega);
            if pay > best_pay {
                best_pay = pay;
                best = UserDecision { subscribe, ads };
            }
        }
    }
    best
}

/// Grid maximisation of the advertiser payoff over `[0, B/curvature]`.
pub fn oracle_adv_br(stats: &AdMarketStats, params: &MarketParams, p: f64, points: usize) -> f64 {
    if stats.is_empty() || p >= params.effectiveness {
        return 0.0;
    }
    let curvature = params.wear_out * stats.ey2 / (stats.ey * stats.ey * stats.n_ad);
    let m_hi = params.effectiveness / curvature;
    (0..points)
        .map(|j| m_hi * j as f64 / (points - 1) as f64)
        .map(|m| (m, advertiser_payoff(stats, params, m, p)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0.0, |(m, _)| m)
}

/// Maximiser of a concave function on `[0, ∞)` by doubling then golden section.
fn concave_argmax<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) && hi < 1e15 {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0, 2.0 * hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 * b.max(1e-12) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    if f(0.0) >= f(x) {
        0.0
    } else {
        x
    }
}

/// Per-user optimum from raw payoff maximisation.
fn direct_user_br(params: &MarketParams, theta: f64, omega: f64, scheme: Scheme) -> UserDecision {
    let sub_x = if omega > 0.0 {
        concave_argmax(|x| user_payoff(params, theta, true, x, omega))
    } else {
        0.0
    };
    let sub = user_payoff(params, theta, true, sub_x, omega);
    let (free_x, free) = if scheme.user_rule() == Scheme::Sar || omega <= 0.0 {
        (0.0, 0.0)
    } else {
        let x = concave_argmax(|x| user_payoff(params, theta, false, x, omega));
        (x, user_payoff(params, theta, false, x, omega))
    };
    if sub >= free {
        UserDecision {
            subscribe: true,
            ads: sub_x,
        }
    } else {
        UserDecision {
            subscribe: false,
            ads: free_x,
        }
    }
}

/// Aggregates of the discretised market at one reward level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteState {
    pub omega: f64,
    pub subscriber_mass: f64,
    pub demand: f64,
    pub all: AdMarketStats,
    pub subscribers: AdMarketStats,
    pub non_subscribers: AdMarketStats,
}

fn moments(n: f64, acc: [f64; 3], class: SlotClass) -> AdMarketStats {
    let [mass, m1, m2] = acc;
    if mass <= 0.0 || m1 <= 0.0 {
        return AdMarketStats::zero(class);
    }
    AdMarketStats {
        n_ad: n * mass,
        ey: m1 / mass,
        ey2: m2 / mass,
        class,
    }
}

pub fn discrete_state(params: &MarketParams, dm: &DiscretizedMarket, omega: f64, scheme: Scheme) -> DiscreteState {
    let mut sub_mass = 0.0;
    let mut data = 0.0;
    let mut acc = [[0.0; 3]; 2];
    for (&t, &w) in dm.theta.iter().zip(&dm.weights) {
        let d = direct_user_br(params, t, omega, scheme);
        if d.subscribe {
            sub_mass += w;
            data += w * params.quota;
        }
        data += w * omega * d.ads;
        if d.ads > 0.0 {
            let k = usize::from(!d.subscribe);
            acc[k][0] += w;
            acc[k][1] += w * d.ads;
            acc[k][2] += w * d.ads * d.ads;
        }
    }
    let n = params.users;
    let pooled = [0, 1, 2].map(|j| acc[0][j] + acc[1][j]);
    DiscreteState {
        omega,
        subscriber_mass: sub_mass,
        demand: n * data,
        all: moments(n, pooled, SlotClass::All),
        subscribers: moments(n, acc[0], SlotClass::Subscribers),
        non_subscribers: moments(n, acc[1], SlotClass::NonSubscribers),
    }
}

/// Best slot price on a grid over `(0, B]`, rejecting prices at which
/// advertisers would buy more slots than exist.
pub fn grid_price(stats: &AdMarketStats, params: &MarketParams, points: usize) -> (f64, f64) {
    let b = params.effectiveness;
    let mut best = (0.5 * b, 0.0);
    if stats.is_empty() {
        return best;
    }
    let supply = stats.supply();
    for j in 1..=points {
        let p = b * j as f64 / points as f64;
        let sold = params.advertisers * advertiser_best_response(stats, params, p);
        if sold > supply * (1.0 + 1e-12) {
            continue;
        }
        let revenue = sold * p;
        if revenue > best.1 {
            best = (p, revenue);
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    state: DiscreteState,
    prices: (f64, Option<f64>),
    r_ad: f64,
}

impl Candidate {
    fn r_data(&self, params: &MarketParams) -> f64 {
        params.users * params.fee * self.state.subscriber_mass
    }
}

fn candidate(params: &MarketParams, dm: &DiscretizedMarket, omega: f64, scheme: Scheme) -> Candidate {
    let state = discrete_state(params, dm, omega, scheme);
    if scheme == Scheme::Surd {
        let (p1, r1) = grid_price(&state.subscribers, params, dm.price_points);
        let (p2, r2) = grid_price(&state.non_subscribers, params, dm.price_points);
        Candidate {
            state,
            prices: (p1, Some(p2)),
            r_ad: r1 + r2,
        }
    } else {
        let (p, r) = grid_price(&state.all, params, dm.price_points);
        Candidate {
            state,
            prices: (p, None),
            r_ad: r,
        }
    }
}

/// Reward range scanned by the Stage-I oracle: doubling from a tiny reward
/// until discretised demand exceeds twice the capacity.
fn oracle_omega_hi(params: &MarketParams, dm: &DiscretizedMarket, scheme: Scheme) -> Result<f64> {
    let mut w = 1e-6;
    for _ in 0..80 {
        if discrete_state(params, dm, w, scheme).demand > 2.0 * params.capacity {
            return Ok(w);
        }
        w *= 2.0;
    }
    Err(Error::Unbounded {
        what: "oracle reward range",
        doublings: 80,
    })
}

fn scan(
    params: &MarketParams,
    dm: &DiscretizedMarket,
    scheme: Scheme,
    lo: f64,
    hi: f64,
) -> Vec<Candidate> {
    let n = dm.omega_points;
    (0..n)
        .into_par_iter()
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|w| candidate(params, dm, w, scheme))
        .filter(|c| c.state.demand <= params.capacity)
        .collect()
}

fn best_of(params: &MarketParams, cands: &[Candidate]) -> Option<Candidate> {
    cands
        .iter()
        .copied()
        .max_by(|a, b| (a.r_data(params) + a.r_ad).total_cmp(&(b.r_data(params) + b.r_ad)))
}

/// Exhaustive Stage-I search: a coarse reward grid with rejection of
/// capacity violations, a zoomed grid around the best point, and a price
/// grid per reward.
pub fn oracle_stage1(params: &MarketParams, scheme: Scheme, dm: &DiscretizedMarket) -> Result<OperatorOutcome> {
    let hi = oracle_omega_hi(params, dm, scheme)?;
    let coarse = scan(params, dm, scheme, 0.0, hi);
    let step = hi / (dm.omega_points - 1) as f64;
    let mut best = best_of(params, &coarse).ok_or(Error::EmptyFeasibleRegion)?;
    let w = best.state.omega;
    let fine = scan(params, dm, scheme, (w - step).max(0.0), (w + step).min(hi));
    if let Some(f) = best_of(params, &fine) {
        if f.r_data(params) + f.r_ad > best.r_data(params) + best.r_ad {
            best = f;
        }
    }
    let r_data = best.r_data(params);
    let (p_star, p_star_i, p_star_ii) = match best.prices {
        (p, None) => (Some(p), None, None),
        (p1, Some(p2)) => (None, Some(p1), Some(p2)),
    };
    Ok(OperatorOutcome {
        scheme,
        omega_star: best.state.omega,
        p_star,
        p_star_i,
        p_star_ii,
        r_data,
        r_ad: best.r_ad,
        r_total: r_data + best.r_ad,
        demand: best.state.demand,
        case: classify(params, best.state.omega, scheme),
        capacity_binding: (best.state.demand - params.capacity).abs() <= 1e-4 * params.capacity,
    })
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Random `(θ, ω)` pairs with `ω` log-uniform around the case boundaries.
pub fn random_type_reward_pairs(params: &MarketParams, seed: u64, count: usize) -> Vec<(f64, f64)> {
    let b = CaseBounds::new(params);
    let (lo, hi) = ((b.ab * 0.1).ln(), (b.cd * 10.0).ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let theta = rng.gen_range(0.0..=params.theta_max());
            let omega = rng.gen_range(lo..hi).exp();
            (theta, omega)
        })
        .collect()
}

/// Worst relative payoff shortfall of the analytic best response against
/// the grid oracle; negative means the analytic response always wins.
pub fn user_br_gap(params: &MarketParams, scheme: Scheme, pairs: &[(f64, f64)], x_points: usize) -> Result<f64> {
    pairs
        .par_iter()
        .map(|&(theta, omega)| {
            let d = match scheme.user_rule() {
                Scheme::Sar => user::best_response_sar(params, theta, omega)?,
                _ => user::best_response_sur(params, theta, omega)?,
            };
            let o = oracle_user_br(params, theta, omega, scheme, x_points);
            let analytic = user_payoff(params, theta, d.subscribe, d.ads, omega);
            let grid = user_payoff(params, theta, o.subscribe, o.ads, omega);
            Ok((grid - analytic) / grid.abs().max(1.0))
        })
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

/// Pass/fail table comparing every analytic stage with its brute-force
/// counterpart on one scenario.
pub fn verify(params: &MarketParams, seed: u64, draws: usize, cfg: SolverConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let pairs = random_type_reward_pairs(params, seed, draws);

    for scheme in [Scheme::Sar, Scheme::Sur] {
        let gap = user_br_gap(params, scheme, &pairs, 2001)?;
        out.push(check(
            format!("user best response ({scheme}) dominates grid"),
            gap <= 1e-8,
            format!("{draws} draws, worst relative shortfall {gap:.3e}"),
        ));
    }

    let mut worst_adv: f64 = 0.0;
    let mut slot_ok = true;
    for &(_, omega) in pairs.iter().take(50) {
        for scheme in Scheme::ALL {
            let e = operator::evaluate(params, omega, scheme)?;
            let sales = match e.ad.split {
                Some((a, b)) => vec![a, b],
                None => vec![e.ad.pooled],
            };
            for s in sales {
                slot_ok &= s.slots_sold <= s.stats.supply() * (1.0 + 1e-9) + 1e-9;
                if s.stats.is_empty() {
                    continue;
                }
                let m = advertiser_best_response(&s.stats, params, s.price);
                let g = oracle_adv_br(&s.stats, params, s.price, 20_001);
                let pay = advertiser_payoff(&s.stats, params, m, s.price);
                let gpay = advertiser_payoff(&s.stats, params, g, s.price);
                worst_adv = worst_adv.max((gpay - pay) / pay.abs().max(1.0));
            }
        }
    }
    out.push(check(
        "advertiser best response dominates grid",
        worst_adv <= 1e-9,
        format!("worst relative shortfall {worst_adv:.3e}"),
    ));
    out.push(check(
        "slots sold never exceed slots watched",
        slot_ok,
        "checked at 50 sampled rewards for every scheme".into(),
    ));

    let mut solutions = Vec::new();
    for scheme in Scheme::ALL {
        match operator::solve(params, scheme, cfg) {
            Ok(sol) => {
                out.push(check(
                    format!("threshold brackets and ordering ({scheme})"),
                    true,
                    format!(
                        "{} root brackets validated, {} theta4 pairs increasing",
                        sol.diagnostics.brackets_checked, sol.diagnostics.theta4_pairs_checked
                    ),
                ));
                solutions.push(sol);
            }
            Err(e) => {
                out.push(check(format!("threshold brackets and ordering ({scheme})"), false, e.to_string()));
                return Ok(out);
            }
        }
    }

    let dm = DiscretizedMarket::standard(params);
    for (scheme, sol) in Scheme::ALL.iter().zip(&solutions) {
        let o = oracle_stage1(params, *scheme, &dm)?;
        let rel = (o.r_total - sol.outcome.r_total) / sol.outcome.r_total;
        out.push(check(
            format!("stage-I revenue matches oracle ({scheme})"),
            rel.abs() <= 5e-3,
            format!(
                "solver {:.6e} at omega {:.6}, oracle {:.6e} at omega {:.6} ({:+.3}%)",
                sol.outcome.r_total,
                sol.outcome.omega_star,
                o.r_total,
                o.omega_star,
                100.0 * rel
            ),
        ));
    }

    let (sur, surd) = (&solutions[1].outcome, &solutions[2].outcome);
    out.push(check(
        "split pricing never loses revenue (SURD >= SUR)",
        surd.r_total >= sur.r_total * (1.0 - 1e-6),
        format!("SUR {:.6e}, SURD {:.6e}", sur.r_total, surd.r_total),
    ));
    let sar = &solutions[0].outcome;
    out.push(check(
        "SAR never below no-reward revenue",
        sar.r_total >= params.baseline_revenue() * (1.0 - 1e-9),
        format!("SAR {:.6e}, baseline {:.6e}", sar.r_total, params.baseline_revenue()),
    ));
    for o in [sar, sur, surd] {
        out.push(check(
            format!("capacity respected ({})", o.scheme),
            o.demand <= params.capacity * (1.0 + 1e-6),
            format!("demand {:.6e}, capacity {:.6e}", o.demand, params.capacity),
        ));
    }
    Ok(out)
}
