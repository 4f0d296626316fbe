//! Stage-I operator problem: demand, feasible rewards and the
//! revenue-maximising unit data reward for each scheme.

use rayon::prelude::*;
use serde::Serialize;

use crate::admarket::{ad_side, AdSide};
use crate::error::{Error, Result};
use crate::model::{MarketParams, Scheme, TypeDistribution, Utility};
use crate::user::{Case, CaseBounds, ResponseProfile};

const DOUBLING_CAP: u32 = 60;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Numerical knobs of the Stage-I search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Grid points per continuous piece of the reward axis.
    pub grid: usize,
    /// Relative tolerance of the golden-section refinement in `ω`.
    pub omega_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: 2000,
            omega_tol: 1e-6,
        }
    }
}

/// Market state induced by a reward level under the optimal ad price(s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub omega: f64,
    pub case: Case,
    pub theta4: Option<f64>,
    pub subscriber_mass: f64,
    pub demand: f64,
    pub r_data: f64,
    pub ad: AdSide,
}

impl Evaluation {
    pub fn r_ad(&self) -> f64 {
        self.ad.revenue()
    }

    pub fn r_total(&self) -> f64 {
        self.r_data + self.r_ad()
    }

    pub fn feasible(&self, capacity: f64) -> bool {
        self.demand <= capacity
    }
}

pub fn evaluate(params: &MarketParams, omega: f64, scheme: Scheme) -> Result<Evaluation> {
    let profile = ResponseProfile::new(params, omega, scheme)?;
    let ad = ad_side(params, &profile, scheme)?;
    let subscriber_mass = profile.subscriber_mass(params);
    let demand = params.users * params.quota * subscriber_mass + omega * ad.pooled.stats.supply();
    Ok(Evaluation {
        omega,
        case: profile.case(),
        theta4: profile.thresholds.theta4,
        subscriber_mass,
        demand,
        r_data: params.users * params.fee * subscriber_mass,
        ad,
    })
}

/// Total data demand `D(ω)`.
pub fn demand(params: &MarketParams, omega: f64, scheme: Scheme) -> Result<f64> {
    evaluate(params, omega, scheme).map(|e| e.demand)
}

/// Smallest SAR reward with `D(ω) = C`; the no-watching bound when `C = D(0)`.
pub fn demand_inverse(params: &MarketParams, capacity: f64) -> Result<f64> {
    let d = |w: f64| demand(params, w, Scheme::Sar);
    let lo0 = CaseBounds::new(params).ab;
    if d(lo0)? >= capacity {
        return Ok(lo0);
    }
    let mut lo = lo0;
    let mut hi = 2.0 * lo0;
    let mut doublings = 0;
    while d(hi)? <= capacity {
        doublings += 1;
        if doublings > DOUBLING_CAP {
            return Err(Error::Unbounded {
                what: "demand inverse",
                doublings: DOUBLING_CAP,
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if d(mid)? <= capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Disjoint, sorted reward intervals on which `D(ω) <= C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleRegion {
    pub intervals: Vec<(f64, f64)>,
}

/// Flat Stage-I result record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorOutcome {
    pub scheme: Scheme,
    pub omega_star: f64,
    pub p_star: Option<f64>,
    #[serde(rename = "p_star_I")]
    pub p_star_i: Option<f64>,
    #[serde(rename = "p_star_II")]
    pub p_star_ii: Option<f64>,
    pub r_data: f64,
    pub r_ad: f64,
    pub r_total: f64,
    pub demand: f64,
    pub case: Case,
    pub capacity_binding: bool,
}

impl OperatorOutcome {
    fn from_evaluation(scheme: Scheme, e: &Evaluation, capacity: f64) -> Self {
        let (p_star, p_star_i, p_star_ii) = match &e.ad.split {
            Some((i, ii)) => (None, Some(i.price), Some(ii.price)),
            None => (Some(e.ad.pooled.price), None, None),
        };
        Self {
            scheme,
            omega_star: e.omega,
            p_star,
            p_star_i,
            p_star_ii,
            r_data: e.r_data,
            r_ad: e.r_ad(),
            r_total: e.r_total(),
            demand: e.demand,
            case: e.case,
            capacity_binding: (e.demand - capacity).abs() <= 1e-4 * capacity,
        }
    }
}

/// Counters for the structural checks performed during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    /// Evaluations in which a threshold root bracket was validated.
    pub brackets_checked: usize,
    /// Consecutive Case-Ĉ grid pairs checked for `θ₄` increasing in `ω`.
    pub theta4_pairs_checked: usize,
    pub notes: Vec<String>,
}

/// Full result of a Stage-I solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub outcome: OperatorOutcome,
    pub optimum: Evaluation,
    pub region: FeasibleRegion,
    pub diagnostics: Diagnostics,
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

fn logspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    let ratio = (b / a).ln();
    (0..n).map(move |i| match i {
        0 => a,
        i if i == n - 1 => b,
        i => a * (ratio * i as f64 / (n - 1) as f64).exp(),
    })
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    omega: f64,
    // index of the continuous piece the point belongs to
    piece: u8,
}

fn sar_grid(params: &MarketParams, omega_max: f64, n: usize) -> Vec<GridPoint> {
    let b = CaseBounds::new(params);
    let mut pts = vec![0.0];
    if omega_max > b.ab {
        pts.extend(linspace(b.ab, omega_max, n));
        if b.bc_sar > b.ab && b.bc_sar < omega_max {
            pts.push(b.bc_sar);
        }
    } else {
        pts.push(omega_max);
    }
    finish_grid(pts, |_| 0)
}

fn sur_grid(params: &MarketParams, omega_cap: f64, n: usize) -> Vec<GridPoint> {
    let b = CaseBounds::new(params);
    let left_end = b.cd * (1.0 - 1e-9);
    let mut pts = vec![0.0];
    if b.bc_sur > b.ab {
        pts.extend(linspace(b.ab, b.bc_sur.min(left_end), n));
    }
    let start = if b.bc_sur > 0.0 { b.bc_sur } else { left_end / n as f64 };
    if start < left_end {
        pts.extend(linspace(start, left_end, n));
    }
    pts.extend(logspace(b.cd, omega_cap.max(b.cd * 2.0), n));
    finish_grid(pts, |w| u8::from(w >= b.cd))
}

fn finish_grid(mut pts: Vec<f64>, piece: impl Fn(f64) -> u8) -> Vec<GridPoint> {
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.into_iter()
        .map(|omega| GridPoint {
            omega,
            piece: piece(omega),
        })
        .collect()
}

/// Smallest `2^k ΦQ/F` with SUR demand above `2C`.
pub fn omega_cap(params: &MarketParams) -> Result<f64> {
    let cd = CaseBounds::new(params).cd;
    let mut w = cd;
    for _ in 0..=DOUBLING_CAP {
        if demand(params, w, Scheme::Sur)? > 2.0 * params.capacity {
            return Ok(w);
        }
        w *= 2.0;
    }
    Err(Error::Unbounded {
        what: "reward cap",
        doublings: DOUBLING_CAP,
    })
}

struct Search<'a> {
    params: &'a MarketParams,
    scheme: Scheme,
    cfg: SolverConfig,
    diag: Diagnostics,
}

impl<'a> Search<'a> {
    fn eval(&mut self, omega: f64) -> Result<Evaluation> {
        let e = evaluate(self.params, omega, self.scheme)?;
        self.tally(&e);
        Ok(e)
    }

    fn tally(&mut self, e: &Evaluation) {
        self.diag.evaluations += 1;
        if matches!(e.case, Case::C | Case::CHat) {
            self.diag.brackets_checked += 1;
        }
    }

    fn eval_grid(&mut self, grid: &[GridPoint]) -> Result<Vec<Evaluation>> {
        let (params, scheme) = (self.params, self.scheme);
        let evals = grid
            .par_iter()
            .map(|g| evaluate(params, g.omega, scheme))
            .collect::<Result<Vec<_>>>()?;
        for e in &evals {
            self.tally(e);
        }
        Ok(evals)
    }

    /// `θ₄` must increase with `ω` across consecutive Case-Ĉ grid points.
    fn check_theta4_monotone(&mut self, evals: &[Evaluation]) -> Result<()> {
        let tol = 1e-9 * self.params.theta_max();
        for w in evals.windows(2) {
            if let (Some(a), Some(b)) = (w[0].theta4, w[1].theta4) {
                self.diag.theta4_pairs_checked += 1;
                if b < a - tol {
                    return Err(Error::Structure {
                        check: "theta4 increasing in omega",
                        omega: w[1].omega,
                        detail: format!(
                            "theta4({}) = {a} > theta4({}) = {b}",
                            w[0].omega, w[1].omega
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Feasibility boundary between a feasible and an infeasible reward.
    fn boundary(&mut self, feasible: f64, infeasible: f64) -> Result<Evaluation> {
        let cap = self.params.capacity;
        let (mut good, mut bad) = (feasible, infeasible);
        let mut best = self.eval(good)?;
        for _ in 0..200 {
            if (bad - good).abs() <= 1e-13 * good.abs().max(bad.abs()) {
                break;
            }
            let mid = 0.5 * (good + bad);
            let e = self.eval(mid)?;
            if e.feasible(cap) {
                good = mid;
                best = e;
            } else {
                bad = mid;
            }
        }
        Ok(best)
    }

    /// Golden-section maximisation of feasible revenue on `[a, b]`.
    fn golden(&mut self, mut a: f64, mut b: f64) -> Result<Option<Evaluation>> {
        let cap = self.params.capacity;
        let score = |e: &Evaluation| {
            if e.feasible(cap) {
                e.r_total()
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut ec = self.eval(c)?;
        let mut ed = self.eval(d)?;
        while b - a > self.cfg.omega_tol * b.abs().max(f64::MIN_POSITIVE) {
            if score(&ec) >= score(&ed) {
                b = d;
                d = c;
                ed = ec;
                c = b - GOLDEN * (b - a);
                ec = self.eval(c)?;
            } else {
                a = c;
                c = d;
                ec = ed;
                d = a + GOLDEN * (b - a);
                ed = self.eval(d)?;
            }
        }
        let best = if score(&ec) >= score(&ed) { ec } else { ed };
        Ok(best.feasible(cap).then_some(best))
    }
}

fn better(a: &Evaluation, b: &Evaluation) -> bool {
    a.r_total() > b.r_total()
}

fn solve_on_grid(
    params: &MarketParams,
    scheme: Scheme,
    cfg: SolverConfig,
    grid: Vec<GridPoint>,
    extra: Option<f64>,
) -> Result<Solution> {
    let cap = params.capacity;
    let mut s = Search {
        params,
        scheme,
        cfg,
        diag: Diagnostics::default(),
    };
    let evals = s.eval_grid(&grid)?;
    s.check_theta4_monotone(&evals)?;

    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<Evaluation> = None;
    let consider = |e: Evaluation, best: &mut Option<Evaluation>| {
        if e.feasible(cap) && best.as_ref().is_none_or(|b| better(&e, b)) {
            *best = Some(e);
        }
    };

    let n = grid.len();
    let mut i = 0;
    while i < n {
        if !evals[i].feasible(cap) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && evals[i + 1].feasible(cap) && grid[i + 1].piece == grid[start].piece {
            i += 1;
        }
        let end = i;
        i += 1;

        let lo = if start > 0 && grid[start - 1].piece == grid[start].piece {
            s.boundary(grid[start].omega, grid[start - 1].omega)?
        } else {
            evals[start].clone()
        };
        let hi = if end + 1 < n && grid[end + 1].piece == grid[end].piece {
            s.boundary(grid[end].omega, grid[end + 1].omega)?
        } else {
            evals[end].clone()
        };
        intervals.push((lo.omega, hi.omega));

        let k = (start..=end)
            .max_by(|&a, &b| evals[a].r_total().total_cmp(&evals[b].r_total()).then(b.cmp(&a)))
            .expect("interval is non-empty");
        let a = if k > start { grid[k - 1].omega } else { lo.omega };
        let b = if k < end { grid[k + 1].omega } else { hi.omega };
        let refined = if b > a { s.golden(a, b)? } else { None };

        consider(evals[k].clone(), &mut best);
        consider(lo, &mut best);
        consider(hi, &mut best);
        if let Some(e) = refined {
            consider(e, &mut best);
        }
    }
    if let Some(w) = extra {
        let e = s.eval(w)?;
        consider(e, &mut best);
    }

    let optimum = best.ok_or(Error::EmptyFeasibleRegion)?;

    // Pieces are split at the SUR discontinuity; report touching intervals merged.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo - last.1 <= 1e-8 * lo.abs().max(1e-300) => last.1 = hi,
            _ => merged.push((lo, hi)),
        }
    }
    if merged.len() > 3 {
        s.diag.notes.push(format!(
            "feasible region has {} intervals (more than three)",
            merged.len()
        ));
    }

    Ok(Solution {
        outcome: OperatorOutcome::from_evaluation(scheme, &optimum, cap),
        optimum,
        region: FeasibleRegion { intervals: merged },
        diagnostics: s.diag,
    })
}

/// Solves the Stage-I problem for one scheme.
pub fn solve(params: &MarketParams, scheme: Scheme, cfg: SolverConfig) -> Result<Solution> {
    match scheme {
        Scheme::Sar => {
            let omega_max = demand_inverse(params, params.capacity)?;
            solve_on_grid(params, scheme, cfg, sar_grid(params, omega_max, cfg.grid), None)
        }
        Scheme::Sur => {
            let cap = omega_cap(params)?;
            solve_on_grid(params, scheme, cfg, sur_grid(params, cap, cfg.grid), None)
        }
        Scheme::Surd => {
            let cap = omega_cap(params)?;
            // The SUR optimum is feasible and never loses revenue under split pricing.
            let sur = solve(params, Scheme::Sur, cfg)?;
            solve_on_grid(
                params,
                scheme,
                cfg,
                sur_grid(params, cap, cfg.grid),
                Some(sur.outcome.omega_star),
            )
        }
    }
}

pub fn solve_sar(params: &MarketParams) -> Result<OperatorOutcome> {
    solve(params, Scheme::Sar, SolverConfig::default()).map(|s| s.outcome)
}

pub fn solve_sur(params: &MarketParams) -> Result<OperatorOutcome> {
    solve(params, Scheme::Sur, SolverConfig::default()).map(|s| s.outcome)
}

pub fn solve_surd(params: &MarketParams) -> Result<OperatorOutcome> {
    solve(params, Scheme::Surd, SolverConfig::default()).map(|s| s.outcome)
}

/// Feasible reward region of one scheme.
pub fn feasible_region(params: &MarketParams, scheme: Scheme, cfg: SolverConfig) -> Result<FeasibleRegion> {
    match scheme {
        Scheme::Sar => Ok(FeasibleRegion {
            intervals: vec![(0.0, demand_inverse(params, params.capacity)?)],
        }),
        _ => solve(params, Scheme::Sur, cfg).map(|s| s.region),
    }
}

/// Monotonicity report for the two ad-supply quantities under SAR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub holds: bool,
    /// First grid pair `(ω_prev, ω)` on which either quantity decreased.
    pub first_violation: Option<(f64, f64)>,
    /// Maximal runs on which `E[y] N^ad` decreases.
    pub supply_decreasing: Vec<(f64, f64)>,
    /// Maximal runs on which `(E[y])² / E[y²] N^ad` decreases.
    pub effective_mass_decreasing: Vec<(f64, f64)>,
}

/// Log-spaced reward grid above the no-watching bound used by
/// [`check_theorem2`].
pub fn theorem2_grid(params: &MarketParams, n: usize) -> Result<Vec<f64>> {
    let b = CaseBounds::new(params);
    let top = demand_inverse(params, params.capacity)?.max(10.0 * b.bc_sar);
    Ok(logspace(b.ab * (1.0 + 1e-6), top, n).collect())
}

fn decreasing_runs(omegas: &[f64], q: &[f64]) -> Vec<(f64, f64)> {
    let mut runs: Vec<(f64, f64)> = Vec::new();
    for i in 1..q.len() {
        if q[i] < q[i - 1] * (1.0 - 1e-9) {
            match runs.last_mut() {
                Some(r) if r.1 == omegas[i - 1] => r.1 = omegas[i],
                _ => runs.push((omegas[i - 1], omegas[i])),
            }
        }
    }
    runs
}

/// Checks whether `E[y] N^ad` and `(E[y])²/E[y²] N^ad` are non-decreasing
/// in `ω` over `grid` under SAR.
pub fn check_theorem2(params: &MarketParams, grid: &[f64]) -> Result<Theorem2Report> {
    let stats = grid
        .par_iter()
        .map(|&w| {
            let e = evaluate(params, w, Scheme::Sar)?;
            let s = e.ad.pooled.stats;
            let effective = if s.is_empty() { 0.0 } else { s.ey * s.ey / s.ey2 * s.n_ad };
            Ok((s.supply(), effective))
        })
        .collect::<Result<Vec<_>>>()?;
    let supply: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let effective: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let supply_decreasing = decreasing_runs(grid, &supply);
    let effective_mass_decreasing = decreasing_runs(grid, &effective);
    let first_violation = supply_decreasing
        .first()
        .into_iter()
        .chain(effective_mass_decreasing.first())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .copied();
    Ok(Theorem2Report {
        holds: first_violation.is_none(),
        first_violation,
        supply_decreasing,
        effective_mass_decreasing,
    })
}

/// `(capacity condition, wear-out condition)` under which SUR leaves
/// capacity unused.
pub fn check_theorem3(params: &MarketParams) -> (bool, bool) {
    let u = &params.utility;
    let needed = params.users * u.inv_du(params.fee / (params.theta_max() * params.quota));
    let capacity = params.capacity > needed;
    let subscribers = params.dist.mass(params.theta0(), params.theta_max());
    let b = params.effectiveness;
    let wear = params.wear_out > b * b * params.advertisers / (8.0 * params.fee * subscribers);
    (capacity, wear)
}

/// SAR revenue as capacity grows without bound, for logarithmic utility
/// and uniform valuations.
pub fn theorem5_limit(params: &MarketParams) -> Result<f64> {
    let (Utility::Logarithmic, TypeDistribution::Uniform { theta_max }) = (params.utility, params.dist)
    else {
        return Err(Error::InvalidParameter {
            name: "utility",
            reason: "closed-form limit needs logarithmic utility and uniform valuations".into(),
        });
    };
    let (a, b, k) = (params.wear_out, params.effectiveness, params.advertisers);
    let p = (b - 4.0 * a / (3.0 * k) * theta_max / params.ad_cost).max(0.5 * b);
    Ok(params.users * params.fee + p * (b - p) * 3.0 * k / (8.0 * a) * params.users)
}
