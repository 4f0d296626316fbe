//! Stage-II user behaviour: valuation thresholds, case classification and
//! the closed-form subscription / ad-watching best responses.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MarketParams, Scheme};

const BISECTION_CAP: usize = 200;

/// Reward regime at a given `ω`. The hatted SUR cases carry a `Hat` suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Case {
    A,
    B,
    C,
    #[serde(rename = "Ahat")]
    AHat,
    #[serde(rename = "Bhat")]
    BHat,
    #[serde(rename = "Chat")]
    CHat,
    #[serde(rename = "Dhat")]
    DHat,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::AHat => "Ahat",
            Case::BHat => "Bhat",
            Case::CHat => "Chat",
            Case::DHat => "Dhat",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Reward levels at which the case changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseBounds {
    /// `Φ / (u'(Q) θ_max)`: first reward at which anyone watches.
    pub ab: f64,
    /// `Φ u(Q) / (F u'(Q))`: SAR boundary between B and C.
    pub bc_sar: f64,
    /// `Φ u(Q) / (F u'(0))`: SUR boundary between B̂ and Ĉ (0 if `u'(0) = ∞`).
    pub bc_sur: f64,
    /// `Φ Q / F`: SUR reward from which nobody subscribes.
    pub cd: f64,
}

impl CaseBounds {
    pub fn new(params: &MarketParams) -> Self {
        let u = &params.utility;
        let (phi, fee, q) = (params.ad_cost, params.fee, params.quota);
        let uq = u.u(q);
        Self {
            ab: phi / (u.du(q) * params.theta_max()),
            bc_sar: phi * uq / (fee * u.du(q)),
            bc_sur: phi * uq / (fee * u.du_zero()),
            cd: phi * q / fee,
        }
    }
}

/// SAR case at `ω`; boundary values fall into the lower case.
pub fn classify_sar(params: &MarketParams, omega: f64) -> Case {
    let b = CaseBounds::new(params);
    if omega <= b.ab {
        Case::A
    } else if omega <= b.bc_sar {
        Case::B
    } else {
        Case::C
    }
}

/// SUR case at `ω`; `ω = ΦQ/F` already belongs to D̂.
pub fn classify_sur(params: &MarketParams, omega: f64) -> Case {
    let b = CaseBounds::new(params);
    if omega >= b.cd {
        Case::DHat
    } else if omega > b.bc_sur {
        Case::CHat
    } else if omega > b.ab {
        Case::BHat
    } else {
        Case::AHat
    }
}

pub fn classify(params: &MarketParams, omega: f64, scheme: Scheme) -> Case {
    match scheme.user_rule() {
        Scheme::Sar => classify_sar(params, omega),
        _ => classify_sur(params, omega),
    }
}

/// Valuation thresholds at one reward level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub omega: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: Option<f64>,
    pub theta3: f64,
    pub theta4: Option<f64>,
    pub case: Case,
}

/// `θ₁ = Φ / (ω u'(Q))`, infinite at `ω = 0`.
pub fn theta1(params: &MarketParams, omega: f64) -> f64 {
    params.ad_cost / (omega * params.utility.du(params.quota))
}

/// `θ₃ = Φ / (ω u'(0))`, zero when `u'(0)` is unbounded.
pub fn theta3(params: &MarketParams, omega: f64) -> f64 {
    let top = params.utility.du_zero();
    if top.is_infinite() {
        0.0
    } else {
        params.ad_cost / (omega * top)
    }
}

/// Data consumed by a type-`θ` user who watches the optimal number of ads.
#[inline]
fn consumption(params: &MarketParams, theta: f64, omega: f64) -> f64 {
    params.utility.inv_du(params.ad_cost / (omega * theta))
}

/// Subscriber-side indifference function whose root is `θ₂`.
pub fn h(params: &MarketParams, theta: f64, omega: f64) -> f64 {
    let z = consumption(params, theta, omega);
    theta * params.utility.u(z) - params.fee - params.ad_cost / omega * (z - params.quota)
}

/// Non-subscriber-side indifference function whose root is `θ₄`.
pub fn v(params: &MarketParams, theta: f64, omega: f64) -> f64 {
    let u = &params.utility;
    let z = consumption(params, theta, omega);
    theta * u.u(z) - params.ad_cost / omega * z - theta * u.u(params.quota) + params.fee
}

/// Bisection for a sign change of `f` on `[lo, hi]` given `f(lo) < 0 < f(hi)`
/// (`rising`) or the reverse.
fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rising: bool,
    tol: f64,
    what: &'static str,
) -> Result<f64> {
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Ok(mid);
        }
        let below = f(mid) < 0.0;
        if below == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::NoConvergence {
            what,
            iterations: BISECTION_CAP,
        })
    }
}

fn sign_slack(params: &MarketParams) -> f64 {
    1e-8 * params.fee
}

/// Root `θ₂ ∈ (θ₁, θ₀)` of [`h`] for a SAR Case-C reward.
pub fn solve_theta2(params: &MarketParams, omega: f64) -> Result<f64> {
    let t0 = params.theta0();
    let t1 = theta1(params, omega);
    let (h1, h0) = (h(params, t1, omega), h(params, t0, omega));
    let slack = sign_slack(params);
    if !(t1 < t0) || h1 >= slack || h0 <= -slack {
        return Err(Error::Bracket {
            what: "theta2",
            omega,
            detail: format!("need h(theta1) < 0 < h(theta0); theta1 = {t1}, h = {h1:e}; theta0 = {t0}, h = {h0:e}"),
        });
    }
    bisect(
        |t| h(params, t, omega),
        t1,
        t0,
        true,
        1e-10 * params.theta_max(),
        "theta2 bisection",
    )
}

/// Root `θ₄ ∈ (θ₃, θ₁)` of [`v`] for a SUR Case-Ĉ reward.
pub fn solve_theta4(params: &MarketParams, omega: f64) -> Result<f64> {
    let t1 = theta1(params, omega);
    let t3 = theta3(params, omega);
    let (v3, v1) = (v(params, t3, omega), v(params, t1, omega));
    let slack = sign_slack(params);
    if !(t3 < t1) || v3 <= -slack || v1 >= slack {
        return Err(Error::Bracket {
            what: "theta4",
            omega,
            detail: format!("need v(theta3) > 0 > v(theta1); theta3 = {t3}, v = {v3:e}; theta1 = {t1}, v = {v1:e}"),
        });
    }
    bisect(
        |t| v(params, t, omega),
        t3,
        t1,
        false,
        1e-10 * params.theta_max(),
        "theta4 bisection",
    )
}

/// All thresholds at `ω`, with bracket and ordering checks for the roots.
pub fn thresholds(params: &MarketParams, omega: f64, scheme: Scheme) -> Result<Thresholds> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Domain {
            op: "thresholds",
            reason: format!("reward must be finite and >= 0, got {omega}"),
        });
    }
    let case = classify(params, omega, scheme);
    let theta0 = params.theta0();
    let t1 = theta1(params, omega);
    let t3 = theta3(params, omega);
    let tol = 1e-9 * params.theta_max();
    let mut theta2 = None;
    let mut theta4 = None;
    match case {
        Case::C => {
            let t2 = solve_theta2(params, omega)?;
            if !(t1 - tol <= t2 && t2 <= theta0 + tol) {
                return Err(Error::Structure {
                    check: "theta1 < theta2 < theta0",
                    omega,
                    detail: format!("theta1 = {t1}, theta2 = {t2}, theta0 = {theta0}"),
                });
            }
            theta2 = Some(t2);
        }
        Case::CHat => {
            let t4 = solve_theta4(params, omega)?;
            if !(t4 > theta0 - tol) {
                return Err(Error::Structure {
                    check: "theta4 > theta0",
                    omega,
                    detail: format!("theta4 = {t4}, theta0 = {theta0}"),
                });
            }
            theta4 = Some(t4);
        }
        _ => {}
    }
    Ok(Thresholds {
        omega,
        theta0,
        theta1: t1,
        theta2,
        theta3: t3,
        theta4,
        case,
    })
}

/// A user's Stage-II choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserDecision {
    pub subscribe: bool,
    pub ads: f64,
}

/// `θ u(Q r + ω x) − F r − Φ x`.
pub fn user_payoff(params: &MarketParams, theta: f64, subscribe: bool, ads: f64, omega: f64) -> f64 {
    let (base, fee) = if subscribe {
        (params.quota, params.fee)
    } else {
        (0.0, 0.0)
    };
    theta * params.utility.u(base + omega * ads) - fee - params.ad_cost * ads
}

/// Valuation interval on which users watch ads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WatchSegment {
    pub lo: f64,
    pub hi: f64,
    pub subscribed: bool,
}

/// Population-level best response at one reward level: a subscription
/// threshold plus up to two watching segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseProfile {
    pub thresholds: Thresholds,
    /// Users with `θ >= subscribe_from` subscribe; `None` means nobody does.
    pub subscribe_from: Option<f64>,
    pub watch: Vec<WatchSegment>,
}

impl ResponseProfile {
    pub fn new(params: &MarketParams, omega: f64, scheme: Scheme) -> Result<Self> {
        let t = thresholds(params, omega, scheme)?;
        let tm = params.theta_max();
        let seg = |lo: f64, hi: f64, subscribed| WatchSegment {
            lo: lo.clamp(0.0, tm),
            hi: hi.clamp(0.0, tm),
            subscribed,
        };
        let (subscribe_from, watch) = match t.case {
            Case::A | Case::AHat => (Some(t.theta0), vec![]),
            Case::B | Case::BHat => (Some(t.theta0), vec![seg(t.theta1, tm, true)]),
            Case::C => {
                let t2 = t.theta2.expect("case C carries theta2");
                (Some(t2), vec![seg(t2, tm, true)])
            }
            Case::CHat => {
                let t4 = t.theta4.expect("case Chat carries theta4");
                (
                    Some(t4),
                    vec![seg(t.theta1, tm, true), seg(t.theta3, t4, false)],
                )
            }
            Case::DHat => (None, vec![seg(t.theta3, tm, false)]),
        };
        let watch = watch.into_iter().filter(|s| s.hi > s.lo).collect();
        Ok(Self {
            thresholds: t,
            subscribe_from: subscribe_from.map(|s| s.min(tm)),
            watch,
        })
    }

    pub fn omega(&self) -> f64 {
        self.thresholds.omega
    }

    pub fn case(&self) -> Case {
        self.thresholds.case
    }

    /// Ads watched by a type-`θ` user inside a segment.
    #[inline]
    pub fn ads_in(&self, params: &MarketParams, seg: &WatchSegment, theta: f64) -> f64 {
        let omega = self.omega();
        let offset = if seg.subscribed { params.quota } else { 0.0 };
        ((consumption(params, theta, omega) - offset) / omega).max(0.0)
    }

    /// Best response of a single type-`θ` user.
    pub fn decision(&self, params: &MarketParams, theta: f64) -> UserDecision {
        let subscribe = self.subscribe_from.is_some_and(|s| theta >= s);
        let ads = self
            .watch
            .iter()
            .find(|s| s.subscribed == subscribe && theta >= s.lo && theta <= s.hi)
            .map_or(0.0, |s| self.ads_in(params, s, theta));
        UserDecision { subscribe, ads }
    }

    /// Mass of subscribers.
    pub fn subscriber_mass(&self, params: &MarketParams) -> f64 {
        self.subscribe_from
            .map_or(0.0, |s| params.dist.mass(s, params.theta_max()))
    }
}

fn check_type(params: &MarketParams, theta: f64, omega: f64) -> Result<()> {
    if !(0.0..=params.theta_max()).contains(&theta) {
        return Err(Error::Domain {
            op: "best_response",
            reason: format!("type {theta} outside [0, {}]", params.theta_max()),
        });
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Domain {
            op: "best_response",
            reason: format!("reward must be finite and >= 0, got {omega}"),
        });
    }
    Ok(())
}

/// Best response under SAR.
pub fn best_response_sar(params: &MarketParams, theta: f64, omega: f64) -> Result<UserDecision> {
    check_type(params, theta, omega)?;
    Ok(ResponseProfile::new(params, omega, Scheme::Sar)?.decision(params, theta))
}

/// Best response under SUR (and SURD, which shares the user side).
pub fn best_response_sur(params: &MarketParams, theta: f64, omega: f64) -> Result<UserDecision> {
    check_type(params, theta, omega)?;
    Ok(ResponseProfile::new(params, omega, Scheme::Sur)?.decision(params, theta))
}
