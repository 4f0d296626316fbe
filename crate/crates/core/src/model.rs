//! Market primitives: data-consumption utility, valuation distribution and
//! the full parameter vector shared by every solver stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_scalar, QuadOptions};

/// Concave utility of data consumption, `u(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `ln(1 + z)`
    Logarithmic,
    /// `((z + mu)^(1 - alpha) - mu^(1 - alpha)) / (1 - alpha)`
    AlphaFair { alpha: f64, mu: f64 },
    /// `1 - exp(-gamma z)`
    Exponential { gamma: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Utility::Logarithmic => Ok(()),
            Utility::AlphaFair { alpha, mu } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "alpha",
                        reason: format!("must lie in (0, 1), got {alpha}"),
                    });
                }
                if !(mu >= 0.0 && mu.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "mu",
                        reason: format!("must be finite and >= 0, got {mu}"),
                    });
                }
                Ok(())
            }
            Utility::Exponential { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "gamma",
                        reason: format!("must be finite and > 0, got {gamma}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// `u(z)` without domain checks; callers guarantee `z >= 0`.
    #[inline]
    pub fn u(&self, z: f64) -> f64 {
        match *self {
            Utility::Logarithmic => z.ln_1p(),
            Utility::AlphaFair { alpha, mu } => {
                let e = 1.0 - alpha;
                ((z + mu).powf(e) - mu.powf(e)) / e
            }
            Utility::Exponential { gamma } => -(-gamma * z).exp_m1(),
        }
    }

    /// `u'(z)`; infinite at zero for alpha-fair with `mu = 0`.
    #[inline]
    pub fn du(&self, z: f64) -> f64 {
        match *self {
            Utility::Logarithmic => 1.0 / (1.0 + z),
            Utility::AlphaFair { alpha, mu } => (z + mu).powf(-alpha),
            Utility::Exponential { gamma } => gamma * (-gamma * z).exp(),
        }
    }

    /// `u'(0)`, possibly `+inf`.
    #[inline]
    pub fn du_zero(&self) -> f64 {
        match *self {
            Utility::AlphaFair { mu: 0.0, .. } => f64::INFINITY,
            _ => self.du(0.0),
        }
    }

    /// `(u')^{-1}(s)` clamped to zero data for `s >= u'(0)`.
    #[inline]
    pub fn inv_du(&self, s: f64) -> f64 {
        if s >= self.du_zero() {
            return 0.0;
        }
        let z = match *self {
            Utility::Logarithmic => 1.0 / s - 1.0,
            Utility::AlphaFair { alpha, mu } => s.powf(-1.0 / alpha) - mu,
            Utility::Exponential { gamma } => (gamma / s).ln() / gamma,
        };
        z.max(0.0)
    }

    /// Checked `u(z)`.
    pub fn eval_u(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain {
                op: "eval_u",
                reason: format!("data amount must be >= 0, got {z}"),
            });
        }
        Ok(self.u(z))
    }

    /// Checked `u'(z)`.
    pub fn eval_u_prime(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain {
                op: "eval_u_prime",
                reason: format!("data amount must be >= 0, got {z}"),
            });
        }
        Ok(if z == 0.0 { self.du_zero() } else { self.du(z) })
    }

    /// Checked `(u')^{-1}(s)` for `0 < s <= u'(0)`.
    pub fn inverse_marginal(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain {
                op: "inverse_marginal",
                reason: format!("marginal utility must be > 0, got {s}"),
            });
        }
        let top = self.du_zero();
        if s > top {
            return Err(Error::Domain {
                op: "inverse_marginal",
                reason: format!("marginal utility {s} exceeds u'(0) = {top}"),
            });
        }
        Ok(self.inv_du(s))
    }
}

/// Density of user valuations on `[0, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TypeDistribution {
    Uniform { theta_max: f64 },
    TruncatedNormal(TruncatedNormal),
}

/// Normal(mean, sd) restricted to `[lo, hi]` and renormalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    // parent-normal mass on [lo, hi]
    mass: f64,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Parent standard-normal mass on `[a, b]`, evaluated on the tail side of
/// zero so that far-tail intervals keep full relative precision.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * erfc(-a / SQRT_2) - 0.5 * erfc(b / SQRT_2)
    }
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sd",
                reason: format!("must be finite and > 0, got {sd}"),
            });
        }
        if !mean.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: format!("must be finite, got {mean}"),
            });
        }
        if lo != 0.0 {
            return Err(Error::InvalidParameter {
                name: "lo",
                reason: format!("valuations start at 0, got {lo}"),
            });
        }
        if !(hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "hi",
                reason: format!("must be finite and > lo, got {hi}"),
            });
        }
        let mass = normal_mass((lo - mean) / sd, (hi - mean) / sd);
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: format!("parent normal puts no mass on [{lo}, {hi}]"),
            });
        }
        Ok(Self {
            mean,
            sd,
            lo,
            hi,
            mass,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn sd(&self) -> f64 {
        self.sd
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
}

impl TypeDistribution {
    pub fn uniform(theta_max: f64) -> Result<Self> {
        if !(theta_max > 0.0 && theta_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta_max",
                reason: format!("must be finite and > 0, got {theta_max}"),
            });
        }
        Ok(Self::Uniform { theta_max })
    }

    pub fn truncated_normal(mean: f64, sd: f64, theta_max: f64) -> Result<Self> {
        TruncatedNormal::new(mean, sd, 0.0, theta_max).map(Self::TruncatedNormal)
    }

    pub fn theta_max(&self) -> f64 {
        match self {
            Self::Uniform { theta_max } => *theta_max,
            Self::TruncatedNormal(t) => t.hi,
        }
    }

    /// `g(theta)`, zero outside `[0, theta_max]`.
    #[inline]
    pub fn pdf(&self, theta: f64) -> f64 {
        if !(0.0..=self.theta_max()).contains(&theta) {
            return 0.0;
        }
        match self {
            Self::Uniform { theta_max } => 1.0 / theta_max,
            Self::TruncatedNormal(t) => {
                let z = (theta - t.mean) / t.sd;
                (-0.5 * z * z).exp() / (t.sd * (2.0 * std::f64::consts::PI).sqrt() * t.mass)
            }
        }
    }

    /// Probability mass on `[a, b]` (clipped to the support), in closed form.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let tm = self.theta_max();
        let a = a.clamp(0.0, tm);
        let b = b.clamp(0.0, tm);
        if b <= a {
            return 0.0;
        }
        match self {
            Self::Uniform { theta_max } => (b - a) / theta_max,
            Self::TruncatedNormal(t) => {
                normal_mass((a - t.mean) / t.sd, (b - t.mean) / t.sd) / t.mass
            }
        }
    }

    /// `∫_lo^hi f(θ) g(θ) dθ` by adaptive quadrature.
    pub fn integrate<F>(&self, f: F, lo: f64, hi: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let tm = self.theta_max();
        if !(lo >= 0.0 && lo <= hi && hi <= tm * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                op: "integrate",
                reason: format!("need 0 <= lo <= hi <= theta_max, got [{lo}, {hi}]"),
            });
        }
        integrate_scalar(|t| f(t) * self.pdf(t), lo, hi.min(tm), QuadOptions::default())
    }
}

/// Rewarding scheme offered by the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Only data-plan subscribers may watch ads for rewards.
    #[serde(rename = "SAR")]
    Sar,
    /// Everyone may watch ads for rewards.
    #[serde(rename = "SUR")]
    Sur,
    /// SUR with subscriber and non-subscriber slots priced separately.
    #[serde(rename = "SURD")]
    Surd,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Sar, Scheme::Sur, Scheme::Surd];

    /// The user-side rule; SURD changes only ad-slot handling.
    pub fn user_rule(self) -> Scheme {
        match self {
            Scheme::Surd => Scheme::Sur,
            s => s,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sar => "SAR",
            Scheme::Sur => "SUR",
            Scheme::Surd => "SURD",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sar" => Ok(Scheme::Sar),
            "sur" => Ok(Scheme::Sur),
            "surd" => Ok(Scheme::Surd),
            _ => Err(Error::InvalidParameter {
                name: "scheme",
                reason: format!("expected sar, sur or surd, got `{s}`"),
            }),
        }
    }
}

/// Full parameter vector of the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Mass of users `N`.
    pub users: f64,
    /// Monthly subscription fee `F`.
    pub fee: f64,
    /// Data included in the plan `Q`.
    pub quota: f64,
    /// Disutility of watching one ad `Φ`.
    pub ad_cost: f64,
    /// Number of advertisers `K`.
    pub advertisers: f64,
    /// Wear-out coefficient `A`.
    pub wear_out: f64,
    /// Linear effectiveness coefficient `B`.
    pub effectiveness: f64,
    /// Network capacity `C`.
    pub capacity: f64,
    pub utility: Utility,
    pub dist: TypeDistribution,
}

impl MarketParams {
    pub fn theta_max(&self) -> f64 {
        self.dist.theta_max()
    }

    /// Subscription threshold without rewards, `θ₀ = F / u(Q)`.
    pub fn theta0(&self) -> f64 {
        self.fee / self.utility.u(self.quota)
    }

    /// Lower bound on `θ_max` needed for the case structure; `None` when
    /// `u'(0)` is infinite.
    pub fn valuation_bound(&self) -> Option<f64> {
        let u = &self.utility;
        let top = u.du_zero();
        top.is_finite()
            .then(|| top * self.fee / (u.du(self.quota) * u.u(self.quota)))
    }

    /// Demand with no reward, `D(0) = N Q ∫_{θ₀}^{θ_max} g`.
    pub fn baseline_demand(&self) -> f64 {
        self.users * self.quota * self.dist.mass(self.theta0(), self.theta_max())
    }

    /// Data revenue with no reward, `N F ∫_{θ₀}^{θ_max} g`.
    pub fn baseline_revenue(&self) -> f64 {
        self.users * self.fee * self.dist.mass(self.theta0(), self.theta_max())
    }

    pub fn with_capacity(mut self, capacity: f64) -> Self {
        self.capacity = capacity;
        self
    }

    /// Checks every load-time invariant.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("N", self.users),
            ("F", self.fee),
            ("Q", self.quota),
            ("phi", self.ad_cost),
            ("K", self.advertisers),
            ("B", self.effectiveness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if !(self.wear_out > 0.0 && self.wear_out.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "A",
                reason: format!(
                    "wear-out coefficient must be finite and > 0 (slot demand divides by A), got {}",
                    self.wear_out
                ),
            });
        }
        if !self.capacity.is_finite() {
            return Err(Error::InvalidParameter {
                name: "C",
                reason: format!("must be finite, got {}", self.capacity),
            });
        }
        self.utility.validate()?;

        let theta_max = self.theta_max();
        let bound = self.valuation_bound().unwrap_or_else(|| self.theta0());
        if !(theta_max > bound) {
            return Err(Error::ValuationRange { theta_max, bound });
        }

        let baseline = self.baseline_demand();
        if self.capacity < baseline * (1.0 - 1e-12) {
            return Err(Error::CapacityBelowBaseline {
                capacity: self.capacity,
                baseline,
            });
        }
        Ok(())
    }
}
