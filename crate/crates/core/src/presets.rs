//! Built-in reference scenarios for the scheme comparisons and a seeded
//! generator of randomised scenarios around them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::scenario::{DistributionSpec, Scenario, UtilitySpec};

/// A named scenario with the capacity range swept for its figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub id: &'static str,
    pub description: &'static str,
    /// Scenario with a representative capacity.
    pub scenario: Scenario,
    /// Approximate upper end of the capacity sweep; the lower end is the
    /// no-reward demand.
    pub sweep_to: f64,
    pub steps: usize,
}

impl Preset {
    pub fn params(&self) -> Result<MarketParams> {
        self.scenario.params()
    }

    /// Sweep start, the no-reward demand `D(0)`.
    pub fn sweep_from(&self) -> Result<f64> {
        Ok(self.scenario.params_unchecked()?.baseline_demand())
    }
}

#[allow(clippy::too_many_arguments)]
const fn scenario(
    users: f64,
    fee: f64,
    quota: f64,
    ad_cost: f64,
    advertisers: f64,
    wear_out: f64,
    effectiveness: f64,
    capacity: f64,
    utility: UtilitySpec,
    distribution: DistributionSpec,
) -> Scenario {
    Scenario {
        users,
        fee,
        quota,
        ad_cost,
        advertisers,
        wear_out,
        effectiveness,
        capacity,
        utility,
        distribution,
    }
}

const LOG: UtilitySpec = UtilitySpec::Logarithmic;
const FAIR: UtilitySpec = UtilitySpec::GeneralizedAlphaFair { alpha: 0.8, mu: 0.8 };
const EXP: UtilitySpec = UtilitySpec::Exponential { gamma: 0.7 };

const fn uniform(theta_max: f64) -> DistributionSpec {
    DistributionSpec::Uniform { theta_max }
}

const fn trunc(mean: f64, sd: f64, hi: f64) -> DistributionSpec {
    DistributionSpec::TruncatedNormal {
        mean,
        sd,
        lo: 0.0,
        hi,
    }
}

pub const PRESETS: [Preset; 12] = [
    Preset {
        id: "fig5a",
        description: "logarithmic utility, uniform valuations",
        scenario: scenario(1e7, 30.0, 0.8, 0.3, 23.0, 0.6, 5.0, 1.24e7, LOG, uniform(155.0)),
        sweep_to: 2.2e7,
        steps: 60,
    },
    Preset {
        id: "fig5b",
        description: "alpha-fair utility (alpha = 0.8, mu = 0.8), uniform valuations",
        scenario: scenario(1e7, 30.0, 0.8, 0.3, 23.0, 0.6, 5.0, 1.24e7, FAIR, uniform(155.0)),
        sweep_to: 2.2e7,
        steps: 60,
    },
    Preset {
        id: "fig5c",
        description: "exponential utility, uniform valuations, strong wear-out",
        scenario: scenario(1e7, 45.0, 2.0, 0.3, 23.0, 0.9, 5.0, 2.2e7, EXP, uniform(250.0)),
        sweep_to: 3.5e7,
        steps: 60,
    },
    Preset {
        id: "fig5d",
        description: "exponential utility, uniform valuations, weak wear-out",
        scenario: scenario(1e7, 45.0, 2.0, 0.3, 23.0, 0.2, 5.0, 2.2e7, EXP, uniform(250.0)),
        sweep_to: 3.5e7,
        steps: 60,
    },
    Preset {
        id: "fig7a",
        description: "logarithmic utility, truncated-normal valuations",
        scenario: scenario(1e7, 40.0, 2.0, 0.03, 8.0, 0.5, 10.0, 2.5e7, LOG, trunc(75.0, 40.0, 150.0)),
        sweep_to: 8.0e7,
        steps: 60,
    },
    Preset {
        id: "fig7b",
        description: "alpha-fair utility (alpha = 0.8, mu = 0.8), truncated-normal valuations",
        scenario: scenario(1e7, 40.0, 2.0, 0.03, 8.0, 0.5, 10.0, 2.5e7, FAIR, trunc(75.0, 40.0, 150.0)),
        sweep_to: 8.0e7,
        steps: 60,
    },
    Preset {
        id: "fig7c",
        description: "exponential utility, truncated-normal valuations, strong wear-out",
        scenario: scenario(1e7, 40.0, 2.0, 0.5, 16.0, 0.9, 5.0, 2.07e7, EXP, trunc(125.0, 30.0, 250.0)),
        sweep_to: 3.5e7,
        steps: 60,
    },
    Preset {
        id: "fig7d",
        description: "exponential utility, truncated-normal valuations, weak wear-out",
        scenario: scenario(1e7, 40.0, 2.0, 0.5, 16.0, 0.2, 5.0, 2.07e7, EXP, trunc(125.0, 30.0, 250.0)),
        sweep_to: 3.5e7,
        steps: 60,
    },
    Preset {
        id: "appR-a",
        description: "logarithmic utility, uniform valuations, alternative setting A",
        scenario: scenario(1e7, 25.0, 0.7, 0.2, 30.0, 0.5, 3.0, 1.0e7, LOG, uniform(155.0)),
        sweep_to: 2.0e7,
        steps: 60,
    },
    Preset {
        id: "appR-b",
        description: "logarithmic utility, uniform valuations, alternative setting B",
        scenario: scenario(1e5, 32.0, 0.6, 0.3, 18.0, 0.6, 4.0, 1.0e5, LOG, uniform(170.0)),
        sweep_to: 2.0e5,
        steps: 60,
    },
    Preset {
        id: "appR-c",
        description: "logarithmic utility, uniform valuations, alternative setting C",
        scenario: scenario(1e4, 28.0, 0.6, 0.2, 18.0, 0.4, 3.0, 1.0e4, LOG, uniform(150.0)),
        sweep_to: 2.0e4,
        steps: 60,
    },
    Preset {
        id: "appK",
        description: "exponential utility (gamma = 0.95) where capacity is left unused",
        scenario: scenario(
            1e7,
            40.0,
            2.0,
            0.5,
            16.0,
            0.9,
            5.0,
            2.15e7,
            UtilitySpec::Exponential { gamma: 0.95 },
            trunc(30.0, 60.0, 320.0),
        ),
        sweep_to: 3.0e7,
        steps: 60,
    },
];

pub fn preset(id: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.id.eq_ignore_ascii_case(id))
}

/// Preset ids covering every utility/distribution combination.
pub const RANDOM_BASES: [&str; 6] = ["fig5a", "fig5b", "fig5c", "fig7a", "fig7b", "fig7c"];

fn jitter(rng: &mut ChaCha8Rng, x: f64) -> f64 {
    x * 10f64.powf(rng.gen_range(-1.0..1.0))
}

/// Draws a valid scenario by rescaling each parameter of `base` by a
/// log-uniform factor in `[1/10, 10]` and rejecting invalid draws.
/// Capacity is drawn in `[D(0), 2.5 D(0)]`.
pub fn random_scenario(rng: &mut ChaCha8Rng, base: &Scenario) -> Result<MarketParams> {
    for _ in 0..10_000 {
        let utility = match base.utility {
            UtilitySpec::Logarithmic => UtilitySpec::Logarithmic,
            UtilitySpec::GeneralizedAlphaFair { alpha, mu } => UtilitySpec::GeneralizedAlphaFair {
                alpha,
                mu: jitter(rng, mu),
            },
            UtilitySpec::Exponential { gamma } => UtilitySpec::Exponential {
                gamma: jitter(rng, gamma),
            },
        };
        let distribution = match base.distribution {
            DistributionSpec::Uniform { theta_max } => DistributionSpec::Uniform {
                theta_max: jitter(rng, theta_max),
            },
            DistributionSpec::TruncatedNormal { mean, sd, lo, hi } => {
                DistributionSpec::TruncatedNormal {
                    mean: jitter(rng, mean),
                    sd: jitter(rng, sd),
                    lo,
                    hi: jitter(rng, hi),
                }
            }
        };
        let mut s = Scenario {
            users: jitter(rng, base.users),
            fee: jitter(rng, base.fee),
            quota: jitter(rng, base.quota),
            ad_cost: jitter(rng, base.ad_cost),
            advertisers: jitter(rng, base.advertisers),
            wear_out: jitter(rng, base.wear_out),
            effectiveness: jitter(rng, base.effectiveness),
            capacity: 0.0,
            utility,
            distribution,
        };
        let Ok(p) = s.params_unchecked() else { continue };
        s.capacity = p.baseline_demand() * (1.0 + rng.gen_range(0.0..1.5));
        if let Ok(p) = s.params() {
            return Ok(p);
        }
    }
    Err(Error::InvalidParameter {
        name: "scenario",
        reason: "no valid random draw around the base scenario".into(),
    })
}

/// Seeded generator of scenarios cycling through [`RANDOM_BASES`].
pub fn random_scenarios(seed: u64, count: usize) -> Result<Vec<MarketParams>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let base = preset(RANDOM_BASES[i % RANDOM_BASES.len()]).expect("base preset exists");
            random_scenario(&mut rng, &base.scenario)
        })
        .collect()
}
