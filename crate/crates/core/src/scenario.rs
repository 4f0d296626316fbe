//! Scenario files: a flat parameter record with nested `utility` and
//! `distribution` sections, stored as TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarketParams, TypeDistribution, Utility};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Logarithmic,
    GeneralizedAlphaFair { alpha: f64, mu: f64 },
    Exponential { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform {
        theta_max: f64,
    },
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "N")]
    pub users: f64,
    #[serde(rename = "F")]
    pub fee: f64,
    #[serde(rename = "Q")]
    pub quota: f64,
    #[serde(rename = "phi")]
    pub ad_cost: f64,
    #[serde(rename = "K")]
    pub advertisers: f64,
    #[serde(rename = "A")]
    pub wear_out: f64,
    #[serde(rename = "B")]
    pub effectiveness: f64,
    #[serde(rename = "C")]
    pub capacity: f64,
    pub utility: UtilitySpec,
    pub distribution: DistributionSpec,
}

impl From<UtilitySpec> for Utility {
    fn from(s: UtilitySpec) -> Self {
        match s {
            UtilitySpec::Logarithmic => Utility::Logarithmic,
            UtilitySpec::GeneralizedAlphaFair { alpha, mu } => Utility::AlphaFair { alpha, mu },
            UtilitySpec::Exponential { gamma } => Utility::Exponential { gamma },
        }
    }
}

impl From<Utility> for UtilitySpec {
    fn from(u: Utility) -> Self {
        match u {
            Utility::Logarithmic => UtilitySpec::Logarithmic,
            Utility::AlphaFair { alpha, mu } => UtilitySpec::GeneralizedAlphaFair { alpha, mu },
            Utility::Exponential { gamma } => UtilitySpec::Exponential { gamma },
        }
    }
}

impl DistributionSpec {
    pub fn build(&self) -> Result<TypeDistribution> {
        match *self {
            DistributionSpec::Uniform { theta_max } => TypeDistribution::uniform(theta_max),
            DistributionSpec::TruncatedNormal { mean, sd, lo, hi } => {
                crate::model::TruncatedNormal::new(mean, sd, lo, hi)
                    .map(TypeDistribution::TruncatedNormal)
            }
        }
    }
}

impl From<TypeDistribution> for DistributionSpec {
    fn from(d: TypeDistribution) -> Self {
        match d {
            TypeDistribution::Uniform { theta_max } => DistributionSpec::Uniform { theta_max },
            TypeDistribution::TruncatedNormal(t) => DistributionSpec::TruncatedNormal {
                mean: t.mean(),
                sd: t.sd(),
                lo: t.lo(),
                hi: t.hi(),
            },
        }
    }
}

impl Scenario {
    /// Builds parameters without running the load-time checks.
    pub fn params_unchecked(&self) -> Result<MarketParams> {
        Ok(MarketParams {
            users: self.users,
            fee: self.fee,
            quota: self.quota,
            ad_cost: self.ad_cost,
            advertisers: self.advertisers,
            wear_out: self.wear_out,
            effectiveness: self.effectiveness,
            capacity: self.capacity,
            utility: self.utility.into(),
            dist: self.distribution.build()?,
        })
    }

    /// Builds and validates the market parameters.
    pub fn params(&self) -> Result<MarketParams> {
        let p = self.params_unchecked()?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_params(p: &MarketParams) -> Self {
        Self {
            users: p.users,
            fee: p.fee,
            quota: p.quota,
            ad_cost: p.ad_cost,
            advertisers: p.advertisers,
            wear_out: p.wear_out,
            effectiveness: p.effectiveness,
            capacity: p.capacity,
            utility: p.utility.into(),
            distribution: p.dist.into(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse {
            format: "TOML",
            message: e.to_string(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            format: "JSON",
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises to TOML")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises to JSON")
    }

    /// Reads a scenario file; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG5: &str = r#"
N = 1e7
F = 30
Q = 0.8
phi = 0.3
K = 23
A = 0.6
B = 5
C = 1.24e7

[utility]
variant = "logarithmic"

[distribution]
variant = "uniform"
theta_max = 155
"#;

    #[test]
    fn parses_toml() {
        let s = Scenario::from_toml_str(FIG5).unwrap();
        assert_eq!(s.users, 1e7);
        assert_eq!(s.utility, UtilitySpec::Logarithmic);
        let p = s.params().unwrap();
        assert_eq!(p.theta_max(), 155.0);
    }

    #[test]
    fn round_trips_both_formats() {
        let s = Scenario::from_toml_str(FIG5).unwrap();
        assert_eq!(Scenario::from_toml_str(&s.to_toml_string()).unwrap(), s);
        assert_eq!(Scenario::from_json_str(&s.to_json_string()).unwrap(), s);
    }

    #[test]
    fn zero_wear_out_is_rejected() {
        let text = FIG5.replace("A = 0.6", "A = 0");
        let err = Scenario::from_toml_str(&text).unwrap().params().unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "A", .. }));
    }

    #[test]
    fn capacity_below_baseline_is_rejected() {
        let text = FIG5.replace("C = 1.24e7", "C = 1e6");
        let err = Scenario::from_toml_str(&text).unwrap().params().unwrap_err();
        assert!(matches!(err, Error::CapacityBelowBaseline { .. }));
    }

    #[test]
    fn narrow_valuation_range_is_rejected() {
        let text = FIG5.replace("theta_max = 155", "theta_max = 60");
        let err = Scenario::from_toml_str(&text).unwrap().params().unwrap_err();
        assert!(matches!(err, Error::ValuationRange { .. }));
    }

    #[test]
    fn unknown_fields_and_variants_fail_to_parse() {
        assert!(Scenario::from_toml_str(&FIG5.replace("phi", "Phi")).is_err());
        assert!(Scenario::from_toml_str(&FIG5.replace("logarithmic", "cubic")).is_err());
    }
}
