//! Ad-slot market: watching statistics, advertiser demand under wear-out and
//! the revenue-maximising slot price.

use serde::Serialize;

use crate::error::Result;
use crate::model::{MarketParams, Scheme};
use crate::quadrature::{integrate, QuadOptions};
use crate::user::ResponseProfile;

/// Which ad slots a statistic or price refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SlotClass {
    All,
    Subscribers,
    NonSubscribers,
}

impl SlotClass {
    fn admits(self, subscribed: bool) -> bool {
        match self {
            SlotClass::All => true,
            SlotClass::Subscribers => subscribed,
            SlotClass::NonSubscribers => !subscribed,
        }
    }
}

/// Mass of ad watchers with the first two moments of their ad counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdMarketStats {
    pub n_ad: f64,
    pub ey: f64,
    pub ey2: f64,
    pub class: SlotClass,
}

impl AdMarketStats {
    pub fn zero(class: SlotClass) -> Self {
        Self {
            n_ad: 0.0,
            ey: 0.0,
            ey2: 0.0,
            class,
        }
    }

    /// Total number of slots on offer, `E[y] N^ad`.
    pub fn supply(&self) -> f64 {
        self.ey * self.n_ad
    }

    pub fn is_empty(&self) -> bool {
        !(self.n_ad > 0.0 && self.ey > 0.0)
    }
}

/// Statistics of the watchers in `profile` restricted to `class`.
pub fn profile_stats(
    params: &MarketParams,
    profile: &ResponseProfile,
    class: SlotClass,
) -> Result<AdMarketStats> {
    let mut mass = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for seg in profile.watch.iter().filter(|s| class.admits(s.subscribed)) {
        mass += params.dist.mass(seg.lo, seg.hi);
        let [a, b] = integrate(
            |t| {
                let x = profile.ads_in(params, seg, t);
                let g = params.dist.pdf(t);
                [x * g, x * x * g]
            },
            seg.lo,
            seg.hi,
            QuadOptions::default(),
        )?;
        m1 += a;
        m2 += b;
    }
    if !(mass > 0.0 && m1 > 0.0) {
        return Ok(AdMarketStats::zero(class));
    }
    let ey = m1 / mass;
    // Guard against round-off pushing the variance below zero.
    let ey2 = (m2 / mass).max(ey * ey);
    Ok(AdMarketStats {
        n_ad: params.users * mass,
        ey,
        ey2,
        class,
    })
}

/// `(N^ad, E[y], E[y²])` at reward `ω`.
pub fn ad_stats(
    params: &MarketParams,
    omega: f64,
    scheme: Scheme,
    class: SlotClass,
) -> Result<AdMarketStats> {
    let profile = ResponseProfile::new(params, omega, scheme)?;
    profile_stats(params, &profile, class)
}

/// Slots one advertiser buys at price `p`.
pub fn advertiser_best_response(stats: &AdMarketStats, params: &MarketParams, p: f64) -> f64 {
    let b = params.effectiveness;
    if stats.is_empty() || p >= b {
        return 0.0;
    }
    (b - p) / (2.0 * params.wear_out) * (stats.ey * stats.ey / stats.ey2) * stats.n_ad
}

/// An advertiser's payoff from buying `m` slots at price `p`.
pub fn advertiser_payoff(stats: &AdMarketStats, params: &MarketParams, m: f64, p: f64) -> f64 {
    if stats.is_empty() {
        return -m * p;
    }
    let curvature = params.wear_out * stats.ey2 / (stats.ey * stats.ey * stats.n_ad);
    (params.effectiveness - p) * m - curvature * m * m
}

/// Revenue-maximising slot price subject to selling no more than the supply.
/// With no watchers the price is pinned to `B/2`.
pub fn optimal_price(stats: &AdMarketStats, params: &MarketParams) -> f64 {
    let b = params.effectiveness;
    if stats.is_empty() {
        return 0.5 * b;
    }
    let sell_out = b - 2.0 * params.wear_out * stats.ey2 / (params.advertisers * stats.ey);
    sell_out.max(0.5 * b)
}

/// Price and ad revenue `K m* p*` for one slot class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSale {
    pub stats: AdMarketStats,
    pub price: f64,
    pub slots_sold: f64,
    pub revenue: f64,
}

pub fn sell(stats: AdMarketStats, params: &MarketParams) -> ClassSale {
    let price = optimal_price(&stats, params);
    let m = advertiser_best_response(&stats, params, price);
    let slots_sold = params.advertisers * m;
    ClassSale {
        stats,
        price,
        slots_sold,
        revenue: slots_sold * price,
    }
}

/// Ad-side outcome at one reward level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdSide {
    pub pooled: ClassSale,
    /// Per-class sales; populated for SURD only.
    pub split: Option<(ClassSale, ClassSale)>,
}

impl AdSide {
    pub fn revenue(&self) -> f64 {
        match &self.split {
            Some((a, b)) => a.revenue + b.revenue,
            None => self.pooled.revenue,
        }
    }
}

/// Ad-side outcome for an already computed response profile.
pub fn ad_side(params: &MarketParams, profile: &ResponseProfile, scheme: Scheme) -> Result<AdSide> {
    let pooled = sell(profile_stats(params, profile, SlotClass::All)?, params);
    let split = if scheme == Scheme::Surd {
        Some((
            sell(profile_stats(params, profile, SlotClass::Subscribers)?, params),
            sell(profile_stats(params, profile, SlotClass::NonSubscribers)?, params),
        ))
    } else {
        None
    };
    Ok(AdSide { pooled, split })
}

/// Ad revenue at `ω` under the optimal price(s).
pub fn ad_revenue(params: &MarketParams, omega: f64, scheme: Scheme) -> Result<f64> {
    let profile = ResponseProfile::new(params, omega, scheme)?;
    Ok(ad_side(params, &profile, scheme)?.revenue())
}

/// Revenue from `views` impressions sold at a cost per thousand of `cpm`.
pub fn cpm_revenue(views: f64, cpm: f64) -> f64 {
    views / 1000.0 * cpm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TypeDistribution, Utility};

    fn params() -> MarketParams {
        MarketParams {
            users: 1e7,
            fee: 30.0,
            quota: 0.8,
            ad_cost: 0.3,
            advertisers: 23.0,
            wear_out: 0.6,
            effectiveness: 5.0,
            capacity: 1.24e7,
            utility: Utility::Logarithmic,
            dist: TypeDistribution::uniform(155.0).unwrap(),
        }
    }

    fn stats(n_ad: f64, ey: f64, ey2: f64) -> AdMarketStats {
        AdMarketStats {
            n_ad,
            ey,
            ey2,
            class: SlotClass::All,
        }
    }

    #[test]
    fn no_margin_no_purchase() {
        let s = stats(1e6, 3.0, 12.0);
        assert_eq!(advertiser_best_response(&s, &params(), 5.0), 0.0);
        assert_eq!(advertiser_best_response(&s, &params(), 7.0), 0.0);
        assert_eq!(advertiser_best_response(&AdMarketStats::zero(SlotClass::All), &params(), 1.0), 0.0);
    }

    #[test]
    fn higher_variance_lowers_demand() {
        let p = params();
        let a = advertiser_best_response(&stats(1e6, 3.0, 12.0), &p, 2.0);
        let b = advertiser_best_response(&stats(1e6, 3.0, 15.0), &p, 2.0);
        assert!(b < a);
    }

    #[test]
    fn case_a_has_no_watchers() {
        let s = ad_stats(&params(), 0.001, Scheme::Sar, SlotClass::All).unwrap();
        assert_eq!(s, AdMarketStats::zero(SlotClass::All));
        assert_eq!(ad_revenue(&params(), 0.001, Scheme::Sar).unwrap(), 0.0);
    }

    #[test]
    fn sell_out_branch_clears_supply() {
        let mut p = params();
        p.wear_out = 0.01;
        let s = stats(1e6, 3.0, 12.0);
        let price = optimal_price(&s, &p);
        assert!(price > 0.5 * p.effectiveness);
        let sold = p.advertisers * advertiser_best_response(&s, &p, price);
        assert!((sold - s.supply()).abs() <= 1e-9 * s.supply());
    }

    #[test]
    fn heavy_wear_out_prices_at_half_b() {
        let mut p = params();
        p.wear_out = p.effectiveness * p.advertisers * 3.0 / (4.0 * 12.0);
        assert_eq!(optimal_price(&stats(1e6, 3.0, 12.0), &p), 2.5);
    }

    #[test]
    fn tiny_wear_out_prices_near_b() {
        let mut p = params();
        p.wear_out = 1e-9;
        assert!((optimal_price(&stats(1e6, 3.0, 12.0), &p) - 5.0).abs() < 1e-8);
    }

    #[test]
    fn cpm_example() {
        assert!((cpm_revenue(1200.0, 8.2) - 9.84).abs() < 1e-12);
    }

    #[test]
    fn payoff_peaks_at_best_response() {
        let p = params();
        let s = stats(2e6, 4.0, 20.0);
        let m = advertiser_best_response(&s, &p, 3.0);
        let best = advertiser_payoff(&s, &p, m, 3.0);
        assert!(advertiser_payoff(&s, &p, 1.001 * m, 3.0) < best);
        assert!(advertiser_payoff(&s, &p, 0.999 * m, 3.0) < best);
    }
}
