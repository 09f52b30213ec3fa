//! Vertical-only benchmark: no logit errors, uniform `mu` on `[-sigma, sigma]`.
//!
//! Consumers buy the option with the highest deterministic utility (ties go
//! to version 2, then version 1, then the outside option). Demand is piecewise
//! linear in prices, so the optimal price pair has a closed form that a grid
//! search can check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{ModelParams, PriceVector, ShareVector, Version};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Discriminate,
    Uniform,
}

/// Optimal price pair in the vertical-only model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalPolicy {
    pub discriminates: bool,
    pub p1_star: f64,
    pub p2_star: f64,
    pub regime: Regime,
    /// False when nobody buys version 1 at the policy prices.
    pub version1_sold: bool,
}

/// Optimal prices and demand volumes when each version is sold on its own.
///
/// Volumes are lengths of the buying interval of `mu` (divide by `2 sigma` for shares).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoldAloneStats {
    pub p1_alone: f64,
    pub p2_alone: f64,
    pub d1_alone: f64,
    pub d2_alone: f64,
}

/// Checks `gamma0 >= 0` and `|gamma1| <= gamma0 / sigma`, i.e. every consumer weakly
/// prefers version 2 at equal prices.
pub fn check_vertical(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.gamma0 < 0.0 {
        return Err(Error::Domain(format!("gamma0 >= 0 required, got {}", params.gamma0)));
    }
    let spread = params.gamma1.abs() * params.sigma_mu;
    if spread > params.gamma0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "vertical-only condition |gamma1| <= gamma0 / sigma_mu violated: |{}| * {} > {}",
            params.gamma1, params.sigma_mu, params.gamma0
        )));
    }
    Ok(())
}

/// Single price for both versions: everyone who buys takes version 2.
pub fn uniform_closed_form_price(params: &ModelParams) -> f64 {
    (params.sigma_mu * (1.0 + params.gamma1) + params.gamma0 + params.a) / (2.0 * params.b)
}

/// Closed-form optimal mechanism with zero costs.
///
/// Discrimination is optimal iff `gamma1 > 0` and `gamma0 / gamma1 < a < 3 sigma`
/// (boundaries count as uniform). Then `p1* = (a + sigma) / (2b)` and the upgrade
/// premium is the monopoly price of the upgrade valuation
/// `gamma0 + gamma1 * mu ~ U[gamma0 - gamma1 sigma, gamma0 + gamma1 sigma]`,
/// namely `(gamma0 + gamma1 * sigma) / (2b)`.
pub fn closed_form_optimal(params: &ModelParams) -> Result<VerticalPolicy> {
    check_vertical(params)?;
    let ModelParams { a, b, gamma0, gamma1, sigma_mu: sigma, .. } = *params;
    let discriminates = gamma1 > 0.0 && gamma0 / gamma1 < a && a < 3.0 * sigma;
    let (p1, p2) = if discriminates {
        let p1 = (a + sigma) / (2.0 * b);
        (p1, p1 + (gamma0 + gamma1 * sigma) / (2.0 * b))
    } else {
        let p = uniform_closed_form_price(params);
        (p, p)
    };
    let prices = PriceVector::new(p1, p2);
    let version1_sold = vertical_demand(params, &prices)?.s1 > 0.0;
    Ok(VerticalPolicy {
        discriminates,
        p1_star: p1,
        p2_star: p2,
        regime: if discriminates { Regime::Discriminate } else { Regime::Uniform },
        version1_sold,
    })
}

/// Upgrade premium in the ratio form
/// `(gamma0 / gamma1 + sigma) / (2b)`. It agrees with [`closed_form_optimal`] only at
/// `gamma1 = 1`; kept for comparison in tests and reports.
pub fn ratio_form_upgrade_premium(params: &ModelParams) -> f64 {
    (params.gamma0 / params.gamma1 + params.sigma_mu) / (2.0 * params.b)
}

/// `{mu : slope * mu >= offset}` as an interval of the extended real line.
fn half_line(slope: f64, offset: f64) -> (f64, f64) {
    if slope > 0.0 {
        (offset / slope, f64::INFINITY)
    } else if slope < 0.0 {
        (f64::NEG_INFINITY, offset / slope)
    } else if offset <= 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    }
}

fn overlap(intervals: &[(f64, f64)]) -> f64 {
    let lo = intervals.iter().map(|i| i.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = intervals.iter().map(|i| i.1).fold(f64::INFINITY, f64::min);
    (hi - lo).max(0.0)
}

/// Exact shares under deterministic utility maximization.
pub fn vertical_demand(params: &ModelParams, prices: &PriceVector) -> Result<ShareVector> {
    check_vertical(params)?;
    prices.validate()?;
    Ok(vertical_demand_unchecked(params, prices))
}

fn vertical_demand_unchecked(params: &ModelParams, prices: &PriceVector) -> ShareVector {
    let ModelParams { a, b, gamma0, gamma1, sigma_mu: sigma, .. } = *params;
    if sigma == 0.0 {
        let u1 = params.utility(Version::One, prices.p1, 0.0);
        let u2 = params.utility(Version::Two, prices.p2, 0.0);
        let (s1, s2) = if u2 >= u1 && u2 >= 0.0 {
            (0.0, 1.0)
        } else if u1 >= 0.0 {
            (1.0, 0.0)
        } else {
            (0.0, 0.0)
        };
        return ShareVector { s1, s2, s0: 1.0 - s1 - s2 };
    }
    let support = (-sigma, sigma);
    // u2 - u1 = gamma0 + gamma1 mu - b (p2 - p1)
    let prefers_two = half_line(gamma1, b * (prices.p2 - prices.p1) - gamma0);
    let prefers_one = half_line(-gamma1, gamma0 - b * (prices.p2 - prices.p1));
    // u2 >= 0  <=>  (1 + gamma1) mu >= b p2 - a - gamma0
    let buys_two = half_line(1.0 + gamma1, b * prices.p2 - a - gamma0);
    // u1 >= 0  <=>  mu >= b p1 - a
    let buys_one = half_line(1.0, b * prices.p1 - a);
    let width = 2.0 * sigma;
    let s2 = overlap(&[support, prefers_two, buys_two]) / width;
    let s1 = overlap(&[support, prefers_one, buys_one]) / width;
    ShareVector { s1, s2, s0: (1.0 - s1 - s2).max(0.0) }
}

pub fn vertical_profit(params: &ModelParams, prices: &PriceVector) -> Result<f64> {
    let s = vertical_demand(params, prices)?;
    Ok(margin_profit(params, prices, &s))
}

fn margin_profit(params: &ModelParams, prices: &PriceVector, s: &ShareVector) -> f64 {
    (prices.p1 - params.costs[0]) * s.s1 + (prices.p2 - params.costs[1]) * s.s2
}

/// Optimal prices and buying-interval lengths when only one version is offered.
pub fn sold_alone(params: &ModelParams) -> Result<SoldAloneStats> {
    check_vertical(params)?;
    let ModelParams { a, b, gamma0, gamma1, sigma_mu: sigma, .. } = *params;
    if (1.0 + gamma1).abs() < 1e-12 {
        return Err(Error::Singular("1 + gamma1 = 0: version 2 valuation does not vary with mu".into()));
    }
    let top2 = sigma * (1.0 + gamma1) + gamma0 + a;
    Ok(SoldAloneStats {
        p1_alone: (sigma + a) / (2.0 * b),
        p2_alone: top2 / (2.0 * b),
        d1_alone: (sigma + a) / 2.0,
        d2_alone: top2 / (2.0 * (1.0 + gamma1)),
    })
}

/// Price grid for the exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub p1_max: f64,
    pub p2_max: f64,
    /// Points per axis, including both end points `0` and `p_max`.
    pub points: usize,
}

impl GridSpec {
    /// 400 x 400 points on `[0, 2 * uniform closed-form price]` in each dimension.
    pub fn default_for(params: &ModelParams) -> Self {
        let top = 2.0 * uniform_closed_form_price(params).max(f64::MIN_POSITIVE);
        GridSpec { p1_max: top, p2_max: top, points: 400 }
    }

    pub fn step1(&self) -> f64 {
        self.p1_max / (self.points - 1) as f64
    }

    pub fn step2(&self) -> f64 {
        self.p2_max / (self.points - 1) as f64
    }

    fn price(&self, i: usize, j: usize) -> PriceVector {
        PriceVector::new(i as f64 * self.step1(), j as f64 * self.step2())
    }
}

/// Result of the exhaustive grid search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptimum {
    /// Grid argmax, classified as discriminating when the unconstrained grid
    /// optimum beats the best diagonal point by more than `slack`.
    pub policy: VerticalPolicy,
    pub profit: f64,
    /// Best profit on the diagonal `p1 = p2` and the price attaining it.
    pub uniform_profit: f64,
    pub uniform_price: f64,
    /// Largest profit change between the argmax and its grid neighbours.
    pub slack: f64,
}

/// Exhaustive search of `(p1, p2)` on a regular grid.
pub fn brute_force_prices(params: &ModelParams, grid: &GridSpec) -> Result<GridOptimum> {
    check_vertical(params)?;
    if grid.points < 2 || !(grid.p1_max > 0.0 && grid.p2_max > 0.0) {
        return Err(Error::invalid("price grid is empty".to_string()));
    }
    let n = grid.points;
    let profit_at = |i: usize, j: usize| {
        let prices = grid.price(i, j);
        margin_profit(params, &prices, &vertical_demand_unchecked(params, &prices))
    };
    // rows in parallel; ties resolve to the lowest (i, j) for determinism
    let (best, bi, bj) = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n).fold((f64::NEG_INFINITY, i, 0), |acc, j| {
                let v = profit_at(i, j);
                if v > acc.0 {
                    (v, i, j)
                } else {
                    acc
                }
            })
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x },
        );

    // diagonal only makes sense when both axes share a step
    let diag_points = (grid.p1_max.min(grid.p2_max) / grid.step1().max(grid.step2())).floor() as usize + 1;
    let step = grid.step1().max(grid.step2());
    let (uniform_profit, uniform_price) = (0..diag_points)
        .map(|i| {
            let p = i as f64 * step;
            let prices = PriceVector::uniform(p);
            (margin_profit(params, &prices, &vertical_demand_unchecked(params, &prices)), p)
        })
        .fold((f64::NEG_INFINITY, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });

    let mut slack: f64 = 0.0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (i, j) = (bi as i64 + di, bj as i64 + dj);
            if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                continue;
            }
            slack = slack.max((best - profit_at(i as usize, j as usize)).abs());
        }
    }

    let prices = grid.price(bi, bj);
    let discriminates = best - uniform_profit > slack;
    let policy = if discriminates {
        VerticalPolicy {
            discriminates,
            p1_star: prices.p1,
            p2_star: prices.p2,
            regime: Regime::Discriminate,
            version1_sold: vertical_demand_unchecked(params, &prices).s1 > 0.0,
        }
    } else {
        let prices = PriceVector::uniform(uniform_price);
        VerticalPolicy {
            discriminates,
            p1_star: uniform_price,
            p2_star: uniform_price,
            regime: Regime::Uniform,
            version1_sold: vertical_demand_unchecked(params, &prices).s1 > 0.0,
        }
    };
    Ok(GridOptimum { policy, profit: best, uniform_profit, uniform_price, slack })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64, g0: f64, g1: f64, s: f64) -> ModelParams {
        ModelParams::new(a, b, g0, g1, s).unwrap()
    }

    #[test]
    fn worked_discrimination_example() {
        let p = params(2.0, 1.0, 1.0, 1.0, 1.0);
        let pol = closed_form_optimal(&p).unwrap();
        assert!(pol.discriminates);
        assert!((pol.p1_star - 1.5).abs() < 1e-15);
        assert!((pol.p2_star - 2.5).abs() < 1e-15);
        assert!((ratio_form_upgrade_premium(&p) - 1.0).abs() < 1e-15);
        // at these prices: version 2 for mu in [0, 1], version 1 for mu in (-0.5, 0)
        let s = vertical_demand(&p, &PriceVector::new(1.5, 2.5)).unwrap();
        assert!((s.s2 - 0.5).abs() < 1e-15);
        assert!((s.s1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_gamma1_is_uniform() {
        let p = params(1.0, 2.0, 1.0, -0.5, 1.0);
        let pol = closed_form_optimal(&p).unwrap();
        assert_eq!(pol.regime, Regime::Uniform);
        let expected = (1.0 * 0.5 + 1.0 + 1.0) / (2.0 * 2.0);
        assert!((pol.p1_star - expected).abs() < 1e-15);
        assert_eq!(pol.p1_star, pol.p2_star);
        assert!(!pol.version1_sold);
    }

    #[test]
    fn boundaries_are_uniform() {
        // a = gamma0 / gamma1
        let p = params(1.0, 1.0, 0.5, 0.5, 1.0);
        assert_eq!(closed_form_optimal(&p).unwrap().regime, Regime::Uniform);
        // a = 3 sigma
        let p = params(3.0, 1.0, 0.5, 0.5, 1.0);
        assert_eq!(closed_form_optimal(&p).unwrap().regime, Regime::Uniform);
    }

    #[test]
    fn precondition_violations_are_named() {
        let err = closed_form_optimal(&params(1.0, 1.0, 0.2, 0.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("vertical-only")));
        let err = vertical_demand(&params(1.0, 1.0, -0.2, 0.0, 1.0), &PriceVector::uniform(1.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("gamma0")));
    }

    #[test]
    fn empty_market_at_high_prices() {
        let p = params(0.5, 1.0, 0.4, 0.2, 1.0);
        let s = vertical_demand(&p, &PriceVector::uniform(10.0)).unwrap();
        assert_eq!((s.s1, s.s2, s.s0), (0.0, 0.0, 1.0));
    }

    #[test]
    fn equal_prices_nobody_buys_version_one() {
        let p = params(0.5, 1.0, 0.4, 0.2, 1.0);
        for price in [0.0, 0.3, 0.8, 1.2] {
            let s = vertical_demand(&p, &PriceVector::uniform(price)).unwrap();
            assert_eq!(s.s1, 0.0);
        }
    }

    #[test]
    fn sold_alone_symmetric_versions() {
        let p = params(0.5, 2.0, 0.0, 0.0, 1.5);
        let s = sold_alone(&p).unwrap();
        assert_eq!(s.p1_alone, s.p2_alone);
        assert_eq!(s.d1_alone, s.d2_alone);
    }

    #[test]
    fn sold_alone_singular() {
        let p = params(0.5, 2.0, 3.0, -1.0, 1.0);
        assert!(matches!(sold_alone(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn empty_grid_rejected() {
        let p = params(0.5, 2.0, 0.4, 0.2, 1.0);
        let grid = GridSpec { p1_max: 1.0, p2_max: 1.0, points: 1 };
        assert!(brute_force_prices(&p, &grid).is_err());
    }

    #[test]
    fn single_type_market_prices_at_valuation() {
        // sigma = 0: one consumer type valuing version 2 at a + gamma0
        let p = params(1.0, 1.0, 0.5, 0.3, 0.0);
        let pol = closed_form_optimal(&p).unwrap();
        assert_eq!(pol.regime, Regime::Uniform);
        assert!((pol.p1_star - 0.75).abs() < 1e-15);
        let grid = brute_force_prices(&p, &GridSpec::default_for(&p)).unwrap();
        // with a point mass the monopolist extracts the whole valuation 1.5
        assert!((grid.uniform_price - 1.5).abs() <= GridSpec::default_for(&p).step1());
        assert!(grid.profit >= vertical_profit(&p, &PriceVector::uniform(0.75)).unwrap());
    }
}
