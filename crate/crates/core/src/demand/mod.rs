//! Random-coefficient logit demand for two versions of a product.
//!
//! Conditional on the baseline shift `mu`, choice among {version 1, version 2,
//! outside} is multinomial logit. Market-level quantities integrate the
//! conditional ones against a [`MuQuadrature`].

mod quadrature;
mod types;

pub use quadrature::{make_quadrature, MuDistribution, MuQuadrature, DEFAULT_NODES};
pub use types::{ModelParams, PriceVector, ShareVector, Version, WelfareReport};

use crate::error::{Error, Result};

/// Logit choice probabilities for inside utilities `(v1, v2)` against an outside
/// option of zero, together with the log-sum `ln(1 + e^v1 + e^v2)`.
#[inline]
pub(crate) fn logit3(v1: f64, v2: f64) -> (f64, f64, f64, f64) {
    let m = v1.max(v2).max(0.0);
    let e0 = (-m).exp();
    let e1 = (v1 - m).exp();
    let e2 = (v2 - m).exp();
    let den = e0 + e1 + e2;
    (e1 / den, e2 / den, e0 / den, m + den.ln())
}

fn check_inputs(params: &ModelParams, prices: &PriceVector) -> Result<()> {
    params.validate()?;
    prices.validate()
}

/// Shares among consumers who all have baseline shift `mu`.
pub fn conditional_shares(params: &ModelParams, prices: &PriceVector, mu: f64) -> Result<ShareVector> {
    check_inputs(params, prices)?;
    if !mu.is_finite() {
        return Err(Error::invalid(format!("mu must be finite, got {mu}")));
    }
    Ok(conditional_unchecked(params, prices, mu))
}

#[inline]
fn conditional_unchecked(params: &ModelParams, prices: &PriceVector, mu: f64) -> ShareVector {
    let v1 = params.utility(Version::One, prices.p1, mu);
    let v2 = params.utility(Version::Two, prices.p2, mu);
    let (s1, s2, s0, _) = logit3(v1, v2);
    ShareVector { s1, s2, s0 }
}

/// Market shares integrated over the distribution of `mu`.
pub fn aggregate_shares(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> Result<ShareVector> {
    check_inputs(params, prices)?;
    quad.check_support(params.sigma_mu)?;
    Ok(aggregate_unchecked(params, prices, quad))
}

fn aggregate_unchecked(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> ShareVector {
    let (mut s1, mut s2, mut s0) = (0.0, 0.0, 0.0);
    for (mu, w) in quad.iter() {
        let c = conditional_unchecked(params, prices, mu);
        s1 += w * c.s1;
        s2 += w * c.s2;
        s0 += w * c.s0;
    }
    ShareVector { s1, s2, s0 }
}

/// Profit `sum_k (p_k - c_k) * s_k` of a unit-mass market.
pub fn profit(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> Result<f64> {
    let s = aggregate_shares(params, prices, quad)?;
    Ok((prices.p1 - params.costs[0]) * s.s1 + (prices.p2 - params.costs[1]) * s.s2)
}

/// Analytic profit gradient `(d pi / d p1, d pi / d p2)`.
///
/// Node by node the derivative with respect to `p_k` is
/// `s_k * (1 - b * m_k * (1 - s_k) + b * m_k' * s_k')` with margins `m = p - c`;
/// with zero costs the margins are the prices themselves.
pub fn profit_gradient(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> Result<[f64; 2]> {
    check_inputs(params, prices)?;
    quad.check_support(params.sigma_mu)?;
    Ok(gradient_unchecked(params, prices, quad))
}

pub(crate) fn gradient_unchecked(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> [f64; 2] {
    let m1 = prices.p1 - params.costs[0];
    let m2 = prices.p2 - params.costs[1];
    let b = params.b;
    let (mut g1, mut g2) = (0.0, 0.0);
    for (mu, w) in quad.iter() {
        let c = conditional_unchecked(params, prices, mu);
        g1 += w * c.s1 * (1.0 - b * m1 * (1.0 - c.s1) + b * m2 * c.s2);
        g2 += w * c.s2 * (1.0 - b * m2 * (1.0 - c.s2) + b * m1 * c.s1);
    }
    [g1, g2]
}

pub(crate) fn profit_unchecked(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> f64 {
    let s = aggregate_unchecked(params, prices, quad);
    (prices.p1 - params.costs[0]) * s.s1 + (prices.p2 - params.costs[1]) * s.s2
}

/// Revenue, profit, expected logit consumer surplus and their sum.
pub fn welfare(params: &ModelParams, prices: &PriceVector, quad: &MuQuadrature) -> Result<WelfareReport> {
    check_inputs(params, prices)?;
    quad.check_support(params.sigma_mu)?;
    let (mut s1, mut s2, mut logsum) = (0.0, 0.0, 0.0);
    for (mu, w) in quad.iter() {
        let v1 = params.utility(Version::One, prices.p1, mu);
        let v2 = params.utility(Version::Two, prices.p2, mu);
        let (c1, c2, _, ls) = logit3(v1, v2);
        s1 += w * c1;
        s2 += w * c2;
        logsum += w * ls;
    }
    let revenue = prices.p1 * s1 + prices.p2 * s2;
    let profit = (prices.p1 - params.costs[0]) * s1 + (prices.p2 - params.costs[1]) * s2;
    let consumer_surplus = logsum / params.b;
    Ok(WelfareReport { revenue, profit, consumer_surplus, social_welfare: profit + consumer_surplus })
}
