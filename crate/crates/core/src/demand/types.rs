use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two product versions. `Two` is the on-average-superior version.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Version {
    One,
    Two,
}

impl Version {
    pub fn other(self) -> Version {
        match self {
            Version::One => Version::Two,
            Version::Two => Version::One,
        }
    }

    /// Zero-based index, `One -> 0`, `Two -> 1`.
    pub fn index(self) -> usize {
        match self {
            Version::One => 0,
            Version::Two => 1,
        }
    }

    /// The 1-based label used in data files.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Result<Version> {
        match label {
            1 => Ok(Version::One),
            2 => Ok(Version::Two),
            other => Err(Error::invalid(format!("version must be 1 or 2, got {other}"))),
        }
    }

    pub const BOTH: [Version; 2] = [Version::One, Version::Two];
}

/// Structural parameters of the two-version demand model.
///
/// Utility of version `k` for a consumer with baseline shift `mu` is
/// `a - b * p_k + mu + 1{k = 2} * (gamma0 + gamma1 * mu) + eps_k`. The price
/// coefficient `b` is stored positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub sigma_mu: f64,
    /// Marginal costs `(c1, c2)`.
    #[serde(default)]
    pub costs: [f64; 2],
}

impl ModelParams {
    pub fn new(a: f64, b: f64, gamma0: f64, gamma1: f64, sigma_mu: f64) -> Result<Self> {
        let params = ModelParams { a, b, gamma0, gamma1, sigma_mu, costs: [0.0, 0.0] };
        params.validate()?;
        Ok(params)
    }

    pub fn with_costs(mut self, c1: f64, c2: f64) -> Result<Self> {
        self.costs = [c1, c2];
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("sigma_mu", self.sigma_mu),
            ("c1", self.costs[0]),
            ("c2", self.costs[1]),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("parameter {name} is not finite ({v})")));
        }
        if self.b <= 0.0 {
            return Err(Error::invalid(format!("price sensitivity b must be positive, got {}", self.b)));
        }
        if self.sigma_mu < 0.0 {
            return Err(Error::invalid(format!("sigma_mu must be non-negative, got {}", self.sigma_mu)));
        }
        if self.costs.iter().any(|c| *c < 0.0) {
            return Err(Error::invalid(format!("marginal costs must be non-negative, got {:?}", self.costs)));
        }
        Ok(())
    }

    pub fn cost(&self, k: Version) -> f64 {
        self.costs[k.index()]
    }

    pub fn has_costs(&self) -> bool {
        self.costs != [0.0, 0.0]
    }

    /// Mean utility of version `k` at price `p` for baseline shift `mu`, before the logit error.
    pub fn utility(&self, k: Version, price: f64, mu: f64) -> f64 {
        let base = self.a - self.b * price + mu;
        match k {
            Version::One => base,
            Version::Two => base + self.gamma0 + self.gamma1 * mu,
        }
    }
}

/// Prices of the two versions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    pub p1: f64,
    pub p2: f64,
}

impl PriceVector {
    pub fn new(p1: f64, p2: f64) -> Self {
        PriceVector { p1, p2 }
    }

    pub fn uniform(p: f64) -> Self {
        PriceVector { p1: p, p2: p }
    }

    pub fn get(&self, k: Version) -> f64 {
        match k {
            Version::One => self.p1,
            Version::Two => self.p2,
        }
    }

    pub fn with(mut self, k: Version, price: f64) -> Self {
        match k {
            Version::One => self.p1 = price,
            Version::Two => self.p2 = price,
        }
        self
    }

    /// Both prices moved by the same absolute amount.
    pub fn shifted(&self, r: f64) -> Self {
        PriceVector { p1: self.p1 + r, p2: self.p2 + r }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p1.is_finite() && self.p2.is_finite()) {
            return Err(Error::invalid(format!("prices must be finite, got ({}, {})", self.p1, self.p2)));
        }
        Ok(())
    }
}

/// Shares of a unit-mass market: the two inside options and the outside option.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareVector {
    pub s1: f64,
    pub s2: f64,
    pub s0: f64,
}

impl ShareVector {
    /// Builds a share vector from the two inside shares; the outside share is the remainder.
    pub fn from_inside(s1: f64, s2: f64) -> Result<Self> {
        let shares = ShareVector { s1, s2, s0: 1.0 - s1 - s2 };
        shares.validate()?;
        Ok(shares)
    }

    pub fn get(&self, k: Version) -> f64 {
        match k {
            Version::One => self.s1,
            Version::Two => self.s2,
        }
    }

    pub fn inside(&self) -> f64 {
        self.s1 + self.s2
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s1", self.s1), ("s2", self.s2), ("s0", self.s0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("share {name} = {v} outside [0, 1]")));
            }
        }
        let total = self.s1 + self.s2 + self.s0;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("shares sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Revenue, profit and welfare for one pricing policy, per unit market mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    /// `sum_k p_k * s_k`.
    pub revenue: f64,
    /// `sum_k (p_k - c_k) * s_k`.
    pub profit: f64,
    /// Expected logit surplus in price units.
    pub consumer_surplus: f64,
    /// `profit + consumer_surplus`.
    pub social_welfare: f64,
}
