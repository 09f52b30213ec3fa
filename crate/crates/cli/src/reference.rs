//! Published reference values for the bundled datasets and the tolerance
//! checks the `scenario` command reports against them.

use serde::{Deserialize, Serialize};

/// Reference parameters for the airline dataset, `(a, b, gamma0, gamma1, sigma_mu)`.
pub const AIRLINE_PARAMS: [f64; 5] = [-6.086, 0.01094, 1.220, 0.039, 3.005];
/// Reference standard errors in the same order.
pub const AIRLINE_STD_ERRORS: [f64; 5] = [1.077, 0.00169, 0.804, 0.243, 0.877];

/// Fitted airline shares in percent: `(market, s1, s2)`.
pub const AIRLINE_FIT: [(&str, f64, f64); 5] = [
    ("control", 1.08, 4.47),
    ("yes30", 1.46, 4.33),
    ("yes60", 1.95, 4.16),
    ("no30", 1.30, 5.34),
    ("no60", 1.56, 6.34),
];

/// One pricing row: prices, shares in percent, revenue, consumer and social welfare.
#[derive(Clone, Copy, Debug)]
pub struct PolicyRow {
    pub p1: f64,
    pub p2: f64,
    pub share1_pct: f64,
    pub share2_pct: f64,
    pub revenue: f64,
    pub consumer_welfare: f64,
    pub social_welfare: f64,
}

pub const AIRLINE_DATA_ROW: PolicyRow = PolicyRow {
    p1: 100.0,
    p2: 100.0,
    share1_pct: 1.08,
    share2_pct: 4.47,
    revenue: 5.55,
    consumer_welfare: 7.94,
    social_welfare: 13.49,
};
pub const AIRLINE_OPTIMAL: PolicyRow = PolicyRow {
    p1: 151.9,
    p2: 155.0,
    share1_pct: 0.78,
    share2_pct: 3.16,
    revenue: 6.09,
    consumer_welfare: 5.38,
    social_welfare: 11.47,
};
pub const AIRLINE_CONSTANT: PolicyRow = PolicyRow {
    p1: 154.0,
    p2: 154.0,
    share1_pct: 0.76,
    share2_pct: 3.19,
    revenue: 6.098,
    consumer_welfare: 5.391,
    social_welfare: 11.489,
};

/// Reference values for a synthetic scenario.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioReference {
    /// `(gamma0, sigma_mu, gamma1)`.
    pub estimates: [f64; 3],
    pub constant: PolicyRow,
    pub optimal: PolicyRow,
    /// Changes of the optimal row against the constant row, percent.
    pub revenue_change_pct: f64,
    pub consumer_welfare_change_pct: f64,
    pub social_welfare_change_pct: f64,
    /// Tolerances in percentage points for the three changes; `None` reports only.
    pub change_tolerances_pp: [Option<f64>; 3],
}

pub const SCENARIO1: ScenarioReference = ScenarioReference {
    estimates: [4.26, 5.0, 0.6],
    constant: PolicyRow {
        p1: 74.0,
        p2: 74.0,
        share1_pct: 2.13,
        share2_pct: 78.02,
        revenue: 59.36,
        consumer_welfare: 25.75,
        social_welfare: 85.10,
    },
    optimal: PolicyRow {
        p1: 64.7,
        p2: 78.0,
        share1_pct: 32.74,
        share2_pct: 51.82,
        revenue: 61.71,
        consumer_welfare: 24.14,
        social_welfare: 85.85,
    },
    revenue_change_pct: 4.0,
    consumer_welfare_change_pct: -6.3,
    social_welfare_change_pct: 0.9,
    change_tolerances_pp: [Some(1.0), Some(1.0), Some(0.5)],
};

pub const SCENARIO2: ScenarioReference = ScenarioReference {
    estimates: [5.2, 4.6, -0.73],
    constant: PolicyRow {
        p1: 87.0,
        p2: 87.0,
        share1_pct: 8.58,
        share2_pct: 87.24,
        revenue: 83.43,
        consumer_welfare: 13.26,
        social_welfare: 96.69,
    },
    optimal: PolicyRow {
        p1: 92.22,
        p2: 87.0,
        share1_pct: 3.62,
        share2_pct: 92.21,
        revenue: 83.61,
        consumer_welfare: 12.96,
        social_welfare: 96.57,
    },
    revenue_change_pct: 0.2,
    consumer_welfare_change_pct: -2.3,
    social_welfare_change_pct: -0.1,
    change_tolerances_pp: [Some(0.2), None, None],
};

/// Range the airline differential response rates should fall in.
pub const AIRLINE_PHI_RANGE: (f64, f64) = (0.9, 1.2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Tolerance {
    /// Within `pct` percent of the reference.
    Relative { pct: f64 },
    /// Within `abs` of the reference, in the quantity's own units.
    Absolute { abs: f64 },
    /// Inside `[lo, hi]`; the reference is not used.
    Range { lo: f64, hi: f64 },
    /// Equal to the reference.
    Match,
    /// Shown side by side without a verdict.
    Info,
}

impl Tolerance {
    pub fn describe(&self) -> String {
        match *self {
            Tolerance::Relative { pct } => format!("±{pct}%"),
            Tolerance::Absolute { abs } => format!("±{abs}"),
            Tolerance::Range { lo, hi } => format!("in [{lo}, {hi}]"),
            Tolerance::Match => "match".into(),
            Tolerance::Info => "info".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub quantity: String,
    pub reference: CheckValue,
    pub computed: CheckValue,
    pub tolerance: Tolerance,
    /// `None` for information-only rows.
    pub pass: Option<bool>,
}

impl Check {
    pub fn number(quantity: impl Into<String>, reference: f64, computed: f64, tolerance: Tolerance) -> Self {
        let pass = match tolerance {
            Tolerance::Relative { pct } => Some((computed - reference).abs() <= pct / 100.0 * reference.abs()),
            Tolerance::Absolute { abs } => Some((computed - reference).abs() <= abs),
            Tolerance::Range { lo, hi } => Some((lo..=hi).contains(&computed)),
            Tolerance::Match => Some(computed == reference),
            Tolerance::Info => None,
        };
        Check {
            quantity: quantity.into(),
            reference: CheckValue::Number(reference),
            computed: CheckValue::Number(computed),
            tolerance,
            pass,
        }
    }

    pub fn text(quantity: impl Into<String>, reference: &str, computed: &str) -> Self {
        Check {
            quantity: quantity.into(),
            reference: CheckValue::Text(reference.into()),
            computed: CheckValue::Text(computed.into()),
            tolerance: Tolerance::Match,
            pass: Some(reference == computed),
        }
    }
}
