//! Quadrature rules for integrating over the baseline-valuation shift `mu`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the baseline-valuation shift `mu`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuDistribution {
    /// Uniform on `[-sigma_mu, sigma_mu]`, integrated with Gauss-Legendre nodes.
    #[default]
    Uniform,
    /// Mean-zero normal with standard deviation `sigma_mu`, integrated with Gauss-Hermite nodes.
    Normal,
}

impl MuDistribution {
    pub fn name(self) -> &'static str {
        match self {
            MuDistribution::Uniform => "uniform",
            MuDistribution::Normal => "normal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(MuDistribution::Uniform),
            "normal" => Ok(MuDistribution::Normal),
            other => Err(Error::invalid(format!("unknown mu distribution '{other}' (expected uniform or normal)"))),
        }
    }
}

pub const DEFAULT_NODES: usize = 101;

/// Nodes and probability weights for `E[f(mu)]`.
///
/// Weights are non-negative and sum to one. Uniform rules keep every node in
/// `[-sigma, sigma]`; normal rules spread over the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct MuQuadrature {
    dist: MuDistribution,
    sigma: f64,
    /// Nodes of the unit-scale rule, kept so the rule can be rescaled cheaply.
    unit_nodes: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss-Legendre rule on `[-sigma, sigma]` for the uniform density.
pub fn make_quadrature(sigma_mu: f64, n: usize) -> Result<MuQuadrature> {
    MuQuadrature::new(MuDistribution::Uniform, sigma_mu, n)
}

impl MuQuadrature {
    pub fn new(dist: MuDistribution, sigma: f64, n: usize) -> Result<Self> {
        if n == 0 || n % 2 == 0 {
            return Err(Error::invalid(format!("quadrature size must be a positive odd number, got {n}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma_mu must be finite and non-negative, got {sigma}")));
        }
        let (unit_nodes, weights) = match dist {
            MuDistribution::Uniform => gauss_legendre(n),
            MuDistribution::Normal => gauss_hermite_prob(n),
        };
        Ok(Self::assemble(dist, sigma, unit_nodes, weights))
    }

    fn assemble(dist: MuDistribution, sigma: f64, unit_nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        if sigma == 0.0 {
            return MuQuadrature { dist, sigma, unit_nodes, nodes: vec![0.0], weights: vec![1.0] };
        }
        let nodes = unit_nodes.iter().map(|x| sigma * x).collect();
        MuQuadrature { dist, sigma, unit_nodes, nodes, weights }
    }

    /// Same rule for a different scale `sigma`.
    pub fn rescaled(&self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma_mu must be finite and non-negative, got {sigma}")));
        }
        let weights = if self.sigma == 0.0 {
            // the collapsed rule lost its weights; rebuild them
            match self.dist {
                MuDistribution::Uniform => gauss_legendre(self.unit_nodes.len()).1,
                MuDistribution::Normal => gauss_hermite_prob(self.unit_nodes.len()).1,
            }
        } else {
            self.weights.clone()
        };
        Ok(Self::assemble(self.dist, sigma, self.unit_nodes.clone(), weights))
    }

    pub fn dist(&self) -> MuDistribution {
        self.dist
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of nodes in the underlying rule (1 when collapsed at `sigma = 0`).
    pub fn rule_size(&self) -> usize {
        self.unit_nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Errors unless the rule was built for this `sigma_mu`.
    pub fn check_support(&self, sigma_mu: f64) -> Result<()> {
        if (self.sigma - sigma_mu).abs() > 1e-12 * sigma_mu.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "quadrature built for sigma_mu = {} used with sigma_mu = {}",
                self.sigma, sigma_mu
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes on `[-1, 1]` with weights normalized to probabilities.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Hermite rule for the standard normal density (Golub-Welsch).
fn gauss_hermite_prob(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // symmetrize to kill round-off asymmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}
