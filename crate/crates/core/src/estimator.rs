//! Nested fixed point estimation of the two-version model from market-level
//! shares.
//!
//! For given heterogeneity parameters `(sigma_mu, gamma1)` the mean utilities
//! `delta` that rationalize the observed shares are recovered market by market,
//! then regressed on `[1, -price, version-2 dummy]`. The outer loop minimizes
//! the sum of squared residuals over `(sigma_mu, gamma1)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{logit3, ModelParams, MuDistribution, MuQuadrature, Version, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::experiment::multinomial3;
use crate::optim::{latin_hypercube, nelder_mead, SimplexOptions};

/// One row of share data: a version's price and share in a market.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketObservation {
    pub market_id: String,
    pub version: Version,
    pub price: f64,
    pub share: f64,
    pub count: Option<u64>,
}

/// Both versions of one market, in the order they appear in the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub id: String,
    pub prices: [f64; 2],
    pub shares: [f64; 2],
    pub count: Option<u64>,
}

impl Market {
    pub fn outside_share(&self) -> f64 {
        1.0 - self.shares[0] - self.shares[1]
    }
}

/// Groups observations into markets. Every market needs both versions with
/// shares in `(0, 1)` and a positive outside share.
pub fn group_markets(data: &[MarketObservation]) -> Result<Vec<Market>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, [Option<&MarketObservation>; 2]> = BTreeMap::new();
    for obs in data {
        if !obs.price.is_finite() {
            return Err(Error::invalid(format!("market {}: price is not finite", obs.market_id)));
        }
        if !(obs.share > 0.0 && obs.share < 1.0) {
            return Err(Error::invalid(format!(
                "market {} version {}: share {} outside (0, 1)",
                obs.market_id,
                obs.version.label(),
                obs.share
            )));
        }
        let slot = rows.entry(obs.market_id.clone()).or_insert_with(|| {
            order.push(obs.market_id.clone());
            [None, None]
        });
        if slot[obs.version.index()].replace(obs).is_some() {
            return Err(Error::invalid(format!(
                "market {} has two rows for version {}",
                obs.market_id,
                obs.version.label()
            )));
        }
    }
    order
        .into_iter()
        .map(|id| {
            let [Some(r1), Some(r2)] = rows[&id] else {
                return Err(Error::invalid(format!("market {id} lacks one of the two versions")));
            };
            let count = match (r1.count, r2.count) {
                (Some(a), Some(b)) if a != b => {
                    return Err(Error::invalid(format!("market {id}: counts differ across versions ({a} vs {b})")))
                }
                (a, b) => a.or(b),
            };
            let market = Market { id, prices: [r1.price, r2.price], shares: [r1.share, r2.share], count };
            if market.outside_share() <= 0.0 {
                return Err(Error::invalid(format!("market {}: inside shares sum to at least 1", market.id)));
            }
            Ok(market)
        })
        .collect()
}

/// Mean utilities `delta[m][k]` per market and version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanUtilities {
    pub delta: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionMethod {
    /// Plain fixed-point iteration `delta <- delta + ln s_obs - ln s_pred`.
    Contraction,
    /// Fixed-point iteration safeguarded Newton steps on the same residual.
    #[default]
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    /// Sup-norm tolerance on `ln s_obs - ln s_pred`.
    pub contraction_tol: f64,
    pub contraction_max_iter: usize,
    pub inversion: InversionMethod,
    pub outer_starts: usize,
    pub sigma_bounds: (f64, f64),
    pub gamma1_bounds: (f64, f64),
    /// Simplex stopping tolerance on `(sigma_mu, gamma1)`.
    pub outer_xtol: f64,
    pub outer_max_iter: usize,
    pub quad_nodes: usize,
    pub mu_dist: MuDistribution,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            contraction_tol: 1e-13,
            contraction_max_iter: 5000,
            inversion: InversionMethod::Hybrid,
            outer_starts: 16,
            sigma_bounds: (0.0, 20.0),
            gamma1_bounds: (-5.0, 5.0),
            outer_xtol: 1e-9,
            outer_max_iter: 2000,
            quad_nodes: DEFAULT_NODES,
            mu_dist: MuDistribution::Uniform,
            seed: 0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contraction_tol > 0.0 && self.contraction_tol.is_finite()) {
            return Err(Error::invalid(format!("contraction_tol must be positive, got {}", self.contraction_tol)));
        }
        if self.contraction_max_iter == 0 || self.outer_starts == 0 || self.outer_max_iter == 0 {
            return Err(Error::invalid("iteration caps and outer_starts must be positive".to_string()));
        }
        let (slo, shi) = self.sigma_bounds;
        let (glo, ghi) = self.gamma1_bounds;
        if !(slo >= 0.0 && slo <= shi && shi.is_finite()) {
            return Err(Error::invalid(format!("sigma bounds must satisfy 0 <= lo <= hi, got {:?}", self.sigma_bounds)));
        }
        if !(glo <= ghi && glo.is_finite() && ghi.is_finite()) {
            return Err(Error::invalid(format!("gamma1 bounds must satisfy lo <= hi, got {:?}", self.gamma1_bounds)));
        }
        if !(self.outer_xtol > 0.0) {
            return Err(Error::invalid("outer_xtol must be positive".to_string()));
        }
        MuQuadrature::new(self.mu_dist, 1.0, self.quad_nodes).map(|_| ())
    }

    pub fn quadrature(&self) -> Result<MuQuadrature> {
        MuQuadrature::new(self.mu_dist, 1.0, self.quad_nodes)
    }
}

/// Shares and their Jacobian with respect to `delta` for one market.
fn market_shares(delta: [f64; 2], gamma1: f64, quad: &MuQuadrature) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut s = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for (mu, w) in quad.iter() {
        let (c1, c2, _, _) = logit3(delta[0] + mu, delta[1] + mu * (1.0 + gamma1));
        s[0] += w * c1;
        s[1] += w * c2;
        jac[0][0] += w * c1 * (1.0 - c1);
        jac[1][1] += w * c2 * (1.0 - c2);
        jac[0][1] -= w * c1 * c2;
    }
    jac[1][0] = jac[0][1];
    (s, jac)
}

/// Model shares implied by mean utilities and heterogeneity parameters.
///
/// `quad` may be built for any scale; it is rescaled to `sigma_mu`.
pub fn predict_shares(delta: &MeanUtilities, sigma_mu: f64, gamma1: f64, quad: &MuQuadrature) -> Result<Vec<[f64; 2]>> {
    if !gamma1.is_finite() {
        return Err(Error::invalid(format!("gamma1 must be finite, got {gamma1}")));
    }
    if delta.delta.iter().flatten().any(|d| !d.is_finite()) {
        return Err(Error::invalid("mean utilities must be finite".to_string()));
    }
    let quad = quad.rescaled(sigma_mu)?;
    Ok(delta.delta.iter().map(|d| market_shares(*d, gamma1, &quad).0).collect())
}

/// Inversion output with per-market iteration counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Inversion {
    pub delta: MeanUtilities,
    pub iterations: Vec<usize>,
    /// Final sup-norm residual per market.
    pub residuals: Vec<f64>,
}

fn residual(ln_obs: [f64; 2], s: [f64; 2]) -> ([f64; 2], f64) {
    let r = [ln_obs[0] - s[0].ln(), ln_obs[1] - s[1].ln()];
    let norm = r[0].abs().max(r[1].abs());
    (r, if norm.is_nan() { f64::INFINITY } else { norm })
}

/// Solves one market; `trace` receives the sup-norm residual of every iterate.
fn invert_market(
    obs: [f64; 2],
    gamma1: f64,
    quad: &MuQuadrature,
    config: &EstimationConfig,
    mut trace: impl FnMut(f64),
) -> Result<([f64; 2], usize, f64)> {
    let s0 = 1.0 - obs[0] - obs[1];
    let ln_obs = [obs[0].ln(), obs[1].ln()];
    let mut delta = [ln_obs[0] - s0.ln(), ln_obs[1] - s0.ln()];
    let (mut s, mut jac) = market_shares(delta, gamma1, quad);
    let (mut r, mut norm) = residual(ln_obs, s);
    trace(norm);
    for it in 0..config.contraction_max_iter {
        if norm <= config.contraction_tol {
            return Ok((delta, it, norm));
        }
        let contraction = [delta[0] + r[0], delta[1] + r[1]];
        let mut next = contraction;
        if config.inversion == InversionMethod::Hybrid {
            // Newton on ln s(delta) = ln s_obs: J_ln = diag(1/s) * ds/ddelta
            let m = [
                [jac[0][0] / s[0], jac[0][1] / s[0]],
                [jac[1][0] / s[1], jac[1][1] / s[1]],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.is_finite() && det.abs() > 1e-300 {
                let step = [(m[1][1] * r[0] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det];
                let mut t = 1.0;
                for _ in 0..30 {
                    let cand = [delta[0] + t * step[0], delta[1] + t * step[1]];
                    let (sc, _) = market_shares(cand, gamma1, quad);
                    if residual(ln_obs, sc).1 < norm {
                        next = cand;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        delta = next;
        (s, jac) = market_shares(delta, gamma1, quad);
        (r, norm) = residual(ln_obs, s);
        trace(norm);
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(Error::NonConvergence { iterations: it + 1, residual: f64::INFINITY });
        }
    }
    if norm <= config.contraction_tol {
        return Ok((delta, config.contraction_max_iter, norm));
    }
    Err(Error::NonConvergence { iterations: config.contraction_max_iter, residual: norm })
}

fn check_observed(shares: &[[f64; 2]]) -> Result<()> {
    for (m, s) in shares.iter().enumerate() {
        if !(s[0] > 0.0 && s[1] > 0.0 && s[0] + s[1] < 1.0) {
            return Err(Error::invalid(format!(
                "market {m}: inversion needs positive inside and outside shares, got {s:?}"
            )));
        }
    }
    Ok(())
}

/// Mean utilities reproducing the observed shares, each market solved separately.
pub fn berry_inversion(
    observed: &[[f64; 2]],
    sigma_mu: f64,
    gamma1: f64,
    quad: &MuQuadrature,
    config: &EstimationConfig,
) -> Result<Inversion> {
    check_observed(observed)?;
    let quad = quad.rescaled(sigma_mu)?;
    let mut out = Inversion { delta: MeanUtilities { delta: Vec::new() }, iterations: Vec::new(), residuals: Vec::new() };
    for obs in observed {
        let (d, it, res) = invert_market(*obs, gamma1, &quad, config, |_| {})?;
        out.delta.delta.push(d);
        out.iterations.push(it);
        out.residuals.push(res);
    }
    Ok(out)
}

/// Sup-norm residual after every iterate of each market's inversion.
pub fn inversion_trace(
    observed: &[[f64; 2]],
    sigma_mu: f64,
    gamma1: f64,
    quad: &MuQuadrature,
    config: &EstimationConfig,
) -> Result<Vec<Vec<f64>>> {
    check_observed(observed)?;
    let quad = quad.rescaled(sigma_mu)?;
    observed
        .iter()
        .map(|obs| {
            let mut log = Vec::new();
            invert_market(*obs, gamma1, &quad, config, |r| log.push(r))?;
            Ok(log)
        })
        .collect()
}

/// Regressors for the linear part, one row per `(market, version)` in
/// market-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DesignMatrix {
    /// Columns `const`, `neg_price` and `version2`; coefficients map to `(a, b, gamma0)`.
    pub fn standard(prices: &[[f64; 2]]) -> Self {
        let rows = prices
            .iter()
            .flat_map(|p| [vec![1.0, -p[0], 0.0], vec![1.0, -p[1], 1.0]])
            .collect();
        DesignMatrix { names: vec!["const".into(), "neg_price".into(), "version2".into()], rows }
    }

    /// Appends a covariate column.
    pub fn with_column(mut self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.rows.len() {
            return Err(Error::invalid(format!(
                "column {name} has {} values for {} rows",
                values.len(),
                self.rows.len()
            )));
        }
        self.names.push(name.to_string());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(*v);
        }
        Ok(self)
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.names.len(), |i, j| self.rows[i][j])
    }

    /// Names of columns that are linear combinations of earlier ones.
    pub fn collinear_columns(&self) -> Vec<String> {
        let x = self.matrix();
        let mut kept: Vec<usize> = Vec::new();
        let mut bad = Vec::new();
        for j in 0..x.ncols() {
            let mut cols = kept.clone();
            cols.push(j);
            let sub = x.select_columns(&cols);
            let sv = sub.singular_values();
            let top = sv.max();
            let rank = sv.iter().filter(|s| **s > 1e-10 * top.max(1e-300)).count();
            if top == 0.0 || rank < cols.len() {
                bad.push(self.names[j].clone());
            } else {
                kept.push(j);
            }
        }
        bad
    }
}

/// Linear-step output. `coefficients` follow the design's column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerFit {
    pub a: f64,
    pub b: f64,
    pub gamma0: f64,
    pub coefficients: Vec<f64>,
    pub xi: Vec<[f64; 2]>,
    pub residual_dof: usize,
}

/// OLS of `delta` on the design matrix; the first three columns map to `(a, b, gamma0)`.
pub fn inner_regression(delta: &MeanUtilities, design: &DesignMatrix) -> Result<InnerFit> {
    let n = delta.delta.len() * 2;
    if design.rows.len() != n {
        return Err(Error::invalid(format!("design has {} rows for {} mean utilities", design.rows.len(), n)));
    }
    if design.names.len() < 3 {
        return Err(Error::invalid("design needs at least the const, price and version columns".to_string()));
    }
    let bad = design.collinear_columns();
    if !bad.is_empty() || n < design.names.len() {
        let bad = if bad.is_empty() { design.names.clone() } else { bad };
        return Err(Error::Collinear(bad));
    }
    let x = design.matrix();
    let y = DVector::from_iterator(n, delta.delta.iter().flat_map(|d| [d[0], d[1]]));
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&y, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let fitted = &x * &beta;
    let xi = (0..n / 2).map(|m| [y[2 * m] - fitted[2 * m], y[2 * m + 1] - fitted[2 * m + 1]]).collect();
    Ok(InnerFit {
        a: beta[0],
        b: beta[1],
        gamma0: beta[2],
        coefficients: beta.iter().copied().collect(),
        xi,
        residual_dof: n - design.names.len(),
    })
}

/// Inner solve at one `(sigma_mu, gamma1)` point.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub fit: InnerFit,
    pub objective: f64,
    pub inversion: Inversion,
}

/// Prepared data and quadrature for repeated objective evaluations.
pub struct Problem {
    markets: Vec<Market>,
    observed: Vec<[f64; 2]>,
    design: DesignMatrix,
    quad: MuQuadrature,
    config: EstimationConfig,
}

impl Problem {
    pub fn new(data: &[MarketObservation], config: &EstimationConfig) -> Result<Self> {
        let markets = group_markets(data)?;
        let prices: Vec<[f64; 2]> = markets.iter().map(|m| m.prices).collect();
        Self::with_design(markets, DesignMatrix::standard(&prices), config)
    }

    pub fn with_design(markets: Vec<Market>, design: DesignMatrix, config: &EstimationConfig) -> Result<Self> {
        config.validate()?;
        if markets.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 markets, got {}", markets.len())));
        }
        let bad = design.collinear_columns();
        if !bad.is_empty() {
            return Err(Error::Collinear(bad));
        }
        let observed = markets.iter().map(|m| m.shares).collect();
        Ok(Problem { markets, observed, design, quad: config.quadrature()?, config: config.clone() })
    }

    pub fn markets(&self) -> &[Market] {
        &self.markets
    }

    /// Inversion plus regression at `(sigma_mu, gamma1)`.
    pub fn solve_inner(&self, sigma_mu: f64, gamma1: f64) -> Result<InnerSolution> {
        let inversion = berry_inversion(&self.observed, sigma_mu, gamma1, &self.quad, &self.config)?;
        let fit = inner_regression(&inversion.delta, &self.design)?;
        let objective = fit.xi.iter().flatten().map(|x| x * x).sum();
        Ok(InnerSolution { fit, objective, inversion })
    }

    /// Sum of squared structural residuals.
    pub fn objective(&self, sigma_mu: f64, gamma1: f64) -> Result<f64> {
        self.solve_inner(sigma_mu, gamma1).map(|s| s.objective)
    }
}

/// Outcome of one outer local search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostics {
    pub start: usize,
    pub initial: [f64; 2],
    pub solution: [f64; 2],
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective evaluations whose inversion failed (treated as `+inf`).
    pub failed_inversions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub best_start: usize,
    pub starts: Vec<StartDiagnostics>,
    /// Iterations the inversion took in each market at the reported optimum.
    pub inversion_iterations: Vec<usize>,
}

/// Bootstrap standard deviations of the estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub a: f64,
    pub b: f64,
    pub gamma0: f64,
    pub sigma_mu: f64,
    pub gamma1: f64,
    pub draws: usize,
    /// Re-estimations that failed and were left out.
    pub failed_draws: usize,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Estimated parameters, costs zeroed.
    pub params: ModelParams,
    pub market_ids: Vec<String>,
    /// Structural residuals per market and version.
    pub xi: Vec<[f64; 2]>,
    /// `sum xi^2`.
    pub objective: f64,
    pub diagnostics: Diagnostics,
    pub std_errors: Option<StdErrors>,
}

/// Multistart nested fixed point estimate.
pub fn estimate(data: &[MarketObservation], config: &EstimationConfig) -> Result<EstimationResult> {
    estimate_problem(&Problem::new(data, config)?)
}

pub fn estimate_problem(problem: &Problem) -> Result<EstimationResult> {
    let config = &problem.config;
    let bounds = [config.sigma_bounds, config.gamma1_bounds];
    let starts = latin_hypercube(config.outer_starts, &bounds, &mut ChaCha8Rng::seed_from_u64(config.seed));
    let opts = SimplexOptions { xtol: config.outer_xtol, max_iter: config.outer_max_iter, ..SimplexOptions::default() };

    let runs: Vec<StartDiagnostics> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut failed = 0;
            let r = nelder_mead(
                |x| match problem.objective(x[0], x[1]) {
                    Ok(v) => v,
                    Err(_) => {
                        failed += 1;
                        f64::INFINITY
                    }
                },
                *x0,
                &bounds,
                &opts,
            );
            StartDiagnostics {
                start: i,
                initial: *x0,
                solution: r.x,
                objective: r.f,
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.converged,
                failed_inversions: failed,
            }
        })
        .collect();

    // lowest objective wins; ties go to the lower start index
    let best = runs
        .iter()
        .filter(|r| r.objective.is_finite())
        .fold(None::<&StartDiagnostics>, |acc, r| match acc {
            Some(a) if a.objective <= r.objective => Some(a),
            _ => Some(r),
        });
    let Some(best) = best else {
        return Err(Error::EstimationFailed(
            runs.iter()
                .map(|r| {
                    format!(
                        "start {} at ({:.4}, {:.4}): no finite objective, {} failed inversions",
                        r.start, r.initial[0], r.initial[1], r.failed_inversions
                    )
                })
                .collect(),
        ));
    };
    let [sigma_mu, gamma1] = best.solution;
    let inner = problem.solve_inner(sigma_mu, gamma1)?;
    let params = ModelParams {
        a: inner.fit.a,
        b: inner.fit.b,
        gamma0: inner.fit.gamma0,
        gamma1,
        sigma_mu,
        costs: [0.0, 0.0],
    };
    Ok(EstimationResult {
        params,
        market_ids: problem.markets.iter().map(|m| m.id.clone()).collect(),
        xi: inner.fit.xi,
        objective: inner.objective,
        diagnostics: Diagnostics {
            best_start: best.start,
            starts: runs.clone(),
            inversion_iterations: inner.inversion.iterations,
        },
        std_errors: None,
    })
}

/// Parametric bootstrap: each draw resamples every market's choices
/// multinomially at its count from the observed shares and re-estimates.
///
/// Sampled zero counts are replaced by one half so the inversion stays defined.
pub fn bootstrap_std_errors(data: &[MarketObservation], config: &EstimationConfig, draws: usize) -> Result<StdErrors> {
    config.validate()?;
    if draws == 0 {
        return Err(Error::invalid("bootstrap needs at least one draw".to_string()));
    }
    let markets = group_markets(data)?;
    let counts: Vec<u64> = markets
        .iter()
        .map(|m| {
            m.count
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::UnsupportedData(format!("market {} has no observation count", m.id)))
        })
        .collect::<Result<_>>()?;

    let estimates: Vec<Option<[f64; 5]>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(d as u64 + 1));
            let resampled: Vec<Market> = markets
                .iter()
                .zip(&counts)
                .map(|(m, &n)| {
                    let draw = multinomial3(n, [m.shares[0], m.shares[1], m.outside_share()], &mut rng);
                    let adj = draw.map(|c| if c == 0 { 0.5 } else { c as f64 });
                    let total: f64 = adj.iter().sum();
                    Market { shares: [adj[0] / total, adj[1] / total], ..m.clone() }
                })
                .collect();
            let prices: Vec<[f64; 2]> = resampled.iter().map(|m| m.prices).collect();
            let problem = Problem::with_design(resampled, DesignMatrix::standard(&prices), config).ok()?;
            let est = estimate_problem(&problem).ok()?;
            let p = est.params;
            Some([p.a, p.b, p.gamma0, p.sigma_mu, p.gamma1])
        })
        .collect();

    let ok: Vec<[f64; 5]> = estimates.iter().flatten().copied().collect();
    let failed_draws = draws - ok.len();
    if ok.is_empty() {
        return Err(Error::EstimationFailed(vec![format!("all {draws} bootstrap re-estimations failed")]));
    }
    let sd = |j: usize| {
        if ok.len() < 2 {
            return 0.0;
        }
        let n = ok.len() as f64;
        let mean = ok.iter().map(|e| e[j]).sum::<f64>() / n;
        (ok.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let warning = (ok.len() < 2).then(|| "fewer than two successful draws: standard errors reported as zero".to_string());
    Ok(StdErrors {
        a: sd(0),
        b: sd(1),
        gamma0: sd(2),
        sigma_mu: sd(3),
        gamma1: sd(4),
        draws,
        failed_draws,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{aggregate_shares, PriceVector};

    fn obs(id: &str, v: Version, price: f64, share: f64) -> MarketObservation {
        MarketObservation { market_id: id.into(), version: v, price, share, count: None }
    }

    fn synthetic(params: &ModelParams, prices: &[(f64, f64)], dist: MuDistribution) -> Vec<MarketObservation> {
        let quad = MuQuadrature::new(dist, params.sigma_mu, DEFAULT_NODES).unwrap();
        prices
            .iter()
            .enumerate()
            .flat_map(|(m, &(p1, p2))| {
                let s = aggregate_shares(params, &PriceVector::new(p1, p2), &quad).unwrap();
                let id = format!("m{m}");
                [obs(&id, Version::One, p1, s.s1), obs(&id, Version::Two, p2, s.s2)]
            })
            .collect()
    }

    const DESIGN: [(f64, f64); 5] = [(1.0, 1.0), (0.7, 1.0), (0.4, 1.0), (0.7, 0.7), (0.4, 0.4)];

    #[test]
    fn grouping_checks() {
        assert!(group_markets(&[obs("a", Version::One, 1.0, 0.2)]).is_err());
        assert!(group_markets(&[obs("a", Version::One, 1.0, 0.6), obs("a", Version::Two, 1.0, 0.5)]).is_err());
        assert!(group_markets(&[obs("a", Version::One, 1.0, 0.0), obs("a", Version::Two, 1.0, 0.5)]).is_err());
        let m = group_markets(&[
            obs("b", Version::Two, 2.0, 0.3),
            obs("a", Version::One, 1.0, 0.2),
            obs("b", Version::One, 1.0, 0.1),
            obs("a", Version::Two, 2.0, 0.4),
        ])
        .unwrap();
        assert_eq!(m[0].id, "b");
        assert_eq!(m[0].shares, [0.1, 0.3]);
    }

    #[test]
    fn logit_inversion_is_analytic() {
        let observed = [[0.2, 0.3], [0.05, 0.6]];
        let quad = MuQuadrature::new(MuDistribution::Uniform, 1.0, 11).unwrap();
        let inv = berry_inversion(&observed, 0.0, 0.0, &quad, &EstimationConfig::default()).unwrap();
        for (d, s) in inv.delta.delta.iter().zip(observed) {
            let s0 = 1.0 - s[0] - s[1];
            assert!((d[0] - (s[0] / s0).ln()).abs() < 1e-15);
            assert!((d[1] - (s[1] / s0).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn inversion_rejects_bad_shares() {
        let quad = MuQuadrature::new(MuDistribution::Uniform, 1.0, 11).unwrap();
        let cfg = EstimationConfig::default();
        assert!(berry_inversion(&[[0.5, 0.5]], 1.0, 0.0, &quad, &cfg).is_err());
        assert!(berry_inversion(&[[0.0, 0.5]], 1.0, 0.0, &quad, &cfg).is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let quad = MuQuadrature::new(MuDistribution::Uniform, 1.0, 21).unwrap();
        let cfg = EstimationConfig { contraction_max_iter: 2, inversion: InversionMethod::Contraction, ..Default::default() };
        match berry_inversion(&[[0.01, 0.9]], 6.0, 0.5, &quad, &cfg) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > cfg.contraction_tol);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn predict_matches_demand_core() {
        let p = ModelParams::new(0.5, 2.0, 0.8, -0.4, 1.7).unwrap();
        let quad = MuQuadrature::new(MuDistribution::Uniform, 1.0, 51).unwrap();
        let prices = [(1.0, 1.2), (0.3, 0.9)];
        let delta = MeanUtilities {
            delta: prices.iter().map(|&(p1, p2)| [p.a - p.b * p1, p.a - p.b * p2 + p.gamma0]).collect(),
        };
        let pred = predict_shares(&delta, p.sigma_mu, p.gamma1, &quad).unwrap();
        let q = quad.rescaled(p.sigma_mu).unwrap();
        for (s, &(p1, p2)) in pred.iter().zip(&prices) {
            let direct = aggregate_shares(&p, &PriceVector::new(p1, p2), &q).unwrap();
            assert!((s[0] - direct.s1).abs() < 1e-15);
            assert!((s[1] - direct.s2).abs() < 1e-15);
        }
    }

    #[test]
    fn regression_recovers_exact_linear_delta() {
        let prices: Vec<[f64; 2]> = DESIGN.iter().map(|p| [p.0, p.1]).collect();
        let (a, b, g0) = (-1.5, 2.2, 0.7);
        let delta = MeanUtilities { delta: prices.iter().map(|p| [a - b * p[0], a - b * p[1] + g0]).collect() };
        let fit = inner_regression(&delta, &DesignMatrix::standard(&prices)).unwrap();
        assert!((fit.a - a).abs() < 1e-12 && (fit.b - b).abs() < 1e-12 && (fit.gamma0 - g0).abs() < 1e-12);
        assert!(fit.xi.iter().flatten().all(|x| x.abs() < 1e-12));
        assert_eq!(fit.residual_dof, 7);
    }

    #[test]
    fn collinearity_is_named() {
        let prices = vec![[1.0, 1.0], [0.5, 0.5]];
        let design = DesignMatrix::standard(&prices).with_column("twice_const", &[2.0; 4]).unwrap();
        assert_eq!(design.collinear_columns(), vec!["twice_const".to_string()]);
        let delta = MeanUtilities { delta: vec![[0.0, 1.0], [0.5, 1.5]] };
        match inner_regression(&delta, &design) {
            Err(Error::Collinear(cols)) => assert_eq!(cols, vec!["twice_const".to_string()]),
            other => panic!("{other:?}"),
        }
        // constant price: price column collinear with the constant
        let flat = DesignMatrix::standard(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(flat.collinear_columns(), vec!["neg_price".to_string()]);
    }

    #[test]
    fn objective_vanishes_at_truth() {
        let truth = ModelParams::new(0.3, 2.5, 0.9, 0.4, 1.6).unwrap();
        let data = synthetic(&truth, &DESIGN, MuDistribution::Uniform);
        let problem = Problem::new(&data, &EstimationConfig::default()).unwrap();
        let sol = problem.solve_inner(truth.sigma_mu, truth.gamma1).unwrap();
        assert!(sol.objective <= 1e-10, "{}", sol.objective);
        assert!((sol.fit.b - truth.b).abs() < 1e-8);
    }

    #[test]
    fn bootstrap_needs_counts() {
        let truth = ModelParams::new(0.3, 2.5, 0.9, 0.4, 1.6).unwrap();
        let data = synthetic(&truth, &DESIGN, MuDistribution::Uniform);
        assert!(matches!(
            bootstrap_std_errors(&data, &EstimationConfig::default(), 3),
            Err(Error::UnsupportedData(_))
        ));
    }
}
