//! Monopoly pricing on the full logit model: unconstrained and single-price
//! optima, the cost-to-margin reparameterization and counterfactual tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{
    aggregate_shares, gradient_unchecked, profit_unchecked, welfare, ModelParams, MuQuadrature, PriceVector,
    ShareVector, WelfareReport,
};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingRegime {
    Unconstrained,
    UniformConstrained,
    Data,
}

impl PricingRegime {
    pub fn label(self) -> &'static str {
        match self {
            PricingRegime::Unconstrained => "optimal mechanism",
            PricingRegime::UniformConstrained => "optimal constant",
            PricingRegime::Data => "data",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingOptions {
    /// Starts per axis of the start grid.
    pub grid_points: usize,
    /// Start grid spans `[start_lo, start_hi]` times the uniform optimum.
    pub start_lo: f64,
    pub start_hi: f64,
    /// Prices are searched in `[0, domain_mult * uniform optimum]` (in margins).
    pub domain_mult: f64,
    /// Convergence requires `|grad| <= grad_tol * b`.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions { grid_points: 3, start_lo: 0.5, start_hi: 2.0, domain_mult: 10.0, grad_tol: 1e-6, max_iter: 200 }
    }
}

impl PricingOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points == 0 || self.max_iter == 0 {
            return Err(Error::invalid("grid_points and max_iter must be positive".to_string()));
        }
        if !(self.start_lo > 0.0 && self.start_lo <= self.start_hi && self.domain_mult >= self.start_hi) {
            return Err(Error::invalid(format!(
                "need 0 < start_lo <= start_hi <= domain_mult, got {} {} {}",
                self.start_lo, self.start_hi, self.domain_mult
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub prices: PriceVector,
    pub shares: ShareVector,
    pub welfare: WelfareReport,
    pub regime: PricingRegime,
    pub converged: bool,
    /// Euclidean norm of the profit gradient (along the diagonal for the uniform regime).
    pub gradient_norm: f64,
}

/// Zero-cost model whose prices are the original model's margins `p - c`.
pub fn margin_transform(params: &ModelParams) -> ModelParams {
    let [c1, c2] = params.costs;
    ModelParams {
        a: params.a - params.b * c1,
        gamma0: params.gamma0 - params.b * (c2 - c1),
        costs: [0.0, 0.0],
        ..*params
    }
}

fn check(params: &ModelParams, quad: &MuQuadrature, opts: &PricingOptions) -> Result<()> {
    params.validate()?;
    quad.check_support(params.sigma_mu)?;
    opts.validate()
}

fn solution(
    params: &ModelParams,
    quad: &MuQuadrature,
    prices: PriceVector,
    regime: PricingRegime,
    converged: bool,
    gradient_norm: f64,
) -> Result<PricingSolution> {
    Ok(PricingSolution {
        prices,
        shares: aggregate_shares(params, &prices, quad)?,
        welfare: welfare(params, &prices, quad)?,
        regime,
        converged,
        gradient_norm,
    })
}

/// Profit and its derivative along `p1 = p2 = p`.
fn uniform_profit(params: &ModelParams, quad: &MuQuadrature, p: f64) -> (f64, f64) {
    let prices = PriceVector::uniform(p);
    let g = gradient_unchecked(params, &prices, quad);
    (profit_unchecked(params, &prices, quad), g[0] + g[1])
}

/// Best single price: doubling to bracket, a 400-point scan, then bisection on
/// the derivative around the best scanned point.
pub fn optimize_uniform(params: &ModelParams, quad: &MuQuadrature, opts: &PricingOptions) -> Result<PricingSolution> {
    check(params, quad, opts)?;
    let floor = params.costs[0].max(params.costs[1]);
    let f = |p: f64| uniform_profit(params, quad, p);
    let mut hi = floor + 1.0 / params.b;
    for _ in 0..60 {
        if f(2.0 * hi).0 <= f(hi).0 {
            break;
        }
        hi *= 2.0;
    }
    let top = 4.0 * hi;
    let n = 400;
    let lo = params.costs[0].min(params.costs[1]);
    let h = (top - lo) / n as f64;
    let best = (0..=n)
        .map(|i| lo + i as f64 * h)
        .map(|p| (p, f(p).0))
        .fold((lo, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });

    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(top));
    let (da, db) = (f(a).1, f(b).1);
    let p = if da > 0.0 && db < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if f(mid).1 > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    } else {
        best.0
    };
    let slope = f(p).1;
    let converged = slope.abs() <= opts.grad_tol * params.b;
    solution(params, quad, PriceVector::uniform(p), PricingRegime::UniformConstrained, converged, slope.abs())
}

/// Local Newton ascent in margin space from one start.
struct LocalRun {
    m: [f64; 2],
    profit: f64,
    gnorm: f64,
    converged: bool,
    iterations: usize,
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn newton_ascent(aux: &ModelParams, quad: &MuQuadrature, start: [f64; 2], upper: f64, opts: &PricingOptions) -> LocalRun {
    let tol = opts.grad_tol * aux.b;
    let clamp = |m: [f64; 2]| [m[0].clamp(0.0, upper), m[1].clamp(0.0, upper)];
    let eval = |m: [f64; 2]| {
        let p = PriceVector::new(m[0], m[1]);
        (profit_unchecked(aux, &p, quad), gradient_unchecked(aux, &p, quad))
    };
    let mut m = clamp(start);
    let (mut f, mut g) = eval(m);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if norm(g) <= tol {
            break;
        }
        iterations += 1;
        // Hessian by central differences of the analytic gradient
        let mut hess = [[0.0; 2]; 2];
        for j in 0..2 {
            let h = 1e-5 * m[j].abs().max(1.0 / aux.b).max(1e-8);
            let (mut up, mut dn) = (m, m);
            up[j] += h;
            dn[j] -= h;
            let (_, gu) = eval(up);
            let (_, gd) = eval(dn);
            for i in 0..2 {
                hess[i][j] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        let sym = 0.5 * (hess[0][1] + hess[1][0]);
        let det = hess[0][0] * hess[1][1] - sym * sym;
        let dir = if hess[0][0] < 0.0 && det > 0.0 {
            [-(hess[1][1] * g[0] - sym * g[1]) / det, -(hess[0][0] * g[1] - sym * g[0]) / det]
        } else {
            // not locally concave: gradient ascent with a step of 1/b in price units
            let scale = 1.0 / (aux.b * norm(g).max(1e-300));
            [g[0] * scale, g[1] * scale]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let cand = clamp([m[0] + t * dir[0], m[1] + t * dir[1]]);
            let (fc, gc) = eval(cand);
            let slack = 1e-13 * f.abs().max(1e-300);
            if fc > f || (fc >= f - slack && norm(gc) < norm(g)) {
                m = cand;
                f = fc;
                g = gc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let gnorm = norm(g);
    LocalRun { m, profit: f, gnorm, converged: gnorm <= tol, iterations }
}

/// Unconstrained optimum over `(p1, p2)`.
///
/// Works in margin space on [`margin_transform`]ed parameters with a grid of
/// starts around the uniform optimum, plus the uniform optimum itself.
pub fn optimize_prices(params: &ModelParams, quad: &MuQuadrature, opts: &PricingOptions) -> Result<PricingSolution> {
    check(params, quad, opts)?;
    let aux = margin_transform(params);
    let uniform = optimize_uniform(&aux, quad, opts)?;
    let mu = uniform.prices.p1.max(1e-6 / aux.b);
    let upper = opts.domain_mult * mu;

    let k = opts.grid_points;
    let level = |i: usize| {
        if k == 1 {
            1.0
        } else {
            opts.start_lo + (opts.start_hi - opts.start_lo) * i as f64 / (k - 1) as f64
        }
    };
    let mut starts: Vec<[f64; 2]> = (0..k * k).map(|i| [level(i / k) * mu, level(i % k) * mu]).collect();
    // the constrained optimum in original prices, expressed in margins
    let pu = optimize_uniform(params, quad, opts)?.prices.p1;
    starts.push([pu - params.costs[0], pu - params.costs[1]]);

    let runs: Vec<LocalRun> = starts
        .par_iter()
        .map(|s| {
            let run = newton_ascent(&aux, quad, *s, upper, opts);
            if run.converged {
                return run;
            }
            // derivative-free restart, then polish
            let nm = nelder_mead(
                |x| -profit_unchecked(&aux, &PriceVector::new(x[0], x[1]), quad),
                run.m,
                &[(0.0, upper), (0.0, upper)],
                &SimplexOptions { xtol: 1e-10 * mu, ..SimplexOptions::default() },
            );
            let polished = newton_ascent(&aux, quad, nm.x, upper, opts);
            LocalRun { iterations: run.iterations + polished.iterations, ..polished }
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .fold(None::<(usize, &LocalRun)>, |acc, (i, r)| match acc {
            Some((j, a)) if a.profit >= r.profit => Some((j, a)),
            _ => Some((i, r)),
        });
    let Some((_, best)) = best else {
        let trace = runs
            .iter()
            .zip(&starts)
            .map(|(r, s)| {
                format!(
                    "start ({:.4}, {:.4}) -> ({:.4}, {:.4}), |grad| {:.3e}, {} iterations",
                    s[0], s[1], r.m[0], r.m[1], r.gnorm, r.iterations
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::OptimizationFailed(trace));
    };
    let prices = PriceVector::new(best.m[0] + params.costs[0], best.m[1] + params.costs[1]);
    solution(params, quad, prices, PricingRegime::Unconstrained, true, best.gnorm)
}

/// Evaluates a given price pair as the data row.
pub fn evaluate_prices(params: &ModelParams, quad: &MuQuadrature, prices: PriceVector) -> Result<PricingSolution> {
    params.validate()?;
    quad.check_support(params.sigma_mu)?;
    prices.validate()?;
    let gnorm = norm(gradient_unchecked(params, &prices, quad));
    solution(params, quad, prices, PricingRegime::Data, false, gnorm)
}

/// Percentage changes against the uniform-constrained row.
///
/// `None` when the base value is zero and the row value is not.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub revenue_pct: Option<f64>,
    pub consumer_surplus_pct: Option<f64>,
    pub social_welfare_pct: Option<f64>,
}

fn pct(value: f64, base: f64) -> Option<f64> {
    if base == 0.0 {
        (value == 0.0).then_some(0.0)
    } else {
        Some(100.0 * (value - base) / base.abs())
    }
}

impl Deltas {
    fn between(row: &WelfareReport, base: &WelfareReport) -> Self {
        Deltas {
            revenue_pct: pct(row.revenue, base.revenue),
            consumer_surplus_pct: pct(row.consumer_surplus, base.consumer_surplus),
            social_welfare_pct: pct(row.social_welfare, base.social_welfare),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub params: ModelParams,
    pub rows: Vec<PricingSolution>,
    /// One entry per row, against the uniform-constrained row.
    pub deltas: Vec<Deltas>,
}

impl CounterfactualReport {
    pub fn row(&self, regime: PricingRegime) -> Option<&PricingSolution> {
        self.rows.iter().find(|r| r.regime == regime)
    }
}

/// Data row (if given), uniform-constrained optimum and unconstrained optimum.
pub fn counterfactual_report(
    params: &ModelParams,
    quad: &MuQuadrature,
    data_prices: Option<PriceVector>,
    opts: &PricingOptions,
) -> Result<CounterfactualReport> {
    let mut rows = Vec::new();
    if let Some(p) = data_prices {
        rows.push(evaluate_prices(params, quad, p)?);
    }
    let uniform = optimize_uniform(params, quad, opts)?;
    let optimal = optimize_prices(params, quad, opts)?;
    let base = uniform.welfare;
    rows.push(uniform);
    rows.push(optimal);
    let deltas = rows.iter().map(|r| Deltas::between(&r.welfare, &base)).collect();
    Ok(CounterfactualReport { params: *params, rows, deltas })
}
