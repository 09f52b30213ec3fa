//! Subcommand implementations. Each produces a [`Report`]; rendering is separate.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tierprice::estimator::{bootstrap_std_errors, EstimationResult};
use tierprice::experiment::{analyze_cells, generate_design, sample_shares, Gamma1Sign, StatsReport};
use tierprice::io::{self, CsvRow};
use tierprice::pricing::{CounterfactualReport, PricingRegime, PricingSolution};
use tierprice::{
    aggregate_shares, counterfactual_report, estimate, ModelParams, MuDistribution, MuQuadrature, PriceVector,
};

use crate::args::{Cli, Command};
use crate::config::{read_file_layer, OutputFormat, RunConfig};
use crate::reference::{self, Check, PolicyRow, ScenarioReference, Tolerance};
use crate::{render, CliError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub params: ModelParams,
    pub mu_dist: MuDistribution,
    pub seed: u64,
    /// Consumers sampled per cell; absent for exact model shares.
    pub count: Option<u64>,
    pub rows: Vec<CsvRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub band: f64,
    pub markets: Vec<String>,
    pub stats: StatsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub mu_dist: MuDistribution,
    pub result: EstimationResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub mu_dist: MuDistribution,
    pub counterfactual: CounterfactualReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    /// Assumptions behind the bundled data.
    pub note: String,
    pub mu_dist: MuDistribution,
    pub stats: StatsReport,
    pub estimate: EstimationResult,
    /// Parameters the pricing rows were computed from.
    pub pricing_params: ModelParams,
    pub counterfactual: CounterfactualReport,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Simulate(SimulateReport),
    Stats(StatsOutput),
    Estimate(EstimateReport),
    Optimize(OptimizeReport),
    Scenario(ScenarioReport),
}

/// A finished run: the report and its rendering in the requested format.
#[derive(Clone, Debug)]
pub struct Output {
    pub report: Report,
    pub text: String,
    pub path: Option<String>,
}

/// Resolves the configuration and runs the selected command.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &cli.config {
        layers.push(read_file_layer(path)?);
    }
    layers.push(cli.flags.layer());
    let config = RunConfig::from_layers(&layers)?;
    let report = execute(&cli.command, &config)?;
    let text = match config.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        OutputFormat::Table => render::table(&report)?,
    };
    Ok(Output { report, text, path: config.out.clone() })
}

/// Runs one command on an already-resolved configuration.
pub fn execute(command: &Command, config: &RunConfig) -> Result<Report, CliError> {
    Ok(match command {
        Command::Simulate => Report::Simulate(simulate(config)?),
        Command::Stats { data } => Report::Stats(stats(&read_csv(data)?, config)?),
        Command::Estimate { data } => Report::Estimate(estimate_cmd(&read_csv(data)?, config)?),
        Command::Optimize { from } => Report::Optimize(optimize(from.as_deref(), config)?),
        Command::Scenario { name } => Report::Scenario(scenario(name, config)?),
    })
}

/// Writes `output` to its path, or stdout when none is set.
pub fn emit(output: &Output) -> Result<(), CliError> {
    match &output.path {
        Some(path) => {
            let mut f = File::create(path)?;
            f.write_all(output.text.as_bytes())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(output.text.as_bytes())?;
        }
    }
    Ok(())
}

fn read_csv(path: &Path) -> Result<Vec<CsvRow>, CliError> {
    let file = File::open(path)?;
    Ok(io::read_rows(file)?)
}

fn quadrature(dist: MuDistribution, params: &ModelParams, config: &RunConfig) -> Result<MuQuadrature, CliError> {
    Ok(MuQuadrature::new(dist, params.sigma_mu, config.quad_nodes)?)
}

pub fn simulate(config: &RunConfig) -> Result<SimulateReport, CliError> {
    let params = config.params.resolve(None)?;
    let dist = config.mu_dist.unwrap_or_default();
    let quad = quadrature(dist, &params, config)?;
    let design = generate_design(config.control, &config.partial, &config.total, config.target)?;
    let mut cells = design.simulate(&params, &quad)?;
    if let Some(n) = config.count {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for cell in &mut cells {
            cell.shares = sample_shares(&cell.shares, n, &mut rng)?;
            cell.count = Some(n);
        }
    }
    let ids: Vec<String> = cells.iter().map(|c| c.label()).collect();
    Ok(SimulateReport { params, mu_dist: dist, seed: config.seed, count: config.count, rows: io::rows_from_cells(&cells, &ids) })
}

pub fn stats(rows: &[CsvRow], config: &RunConfig) -> Result<StatsOutput, CliError> {
    let (markets, cells) = io::cells(rows)?;
    Ok(StatsOutput { band: config.band, markets, stats: analyze_cells(&cells, config.band)? })
}

fn estimate_rows(rows: &[CsvRow], config: &RunConfig, fallback: MuDistribution) -> Result<EstimateReport, CliError> {
    let data = io::observations(rows)?;
    let cfg = config.estimation(fallback);
    let mut result = estimate(&data, &cfg)?;
    if config.bootstrap > 0 {
        result.std_errors = Some(bootstrap_std_errors(&data, &cfg, config.bootstrap)?);
    }
    Ok(EstimateReport { mu_dist: cfg.mu_dist, result })
}

pub fn estimate_cmd(rows: &[CsvRow], config: &RunConfig) -> Result<EstimateReport, CliError> {
    estimate_rows(rows, config, MuDistribution::Uniform)
}

/// Parameters (and their distribution, if recorded) from a JSON file.
fn params_from_json(path: &Path) -> Result<(ModelParams, Option<MuDistribution>), CliError> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(report) = serde_json::from_str::<Report>(&text) {
        return match report {
            Report::Estimate(e) => Ok((e.result.params, Some(e.mu_dist))),
            Report::Scenario(s) => Ok((s.estimate.params, Some(s.mu_dist))),
            Report::Simulate(s) => Ok((s.params, Some(s.mu_dist))),
            Report::Optimize(o) => Ok((o.counterfactual.params, Some(o.mu_dist))),
            Report::Stats(_) => Err(CliError::Config(format!("{} holds no model parameters", path.display()))),
        };
    }
    Ok((serde_json::from_str::<ModelParams>(&text)?, None))
}

pub fn optimize(from: Option<&Path>, config: &RunConfig) -> Result<OptimizeReport, CliError> {
    let (base, recorded) = match from {
        Some(path) => {
            let (p, d) = params_from_json(path)?;
            (Some(p), d)
        }
        None => (None, None),
    };
    let params = config.params.resolve(base.as_ref())?;
    let dist = config.mu_dist.or(recorded).unwrap_or_default();
    let quad = quadrature(dist, &params, config)?;
    let counterfactual = counterfactual_report(&params, &quad, config.data_prices, &config.pricing)?;
    Ok(OptimizeReport { mu_dist: dist, counterfactual })
}

fn row<'a>(report: &'a CounterfactualReport, regime: PricingRegime) -> Result<&'a PricingSolution, CliError> {
    report
        .row(regime)
        .ok_or_else(|| CliError::Config(format!("pricing report lacks the {} row", regime.label())))
}

fn policy_checks(label: &str, reference: &PolicyRow, sol: &PricingSolution, checks: &mut Vec<Check>) {
    let rel = Tolerance::Relative { pct: 2.0 };
    checks.push(Check::number(format!("{label}: p1"), reference.p1, sol.prices.p1, rel));
    checks.push(Check::number(format!("{label}: p2"), reference.p2, sol.prices.p2, rel));
    checks.push(Check::number(format!("{label}: share 1 (%)"), reference.share1_pct, 100.0 * sol.shares.s1, Tolerance::Info));
    checks.push(Check::number(format!("{label}: share 2 (%)"), reference.share2_pct, 100.0 * sol.shares.s2, Tolerance::Info));
    checks.push(Check::number(format!("{label}: revenue"), reference.revenue, sol.welfare.revenue, rel));
    checks.push(Check::number(
        format!("{label}: consumer welfare"),
        reference.consumer_welfare,
        sol.welfare.consumer_surplus,
        rel,
    ));
    checks.push(Check::number(format!("{label}: social welfare"), reference.social_welfare, sol.welfare.social_welfare, rel));
}

fn readout(stats: &StatsReport) -> String {
    stats.pricing_readout.clone().unwrap_or_default()
}

/// Bundled datasets are fitted with normal baseline shifts unless configured otherwise.
const SCENARIO_DIST: MuDistribution = MuDistribution::Normal;

pub fn scenario(name: &str, config: &RunConfig) -> Result<ScenarioReport, CliError> {
    let dataset = io::dataset(name)?;
    let rows = dataset.rows()?;
    let stats = stats(&rows, config)?.stats;
    let est = estimate_rows(&rows, config, SCENARIO_DIST)?;
    let dist = est.mu_dist;
    let mut checks = Vec::new();

    let (pricing_params, counterfactual) = if name == "airline" {
        airline_checks(&stats, &est.result, dist, config, &mut checks)?
    } else {
        let reference = if name == "scenario1" { reference::SCENARIO1 } else { reference::SCENARIO2 };
        synthetic_checks(&reference, &stats, &est.result, dist, config, &mut checks)?
    };

    let passed = checks.iter().filter(|c| c.pass == Some(true)).count();
    let failed = checks.iter().filter(|c| c.pass == Some(false)).count();
    Ok(ScenarioReport {
        name: name.to_string(),
        note: dataset.note.to_string(),
        mu_dist: dist,
        stats,
        estimate: est.result,
        pricing_params,
        counterfactual,
        checks,
        passed,
        failed,
    })
}

fn airline_checks(
    stats: &StatsReport,
    est: &EstimationResult,
    dist: MuDistribution,
    config: &RunConfig,
    checks: &mut Vec<Check>,
) -> Result<(ModelParams, CounterfactualReport), CliError> {
    let (lo, hi) = reference::AIRLINE_PHI_RANGE;
    for row in &stats.phi {
        checks.push(Check::number(format!("φ {}", row.cell), 1.0, row.phi, Tolerance::Range { lo, hi }));
    }
    checks.push(Check::text("pricing readout", Gamma1Sign::Indeterminate.readout(), &readout(stats)));

    let [a, b, g0, g1, s] = reference::AIRLINE_PARAMS;
    let names = ["a", "b", "γ⁰", "γ¹", "σ_μ"];
    let got = [est.params.a, est.params.b, est.params.gamma0, est.params.gamma1, est.params.sigma_mu];
    for ((name, r), g) in names.iter().zip(reference::AIRLINE_PARAMS).zip(got) {
        checks.push(Check::number(format!("estimate {name}"), r, g, Tolerance::Info));
    }
    if let Some(se) = &est.std_errors {
        let got = [se.a, se.b, se.gamma0, se.gamma1, se.sigma_mu];
        for ((name, r), g) in names.iter().zip(reference::AIRLINE_STD_ERRORS).zip(got) {
            checks.push(Check::number(format!("std. error {name}"), r, g, Tolerance::Info));
        }
    }

    // fit and pricing use the reference parameters
    let params = ModelParams::new(a, b, g0, g1, s)?;
    let quad = quadrature(dist, &params, config)?;
    let fit_tol = Tolerance::Absolute { abs: fit_tolerance_pp(dist) };
    let markets = io::cells(&io::dataset("airline")?.rows()?)?;
    for (market, r1, r2) in reference::AIRLINE_FIT {
        let idx = markets.0.iter().position(|m| m == market).ok_or_else(|| {
            CliError::Config(format!("bundled airline data lack market {market}"))
        })?;
        let shares = aggregate_shares(&params, &markets.1[idx].prices, &quad)?;
        checks.push(Check::number(format!("fit {market} s1 (%)"), r1, 100.0 * shares.s1, fit_tol));
        checks.push(Check::number(format!("fit {market} s2 (%)"), r2, 100.0 * shares.s2, fit_tol));
    }

    let data_prices = config.data_prices.unwrap_or(PriceVector::uniform(100.0));
    let cf = counterfactual_report(&params, &quad, Some(data_prices), &config.pricing)?;
    policy_checks("data", &reference::AIRLINE_DATA_ROW, row(&cf, PricingRegime::Data)?, checks);
    policy_checks("optimal constant", &reference::AIRLINE_CONSTANT, row(&cf, PricingRegime::UniformConstrained)?, checks);
    policy_checks("optimal mechanism", &reference::AIRLINE_OPTIMAL, row(&cf, PricingRegime::Unconstrained)?, checks);
    Ok((params, cf))
}

/// Allowed share error in percentage points; the normal fallback gets twice the uniform band.
pub fn fit_tolerance_pp(dist: MuDistribution) -> f64 {
    match dist {
        MuDistribution::Uniform => 0.15,
        MuDistribution::Normal => 0.30,
    }
}

fn synthetic_checks(
    reference: &ScenarioReference,
    stats: &StatsReport,
    est: &EstimationResult,
    dist: MuDistribution,
    config: &RunConfig,
    checks: &mut Vec<Check>,
) -> Result<(ModelParams, CounterfactualReport), CliError> {
    let expected = if reference.estimates[2] > 0.0 { Gamma1Sign::Positive } else { Gamma1Sign::Negative };
    checks.push(Check::text("pricing readout", expected.readout(), &readout(stats)));

    let ten = Tolerance::Relative { pct: 10.0 };
    let p = est.params;
    checks.push(Check::number("estimate γ⁰", reference.estimates[0], p.gamma0, ten));
    checks.push(Check::number("estimate σ_μ", reference.estimates[1], p.sigma_mu, ten));
    checks.push(Check::number("estimate γ¹", reference.estimates[2], p.gamma1, ten));

    // the reference omits (a, b), so pricing runs on the full estimate
    let quad = quadrature(dist, &p, config)?;
    let cf = counterfactual_report(&p, &quad, config.data_prices, &config.pricing)?;
    let constant = row(&cf, PricingRegime::UniformConstrained)?;
    let optimal = row(&cf, PricingRegime::Unconstrained)?;
    policy_checks("optimal constant", &reference.constant, constant, checks);
    policy_checks("optimal mechanism", &reference.optimal, optimal, checks);

    let idx = cf.rows.iter().position(|r| r.regime == PricingRegime::Unconstrained).unwrap_or(0);
    let deltas = cf.deltas[idx];
    let changes = [
        ("revenue change (%)", reference.revenue_change_pct, deltas.revenue_pct),
        ("consumer welfare change (%)", reference.consumer_welfare_change_pct, deltas.consumer_surplus_pct),
        ("social welfare change (%)", reference.social_welfare_change_pct, deltas.social_welfare_pct),
    ];
    for ((label, r, got), tol) in changes.into_iter().zip(reference.change_tolerances_pp) {
        let tol = tol.map_or(Tolerance::Info, |abs| Tolerance::Absolute { abs });
        checks.push(Check::number(label, r, got.unwrap_or(f64::NAN), tol));
    }
    let order = |a: f64, b: f64| if a > b { "p1* > p2*" } else if a < b { "p1* < p2*" } else { "p1* = p2*" };
    checks.push(Check::text(
        "price order",
        order(reference.optimal.p1, reference.optimal.p2),
        order(optimal.prices.p1, optimal.prices.p2),
    ));
    Ok((p, cf))
}
