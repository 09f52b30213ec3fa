//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Layer;

#[derive(Debug, Parser)]
#[command(name = "tierprice", version, about = "Two-version pricing: experiment statistics, demand estimation, optimal prices")]
pub struct Cli {
    /// Config file of flat dotted keys (TOML); flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub flags: Flags,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model shares for a treatment design, optionally sampled at a consumer count.
    Simulate,
    /// Cross-substitution, differential response and share-ratio statistics.
    Stats { data: PathBuf },
    /// Nested fixed point estimate of the demand parameters.
    Estimate { data: PathBuf },
    /// Uniform and unconstrained optimal prices with welfare.
    Optimize {
        /// Take parameters from an `estimate` JSON report (or a bare parameter object).
        #[arg(long, value_name = "FILE")]
        from: Option<PathBuf>,
    },
    /// Full pipeline on a bundled dataset with reference values.
    Scenario {
        #[arg(value_parser = ["airline", "scenario1", "scenario2"])]
        name: String,
    },
}

/// One flag per configuration key; values are typed when the layers merge.
#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<String>,
    /// Quadrature nodes over the baseline shift.
    #[arg(long, global = true, value_name = "N")]
    pub quad_nodes: Option<String>,
    /// Baseline-shift distribution: uniform or normal.
    #[arg(long, global = true, value_name = "DIST")]
    pub mu_dist: Option<String>,
    /// table or json.
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, global = true)]
    pub b: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma1: Option<String>,
    #[arg(long, global = true)]
    pub sigma_mu: Option<String>,
    #[arg(long, global = true)]
    pub c1: Option<String>,
    #[arg(long, global = true)]
    pub c2: Option<String>,
    /// Control prices `p1,p2`.
    #[arg(long, global = true, value_name = "P1,P2")]
    pub control: Option<String>,
    /// Partial discount fractions, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    pub partial: Option<String>,
    /// Total discount fractions, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    pub total: Option<String>,
    /// Version repriced in partial cells (1 or 2).
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Sample each cell at this many consumers.
    #[arg(long, global = true, value_name = "N")]
    pub count: Option<String>,
    /// Indeterminacy band around one for the sign readout without counts.
    #[arg(long, global = true)]
    pub band: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub starts: Option<String>,
    #[arg(long, global = true)]
    pub contraction_tol: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub contraction_max_iter: Option<String>,
    /// hybrid or contraction.
    #[arg(long, global = true)]
    pub inversion: Option<String>,
    #[arg(long, global = true)]
    pub sigma_max: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma1_min: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma1_max: Option<String>,
    /// Bootstrap draws for standard errors (0 disables).
    #[arg(long, global = true, value_name = "N")]
    pub bootstrap: Option<String>,
    /// Observed prices `p1,p2` for the data row of the pricing report.
    #[arg(long, global = true, value_name = "P1,P2")]
    pub data_prices: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub grid_points: Option<String>,
    #[arg(long, global = true)]
    pub domain_mult: Option<String>,
    #[arg(long, global = true)]
    pub grad_tol: Option<String>,
}

impl Flags {
    pub fn layer(&self) -> Layer {
        let pairs: [(&str, &Option<String>); 30] = [
            ("seed", &self.seed),
            ("quad.nodes", &self.quad_nodes),
            ("quad.dist", &self.mu_dist),
            ("output.format", &self.format),
            ("output.path", &self.out),
            ("params.a", &self.a),
            ("params.b", &self.b),
            ("params.gamma0", &self.gamma0),
            ("params.gamma1", &self.gamma1),
            ("params.sigma_mu", &self.sigma_mu),
            ("params.c1", &self.c1),
            ("params.c2", &self.c2),
            ("design.control", &self.control),
            ("design.partial", &self.partial),
            ("design.total", &self.total),
            ("design.target", &self.target),
            ("design.count", &self.count),
            ("stats.band", &self.band),
            ("estimator.starts", &self.starts),
            ("estimator.contraction_tol", &self.contraction_tol),
            ("estimator.contraction_max_iter", &self.contraction_max_iter),
            ("estimator.inversion", &self.inversion),
            ("estimator.sigma_max", &self.sigma_max),
            ("estimator.gamma1_min", &self.gamma1_min),
            ("estimator.gamma1_max", &self.gamma1_max),
            ("estimator.bootstrap", &self.bootstrap),
            ("pricing.data_prices", &self.data_prices),
            ("pricing.grid_points", &self.grid_points),
            ("pricing.domain_mult", &self.domain_mult),
            ("pricing.grad_tol", &self.grad_tol),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }
}
