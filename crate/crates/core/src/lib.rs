//! Two-version random-coefficient logit toolkit for versioning and
//! second-degree price discrimination.
//!
//! The crate covers the whole pipeline: demand evaluation ([`demand`]), the
//! closed-form vertical benchmark ([`theory`]), experiment statistics from
//! treatment cells ([`experiment`]), nested fixed point estimation
//! ([`estimator`]) and monopoly pricing with welfare accounting ([`pricing`]).
//! Cell-share CSV files and bundled datasets live in [`io`].

pub mod demand;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod optim;
pub mod pricing;
pub mod theory;

pub use demand::{
    aggregate_shares, conditional_shares, make_quadrature, profit, profit_gradient, welfare, ModelParams,
    MuDistribution, MuQuadrature, PriceVector, ShareVector, Version, WelfareReport, DEFAULT_NODES,
};
pub use error::{Error, Result};
pub use estimator::{estimate, EstimationConfig, EstimationResult, MarketObservation};
pub use experiment::{CellKind, ExperimentDesign, TreatmentCell};
pub use pricing::{counterfactual_report, optimize_prices, optimize_uniform, CounterfactualReport, PricingSolution};
