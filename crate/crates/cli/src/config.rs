//! Run configuration: built-in defaults, then a config file of flat dotted
//! keys, then command-line flags.
//!
//! The file is TOML; `estimator.starts = 8` and an `[estimator]` table with
//! `starts = 8` are equivalent. Every key has a flag of the same meaning.

use std::collections::BTreeMap;
use std::path::Path;

use tierprice::estimator::{EstimationConfig, InversionMethod};
use tierprice::experiment::DEFAULT_BAND;
use tierprice::pricing::PricingOptions;
use tierprice::{ModelParams, MuDistribution, PriceVector, Version, DEFAULT_NODES};

use crate::CliError;

/// `(key, flag)` for every configuration entry.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "--seed"),
    ("quad.nodes", "--quad-nodes"),
    ("quad.dist", "--mu-dist"),
    ("output.format", "--format"),
    ("output.path", "--out"),
    ("params.a", "--a"),
    ("params.b", "--b"),
    ("params.gamma0", "--gamma0"),
    ("params.gamma1", "--gamma1"),
    ("params.sigma_mu", "--sigma-mu"),
    ("params.c1", "--c1"),
    ("params.c2", "--c2"),
    ("design.control", "--control"),
    ("design.partial", "--partial"),
    ("design.total", "--total"),
    ("design.target", "--target"),
    ("design.count", "--count"),
    ("stats.band", "--band"),
    ("estimator.starts", "--starts"),
    ("estimator.contraction_tol", "--contraction-tol"),
    ("estimator.contraction_max_iter", "--contraction-max-iter"),
    ("estimator.inversion", "--inversion"),
    ("estimator.sigma_max", "--sigma-max"),
    ("estimator.gamma1_min", "--gamma1-min"),
    ("estimator.gamma1_max", "--gamma1-max"),
    ("estimator.bootstrap", "--bootstrap"),
    ("pricing.data_prices", "--data-prices"),
    ("pricing.grid_points", "--grid-points"),
    ("pricing.domain_mult", "--domain-mult"),
    ("pricing.grad_tol", "--grad-tol"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Json,
}

/// Raw `key -> value` layer before typing.
pub type Layer = BTreeMap<String, String>;

fn check_key(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown configuration key '{key}'")))
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Layer) -> Result<(), CliError> {
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            toml::Value::Boolean(b) => Ok(b.to_string()),
            other => Err(CliError::Config(format!("key '{prefix}': unsupported value {other}"))),
        }
    };
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
        }
        toml::Value::Array(items) => {
            check_key(prefix)?;
            let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
            out.insert(prefix.to_string(), parts.join(","));
        }
        v => {
            check_key(prefix)?;
            out.insert(prefix.to_string(), scalar(v)?);
        }
    }
    Ok(())
}

/// Parses config file text into a flat layer, rejecting unknown keys.
pub fn parse_file_layer(text: &str) -> Result<Layer, CliError> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let mut out = Layer::new();
    flatten("", &toml::Value::Table(value), &mut out)?;
    Ok(out)
}

pub fn read_file_layer(path: &Path) -> Result<Layer, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_file_layer(&text)
}

/// Fully typed settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub quad_nodes: usize,
    /// `None` lets the command choose (uniform, or normal for bundled datasets).
    pub mu_dist: Option<MuDistribution>,
    pub format: OutputFormat,
    pub out: Option<String>,
    pub params: ParamsLayer,
    pub control: PriceVector,
    pub partial: Vec<f64>,
    pub total: Vec<f64>,
    pub target: Version,
    pub count: Option<u64>,
    pub band: f64,
    pub estimator: EstimationConfig,
    pub bootstrap: usize,
    pub data_prices: Option<PriceVector>,
    pub pricing: PricingOptions,
}

/// Model parameters given piecewise; complete only when all five are set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamsLayer {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub gamma0: Option<f64>,
    pub gamma1: Option<f64>,
    pub sigma_mu: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl ParamsLayer {
    pub fn is_empty(&self) -> bool {
        *self == ParamsLayer::default()
    }

    /// Fills unset fields from `base` (if any) and validates.
    pub fn resolve(&self, base: Option<&ModelParams>) -> Result<ModelParams, CliError> {
        let pick = |v: Option<f64>, b: Option<f64>, name: &str| {
            v.or(b).ok_or_else(|| CliError::Config(format!("missing model parameter params.{name}")))
        };
        let p = ModelParams::new(
            pick(self.a, base.map(|p| p.a), "a")?,
            pick(self.b, base.map(|p| p.b), "b")?,
            pick(self.gamma0, base.map(|p| p.gamma0), "gamma0")?,
            pick(self.gamma1, base.map(|p| p.gamma1), "gamma1")?,
            pick(self.sigma_mu, base.map(|p| p.sigma_mu), "sigma_mu")?,
        )?;
        let c1 = self.c1.or(base.map(|p| p.costs[0])).unwrap_or(0.0);
        let c2 = self.c2.or(base.map(|p| p.costs[1])).unwrap_or(0.0);
        Ok(p.with_costs(c1, c2)?)
    }
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("{key} = '{value}': expected {what}"))
}

fn real(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn natural<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse::<T>().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn reals(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| real(key, x)).collect()
}

fn price_pair(key: &str, v: &str) -> Result<PriceVector, CliError> {
    match reals(key, v)?.as_slice() {
        [p1, p2] => Ok(PriceVector::new(*p1, *p2)),
        _ => Err(bad(key, v, "two comma-separated prices")),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            quad_nodes: DEFAULT_NODES,
            mu_dist: None,
            format: OutputFormat::Table,
            out: None,
            params: ParamsLayer::default(),
            control: PriceVector::uniform(100.0),
            partial: vec![0.3, 0.6],
            total: vec![0.3, 0.6],
            target: Version::One,
            count: None,
            band: DEFAULT_BAND,
            estimator: EstimationConfig::default(),
            bootstrap: 0,
            data_prices: None,
            pricing: PricingOptions::default(),
        }
    }
}

impl RunConfig {
    /// Applies layers in order; later layers win.
    pub fn from_layers(layers: &[Layer]) -> Result<Self, CliError> {
        let mut merged = Layer::new();
        for layer in layers {
            for (k, v) in layer {
                check_key(k)?;
                merged.insert(k.clone(), v.clone());
            }
        }
        let mut c = RunConfig::default();
        for (key, v) in &merged {
            let k = key.as_str();
            match k {
                "seed" => c.seed = natural(k, v)?,
                "quad.nodes" => c.quad_nodes = natural(k, v)?,
                "quad.dist" => c.mu_dist = Some(MuDistribution::parse(v)?),
                "output.format" => {
                    c.format = match v.trim() {
                        "table" => OutputFormat::Table,
                        "json" => OutputFormat::Json,
                        _ => return Err(bad(k, v, "table or json")),
                    }
                }
                "output.path" => c.out = Some(v.clone()),
                "params.a" => c.params.a = Some(real(k, v)?),
                "params.b" => c.params.b = Some(real(k, v)?),
                "params.gamma0" => c.params.gamma0 = Some(real(k, v)?),
                "params.gamma1" => c.params.gamma1 = Some(real(k, v)?),
                "params.sigma_mu" => c.params.sigma_mu = Some(real(k, v)?),
                "params.c1" => c.params.c1 = Some(real(k, v)?),
                "params.c2" => c.params.c2 = Some(real(k, v)?),
                "design.control" => c.control = price_pair(k, v)?,
                "design.partial" => c.partial = reals(k, v)?,
                "design.total" => c.total = reals(k, v)?,
                "design.target" => {
                    c.target = Version::from_label(natural(k, v)?).map_err(|_| bad(k, v, "1 or 2"))?;
                }
                "design.count" => c.count = Some(natural(k, v)?),
                "stats.band" => c.band = real(k, v)?,
                "estimator.starts" => c.estimator.outer_starts = natural(k, v)?,
                "estimator.contraction_tol" => c.estimator.contraction_tol = real(k, v)?,
                "estimator.contraction_max_iter" => c.estimator.contraction_max_iter = natural(k, v)?,
                "estimator.inversion" => {
                    c.estimator.inversion = match v.trim() {
                        "hybrid" => InversionMethod::Hybrid,
                        "contraction" => InversionMethod::Contraction,
                        _ => return Err(bad(k, v, "hybrid or contraction")),
                    }
                }
                "estimator.sigma_max" => c.estimator.sigma_bounds.1 = real(k, v)?,
                "estimator.gamma1_min" => c.estimator.gamma1_bounds.0 = real(k, v)?,
                "estimator.gamma1_max" => c.estimator.gamma1_bounds.1 = real(k, v)?,
                "estimator.bootstrap" => c.bootstrap = natural(k, v)?,
                "pricing.data_prices" => c.data_prices = Some(price_pair(k, v)?),
                "pricing.grid_points" => c.pricing.grid_points = natural(k, v)?,
                "pricing.domain_mult" => c.pricing.domain_mult = real(k, v)?,
                "pricing.grad_tol" => c.pricing.grad_tol = real(k, v)?,
                _ => unreachable!("key list and match arms out of sync: {k}"),
            }
        }
        c.estimator.seed = c.seed;
        c.estimator.quad_nodes = c.quad_nodes;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.band >= 0.0) {
            return Err(CliError::Config(format!("stats.band must be non-negative, got {}", self.band)));
        }
        if self.count == Some(0) {
            return Err(CliError::Config("design.count must be positive".into()));
        }
        self.estimator.validate()?;
        self.pricing.validate()?;
        self.control.validate()?;
        Ok(())
    }

    /// Estimator settings with the distribution resolved.
    pub fn estimation(&self, fallback: MuDistribution) -> EstimationConfig {
        EstimationConfig { mu_dist: self.mu_dist.unwrap_or(fallback), ..self.estimator.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_keys_flatten_both_ways() {
        let a = parse_file_layer("estimator.starts = 8\nseed = 3\ndesign.partial = [0.2, 0.4]\n").unwrap();
        let b = parse_file_layer("seed = 3\n[estimator]\nstarts = 8\n[design]\npartial = [0.2, 0.4]\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a["design.partial"], "0.2,0.4");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_file_layer("estimator.startz = 8\n").is_err());
        assert!(RunConfig::from_layers(&[layer(&[("nope", "1")])]).is_err());
    }

    #[test]
    fn later_layers_override() {
        let file = layer(&[("seed", "3"), ("estimator.starts", "4")]);
        let flags = layer(&[("seed", "9")]);
        let c = RunConfig::from_layers(&[file, flags]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.estimator.seed, 9);
        assert_eq!(c.estimator.outer_starts, 4);
    }

    #[test]
    fn every_key_parses() {
        let values = [
            ("seed", "1"),
            ("quad.nodes", "31"),
            ("quad.dist", "normal"),
            ("output.format", "json"),
            ("output.path", "x.json"),
            ("params.a", "1"),
            ("params.b", "1"),
            ("params.gamma0", "0.5"),
            ("params.gamma1", "0.2"),
            ("params.sigma_mu", "1"),
            ("params.c1", "0.1"),
            ("params.c2", "0.2"),
            ("design.control", "10,12"),
            ("design.partial", "0.5"),
            ("design.total", ""),
            ("design.target", "2"),
            ("design.count", "1000"),
            ("stats.band", "0.1"),
            ("estimator.starts", "4"),
            ("estimator.contraction_tol", "1e-12"),
            ("estimator.contraction_max_iter", "100"),
            ("estimator.inversion", "contraction"),
            ("estimator.sigma_max", "10"),
            ("estimator.gamma1_min", "-2"),
            ("estimator.gamma1_max", "2"),
            ("estimator.bootstrap", "5"),
            ("pricing.data_prices", "1,2"),
            ("pricing.grid_points", "2"),
            ("pricing.domain_mult", "5"),
            ("pricing.grad_tol", "1e-7"),
        ];
        assert_eq!(values.len(), KEYS.len());
        let c = RunConfig::from_layers(&[layer(&values)]).unwrap();
        assert_eq!(c.target, Version::Two);
        assert!(c.total.is_empty());
        assert_eq!(c.params.resolve(None).unwrap().costs, [0.1, 0.2]);
    }

    #[test]
    fn bad_values_named() {
        let e = RunConfig::from_layers(&[layer(&[("params.a", "x")])]).unwrap_err();
        assert!(e.to_string().contains("params.a"));
        assert!(RunConfig::from_layers(&[layer(&[("design.control", "1")])]).is_err());
        assert!(RunConfig::from_layers(&[layer(&[("estimator.starts", "0")])]).is_err());
    }

    #[test]
    fn missing_params_named() {
        let e = ParamsLayer { a: Some(1.0), ..Default::default() }.resolve(None).unwrap_err();
        assert!(e.to_string().contains("params.b"));
    }
}
