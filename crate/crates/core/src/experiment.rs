//! Treatment-cell experiments: design generation, simulation and the three
//! test statistics (cross-substitution rate, differential response rate,
//! shares ratio) with their qualitative readouts.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::demand::{aggregate_shares, ModelParams, MuQuadrature, PriceVector, ShareVector, Version};
use crate::error::{Error, Result};

/// Relative tolerance used when comparing prices across cells.
const PRICE_TOL: f64 = 1e-9;

/// Default half-width of the indeterminate band around `phi = 1`.
pub const DEFAULT_BAND: f64 = 0.05;

/// Two-sided 95% normal quantile used with count-based standard errors.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CellKind {
    Control,
    /// Only `target`'s price is cut, by `discount` times its control price.
    Partial { target: Version, discount: f64 },
    /// Both prices cut by the same absolute amount.
    Total { discount: f64 },
}

impl CellKind {
    pub fn name(&self) -> &'static str {
        match self {
            CellKind::Control => "control",
            CellKind::Partial { .. } => "partial",
            CellKind::Total { .. } => "total",
        }
    }

    fn check_discount(&self) -> Result<()> {
        let d = match *self {
            CellKind::Control => return Ok(()),
            CellKind::Partial { discount, .. } | CellKind::Total { discount } => discount,
        };
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::invalid(format!("discount fraction must lie in (0, 1), got {d}")));
        }
        Ok(())
    }
}

/// One experiment arm with its observed (or simulated) shares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCell {
    pub kind: CellKind,
    pub prices: PriceVector,
    pub shares: ShareVector,
    /// Number of consumers observed in the cell.
    pub count: Option<u64>,
}

impl TreatmentCell {
    pub fn new(kind: CellKind, prices: PriceVector, shares: ShareVector, count: Option<u64>) -> Result<Self> {
        kind.check_discount()?;
        prices.validate()?;
        shares.validate()?;
        Ok(TreatmentCell { kind, prices, shares, count })
    }

    /// Human-readable label such as `partial-1-30` or `total-60`.
    pub fn label(&self) -> String {
        let pct = |d: f64| (d * 100.0).round() as i64;
        match self.kind {
            CellKind::Control => "control".to_string(),
            CellKind::Partial { target, discount } => format!("partial-{}-{}", target.label(), pct(discount)),
            CellKind::Total { discount } => format!("total-{}", pct(discount)),
        }
    }
}

/// Price schedule of an experiment, before any shares are attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub control_prices: PriceVector,
    /// `(kind, prices)` for every arm, control first.
    pub cells: Vec<(CellKind, PriceVector)>,
}

/// Control cell plus one partial arm per `partial_discounts` entry (only
/// `partial_target` repriced) and one total arm per `total_discounts` entry.
///
/// Discounts are absolute: a partial cut is `fraction * control price of the
/// target`, a total cut is `fraction * min(control p1, control p2)` applied to both.
pub fn generate_design(
    control_prices: PriceVector,
    partial_discounts: &[f64],
    total_discounts: &[f64],
    partial_target: Version,
) -> Result<ExperimentDesign> {
    control_prices.validate()?;
    let mut cells = vec![(CellKind::Control, control_prices)];
    for &discount in partial_discounts {
        let kind = CellKind::Partial { target: partial_target, discount };
        kind.check_discount()?;
        let base = control_prices.get(partial_target);
        cells.push((kind, control_prices.with(partial_target, base - discount * base)));
    }
    for &discount in total_discounts {
        let kind = CellKind::Total { discount };
        kind.check_discount()?;
        let cut = discount * control_prices.p1.min(control_prices.p2);
        cells.push((kind, control_prices.shifted(-cut)));
    }
    Ok(ExperimentDesign { control_prices, cells })
}

impl ExperimentDesign {
    /// Exact model shares for every arm.
    pub fn simulate(&self, params: &ModelParams, quad: &MuQuadrature) -> Result<Vec<TreatmentCell>> {
        self.cells
            .iter()
            .map(|(kind, prices)| {
                let shares = aggregate_shares(params, prices, quad)?;
                Ok(TreatmentCell { kind: *kind, prices: *prices, shares, count: None })
            })
            .collect()
    }
}

/// Draws `count` consumers from `shares` and returns the empirical shares.
pub fn sample_shares<R: Rng + ?Sized>(shares: &ShareVector, count: u64, rng: &mut R) -> Result<ShareVector> {
    shares.validate()?;
    if count == 0 {
        return Err(Error::invalid("sample count must be positive".to_string()));
    }
    let [n1, n2, _] = multinomial3(count, [shares.s1, shares.s2, shares.s0], rng);
    let n = count as f64;
    let (s1, s2) = (n1 as f64 / n, n2 as f64 / n);
    Ok(ShareVector { s1, s2, s0: 1.0 - s1 - s2 })
}

/// Multinomial draw over three categories by sequential binomials.
pub(crate) fn multinomial3<R: Rng + ?Sized>(n: u64, p: [f64; 3], rng: &mut R) -> [u64; 3] {
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let n1 = Binomial::new(n, clamp(p[0])).map(|d| d.sample(rng)).unwrap_or(0);
    let rest = 1.0 - p[0];
    let q = if rest > 0.0 { clamp(p[1] / rest) } else { 0.0 };
    let n2 = Binomial::new(n - n1, q).map(|d| d.sample(rng)).unwrap_or(0);
    [n1, n2, n - n1 - n2]
}

fn same_price(x: f64, y: f64) -> bool {
    (x - y).abs() <= PRICE_TOL * x.abs().max(y.abs()).max(1.0)
}

/// The single version whose price differs between two cells.
pub fn repriced_version(a: &TreatmentCell, b: &TreatmentCell) -> Result<Version> {
    let d1 = !same_price(a.prices.p1, b.prices.p1);
    let d2 = !same_price(a.prices.p2, b.prices.p2);
    match (d1, d2) {
        (true, false) => Ok(Version::One),
        (false, true) => Ok(Version::Two),
        (true, true) => Err(Error::InvalidPairing("cells differ in both prices".into())),
        (false, false) => Err(Error::InvalidPairing("cells have identical prices".into())),
    }
}

/// Cross-substitution rate between two cells that differ only in `p_k`:
/// `(s_k'(treated) - s_k'(base)) / (s_k(base) - s_k(treated))`.
///
/// The value does not depend on which of the two cells is passed as `base`.
/// Negative values are returned as-is; see [`is_anomalous_psi`].
pub fn cross_substitution_rate(base: &TreatmentCell, treated: &TreatmentCell) -> Result<f64> {
    let k = repriced_version(base, treated)?;
    let other = k.other();
    let den = base.shares.get(k) - treated.shares.get(k);
    if den == 0.0 {
        return Err(Error::DegenerateTreatment(format!(
            "share of version {} is identical in both cells",
            k.label()
        )));
    }
    Ok((treated.shares.get(other) - base.shares.get(other)) / den)
}

/// True when `psi` lies outside the behaviourally meaningful range `[0, 1]`.
pub fn is_anomalous_psi(psi: f64) -> bool {
    !(0.0..=1.0).contains(&psi)
}

/// Plain-logit cross-substitution rate `s_k' / (1 - s_k)` at the base cell.
pub fn logit_benchmark(base: &TreatmentCell, k: Version) -> Result<f64> {
    base.shares.validate()?;
    let sk = base.shares.get(k);
    if sk >= 1.0 {
        return Err(Error::Singular(format!("s{} = 1 leaves no room for substitution", k.label())));
    }
    Ok(base.shares.get(k.other()) / (1.0 - sk))
}

/// Uniform shift `r` with `base = discounted + r` on both prices.
pub fn uniform_shift(discounted: &TreatmentCell, base: &TreatmentCell) -> Result<f64> {
    let r1 = base.prices.p1 - discounted.prices.p1;
    let r2 = base.prices.p2 - discounted.prices.p2;
    if !same_price(base.prices.p1 - r2, discounted.prices.p1) {
        return Err(Error::InvalidPairing(format!(
            "price changes differ across versions ({r1} vs {r2}); not a total-market pairing"
        )));
    }
    if r1 <= 0.0 || same_price(base.prices.p1, discounted.prices.p1) {
        return Err(Error::InvalidPairing(format!(
            "base prices must exceed the discounted prices (shift {r1})"
        )));
    }
    Ok(r1)
}

/// Differential response rate `[s1/s2](discounted) / [s1/s2](base)`.
pub fn differential_response_rate(discounted: &TreatmentCell, base: &TreatmentCell) -> Result<f64> {
    uniform_shift(discounted, base)?;
    for (name, c) in [("discounted", discounted), ("base", base)] {
        if c.shares.s1 <= 0.0 || c.shares.s2 <= 0.0 {
            return Err(Error::Singular(format!("{name} cell has a zero inside share")));
        }
    }
    Ok((discounted.shares.s1 / discounted.shares.s2) / (base.shares.s1 / base.shares.s2))
}

/// Delta-method standard error of `ln phi` from the cell counts, if both are known.
///
/// Each cell contributes `1/(n s1) + 1/(n s2)` to the variance of `ln(s1/s2)`.
pub fn ln_phi_std_error(discounted: &TreatmentCell, base: &TreatmentCell) -> Option<f64> {
    let var = |c: &TreatmentCell| {
        let n = c.count? as f64;
        (n > 0.0 && c.shares.s1 > 0.0 && c.shares.s2 > 0.0)
            .then(|| 1.0 / (n * c.shares.s1) + 1.0 / (n * c.shares.s2))
    };
    Some((var(discounted)? + var(base)?).sqrt())
}

/// Vertical-versus-horizontal gauge `s1 / s2` at an equal-price cell.
pub fn shares_ratio(cell: &TreatmentCell) -> Result<f64> {
    if !same_price(cell.prices.p1, cell.prices.p2) {
        return Err(Error::invalid(format!(
            "shares ratio needs equal prices, got ({}, {})",
            cell.prices.p1, cell.prices.p2
        )));
    }
    if cell.shares.s2 <= 0.0 {
        return Err(Error::Singular("s2 = 0".into()));
    }
    Ok(cell.shares.s1 / cell.shares.s2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma1Sign {
    Positive,
    Negative,
    Indeterminate,
}

impl Gamma1Sign {
    /// Pricing implication for the zero-cost case.
    pub fn readout(self) -> &'static str {
        match self {
            Gamma1Sign::Positive => "γ¹ > 0, expect p2* > p1*",
            Gamma1Sign::Negative => "γ¹ < 0, expect p1* > p2*",
            Gamma1Sign::Indeterminate => "γ¹ ≈ 0 / discrimination gain likely negligible",
        }
    }
}

/// Sign of `gamma1` implied by `phi` with a fixed band around one.
pub fn infer_gamma1_sign(phi: f64, tolerance_band: f64) -> Gamma1Sign {
    if phi > 1.0 + tolerance_band {
        Gamma1Sign::Positive
    } else if phi < 1.0 - tolerance_band {
        Gamma1Sign::Negative
    } else {
        Gamma1Sign::Indeterminate
    }
}

/// Sign test on `ln phi` with a `Z_95 * se` band.
pub fn infer_gamma1_sign_se(phi: f64, ln_se: f64) -> Gamma1Sign {
    let z = phi.ln() / ln_se;
    if z > Z_95 {
        Gamma1Sign::Positive
    } else if z < -Z_95 {
        Gamma1Sign::Negative
    } else {
        Gamma1Sign::Indeterminate
    }
}

/// One partial-market comparison against the control cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiRow {
    pub cell: String,
    pub repriced: Version,
    pub psi: f64,
    pub logit_benchmark: f64,
    pub anomalous: bool,
}

/// One total-market comparison against the control cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub cell: String,
    pub phi: f64,
    /// Standard error of `ln phi` when counts are available.
    pub ln_se: Option<f64>,
    pub sign: Gamma1Sign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub cell: String,
    pub ratio: f64,
}

/// All statistics for a set of cells, each non-control cell paired with the control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub psi: Vec<PsiRow>,
    pub phi: Vec<PhiRow>,
    pub ratios: Vec<RatioRow>,
    pub heterogeneity_readout: Option<String>,
    pub sign: Option<Gamma1Sign>,
    pub pricing_readout: Option<String>,
}

/// Computes every statistic the cells support. Requires exactly one control cell.
pub fn analyze_cells(cells: &[TreatmentCell], band: f64) -> Result<StatsReport> {
    let controls: Vec<_> = cells.iter().filter(|c| c.kind == CellKind::Control).collect();
    let control = match controls.as_slice() {
        [c] => *c,
        [] => return Err(Error::invalid("data contain no control cell".to_string())),
        _ => return Err(Error::invalid("data contain more than one control cell".to_string())),
    };
    let mut psi = Vec::new();
    let mut phi = Vec::new();
    let mut ratios = Vec::new();
    for cell in cells {
        if same_price(cell.prices.p1, cell.prices.p2) {
            ratios.push(RatioRow { cell: cell.label(), ratio: shares_ratio(cell)? });
        }
        match cell.kind {
            CellKind::Control => {}
            CellKind::Partial { .. } => {
                let k = repriced_version(control, cell)?;
                let value = cross_substitution_rate(control, cell)?;
                psi.push(PsiRow {
                    cell: cell.label(),
                    repriced: k,
                    psi: value,
                    logit_benchmark: logit_benchmark(control, k)?,
                    anomalous: is_anomalous_psi(value),
                });
            }
            CellKind::Total { .. } => {
                let value = differential_response_rate(cell, control)?;
                let ln_se = ln_phi_std_error(cell, control);
                let sign = match ln_se {
                    Some(se) => infer_gamma1_sign_se(value, se),
                    None => infer_gamma1_sign(value, band),
                };
                phi.push(PhiRow { cell: cell.label(), phi: value, ln_se, sign });
            }
        }
    }
    let heterogeneity_readout = (!psi.is_empty()).then(|| {
        let above = psi.iter().filter(|r| r.psi > r.logit_benchmark).count();
        if above == psi.len() {
            "ψ exceeds the logit benchmark: σ_μ > 0".to_string()
        } else if above == 0 {
            "ψ does not exceed the logit benchmark: no evidence of σ_μ > 0".to_string()
        } else {
            format!("ψ exceeds the logit benchmark in {above} of {} tests: mixed evidence on σ_μ", psi.len())
        }
    });
    let sign = combine_signs(phi.iter().map(|r| r.sign));
    let pricing_readout = sign.map(|s| match s {
        Some(s) => s.readout().to_string(),
        None => "total-market tests disagree on the sign of γ¹".to_string(),
    });
    Ok(StatsReport { psi, phi, ratios, heterogeneity_readout, sign: sign.flatten(), pricing_readout })
}

/// `None` with no tests, `Some(None)` when definite signs conflict. Indeterminate
/// results defer to any definite sign.
fn combine_signs(signs: impl Iterator<Item = Gamma1Sign>) -> Option<Option<Gamma1Sign>> {
    let mut seen = None;
    let mut definite = None;
    for s in signs {
        seen = Some(());
        if s == Gamma1Sign::Indeterminate {
            continue;
        }
        match definite {
            None => definite = Some(s),
            Some(d) if d != s => return Some(None),
            _ => {}
        }
    }
    seen.map(|_| Some(definite.unwrap_or(Gamma1Sign::Indeterminate)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(kind: CellKind, p: (f64, f64), s: (f64, f64), n: Option<u64>) -> TreatmentCell {
        TreatmentCell::new(kind, PriceVector::new(p.0, p.1), ShareVector::from_inside(s.0, s.1).unwrap(), n).unwrap()
    }

    fn control(s: (f64, f64)) -> TreatmentCell {
        cell(CellKind::Control, (100.0, 100.0), s, None)
    }

    fn partial(d: f64, s: (f64, f64)) -> TreatmentCell {
        cell(CellKind::Partial { target: Version::One, discount: d }, (100.0 * (1.0 - d), 100.0), s, None)
    }

    fn total(d: f64, s: (f64, f64)) -> TreatmentCell {
        cell(CellKind::Total { discount: d }, (100.0 * (1.0 - d), 100.0 * (1.0 - d)), s, None)
    }

    #[test]
    fn psi_airline_control_vs_yes60() {
        let psi = cross_substitution_rate(&control((0.0104, 0.0457)), &partial(0.6, (0.0190, 0.0440))).unwrap();
        assert!((psi - 0.0017 / 0.0086).abs() < 1e-12);
        assert!((psi - 0.20).abs() < 0.005);
    }

    #[test]
    fn psi_is_orientation_free_and_zero_without_response() {
        let a = control((0.2, 0.3));
        let b = partial(0.3, (0.25, 0.3));
        assert_eq!(cross_substitution_rate(&a, &b).unwrap(), 0.0);
        let c = partial(0.3, (0.25, 0.28));
        assert_eq!(cross_substitution_rate(&a, &c).unwrap(), cross_substitution_rate(&c, &a).unwrap());
    }

    #[test]
    fn psi_pairing_errors() {
        let a = control((0.2, 0.3));
        assert!(matches!(
            cross_substitution_rate(&a, &total(0.3, (0.25, 0.35))),
            Err(Error::InvalidPairing(_))
        ));
        assert!(matches!(
            cross_substitution_rate(&a, &partial(0.3, (0.2, 0.35))),
            Err(Error::DegenerateTreatment(_))
        ));
    }

    #[test]
    fn benchmark_arithmetic() {
        let b = logit_benchmark(&control((0.0104, 0.0457)), Version::One).unwrap();
        assert!((b - 0.0457 / 0.9896).abs() < 1e-15);
        assert_eq!(logit_benchmark(&control((0.3, 0.0)), Version::One).unwrap(), 0.0);
        let s = 0.2;
        assert!((logit_benchmark(&control((s, s)), Version::Two).unwrap() - s / (1.0 - s)).abs() < 1e-15);
        let full = TreatmentCell {
            kind: CellKind::Control,
            prices: PriceVector::uniform(1.0),
            shares: ShareVector { s1: 1.0, s2: 0.0, s0: 0.0 },
            count: None,
        };
        assert!(matches!(logit_benchmark(&full, Version::One), Err(Error::Singular(_))));
    }

    #[test]
    fn phi_scenarios() {
        let phi1 = differential_response_rate(&total(0.3, (0.0296, 0.8130)), &control((0.0014, 0.4484))).unwrap();
        assert!((phi1 - 11.66).abs() < 0.01);
        assert_eq!(infer_gamma1_sign(phi1, DEFAULT_BAND), Gamma1Sign::Positive);
        let phi2 = differential_response_rate(&total(0.3, (0.0857, 0.9140)), &control((0.0767, 0.4149))).unwrap();
        assert!((phi2 - 0.507).abs() < 0.001);
        assert_eq!(infer_gamma1_sign(phi2, DEFAULT_BAND), Gamma1Sign::Negative);
        assert_eq!(infer_gamma1_sign(1.0, DEFAULT_BAND), Gamma1Sign::Indeterminate);
    }

    #[test]
    fn phi_pairing_errors() {
        let base = control((0.2, 0.3));
        assert!(matches!(
            differential_response_rate(&partial(0.3, (0.25, 0.3)), &base),
            Err(Error::InvalidPairing(_))
        ));
        assert!(matches!(
            differential_response_rate(&base, &total(0.3, (0.25, 0.3))),
            Err(Error::InvalidPairing(_))
        ));
        assert!(matches!(
            differential_response_rate(&total(0.3, (0.0, 0.3)), &base),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn ratio_airline_control() {
        let r = shares_ratio(&control((0.0104, 0.0457))).unwrap();
        assert!((r - 0.228).abs() < 0.0005);
        assert!(shares_ratio(&partial(0.3, (0.1, 0.2))).is_err());
    }

    #[test]
    fn design_five_cells() {
        let d = generate_design(PriceVector::uniform(100.0), &[0.3, 0.6], &[0.3, 0.6], Version::One).unwrap();
        let prices: Vec<_> = d.cells.iter().map(|c| c.1.as_array()).collect();
        let expected = [[100.0, 100.0], [70.0, 100.0], [40.0, 100.0], [70.0, 70.0], [40.0, 40.0]];
        assert_eq!(prices.len(), 5);
        for (p, e) in prices.iter().zip(expected) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
        let only = generate_design(PriceVector::uniform(100.0), &[], &[], Version::One).unwrap();
        assert_eq!(only.cells.len(), 1);
        assert!(generate_design(PriceVector::uniform(100.0), &[1.2], &[], Version::One).is_err());
    }

    #[test]
    fn relative_and_absolute_total_discounts_coincide_at_equal_prices() {
        let d = generate_design(PriceVector::uniform(80.0), &[], &[0.25], Version::Two).unwrap();
        let p = d.cells[1].1;
        assert_eq!(p.p1, 80.0 * 0.75);
        assert_eq!(p.p2, 80.0 * 0.75);
    }

    #[test]
    fn airline_counts_make_total_tests_indeterminate() {
        let base = cell(CellKind::Control, (100.0, 100.0), (0.0104, 0.0457), Some(16487));
        let t30 = cell(CellKind::Total { discount: 0.3 }, (70.0, 70.0), (0.0125, 0.0498), Some(14669));
        let phi = differential_response_rate(&t30, &base).unwrap();
        assert!((phi - 1.103).abs() < 0.001);
        let se = ln_phi_std_error(&t30, &base).unwrap();
        assert!((se - 0.118).abs() < 0.002);
        assert_eq!(infer_gamma1_sign_se(phi, se), Gamma1Sign::Indeterminate);
        assert!(ln_phi_std_error(&total(0.3, (0.0125, 0.0498)), &base).is_none());
    }

    #[test]
    fn control_only_report_has_ratios_only() {
        let r = analyze_cells(&[control((0.1, 0.2))], DEFAULT_BAND).unwrap();
        assert!(r.psi.is_empty() && r.phi.is_empty());
        assert_eq!(r.ratios.len(), 1);
        assert!(r.pricing_readout.is_none());
        assert!(analyze_cells(&[partial(0.3, (0.1, 0.2))], DEFAULT_BAND).is_err());
    }

    #[test]
    fn combined_signs() {
        use Gamma1Sign::*;
        assert_eq!(combine_signs([].into_iter()), None);
        assert_eq!(combine_signs([Indeterminate, Positive].into_iter()), Some(Some(Positive)));
        assert_eq!(combine_signs([Indeterminate, Indeterminate].into_iter()), Some(Some(Indeterminate)));
        assert_eq!(combine_signs([Negative, Positive].into_iter()), Some(None));
    }

    #[test]
    fn sampling_is_seeded_and_consistent() {
        let s = ShareVector::from_inside(0.2, 0.3).unwrap();
        let a = sample_shares(&s, 1000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_shares(&s, 1000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
        let big = sample_shares(&s, 10_000_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let se = (0.2f64 * 0.8 / 1e7).sqrt();
        assert!((big.s1 - 0.2).abs() < 3.0 * se);
        assert!(sample_shares(&s, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
