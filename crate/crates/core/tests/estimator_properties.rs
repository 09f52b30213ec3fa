mod common;

use common::{draw, signed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tierprice::estimator::{
    berry_inversion, bootstrap_std_errors, estimate, inversion_trace, predict_shares, EstimationConfig, InversionMethod,
    MeanUtilities, Problem,
};
use tierprice::io::{dataset, observations};
use tierprice::{
    aggregate_shares, MarketObservation, ModelParams, MuDistribution, MuQuadrature, PriceVector, Version,
};

const DESIGN: [(f64, f64); 5] = [(1.0, 1.0), (0.7, 1.0), (0.4, 1.0), (0.7, 0.7), (0.4, 0.4)];

fn synthetic(p: &ModelParams, prices: &[(f64, f64)], dist: MuDistribution, count: Option<u64>) -> Vec<MarketObservation> {
    let q = MuQuadrature::new(dist, p.sigma_mu, 101).unwrap();
    prices
        .iter()
        .enumerate()
        .flat_map(|(m, &(p1, p2))| {
            let s = aggregate_shares(p, &PriceVector::new(p1, p2), &q).unwrap();
            let id = format!("m{m}");
            [(Version::One, p1, s.s1), (Version::Two, p2, s.s2)].map(|(version, price, share)| MarketObservation {
                market_id: id.clone(),
                version,
                price,
                share,
                count,
            })
        })
        .collect()
}

fn random_truth(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams::new(
        draw(rng, -0.5, 1.5),
        draw(rng, 0.5, 2.0),
        draw(rng, 0.0, 1.0),
        signed(rng, 0.1, 0.8),
        draw(rng, 0.5, 2.5),
    )
    .unwrap()
}

fn unit_quad(dist: MuDistribution) -> MuQuadrature {
    MuQuadrature::new(dist, 1.0, 101).unwrap()
}

#[test]
fn inversion_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = EstimationConfig::default();
    for dist in [MuDistribution::Uniform, MuDistribution::Normal] {
        let quad = unit_quad(dist);
        for _ in 0..50 {
            let delta = MeanUtilities { delta: (0..4).map(|_| [draw(&mut rng, -4.0, 2.0), draw(&mut rng, -4.0, 2.0)]).collect() };
            let sigma = draw(&mut rng, 0.0, 4.0);
            let gamma1 = draw(&mut rng, -1.5, 1.5);
            let shares = predict_shares(&delta, sigma, gamma1, &quad).unwrap();
            let inv = berry_inversion(&shares, sigma, gamma1, &quad, &cfg).unwrap();
            for (d, e) in inv.delta.delta.iter().zip(&delta.delta) {
                assert!((d[0] - e[0]).abs() <= 1e-10 && (d[1] - e[1]).abs() <= 1e-10, "{d:?} vs {e:?}");
            }
            let back = predict_shares(&inv.delta, sigma, gamma1, &quad).unwrap();
            for (s, t) in back.iter().zip(&shares) {
                for k in 0..2 {
                    assert!((s[k].ln() - t[k].ln()).abs() <= cfg.contraction_tol);
                }
            }
        }
    }
}

#[test]
fn contraction_residual_decreases_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = EstimationConfig { inversion: InversionMethod::Contraction, ..Default::default() };
    let quad = unit_quad(MuDistribution::Uniform);
    for _ in 0..30 {
        let s1 = draw(&mut rng, 0.01, 0.5);
        let s2 = draw(&mut rng, 0.01, 0.95 - s1);
        let traces = inversion_trace(&[[s1, s2]], draw(&mut rng, 0.1, 3.0), draw(&mut rng, -0.9, 0.9), &quad, &cfg).unwrap();
        for w in traces[0].windows(2) {
            // equality only once the residual reaches rounding level
            assert!(w[1] < w[0] || w[1] <= 1e-14, "{} -> {}", w[0], w[1]);
        }
        assert!(*traces[0].last().unwrap() <= cfg.contraction_tol);
    }
}

#[test]
fn contraction_and_hybrid_agree() {
    let quad = unit_quad(MuDistribution::Normal);
    let observed = [[0.0104, 0.0457], [0.3, 0.4], [0.02, 0.9]];
    let a = berry_inversion(&observed, 2.0, 0.3, &quad, &EstimationConfig::default()).unwrap();
    let cfg = EstimationConfig { inversion: InversionMethod::Contraction, ..Default::default() };
    let b = berry_inversion(&observed, 2.0, 0.3, &quad, &cfg).unwrap();
    for (x, y) in a.delta.delta.iter().zip(&b.delta.delta) {
        assert!((x[0] - y[0]).abs() <= 1e-11 && (x[1] - y[1]).abs() <= 1e-11);
    }
    assert!(a.iterations.iter().sum::<usize>() < b.iterations.iter().sum::<usize>());
}

#[test]
fn predict_monotone_in_own_delta() {
    let quad = unit_quad(MuDistribution::Uniform);
    let base = MeanUtilities { delta: vec![[0.0, 0.5]] };
    let up = MeanUtilities { delta: vec![[0.3, 0.5]] };
    let s = predict_shares(&base, 1.5, 0.4, &quad).unwrap()[0];
    let t = predict_shares(&up, 1.5, 0.4, &quad).unwrap()[0];
    assert!(t[0] > s[0] && t[1] < s[1]);
}

#[test]
fn objective_at_truth_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dist in [MuDistribution::Uniform, MuDistribution::Normal] {
        for _ in 0..10 {
            let truth = random_truth(&mut rng);
            let cfg = EstimationConfig { mu_dist: dist, ..Default::default() };
            let problem = Problem::new(&synthetic(&truth, &DESIGN, dist, None), &cfg).unwrap();
            let obj = problem.objective(truth.sigma_mu, truth.gamma1).unwrap();
            assert!(obj <= 1e-10, "{obj:e}");
        }
    }
}

#[test]
fn noiseless_design_recovers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..6 {
        let truth = random_truth(&mut rng);
        let dist = if i % 2 == 0 { MuDistribution::Uniform } else { MuDistribution::Normal };
        let cfg = EstimationConfig { mu_dist: dist, ..Default::default() };
        let est = estimate(&synthetic(&truth, &DESIGN, dist, None), &cfg).unwrap();
        let p = est.params;
        for (name, got, want) in [
            ("a", p.a, truth.a),
            ("b", p.b, truth.b),
            ("gamma0", p.gamma0, truth.gamma0),
            ("sigma", p.sigma_mu, truth.sigma_mu),
            ("gamma1", p.gamma1, truth.gamma1),
        ] {
            assert!((got - want).abs() <= 1e-3, "draw {i} {name}: {got} vs {want}");
        }
        assert!(est.objective <= 1e-10);
        assert_eq!(est.xi.len(), DESIGN.len());
    }
}

#[test]
fn estimate_is_scale_equivariant() {
    let truth = ModelParams::new(1.0, 1.2, 0.6, 0.4, 1.5).unwrap();
    let lambda = 100.0;
    let scaled_truth = ModelParams { b: truth.b / lambda, ..truth };
    let scaled: Vec<(f64, f64)> = DESIGN.iter().map(|&(p1, p2)| (p1 * lambda, p2 * lambda)).collect();
    let cfg = EstimationConfig::default();
    let data = synthetic(&truth, &DESIGN, MuDistribution::Uniform, None);
    let scaled_data = synthetic(&scaled_truth, &scaled, MuDistribution::Uniform, None);
    for (x, y) in data.iter().zip(&scaled_data) {
        assert!((x.share - y.share).abs() <= 1e-14);
    }
    let e = estimate(&data, &cfg).unwrap().params;
    let f = estimate(&scaled_data, &cfg).unwrap().params;
    assert!((f.b * lambda - e.b).abs() <= 1e-6 * e.b);
    for (x, y) in [(e.a, f.a), (e.gamma0, f.gamma0), (e.sigma_mu, f.sigma_mu), (e.gamma1, f.gamma1)] {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
}

#[test]
fn estimate_is_deterministic() {
    let truth = ModelParams::new(0.5, 1.0, 0.4, -0.3, 1.2).unwrap();
    let data = synthetic(&truth, &DESIGN, MuDistribution::Normal, None);
    let cfg = EstimationConfig { mu_dist: MuDistribution::Normal, seed: 42, ..Default::default() };
    let a = estimate(&data, &cfg).unwrap();
    let b = estimate(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.params.a.to_bits(), b.params.a.to_bits());
}

#[test]
fn bootstrap_errors_vanish_with_huge_counts() {
    let truth = ModelParams::new(0.5, 1.0, 0.4, 0.3, 1.2).unwrap();
    let data = synthetic(&truth, &DESIGN, MuDistribution::Uniform, Some(10_000_000));
    let se = bootstrap_std_errors(&data, &EstimationConfig::default(), 8).unwrap();
    assert_eq!(se.failed_draws, 0);
    assert!(se.warning.is_none());
    for (name, v) in [("a", se.a), ("b", se.b), ("gamma0", se.gamma0), ("sigma", se.sigma_mu), ("gamma1", se.gamma1)] {
        assert!(v < 0.02, "{name}: {v}");
    }
    let small = synthetic(&truth, &DESIGN, MuDistribution::Uniform, Some(10_000));
    let loose = bootstrap_std_errors(&small, &EstimationConfig::default(), 8).unwrap();
    assert!(loose.sigma_mu > se.sigma_mu);
}

#[test]
fn single_bootstrap_draw_warns() {
    let truth = ModelParams::new(0.5, 1.0, 0.4, 0.3, 1.2).unwrap();
    let data = synthetic(&truth, &DESIGN, MuDistribution::Uniform, Some(50_000));
    let se = bootstrap_std_errors(&data, &EstimationConfig::default(), 1).unwrap();
    assert_eq!([se.a, se.b, se.gamma0, se.sigma_mu, se.gamma1], [0.0; 5]);
    assert!(se.warning.is_some());
}

fn scenario_estimate(name: &str) -> ModelParams {
    let data = observations(&dataset(name).unwrap().rows().unwrap()).unwrap();
    let cfg = EstimationConfig { mu_dist: MuDistribution::Normal, ..Default::default() };
    estimate(&data, &cfg).unwrap().params
}

fn within_pct(got: f64, want: f64, pct: f64) -> bool {
    (got - want).abs() <= pct / 100.0 * want.abs()
}

#[test]
fn scenario1_reference_estimates() {
    let p = scenario_estimate("scenario1");
    assert!(within_pct(p.gamma0, 4.26, 10.0), "{p:?}");
    assert!(within_pct(p.sigma_mu, 5.0, 10.0), "{p:?}");
    assert!(within_pct(p.gamma1, 0.6, 10.0), "{p:?}");
}

#[test]
fn scenario2_reference_estimates() {
    let p = scenario_estimate("scenario2");
    assert!(within_pct(p.gamma0, 5.2, 10.0), "{p:?}");
    assert!(within_pct(p.sigma_mu, 4.6, 10.0), "{p:?}");
    assert!(within_pct(p.gamma1, -0.73, 10.0), "{p:?}");
}
