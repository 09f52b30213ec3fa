//! Plain-text tables for every report.

use std::fmt::Write;

use tierprice::estimator::EstimationResult;
use tierprice::experiment::StatsReport;
use tierprice::io;
use tierprice::pricing::{CounterfactualReport, PricingRegime};

use crate::commands::{Report, ScenarioReport};
use crate::reference::{Check, CheckValue};
use crate::CliError;

/// Renders `report` for terminal output. `simulate` renders as CSV.
pub fn table(report: &Report) -> Result<String, CliError> {
    let mut out = String::new();
    match report {
        Report::Simulate(s) => {
            let mut buf = Vec::new();
            io::write_rows(&mut buf, &s.rows)?;
            out.push_str(&String::from_utf8_lossy(&buf));
        }
        Report::Stats(s) => {
            let _ = writeln!(out, "markets: {}", s.markets.join(", "));
            stats(&mut out, &s.stats);
        }
        Report::Estimate(e) => {
            let _ = writeln!(out, "baseline shift: {}", e.mu_dist.name());
            estimate(&mut out, &e.result);
        }
        Report::Optimize(o) => {
            let _ = writeln!(out, "baseline shift: {}", o.mu_dist.name());
            pricing(&mut out, &o.counterfactual);
        }
        Report::Scenario(s) => scenario(&mut out, s),
    }
    Ok(out)
}

fn stats(out: &mut String, s: &StatsReport) {
    if !s.psi.is_empty() {
        let _ = writeln!(out, "\ncross-substitution (ψ)");
        let _ = writeln!(out, "{:<16} {:>8} {:>10} {:>10}", "cell", "repriced", "ψ", "benchmark");
        for r in &s.psi {
            let flag = if r.anomalous { "  anomalous" } else { "" };
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>10.4} {:>10.4}{flag}",
                r.cell,
                format!("v{}", r.repriced.index() + 1),
                r.psi,
                r.logit_benchmark
            );
        }
    }
    if !s.phi.is_empty() {
        let _ = writeln!(out, "\ndifferential response (φ)");
        let _ = writeln!(out, "{:<16} {:>10} {:>10} {:>14}", "cell", "φ", "se(ln φ)", "sign");
        for r in &s.phi {
            let se = r.ln_se.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "{:<16} {:>10.4} {:>10} {:>14}", r.cell, r.phi, se, format!("{:?}", r.sign).to_lowercase());
        }
    }
    if !s.ratios.is_empty() {
        let _ = writeln!(out, "\nshare ratio s1/s2 at equal prices");
        for r in &s.ratios {
            let _ = writeln!(out, "{:<16} {:>10.4}", r.cell, r.ratio);
        }
    }
    if let Some(h) = &s.heterogeneity_readout {
        let _ = writeln!(out, "\nheterogeneity: {h}");
    }
    if let Some(p) = &s.pricing_readout {
        let _ = writeln!(out, "pricing: {p}");
    }
}

fn estimate(out: &mut String, r: &EstimationResult) {
    let p = &r.params;
    let se = r.std_errors.as_ref();
    let rows = [
        ("a", p.a, se.map(|s| s.a)),
        ("b", p.b, se.map(|s| s.b)),
        ("γ⁰", p.gamma0, se.map(|s| s.gamma0)),
        ("σ_μ", p.sigma_mu, se.map(|s| s.sigma_mu)),
        ("γ¹", p.gamma1, se.map(|s| s.gamma1)),
    ];
    let _ = writeln!(out, "\n{:<6} {:>12} {:>12}", "param", "estimate", "std. error");
    for (name, v, s) in rows {
        let s = s.map_or("-".to_string(), |s| format!("{s:.5}"));
        let _ = writeln!(out, "{name:<6} {v:>12.5} {s:>12}");
    }
    if let Some(s) = se {
        let _ = writeln!(out, "bootstrap draws: {} ({} failed)", s.draws, s.failed_draws);
    }
    let _ = writeln!(out, "objective: {:.6e}", r.objective);
}

fn pricing(out: &mut String, cf: &CounterfactualReport) {
    let _ = writeln!(
        out,
        "\n{:<18} {:>10} {:>10} {:>8} {:>8} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9}",
        "regime", "p1", "p2", "s1 %", "s2 %", "revenue", "consumer", "social", "Δrev %", "Δcons %", "Δsoc %"
    );
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    for (row, d) in cf.rows.iter().zip(&cf.deltas) {
        let mark = if row.converged || row.regime == PricingRegime::Data { "" } else { "  (not converged)" };
        let _ = writeln!(
            out,
            "{:<18} {:>10.3} {:>10.3} {:>8.2} {:>8.2} {:>10.4} {:>10.4} {:>10.4} {:>9} {:>9} {:>9}{mark}",
            row.regime.label(),
            row.prices.p1,
            row.prices.p2,
            100.0 * row.shares.s1,
            100.0 * row.shares.s2,
            row.welfare.revenue,
            row.welfare.consumer_surplus,
            row.welfare.social_welfare,
            pct(d.revenue_pct),
            pct(d.consumer_surplus_pct),
            pct(d.social_welfare_pct),
        );
    }
}

fn value(v: &CheckValue) -> String {
    match v {
        CheckValue::Number(x) => format!("{x:.4}"),
        CheckValue::Text(t) => t.clone(),
    }
}

fn checks(out: &mut String, checks: &[Check]) {
    let _ = writeln!(out, "\n{:<34} {:>14} {:>14} {:>12}  verdict", "quantity", "reference", "computed", "tolerance");
    for c in checks {
        let verdict = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(
            out,
            "{:<34} {:>14} {:>14} {:>12}  {verdict}",
            c.quantity,
            value(&c.reference),
            value(&c.computed),
            c.tolerance.describe()
        );
    }
}

fn scenario(out: &mut String, s: &ScenarioReport) {
    let _ = writeln!(out, "scenario {} (baseline shift: {})", s.name, s.mu_dist.name());
    let _ = writeln!(out, "note: {}", s.note);
    stats(out, &s.stats);
    estimate(out, &s.estimate);
    let p = &s.pricing_params;
    let _ = writeln!(
        out,
        "\npricing at a={:.4} b={:.5} γ⁰={:.4} γ¹={:.4} σ_μ={:.4}",
        p.a, p.b, p.gamma0, p.gamma1, p.sigma_mu
    );
    pricing(out, &s.counterfactual);
    checks(out, &s.checks);
    let _ = writeln!(out, "\n{} passed, {} failed", s.passed, s.failed);
}
