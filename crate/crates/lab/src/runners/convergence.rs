use eqz_core::discrepancy::rate_fit_min;
use eqz_core::table::{num, Table};
use eqz_core::weights::WeightSpec;

use super::{max_of, min_of, Command, Context};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::report::{Claim, ExperimentReport};

/// `C = max(0, max_p(−p · min(φ_p − φ_eq)))`.
pub(crate) fn lower_constant(stats: &[f64]) -> f64 {
    max_of(stats.iter().map(|s| -s)).max(0.0)
}

/// Relative change of the lower-bound constant between the first half of
/// the schedule and the whole schedule.
pub(crate) fn lower_constant_variation(stats: &[f64]) -> (f64, f64, f64) {
    let half = stats.len().div_ceil(2);
    let c_half = lower_constant(&stats[..half]);
    let c_full = lower_constant(stats);
    let variation = if c_full > 0.0 { (c_full - c_half) / c_full } else { 0.0 };
    (c_half, c_full, variation)
}

/// `φ_p − φ_eq` on the quadrature nodes for every degree: sup and L¹ norms,
/// the lower-bound statistic `p · min(φ_p − φ_eq)`, and the rate fit of the
/// sup norm against `log p / p`.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Convergence, cfg)?;
    if ctx.weight.holder().is_none() {
        return Err(LabError::Config("convergence needs a weight with Hölder metadata".into()));
    }
    let mut report = ctx.report();
    let env = ctx.envelope()?;
    let phi_eq = env.sample(&ctx.grid);
    let mut table = Table::new(&["p", "sup_error", "l1_error", "min_error", "p_min_error", "ratio"]);
    let mut seq = Vec::new();
    let mut stats = Vec::new();
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let diff: Vec<f64> = space.fs_weight_nodes(&ctx.grid).iter().zip(&phi_eq).map(|(a, b)| a - b).collect();
        let sup = max_of(diff.iter().map(|d| d.abs()));
        let l1 = ctx.grid.integrate_values(&diff.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let min = min_of(diff.iter().copied());
        let pf = p as f64;
        table.push(vec![p.to_string(), num(sup), num(l1), num(min), num(pf * min), num(sup * pf / pf.ln())]);
        seq.push((p, sup));
        stats.push(pf * min);
    }
    report.table("convergence", table);

    let fit = rate_fit_min(&seq, 2)?;
    report.table("rate_fit", fit.to_table());
    let mut rate = Claim::new("rate_stable", fit.stable(cfg.rate_factor))
        .with("fitted_c", fit.c)
        .with("median_ratio", fit.median_ratio)
        .with("loglog_slope", fit.slope);
    if seq.len() < 5 {
        rate = rate.soft().note("fewer than five degrees");
    }
    report.claim(rate);

    let (c_half, c_full, variation) = lower_constant_variation(&stats);
    report.claim(
        Claim::new("lower_bound_stable", variation <= 0.5)
            .with("c_first_half", c_half)
            .with("c_all", c_full)
            .with("variation", variation)
            .with("min_p_min_error", min_of(stats.iter().copied())),
    );

    if matches!(cfg.weight, WeightSpec::Constant { .. }) {
        // φ_p − φ_eq ≡ log(p + m + 1)/(2p) for constant weights.
        let dev = max_of(seq.iter().zip(&fit.ratios).map(|(&(p, _), r)| {
            let pf = p as f64;
            (r - ((pf + ctx.m as f64 + 1.0).ln() / (2.0 * pf.ln()))).abs()
        }));
        report.claim(Claim::at_most("flat_closed_form", dev, 1e-6));
    }
    Ok(report)
}
