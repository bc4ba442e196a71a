use eqz_core::discrepancy::{dict_seminorm, median, rate_fit_min, CurrentTag, PairingVector};
use eqz_core::envelope::equilibrium_pairings;
use eqz_core::harmonics::Cap;
use eqz_core::sections::{empirical_pairings, sample_zero_sets};
use eqz_core::table::{num, Table};
use eqz_core::weights::WeightSpec;

use super::{bounded_ratio, independent_grid, max_of, Command, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Claim, ExperimentReport};

/// The twisted bundle `L^p ⊗ O(m)` restricted to a region `U`: trace
/// identity, `sup_U |φ_p − φ_eq|`, `‖log B_p‖_{L¹(U)}` against `log p`, and
/// equidistribution tested with the cutoff dictionary of `U`.
pub fn run_twisted(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Twisted, cfg)?;
    ctx.require_single_factor()?;
    let mut report = ctx.report();
    let region = ctx.region()?.unwrap_or_else(Cap::north_hemisphere);
    let dict = ctx.dictionary(Some(region))?;
    let env = ctx.envelope()?;
    let eq = PairingVector::from_reals(CurrentTag::Equilibrium, &equilibrium_pairings(&env, &dict, &ctx.grid), &dict)?;
    let phi_eq = env.sample(&ctx.grid);
    let inside: Vec<bool> = ctx.grid.points().iter().map(|x| region.contains(x)).collect();
    let check_grid = independent_grid(&ctx.grid)?;
    let flat = matches!(cfg.weight, WeightSpec::Constant { .. });

    let mut table = Table::new(&[
        "p",
        "m",
        "trace_rel_err",
        "flat_max_rel_err",
        "sup_error_region",
        "l1_log_bergman_region",
        "l1_region_ratio",
        "median_discrepancy_region",
        "mass",
    ]);
    let (mut trace_err, mut flat_err, mut mass_err) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sup_seq, mut l1_ratios, mut medians) = (Vec::new(), Vec::new(), Vec::new());
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let n = (p as i64 + ctx.m) as f64;
        let b: Vec<f64> = space.log_bergman_nodes(&check_grid).iter().map(|l| l.exp()).collect();
        let t_err = (check_grid.integrate_values(&b) - (n + 1.0)).abs() / (n + 1.0);

        let lb = space.log_bergman_nodes(&ctx.grid);
        let f_err = if flat {
            max_of(lb.iter().map(|l| (l.exp() - (n + 1.0)).abs() / (n + 1.0)))
        } else {
            f64::NAN
        };
        let pf = p as f64;
        let phi = ctx.grid.map(|x| ctx.weight.eval(x));
        let sup_u = max_of(
            (0..lb.len())
                .filter(|&i| inside[i])
                .map(|i| (phi[i] + lb[i] / (2.0 * pf) - phi_eq[i]).abs()),
        );
        let masked: Vec<f64> = lb.iter().zip(&inside).map(|(l, &ins)| if ins { l.abs() } else { 0.0 }).collect();
        let l1_u = ctx.grid.integrate_values(&masked);
        let ratio = if p >= 2 { l1_u / pf.ln() } else { f64::NAN };

        let sets = sample_zero_sets(&space, cfg.seed, 0..ctx.samples)?;
        let mut d = Vec::with_capacity(sets.len());
        let mut mass = 0.0f64;
        for zs in &sets {
            let v = PairingVector::from_reals(CurrentTag::Empirical, &empirical_pairings(zs, &dict, p), &dict)?;
            d.push(dict_seminorm(&v, &eq)?);
            let mz = zs.total_multiplicity() as f64 / pf;
            mass_err = mass_err.max((mz - n / pf).abs());
            mass = mz;
        }
        let med = median(&d);

        table.push(vec![
            p.to_string(),
            ctx.m.to_string(),
            num(t_err),
            num(f_err),
            num(sup_u),
            num(l1_u),
            num(ratio),
            num(med),
            num(mass),
        ]);
        trace_err = trace_err.max(t_err);
        if flat {
            flat_err = flat_err.max(f_err);
        }
        if p >= 5 {
            sup_seq.push((p, sup_u));
            medians.push((p, med));
        }
        l1_ratios.push(ratio);
    }
    report.table("twisted", table);

    let trace_tol = if ctx.weight.is_smooth() { 1e-6 } else { 1e-3 };
    report.claim(Claim::at_most("trace_identity", trace_err, trace_tol));
    report.claim(Claim::at_most("mass_exact", mass_err, 1e-12));
    if flat {
        report.claim(Claim::at_most("flat_exactness", flat_err, 1e-6));
    }
    match bounded_ratio(&l1_ratios, cfg.rate_factor) {
        Some((ok, max, med)) => report.claim(Claim::new("l1_growth_region", ok).with("max_ratio", max).with("median_ratio", med)),
        None => report.claim(Claim::new("l1_growth_region", true).soft().note("fewer than three degrees p >= 2")),
    }
    if sup_seq.len() >= 3 {
        let fit = rate_fit_min(&sup_seq, 3)?;
        let mut c = Claim::new("sup_rate_stable_region", fit.stable(cfg.rate_factor))
            .with("fitted_c", fit.c)
            .with("median_ratio", fit.median_ratio);
        if sup_seq.len() < 5 {
            c = c.soft().note("fewer than five degrees");
        }
        report.claim(c);
    } else {
        report.claim(Claim::new("sup_rate_stable_region", true).soft().note("needs three degrees p >= 5"));
    }
    // Zero discrepancies may decay faster than log p / p, so the check is
    // that the constant fitted on the first half still bounds the rest, up
    // to the stability factor that absorbs sampling noise.
    if medians.len() >= 2 {
        let fit = rate_fit_min(&medians, 2)?;
        let half = fit.ratios.len().div_ceil(2);
        let fitted = max_of(fit.ratios[..half].iter().copied());
        let later = max_of(fit.ratios[half..].iter().copied());
        report.claim(
            Claim::new("median_rate_bound_region", later <= cfg.rate_factor * fitted)
                .with("fitted_c", fitted)
                .with("later_max_ratio", later)
                .with("median_ratio", fit.median_ratio),
        );
    } else {
        report.claim(Claim::new("median_rate_bound_region", true).soft().note("needs two degrees p >= 5"));
    }
    Ok(report)
}
