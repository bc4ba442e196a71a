use eqz_core::bergman::{fs_current_pairings, SectionSpace};
use eqz_core::discrepancy::{dict_seminorm, linear_fit, median, rate_fit_min, CurrentTag, PairingVector};
use eqz_core::envelope::equilibrium_pairings;
use eqz_core::harmonics::Dictionary;
use eqz_core::sections::{empirical_pairings, sample_zero_sets, zero_table, ZeroSet};
use eqz_core::table::{num, Table};
use rayon::prelude::*;

use super::{max_of, quantile, Command, Context};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::report::{Claim, ExperimentReport};

/// Sample indices of the almost-sure experiment start here, away from the
/// calibration samples.
const SEQUENCE_OFFSET: usize = 1_000_000;

/// Scaled empirical pairings of each zero set.
fn pairings(zs: &[ZeroSet<f64>], dict: &Dictionary, p: usize) -> Result<Vec<PairingVector>> {
    zs.par_iter()
        .map(|z| Ok(PairingVector::from_reals(CurrentTag::Empirical, &empirical_pairings(z, dict, p), dict)?))
        .collect()
}

fn seminorms(vs: &[PairingVector], reference: &PairingVector) -> Result<Vec<f64>> {
    vs.iter().map(|v| Ok(dict_seminorm(v, reference)?)).collect()
}

fn equilibrium_reference(ctx: &Context, dict: &Dictionary) -> Result<PairingVector> {
    let env = ctx.envelope()?;
    Ok(PairingVector::from_reals(
        CurrentTag::Equilibrium,
        &equilibrium_pairings(&env, dict, &ctx.grid),
        dict,
    )?)
}

fn fs_reference(space: &SectionSpace<f64>, ctx: &Context, dict: &Dictionary) -> Result<PairingVector> {
    Ok(PairingVector::from_reals(
        CurrentTag::FsCurrent,
        &fs_current_pairings(space, dict, &ctx.grid),
        dict,
    )?)
}

/// Zeros of `samples` random sections per degree.
pub fn run_sample_zeros(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::SampleZeros, cfg)?;
    ctx.require_single_factor()?;
    let mut report = ctx.report();
    let mut zeros = Table::new(&["p", "sample", "chart", "re", "im", "multiplicity"]);
    let mut masses = Table::new(&["p", "sample", "distinct_roots", "total_multiplicity", "mass", "at_infinity"]);
    let mut exact = true;
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let sets = sample_zero_sets(&space, cfg.seed, 0..ctx.samples)?;
        for (i, zs) in sets.iter().enumerate() {
            let mut t = zero_table();
            zs.append_rows(i, &mut t);
            for row in t.rows() {
                let mut r = vec![p.to_string()];
                r.extend(row.iter().cloned());
                zeros.push(r);
            }
            let total = zs.total_multiplicity();
            exact &= total as i64 == p as i64 + ctx.m;
            masses.push(vec![
                p.to_string(),
                i.to_string(),
                zs.roots.len().to_string(),
                total.to_string(),
                num(total as f64 / p as f64),
                zs.multiplicity_at_infinity().to_string(),
            ]);
        }
    }
    report.table("zeros", zeros);
    report.table("mass", masses);
    report.claim(Claim::new("mass_exact", exact));
    Ok(report)
}

/// Per-element mean and standard error of the empirical pairings, and how
/// many elements sit more than three standard errors from `reference`.
pub(crate) struct Unbiasedness {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub z: Vec<f64>,
    pub exceed: usize,
}

pub(crate) fn unbiasedness(vs: &[PairingVector], reference: &PairingVector) -> Unbiasedness {
    let n = vs.len() as f64;
    let dim = reference.values.len();
    let mut mean = vec![0.0; dim];
    for v in vs {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in vs {
        for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let stderr: Vec<f64> = var.iter().map(|s| (s / (n - 1.0).max(1.0) / n).sqrt()).collect();
    let z: Vec<f64> = mean
        .iter()
        .zip(&reference.values)
        .zip(&stderr)
        .map(|((m, r), se)| {
            let d = (m - r).abs();
            // a deterministic element (zero variance) must match to rounding
            if *se > 1e-12 {
                d / se
            } else if d <= 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let exceed = z.iter().filter(|z| **z > 3.0).count();
    Unbiasedness { mean, stderr, z, exceed }
}

/// Allowed number of elements beyond three standard errors: 2 per 81.
pub(crate) fn exceed_allowance(len: usize) -> usize {
    (2 * len).div_ceil(81)
}

/// Discrepancy between `(1/p)[Div s_p]` and `ω_eq` for `samples` sections
/// per degree, the rate fit of the median, and the averaging identity
/// `E[(1/p)[Div s_p]] = (1/p)ω_p` element by element.
pub fn run_equidistribution(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Equidistribution, cfg)?;
    ctx.require_single_factor()?;
    let mut report = ctx.report();
    let dict = ctx.dictionary(ctx.region()?)?;
    let eq = equilibrium_reference(&ctx, &dict)?;
    let mut samples = Table::new(&["p", "sample", "discrepancy", "mass"]);
    let mut summary = Table::new(&["p", "mean", "median", "q10", "q90", "max", "mass_error"]);
    let mut unbiased = Table::new(&["p", "element", "mean", "stderr", "fs_current", "z"]);
    let mut medians = Vec::new();
    let mut mass_err = 0.0f64;
    let mut exceed_max = 0usize;
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let sets = sample_zero_sets(&space, cfg.seed, 0..ctx.samples)?;
        let vs = pairings(&sets, &dict, p)?;
        let d = seminorms(&vs, &eq)?;
        let target = (p as i64 + ctx.m) as f64 / p as f64;
        let mut err_here = 0.0f64;
        for (i, zs) in sets.iter().enumerate() {
            let mass = zs.total_multiplicity() as f64 / p as f64;
            err_here = err_here.max((mass - target).abs());
            samples.push(vec![p.to_string(), i.to_string(), num(d[i]), num(mass)]);
        }
        let med = median(&d);
        summary.push(vec![
            p.to_string(),
            num(d.iter().sum::<f64>() / d.len() as f64),
            num(med),
            num(quantile(&d, 0.1)),
            num(quantile(&d, 0.9)),
            num(max_of(d.iter().copied())),
            num(err_here),
        ]);
        medians.push((p, med));
        mass_err = mass_err.max(err_here);

        let fs = fs_reference(&space, &ctx, &dict)?;
        let u = unbiasedness(&vs, &fs);
        for (e, name) in PairingVector::header(&dict).iter().skip(2).enumerate() {
            unbiased.push(vec![p.to_string(), name.clone(), num(u.mean[e]), num(u.stderr[e]), num(fs.values[e]), num(u.z[e])]);
        }
        exceed_max = exceed_max.max(u.exceed);
    }
    report.table("samples", samples);
    report.table("summary", summary);
    report.table("unbiasedness", unbiased);

    report.claim(Claim::at_most("mass_exact", mass_err, 1e-12));
    let allowance = exceed_allowance(dict.len());
    let mut ub = Claim::new("unbiasedness", exceed_max <= allowance)
        .with("max_exceeding_elements", exceed_max as f64)
        .with("allowance", allowance as f64);
    if ctx.samples < 100 {
        ub = ub.soft().note("fewer than 100 samples");
    }
    report.claim(ub);
    if medians.len() >= 3 && medians.iter().all(|(p, _)| *p >= 5) {
        let fit = rate_fit_min(&medians, 3)?;
        report.table("rate_fit", fit.to_table());
        report.claim(
            Claim::new("median_rate_stable", fit.stable(cfg.rate_factor))
                .with("fitted_c", fit.c)
                .with("median_ratio", fit.median_ratio)
                .with("loglog_slope", fit.slope),
        );
    } else {
        report.claim(Claim::new("median_rate_stable", true).soft().note("needs three degrees p >= 5"));
    }
    Ok(report)
}

/// Empirical tail `λ ↦ #{D > λ}/M`.
pub(crate) fn tail(d: &[f64], lambda: f64) -> f64 {
    d.iter().filter(|&&x| x > lambda).count() as f64 / d.len() as f64
}

/// Linear fit of `log tail` against `λ` over the points with tail in
/// `[0.05, 0.5]`: `(slope, intercept, r², points used)`.
pub(crate) fn central_decade_fit(curve: &[(f64, f64)]) -> (f64, f64, f64, usize) {
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|(_, t)| (0.05..=0.5).contains(t))
        .map(|&(l, t)| (l, t.ln()))
        .unzip();
    if x.len() < 3 {
        return (f64::NAN, f64::NAN, f64::NAN, x.len());
    }
    let (s, i, r2) = linear_fit(&x, &y);
    (s, i, r2, x.len())
}

/// Tail of the unscaled discrepancy between `[Div s_p]` and `ω_p`.
pub fn run_deviation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Deviation, cfg)?;
    ctx.require_single_factor()?;
    if ctx.samples < 1000 {
        return Err(LabError::Config(format!("deviation needs at least 1000 samples, got {}", ctx.samples)));
    }
    let mut report = ctx.report();
    let dict = ctx.dictionary(ctx.region()?)?;
    let mut curve_t = Table::new(&["p", "lambda", "tail", "log_tail"]);
    let mut sched = Table::new(&["p", "a", "lambda", "tail"]);
    let mut fits = Table::new(&["p", "slope", "intercept", "r2", "points", "decay_constant", "a_star"]);
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let fs = fs_reference(&space, &ctx, &dict)?;
        let sets = sample_zero_sets(&space, cfg.seed, 0..ctx.samples)?;
        let d: Vec<f64> = seminorms(&pairings(&sets, &dict, p)?, &fs)?.into_iter().map(|x| x * p as f64).collect();
        let dmax = max_of(d.iter().copied());
        let lambdas: Vec<f64> = if cfg.lambdas.is_empty() {
            (0..200).map(|i| 1.05 * dmax * i as f64 / 199.0).collect()
        } else {
            cfg.lambdas.clone()
        };
        let curve: Vec<(f64, f64)> = lambdas.iter().map(|&l| (l, tail(&d, l))).collect();
        for &(l, t) in &curve {
            curve_t.push(vec![p.to_string(), num(l), num(t), num(t.ln())]);
        }
        let logp = (p as f64).ln();
        for &a in &cfg.lambda_a {
            sched.push(vec![p.to_string(), num(a), num(a * logp), num(tail(&d, a * logp))]);
        }
        let (slope, intercept, r2, used) = central_decade_fit(&curve);
        let a_star = dmax / logp;
        fits.push(vec![p.to_string(), num(slope), num(intercept), num(r2), used.to_string(), num(-1.0 / slope), num(a_star)]);
        let degenerate = !(dmax > 0.0) || used < 3;
        report.claim(Claim::new(&format!("tail_nondegenerate_p{p}"), !degenerate).with("points", used as f64).with("max_discrepancy", dmax));
        report.claim(
            Claim::new(&format!("tail_log_linear_p{p}"), !degenerate && r2 >= 0.9)
                .with("r2", r2)
                .with("slope", slope)
                .with("decay_constant", -1.0 / slope),
        );
        report.claim(
            Claim::new(&format!("schedule_threshold_p{p}"), true)
                .soft()
                .with("a_star", a_star)
                .note("smallest a with no sample above a log p"),
        );
    }
    report.table("tail", curve_t);
    report.table("schedule", sched);
    report.table("fit", fits);
    Ok(report)
}

/// Simulate independent sequences `(s_p)_{p ≤ P}` and report, for each, the
/// largest `p` with discrepancy above `C log p / p`, where `C` is twice the
/// median-based constant fitted on calibration samples.
pub fn run_sequence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Sequence, cfg)?;
    ctx.require_single_factor()?;
    if let Some(&p) = ctx.p.iter().find(|&&p| p < 5) {
        return Err(LabError::Config(format!("sequence degrees must be >= 5, got {p}")));
    }
    let mut report = ctx.report();
    let dict = ctx.dictionary(ctx.region()?)?;
    let eq = equilibrium_reference(&ctx, &dict)?;
    let n_seq = cfg.sequences;
    let mut medians = Vec::new();
    let mut per_p: Vec<Vec<f64>> = Vec::new();
    for &p in &ctx.p {
        let space = ctx.space(p, ctx.m)?;
        let calib = seminorms(&pairings(&sample_zero_sets(&space, cfg.seed, 0..ctx.samples)?, &dict, p)?, &eq)?;
        medians.push((p, median(&calib)));
        let seq = sample_zero_sets(&space, cfg.seed, SEQUENCE_OFFSET..SEQUENCE_OFFSET + n_seq)?;
        per_p.push(seminorms(&pairings(&seq, &dict, p)?, &eq)?);
    }
    let fit = rate_fit_min(&medians, 2)?;
    let c = 2.0 * fit.c;
    let mut cal = fit.to_table();
    cal.meta("threshold_c", c);
    report.table("calibration", cal);

    let mut detail = Table::new(&["sequence", "p", "discrepancy", "bound", "violates"]);
    let mut onsets_t = Table::new(&["sequence", "onset", "violations"]);
    let mut onsets = Vec::with_capacity(n_seq);
    for j in 0..n_seq {
        let mut onset = 0usize;
        let mut count = 0usize;
        for (k, &p) in ctx.p.iter().enumerate() {
            let pf = p as f64;
            let bound = c * pf.ln() / pf;
            let v = per_p[k][j] > bound;
            if v {
                onset = onset.max(p);
                count += 1;
            }
            detail.push(vec![j.to_string(), p.to_string(), num(per_p[k][j]), num(bound), v.to_string()]);
        }
        onsets.push(onset);
        onsets_t.push(vec![j.to_string(), onset.to_string(), count.to_string()]);
    }
    report.table("sequences", detail);
    report.table("onsets", onsets_t);
    let big_p = *ctx.p.iter().max().expect("p list is nonempty");
    let early = onsets.iter().filter(|&&o| 2 * o <= big_p).count() as f64 / n_seq as f64;
    report.claim(
        Claim::new("onset_early", early >= 0.9)
            .soft()
            .with("fraction_onset_at_most_half", early)
            .with("threshold_c", c)
            .note("almost-sure statements are not decidable at finite P"),
    );
    Ok(report)
}
