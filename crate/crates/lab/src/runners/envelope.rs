use eqz_core::envelope::{EnvelopeResult, Method};
use eqz_core::table::{num, Table};

use super::{max_of, Command, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Claim, ExperimentReport};

/// Sup-distance between an envelope and a lattice solution, on the lattice.
fn sup_difference(a: &EnvelopeResult<f64>, lattice: &EnvelopeResult<f64>) -> f64 {
    let values = lattice.node_values();
    match lattice.lat_long_grid() {
        Some(g) => max_of((0..g.len()).map(|i| (a.eval(&g.point(i)) - values[i]).abs())),
        None => f64::NAN,
    }
}

/// Solve for `φ_eq`, report residuals and idempotence, and cross-check the
/// two solvers on radial weights.
pub fn run_envelope(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::Envelope, cfg)?;
    let mut report = ctx.report();
    let primary = ctx.method();
    let mut methods = vec![primary];
    if ctx.weight.is_radial() {
        methods.push(match primary {
            Method::RadialHull => Method::Lcp,
            Method::Lcp => Method::RadialHull,
        });
    }
    let tol = &cfg.envelope;
    let mut summary = Table::new(&[
        "method",
        "iterations",
        "obstacle_residual",
        "feasibility_residual",
        "complementarity_residual",
        "idempotence",
    ]);
    let mut solved = Vec::new();
    for &method in &methods {
        let env = ctx.solve(&ctx.weight, method)?;
        let again = ctx.solve(&env.to_weight(), method)?;
        let idem = max_of(env.node_values().iter().zip(again.node_values()).map(|(a, b)| (a - b).abs()));
        let r = env.residuals;
        summary.push(vec![
            method.as_str().to_string(),
            env.iterations.to_string(),
            num(r.obstacle),
            num(r.feasibility),
            num(r.complementarity),
            num(idem),
        ]);
        let m = method.as_str();
        report.claim(Claim::at_most(&format!("{m}_obstacle_residual"), r.obstacle, tol.residual_tol));
        report.claim(Claim::at_most(&format!("{m}_feasibility_residual"), r.feasibility, tol.residual_tol));
        report.claim(Claim::at_most(&format!("{m}_complementarity_residual"), r.complementarity, tol.residual_tol));
        report.claim(Claim::at_most(&format!("{m}_idempotence"), idem, tol.idempotence_tol));
        solved.push(env);
    }
    if solved.len() == 2 {
        let (hull, lattice) = if methods[0] == Method::RadialHull {
            (&solved[0], &solved[1])
        } else {
            (&solved[1], &solved[0])
        };
        let diff = sup_difference(hull, lattice);
        let mut cross = Table::new(&["reference", "compared", "sup_difference"]);
        cross.push(vec!["radial_hull".into(), "lcp".into(), num(diff)]);
        report.table("cross_check", cross);
        report.claim(Claim::at_most("solver_cross_check", diff, tol.cross_check_tol));
    }
    report.table("solvers", summary);
    report.table("envelope", solved[0].to_table());
    Ok(report)
}
