use eqz_core::sections::mp_constant;
use eqz_core::table::{num, Table};

use super::{Command, Context};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Claim, ExperimentReport};

/// Largest `k` always tabulated.
const K_MAX: usize = 8;

/// `c_{d,k}` over the configured `d` list and `k ≤ max(8, cfg.k)`.
pub fn run_mp_constant(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Context::new(Command::MpConstant, cfg)?;
    let mut report = ctx.report();
    let mut ds = ctx.p.clone();
    ds.sort_unstable();
    ds.dedup();
    let k_max = K_MAX.max(cfg.k);
    let mut table = Table::new(&["d", "k", "c", "inverse_power_log"]);
    let mut unit_err = 0.0f64;
    let mut bounded = true;
    let mut monotone = true;
    for k in 1..=k_max {
        let mut prev = f64::INFINITY;
        for &d in &ds {
            let c = mp_constant(d as u64, k as u64)?;
            // −dk log c = log((dk)!/(d!)^k)
            table.push(vec![d.to_string(), k.to_string(), num(c), num(-((d * k) as f64) * c.ln())]);
            if k == 1 {
                unit_err = unit_err.max((c - 1.0).abs());
            }
            if k <= K_MAX {
                bounded &= c >= 1.0 / k as f64 - 1e-12 && c <= 1.0 + 1e-12;
                monotone &= c <= prev + 1e-12;
            }
            prev = c;
        }
    }
    report.table("mp_constant", table);
    report.claim(Claim::at_most("single_factor_is_one", unit_err, 1e-12));
    let c12 = mp_constant(1, 2)?;
    report.claim(Claim::at_most("c_1_2", (c12 - std::f64::consts::FRAC_1_SQRT_2).abs(), 1e-12));
    report.claim(Claim::new("bounded_in_1_over_k_and_1", bounded));
    report.claim(Claim::new("nonincreasing_in_d", monotone));
    Ok(report)
}
