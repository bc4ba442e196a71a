//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use eqz_core::bergman::{bergman_function, build_space};
use eqz_core::quadrature::make_grid;
use eqz_core::rng::{complex_gaussian_vec, stream};
use eqz_core::sections::mp_constant;
use eqz_core::weights::constant;
use eqz_core::Point;
use eqz_lab::runners::{sup_convolution_check, SupConvolutionRow};
use eqz_lab::{run, Command, ExperimentConfig, ExperimentReport};

const CORPUS: [(&str, &str); 4] = [
    ("constant", r#"{"name": "constant", "c": 0.0}"#),
    ("scaled_fs", r#"{"name": "scaled_fs", "beta": 0.5}"#),
    ("gauss_bump", r#"{"name": "gauss_bump", "a": 2.0, "s": 0.7}"#),
    ("holder_bump", r#"{"name": "holder_bump", "a": 1.0, "alpha": 0.5}"#),
];

const PSH_CORPUS: [(&str, &str); 2] = [CORPUS[0], CORPUS[1]];

const DEGREES_10_150: &str = "[10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150]";

/// Outcome of one criterion: failures collected as human-readable reasons.
struct Verdict {
    failures: Vec<String>,
    details: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { failures: Vec::new(), details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failures.push(what.clone());
        }
        self.details.push(what);
    }

    /// Every listed claim of `report` must be present and passed.
    fn claims(&mut self, label: &str, report: &ExperimentReport, names: &[&str]) {
        for name in names {
            match report.get_claim(name) {
                Some(c) => {
                    let measured: Vec<String> = c.measured.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
                    self.check(c.passed, format!("{label} {name} [{}]", measured.join(", ")));
                }
                None => self.check(false, format!("{label} {name} missing")),
            }
        }
    }

    fn error(&mut self, label: &str, e: impl std::fmt::Display) {
        self.check(false, format!("{label} error: {e}"));
    }
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap_or_else(|e| panic!("bad acceptance config {json}: {e}"))
}

fn run_cfg(command: Command, json: &str) -> eqz_lab::Result<ExperimentReport> {
    run(command, &config(json))
}

/// Flat kernel: `B_p ≡ p + 1` for `φ ≡ 0`, `m = 0`.
fn symmetric_exactness(v: &mut Verdict) {
    let start = Instant::now();
    match run_cfg(Command::Bergman, r#"{"p": [1, 5, 20, 50]}"#) {
        Ok(r) => v.claims("lab", &r, &["flat_exactness", "trace_identity"]),
        Err(e) => v.error("lab bergman", e),
    }
    // Direct evaluation on 10⁴ seeded points.
    let grid = make_grid::<f64>(400, 400).expect("grid");
    let w = constant::<f64>(0.0).expect("weight");
    let mut rng = stream(7, 0, 200, 0);
    let points: Vec<Point> = (0..10_000)
        .map(|_| {
            let g = complex_gaussian_vec::<f64, _>(&mut rng, 2);
            let u = [g[0].re, g[0].im, g[1].re];
            let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            Point::from_unit_vector([u[0] / n, u[1] / n, u[2] / n])
        })
        .collect();
    for p in [1usize, 5, 20, 50] {
        let space = build_space(p, 0, &w, &grid).expect("space");
        let n = (p + 1) as f64;
        let err = points.iter().map(|x| ((bergman_function(&space, x) - n) / n).abs()).fold(0.0, f64::max);
        v.check(err <= 1e-6, format!("direct p={p} max_rel_err={err:.3e} (<= 1e-6)"));
    }
    let secs = start.elapsed().as_secs_f64();
    v.check(secs <= 60.0, format!("runtime {secs:.1}s (<= 60s)"));
}

/// `∫ B_p ω_FS = p + m + 1` on an independent grid.
fn trace_identity(v: &mut Verdict) {
    for (name, weight) in CORPUS {
        for m in [0, -2] {
            let json = format!(r#"{{"weight": {weight}, "p": [2, 10, 50, 100], "m": {m}}}"#);
            match run_cfg(Command::Bergman, &json) {
                Ok(r) => v.claims(&format!("{name} m={m}"), &r, &["trace_identity"]),
                Err(e) => v.error(&format!("{name} m={m}"), e),
            }
        }
    }
}

/// Radial hull and LCP agree on radial weights; residuals and idempotence.
fn envelope_cross_validation(v: &mut Verdict) {
    for (name, weight) in CORPUS {
        let json = format!(r#"{{"weight": {weight}}}"#);
        match run_cfg(Command::Envelope, &json) {
            Ok(r) => {
                let mut names = vec!["solver_cross_check".to_string()];
                for m in ["radial_hull", "lcp"] {
                    for c in ["obstacle_residual", "feasibility_residual", "complementarity_residual", "idempotence"] {
                        names.push(format!("{m}_{c}"));
                    }
                }
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                v.claims(name, &r, &names);
            }
            Err(e) => v.error(name, e),
        }
    }
}

/// `ln c_{d,k}` from `c^{−dk} = (dk)!/(d!)^k`, summing logarithms directly.
fn log_mp_oracle(d: u64, k: u64) -> f64 {
    let ln_fact = |n: u64| (2..=n).map(|i| (i as f64).ln()).sum::<f64>();
    -(ln_fact(d * k) - k as f64 * ln_fact(d)) / (d * k) as f64
}

fn mp_constants(v: &mut Verdict) {
    match run_cfg(Command::MpConstant, "{}") {
        Ok(r) => v.claims("lab", &r, &["single_factor_is_one", "c_1_2", "bounded_in_1_over_k_and_1", "nonincreasing_in_d"]),
        Err(e) => v.error("lab mp-constant", e),
    }
    let mut unit = 0.0f64;
    for d in [1u64, 2, 3, 5, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        unit = unit.max((mp_constant(d, 1).unwrap_or(f64::NAN) - 1.0).abs());
    }
    v.check(unit <= 1e-12, format!("direct max|c_(d,1) - 1|={unit:.3e} (<= 1e-12)"));
    let c12 = mp_constant(1, 2).unwrap_or(f64::NAN);
    v.check((c12 - FRAC_1_SQRT_2).abs() <= 1e-12, format!("direct c_(1,2)={c12:.15} (2^-1/2 +- 1e-12)"));
    let mut worst = 0.0f64;
    for d in [1u64, 2, 3, 5, 10, 100, 1_000] {
        for k in 1..=8u64 {
            let c = mp_constant(d, k).unwrap_or(f64::NAN);
            worst = worst.max((c.ln() - log_mp_oracle(d, k)).abs());
        }
    }
    v.check(worst <= 1e-9, format!("log-factorial oracle max|ln c diff|={worst:.3e} (<= 1e-9)"));
}

/// Sup-norm rate and lower-bound stability share the convergence runs.
fn convergence(rate: &mut Verdict, lower: &mut Verdict) -> Duration {
    let start = Instant::now();
    for (name, weight) in CORPUS {
        let json = format!(r#"{{"weight": {weight}, "p": {DEGREES_10_150}}}"#);
        match run_cfg(Command::Convergence, &json) {
            Ok(r) => {
                let names: &[&str] = if name == "constant" { &["rate_stable", "flat_closed_form"] } else { &["rate_stable"] };
                rate.claims(name, &r, names);
                lower.claims(name, &r, &["lower_bound_stable"]);
            }
            Err(e) => {
                rate.error(name, &e);
                lower.error(name, e);
            }
        }
    }
    start.elapsed()
}

fn unbiasedness(v: &mut Verdict) {
    let json = format!(r#"{{"weight": {}, "p": [20], "samples": 2000}}"#, CORPUS[2].1);
    match run_cfg(Command::Equidistribution, &json) {
        Ok(r) => {
            v.claims("gauss_bump", &r, &["unbiasedness"]);
            if let Some(c) = r.get_claim("unbiasedness") {
                v.check(c.hard, "unbiasedness is a hard claim at M = 2000");
                let exceed = c.measured.get("max_exceeding_elements").copied().unwrap_or(f64::NAN);
                v.check(exceed <= 2.0, format!("exceedances={exceed} (<= 2 of 81)"));
            }
        }
        Err(e) => v.error("gauss_bump", e),
    }
}

fn equidistribution(v: &mut Verdict) {
    let json = format!(r#"{{"weight": {}, "p": [20, 50, 100], "samples": 200}}"#, CORPUS[2].1);
    match run_cfg(Command::Equidistribution, &json) {
        Ok(r) => v.claims("gauss_bump", &r, &["median_rate_stable", "mass_exact"]),
        Err(e) => v.error("gauss_bump", e),
    }
}

fn deviation_tail(v: &mut Verdict) {
    match run_cfg(Command::Deviation, r#"{"p": [30], "samples": 5000}"#) {
        Ok(r) => v.claims("constant", &r, &["tail_nondegenerate_p30", "tail_log_linear_p30"]),
        Err(e) => v.error("constant", e),
    }
}

/// `‖log B_p‖_{L¹}/log p` bounded, globally and on the north hemisphere.
fn l1_growth(v: &mut Verdict) {
    for (name, weight) in PSH_CORPUS {
        for m in [0, -2] {
            let json = format!(r#"{{"weight": {weight}, "p": {DEGREES_10_150}, "m": {m}}}"#);
            match run_cfg(Command::Bergman, &json) {
                Ok(r) => {
                    let label = format!("{name} m={m}");
                    v.claims(&label, &r, &["l1_growth", "l1_growth_region"]);
                    for claim in ["l1_growth", "l1_growth_region"] {
                        if let Some(c) = r.get_claim(claim) {
                            v.check(c.hard, format!("{label} {claim} is hard for a psh weight"));
                        }
                    }
                }
                Err(e) => v.error(&format!("{name} m={m}"), e),
            }
        }
    }
}

/// `∫_{|z|<1} log|z| dZ` by the midpoint rule in `r` (angular part exact).
fn disc_log_oracle(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    2.0 * PI * (0..n).map(|i| (i as f64 + 0.5) * h).map(|r| r * r.ln() * h).sum::<f64>()
}

fn sup_convolution(v: &mut Verdict) {
    let oracle = disc_log_oracle(200_000);
    v.check((oracle + PI / 2.0).abs() <= 1e-8, format!("midpoint anchor {oracle:.10} vs -pi/2"));
    match run_cfg(Command::Bergman, r#"{"p": [1]}"#) {
        Ok(r) => v.claims("lab", &r, &["log_disc_anchor", "sup_convolution_closed_form", "sup_convolution_single_c"]),
        Err(e) => v.error("lab bergman", e),
    }
    let rhos = [0.05, 0.1, 0.2, 0.3];
    match sup_convolution_check(&rhos, 400, 512) {
        Ok((integral, rows)) => {
            v.check((integral + PI / 2.0).abs() <= 1e-6, format!("lab disc integral {integral:.8} vs -pi/2"));
            let rows: &[SupConvolutionRow] = &rows;
            // c fitted at the largest radius must cover every smaller one.
            let last = rows.last().expect("rows");
            let c = last.deficit / last.rho;
            for row in rows {
                let ok = integral.abs() - row.integral_prime.abs() <= c * row.rho + 1e-12;
                v.check(ok, format!("rho={} deficit={:.4e} c*rho={:.4e}", row.rho, row.deficit, c * row.rho));
            }
        }
        Err(e) => v.error("sup_convolution_check", e),
    }
}

/// CSV lines other than `#` metadata.
fn bodies(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .expect("read output dir")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            let text = fs::read_to_string(&p).expect("read csv");
            let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), body)
        })
        .collect();
    out.sort();
    out
}

fn eqz(args: &[&str], config: &Path, out: &Path, extra: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_eqz"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .map(|o| o.status.code().unwrap_or(-1))
        .unwrap_or(-1)
}

fn determinism(v: &mut Verdict) {
    let tmp = tempfile::tempdir().expect("tempdir");
    let runs: [(&str, String); 3] = [
        ("equidistribution", format!(r#"{{"weight": {}, "p": [20, 50], "samples": 60}}"#, CORPUS[2].1)),
        ("convergence", format!(r#"{{"weight": {}, "p": [10, 20, 30, 40, 50]}}"#, CORPUS[3].1)),
        ("deviation", r#"{"p": [12], "samples": 1000}"#.to_string()),
    ];
    for (command, json) in runs {
        let cfg = tmp.path().join(format!("{command}.json"));
        fs::write(&cfg, json).expect("write config");
        let cache = tmp.path().join(format!("{command}_cache"));
        let cache = cache.to_str().unwrap();
        let mut outputs = Vec::new();
        for (label, extra) in [
            ("threads=1", vec!["--threads", "1"]),
            ("threads=3", vec!["--threads", "3"]),
            ("threads=2 cold cache", vec!["--threads", "2", "--cache", cache]),
            ("threads=2 warm cache", vec!["--threads", "2", "--cache", cache]),
        ] {
            let out = tmp.path().join(format!("{command}_{}", outputs.len()));
            let code = eqz(&[command], &cfg, &out, &extra);
            v.check(code == 0 || code == 2, format!("{command} {label} exit {code}"));
            outputs.push((label, bodies(&out)));
        }
        let (_, reference) = &outputs[0];
        v.check(!reference.is_empty(), format!("{command} wrote {} csv files", reference.len()));
        for (label, b) in &outputs[1..] {
            v.check(b == reference, format!("{command} {label} bodies identical to threads=1"));
        }
    }
}

fn main() {
    let total = Instant::now();
    let mut verdicts: Vec<(&str, Verdict)> = Vec::new();
    let mut step = |name: &'static str, f: &dyn Fn(&mut Verdict)| {
        let mut v = Verdict::new();
        f(&mut v);
        verdicts.push((name, v));
    };
    step("C1 symmetric exactness", &symmetric_exactness);
    step("C2 trace identity", &trace_identity);
    step("C3 envelope cross-validation", &envelope_cross_validation);
    step("C4 mp constant", &mp_constants);
    let (mut rate, mut lower) = (Verdict::new(), Verdict::new());
    let elapsed = convergence(&mut rate, &mut lower);
    let secs = elapsed.as_secs_f64();
    rate.check(secs <= 900.0, format!("runtime {secs:.1}s (<= 900s)"));
    verdicts.push(("C5 sup-norm rate", rate));
    verdicts.push(("C6 lower bound stability", lower));
    let mut step = |name: &'static str, f: &dyn Fn(&mut Verdict)| {
        let mut v = Verdict::new();
        f(&mut v);
        verdicts.push((name, v));
    };
    step("C7 unbiasedness", &unbiasedness);
    step("C8 equidistribution rate", &equidistribution);
    step("C9 deviation tail", &deviation_tail);
    step("C10 L1 kernel growth", &l1_growth);
    step("C11 sup-convolution bound", &sup_convolution);
    step("C12 determinism", &determinism);

    let verbose = std::env::var_os("EQZ_ACCEPTANCE_VERBOSE").is_some();
    let mut failed = 0;
    for (name, v) in &verdicts {
        if v.failures.is_empty() {
            println!("PASS {name}");
        } else {
            failed += 1;
            println!("FAIL {name}: {}", v.failures.join("; "));
        }
        if verbose {
            for d in &v.details {
                println!("    {d}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.0}s", verdicts.len() - failed, verdicts.len(), total.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
