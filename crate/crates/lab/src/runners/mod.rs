//! Experiment runners. Each takes a validated config and returns a report;
//! nothing is written to disk here.

mod convergence;
mod envelope;
mod kernel;
mod mp;
mod twisted;
mod zeros;

pub use convergence::run_convergence;
pub use envelope::run_envelope;
pub use kernel::{run_bergman, sup_convolution_check, SupConvolutionRow};
pub use mp::run_mp_constant;
pub use twisted::run_twisted;
pub use zeros::{run_deviation, run_equidistribution, run_sample_zeros, run_sequence};

use std::path::PathBuf;

use eqz_core::bergman::{build_space_cached, SectionSpace};
use eqz_core::envelope::{lcp_envelope, radial_envelope, EnvelopeResult, Method};
use eqz_core::harmonics::{harmonic_dictionary, localized_dictionary, Cap, Dictionary};
use eqz_core::quadrature::make_grid;
use eqz_core::{Grid, Point, Weight};

use crate::config::{ExperimentConfig, MethodChoice};
use crate::error::{LabError, Result};
use crate::report::{ExperimentReport, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Envelope,
    Bergman,
    SampleZeros,
    Convergence,
    Equidistribution,
    Deviation,
    Sequence,
    Twisted,
    MpConstant,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Envelope,
        Command::Bergman,
        Command::SampleZeros,
        Command::Convergence,
        Command::Equidistribution,
        Command::Deviation,
        Command::Sequence,
        Command::Twisted,
        Command::MpConstant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Envelope => "envelope",
            Command::Bergman => "bergman",
            Command::SampleZeros => "sample-zeros",
            Command::Convergence => "convergence",
            Command::Equidistribution => "equidistribution",
            Command::Deviation => "deviation",
            Command::Sequence => "sequence",
            Command::Twisted => "twisted",
            Command::MpConstant => "mp-constant",
        }
    }

    /// Degrees used when the config gives none.
    pub fn default_p(self) -> Vec<usize> {
        match self {
            Command::Envelope => Vec::new(),
            Command::Bergman => vec![1, 5, 20, 50],
            Command::SampleZeros => vec![20],
            Command::Convergence | Command::Twisted => (1..=15).map(|i| 10 * i).collect(),
            Command::Equidistribution => vec![20, 50, 100],
            Command::Deviation => vec![30],
            Command::Sequence => (1..=20).map(|i| 5 * i).collect(),
            Command::MpConstant => vec![1, 2, 3, 5, 10, 100, 1_000, 10_000, 100_000, 1_000_000],
        }
    }

    pub fn default_m(self) -> i64 {
        match self {
            Command::Twisted => -2,
            _ => 0,
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            Command::SampleZeros => 10,
            Command::Deviation => 5000,
            Command::Sequence | Command::Twisted => 100,
            _ => 200,
        }
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match command {
        Command::Envelope => run_envelope(cfg),
        Command::Bergman => run_bergman(cfg),
        Command::SampleZeros => run_sample_zeros(cfg),
        Command::Convergence => run_convergence(cfg),
        Command::Equidistribution => run_equidistribution(cfg),
        Command::Deviation => run_deviation(cfg),
        Command::Sequence => run_sequence(cfg),
        Command::Twisted => run_twisted(cfg),
        Command::MpConstant => run_mp_constant(cfg),
    }
}

/// Resolved inputs shared by the runners.
pub(crate) struct Context {
    pub cfg: ExperimentConfig,
    pub command: Command,
    pub weight: Weight,
    pub grid: Grid,
    pub p: Vec<usize>,
    pub m: i64,
    pub samples: usize,
    cache: Option<PathBuf>,
}

impl Context {
    pub fn new(command: Command, cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let p = match &cfg.p {
            Some(v) if v.is_empty() => return Err(LabError::Config("p list is empty".into())),
            Some(v) => v.clone(),
            None => command.default_p(),
        };
        let m = cfg.m.unwrap_or(command.default_m());
        if let Some(&bad) = p.iter().find(|&&p| (p as i64) + m < 0) {
            return Err(LabError::Config(format!("twist m = {m} is below -p for p = {bad}")));
        }
        let weight = cfg.weight.build::<f64>()?;
        let grid = make_grid::<f64>(cfg.grid.n_r, cfg.grid.n_theta)?;
        Ok(Self {
            cfg: cfg.clone(),
            command,
            weight,
            grid,
            p,
            m,
            samples: cfg.samples.unwrap_or(command.default_samples()),
            cache: cfg.cache_dir.clone(),
        })
    }

    pub fn report(&self) -> ExperimentReport {
        ExperimentReport::new(
            self.command.as_str(),
            Provenance {
                config_hash: self.cfg.hash(),
                grid_hash: self.grid.content_hash().to_string(),
                weight_hash: self.weight.hash().to_string(),
                seed: self.cfg.seed,
            },
        )
    }

    /// Zero-set experiments live on P¹, where the multi-projective product
    /// has a single factor.
    pub fn require_single_factor(&self) -> Result<()> {
        if self.cfg.k != 1 {
            return Err(LabError::Config(format!(
                "{} draws single sections on P1 (k = 1), got k = {}",
                self.command.as_str(),
                self.cfg.k
            )));
        }
        Ok(())
    }

    pub fn space(&self, p: usize, m: i64) -> Result<SectionSpace<f64>> {
        Ok(build_space_cached(p, m, &self.weight, &self.grid, self.cache.as_deref())?.0)
    }

    pub fn method(&self) -> Method {
        match self.cfg.envelope.method {
            MethodChoice::Auto if self.weight.is_radial() => Method::RadialHull,
            MethodChoice::Auto | MethodChoice::Lcp => Method::Lcp,
            MethodChoice::RadialHull => Method::RadialHull,
        }
    }

    /// `φ_eq` of `w` with `method`; aborts when the solver did not converge.
    pub fn solve(&self, w: &Weight, method: Method) -> Result<EnvelopeResult<f64>> {
        let env = match method {
            Method::RadialHull => radial_envelope(w, &self.cfg.envelope.radial)?,
            Method::Lcp => lcp_envelope(w, &self.cfg.envelope.lcp_grid, &self.cfg.envelope.lcp)?,
        };
        if !env.converged {
            return Err(LabError::NotConverged(format!(
                "{} envelope after {} iterations, residuals {:?}",
                method.as_str(),
                env.iterations,
                env.residuals
            )));
        }
        Ok(env)
    }

    pub fn envelope(&self) -> Result<EnvelopeResult<f64>> {
        self.solve(&self.weight, self.method())
    }

    pub fn region(&self) -> Result<Option<Cap>> {
        self.cfg.region.map(|r| r.cap()).transpose()
    }

    pub fn dictionary(&self, region: Option<Cap>) -> Result<Dictionary> {
        Ok(match region {
            Some(c) => localized_dictionary(self.cfg.dictionary_degree, c)?,
            None => harmonic_dictionary(self.cfg.dictionary_degree)?,
        })
    }
}

/// A grid sharing no nodes with `grid`, for checks independent of the
/// quadrature used to build the Gram matrix.
pub(crate) fn independent_grid(grid: &Grid) -> Result<Grid> {
    Ok(make_grid(grid.n_r() + 31, grid.n_theta() + 29)?)
}

/// Seeded points spread uniformly over the sphere (normalized Gaussians).
pub(crate) fn sample_points(seed: u64, n: usize) -> Vec<Point> {
    let mut rng = eqz_core::rng::stream(seed, 0, 254, 0);
    (0..n)
        .map(|_| {
            let g = eqz_core::rng::complex_gaussian_vec::<f64, _>(&mut rng, 2);
            let v = [g[0].re, g[0].im, g[1].re];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-300);
            Point::from_unit_vector([v[0] / r, v[1] / r, v[2] / r])
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics.
pub(crate) fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (h - i as f64) * (v[j] - v[i])
}

pub(crate) fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::INFINITY, f64::min)
}

/// `max r ≤ factor · median r` over finite entries; `None` with fewer than
/// three values.
pub(crate) fn bounded_ratio(values: &[f64], factor: f64) -> Option<(bool, f64, f64)> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 3 {
        return None;
    }
    let max = max_of(v.iter().copied());
    let med = eqz_core::discrepancy::median(&v);
    Some((max <= factor * med, max, med))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn sample_points_are_reproducible_and_unit() {
        let a = sample_points(3, 100);
        let b = sample_points(3, 100);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.unit_vector(), y.unit_vector());
            let u = x.unit_vector();
            assert!((u[0] * u[0] + u[1] * u[1] + u[2] * u[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn context_resolves_defaults_and_rejects_bad_twists() {
        let cfg = ExperimentConfig::default();
        let ctx = Context::new(Command::Twisted, &cfg).unwrap();
        assert_eq!(ctx.m, -2);
        assert_eq!(ctx.p.len(), 15);
        let mut bad = cfg.clone();
        bad.p = Some(vec![1]);
        assert!(Context::new(Command::Twisted, &bad).is_err());
        bad.p = Some(vec![]);
        assert!(Context::new(Command::Sequence, &bad).is_err());
    }
}
