//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use eqz_core::envelope::{LatLongGrid, LcpOptions, RadialGrid};
use eqz_core::harmonics::{Cap, MAX_DEGREE};
use eqz_core::weights::WeightSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Convex hull for radial weights, obstacle problem otherwise.
    #[default]
    Auto,
    RadialHull,
    Lcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_r: eqz_core::quadrature::DEFAULT_N_R,
            n_theta: eqz_core::quadrature::DEFAULT_N_THETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub center: [f64; 3],
    pub radius: f64,
}

impl RegionConfig {
    pub fn cap(&self) -> Result<Cap> {
        Ok(Cap::new(self.center, self.radius)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeConfig {
    pub method: MethodChoice,
    pub radial: RadialGrid,
    pub lcp_grid: LatLongGrid,
    pub lcp: LcpOptions,
    /// Bound on the obstacle, feasibility and complementarity residuals.
    pub residual_tol: f64,
    /// Bound on the sup-difference between the two solvers.
    pub cross_check_tol: f64,
    /// Bound on the sup-change when the envelope is recomputed from itself.
    pub idempotence_tol: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            radial: RadialGrid::default(),
            lcp_grid: LatLongGrid::default(),
            lcp: LcpOptions::default(),
            residual_tol: 1e-6,
            cross_check_tol: 5e-3,
            idempotence_tol: 2e-6,
        }
    }
}

/// Everything a runner needs. Optional fields fall back to per-command
/// defaults (see [`crate::runners::Command`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub weight: WeightSpec,
    pub p: Option<Vec<usize>>,
    pub m: Option<i64>,
    pub k: usize,
    pub samples: Option<usize>,
    pub seed: u64,
    pub grid: GridConfig,
    pub dictionary_degree: usize,
    pub region: Option<RegionConfig>,
    pub envelope: EnvelopeConfig,
    /// Explicit threshold grid for the deviation tail; empty means automatic.
    pub lambdas: Vec<f64>,
    /// Slopes `a` of the schedule `λ_p = a log p`.
    pub lambda_a: Vec<f64>,
    /// Number of independent sequences for the almost-sure experiment.
    pub sequences: usize,
    /// Stability factor: `max r_p ≤ rate_factor · median r_p`.
    pub rate_factor: f64,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            weight: WeightSpec::Constant { c: 0.0 },
            p: None,
            m: None,
            k: 1,
            samples: None,
            seed: 0,
            grid: GridConfig::default(),
            dictionary_degree: eqz_core::harmonics::DEFAULT_DEGREE,
            region: None,
            envelope: EnvelopeConfig::default(),
            lambdas: Vec::new(),
            lambda_a: vec![1.0, 2.0, 4.0, 8.0],
            sequences: 50,
            rate_factor: 2.0,
            out_dir: None,
            cache_dir: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.samples == Some(0) {
            return Err(invalid("samples must be at least 1"));
        }
        if let Some(p) = self.p.iter().flatten().find(|&&p| p == 0 || p >= 1 << 24) {
            return Err(invalid(format!("p = {p} is out of range [1, 2^24)")));
        }
        if self.grid.n_r < 4 || self.grid.n_theta < 4 {
            return Err(invalid("grid needs n_r, n_theta >= 4"));
        }
        if self.dictionary_degree > MAX_DEGREE {
            return Err(invalid(format!("dictionary_degree must be <= {MAX_DEGREE}")));
        }
        if let Some(r) = &self.region {
            r.cap()?;
        }
        LatLongGrid::new(self.envelope.lcp_grid.n_lat, self.envelope.lcp_grid.n_lon)?;
        let rg = &self.envelope.radial;
        if !(rg.t_max > 0.0 && rg.t_max.is_finite()) || rg.n < 3 {
            return Err(invalid("radial envelope grid needs t_max > 0 and n >= 3"));
        }
        for (name, v) in [
            ("residual_tol", self.envelope.residual_tol),
            ("cross_check_tol", self.envelope.cross_check_tol),
            ("idempotence_tol", self.envelope.idempotence_tol),
            ("rate_factor", self.rate_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lambda_a.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(invalid("lambda_a entries must be positive"));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(invalid("lambdas must be finite and nonnegative"));
        }
        if self.sequences == 0 {
            return Err(invalid("sequences must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output and cache
    /// locations (they never change numerical results).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        c.cache_dir = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
