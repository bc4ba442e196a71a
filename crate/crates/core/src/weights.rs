//! Global weights `φ` on P¹, i.e. metrics `h = h_FS e^{-2φ}` on `O(1)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sphere::{fs_potential, Chart, SpherePoint};

/// Default half-width of the radial window `t = ln|z| ∈ [−T, T]`.
pub const DEFAULT_RADIAL_WINDOW: f64 = 14.0;

/// Serializable description of a weight, used in experiment configs and for
/// cache keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        c: f64,
    },
    /// `φ = ½ ln((1 + (1+β)|z|²)/(1 + |z|²))`: the Fubini–Study potential of
    /// the dilation `z ↦ √(1+β) z`, minus `φ_FS`. Smooth, radial, and
    /// `ω_FS`-psh for every `β > −1`.
    ScaledFs {
        beta: f64,
    },
    /// `φ = a exp(−|z|²/s²)`.
    GaussBump {
        a: f64,
        s: f64,
    },
    /// `φ = a max(0, 1 − 2 d(·, centre)/π)^α`.
    HolderBump {
        a: f64,
        alpha: f64,
        #[serde(default = "north")]
        center: [f64; 3],
    },
    /// Values on per-chart rectangular lattices, bilinearly interpolated.
    Csv {
        path: String,
    },
    Shifted {
        base: Box<WeightSpec>,
        c: f64,
    },
    /// Weights built programmatically (Lelong-class imports, ball sups, ...).
    Custom {
        label: String,
    },
}

fn north() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl WeightSpec {
    pub fn build<T: Real>(&self) -> Result<Weight<T>> {
        match self {
            WeightSpec::Constant { c } => constant(*c),
            WeightSpec::ScaledFs { beta } => scaled_fs(*beta),
            WeightSpec::GaussBump { a, s } => gauss_bump(*a, *s),
            WeightSpec::HolderBump { a, alpha, center } => holder_bump(*a, *alpha, *center),
            WeightSpec::Csv { path } => from_csv(Path::new(path)),
            WeightSpec::Shifted { base, c } => Ok(base.build::<T>()?.shifted(*c)),
            WeightSpec::Custom { label } => Err(Error::InvalidArgument(format!(
                "custom weight `{label}` cannot be rebuilt from its description"
            ))),
        }
    }
}

/// Hölder metadata: `|φ(x) − φ(y)| ≤ constant · d(x, y)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub exponent: f64,
    pub constant: f64,
}

type PointFn<T> = Arc<dyn Fn(&SpherePoint<T>) -> T + Send + Sync>;
type ProfileFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A continuous global weight with metadata.
#[derive(Clone)]
pub struct Weight<T> {
    spec: WeightSpec,
    eval: PointFn<T>,
    profile: Option<ProfileFn<T>>,
    smooth: bool,
    holder: Option<Holder>,
    hash: String,
}

impl<T> fmt::Debug for Weight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("spec", &self.spec)
            .field("radial", &self.profile.is_some())
            .field("smooth", &self.smooth)
            .field("holder", &self.holder)
            .finish()
    }
}

impl<T: Real> Weight<T> {
    /// A weight from an arbitrary evaluator. `radial_profile`, when given,
    /// must satisfy `profile(t) = φ(e^t)`.
    pub fn custom<F>(label: &str, f: F, radial_profile: Option<ProfileFn<T>>, smooth: bool, holder: Option<Holder>) -> Self
    where
        F: Fn(&SpherePoint<T>) -> T + Send + Sync + 'static,
    {
        let spec = WeightSpec::Custom { label: label.to_string() };
        let hash = spec_hash(&spec, None);
        Self {
            spec,
            eval: Arc::new(f),
            profile: radial_profile,
            smooth,
            holder,
            hash,
        }
    }

    pub fn eval(&self, p: &SpherePoint<T>) -> T {
        (self.eval)(p)
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn is_radial(&self) -> bool {
        self.profile.is_some()
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn holder(&self) -> Option<Holder> {
        self.holder
    }

    /// Content hash of the weight description.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// `t ↦ φ(e^t)`, for radial weights.
    pub fn radial_profile(&self, t: T) -> Option<T> {
        self.profile.as_ref().map(|f| f(t))
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        let ct = T::lit(c);
        let profile = self.profile.clone().map(|f| -> ProfileFn<T> { Arc::new(move |t| f(t) + ct) });
        let spec = WeightSpec::Shifted {
            base: Box::new(self.spec.clone()),
            c,
        };
        let hash = spec_hash(&spec, Some(&self.hash));
        Self {
            spec,
            eval: Arc::new(move |p| inner(p) + ct),
            profile,
            smooth: self.smooth,
            holder: self.holder,
            hash,
        }
    }
}

fn spec_hash(spec: &WeightSpec, extra: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("weight spec serializes"));
    if let Some(e) = extra {
        h.update(e.as_bytes());
    }
    hex::encode(h.finalize())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("parameter `{name}` must be finite, got {v}")))
    }
}

/// `|z|²` of a point, `+∞` at the south pole.
fn abs_z_sqr<T: Real>(p: &SpherePoint<T>) -> T {
    let r2 = p.coord().norm_sqr();
    match p.chart() {
        Chart::Z => r2,
        Chart::W => {
            if r2 == T::zero() {
                T::infinity()
            } else {
                T::one() / r2
            }
        }
    }
}

/// Lipschitz constant (in the round metric) of a radial weight, from a dense
/// sampling of `|dφ/dd| = |φ'(t)| cosh t`.
fn radial_lipschitz(profile: &dyn Fn(f64) -> f64) -> f64 {
    let n = 200_000;
    let (lo, hi) = (-20.0, 20.0);
    let h = (hi - lo) / n as f64;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let t0 = lo + i as f64 * h;
        let slope = (profile(t0 + h) - profile(t0)) / h;
        let tm = t0 + 0.5 * h;
        best = best.max(slope.abs() * tm.cosh());
    }
    best * 1.01
}

pub fn constant<T: Real>(c: f64) -> Result<Weight<T>> {
    finite("c", c)?;
    let spec = WeightSpec::Constant { c };
    let ct = T::lit(c);
    Ok(Weight {
        hash: spec_hash(&spec, None),
        spec,
        eval: Arc::new(move |_| ct),
        profile: Some(Arc::new(move |_| ct)),
        smooth: true,
        holder: Some(Holder {
            exponent: 1.0,
            constant: 0.0,
        }),
    })
}

fn scaled_fs_profile<T: Real>(beta: T, t: T) -> T {
    let half = T::lit(0.5);
    let one = T::one();
    if t <= T::zero() {
        let e = (t + t).exp();
        half * ((one + (one + beta) * e).ln() - e.ln_1p())
    } else {
        let e = (-(t + t)).exp();
        half * ((one + beta + e).ln() - e.ln_1p())
    }
}

pub fn scaled_fs<T: Real>(beta: f64) -> Result<Weight<T>> {
    finite("beta", beta)?;
    if beta <= -1.0 {
        return Err(Error::InvalidArgument(format!("scaled_fs needs beta > -1, got {beta}")));
    }
    let spec = WeightSpec::ScaledFs { beta };
    let b = T::lit(beta);
    let lip = radial_lipschitz(&|t| scaled_fs_profile(beta, t));
    Ok(Weight {
        hash: spec_hash(&spec, None),
        spec,
        eval: Arc::new(move |p| {
            // φ = φ_FS(√(1+β) ζ) − φ_FS(ζ) in the z chart; in the w chart
            // the same expression in w plus the constant ½ln(1+β).
            let r2 = p.coord().norm_sqr();
            let one = T::one();
            let half = T::lit(0.5);
            match p.chart() {
                Chart::Z => half * ((one + b) * r2).ln_1p() - half * r2.ln_1p(),
                Chart::W => half * (r2 / (one + b)).ln_1p() - half * r2.ln_1p() + half * (one + b).ln(),
            }
        }),
        profile: Some(Arc::new(move |t| scaled_fs_profile(b, t))),
        smooth: true,
        holder: Some(Holder {
            exponent: 1.0,
            constant: lip,
        }),
    })
}

pub fn gauss_bump<T: Real>(a: f64, s: f64) -> Result<Weight<T>> {
    finite("a", a)?;
    finite("s", s)?;
    if s <= 0.0 {
        return Err(Error::InvalidArgument(format!("gauss_bump needs s > 0, got {s}")));
    }
    let spec = WeightSpec::GaussBump { a, s };
    let (at, s2) = (T::lit(a), T::lit(s * s));
    let lip = radial_lipschitz(&|t| a * (-(2.0 * t).exp() / (s * s)).exp());
    Ok(Weight {
        hash: spec_hash(&spec, None),
        spec,
        eval: Arc::new(move |p| {
            let r2 = abs_z_sqr(p);
            at * (-r2 / s2).exp()
        }),
        profile: Some(Arc::new(move |t| at * (-(t + t).exp() / s2).exp())),
        smooth: true,
        holder: Some(Holder {
            exponent: 1.0,
            constant: lip,
        }),
    })
}

pub fn holder_bump<T: Real>(a: f64, alpha: f64, center: [f64; 3]) -> Result<Weight<T>> {
    finite("a", a)?;
    finite("alpha", alpha)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("holder exponent must lie in (0, 1], got {alpha}")));
    }
    let n = (center[0].powi(2) + center[1].powi(2) + center[2].powi(2)).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument("holder_bump centre must be a nonzero vector".into()));
    }
    let c = [center[0] / n, center[1] / n, center[2] / n];
    let spec = WeightSpec::HolderBump { a, alpha, center: c };
    let cp = SpherePoint::<T>::from_unit_vector([T::lit(c[0]), T::lit(c[1]), T::lit(c[2])]);
    let (at, al) = (T::lit(a), T::lit(alpha));
    let bump = move |d: T| -> T {
        let g = (T::one() - T::lit(2.0) * d / T::PI()).max(T::zero());
        at * g.powf(al)
    };
    let pole_sign = if c[0] == 0.0 && c[1] == 0.0 { Some(c[2].signum()) } else { None };
    let profile: Option<ProfileFn<T>> = pole_sign.map(|sign| -> ProfileFn<T> {
        Arc::new(move |t: T| {
            let from_north = T::lit(2.0) * t.exp().atan();
            let d = if sign > 0.0 { from_north } else { T::PI() - from_north };
            bump(d)
        })
    });
    Ok(Weight {
        hash: spec_hash(&spec, None),
        spec,
        eval: Arc::new(move |p| bump(p.distance(&cp))),
        profile,
        smooth: false,
        holder: Some(Holder {
            exponent: alpha,
            constant: a.abs() * (2.0 / std::f64::consts::PI).powf(alpha),
        }),
    })
}

/// Construct a built-in weight from a family name and named parameters.
pub fn builtin<T: Real>(name: &str, params: &BTreeMap<String, f64>) -> Result<Weight<T>> {
    let get = |k: &str| -> Result<f64> {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("weight `{name}` needs parameter `{k}`")))
    };
    match name {
        "constant" => constant(get("c").unwrap_or(0.0)),
        "scaled_fs" => scaled_fs(get("beta")?),
        "gauss_bump" => gauss_bump(get("a")?, get("s")?),
        "holder_bump" => {
            let center = match (params.get("cx"), params.get("cy"), params.get("cz")) {
                (Some(&x), Some(&y), Some(&z)) => [x, y, z],
                _ => north(),
            };
            holder_bump(get("a")?, get("alpha")?, center)
        }
        other => Err(Error::UnknownWeight(other.to_string())),
    }
}

/// Import an entire psh function `ψ` of logarithmic growth on ℂ as the weight
/// `φ = ψ − ½ln(1+|z|²)`.
///
/// The growth bound `ψ ≤ ½ln(1+|z|²) + C_ψ` is checked on the rings
/// `|z| ∈ {10, 100, 1000}`. At `z = ∞` the value is taken at `|w| = 10⁻⁸`.
pub fn from_lelong<T, F>(psi: F, c_psi: f64) -> Result<Weight<T>>
where
    T: Real,
    F: Fn(Complex<T>) -> T + Send + Sync + 'static,
{
    for &radius in &[10.0f64, 100.0, 1000.0] {
        for k in 0..64 {
            let z = Complex::from_polar(T::lit(radius), T::lit(k as f64 * std::f64::consts::TAU / 64.0));
            let value = psi(z).as_f64();
            let bound = 0.5 * (radius * radius).ln_1p() + c_psi;
            if !(value <= bound + 1e-9 * (1.0 + bound.abs())) {
                return Err(Error::GrowthViolation { radius, value, bound });
            }
        }
    }
    let inf_w = T::lit(1e-8);
    let eval = move |p: &SpherePoint<T>| -> T {
        match p.chart() {
            Chart::Z => psi(p.coord()) - fs_potential(p.coord()),
            Chart::W => {
                let mut w = p.coord();
                if w.norm() < inf_w {
                    w = if w.norm_sqr() == T::zero() {
                        Complex::new(inf_w, T::zero())
                    } else {
                        w.unscale(w.norm()).scale(inf_w)
                    };
                }
                let z = w.inv();
                // ½ln(1+|z|²) = ½ln(1+|w|²) − ln|w|
                psi(z) - (fs_potential(w) - w.norm().ln())
            }
        }
    };
    Ok(Weight::custom("lelong", eval, None, false, None))
}

/// Upper envelope `ψ′(x) = sup_{B(x, ρ⁴)} ψ` in the chart of `x`, approximated
/// by the maximum over the centre and 4 concentric rings of 32 points.
pub fn ball_sup<T: Real>(w: &Weight<T>, rho: f64) -> Result<Weight<T>> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::InvalidArgument(format!("ball_sup needs rho in (0, 0.5), got {rho}")));
    }
    let radius = rho.powi(4);
    let mut offsets = Vec::with_capacity(128);
    for ring in 1..=4 {
        let r = radius * ring as f64 / 4.0;
        for k in 0..32 {
            let a = k as f64 * std::f64::consts::TAU / 32.0;
            offsets.push(Complex::new(T::lit(r * a.cos()), T::lit(r * a.sin())));
        }
    }
    let inner = w.clone();
    let eval = move |p: &SpherePoint<T>| -> T {
        let mut best = inner.eval(p);
        for &o in &offsets {
            let q = SpherePoint::from_chart(p.chart(), p.coord() + o);
            let v = inner.eval(&q);
            if v > best || best.is_nan() {
                best = v;
            }
        }
        best
    };
    Ok(Weight::custom(&format!("ball_sup(rho={rho})"), eval, None, false, None))
}

/// Lattice data for one chart.
#[derive(Debug, Clone)]
struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major over `(y, x)`.
    values: Vec<f64>,
}

impl Lattice {
    fn interpolate(&self, x: f64, y: f64) -> f64 {
        let (i, tx) = bracket(&self.xs, x);
        let (j, ty) = bracket(&self.ys, y);
        let nx = self.xs.len();
        let v = |jj: usize, ii: usize| self.values[jj * nx + ii];
        let i1 = (i + 1).min(nx - 1);
        let j1 = (j + 1).min(self.ys.len() - 1);
        (1.0 - ty) * ((1.0 - tx) * v(j, i) + tx * v(j, i1)) + ty * ((1.0 - tx) * v(j1, i) + tx * v(j1, i1))
    }
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last, 0.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t)
}

/// Parse `chart,re,im,value` rows; each chart must form a full rectangular
/// lattice. Lines starting with `#` and a `chart,...` header are skipped.
pub fn parse_csv_weight<T: Real>(text: &str, label: &str) -> Result<Weight<T>> {
    let mut rows: BTreeMap<Chart, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("chart") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", lineno + 1)));
        }
        let chart = Chart::parse(f[0]).ok_or_else(|| Error::Parse(format!("line {}: bad chart `{}`", lineno + 1, f[0])))?;
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let (re, im, v) = (num(f[1])?, num(f[2])?, num(f[3])?);
        if !v.is_finite() {
            return Err(Error::Parse(format!("line {}: non-finite value", lineno + 1)));
        }
        rows.entry(chart).or_default().push((re, im, v));
    }
    let mut lattices: BTreeMap<Chart, Lattice> = BTreeMap::new();
    for (chart, pts) in rows {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        if xs.len() * ys.len() != pts.len() {
            return Err(Error::Parse(format!(
                "{}-chart samples do not form a full lattice ({} x {} axes, {} rows)",
                chart.as_str(),
                xs.len(),
                ys.len(),
                pts.len()
            )));
        }
        let mut values = vec![f64::NAN; pts.len()];
        for (re, im, v) in pts {
            let i = xs.binary_search_by(|a| a.total_cmp(&re)).unwrap();
            let j = ys.binary_search_by(|a| a.total_cmp(&im)).unwrap();
            values[j * xs.len() + i] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse(format!("duplicate lattice node in {}-chart", chart.as_str())));
        }
        lattices.insert(chart, Lattice { xs, ys, values });
    }
    if lattices.len() != 2 {
        return Err(Error::Parse("CSV weight needs samples in both the z and w charts".into()));
    }
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let content = hex::encode(h.finalize());
    let spec = WeightSpec::Csv { path: label.to_string() };
    let hash = spec_hash(&spec, Some(&content));
    let eval = move |p: &SpherePoint<T>| -> T {
        let c = p.coord();
        let lat = &lattices[&p.chart()];
        T::lit(lat.interpolate(c.re.as_f64(), c.im.as_f64()))
    };
    Ok(Weight {
        spec,
        eval: Arc::new(eval),
        profile: None,
        smooth: false,
        holder: None,
        hash,
    })
}

pub fn from_csv<T: Real>(path: &Path) -> Result<Weight<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_weight(&text, &path.display().to_string())
}
