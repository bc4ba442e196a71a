//! Dictionary seminorms, current masses and convergence-rate fits.
//!
//! Every dictionary element has C² norm at most one, so the largest pairing
//! gap over a dictionary is a lower bound for the dual C² norm of the
//! difference of two currents.

use serde::{Deserialize, Serialize};

use crate::bergman::SectionSpace;
use crate::envelope::{equilibrium_pairing, EnvelopeResult};
use crate::error::{Error, Result};
use crate::harmonics::{Dictionary, TestFunction};
use crate::quadrature::QuadratureGrid;
use crate::scalar::Real;
use crate::sections::{empirical_pairing, ZeroSet};
use crate::table::{num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentTag {
    Empirical,
    FsCurrent,
    Equilibrium,
    FubiniStudy,
}

impl CurrentTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CurrentTag::Empirical => "empirical",
            CurrentTag::FsCurrent => "fs_current",
            CurrentTag::Equilibrium => "equilibrium",
            CurrentTag::FubiniStudy => "fubini_study",
        }
    }
}

/// Pairings of one current with every element of a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingVector {
    pub tag: CurrentTag,
    pub values: Vec<f64>,
    pub dictionary_id: String,
}

impl PairingVector {
    pub fn new(tag: CurrentTag, values: Vec<f64>, dict: &Dictionary) -> Result<Self> {
        if values.len() != dict.len() {
            return Err(Error::DictionaryMismatch(format!(
                "{} pairings for a dictionary of {} elements",
                values.len(),
                dict.len()
            )));
        }
        Ok(Self {
            tag,
            values,
            dictionary_id: dict.id(),
        })
    }

    pub fn from_reals<T: Real>(tag: CurrentTag, values: &[T], dict: &Dictionary) -> Result<Self> {
        Self::new(tag, values.iter().map(|v| v.as_f64()).collect(), dict)
    }

    /// CSV row: `p, dictionary id, values…`.
    pub fn to_row(&self, p: usize) -> Vec<String> {
        let mut r = vec![p.to_string(), self.dictionary_id.clone()];
        r.extend(self.values.iter().map(|v| num(*v)));
        r
    }

    /// Header matching [`PairingVector::to_row`].
    pub fn header(dict: &Dictionary) -> Vec<String> {
        let mut h = vec!["p".to_string(), "dictionary".to_string()];
        h.extend(dict.elements.iter().map(|e| format!("u_{}_{}", e.l, e.m)));
        h
    }
}

/// `max_i |a_i − b_i|` over a shared dictionary.
pub fn dict_seminorm(a: &PairingVector, b: &PairingVector) -> Result<f64> {
    if a.dictionary_id != b.dictionary_id || a.values.len() != b.values.len() {
        return Err(Error::DictionaryMismatch(format!(
            "`{}` ({}) vs `{}` ({})",
            a.dictionary_id,
            a.values.len(),
            b.dictionary_id,
            b.values.len()
        )));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// A current whose mass can be measured.
pub enum Current<'a, T> {
    /// `(1/p)[Div s]`.
    ScaledDivisor(&'a ZeroSet<T>, usize),
    /// `(1/p)ω_p`.
    FsCurrent(&'a SectionSpace<T>, &'a QuadratureGrid<T>),
    /// `ω_eq`.
    Equilibrium(&'a EnvelopeResult<T>, &'a QuadratureGrid<T>),
    FubiniStudy,
}

/// Pairing with the constant function 1.
pub fn mass<T: Real>(c: &Current<'_, T>) -> T {
    let one = TestFunction::harmonic(0, 0);
    match c {
        Current::ScaledDivisor(zs, p) => empirical_pairing(zs, &one, *p),
        Current::FsCurrent(space, grid) => crate::bergman::fs_current_pairing(space, &one, grid),
        Current::Equilibrium(env, grid) => equilibrium_pairing(env, &one, grid),
        Current::FubiniStudy => T::one(),
    }
}

/// Fit of a sequence `e_p` against the envelope `log p / p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(usize, f64)>,
    /// `r_p = e_p · p / log p`.
    pub ratios: Vec<f64>,
    /// `C = max r_p`.
    pub c: f64,
    pub median_ratio: f64,
    /// Least-squares slope of `log e_p` against `log p`.
    pub slope: f64,
}

impl RateFit {
    /// Whether `max r_p ≤ factor · median r_p`.
    pub fn stable(&self, factor: f64) -> bool {
        self.c <= factor * self.median_ratio
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["p", "error", "ratio"]);
        for ((p, e), r) in self.points.iter().zip(&self.ratios) {
            t.push(vec![p.to_string(), num(*e), num(*r)]);
        }
        t.meta("fitted_c", self.c)
            .meta("median_ratio", self.median_ratio)
            .meta("loglog_slope", self.slope);
        t
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope and intercept of `y` against `x`, and `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// [`rate_fit`] with a configurable minimum number of points, for short
/// schedules. Still requires `p ≥ 5` so that `log p > 1`.
pub fn rate_fit_min(seq: &[(usize, f64)], min_points: usize) -> Result<RateFit> {
    if seq.len() < min_points.max(2) {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least {} points, got {}",
            min_points.max(2),
            seq.len()
        )));
    }
    if let Some((p, _)) = seq.iter().find(|(p, _)| *p < 5) {
        return Err(Error::InvalidArgument(format!("rate fit uses p >= 5 only, got p = {p}")));
    }
    if let Some((p, e)) = seq.iter().find(|(_, e)| !e.is_finite() || *e < 0.0) {
        return Err(Error::InvalidArgument(format!("error at p = {p} is {e}")));
    }
    let ratios: Vec<f64> = seq.iter().map(|&(p, e)| e * p as f64 / (p as f64).ln()).collect();
    let c = ratios.iter().copied().fold(0.0, f64::max);
    let positive: Vec<(f64, f64)> = seq.iter().filter(|(_, e)| *e > 0.0).map(|&(p, e)| ((p as f64).ln(), e.ln())).collect();
    let slope = if positive.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        linear_fit(&x, &y).0
    } else {
        f64::NAN
    };
    Ok(RateFit {
        points: seq.to_vec(),
        median_ratio: median(&ratios),
        ratios,
        c,
        slope,
    })
}

/// Fit `e_p ≤ C log p / p` over at least five points with `p ≥ 5`.
pub fn rate_fit(seq: &[(usize, f64)]) -> Result<RateFit> {
    rate_fit_min(seq, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::harmonic_dictionary;
    use proptest::prelude::*;

    fn pv(values: Vec<f64>, dict: &Dictionary) -> PairingVector {
        PairingVector::new(CurrentTag::Empirical, values, dict).unwrap()
    }

    #[test]
    fn seminorm_basics() {
        let d2 = harmonic_dictionary(2).unwrap();
        let d3 = harmonic_dictionary(3).unwrap();
        let a = pv(vec![0.1; 9], &d2);
        assert_eq!(dict_seminorm(&a, &a).unwrap(), 0.0);
        let b = pv(vec![0.1; 16], &d3);
        assert!(matches!(dict_seminorm(&a, &b), Err(Error::DictionaryMismatch(_))));
        assert!(PairingVector::new(CurrentTag::Empirical, vec![0.0; 3], &d2).is_err());
        let row = a.to_row(7);
        assert_eq!(row.len(), PairingVector::header(&d2).len());
        assert_eq!(row[0], "7");
    }

    #[test]
    fn larger_dictionary_never_decreases() {
        // the degree-L harmonics are a prefix of the degree-(L+2) ones
        let d2 = harmonic_dictionary(2).unwrap();
        let d4 = harmonic_dictionary(4).unwrap();
        assert_eq!(&d4.elements[..9], &d2.elements[..]);
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..25).map(|i| (i as f64 * 0.11).cos()).collect();
        let small = dict_seminorm(&pv(x[..9].to_vec(), &d2), &pv(y[..9].to_vec(), &d2)).unwrap();
        let large = dict_seminorm(&pv(x, &d4), &pv(y, &d4)).unwrap();
        assert!(large >= small);
    }

    #[test]
    fn lower_bound_semantics() {
        let d = harmonic_dictionary(3).unwrap();
        let a = pv(vec![0.0; 16], &d);
        let mut v = vec![0.0; 16];
        v[5] = -0.25;
        let b = pv(v, &d);
        assert_eq!(dict_seminorm(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn rate_fit_examples() {
        let exact: Vec<(usize, f64)> = (5..=12).map(|p| (p, (p as f64).ln() / p as f64)).collect();
        let f = rate_fit(&exact).unwrap();
        assert!((f.c - 1.0).abs() < 1e-15);
        assert!(f.ratios.iter().all(|r| (r - 1.0).abs() < 1e-15));
        let inv: Vec<(usize, f64)> = (5..=12).map(|p| (p, 1.0 / p as f64)).collect();
        let f = rate_fit(&inv).unwrap();
        assert!((f.c - 1.0 / 5f64.ln()).abs() < 1e-15);
        assert!(f.ratios.windows(2).all(|w| w[1] < w[0]));
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(rate_fit(&inv[..4]).is_err());
        assert!(rate_fit(&[(3, 0.1), (5, 0.1), (6, 0.1), (7, 0.1), (8, 0.1)]).is_err());
        assert!(rate_fit(&[]).is_err());
        let t = f.to_table();
        assert_eq!(t.len(), 8);
    }

    #[test]
    fn masses() {
        assert_eq!(mass::<f64>(&Current::FubiniStudy), 1.0);
    }

    proptest! {
        #[test]
        fn pseudometric(a in proptest::collection::vec(-1.0f64..1.0, 9),
                        b in proptest::collection::vec(-1.0f64..1.0, 9),
                        c in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let d = harmonic_dictionary(2).unwrap();
            let (a, b, c) = (pv(a, &d), pv(b, &d), pv(c, &d));
            let ab = dict_seminorm(&a, &b).unwrap();
            prop_assert_eq!(ab, dict_seminorm(&b, &a).unwrap());
            prop_assert!(ab <= dict_seminorm(&a, &c).unwrap() + dict_seminorm(&c, &b).unwrap() + 1e-15);
            prop_assert_eq!(dict_seminorm(&a, &a).unwrap(), 0.0);
        }
    }
}
