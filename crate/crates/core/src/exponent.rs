//! Variable exponents `p(·)`: bounds, log-Hölder diagnostics, conjugates.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Cube, Domain, GridFunction};

/// Analytic profile that can be resampled at another resolution.
pub type Profile = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Stand-in for `s(x) = ∞` where `p(x) = p∞`.
pub const S_SENTINEL: f64 = 1e12;

/// Exponent sampled at lattice points, with cached bounds and a declared limit at infinity.
#[derive(Clone)]
pub struct VariableExponent {
    values: GridFunction,
    p_minus: f64,
    p_plus: f64,
    p_infty: Option<f64>,
    profile: Option<Profile>,
}

impl std::fmt::Debug for VariableExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariableExponent")
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("p_infty", &self.p_infty)
            .finish()
    }
}

impl VariableExponent {
    pub fn new(values: GridFunction, p_infty: Option<f64>) -> Result<Self> {
        let (p_minus, p_plus) = checked_bounds(&values)?;
        if let Some(v) = p_infty {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidExponent(format!("p_infty = {v}")));
            }
        }
        Ok(VariableExponent {
            values,
            p_minus,
            p_plus,
            p_infty,
            profile: None,
        })
    }

    pub fn constant(domain: Domain, v: f64) -> Result<Self> {
        let p = Self::new(GridFunction::constant(domain, v), Some(v))?;
        Ok(p.with_profile(Arc::new(move |_| v)))
    }

    /// Samples `f` at the lattice points and keeps it for resampling.
    pub fn from_fn(
        domain: Domain,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        p_infty: Option<f64>,
    ) -> Result<Self> {
        let profile: Profile = Arc::new(f);
        let g = {
            let pr = profile.clone();
            GridFunction::from_fn(domain, move |x| pr(x))?
        };
        Ok(Self::new(g, p_infty)?.with_profile(profile))
    }

    fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = Some(profile);
        self
    }

    /// Same exponent on another lattice; needs an analytic profile.
    pub fn resample(&self, domain: Domain) -> Result<Self> {
        let pr = self
            .profile
            .clone()
            .ok_or_else(|| Error::InvalidExponent("exponent has no profile to resample".into()))?;
        let g = {
            let pr = pr.clone();
            GridFunction::from_fn(domain, move |x| pr(x))?
        };
        Ok(Self::new(g, self.p_infty)?.with_profile(pr))
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn domain(&self) -> &Domain {
        self.values.domain()
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_infty(&self) -> Option<f64> {
        self.p_infty
    }

    pub fn at(&self, flat: usize) -> f64 {
        self.values.samples()[flat]
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// Membership in the class 𝒫 (p₋ > 1).
    pub fn is_class_p(&self) -> bool {
        self.p_minus > 1.0
    }

    /// Pointwise `p + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let v = self.values.map(|p| p + c);
        let mut out = Self::new(v, self.p_infty.map(|p| p + c))?;
        if let Some(pr) = self.profile.clone() {
            out.profile = Some(Arc::new(move |x| pr(x) + c));
        }
        Ok(out)
    }

    /// `(min, max)` over the points of `cube`.
    pub fn local_bounds(&self, cube: &Cube) -> (f64, f64) {
        cube.lattice_points(self.domain()).iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), &i| {
                let v = self.at(i);
                (lo.min(v), hi.max(v))
            },
        )
    }
}

fn checked_bounds(values: &GridFunction) -> Result<(f64, f64)> {
    if let Some(i) = values.samples().iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidExponent(format!(
            "non-positive sample {} at flat index {i}",
            values.samples()[i]
        )));
    }
    Ok((values.min(), values.max()))
}

/// `(p₋, p₊)` over the window samples.
pub fn bounds(p: &VariableExponent) -> (f64, f64) {
    (p.p_minus, p.p_plus)
}

fn lh0_pair(p: &VariableExponent, i: usize, j: usize, dist: f64) -> f64 {
    (p.at(i) - p.at(j)).abs() * (1.0 / dist).ln()
}

/// Empirical local log-Hölder constant: sup over lattice pairs with
/// `0 < |x-y| ≤ 1/2` of `|p(x)-p(y)| log(1/|x-y|)`. In two dimensions the
/// offsets are restricted to the axes and diagonals.
pub fn lh0_constant(p: &VariableExponent) -> f64 {
    let d = *p.domain();
    let h = d.h();
    let n = d.axis_len();
    let max_off = (0.5 / h).floor() as usize;
    if d.dim() == 1 {
        return (1..=max_off.min(n - 1))
            .into_par_iter()
            .map(|k| {
                let dist = k as f64 * h;
                (0..n - k)
                    .map(|i| lh0_pair(p, i, i + k, dist))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
    }
    let dirs: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    dirs.par_iter()
        .map(|&(a, b)| {
            let step = ((a * a + b * b) as f64).sqrt() * h;
            let kmax = (0.5 / step).floor() as i64;
            let mut best: f64 = 0.0;
            for k in 1..=kmax.min(n as i64 - 1) {
                let dist = k as f64 * step;
                for i0 in 0..n as i64 {
                    for i1 in 0..n as i64 {
                        let (j0, j1) = (i0 + k * a, i1 + k * b);
                        if j0 < 0 || j1 < 0 || j0 >= n as i64 || j1 >= n as i64 {
                            continue;
                        }
                        let fi = d.flatten([i0 as usize, i1 as usize]);
                        let fj = d.flatten([j0 as usize, j1 as usize]);
                        best = best.max(lh0_pair(p, fi, fj, dist));
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Empirical decay constant `sup |p(x) - p∞| log(e + |x|)`.
pub fn lhinf_constant(p: &VariableExponent) -> Result<f64> {
    let pinf = p
        .p_infty
        .ok_or_else(|| Error::InvalidExponent("p_infty not declared".into()))?;
    let d = *p.domain();
    Ok((0..d.len())
        .map(|i| {
            let r = crate::grid::norm(&d.point(i), d.dim());
            (p.at(i) - pinf).abs() * (std::f64::consts::E + r).ln()
        })
        .fold(0.0, f64::max))
}

/// Pointwise conjugate `p' = p/(p-1)`.
pub fn dual_exponent(p: &VariableExponent) -> Result<VariableExponent> {
    if p.p_minus <= 1.0 {
        return Err(Error::InvalidExponent(format!(
            "dual exponent needs p_minus > 1, got {}",
            p.p_minus
        )));
    }
    let conj = |v: f64| v / (v - 1.0);
    let values = p.values.map(conj);
    let pinf = p.p_infty.filter(|&v| v > 1.0).map(conj);
    let mut out = VariableExponent::new(values, pinf)?;
    if let Some(pr) = p.profile.clone() {
        out.profile = Some(Arc::new(move |x| conj(pr(x))));
    }
    Ok(out)
}

/// `p_E` with `1/p_E` the average of `1/p` over the lattice points of `cube`.
pub fn mean_exponent(p: &VariableExponent, cube: &Cube) -> f64 {
    let pts = cube.lattice_points(p.domain());
    let inv: Vec<f64> = pts.iter().map(|&i| 1.0 / p.at(i)).collect();
    pts.len() as f64 / crate::grid::pairwise_sum(&inv)
}

/// `s(x)` with `1/s = |1/p∞ - 1/p(x)|`; [`S_SENTINEL`] where the difference vanishes.
pub fn s_exponent(p: &VariableExponent) -> Result<GridFunction> {
    let pinf = p
        .p_infty
        .ok_or_else(|| Error::InvalidExponent("p_infty not declared".into()))?;
    Ok(p.values.map(|v| {
        let inv = (1.0 / pinf - 1.0 / v).abs();
        if inv * S_SENTINEL <= 1.0 {
            S_SENTINEL
        } else {
            1.0 / inv
        }
    }))
}

/// `∫ γ^{s(x)/p₋} w dx`, the integrability probe behind the decay lemma.
pub fn s_integrability_probe(p: &VariableExponent, gamma: f64, w: &GridFunction) -> Result<f64> {
    let s = s_exponent(p)?;
    let pm = p.p_minus;
    let integrand = s.zip_with(w, |sv, wv| gamma.powf(sv / pm) * wv)?;
    Ok(integrand.integral())
}
