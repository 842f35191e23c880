//! Modulars, Luxemburg norms and the basic lemmas around them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponent::{dual_exponent, VariableExponent};
use crate::grid::{pairwise_sum, reference_shift, Cube, GridFunction, LevelBlocks};
use crate::report::Report;
use crate::weight::Weight;

const LAMBDA_MAX: f64 = 1e30;

/// `∫ |f|^{p(x)} w dx`.
pub fn modular(f: &GridFunction, p: &VariableExponent, w: &Weight) -> f64 {
    let d = f.domain();
    let terms: Vec<f64> = (0..f.len())
        .map(|i| {
            let v = f.samples()[i].abs();
            if v == 0.0 {
                0.0
            } else {
                v.powf(p.at(i)) * w.at(i)
            }
        })
        .collect();
    d.cell_volume() * pairwise_sum(&terms)
}

fn log_sum_exp(terms: &[(f64, f64)], s: f64) -> (f64, f64) {
    // returns (ln F(s), -F'(s)/F(s)) for F(s) = Σ exp(a - p s)
    let mx = terms
        .iter()
        .map(|&(a, p)| a - p * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut wsum = 0.0;
    for &(a, p) in terms {
        let e = (a - p * s - mx).exp();
        sum += e;
        wsum += p * e;
    }
    (mx + sum.ln(), wsum / sum)
}

/// Solves `Σ exp(a_i - p_i s) = 1` for `s` and returns `λ = e^s`.
///
/// `ln F` is convex and decreasing in `s`, so Newton steps taken from the left
/// of the root never overshoot; a bisection fallback guards against rounding.
pub(crate) fn solve_unit_modular(terms: &[(f64, f64)]) -> Result<f64> {
    if terms.is_empty() {
        return Ok(0.0);
    }
    let pmin = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let pmax = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    let (ln_rho, _) = log_sum_exp(terms, 0.0);
    let (mut a, mut b) = {
        let (x, y) = (ln_rho / pmin, ln_rho / pmax);
        (x.min(y), x.max(y))
    };
    if a > LAMBDA_MAX.ln() {
        return Err(Error::NormOverflow);
    }
    let mut s = a;
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + s.abs()) {
            break;
        }
        let (g, slope) = log_sum_exp(terms, s);
        if g.abs() < 1e-15 {
            break;
        }
        if g > 0.0 {
            a = a.max(s);
        } else {
            b = b.min(s);
        }
        let newton = s + g / slope;
        s = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    if s > LAMBDA_MAX.ln() {
        return Err(Error::NormOverflow);
    }
    Ok(s.exp())
}

/// `(ln(h^n w |f|^p), p)` terms of the modular for nonzero samples at `points`.
fn terms_at(
    f: Option<&GridFunction>,
    p: &VariableExponent,
    w: &Weight,
    points: impl Iterator<Item = usize>,
) -> Vec<(f64, f64)> {
    let lnh = w.domain().cell_volume().ln();
    points
        .filter_map(|i| {
            let pi = p.at(i);
            let base = lnh + w.at(i).ln();
            match f {
                None => Some((base, pi)),
                Some(f) => {
                    let v = f.samples()[i].abs();
                    (v > 0.0).then(|| (base + pi * v.ln(), pi))
                }
            }
        })
        .collect()
}

/// Luxemburg norm `inf{λ > 0 : ρ(f/λ) ≤ 1}`.
pub fn luxemburg_norm(f: &GridFunction, p: &VariableExponent, w: &Weight) -> Result<f64> {
    f.check_same(p.values())?;
    f.check_same(w.values())?;
    solve_unit_modular(&terms_at(Some(f), p, w, 0..f.len()))
}

/// Norm of `f χ_E` where `E` is the given set of lattice points.
pub fn luxemburg_norm_on(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    points: &[usize],
) -> Result<f64> {
    solve_unit_modular(&terms_at(Some(f), p, w, points.iter().copied()))
}

/// `‖χ_E‖_{L^{p(·)}(w)}` for a set of lattice points.
pub fn indicator_norm(points: &[usize], p: &VariableExponent, w: &Weight) -> Result<f64> {
    solve_unit_modular(&terms_at(None, p, w, points.iter().copied()))
}

/// Hölder inequality with constant `r_p = 1 + 1/p₋ - 1/p₊`.
pub fn holder_check(f: &GridFunction, g: &GridFunction, p: &VariableExponent) -> Result<Report> {
    let pd = dual_exponent(p)?;
    let one = Weight::unit(*f.domain());
    let lhs = f.mul(g)?.abs().integral();
    let nf = luxemburg_norm(f, p, &one)?;
    let ng = luxemburg_norm(g, &pd, &one)?;
    let rp = 1.0 + 1.0 / p.p_minus() - 1.0 / p.p_plus();
    let rhs = rp * nf * ng;
    Ok(Report::new("holder")
        .with("lhs", lhs)
        .with("rhs", rhs)
        .with("r_p", rp)
        .passing(lhs <= rhs * (1.0 + 1e-6) + 1e-300 && rp <= 2.0))
}

/// The modular sandwich `‖f‖^{p₊} ≤ ρ(f) ≤ ‖f‖^{p₋}` for `‖f‖ ≤ 1` (reversed above 1),
/// with `p±` taken over the support, plus `ρ(f/‖f‖) = 1` and the unit-ball iff.
pub fn unit_ball_modular_check(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
) -> Result<Report> {
    let norm = luxemburg_norm(f, p, w)?;
    let rho = modular(f, p, w);
    let supp: Vec<usize> = (0..f.len()).filter(|&i| f.samples()[i] != 0.0).collect();
    let (pm, pp) = supp.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &i| {
        (lo.min(p.at(i)), hi.max(p.at(i)))
    });
    let mut r = Report::new("unit_ball_modular")
        .with("norm", norm)
        .with("modular", rho);
    if supp.is_empty() {
        return Ok(r.with("unit_modular", 0.0));
    }
    let (lo, hi) = if norm <= 1.0 {
        (norm.powf(pp), norm.powf(pm))
    } else {
        (norm.powf(pm), norm.powf(pp))
    };
    let tol = 1e-6;
    let sandwich = rho >= lo * (1.0 - tol) && rho <= hi * (1.0 + tol);
    let unit = modular(&f.scale(1.0 / norm), p, w);
    let iff = (norm <= 1.0 + tol) == (rho <= 1.0 + tol) || (norm - 1.0).abs() < tol;
    r.set("lower", lo);
    r.set("upper", hi);
    r.set("unit_modular", unit);
    Ok(r.passing(sandwich && (unit - 1.0).abs() <= tol && iff))
}

/// Ratios of `‖χ_Q‖` to `|Q|^{1/p₋(Q)}`, `|Q|^{1/p₊(Q)}` and `|Q|^{1/p∞}` (unweighted).
pub fn indicator_norm_profile(cube: &Cube, p: &VariableExponent) -> Result<Report> {
    let d = *p.domain();
    let pts = cube.lattice_points(&d);
    if pts.is_empty() {
        return Err(Error::InvalidParameter("cube misses the window".into()));
    }
    let one = Weight::unit(d);
    let nrm = indicator_norm(&pts, p, &one)?;
    let vol = pts.len() as f64 * d.cell_volume();
    let (pm, pp) = p.local_bounds(cube);
    let mut r = Report::new("indicator_norm_profile")
        .with("norm", nrm)
        .with("volume", vol)
        .with("ratio_p_minus", nrm / vol.powf(1.0 / pm))
        .with("ratio_p_plus", nrm / vol.powf(1.0 / pp));
    if let Some(pi) = p.p_infty() {
        r.set("ratio_p_infty", nrm / vol.powf(1.0 / pi));
    }
    Ok(r)
}

/// `(Σ_{Q ∈ 𝔇_{k0}} ‖χ_Q f‖^{p∞})^{1/p∞}` (unweighted).
pub fn localization_norm(f: &GridFunction, p: &VariableExponent, k0: i32) -> Result<f64> {
    let pinf = p
        .p_infty()
        .ok_or_else(|| Error::InvalidExponent("p_infty not declared".into()))?;
    let d = *f.domain();
    let one = Weight::unit(d);
    let blocks = LevelBlocks::new(&d, k0, reference_shift(d.dim()));
    let parts: Result<Vec<f64>> = (0..blocks.len())
        .into_par_iter()
        .map(|b| {
            let pts = blocks.cube(b).lattice_points(&d);
            luxemburg_norm_on(f, p, &one, &pts).map(|v| v.powf(pinf))
        })
        .collect();
    Ok(pairwise_sum(&parts?).powf(1.0 / pinf))
}
