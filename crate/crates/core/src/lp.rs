//! The local Littlewood–Paley characterization built on a pair `φ, φ*`.
//!
//! `φ` is a tensor product of `B(x)·P(x)` with `B` a cardinal B-spline and `P`
//! the polynomial killing the moments of orders `1..=L`. Lattice sums of
//! `B·x^k` equal the integrals for `k` below the spline order whenever `h`
//! divides the knot spacing, so the moment conditions hold on the grid too.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{rescale_mollifier, Convolver, Domain, GridFunction};
use crate::norms::luxemburg_norm;
use crate::weight::Weight;

/// Largest supported moment order.
pub const MAX_L: u32 = 7;

/// One-dimensional profile `B(x) P(x)` supported in `[-1, 1]`.
#[derive(Clone, Debug)]
struct Profile {
    order: usize,
    knot: f64,
    coeffs: Vec<f64>,
}

impl Profile {
    fn new(l: u32) -> Result<Self> {
        if l > MAX_L {
            return Err(Error::InvalidParameter(format!(
                "moment order L = {l} exceeds {MAX_L}"
            )));
        }
        // exactness of lattice moments needs 2L < order
        let (order, knot) = if l <= 3 { (8, 0.25) } else { (16, 0.125) };
        let mu = spline_moments(order, knot, 2 * l as usize);
        let k = l as usize + 1;
        let gram = DMatrix::from_fn(k, k, |r, c| mu[r + c]);
        let mut rhs = DVector::zeros(k);
        rhs[0] = 1.0;
        let coeffs = gram.lu().solve(&rhs).ok_or(Error::SingularGram)?;
        Ok(Profile {
            order,
            knot,
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let b = cardinal_bspline(self.order, x / self.knot + 0.5 * self.order as f64) / self.knot;
        if b == 0.0 {
            return 0.0;
        }
        b * self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Normalized cardinal B-spline `M_r` on `[0, r]` with unit integral.
fn cardinal_bspline(r: usize, u: f64) -> f64 {
    if !(u > 0.0 && u < r as f64) {
        return 0.0;
    }
    // v[i] = M_k(u - i)
    let mut v: Vec<f64> = (0..r)
        .map(|i| {
            if (u - i as f64) >= 0.0 && (u - i as f64) < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=r {
        let kf = k as f64;
        for i in 0..r {
            let t = u - i as f64;
            let next = if i + 1 < r { v[i + 1] } else { 0.0 };
            v[i] = (t * v[i] + (kf - t) * next) / (kf - 1.0);
        }
    }
    v[0]
}

/// `∫ x^k B` for `k ≤ kmax`, `B` the density of a sum of `order` uniforms on
/// `[-knot/2, knot/2]`.
fn spline_moments(order: usize, knot: f64, kmax: usize) -> Vec<f64> {
    let unif: Vec<f64> = (0..=kmax)
        .map(|k| {
            if k % 2 == 1 {
                0.0
            } else {
                (0.5 * knot).powi(k as i32) / (k + 1) as f64
            }
        })
        .collect();
    let mut binom = vec![vec![1.0; kmax + 1]; kmax + 1];
    for n in 1..=kmax {
        for k in 1..n {
            binom[n][k] = binom[n - 1][k - 1] + binom[n - 1][k];
        }
    }
    let mut m = unif.clone();
    for _ in 1..order {
        m = (0..=kmax)
            .map(|k| (0..=k).map(|i| binom[k][i] * m[i] * unif[k - i]).sum())
            .collect();
    }
    m
}

/// `φ` and `φ* = φ − 2^{-n} φ(·/2)` sampled on a domain.
#[derive(Clone, Debug)]
pub struct PhiPair {
    pub l: u32,
    profile: Profile,
    pub phi: GridFunction,
    pub phi_star: GridFunction,
}

impl PhiPair {
    pub fn eval_phi(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.profile.eval(t)).product()
    }

    pub fn eval_phi_star(&self, x: &[f64]) -> f64 {
        let half: Vec<f64> = x.iter().map(|t| 0.5 * t).collect();
        self.eval_phi(x) - 0.5f64.powi(x.len() as i32) * self.eval_phi(&half)
    }

    pub fn spline_order(&self) -> usize {
        self.profile.order
    }

    /// Deepest `J` with `2^{-J}` at least four lattice steps and a multiple of
    /// `h / knot`.
    pub fn max_depth(&self) -> u32 {
        let d = self.phi.domain();
        let by_knot = d.level() - (-self.profile.knot.log2()) as u32;
        by_knot.min(d.level() - 2)
    }

    pub fn default_depth(&self) -> u32 {
        self.phi
            .domain()
            .level()
            .saturating_sub(3)
            .min(self.max_depth())
    }
}

pub fn make_phi_pair(domain: Domain, l: u32) -> Result<PhiPair> {
    if domain.half_width() < 2.0 {
        return Err(Error::InvalidDomain(
            "the pair needs [-2, 2]^n inside the window".into(),
        ));
    }
    let profile = Profile::new(l)?;
    let mut pair = PhiPair {
        l,
        profile,
        phi: GridFunction::zeros(domain),
        phi_star: GridFunction::zeros(domain),
    };
    pair.phi = GridFunction::from_fn(domain, |x| pair.eval_phi(x))?;
    pair.phi_star = GridFunction::from_fn(domain, |x| pair.eval_phi_star(x))?;
    Ok(pair)
}

fn check_depth(pair: &PhiPair, j: u32) -> Result<()> {
    let max = pair.max_depth();
    if j > max {
        return Err(Error::TooDeep { j, max });
    }
    Ok(())
}

/// `φ*_{2^{-j}} * f` for `j = 1..=J`.
pub fn lp_levels(f: &GridFunction, pair: &PhiPair, j: u32) -> Result<Vec<GridFunction>> {
    f.check_same(&pair.phi)?;
    check_depth(pair, j)?;
    let conv = Convolver::new(f);
    (1..=j)
        .into_par_iter()
        .map(|k| conv.apply(&rescale_mollifier(&pair.phi_star, 0.5f64.powi(k as i32))?))
        .collect()
}

/// `(Σ_{j=1}^J |φ*_{2^{-j}} * f|²)^{1/2}`.
pub fn square_function(f: &GridFunction, pair: &PhiPair, j: u32) -> Result<GridFunction> {
    let levels = lp_levels(f, pair, j)?;
    let mut acc = vec![0.0; f.len()];
    for g in &levels {
        for (a, v) in acc.iter_mut().zip(g.samples()) {
            *a += v * v;
        }
    }
    GridFunction::new(*f.domain(), acc.into_iter().map(f64::sqrt).collect())
}

/// `φ_t * f` for `t = 2^{-j}`.
pub fn mollify(f: &GridFunction, pair: &PhiPair, j: u32) -> Result<GridFunction> {
    f.check_same(&pair.phi)?;
    check_depth(pair, j)?;
    Convolver::new(f).apply(&rescale_mollifier(&pair.phi, 0.5f64.powi(j as i32))?)
}

/// `‖φ * f‖ + ‖(Σ_{j ≤ J} |φ*_{2^{-j}} * f|²)^{1/2}‖` in `L^{p(·)}(w)`.
pub fn lp_norm(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    pair: &PhiPair,
    j: u32,
) -> Result<f64> {
    let low = mollify(f, pair, 0)?;
    let s = square_function(f, pair, j)?;
    Ok(luxemburg_norm(&low, p, w)? + luxemburg_norm(&s, p, w)?)
}

#[derive(Clone, Debug)]
pub struct Telescope {
    /// `φ * f + Σ_{j ≤ J} φ*_{2^{-j}} * f`.
    pub sum: GridFunction,
    /// `‖sum − f‖_{L²} / ‖f‖_{L²}`.
    pub relative_error: f64,
}

pub fn telescoping_reconstruct(f: &GridFunction, pair: &PhiPair, j: u32) -> Result<Telescope> {
    let mut sum = mollify(f, pair, 0)?;
    for g in lp_levels(f, pair, j)? {
        sum.axpy(1.0, &g)?;
    }
    let nf = f.l2_norm();
    let relative_error = if nf == 0.0 {
        0.0
    } else {
        sum.sub(f)?.l2_norm() / nf
    };
    Ok(Telescope {
        sum,
        relative_error,
    })
}
