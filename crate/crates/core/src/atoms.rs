//! Atoms, coefficient sequence norms, Whitney cubes and the multi-level
//! Calderón–Zygmund atomic decomposition.
//!
//! Bad parts and atoms are stored as [`Patch`]es (dense values on a box of
//! lattice indices) so that decompositions with many small cubes stay cheap in
//! two dimensions.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{pairwise_sum, Cube, Domain, GridFunction};
use crate::hardy::{grand_maximal, Mode, TestDictionary, Variant};
use crate::maximal::lattice_maximal;
use crate::norms::{luxemburg_norm, solve_unit_modular};
use crate::report::Report;
use crate::weight::{q_w_estimate, Weight};

/// Gram condition number above which a bump is declared degenerate.
pub const MAX_GRAM_CONDITION: f64 = 1e10;

/// Relative slack in the atom size condition.
pub const SIZE_TOLERANCE: f64 = 1e-6;

/// Relative moment tolerance, scaled by `‖a‖₁ ℓ^{|α|}`.
pub const MOMENT_TOLERANCE: f64 = 1e-8;

/// Pieces below this fraction of their largest summand are cancellation noise.
const NOISE_FLOOR: f64 = 1e-11;

// ---------------------------------------------------------------------------
// Patches

/// Dense values on the box `lo + [0, shape)` of lattice indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    domain: Domain,
    lo: [usize; 2],
    shape: [usize; 2],
    values: Vec<f64>,
}

impl Patch {
    pub fn zeros(domain: Domain, lo: [usize; 2], shape: [usize; 2]) -> Self {
        let shape = if domain.dim() == 1 {
            [shape[0], 1]
        } else {
            shape
        };
        let lo = if domain.dim() == 1 { [lo[0], 0] } else { lo };
        Patch {
            domain,
            lo,
            shape,
            values: vec![0.0; shape[0] * shape[1]],
        }
    }

    /// Box of lattice points of `cube`, grown by `pad` on each side and clamped.
    pub fn cube_box(domain: &Domain, cube: &Cube, pad: usize) -> ([usize; 2], [usize; 2]) {
        let n = domain.axis_len();
        let mut lo = [0; 2];
        let mut shape = [1; 2];
        for a in 0..domain.dim() {
            let (l, h) = cube.axis_range(domain, a);
            let l = l.saturating_sub(pad);
            let h = (h + pad).min(n);
            lo[a] = l;
            shape[a] = h.saturating_sub(l);
        }
        (lo, shape)
    }

    pub fn on_cube(domain: Domain, cube: &Cube, f: impl Fn(usize) -> f64) -> Self {
        let (lo, shape) = Patch::cube_box(&domain, cube, 0);
        let mut p = Patch::zeros(domain, lo, shape);
        let idx = p.flat_indices();
        for (v, i) in p.values.iter_mut().zip(idx) {
            *v = f(i);
        }
        p
    }

    pub fn from_grid(g: &GridFunction) -> Self {
        let d = *g.domain();
        let n = d.axis_len();
        let shape = if d.dim() == 1 { [n, 1] } else { [n, n] };
        Patch {
            domain: d,
            lo: [0, 0],
            shape,
            values: g.samples().to_vec(),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn lo(&self) -> [usize; 2] {
        self.lo
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat domain indices of the box, row-major.
    pub fn flat_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.shape[0] {
            for b in 0..self.shape[1] {
                out.push(self.flat(a, b));
            }
        }
        out
    }

    fn flat(&self, a: usize, b: usize) -> usize {
        if self.domain.dim() == 1 {
            self.lo[0] + a
        } else {
            self.domain.flatten([self.lo[0] + a, self.lo[1] + b])
        }
    }

    fn local(&self, flat: usize) -> Option<usize> {
        let ix = self.domain.unflatten(flat);
        let mut k = 0;
        for ax in 0..2 {
            let i = ix[ax].checked_sub(self.lo[ax])?;
            if i >= self.shape[ax] {
                return None;
            }
            k = k * self.shape[ax] + i;
        }
        Some(k)
    }

    /// Value at a flat domain index (zero outside the box).
    pub fn at(&self, flat: usize) -> f64 {
        self.local(flat).map_or(0.0, |k| self.values[k])
    }

    pub fn scale(&self, c: f64) -> Patch {
        Patch {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_grid(&self) -> GridFunction {
        let mut g = GridFunction::zeros(self.domain);
        self.add_into(&mut g, 1.0);
        g
    }

    /// `g += c · self`.
    pub fn add_into(&self, g: &mut GridFunction, c: f64) {
        let idx = self.flat_indices();
        let s = g.samples_mut();
        for (i, v) in idx.into_iter().zip(&self.values) {
            s[i] += c * v;
        }
    }

    /// `self += c · other` where `other`'s box lies inside this one.
    fn accumulate(&mut self, other: &Patch, c: f64) {
        for (i, v) in other.flat_indices().into_iter().zip(&other.values) {
            let k = self.local(i).expect("patch box containment");
            self.values[k] += c * v;
        }
    }

    fn union_box(a: &Patch, b: &Patch) -> ([usize; 2], [usize; 2]) {
        let mut lo = [0; 2];
        let mut shape = [1; 2];
        for ax in 0..a.domain.dim() {
            let l = a.lo[ax].min(b.lo[ax]);
            let h = (a.lo[ax] + a.shape[ax]).max(b.lo[ax] + b.shape[ax]);
            lo[ax] = l;
            shape[ax] = h - l;
        }
        (lo, shape)
    }

    fn widened(&self, lo: [usize; 2], shape: [usize; 2]) -> Patch {
        let mut p = Patch::zeros(self.domain, lo, shape);
        p.accumulate(self, 1.0);
        p
    }
}

// ---------------------------------------------------------------------------
// Atoms

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomKind {
    /// `|Q| < 1`; vanishing moments up to `L` required.
    Local,
    /// `|Q| ≥ 1`; no moment condition.
    Unit,
    /// Normalized against the weight of the whole window.
    Single,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    /// `None` for single atoms.
    pub support: Option<Cube>,
    pub values: Patch,
    /// Integrability index, `f64::INFINITY` allowed.
    pub q: f64,
    pub l: i32,
    pub kind: AtomKind,
}

fn lq_norm_w(values: &Patch, w: &Weight, q: f64) -> f64 {
    if q.is_infinite() {
        return values.max_abs();
    }
    let terms: Vec<f64> = values
        .flat_indices()
        .into_iter()
        .zip(values.values())
        .map(|(i, v)| v.abs().powf(q) * w.at(i))
        .collect();
    (w.domain().cell_volume() * pairwise_sum(&terms)).powf(1.0 / q)
}

/// `w(Q)^{1/q}` (1 for `q = ∞`).
fn size_bound(mass: f64, q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        mass.powf(1.0 / q)
    }
}

/// Multi-indices `α` with `|α| ≤ l`, graded.
pub fn multi_indices(dim: usize, l: i32) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    for total in 0..=l.max(-1) {
        let t = total as u32;
        if dim == 1 {
            out.push([t, 0]);
        } else {
            for a in (0..=t).rev() {
                out.push([a, t - a]);
            }
        }
    }
    out
}

fn monomial(e: [u32; 2], u: &[f64; 2]) -> f64 {
    u[0].powi(e[0] as i32) * u[1].powi(e[1] as i32)
}

/// Checks support, size and moment conditions of an atom.
///
/// Keys: `leak` (largest value outside the support cube), `size`
/// (`‖a‖_{L^q(w)} / w(Q)^{1/q}`), `moment_ratio` (largest centered moment over
/// its tolerance), `l1`.
pub fn validate_atom(a: &Atom, w: &Weight) -> Report {
    let d = *a.values.domain();
    let (leak, mass, moment_ratio) = match a.support {
        Some(q) => {
            let leak = a
                .values
                .flat_indices()
                .into_iter()
                .zip(a.values.values())
                .filter(|(i, _)| !q.contains(&d.point(*i)[..d.dim()]))
                .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
            let ratio = if a.kind == AtomKind::Local {
                moment_ratio(&a.values, &q, a.l)
            } else {
                0.0
            };
            (leak, w.mass(&q), ratio)
        }
        None => (0.0, w.total_mass(), 0.0),
    };
    let size = lq_norm_w(&a.values, w, a.q) / size_bound(mass, a.q);
    let l1 = d.cell_volume() * a.values.values().iter().map(|v| v.abs()).sum::<f64>();
    Report::new("validate_atom")
        .with("leak", leak)
        .with("size", size)
        .with("moment_ratio", moment_ratio)
        .with("l1", l1)
        .passing(leak == 0.0 && size <= 1.0 + SIZE_TOLERANCE && moment_ratio <= 1.0)
}

fn moment_ratio(values: &Patch, q: &Cube, l: i32) -> f64 {
    let d = values.domain();
    let c = q.center();
    let side = q.side();
    let pts = values.flat_indices();
    let l1 = d.cell_volume() * values.values().iter().map(|v| v.abs()).sum::<f64>();
    if l1 == 0.0 {
        return 0.0;
    }
    multi_indices(d.dim(), l)
        .into_iter()
        .map(|e| {
            let terms: Vec<f64> = pts
                .iter()
                .zip(values.values())
                .map(|(&i, v)| {
                    let x = d.point(i);
                    v * monomial(e, &[x[0] - c[0], x[1] - c[1]])
                })
                .collect();
            let m = d.cell_volume() * pairwise_sum(&terms);
            let tol = MOMENT_TOLERANCE * l1 * side.powi((e[0] + e[1]) as i32);
            m.abs() / tol
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Sequence norms

/// `(Σ_j |λ_j|^v χ_{Q_j})^{1/v}` on the lattice.
pub fn coefficient_function(
    lambdas: &[f64],
    cubes: &[Cube],
    domain: Domain,
    v: f64,
) -> GridFunction {
    let mut acc = vec![0.0; domain.len()];
    for (l, q) in lambdas.iter().zip(cubes) {
        let lv = l.abs().powf(v);
        for i in q.lattice_points(&domain) {
            acc[i] += lv;
        }
    }
    GridFunction::from_raw(domain, acc.into_iter().map(|s| s.powf(1.0 / v)).collect())
}

/// `𝒜_{p(·),w,v}`: `‖(Σ_j |λ_j|^v χ_{Q_j})^{1/v}‖_{L^{p(·)}(w)}` with `v ∈ (0, p₋) ∩ (0, 1]`.
pub fn sequence_norm(
    lambdas: &[f64],
    cubes: &[Cube],
    p: &VariableExponent,
    w: &Weight,
    v: f64,
) -> Result<f64> {
    check_v(v, p)?;
    if lambdas.len() != cubes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} cubes",
            lambdas.len(),
            cubes.len()
        )));
    }
    luxemburg_norm(&coefficient_function(lambdas, cubes, *p.domain(), v), p, w)
}

fn check_v(v: f64, p: &VariableExponent) -> Result<()> {
    if v > 0.0 && v <= 1.0 && v < p.p_minus() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "v = {v} must lie in (0, p_-) ∩ (0, 1] with p_- = {}",
            p.p_minus()
        )))
    }
}

/// `𝒜†`: the smallest `μ` with `Σ_j ∫_{Q_j} (|λ_j|/μ)^{p(x)} w dx ≤ 1`.
pub fn sequence_norm_dagger(
    lambdas: &[f64],
    cubes: &[Cube],
    p: &VariableExponent,
    w: &Weight,
) -> Result<f64> {
    let d = *p.domain();
    let lnh = d.cell_volume().ln();
    let mut terms = Vec::new();
    for (l, q) in lambdas.iter().zip(cubes) {
        if *l == 0.0 {
            continue;
        }
        let ll = l.abs().ln();
        for i in q.lattice_points(&d) {
            let pi = p.at(i);
            terms.push((lnh + w.at(i).ln() + pi * ll, pi));
        }
    }
    solve_unit_modular(&terms)
}

// ---------------------------------------------------------------------------
// Whitney cubes

/// Whitney separation constant `2^{n+6}`.
pub fn whitney_constant(dim: usize) -> f64 {
    2f64.powi(dim as i32 + 6)
}

fn edt_line(f: &[f64]) -> Vec<f64> {
    // lower envelope of parabolas (Felzenszwalb–Huttenlocher)
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        return vec![f64::INFINITY; n];
    }
    let mut out = vec![0.0; n];
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *o = dq * dq + f[v[k]];
    }
    out
}

/// Squared Euclidean distance, in lattice units, from each lattice point to
/// the nearest lattice point outside `omega`.
pub fn squared_distance_to_exterior(domain: &Domain, omega: &[bool]) -> Vec<f64> {
    let n = domain.axis_len();
    let init: Vec<f64> = omega
        .iter()
        .map(|&b| if b { f64::INFINITY } else { 0.0 })
        .collect();
    if domain.dim() == 1 {
        return edt_line(&init);
    }
    let rows: Vec<f64> = init.par_chunks(n).flat_map_iter(edt_line).collect();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| edt_line(&(0..n).map(|r| rows[r * n + c]).collect::<Vec<_>>()))
        .collect();
    let mut out = vec![0.0; n * n];
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            out[r * n + c] = *v;
        }
    }
    out
}

/// Per-level minima of the squared exterior distance over closed 𝒟_0 cubes.
struct ClosedMinima {
    dim: usize,
    coarsest: i32,
    /// `levels[k - coarsest]` has `per_axis^dim` entries.
    levels: Vec<(usize, Vec<f64>)>,
}

impl ClosedMinima {
    fn new(d: &Domain, sq: &[f64], coarsest: i32, finest: i32) -> Self {
        let n = d.axis_len();
        let m = d.level() as i32;
        let dim = d.dim();
        let at = |ix: [usize; 2]| sq[d.flatten([ix[0].min(n - 1), ix[1].min(n - 1)])];
        // closed lattice cells at level m: corner plus the far faces
        let mut cur: Vec<f64> = (0..d.len())
            .map(|flat| {
                let ix = d.unflatten(flat);
                let mut best = f64::INFINITY;
                for bits in 0..(1usize << dim) {
                    let mut j = ix;
                    for (a, ja) in j.iter_mut().enumerate().take(dim) {
                        *ja += (bits >> a) & 1;
                    }
                    best = best.min(at(j));
                }
                best
            })
            .collect();
        let mut per = n;
        let mut stack = Vec::new();
        for k in (coarsest..=m).rev() {
            if k <= finest {
                stack.push((per, cur.clone()));
            }
            if k == coarsest {
                break;
            }
            let np = per / 2;
            let mut next = vec![f64::INFINITY; np.pow(dim as u32)];
            for (i, v) in cur.iter().enumerate() {
                let (a, b) = if dim == 1 { (i, 0) } else { (i / per, i % per) };
                let j = if dim == 1 {
                    a / 2
                } else {
                    (a / 2) * np + b / 2
                };
                next[j] = next[j].min(*v);
            }
            cur = next;
            per = np;
        }
        stack.reverse();
        ClosedMinima {
            dim,
            coarsest,
            levels: stack,
        }
    }

    fn get(&self, k: i32, local: [usize; 2]) -> f64 {
        let (per, v) = &self.levels[(k - self.coarsest) as usize];
        if self.dim == 1 {
            v[local[0]]
        } else {
            v[local[0] * per + local[1]]
        }
    }
}

fn check_omega(domain: &Domain, omega: &[bool]) -> Result<bool> {
    if omega.len() != domain.len() {
        return Err(Error::InvalidParameter(format!(
            "mask has {} entries, domain {}",
            omega.len(),
            domain.len()
        )));
    }
    if omega.iter().all(|&b| b) {
        return Err(Error::NoExterior);
    }
    Ok(omega.iter().any(|&b| b))
}

fn coarsest_whitney_level(domain: &Domain) -> i32 {
    -(domain.half_width().log2().floor() as i32)
}

/// Maximal 𝒟_0 cubes `Q` with `2^{n+6} diam(Q) ≤ dist(Q, Ωᶜ)`, down to level `m`.
pub fn whitney_decompose(domain: &Domain, omega: &[bool]) -> Result<Vec<Cube>> {
    whitney_decompose_to(domain, omega, domain.level() as i32)
}

/// [`whitney_decompose`] with cubes no finer than `finest`.
pub fn whitney_decompose_to(domain: &Domain, omega: &[bool], finest: i32) -> Result<Vec<Cube>> {
    if !check_omega(domain, omega)? {
        return Ok(Vec::new());
    }
    let m = domain.level() as i32;
    let finest = finest.min(m);
    let coarsest = coarsest_whitney_level(domain);
    if finest < coarsest {
        return Ok(Vec::new());
    }
    let sq = squared_distance_to_exterior(domain, omega);
    let mins = ClosedMinima::new(domain, &sq, coarsest, finest);
    let c2n = whitney_constant(domain.dim()).powi(2) * domain.dim() as f64;
    let origin = domain.origin() as i64;
    let dim = domain.dim();
    let good = |k: i32, local: [usize; 2]| -> bool {
        let s = 2f64.powi(m - k);
        mins.get(k, local) >= c2n * s * s
    };
    let mut out = Vec::new();
    for k in coarsest..=finest {
        let per = domain.axis_len() >> (m - k);
        let shift = origin >> (m - k);
        let count = per.pow(dim as u32);
        let level: Vec<Cube> = (0..count)
            .into_par_iter()
            .filter_map(|i| {
                let local = if dim == 1 { [i, 0] } else { [i / per, i % per] };
                if !good(k, local) {
                    return None;
                }
                if k > coarsest && good(k - 1, [local[0] / 2, local[1] / 2]) {
                    return None;
                }
                let mut index = [0i64; 2];
                for a in 0..dim {
                    index[a] = local[a] as i64 - shift;
                }
                Some(Cube::new(dim, k, [0, 0], index))
            })
            .collect();
        out.extend(level);
    }
    Ok(out)
}

/// Geometry of a Whitney family against the exterior of `omega`.
///
/// Keys: `cubes`, `min_ratio` / `max_ratio` of `dist(Q̄, Ωᶜ)/diam(Q)`,
/// `lower_violations`, `upper_violations`, `overlap` (largest number of closed
/// dilated cubes `(1 + 2^{-n-10})Q̄` containing one lattice point), `disjoint`,
/// `coverage` (fraction of Ω's lattice points inside some cube).
pub fn whitney_geometry(domain: &Domain, omega: &[bool], cubes: &[Cube]) -> Result<Report> {
    check_omega(domain, omega)?;
    let sq = squared_distance_to_exterior(domain, omega);
    let c = whitney_constant(domain.dim());
    let h = domain.h();
    let n = domain.axis_len();
    let mut lo_ratio = f64::INFINITY;
    let mut hi_ratio = 0.0f64;
    let (mut lower, mut upper) = (0usize, 0usize);
    let mut closed_count = vec![0u32; domain.len()];
    let mut open_count = vec![0u32; domain.len()];
    for q in cubes {
        let (lo, shape) = Patch::cube_box(domain, q, 0);
        let mut dist2 = f64::INFINITY;
        let ext = |a: usize| {
            if domain.dim() == 1 && a == 1 {
                1
            } else {
                shape[a] + 1
            }
        };
        for a in 0..ext(0) {
            for b in 0..ext(1) {
                let i0 = (lo[0] + a).min(n - 1);
                let i1 = (lo[1] + b).min(n - 1);
                let flat = if domain.dim() == 1 {
                    i0
                } else {
                    domain.flatten([i0, i1])
                };
                dist2 = dist2.min(sq[flat]);
                closed_count[flat] += 1;
            }
        }
        for i in q.lattice_points(domain) {
            open_count[i] += 1;
        }
        let r = dist2.sqrt() * h / q.diam();
        lo_ratio = lo_ratio.min(r);
        hi_ratio = hi_ratio.max(r);
        if r < c {
            lower += 1;
        }
        if r > 4.0 * c {
            upper += 1;
        }
    }
    let inside = omega.iter().filter(|&&b| b).count();
    let covered = open_count.iter().filter(|&&k| k > 0).count();
    let disjoint = open_count.iter().all(|&k| k <= 1);
    let overlap = closed_count.iter().copied().max().unwrap_or(0);
    Ok(Report::new("whitney_geometry")
        .with("cubes", cubes.len() as f64)
        .with("min_ratio", if cubes.is_empty() { 0.0 } else { lo_ratio })
        .with("max_ratio", hi_ratio)
        .with("lower_violations", lower as f64)
        .with("upper_violations", upper as f64)
        .with("overlap", overlap as f64)
        .with("disjoint", if disjoint { 1.0 } else { 0.0 })
        .with(
            "coverage",
            if inside == 0 {
                1.0
            } else {
                covered as f64 / inside as f64
            },
        )
        .passing(lower == 0 && upper == 0 && disjoint))
}

// ---------------------------------------------------------------------------
// Partition of unity

fn smooth_step(u: f64) -> f64 {
    // 1 for u ≤ 0, 0 for u ≥ 1, C^∞ in between
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (psi(1.0 - u), psi(u));
    a / (a + b)
}

/// Plateau equal to 1 on `(1 + 2^{-n-11})Q̄` and vanishing off `(1 + 2^{-n-10})Q`.
pub fn plateau(cube: &Cube, x: &[f64]) -> f64 {
    let n = cube.dim as i32;
    let inner = 2f64.powi(-n - 11);
    let outer = 2f64.powi(-n - 10);
    let c = cube.center();
    let half = 0.5 * cube.side();
    (0..cube.dim)
        .map(|a| smooth_step(((x[a] - c[a]).abs() / half - 1.0 - inner) / (outer - inner)))
        .product()
}

/// `η_k = ξ_k / Σ_l ξ_l` with the plateaus sampled at cell centers.
fn bumps(domain: &Domain, cubes: &[Cube]) -> Vec<Patch> {
    let xi: Vec<Patch> = cubes
        .par_iter()
        .map(|q| {
            let (lo, shape) = Patch::cube_box(domain, q, 1);
            let mut p = Patch::zeros(*domain, lo, shape);
            let idx = p.flat_indices();
            for (v, i) in p.values.iter_mut().zip(idx) {
                *v = plateau(q, &domain.center(i)[..domain.dim()]);
            }
            p
        })
        .collect();
    let mut total = vec![0.0; domain.len()];
    for p in &xi {
        for (i, v) in p.flat_indices().into_iter().zip(&p.values) {
            total[i] += v;
        }
    }
    xi.into_par_iter()
        .map(|mut p| {
            let idx = p.flat_indices();
            for (v, i) in p.values.iter_mut().zip(idx) {
                if *v > 0.0 {
                    *v /= total[i];
                }
            }
            p
        })
        .collect()
}

/// The normalized bumps `η_k` as grid functions.
pub fn partition_of_unity(domain: &Domain, cubes: &[Cube]) -> Vec<GridFunction> {
    bumps(domain, cubes).iter().map(Patch::to_grid).collect()
}

// ---------------------------------------------------------------------------
// Moment projection

/// `Σ c_α ((x - center)/scale)^α` over `|α| ≤ L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub center: [f64; 2],
    pub scale: f64,
    pub exponents: Vec<[u32; 2]>,
    pub coeffs: Vec<f64>,
    pub condition: f64,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            center: [0.0; 2],
            scale: 1.0,
            exponents: Vec::new(),
            coeffs: Vec::new(),
            condition: 1.0,
        }
    }

    fn reduced(&self, x: &[f64]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for a in 0..self.dim {
            u[a] = (x[a] - self.center[a]) / self.scale;
        }
        u
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = self.reduced(x);
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * monomial(*e, &u))
            .sum()
    }

    /// Coefficients of `Σ c_α x^α` in the uncentered monomial basis (1D only).
    pub fn monomial_coeffs_1d(&self) -> Vec<f64> {
        let l = self.exponents.len();
        let mut out = vec![0.0; l];
        for (e, &c) in self.exponents.iter().zip(&self.coeffs) {
            let k = e[0] as usize;
            // ((x - c0)/s)^k = s^-k Σ_i binom(k,i) x^i (-c0)^{k-i}
            let mut binom = 1.0;
            for i in 0..=k {
                out[i] +=
                    c * binom * (-self.center[0]).powi((k - i) as i32) / self.scale.powi(k as i32);
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }
}

/// Projection onto `𝒫_L` orthogonal with respect to `η`, around `center`
/// with reduced variable scale `scale`.
fn project(
    domain: &Domain,
    values: impl Fn(usize) -> f64,
    eta: &Patch,
    l: i32,
    center: [f64; 2],
    scale: f64,
) -> Result<Polynomial> {
    let exps = multi_indices(domain.dim(), l);
    let dim = domain.dim();
    if exps.is_empty() {
        return Ok(Polynomial::zero(dim));
    }
    let k = exps.len();
    let pts: Vec<(usize, f64)> = eta
        .flat_indices()
        .into_iter()
        .zip(eta.values().iter().copied())
        .filter(|(_, e)| *e > 0.0)
        .collect();
    let mut poly = Polynomial {
        dim,
        center,
        scale,
        exponents: exps.clone(),
        coeffs: vec![0.0; k],
        condition: 1.0,
    };
    let basis: Vec<Vec<f64>> = pts
        .iter()
        .map(|(i, _)| {
            let u = poly.reduced(&domain.point(*i)[..dim]);
            exps.iter().map(|e| monomial(*e, &u)).collect()
        })
        .collect();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for ((_, e), b) in pts.iter().zip(&basis) {
        for r in 0..k {
            for c in 0..k {
                g[(r, c)] += e * b[r] * b[c];
            }
        }
    }
    let eig = g.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let cond = if lmin > 0.0 {
        lmax / lmin
    } else {
        f64::INFINITY
    };
    if cond > MAX_GRAM_CONDITION {
        return Err(Error::DegenerateBump(cond));
    }
    poly.condition = cond;
    let chol = g.cholesky().ok_or(Error::DegenerateBump(cond))?;
    let fv: Vec<f64> = pts.iter().map(|(i, _)| values(*i)).collect();
    // solve, then one refinement step on the residual moments
    for _ in 0..2 {
        let mut rhs = DVector::<f64>::zeros(k);
        for (((_, e), b), fx) in pts.iter().zip(&basis).zip(&fv) {
            let pv: f64 = b.iter().zip(&poly.coeffs).map(|(x, c)| x * c).sum();
            let r = e * (fx - pv);
            for a in 0..k {
                rhs[a] += r * b[a];
            }
        }
        let delta = chol.solve(&rhs);
        for (c, dc) in poly.coeffs.iter_mut().zip(delta.iter()) {
            *c += dc;
        }
    }
    Ok(poly)
}

fn support_frame(eta: &GridFunction) -> Option<([f64; 2], f64)> {
    let d = eta.domain();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (i, v) in eta.samples().iter().enumerate() {
        if *v > 0.0 {
            let x = d.point(i);
            for a in 0..d.dim() {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
    }
    if !lo[0].is_finite() {
        return None;
    }
    let mut c = [0.0; 2];
    let mut s = 0.5 * d.h();
    for a in 0..d.dim() {
        c[a] = 0.5 * (lo[a] + hi[a]);
        s = s.max(0.5 * (hi[a] - lo[a]));
    }
    Some((c, s))
}

/// `P ∈ 𝒫_L` with `∫ (f - P) x^β η dx = 0` for `|β| ≤ L`, monomials centered
/// at the middle of `supp η`.
pub fn moment_projection(f: &GridFunction, eta: &GridFunction, l: i32) -> Result<Polynomial> {
    f.check_same(eta)?;
    let (c, s) = support_frame(eta).ok_or(Error::DegenerateBump(f64::INFINITY))?;
    project(
        f.domain(),
        |i| f.samples()[i],
        &Patch::from_grid(eta),
        l,
        c,
        s,
    )
}

// ---------------------------------------------------------------------------
// Calderón–Zygmund decomposition

/// One bad part `b_k = (f - P_k) η_k`.
#[derive(Clone, Debug)]
pub struct BadPart {
    pub cube: Cube,
    pub eta: Patch,
    pub poly: Polynomial,
    pub values: Patch,
}

#[derive(Clone, Debug)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub good: GridFunction,
    pub bad: Vec<BadPart>,
}

impl CzDecomposition {
    pub fn cubes(&self) -> Vec<Cube> {
        self.bad.iter().map(|b| b.cube).collect()
    }

    /// `g + Σ b_k`.
    pub fn reassemble(&self) -> GridFunction {
        let mut out = self.good.clone();
        for b in &self.bad {
            b.values.add_into(&mut out, 1.0);
        }
        out
    }
}

/// Finest Whitney level that leaves enough lattice points per axis to
/// determine a degree-`L` projection with a well-conditioned Gram matrix.
pub fn finest_whitney_level(domain: &Domain, l: i32) -> i32 {
    let s = if l < 0 {
        1
    } else {
        (2 * (l as usize + 1)).next_power_of_two()
    };
    domain.level() as i32 - s.trailing_zeros() as i32
}

/// Splits `f` at height `λ` given its grand maximal function `mf`.
pub fn cz_decompose_with(
    f: &GridFunction,
    mf: &GridFunction,
    lambda: f64,
    l: i32,
) -> Result<CzDecomposition> {
    f.check_same(mf)?;
    let d = *f.domain();
    let omega: Vec<bool> = mf.samples().iter().map(|&v| v > lambda).collect();
    let cubes = whitney_decompose_to(&d, &omega, finest_whitney_level(&d, l))?;
    let etas = bumps(&d, &cubes);
    let bad: Vec<BadPart> = cubes
        .par_iter()
        .zip(etas.into_par_iter())
        .map(|(q, eta)| -> Result<BadPart> {
            let poly = project(&d, |i| f.samples()[i], &eta, l, q.center(), 0.5 * q.side())?;
            let mut values = eta.clone();
            let idx = values.flat_indices();
            for (v, i) in values.values.iter_mut().zip(idx) {
                if *v != 0.0 {
                    *v *= f.samples()[i] - poly.eval(&d.point(i)[..d.dim()]);
                }
            }
            Ok(BadPart {
                cube: *q,
                eta,
                poly,
                values,
            })
        })
        .collect::<Result<_>>()?;
    let mut good = f.clone();
    for b in &bad {
        b.values.add_into(&mut good, -1.0);
    }
    Ok(CzDecomposition { lambda, good, bad })
}

/// `f = g + Σ_k b_k` over the Whitney cubes of `{ℳ_N f > λ}`.
pub fn cz_decompose(
    f: &GridFunction,
    lambda: f64,
    dict: &TestDictionary,
    l: i32,
) -> Result<CzDecomposition> {
    let mf = grand_maximal(f, dict, Mode::MN)?;
    cz_decompose_with(f, &mf, lambda, l)
}

// ---------------------------------------------------------------------------
// Atomic decomposition

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicParams {
    /// Atom integrability, `f64::INFINITY` for `(p(·),∞,L)` atoms.
    pub q: f64,
    /// Moment order `L`.
    pub l: i32,
    /// Sequence-norm exponent `v`.
    pub v: f64,
    /// Treat the weight as integrable: keep `g_{j₀}` as a single atom.
    pub single: bool,
    /// Maximal number of dyadic heights below the top one.
    pub depth: u32,
    /// Known critical index; estimated from the weight when `None`.
    pub q_w: Option<f64>,
}

impl Default for AtomicParams {
    fn default() -> Self {
        AtomicParams {
            q: f64::INFINITY,
            l: 0,
            v: 1.0,
            single: false,
            depth: 30,
            q_w: None,
        }
    }
}

/// Checks `N ≥ L ≥ ⌊n(q_w/v - 1)⌋`, `q > max(q_w, p₊)` and the range of `v`.
pub fn check_admissible(
    params: &AtomicParams,
    p: &VariableExponent,
    w: &Weight,
    order: usize,
) -> Result<f64> {
    let q_w = match params.q_w {
        Some(q) => q,
        None => q_w_estimate(w)?,
    };
    let n = p.domain().dim() as f64;
    let v = params.v;
    if !(v > 0.0 && v <= 1.0 && v < p.p_minus()) {
        return Err(Error::Inadmissible(format!(
            "v = {v} not in (0, p_-) ∩ (0, 1], p_- = {}",
            p.p_minus()
        )));
    }
    let need = (n * (q_w / v - 1.0)).floor() as i32;
    if params.l < need {
        return Err(Error::Inadmissible(format!(
            "L >= [n(q_w/v - 1)] fails: L = {}, bound {need}",
            params.l
        )));
    }
    if params.l > order as i32 {
        return Err(Error::Inadmissible(format!(
            "N >= L fails: N = {order}, L = {}",
            params.l
        )));
    }
    let lower = q_w.max(p.p_plus());
    if !(params.q > lower) {
        return Err(Error::Inadmissible(format!(
            "q > max(q_w, p_+) fails: q = {}, max = {lower}",
            params.q
        )));
    }
    Ok(q_w)
}

#[derive(Clone, Debug)]
pub struct AtomicDecomposition {
    pub domain: Domain,
    pub lambdas: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub cubes: Vec<Cube>,
    /// Height exponent `j` of each atom (`λ = 2^j` level it came from).
    pub levels: Vec<i32>,
    pub single_part: Option<(f64, Atom)>,
    /// `sup |g_{j₀}|` when the bottom good part was discarded.
    pub truncated: f64,
}

impl AtomicDecomposition {
    pub fn empty(domain: Domain) -> Self {
        AtomicDecomposition {
            domain,
            lambdas: Vec::new(),
            atoms: Vec::new(),
            cubes: Vec::new(),
            levels: Vec::new(),
            single_part: None,
            truncated: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.single_part.is_none()
    }

    /// `λ₀` (0 without a single part).
    pub fn lambda0(&self) -> f64 {
        self.single_part.as_ref().map_or(0.0, |s| s.0)
    }

    pub fn sequence_norm(&self, p: &VariableExponent, w: &Weight, v: f64) -> Result<f64> {
        sequence_norm(&self.lambdas, &self.cubes, p, w, v)
    }

    /// Concatenation; single parts must not both be present.
    pub fn concat(mut self, other: AtomicDecomposition) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        if self.single_part.is_some() && other.single_part.is_some() {
            return Err(Error::InvalidParameter(
                "both decompositions carry a single atom".into(),
            ));
        }
        self.lambdas.extend(other.lambdas);
        self.atoms.extend(other.atoms);
        self.cubes.extend(other.cubes);
        self.levels.extend(other.levels);
        self.single_part = self.single_part.or(other.single_part);
        self.truncated += other.truncated;
        Ok(self)
    }
}

/// One height level: cubes, bumps, projections and bad parts.
struct HeightLevel {
    j: i32,
    cz: CzDecomposition,
}

/// Points → indices of bumps whose support contains them.
fn cover_index(domain: &Domain, bad: &[BadPart]) -> Vec<Vec<u32>> {
    let mut cover = vec![Vec::new(); domain.len()];
    for (k, b) in bad.iter().enumerate() {
        for (i, e) in b.eta.flat_indices().into_iter().zip(b.eta.values()) {
            if *e > 0.0 {
                cover[i].push(k as u32);
            }
        }
    }
    cover
}

/// `A_{j,k} = b_{j,k} - Σ_l [(f - P_{j+1,l}) η_{j+1,l} η_{j,k} - P_{k,l} η_{j+1,l}]`
/// where `P_{k,l}` projects `(f - P_{j+1,l}) η_{j,k}` against `η_{j+1,l}`.
/// Summing over `k` telescopes to `g_{j+1} - g_j`.
fn level_atoms(f: &GridFunction, lo: &HeightLevel, hi: &HeightLevel, l: i32) -> Result<Vec<Patch>> {
    let d = *f.domain();
    let cover = cover_index(&d, &lo.cz.bad);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); lo.cz.bad.len()];
    for (li, b) in hi.cz.bad.iter().enumerate() {
        let mut ks: Vec<u32> = b
            .eta
            .flat_indices()
            .into_iter()
            .zip(b.eta.values())
            .filter(|(_, e)| **e > 0.0)
            .flat_map(|(i, _)| cover[i].iter().copied())
            .collect();
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            children[k as usize].push(li);
        }
    }
    lo.cz
        .bad
        .par_iter()
        .zip(children.par_iter())
        .map(|(bk, ch)| -> Result<Patch> {
            let mut frame = bk.values.clone();
            for &li in ch {
                let (blo, bshape) = Patch::union_box(&frame, &hi.cz.bad[li].eta);
                frame = frame.widened(blo, bshape);
            }
            let mut a = frame;
            let mut scale = bk.values.max_abs();
            for &li in ch {
                let bl = &hi.cz.bad[li];
                let resid = |i: usize| f.samples()[i] - bl.poly.eval(&d.point(i)[..d.dim()]);
                let mut term = bl.eta.clone();
                let idx = term.flat_indices();
                for (v, i) in term.values.iter_mut().zip(&idx) {
                    if *v != 0.0 {
                        *v *= resid(*i) * bk.eta.at(*i);
                    }
                }
                let pkl = project(
                    &d,
                    |i| resid(i) * bk.eta.at(i),
                    &bl.eta,
                    l,
                    bl.cube.center(),
                    0.5 * bl.cube.side(),
                )?;
                for (v, i) in term.values.iter_mut().zip(&idx) {
                    let e = bl.eta.at(*i);
                    if e != 0.0 {
                        *v -= pkl.eval(&d.point(*i)[..d.dim()]) * e;
                    }
                }
                scale = scale.max(term.max_abs());
                a.accumulate(&term, -1.0);
            }
            // A cube repeated at both heights cancels to rounding noise.
            if a.max_abs() <= NOISE_FLOOR * scale {
                a.values.iter_mut().for_each(|v| *v = 0.0);
                return Ok(a);
            }
            // Cancellation leaves rounding drift in the moments; project it out.
            let eta = |i: usize| bk.eta.at(i);
            let drift = project(
                &d,
                |i| a.at(i) / eta(i),
                &bk.eta,
                l,
                bk.cube.center(),
                0.5 * bk.cube.side(),
            )?;
            let idx = a.flat_indices();
            for (v, i) in a.values.iter_mut().zip(&idx) {
                let e = eta(*i);
                if e > 0.0 {
                    *v -= drift.eval(&d.point(*i)[..d.dim()]) * e;
                }
            }
            Ok(a)
        })
        .collect()
}

/// Unit cubes `l + [0,1)^n` meeting the patch box.
fn unit_cubes(p: &Patch) -> Vec<Cube> {
    let d = p.domain();
    let dim = d.dim();
    let lo = d.point(p.flat(0, 0));
    let hi = d.point(p.flat(p.shape[0] - 1, p.shape[1] - 1));
    let range = |a: usize| (lo[a].floor() as i64)..=(hi[a].floor() as i64);
    let mut out = Vec::new();
    for i0 in range(0) {
        if dim == 1 {
            out.push(Cube::new(1, 0, [0, 0], [i0, 0]));
        } else {
            for i1 in range(1) {
                out.push(Cube::new(2, 0, [0, 0], [i0, i1]));
            }
        }
    }
    out
}

/// Normalizes a piece into `(λ, atom)`; `None` when it vanishes.
fn normalize(
    piece: Patch,
    cube: Cube,
    kind: AtomKind,
    params: &AtomicParams,
    w: &Weight,
) -> Option<(f64, Atom)> {
    let size = lq_norm_w(&piece, w, params.q);
    let mass = match kind {
        AtomKind::Single => w.total_mass(),
        _ => w.mass(&cube),
    };
    let lambda = size / size_bound(mass, params.q);
    if !(lambda > 0.0) {
        return None;
    }
    let support = (kind != AtomKind::Single).then_some(cube);
    let l = if kind == AtomKind::Local {
        params.l
    } else {
        -1
    };
    Some((
        lambda,
        Atom {
            support,
            values: piece.scale(1.0 / lambda),
            q: params.q,
            l,
            kind,
        },
    ))
}

/// Splits pieces on cubes with `|Q| ≥ 1` along the unit lattice.
pub fn split_unit(piece: &Patch, cube: &Cube) -> Vec<(Cube, Patch)> {
    if cube.side() < 1.0 {
        return vec![(*cube, piece.clone())];
    }
    let d = *piece.domain();
    unit_cubes(piece)
        .into_iter()
        .filter_map(|u| {
            let mut part = piece.clone();
            let idx = part.flat_indices();
            for (v, i) in part.values.iter_mut().zip(idx) {
                if !u.contains(&d.point(i)[..d.dim()]) {
                    *v = 0.0;
                }
            }
            (part.max_abs() > 0.0).then_some((u, part))
        })
        .collect()
}

/// Multi-level decomposition `f = g_{j₀} + Σ_j Σ_k λ_{j,k} a_{j,k}` over the
/// heights `2^j` between the extremes of `ℳ_N f`.
pub fn atomic_decompose(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    dict: &TestDictionary,
    params: &AtomicParams,
) -> Result<AtomicDecomposition> {
    if dict.variant != Variant::Large {
        return Err(Error::InvalidParameter(
            "atomic decomposition needs the large dictionary".into(),
        ));
    }
    check_admissible(params, p, w, dict.order)?;
    let d = *f.domain();
    if f.is_zero() {
        return Ok(AtomicDecomposition::empty(d));
    }
    let mf = grand_maximal(f, dict, Mode::MN)?;
    let top = mf.max();
    let j_hi = top.log2().ceil() as i32;
    let floor = j_hi - params.depth as i32;
    let bottom = mf.min();
    let mut j0 = if bottom > 0.0 {
        (bottom.log2().floor() as i32).max(floor)
    } else {
        floor
    };
    while j0 < j_hi && mf.samples().iter().all(|&v| v > 2f64.powi(j0)) {
        j0 += 1;
    }
    let levels: Vec<HeightLevel> = (j0..=j_hi)
        .into_par_iter()
        .map(|j| {
            Ok(HeightLevel {
                j,
                cz: cz_decompose_with(f, &mf, 2f64.powi(j), params.l)?,
            })
        })
        .collect::<Result<_>>()?;
    let per_level: Vec<Vec<(i32, Cube, Patch)>> = levels
        .par_windows(2)
        .map(|pair| -> Result<Vec<(i32, Cube, Patch)>> {
            let pieces = level_atoms(f, &pair[0], &pair[1], params.l)?;
            Ok(pair[0]
                .cz
                .bad
                .iter()
                .zip(pieces)
                .map(|(b, a)| (pair[0].j, b.cube, a))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut dec = AtomicDecomposition::empty(d);
    for (j, cube, piece) in per_level.into_iter().flatten() {
        for (c, part) in split_unit(&piece, &cube) {
            let kind = if c.side() < 1.0 {
                AtomKind::Local
            } else {
                AtomKind::Unit
            };
            if let Some((lambda, atom)) = normalize(part, c, kind, params, w) {
                dec.lambdas.push(lambda);
                dec.cubes.push(c);
                dec.levels.push(j);
                dec.atoms.push(atom);
            }
        }
    }
    let g0 = &levels[0].cz.good;
    if params.single {
        let whole = Cube::new(d.dim(), 0, [0, 0], [0, 0]);
        dec.single_part = normalize(Patch::from_grid(g0), whole, AtomKind::Single, params, w);
    } else {
        dec.truncated = g0.max_abs();
    }
    Ok(dec)
}

/// `Σ λ_j a_j` plus the single part.
pub fn synthesize(dec: &AtomicDecomposition) -> GridFunction {
    let mut out = GridFunction::zeros(dec.domain);
    for (l, a) in dec.lambdas.iter().zip(&dec.atoms) {
        a.values.add_into(&mut out, *l);
    }
    if let Some((l0, a0)) = &dec.single_part {
        a0.values.add_into(&mut out, *l0);
    }
    out
}

/// `sup_{x ∉ 2Q} ℳ⁰_N a(x) / (M^loc χ_Q(x))^{(n+L+1)/n}` over a small dictionary.
///
/// Keys: `constant`, `beyond_reach` (largest `ℳ⁰_N a` at points farther than
/// the dictionary reach plus the cube diameter), `peak` (largest `ℳ⁰_N a`),
/// `unbounded` (points where the denominator vanishes but the numerator does not).
pub fn bad_part_majorant_check(a: &Atom, dict: &TestDictionary) -> Result<Report> {
    let q = a
        .support
        .ok_or_else(|| Error::InvalidParameter("single atoms have no support cube".into()))?;
    if dict.variant != Variant::Small {
        return Err(Error::InvalidParameter(
            "majorant check uses the small dictionary".into(),
        ));
    }
    let d = *a.values.domain();
    let g = a.values.to_grid();
    let m0 = grand_maximal(&g, dict, Mode::M0)?;
    let unit = (1.0 / d.h()).round() as usize;
    let loc = lattice_maximal(&GridFunction::indicator(d, &q), unit);
    let n = d.dim() as f64;
    let expo = (n + a.l.max(0) as f64 + 1.0) / n;
    let c = q.center();
    let side = q.side();
    let reach = dict.specs.iter().map(|s| s.reach()).fold(0.0, f64::max) + q.diam();
    let (mut constant, mut beyond, mut unbounded) = (0.0f64, 0.0f64, 0usize);
    for i in 0..d.len() {
        let x = d.point(i);
        let far = (0..d.dim()).any(|k| (x[k] - c[k]).abs() >= side);
        if !far {
            continue;
        }
        let num = m0.samples()[i];
        let den = loc.samples()[i].powf(expo);
        let dist = ((0..d.dim()).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>()).sqrt();
        if dist > reach {
            beyond = beyond.max(num);
        }
        if den > 0.0 {
            constant = constant.max(num / den);
        } else if num > 1e-14 * m0.max() {
            unbounded += 1;
        }
    }
    Ok(Report::new("bad_part_majorant")
        .with("constant", constant)
        .with("beyond_reach", beyond)
        .with("peak", m0.max())
        .with("unbounded", unbounded as f64)
        .passing(unbounded == 0 && constant.is_finite()))
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CubeRecord {
    k: i32,
    a: [u8; 2],
    m: [i64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ValuesRef {
    offset: usize,
    lo: [usize; 2],
    shape: [usize; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomRecord {
    lambda: f64,
    cube: Option<CubeRecord>,
    kind: AtomKind,
    level: Option<i32>,
    /// `null` encodes `q = ∞`.
    q: Option<f64>,
    #[serde(rename = "L")]
    l: i32,
    values_ref: ValuesRef,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DecompositionRecord {
    domain: Domain,
    truncated: f64,
    single: Option<AtomRecord>,
    atoms: Vec<AtomRecord>,
}

fn record(lambda: f64, a: &Atom, level: Option<i32>, sidecar: &mut Vec<u8>) -> AtomRecord {
    let offset = sidecar.len() / 8;
    for v in a.values.values() {
        sidecar.extend_from_slice(&v.to_le_bytes());
    }
    AtomRecord {
        lambda,
        cube: a.support.map(|c| CubeRecord {
            k: c.level,
            a: c.shift,
            m: c.index,
        }),
        kind: a.kind,
        level,
        q: a.q.is_finite().then_some(a.q),
        l: a.l,
        values_ref: ValuesRef {
            offset,
            lo: a.values.lo,
            shape: a.values.shape,
        },
    }
}

fn restore(r: &AtomRecord, domain: Domain, data: &[f64]) -> Result<(f64, Atom)> {
    let len = r.values_ref.shape[0] * r.values_ref.shape[1];
    let values = data
        .get(r.values_ref.offset..r.values_ref.offset + len)
        .ok_or_else(|| Error::InvalidParameter("sidecar shorter than the index".into()))?
        .to_vec();
    let patch = Patch {
        domain,
        lo: r.values_ref.lo,
        shape: r.values_ref.shape,
        values,
    };
    let support = r
        .cube
        .as_ref()
        .map(|c| Cube::new(domain.dim(), c.k, c.a, c.m));
    let atom = Atom {
        support,
        values: patch,
        q: r.q.unwrap_or(f64::INFINITY),
        l: r.l,
        kind: r.kind,
    };
    Ok((r.lambda, atom))
}

/// Writes the decomposition as JSON plus a little-endian `f64` sidecar.
pub fn write_decomposition(dec: &AtomicDecomposition, json: &Path, sidecar: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    let single = dec
        .single_part
        .as_ref()
        .map(|(l, a)| record(*l, a, None, &mut bytes));
    let atoms = dec
        .lambdas
        .iter()
        .zip(&dec.atoms)
        .zip(&dec.levels)
        .map(|((l, a), j)| record(*l, a, Some(*j), &mut bytes))
        .collect();
    let rec = DecompositionRecord {
        domain: dec.domain,
        truncated: dec.truncated,
        single,
        atoms,
    };
    fs::write(json, serde_json::to_vec_pretty(&rec)?)?;
    fs::write(sidecar, bytes)?;
    Ok(())
}

pub fn read_decomposition(json: &Path, sidecar: &Path) -> Result<AtomicDecomposition> {
    let rec: DecompositionRecord = serde_json::from_slice(&fs::read(json)?)?;
    let raw = fs::read(sidecar)?;
    let data: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut dec = AtomicDecomposition::empty(rec.domain);
    dec.truncated = rec.truncated;
    if let Some(s) = &rec.single {
        dec.single_part = Some(restore(s, rec.domain, &data)?);
    }
    for r in &rec.atoms {
        let (l, a) = restore(r, rec.domain, &data)?;
        dec.lambdas.push(l);
        dec.cubes
            .push(a.support.expect("non-single atoms carry a cube"));
        dec.levels.push(r.level.unwrap_or(0));
        dec.atoms.push(a);
    }
    Ok(dec)
}
