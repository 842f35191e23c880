//! Uniform lattices, grid functions, shifted dyadic cubes, block sums and
//! FFT convolution.
//!
//! Sample `i` sits at `x_i = -T + i h` and stands for the cell `[x_i, x_i + h)^n`.
//! Cubes are half-open and a lattice point belongs to a cube iff the point
//! itself lies in it, so every level of every shifted grid tiles the lattice
//! exactly. Membership is decided in integer arithmetic (units of `h/3`).

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shift vector `a ∈ {0,1,2}^n`; the unused second entry is 0 when `n = 1`.
pub type Shift = [u8; 2];

/// Square window `[-T, T)^n` sampled with step `h = 2^-m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    half_width: f64,
    level: u32,
}

impl Domain {
    pub fn new(dim: usize, half_width: f64, level: u32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension {dim} not in {{1,2}}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "half width {half_width} must be positive"
            )));
        }
        if !(2..=24).contains(&level) {
            return Err(Error::InvalidDomain(format!(
                "level {level} outside 2..=24"
            )));
        }
        let count = 2.0 * half_width * 2f64.powi(level as i32);
        if count.fract() != 0.0 || count < 4.0 {
            return Err(Error::InvalidDomain(format!(
                "2T/h = {count} must be an integer >= 4"
            )));
        }
        let count = count as u64;
        if !count.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "2T/h = {count} is not a power of two"
            )));
        }
        if dim == 2 && count > 1 << 13 {
            return Err(Error::InvalidDomain(format!(
                "{count}^2 samples is too many"
            )));
        }
        Ok(Domain {
            dim,
            half_width,
            level,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn h(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    /// Samples per axis, `2T/h`.
    pub fn axis_len(&self) -> usize {
        (2.0 * self.half_width * 2f64.powi(self.level as i32)) as usize
    }

    pub fn len(&self) -> usize {
        self.axis_len().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Volume of the window.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    /// Index of the origin along each axis.
    pub fn origin(&self) -> usize {
        self.axis_len() / 2
    }

    pub fn origin_flat(&self) -> usize {
        let o = self.origin();
        self.flatten([o, o])
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            let n = self.axis_len();
            [flat / n, flat % n]
        }
    }

    pub fn flatten(&self, ix: [usize; 2]) -> usize {
        if self.dim == 1 {
            ix[0]
        } else {
            ix[0] * self.axis_len() + ix[1]
        }
    }

    /// Lattice point of a flat index; unused coordinates are zero.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let ix = self.unflatten(flat);
        let mut x = [0.0; 2];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coord(ix[a]);
        }
        x
    }

    /// Center of the cell of a flat index.
    pub fn center(&self, flat: usize) -> [f64; 2] {
        let mut x = self.point(flat);
        let h = self.h();
        for xa in x.iter_mut().take(self.dim) {
            *xa += 0.5 * h;
        }
        x
    }

    /// Axis index of the cell containing `x`, if inside the window.
    pub fn axis_index(&self, x: f64) -> Option<usize> {
        let i = ((x + self.half_width) / self.h()).floor();
        if i >= 0.0 && (i as usize) < self.axis_len() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Flat index of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut ix = [0usize; 2];
        for a in 0..self.dim {
            ix[a] = self.axis_index(x[a])?;
        }
        Some(self.flatten(ix))
    }

    /// Same window at twice the resolution.
    pub fn refined(&self) -> Domain {
        Domain {
            level: self.level + 1,
            ..*self
        }
    }

    /// Same window at resolution `level`.
    pub fn with_level(&self, level: u32) -> Result<Domain> {
        Domain::new(self.dim, self.half_width, level)
    }
}

/// Euclidean norm of the first `dim` coordinates.
pub fn norm(x: &[f64; 2], dim: usize) -> f64 {
    x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Pairwise summation; error grows like `log n` instead of `n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Real samples on the lattice of a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != domain.len() {
            return Err(Error::InvalidDomain(format!(
                "{} samples for a domain with {} points",
                samples.len(),
                domain.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridFunction { domain, samples })
    }

    /// Constructor for internal callers that guarantee finiteness.
    pub(crate) fn from_raw(domain: Domain, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), domain.len());
        GridFunction { domain, samples }
    }

    pub fn zeros(domain: Domain) -> Self {
        GridFunction {
            domain,
            samples: vec![0.0; domain.len()],
        }
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        GridFunction {
            domain,
            samples: vec![c; domain.len()],
        }
    }

    /// Samples `f` at the lattice points. Non-finite values become an error.
    pub fn from_fn(domain: Domain, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let samples = (0..domain.len())
            .into_par_iter()
            .map(|i| f(&domain.point(i)[..domain.dim()]))
            .collect();
        GridFunction::new(domain, samples)
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn_centers(domain: Domain, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let samples = (0..domain.len())
            .into_par_iter()
            .map(|i| f(&domain.center(i)[..domain.dim()]))
            .collect();
        GridFunction::new(domain, samples)
    }

    /// Discrete delta: `h^-n` at the origin, unit mass.
    pub fn delta(domain: Domain) -> Self {
        let mut g = GridFunction::zeros(domain);
        g.samples[domain.origin_flat()] = 1.0 / domain.cell_volume();
        g
    }

    /// Indicator of the lattice points of `cube`.
    pub fn indicator(domain: Domain, cube: &Cube) -> Self {
        let mut g = GridFunction::zeros(domain);
        for i in cube.lattice_points(&domain) {
            g.samples[i] = 1.0;
        }
        g
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Value at the lattice cell containing `x` (zero outside the window).
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.domain.locate(x).map_or(0.0, |i| self.samples[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_raw(self.domain, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.check_same(other)?;
        Ok(GridFunction::from_raw(
            self.domain,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &GridFunction) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat index of the largest sample (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.samples.iter().enumerate() {
            if v > self.samples[best] {
                best = i;
            }
        }
        best
    }

    /// Riemann sum over the window.
    pub fn integral(&self) -> f64 {
        self.domain.cell_volume() * pairwise_sum(&self.samples)
    }

    /// Unweighted `(∫|f|^p)^{1/p}` for constant `p > 0`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let v: Vec<f64> = self.samples.iter().map(|x| x.abs().powf(p)).collect();
        (self.domain.cell_volume() * pairwise_sum(&v)).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    /// Zero outside the lattice points of `cube`.
    pub fn restrict(&self, cube: &Cube) -> GridFunction {
        let mut g = GridFunction::zeros(self.domain);
        for i in cube.lattice_points(&self.domain) {
            g.samples[i] = self.samples[i];
        }
        g
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Cube `2^-k (m + a/3 + [0,1)^n)` of the shifted grid `𝒟_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub level: i32,
    pub shift: Shift,
    pub index: [i64; 2],
}

impl Cube {
    pub fn new(dim: usize, level: i32, shift: Shift, index: [i64; 2]) -> Self {
        let mut c = Cube {
            dim,
            level,
            shift,
            index,
        };
        if dim == 1 {
            c.shift[1] = 0;
            c.index[1] = 0;
        }
        c
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    pub fn diam(&self) -> f64 {
        self.side() * (self.dim as f64).sqrt()
    }

    pub fn corner(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (a, ca) in c.iter_mut().enumerate().take(self.dim) {
            *ca = self.side() * (self.index[a] as f64 + self.shift[a] as f64 / 3.0);
        }
        c
    }

    pub fn center(&self) -> [f64; 2] {
        let mut c = self.corner();
        for ca in c.iter_mut().take(self.dim) {
            *ca += 0.5 * self.side();
        }
        c
    }

    /// Half-open containment of a real point.
    pub fn contains(&self, x: &[f64]) -> bool {
        let c = self.corner();
        let s = self.side();
        (0..self.dim).all(|a| x[a] >= c[a] && x[a] < c[a] + s)
    }

    /// Whether `self ⊂ other` as real sets.
    pub fn is_inside(&self, other: &Cube) -> bool {
        let (c, s) = (self.corner(), self.side());
        let (o, t) = (other.corner(), other.side());
        let eps = 1e-12 * t;
        (0..self.dim).all(|a| c[a] >= o[a] - eps && c[a] + s <= o[a] + t + eps)
    }

    /// Parent in the same grid; only meaningful for the nested grid `a = 0`.
    pub fn parent(&self) -> Cube {
        let mut p = *self;
        p.level -= 1;
        for a in 0..self.dim {
            p.index[a] = self.index[a].div_euclid(2);
        }
        p
    }

    /// Children in the same grid (`a = 0` only).
    pub fn children(&self) -> Vec<Cube> {
        let mut out = Vec::with_capacity(1 << self.dim);
        for bits in 0..(1usize << self.dim) {
            let mut c = *self;
            c.level += 1;
            for a in 0..self.dim {
                c.index[a] = 2 * self.index[a] + ((bits >> a) & 1) as i64;
            }
            out.push(c);
        }
        out
    }

    /// Half-open range of axis indices of lattice points inside the cube,
    /// clamped to the window (may be empty).
    pub fn axis_range(&self, d: &Domain, axis: usize) -> (usize, usize) {
        let n = d.axis_len() as i64;
        let o = n / 2;
        let m = d.level() as i32;
        let k = self.level;
        let lo_num = 3 * self.index[axis] + self.shift[axis] as i64;
        let (lo, hi) = if k <= m {
            let s = 1i64 << (m - k);
            (
                o + ceil_div(s * lo_num, 3),
                o + ceil_div(s * (lo_num + 3), 3),
            )
        } else {
            let s = 3i64 << (k - m);
            (o + ceil_div(lo_num, s), o + ceil_div(lo_num + 3, s))
        };
        (lo.clamp(0, n) as usize, hi.clamp(0, n) as usize)
    }

    /// Flat indices of lattice points inside the cube.
    pub fn lattice_points(&self, d: &Domain) -> Vec<usize> {
        let (l0, h0) = self.axis_range(d, 0);
        if d.dim() == 1 {
            return (l0..h0).collect();
        }
        let (l1, h1) = self.axis_range(d, 1);
        let mut out = Vec::with_capacity((h0 - l0) * (h1.saturating_sub(l1)));
        for i0 in l0..h0 {
            for i1 in l1..h1 {
                out.push(d.flatten([i0, i1]));
            }
        }
        out
    }

    pub fn meets_window(&self, d: &Domain) -> bool {
        (0..d.dim()).all(|a| {
            let (l, h) = self.axis_range(d, a);
            l < h
        })
    }

    /// Index of the level-`level` cube of grid `shift` containing lattice index `i`.
    pub fn axis_index_of(d: &Domain, level: i32, shift: u8, i: usize) -> i64 {
        let m = d.level() as i32;
        let pos = 3 * (i as i64 - d.origin() as i64);
        if level <= m {
            let s = 1i64 << (m - level);
            (pos - s * shift as i64).div_euclid(3 * s)
        } else {
            let s = 1i64 << (level - m);
            (pos * s - shift as i64).div_euclid(3)
        }
    }

    /// The cube of level `level` in grid `shift` containing the lattice point `flat`.
    pub fn containing(d: &Domain, level: i32, shift: Shift, flat: usize) -> Cube {
        let ix = d.unflatten(flat);
        let mut index = [0i64; 2];
        for a in 0..d.dim() {
            index[a] = Cube::axis_index_of(d, level, shift[a], ix[a]);
        }
        Cube::new(d.dim(), level, shift, index)
    }
}

/// All `3^n` shift vectors in lexicographic order.
pub fn all_shifts(dim: usize) -> Vec<Shift> {
    if dim == 1 {
        (0..3).map(|a| [a, 0]).collect()
    } else {
        (0..3).flat_map(|a| (0..3).map(move |b| [a, b])).collect()
    }
}

/// Shift of the reference grid 𝔇 = 𝒟_(1,…,1).
pub fn reference_shift(dim: usize) -> Shift {
    if dim == 1 {
        [1, 0]
    } else {
        [1, 1]
    }
}

/// Level `k` with `2^-k` the largest power of two not exceeding `side`.
pub fn level_for_side(side: f64) -> i32 {
    -(side.log2().floor() as i32)
}

/// Cubes of the requested grids with `h ≤ ℓ(Q) ≤ max_side` containing at least
/// one lattice point. Order: level descending, then shift, then index
/// lexicographically.
pub fn enumerate_cubes(d: &Domain, max_side: f64, shifts: &[Shift]) -> Vec<Cube> {
    if max_side < d.h() {
        return Vec::new();
    }
    let k_min = level_for_side(max_side);
    let k_max = d.level() as i32;
    let mut out = Vec::new();
    for k in (k_min..=k_max).rev() {
        for &a in shifts {
            let blocks = LevelBlocks::new(d, k, a);
            out.extend((0..blocks.len()).map(|b| blocks.cube(b)));
        }
    }
    out
}

#[derive(Clone, Debug)]
struct AxisBlocks {
    index: Vec<i64>,
    bounds: Vec<usize>,
}

impl AxisBlocks {
    fn new(d: &Domain, level: i32, shift: u8) -> Self {
        let n = d.axis_len();
        let first = Cube::axis_index_of(d, level, shift, 0);
        let last = Cube::axis_index_of(d, level, shift, n - 1);
        let mut index = Vec::with_capacity((last - first + 1) as usize);
        let mut bounds = vec![0];
        for m in first..=last {
            let c = Cube::new(1, level, [shift, 0], [m, 0]);
            let (lo, hi) = c.axis_range(d, 0);
            if lo < hi {
                debug_assert_eq!(lo, *bounds.last().unwrap());
                index.push(m);
                bounds.push(hi);
            }
        }
        debug_assert_eq!(*bounds.last().unwrap(), n);
        AxisBlocks { index, bounds }
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn range(&self, b: usize) -> (usize, usize) {
        (self.bounds[b], self.bounds[b + 1])
    }
}

/// Partition of the lattice by the cubes of one level of one shifted grid.
#[derive(Clone, Debug)]
pub struct LevelBlocks {
    dim: usize,
    level: i32,
    shift: Shift,
    axes: Vec<AxisBlocks>,
    axis_len: usize,
}

impl LevelBlocks {
    pub fn new(d: &Domain, level: i32, shift: Shift) -> Self {
        let axes = (0..d.dim())
            .map(|a| AxisBlocks::new(d, level, shift[a]))
            .collect();
        LevelBlocks {
            dim: d.dim(),
            level,
            shift,
            axes,
            axis_len: d.axis_len(),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(AxisBlocks::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    fn split(&self, b: usize) -> (usize, usize) {
        if self.dim == 1 {
            (b, 0)
        } else {
            (b / self.axes[1].len(), b % self.axes[1].len())
        }
    }

    pub fn cube(&self, b: usize) -> Cube {
        let (b0, b1) = self.split(b);
        let mut index = [self.axes[0].index[b0], 0];
        if self.dim == 2 {
            index[1] = self.axes[1].index[b1];
        }
        Cube::new(self.dim, self.level, self.shift, index)
    }

    /// Number of lattice points in block `b`.
    pub fn count(&self, b: usize) -> usize {
        let (b0, b1) = self.split(b);
        let (l0, h0) = self.axes[0].range(b0);
        if self.dim == 1 {
            h0 - l0
        } else {
            let (l1, h1) = self.axes[1].range(b1);
            (h0 - l0) * (h1 - l1)
        }
    }

    /// Flat indices of the lattice points of block `b`.
    pub fn points(&self, b: usize) -> Vec<usize> {
        let (b0, b1) = self.split(b);
        let (l0, h0) = self.axes[0].range(b0);
        if self.dim == 1 {
            return (l0..h0).collect();
        }
        let (l1, h1) = self.axes[1].range(b1);
        let n = self.axis_len;
        (l0..h0)
            .flat_map(|i0| (l1..h1).map(move |i1| i0 * n + i1))
            .collect()
    }

    /// Per-block `ln Σ exp(v)`, safe against overflow.
    pub fn log_sum_exp(&self, values: &[f64]) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|b| {
                let pts = self.points(b);
                let mx = pts
                    .iter()
                    .map(|&i| values[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                if mx == f64::NEG_INFINITY {
                    return mx;
                }
                let terms: Vec<f64> = pts.iter().map(|&i| (values[i] - mx).exp()).collect();
                mx + pairwise_sum(&terms).ln()
            })
            .collect()
    }

    /// Per-block sums of `values`, block order as in [`LevelBlocks::cube`].
    pub fn sums(&self, values: &[f64]) -> Vec<f64> {
        let a0 = &self.axes[0];
        if self.dim == 1 {
            return (0..a0.len())
                .map(|b| {
                    let (l, h) = a0.range(b);
                    pairwise_sum(&values[l..h])
                })
                .collect();
        }
        let a1 = &self.axes[1];
        let n = self.axis_len;
        let nb1 = a1.len();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i0| {
                let row = &values[i0 * n..(i0 + 1) * n];
                (0..nb1).map(move |b1| {
                    let (l, h) = a1.range(b1);
                    pairwise_sum(&row[l..h])
                })
            })
            .collect();
        (0..a0.len() * nb1)
            .into_par_iter()
            .map(|b| {
                let (b0, b1) = (b / nb1, b % nb1);
                let (l, h) = a0.range(b0);
                let col: Vec<f64> = (l..h).map(|i0| rows[i0 * nb1 + b1]).collect();
                pairwise_sum(&col)
            })
            .collect()
    }

    /// Spreads per-block values back onto the lattice.
    pub fn broadcast(&self, block_values: &[f64]) -> Vec<f64> {
        let n = self.axis_len;
        let a0 = &self.axes[0];
        if self.dim == 1 {
            let mut out = vec![0.0; n];
            for b in 0..a0.len() {
                let (l, h) = a0.range(b);
                out[l..h].fill(block_values[b]);
            }
            return out;
        }
        let a1 = &self.axes[1];
        let nb1 = a1.len();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i0, row)| {
            let b0 = a0.bounds.partition_point(|&x| x <= i0) - 1;
            for b1 in 0..nb1 {
                let (l, h) = a1.range(b1);
                row[l..h].fill(block_values[b0 * nb1 + b1]);
            }
        });
        out
    }

    /// `out[x] = max(out[x], block_values[block(x)])`.
    pub fn max_into(&self, block_values: &[f64], out: &mut [f64]) {
        let spread = self.broadcast(block_values);
        out.par_iter_mut()
            .zip(spread.par_iter())
            .for_each(|(o, &v)| {
                if v > *o {
                    *o = v;
                }
            });
    }
}

/// Result of a Riemann sum over a cube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// True when the cube contains no lattice point of the window.
    pub empty: bool,
}

/// `h^n Σ f` over the lattice points of `cube` (whole window when `None`).
pub fn quadrature(f: &GridFunction, cube: Option<&Cube>) -> Quadrature {
    match cube {
        None => Quadrature {
            value: f.integral(),
            empty: false,
        },
        Some(q) => {
            let pts = q.lattice_points(f.domain());
            if pts.is_empty() {
                return Quadrature {
                    value: 0.0,
                    empty: true,
                };
            }
            let v: Vec<f64> = pts.iter().map(|&i| f.samples()[i]).collect();
            Quadrature {
                value: f.domain().cell_volume() * pairwise_sum(&v),
                empty: false,
            }
        }
    }
}

/// Cached FFT of a grid function for repeated centered convolutions
/// `(f * g)(x_k) = h^n Σ_j f_j g_{k-j+N/2}`.
pub struct Convolver {
    domain: Domain,
    size: usize,
    fhat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(f: &GridFunction) -> Self {
        let domain = *f.domain();
        let size = 2 * domain.axis_len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut c = Convolver {
            domain,
            size,
            fhat: Vec::new(),
            forward,
            inverse,
        };
        c.fhat = c.transform(f);
        c
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn pad(&self, f: &GridFunction) -> Vec<Complex<f64>> {
        let n = self.domain.axis_len();
        let s = self.size;
        if self.domain.dim() == 1 {
            let mut buf = vec![Complex::new(0.0, 0.0); s];
            for (b, &v) in buf.iter_mut().zip(f.samples()) {
                b.re = v;
            }
            buf
        } else {
            let mut buf = vec![Complex::new(0.0, 0.0); s * s];
            for i0 in 0..n {
                for i1 in 0..n {
                    buf[i0 * s + i1].re = f.samples()[i0 * n + i1];
                }
            }
            buf
        }
    }

    fn fft_nd(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let s = self.size;
        if self.domain.dim() == 1 {
            plan.process(buf);
            return;
        }
        buf.par_chunks_mut(s).for_each(|row| plan.process(row));
        transpose(buf, s);
        buf.par_chunks_mut(s).for_each(|row| plan.process(row));
        transpose(buf, s);
    }

    fn transform(&self, f: &GridFunction) -> Vec<Complex<f64>> {
        let mut buf = self.pad(f);
        self.fft_nd(&mut buf, &self.forward);
        buf
    }

    /// `f * g` for a kernel `g` on the same domain.
    pub fn apply(&self, g: &GridFunction) -> Result<GridFunction> {
        if *g.domain() != self.domain {
            return Err(Error::DomainMismatch);
        }
        let mut buf = self.transform(g);
        for (b, fh) in buf.iter_mut().zip(&self.fhat) {
            *b *= fh;
        }
        self.fft_nd(&mut buf, &self.inverse);
        let n = self.domain.axis_len();
        let s = self.size;
        let off = n / 2;
        let norm = self.domain.cell_volume() / (s as f64).powi(self.domain.dim() as i32);
        let samples = if self.domain.dim() == 1 {
            (0..n).map(|k| buf[k + off].re * norm).collect()
        } else {
            let mut out = vec![0.0; n * n];
            for k0 in 0..n {
                for k1 in 0..n {
                    out[k0 * n + k1] = buf[(k0 + off) * s + k1 + off].re * norm;
                }
            }
            out
        };
        Ok(GridFunction::from_raw(self.domain, samples))
    }
}

fn transpose(buf: &mut [Complex<f64>], s: usize) {
    for i in 0..s {
        for j in (i + 1)..s {
            buf.swap(i * s + j, j * s + i);
        }
    }
}

/// Centered discrete convolution with zero extension, scaled by `h^n`.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.check_same(g)?;
    Convolver::new(f).apply(g)
}

/// Samples of `t^-n φ(x/t)` for dyadic `t = 2^-j ≥ h`, by exact subsampling.
pub fn rescale_mollifier(phi: &GridFunction, t: f64) -> Result<GridFunction> {
    let d = *phi.domain();
    if !(t > 0.0 && t <= 1.0) || t.log2().fract() != 0.0 {
        return Err(Error::InvalidScale(t));
    }
    if t < d.h() {
        return Err(Error::ScaleBelowResolution { t, h: d.h() });
    }
    let j = (-t.log2()) as u32;
    let stride = 1i64 << j;
    let o = d.origin() as i64;
    let n = d.axis_len() as i64;
    let amp = t.powi(-(d.dim() as i32));
    let src = |i: usize| -> Option<usize> {
        let k = o + (i as i64 - o) * stride;
        (0..n).contains(&k).then_some(k as usize)
    };
    let samples = (0..d.len())
        .map(|flat| {
            let ix = d.unflatten(flat);
            let mut sx = [0usize; 2];
            for a in 0..d.dim() {
                match src(ix[a]) {
                    Some(k) => sx[a] = k,
                    None => return 0.0,
                }
            }
            amp * phi.samples()[d.flatten(sx)]
        })
        .collect();
    Ok(GridFunction::from_raw(d, samples))
}

/// Sliding maximum over `[i - r, i + r]` (clamped) along a strided line.
pub fn sliding_max_line(src: &[f64], r: usize) -> Vec<f64> {
    let n = src.len();
    let mut out = vec![0.0; n];
    let mut q: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let hi = (i + r).min(n - 1);
        while next <= hi {
            while let Some(&b) = q.back() {
                if src[b] <= src[next] {
                    q.pop_back();
                } else {
                    break;
                }
            }
            q.push_back(next);
            next += 1;
        }
        while let Some(&f) = q.front() {
            if f + r < i {
                q.pop_front();
            } else {
                break;
            }
        }
        *o = src[*q.front().unwrap()];
    }
    out
}

/// Maximum over the open Euclidean ball of radius `radius` (in lattice steps).
pub fn ball_max_filter(values: &[f64], d: &Domain, radius: f64) -> Vec<f64> {
    // largest integer r with r < radius
    let r = (radius.ceil() as usize).saturating_sub(1);
    let n = d.axis_len();
    if d.dim() == 1 {
        return sliding_max_line(values, r);
    }
    // row maxima for each half-width that occurs in the disk
    let half = |dy: usize| -> usize {
        let rem = radius * radius - (dy * dy) as f64;
        let mut w = rem.max(0.0).sqrt().ceil() as usize;
        while w > 0 && ((w * w + dy * dy) as f64) >= radius * radius {
            w -= 1;
        }
        w
    };
    let widths: Vec<usize> = (0..=r).map(half).collect();
    let mut distinct = widths.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let row_max: Vec<(usize, Vec<f64>)> = distinct
        .par_iter()
        .map(|&w| {
            let mut out = Vec::with_capacity(n * n);
            for row in values.chunks(n) {
                out.extend(sliding_max_line(row, w));
            }
            (w, out)
        })
        .collect();
    let lookup = |w: usize| &row_max.iter().find(|(x, _)| *x == w).unwrap().1;
    let mut out = vec![f64::NEG_INFINITY; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i0, orow)| {
        for (dy, &w) in widths.iter().enumerate() {
            let rm = lookup(w);
            for &y in &[i0 as i64 - dy as i64, i0 as i64 + dy as i64] {
                if y < 0 || y >= n as i64 {
                    continue;
                }
                let src = &rm[y as usize * n..(y as usize + 1) * n];
                for (o, &v) in orow.iter_mut().zip(src) {
                    if v > *o {
                        *o = v;
                    }
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d1(t: f64, m: u32) -> Domain {
        Domain::new(1, t, m).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(3, 1.0, 5).is_err());
        assert!(Domain::new(1, 3.0, 5).is_err());
        assert!(Domain::new(1, -1.0, 5).is_err());
        let d = d1(8.0, 9);
        assert_eq!(d.axis_len(), 8192);
        assert_eq!(d.coord(d.origin()), 0.0);
        assert_eq!(d.locate(&[0.0]), Some(d.origin()));
        assert_eq!(d.locate(&[8.0]), None);
    }

    #[test]
    fn quadrature_examples() {
        let d = d1(1.0, 7);
        let h = d.h();
        let one = GridFunction::constant(d, 1.0);
        let unit = Cube::new(1, 0, [0, 0], [0, 0]);
        assert!((quadrature(&one, Some(&unit)).value - 1.0).abs() <= h);
        assert_eq!(quadrature(&GridFunction::zeros(d), None).value, 0.0);
        let sq = GridFunction::from_fn(d, |x| if x[0] >= 0.0 { x[0] * x[0] } else { 0.0 }).unwrap();
        assert!((quadrature(&sq, Some(&unit)).value - 1.0 / 3.0).abs() <= 2.0 * h);
        let far = Cube::new(1, 0, [0, 0], [5, 0]);
        let q = quadrature(&one, Some(&far));
        assert!(q.empty && q.value == 0.0);
    }

    #[test]
    fn enumeration_hand_count() {
        let d = Domain::new(1, 1.0, 2).unwrap();
        let cubes = enumerate_cubes(&d, 1.0, &[[0, 0]]);
        assert_eq!(cubes.len(), 14);
        let levels: Vec<i32> = cubes.iter().map(|c| c.level).collect();
        assert_eq!(levels.iter().filter(|&&k| k == 0).count(), 2);
        assert_eq!(levels.iter().filter(|&&k| k == 1).count(), 4);
        assert_eq!(levels.iter().filter(|&&k| k == 2).count(), 8);
        assert!(levels.windows(2).all(|w| w[0] >= w[1]));
        let finest = enumerate_cubes(&d, d.h(), &[[0, 0]]);
        assert!(finest.iter().all(|c| c.level == 2));
        let all = enumerate_cubes(&d, 1.0, &all_shifts(1));
        let mut dedup = all.clone();
        dedup.sort_by_key(|c| (c.level, c.shift, c.index));
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }

    #[test]
    fn tiling_every_level_and_shift() {
        for dim in [1, 2] {
            let d = Domain::new(dim, 1.0, 4).unwrap();
            for k in -2..=4 {
                for a in all_shifts(dim) {
                    let mut hits = vec![0u32; d.len()];
                    let lb = LevelBlocks::new(&d, k, a);
                    for b in 0..lb.len() {
                        let pts = lb.cube(b).lattice_points(&d);
                        assert_eq!(pts.len(), lb.count(b));
                        for i in pts {
                            hits[i] += 1;
                            assert!(lb.cube(b).contains(&d.point(i)[..dim]));
                        }
                    }
                    assert!(hits.iter().all(|&c| c == 1), "k={k} a={a:?}");
                }
            }
        }
    }

    #[test]
    fn block_sums_match_direct() {
        let d = Domain::new(2, 1.0, 4).unwrap();
        let f = GridFunction::from_fn(d, |x| (3.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        for a in all_shifts(2) {
            let lb = LevelBlocks::new(&d, 1, a);
            let s = lb.sums(f.samples());
            for b in 0..lb.len() {
                let direct: f64 = lb
                    .cube(b)
                    .lattice_points(&d)
                    .iter()
                    .map(|&i| f.samples()[i])
                    .sum();
                assert!((s[b] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_examples() {
        let d = d1(4.0, 7);
        let h = d.h();
        let f = GridFunction::from_fn(d, |x| (x[0]).cos() * (-x[0] * x[0]).exp()).unwrap();
        let id = convolve(&f, &GridFunction::delta(d)).unwrap();
        for (a, b) in id.samples().iter().zip(f.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        let chi = GridFunction::from_fn(d, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })
            .unwrap();
        let hat = convolve(&chi, &chi).unwrap();
        // direct-sum oracle
        let n = d.axis_len();
        let o = d.origin();
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let idx = k as i64 - j as i64 + o as i64;
                if (0..n as i64).contains(&idx) {
                    s += chi.samples()[j] * chi.samples()[idx as usize];
                }
            }
            assert!((hat.samples()[k] - h * s).abs() < 1e-10);
        }
        let peak = hat.value_at(&[1.0]);
        assert!((peak - 1.0).abs() <= 2.0 * h);
        assert!(hat.value_at(&[2.5]).abs() < 1e-10);
        let g = GridFunction::from_fn(d, |x| {
            (-(x[0] - 0.3).abs()).exp() * (x[0].abs() < 2.0) as u8 as f64
        })
        .unwrap();
        let fg = convolve(&f, &g).unwrap();
        let gf = convolve(&g, &f).unwrap();
        for (a, b) in fg.samples().iter().zip(gf.samples()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(convolve(&f, &GridFunction::zeros(d1(2.0, 7))).is_err());
    }

    #[test]
    fn convolution_2d_delta() {
        let d = Domain::new(2, 1.0, 4).unwrap();
        let f = GridFunction::from_fn(d, |x| x[0] - 2.0 * x[1] * x[1]).unwrap();
        let id = convolve(&f, &GridFunction::delta(d)).unwrap();
        for (a, b) in id.samples().iter().zip(f.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_examples() {
        let d = d1(4.0, 7);
        let phi = GridFunction::from_fn(d, |x| {
            let r = x[0].abs();
            if r < 1.0 {
                (-1.0 / (1.0 - r * r)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        assert_eq!(rescale_mollifier(&phi, 1.0).unwrap(), phi);
        let half = rescale_mollifier(&phi, 0.5).unwrap();
        assert!((half.integral() - phi.integral()).abs() <= 4.0 * d.h());
        assert_eq!(half.max(), 2.0 * phi.max());
        assert!(matches!(
            rescale_mollifier(&phi, d.h() / 2.0),
            Err(Error::ScaleBelowResolution { .. })
        ));
        assert!(rescale_mollifier(&phi, 0.3).is_err());
    }

    #[test]
    fn ball_filter_matches_brute_force() {
        let d = Domain::new(2, 1.0, 3).unwrap();
        let f = GridFunction::from_fn(d, |x| (7.0 * x[0] + 3.0 * x[1]).sin()).unwrap();
        let n = d.axis_len();
        for radius in [1.0, 2.5, 3.0, 4.0] {
            let got = ball_max_filter(f.samples(), &d, radius);
            for p in 0..d.len() {
                let [a, b] = d.unflatten(p);
                let mut best = f64::NEG_INFINITY;
                for q in 0..d.len() {
                    let [c, e] = d.unflatten(q);
                    let dist2 =
                        ((a as f64 - c as f64).powi(2) + (b as f64 - e as f64).powi(2)).sqrt();
                    if dist2 < radius {
                        best = best.max(f.samples()[q]);
                    }
                }
                assert_eq!(got[p], best, "radius {radius} at {p} (n={n})");
            }
        }
    }

    proptest! {
        #[test]
        fn quadrature_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, s in 0u64..1000) {
            let d = d1(2.0, 6);
            let f = GridFunction::from_fn(d, |x| (x[0] * (s as f64 + 1.0)).sin()).unwrap();
            let g = GridFunction::from_fn(d, |x| x[0].powi(3) - s as f64).unwrap();
            let mut lin = f.scale(a);
            lin.axpy(b, &g).unwrap();
            let lhs = quadrature(&lin, None).value;
            let rhs = a * quadrature(&f, None).value + b * quadrature(&g, None).value;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())) * 100.0);
        }

        #[test]
        fn any_interval_fits_in_a_shifted_cube(lo in -3.9..3.0f64, len in 0.01..0.9f64) {
            let d = d1(4.0, 6);
            let hi = (lo + len).min(3.99);
            let side = hi - lo;
            let cubes = enumerate_cubes(&d, 8.0, &all_shifts(1));
            let found = cubes.iter().any(|c| {
                let c0 = c.corner()[0];
                c0 <= lo && hi <= c0 + c.side() && c.side() <= 6.0 * side
            });
            prop_assert!(found);
        }
    }
}
