//! Orthonormal Daubechies wavelets on the window and the square functions
//! `V f`, `W f`.
//!
//! Filters come from spectral factorization of the half-band polynomial. The
//! transform is periodized over the window; lattice samples enter as
//! `⟨f, φ_{m,k}⟩ ≈ h^{n/2} f(x_k)` at the finest level `m`. Level `j` index
//! `kk` stands for the dyadic position `k = 2^j·(−T) + kk`.

use std::fs;
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{Domain, GridFunction};
use crate::norms::luxemburg_norm;
use crate::weight::{q_w_estimate, Weight};

#[derive(Clone, Debug, PartialEq)]
pub struct WaveletSystem {
    /// Filter order; `φ` and `ψ` are supported in `[0, 2N − 1]`.
    pub order: usize,
    pub scaling_filter: Vec<f64>,
    pub wavelet_filter: Vec<f64>,
    /// `ψ ⊥ 𝒫_{N−1}`.
    pub vanishing_moments: usize,
}

impl WaveletSystem {
    /// Largest `L` with `ψ ∈ 𝒫_L^⊥`.
    pub fn moment_order(&self) -> i32 {
        self.vanishing_moments as i32 - 1
    }
}

fn poly_mul(a: &[Complex<f64>], b: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Daubechies filter with `order` vanishing moments, minimum phase.
pub fn build_wavelet_system(order: usize) -> Result<WaveletSystem> {
    if !(2..=10).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = order;
    // roots of P(y) = Σ_{k<N} C(N−1+k, k) y^k via the companion matrix
    let coeffs: Vec<f64> = (0..n).map(|k| binomial(n - 1 + k, k)).collect();
    let deg = n - 1;
    let lead = coeffs[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let ys = comp.complex_eigenvalues();
    // y = (2 − z − 1/z)/4  ⇔  z² − (2 − 4y) z + 1 = 0; keep |z| < 1
    let one = Complex::new(1.0, 0.0);
    let mut poly = vec![one];
    for y in ys.iter() {
        let b = Complex::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) * 0.5;
        let z2 = (b - disc) * 0.5;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        poly = poly_mul(&poly, &[-z, one]);
    }
    for _ in 0..n {
        poly = poly_mul(&poly, &[one, one]);
    }
    let mut h: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let s: f64 = h.iter().sum();
    let scale = std::f64::consts::SQRT_2 / s;
    h.iter_mut().for_each(|v| *v *= scale);
    // minimum phase puts the mass at the start
    if h[0].abs() < h[h.len() - 1].abs() {
        h.reverse();
    }
    let len = h.len();
    let g = (0..len)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * h[len - 1 - k])
        .collect();
    Ok(WaveletSystem {
        order: n,
        scaling_filter: h,
        wavelet_filter: g,
        vanishing_moments: n,
    })
}

// ---------------------------------------------------------------------------
// Periodized transform

fn analysis_step(c: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let len = c.len();
    let half = len / 2;
    let mut lo = vec![0.0; half];
    let mut hi = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut b) = (0.0, 0.0);
        for (t, (hv, gv)) in h.iter().zip(g).enumerate() {
            let v = c[(2 * k + t) % len];
            a += hv * v;
            b += gv * v;
        }
        lo[k] = a;
        hi[k] = b;
    }
    (lo, hi)
}

fn synthesis_step(lo: &[f64], hi: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let len = 2 * lo.len();
    let mut c = vec![0.0; len];
    for k in 0..lo.len() {
        for (t, (hv, gv)) in h.iter().zip(g).enumerate() {
            c[(2 * k + t) % len] += hv * lo[k] + gv * hi[k];
        }
    }
    c
}

/// Applies `op` to every row (axis 1) or column (axis 0) of a square array.
fn along_axis(data: &[f64], side: usize, axis: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; side];
    for r in 0..side {
        for t in 0..side {
            line[t] = if axis == 1 {
                data[r * side + t]
            } else {
                data[t * side + r]
            };
        }
        let res = op(&line);
        for t in 0..side {
            if axis == 1 {
                out[r * side + t] = res[t];
            } else {
                out[t * side + r] = res[t];
            }
        }
    }
    out
}

fn split2(data: &[f64], side: usize, sys: &WaveletSystem) -> [Vec<f64>; 4] {
    let (h, g) = (&sys.scaling_filter, &sys.wavelet_filter);
    let half = side / 2;
    let rows = along_axis(data, side, 1, |l| {
        let (a, b) = analysis_step(l, h, g);
        [a, b].concat()
    });
    let cols = along_axis(&rows, side, 0, |l| {
        let (a, b) = analysis_step(l, h, g);
        [a, b].concat()
    });
    let block = |r0: usize, c0: usize| {
        let mut out = Vec::with_capacity(half * half);
        for r in 0..half {
            out.extend_from_slice(&cols[(r0 + r) * side + c0..(r0 + r) * side + c0 + half]);
        }
        out
    };
    // LL, then (low along axis 0, high along axis 1), (high, low), (high, high)
    [
        block(0, 0),
        block(0, half),
        block(half, 0),
        block(half, half),
    ]
}

fn merge2(parts: [&[f64]; 4], half: usize, sys: &WaveletSystem) -> Vec<f64> {
    let (h, g) = (&sys.scaling_filter, &sys.wavelet_filter);
    let side = 2 * half;
    let mut cols = vec![0.0; side * side];
    for (b, (r0, c0)) in [(0, 0), (0, half), (half, 0), (half, half)]
        .into_iter()
        .enumerate()
    {
        for r in 0..half {
            cols[(r0 + r) * side + c0..(r0 + r) * side + c0 + half]
                .copy_from_slice(&parts[b][r * half..(r + 1) * half]);
        }
    }
    let rows = along_axis(&cols, side, 0, |l| {
        synthesis_step(&l[..half], &l[half..], h, g)
    });
    along_axis(&rows, side, 1, |l| {
        synthesis_step(&l[..half], &l[half..], h, g)
    })
}

/// Detail coefficients of one level: one channel in 1D, three in 2D.
#[derive(Clone, Debug, PartialEq)]
pub struct DetailLevel {
    pub j: i32,
    pub channels: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoefficients {
    pub domain: Domain,
    pub order: usize,
    pub j0: i32,
    pub jmax: i32,
    /// `⟨f, φ_{J,k}⟩`, row-major over `kk`.
    pub scaling: Vec<f64>,
    /// Levels `J..=Jmax` in increasing order.
    pub details: Vec<DetailLevel>,
}

impl WaveletCoefficients {
    /// Number of positions per axis at level `j`.
    pub fn axis_len(&self, j: i32) -> usize {
        level_axis_len(&self.domain, j)
    }

    /// Dyadic index `k` of position `kk` at level `j` along one axis.
    pub fn dyadic_index(&self, j: i32, kk: usize) -> i64 {
        dyadic_offset(&self.domain, j) + kk as i64
    }

    pub fn energy(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.scaling)
            + self
                .details
                .iter()
                .flat_map(|l| &l.channels)
                .map(|c| sq(c))
                .sum::<f64>()
    }
}

fn level_axis_len(d: &Domain, j: i32) -> usize {
    d.axis_len() >> (d.level() as i32 - j)
}

fn dyadic_offset(d: &Domain, j: i32) -> i64 {
    (-d.half_width() * 2f64.powi(j)).round() as i64
}

fn check_levels(d: &Domain, j0: i32, jmax: i32) -> Result<()> {
    let m = d.level() as i32;
    let coarsest = -(d.half_width().log2().round() as i32);
    if j0 < coarsest || j0 > jmax + 1 || jmax >= m {
        return Err(Error::LevelOverflow(format!(
            "need {coarsest} ≤ J ≤ Jmax + 1 and Jmax < m = {m}, got J = {j0}, Jmax = {jmax}"
        )));
    }
    Ok(())
}

/// Coefficients `⟨f, φ_{J,k}⟩` and `⟨f, ψ^l_{j,k}⟩` for `J ≤ j ≤ Jmax`.
pub fn analyze(
    f: &GridFunction,
    sys: &WaveletSystem,
    j0: i32,
    jmax: i32,
) -> Result<WaveletCoefficients> {
    let d = *f.domain();
    check_levels(&d, j0, jmax)?;
    let m = d.level() as i32;
    let amp = d.h().powf(0.5 * d.dim() as f64);
    let mut c: Vec<f64> = f.samples().iter().map(|v| v * amp).collect();
    let mut details = Vec::new();
    for j in (j0..m).rev() {
        let side = level_axis_len(&d, j + 1);
        let channels = if d.dim() == 1 {
            let (lo, hi) = analysis_step(&c, &sys.scaling_filter, &sys.wavelet_filter);
            c = lo;
            vec![hi]
        } else {
            let [ll, lh, hl, hh] = split2(&c, side, sys);
            c = ll;
            vec![lh, hl, hh]
        };
        if j <= jmax {
            details.push(DetailLevel { j, channels });
        }
    }
    details.reverse();
    Ok(WaveletCoefficients {
        domain: d,
        order: sys.order,
        j0,
        jmax,
        scaling: c,
        details,
    })
}

/// Inverse transform; levels above `Jmax` count as zero.
pub fn synthesize(coeffs: &WaveletCoefficients, sys: &WaveletSystem) -> Result<GridFunction> {
    let d = coeffs.domain;
    check_levels(&d, coeffs.j0, coeffs.jmax)?;
    if coeffs.order != sys.order {
        return Err(Error::InvalidParameter(
            "coefficients come from another filter order".into(),
        ));
    }
    let m = d.level() as i32;
    let mut c = coeffs.scaling.clone();
    for j in coeffs.j0..m {
        let half = level_axis_len(&d, j);
        let zeros = vec![0.0; c.len()];
        let level = coeffs.details.iter().find(|l| l.j == j);
        c = if d.dim() == 1 {
            let hi = level.map_or(&zeros, |l| &l.channels[0]);
            synthesis_step(&c, hi, &sys.scaling_filter, &sys.wavelet_filter)
        } else {
            let ch = |i: usize| level.map_or(zeros.as_slice(), |l| l.channels[i].as_slice());
            merge2([&c, ch(0), ch(1), ch(2)], half, sys)
        };
    }
    let amp = d.h().powf(-0.5 * d.dim() as f64);
    GridFunction::new(d, c.into_iter().map(|v| v * amp).collect())
}

/// Level-`j` position of every lattice point.
fn positions(d: &Domain, j: i32) -> Vec<usize> {
    let shift = d.level() as i32 - j;
    let side = level_axis_len(d, j);
    (0..d.len())
        .map(|flat| {
            let ix = d.unflatten(flat);
            if d.dim() == 1 {
                ix[0] >> shift
            } else {
                (ix[0] >> shift) * side + (ix[1] >> shift)
            }
        })
        .collect()
}

/// `V f = (Σ_k |⟨f, φ_{J,k}⟩ χ_{J,k}|²)^{1/2}` with `χ_{j,k} = 2^{jn/2} χ_{Q_{j,k}}`.
pub fn v_function(f: &GridFunction, sys: &WaveletSystem, j0: i32) -> Result<GridFunction> {
    let coeffs = analyze(f, sys, j0, j0 - 1)?;
    Ok(v_from(&coeffs))
}

pub fn v_from(coeffs: &WaveletCoefficients) -> GridFunction {
    let d = coeffs.domain;
    let amp = 2f64.powf(0.5 * coeffs.j0 as f64 * d.dim() as f64);
    let vals = positions(&d, coeffs.j0)
        .into_iter()
        .map(|k| coeffs.scaling[k].abs() * amp)
        .collect();
    GridFunction::from_raw(d, vals)
}

/// `W f = (Σ_l Σ_{J ≤ j ≤ Jmax} Σ_k |⟨f, ψ^l_{j,k}⟩ χ_{j,k}|²)^{1/2}`.
pub fn w_function(
    f: &GridFunction,
    sys: &WaveletSystem,
    j0: i32,
    jmax: i32,
) -> Result<GridFunction> {
    Ok(w_from(&analyze(f, sys, j0, jmax)?))
}

pub fn w_from(coeffs: &WaveletCoefficients) -> GridFunction {
    let d = coeffs.domain;
    let mut acc = vec![0.0; d.len()];
    for level in &coeffs.details {
        let scale = 2f64.powi(level.j * d.dim() as i32);
        let pos = positions(&d, level.j);
        for ch in &level.channels {
            for (a, &k) in acc.iter_mut().zip(&pos) {
                *a += ch[k] * ch[k] * scale;
            }
        }
    }
    GridFunction::from_raw(d, acc.into_iter().map(f64::sqrt).collect())
}

/// `max(−1, ⌊n (q_w / min(1, p₋) − 1)⌋)`.
pub fn required_moments(dim: usize, q_w: f64, p_minus: f64) -> i32 {
    let v = dim as f64 * (q_w / p_minus.min(1.0) - 1.0);
    // guard against q_w landing a hair above an integer ratio
    (v + 1e-9).floor().max(-1.0) as i32
}

/// `‖V f‖_{L^{p(·)}(w)} + ‖W f‖_{L^{p(·)}(w)}` with a known `q_w`.
pub fn wavelet_norm_with(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    sys: &WaveletSystem,
    j0: i32,
    jmax: i32,
    q_w: f64,
) -> Result<f64> {
    let required = required_moments(f.domain().dim(), q_w, p.p_minus());
    if sys.moment_order() < required {
        return Err(Error::MomentBound {
            required,
            available: sys.moment_order(),
        });
    }
    let coeffs = analyze(f, sys, j0, jmax)?;
    Ok(luxemburg_norm(&v_from(&coeffs), p, w)? + luxemburg_norm(&w_from(&coeffs), p, w)?)
}

/// As [`wavelet_norm_with`], estimating `q_w` from the weight.
pub fn wavelet_norm(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    sys: &WaveletSystem,
    j0: i32,
    jmax: i32,
) -> Result<f64> {
    wavelet_norm_with(f, p, w, sys, j0, jmax, q_w_estimate(w)?)
}

/// Axis-aligned box `∏ [lo_a, hi_a]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        (0..self.dim).all(|a| other.lo[a] >= self.lo[a] && other.hi[a] <= self.hi[a])
    }
}

/// `Q_{j,k} = ∏ [2^{-j} k_a, 2^{-j}(k_a + 1)]`.
pub fn dyadic_cube(j: i32, k: [i64; 2], dim: usize) -> Region {
    let s = 2f64.powi(-j);
    Region {
        dim,
        lo: [s * k[0] as f64, s * k[1] as f64],
        hi: [s * (k[0] + 1) as f64, s * (k[1] + 1) as f64],
    }
}

/// `Q*_{j,k} = ∏ [2^{-j} k_a, 2^{-j}(k_a + 2N − 1)]`, the support of `ψ^l_{j,k}`.
pub fn expanded_cube(j: i32, k: [i64; 2], dim: usize, sys: &WaveletSystem) -> Region {
    let s = 2f64.powi(-j);
    let w = (2 * sys.order - 1) as i64;
    Region {
        dim,
        lo: [s * k[0] as f64, s * k[1] as f64],
        hi: [s * (k[0] + w) as f64, s * (k[1] + w) as f64],
    }
}

// ---------------------------------------------------------------------------
// Export

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Block {
    /// `0` for scaling coefficients, `1..2^n − 1` for wavelet channels.
    l: usize,
    j: i32,
    /// Dyadic index of the first entry along each axis.
    k: [i64; 2],
    shape: [usize; 2],
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CoefficientFile {
    domain: Domain,
    order: usize,
    j0: i32,
    jmax: i32,
    blocks: Vec<Block>,
}

/// Writes a JSON index of `{l, j, k, shape, offset}` blocks and a sidecar of
/// little-endian `f64` values, row-major within each block.
pub fn write_coefficients(coeffs: &WaveletCoefficients, json: &Path, sidecar: &Path) -> Result<()> {
    let d = coeffs.domain;
    let mut bytes = Vec::new();
    let mut blocks = Vec::new();
    let mut push = |l: usize, j: i32, values: &[f64], bytes: &mut Vec<u8>| {
        let side = level_axis_len(&d, j);
        let k0 = dyadic_offset(&d, j);
        let shape = if d.dim() == 1 {
            [side, 1]
        } else {
            [side, side]
        };
        let k = if d.dim() == 1 { [k0, 0] } else { [k0, k0] };
        blocks.push(Block {
            l,
            j,
            k,
            shape,
            offset: bytes.len() / 8,
        });
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    };
    push(0, coeffs.j0, &coeffs.scaling, &mut bytes);
    for level in &coeffs.details {
        for (c, ch) in level.channels.iter().enumerate() {
            push(c + 1, level.j, ch, &mut bytes);
        }
    }
    let file = CoefficientFile {
        domain: d,
        order: coeffs.order,
        j0: coeffs.j0,
        jmax: coeffs.jmax,
        blocks,
    };
    fs::write(json, serde_json::to_string_pretty(&file)?)?;
    fs::write(sidecar, bytes)?;
    Ok(())
}

pub fn read_coefficients(json: &Path, sidecar: &Path) -> Result<WaveletCoefficients> {
    let file: CoefficientFile = serde_json::from_str(&fs::read_to_string(json)?)?;
    let raw = fs::read(sidecar)?;
    let data: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let slice = |b: &Block| -> Result<Vec<f64>> {
        let n = b.shape[0] * b.shape[1];
        data.get(b.offset..b.offset + n)
            .map(|s| s.to_vec())
            .ok_or_else(|| Error::InvalidParameter("sidecar shorter than the index".into()))
    };
    let mut scaling = Vec::new();
    let mut details: Vec<DetailLevel> = Vec::new();
    for b in &file.blocks {
        let v = slice(b)?;
        if b.l == 0 {
            scaling = v;
        } else {
            match details.iter_mut().find(|l| l.j == b.j) {
                Some(level) => level.channels.push(v),
                None => details.push(DetailLevel {
                    j: b.j,
                    channels: vec![v],
                }),
            }
        }
    }
    Ok(WaveletCoefficients {
        domain: file.domain,
        order: file.order,
        j0: file.j0,
        jmax: file.jmax,
        scaling,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{family, FamilyKind, TestSignal};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(d: Domain, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::new(d, (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn db2_matches_the_closed_form() {
        let s3 = 3f64.sqrt();
        let den = 4.0 * 2f64.sqrt();
        let want = [
            (1.0 + s3) / den,
            (3.0 + s3) / den,
            (3.0 - s3) / den,
            (1.0 - s3) / den,
        ];
        let sys = build_wavelet_system(2).unwrap();
        assert_eq!(sys.scaling_filter.len(), 4);
        for (a, b) in sys.scaling_filter.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{:?}", sys.scaling_filter);
        }
    }

    #[test]
    fn filter_bank_identities() {
        for n in 2..=10 {
            let sys = build_wavelet_system(n).unwrap();
            let (h, g) = (&sys.scaling_filter, &sys.wavelet_filter);
            assert_eq!(h.len(), 2 * n);
            assert!(
                (h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12,
                "N = {n}"
            );
            for shift in 0..n {
                let hh: f64 = (0..2 * n - 2 * shift)
                    .map(|k| h[k] * h[k + 2 * shift])
                    .sum();
                let gg: f64 = (0..2 * n - 2 * shift)
                    .map(|k| g[k] * g[k + 2 * shift])
                    .sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!(
                    (hh - want).abs() < 1e-10 && (gg - want).abs() < 1e-10,
                    "N = {n}, shift {shift}"
                );
            }
            for shift in -(n as i64)..=(n as i64) {
                let hg: f64 = (0..2 * n as i64)
                    .filter(|k| (0..2 * n as i64).contains(&(k + 2 * shift)))
                    .map(|k| h[k as usize] * g[(k + 2 * shift) as usize])
                    .sum();
                assert!(hg.abs() < 1e-10);
            }
            for beta in 0..n as i32 {
                let scale: f64 = (0..2 * n).map(|k| (k as f64).powi(beta) * g[k].abs()).sum();
                let m: f64 = (0..2 * n).map(|k| (k as f64).powi(beta) * g[k]).sum();
                assert!(m.abs() < 1e-9 * scale, "N = {n}, β = {beta}: {m}");
            }
        }
        assert!(matches!(
            build_wavelet_system(1),
            Err(Error::UnsupportedOrder(1))
        ));
        assert!(matches!(
            build_wavelet_system(11),
            Err(Error::UnsupportedOrder(11))
        ));
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        for (dim, m) in [(1usize, 8u32), (2, 5)] {
            let d = Domain::new(dim, 4.0, m).unwrap();
            for n in [2, 3, 6] {
                let sys = build_wavelet_system(n).unwrap();
                let f = random(d, n as u64);
                for j0 in [-2, 0, 3] {
                    let c = analyze(&f, &sys, j0, m as i32 - 1).unwrap();
                    let back = synthesize(&c, &sys).unwrap();
                    assert!(
                        back.sub(&f).unwrap().max_abs() < 1e-10,
                        "dim {dim} N {n} J {j0}"
                    );
                    let l2 = f.l2_norm().powi(2);
                    assert!((c.energy() - l2).abs() < 1e-8 * l2);
                }
            }
        }
    }

    #[test]
    fn scaling_function_coefficients_are_an_indicator() {
        let d = Domain::new(1, 4.0, 8).unwrap();
        let sys = build_wavelet_system(3).unwrap();
        let mut c = analyze(&GridFunction::zeros(d), &sys, 1, 7).unwrap();
        c.scaling[5] = 1.0;
        let phi = synthesize(&c, &sys).unwrap();
        let again = analyze(&phi, &sys, 1, 7).unwrap();
        for (k, v) in again.scaling.iter().enumerate() {
            assert!((v - if k == 5 { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
        assert!(again
            .details
            .iter()
            .flat_map(|l| &l.channels[0])
            .all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn square_function_partition() {
        for (dim, m) in [(1usize, 9u32), (2, 6)] {
            let d = Domain::new(dim, 4.0, m).unwrap();
            let sys = build_wavelet_system(4).unwrap();
            let f = TestSignal::Bump {
                center: [0.2, -0.1],
                width: 0.9,
                amp: 1.0,
            }
            .realize(d)
            .unwrap();
            let c = analyze(&f, &sys, 0, m as i32 - 1).unwrap();
            let v = v_from(&c);
            let w = w_from(&c);
            let l2 = |g: &GridFunction| g.l2_norm().powi(2);
            let scal: f64 = c.scaling.iter().map(|x| x * x).sum();
            assert!((l2(&v) - scal).abs() < 1e-8 * l2(&f));
            assert!(
                (l2(&v) + l2(&w) - l2(&f)).abs() < 1e-7 * l2(&f),
                "dim {dim}"
            );
        }
    }

    #[test]
    fn single_scaling_coefficient_gives_one_cube() {
        let d = Domain::new(1, 4.0, 7).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        let mut c = analyze(&GridFunction::zeros(d), &sys, 1, 0).unwrap();
        c.scaling[3] = -0.5;
        let v = v_from(&c);
        let k = c.dyadic_index(1, 3);
        let q = dyadic_cube(1, [k, 0], 1);
        for i in 0..d.len() {
            let x = d.point(i)[0];
            let want = if x >= q.lo[0] && x < q.hi[0] {
                0.5 * 2f64.sqrt()
            } else {
                0.0
            };
            assert!((v.samples()[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn details_vanish_on_low_degree_plateaus() {
        let d = Domain::new(1, 8.0, 9).unwrap();
        let sys = build_wavelet_system(3).unwrap();
        let f = TestSignal::Plateau {
            center: [0.0, 0.0],
            width: 4.0,
            coeffs: [1.0, 0.4, -0.2],
        }
        .realize(d)
        .unwrap();
        let w = w_function(&f, &sys, 0, 8).unwrap();
        // every Q*_{j,k} ∋ x with j ≥ 0 lies in [x − 1, x + 5] ⊂ [−4, 4] for x ∈ [−3, −1]
        let inner = (0..d.len())
            .filter(|&i| (-3.0..-1.0).contains(&d.point(i)[0]))
            .map(|i| w.samples()[i]);
        let worst = inner.fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
        assert!(w.max_abs() > 1e-3);
    }

    #[test]
    fn w_is_monotone_in_jmax() {
        let d = Domain::new(1, 4.0, 8).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        let f = random(d, 3);
        let mut prev = GridFunction::zeros(d);
        for jmax in 0..8 {
            let w = w_function(&f, &sys, 0, jmax).unwrap();
            assert!(w
                .samples()
                .iter()
                .zip(prev.samples())
                .all(|(a, b)| a + 1e-14 >= *b));
            prev = w;
        }
    }

    #[test]
    fn shift_covariance() {
        let d = Domain::new(1, 4.0, 8).unwrap();
        let sys = build_wavelet_system(3).unwrap();
        let f = TestSignal::Bump {
            center: [-0.3, 0.0],
            width: 0.8,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let j0 = 1;
        let s = 3usize;
        let step = s << (8 - j0);
        let n = d.axis_len();
        let rolled: Vec<f64> = (0..n).map(|i| f.samples()[(i + n - step) % n]).collect();
        let g = GridFunction::new(d, rolled).unwrap();
        let (a, b) = (
            analyze(&f, &sys, j0, 7).unwrap(),
            analyze(&g, &sys, j0, 7).unwrap(),
        );
        let len = a.scaling.len();
        for k in 0..len {
            assert_eq!(b.scaling[(k + s) % len], a.scaling[k]);
        }
        for (la, lb) in a.details.iter().zip(&b.details) {
            let len = la.channels[0].len();
            let sh = s << (la.j - j0);
            for k in 0..len {
                assert_eq!(lb.channels[0][(k + sh) % len], la.channels[0][k]);
            }
        }
    }

    #[test]
    fn coefficients_live_on_expanded_cubes() {
        let d = Domain::new(1, 8.0, 9).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        assert_eq!(
            expanded_cube(0, [0, 0], 1, &sys),
            Region {
                dim: 1,
                lo: [0.0, 0.0],
                hi: [3.0, 3.0]
            }
        );
        // one-sided bump on [0.5, 1.5]
        let f = TestSignal::Bump {
            center: [1.0, 0.0],
            width: 0.5,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let (a, b) = (0.5, 1.5);
        let c = analyze(&f, &sys, -2, 8).unwrap();
        for level in &c.details {
            for (kk, v) in level.channels[0].iter().enumerate() {
                let k = c.dyadic_index(level.j, kk);
                let q = expanded_cube(level.j, [k, 0], 1, &sys);
                assert!(dyadic_cube(level.j, [k, 0], 1).lo[0] >= q.lo[0]);
                assert!(q.contains_region(&dyadic_cube(level.j, [k, 0], 1)));
                let meets = q.hi[0] >= a && q.lo[0] <= b;
                if !meets {
                    assert_eq!(*v, 0.0, "j {} k {k}", level.j);
                }
            }
        }
    }

    #[test]
    fn level_bounds() {
        let d = Domain::new(1, 8.0, 6).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        let f = GridFunction::zeros(d);
        assert!(matches!(
            analyze(&f, &sys, 0, 6),
            Err(Error::LevelOverflow(_))
        ));
        assert!(matches!(
            analyze(&f, &sys, -4, 5),
            Err(Error::LevelOverflow(_))
        ));
        assert!(analyze(&f, &sys, -3, 5).is_ok());
    }

    #[test]
    fn moment_bound_is_enforced() {
        let d = Domain::new(1, 8.0, 7).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        let f = TestSignal::Bump {
            center: [0.0, 0.0],
            width: 0.5,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let p = VariableExponent::constant(d, 0.5).unwrap();
        let w = Weight::unit(d);
        // n (q_w / p₋ − 1) = 1 with q_w = 1, p₋ = 1/2
        assert_eq!(required_moments(1, 1.0, 0.5), 1);
        assert!(wavelet_norm_with(&f, &p, &w, &sys, 0, 6, 1.0).is_ok());
        match wavelet_norm_with(&f, &p, &w, &sys, 0, 6, 1.6) {
            Err(Error::MomentBound {
                required,
                available,
            }) => assert_eq!((required, available), (2, 1)),
            other => panic!("{other:?}"),
        }
        assert_eq!(required_moments(1, 1.0, 2.0), 0);
    }

    #[test]
    fn classical_band_over_bumps() {
        let d = Domain::new(1, 8.0, 9).unwrap();
        let sys = build_wavelet_system(4).unwrap();
        let p = VariableExponent::constant(d, 2.0).unwrap();
        let w = Weight::unit(d);
        let ratios: Vec<f64> = family(FamilyKind::Bump, 20, 2, 1)
            .iter()
            .map(|s| {
                let f = s.realize(d).unwrap();
                wavelet_norm_with(&f, &p, &w, &sys, 0, 8, 1.0).unwrap() / f.l2_norm()
            })
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        // ‖V‖ + ‖W‖ lies between ‖f‖ and √2 ‖f‖
        assert!(lo >= 1.0 - 1e-9 && hi <= 2f64.sqrt() + 1e-9, "[{lo}, {hi}]");
    }

    #[test]
    fn export_round_trip() {
        let d = Domain::new(2, 2.0, 4).unwrap();
        let sys = build_wavelet_system(2).unwrap();
        let c = analyze(&random(d, 1), &sys, -1, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (j, s) = (dir.path().join("w.json"), dir.path().join("w.bin"));
        write_coefficients(&c, &j, &s).unwrap();
        assert_eq!(read_coefficients(&j, &s).unwrap(), c);
        let text = std::fs::read_to_string(&j).unwrap();
        assert!(text.contains("\"offset\"") && text.contains("\"l\""));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linearity(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let d = Domain::new(1, 4.0, 7).unwrap();
            let sys = build_wavelet_system(3).unwrap();
            let (f, g) = (random(d, seed), random(d, seed + 1000));
            let comb = f.scale(a).add(&g.scale(b)).unwrap();
            let (cf, cg, cc) = (
                analyze(&f, &sys, 0, 6).unwrap(),
                analyze(&g, &sys, 0, 6).unwrap(),
                analyze(&comb, &sys, 0, 6).unwrap(),
            );
            for ((x, y), z) in cf.scaling.iter().zip(&cg.scaling).zip(&cc.scaling) {
                prop_assert!((a * x + b * y - z).abs() < 1e-10);
            }
        }
    }
}
