//! Maximal operators and exponential-type convolution kernels.
//!
//! Sups over cubes run over the shifted dyadic grids. Hardy–Littlewood type
//! operators extend `f` by zero outside the window (average = integral / |Q|);
//! the reference-grid operators `E_k` and `M^𝔇` average over `Q ∩ window`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{
    all_shifts, convolve, level_for_side, norm, reference_shift, Domain, GridFunction, LevelBlocks,
    Shift,
};
use crate::norms::luxemburg_norm;
use crate::report::Report;
use crate::weight::Weight;

#[derive(Clone, Copy, PartialEq)]
enum Average {
    /// `∫_Q |f| / |Q|`, zero extension.
    Volume,
    /// Mean over the lattice points of `Q ∩ window`.
    Count,
}

fn dyadic_sup(
    f: &GridFunction,
    levels: (i32, i32),
    shifts: &[Shift],
    avg: Average,
) -> GridFunction {
    let d = *f.domain();
    let abs: Vec<f64> = f.samples().iter().map(|v| v.abs()).collect();
    let mut out = vec![0.0; d.len()];
    for k in (levels.0..=levels.1).rev() {
        for &a in shifts {
            let blocks = LevelBlocks::new(&d, k, a);
            let sums = blocks.sums(&abs);
            let vals: Vec<f64> = match avg {
                Average::Volume => {
                    let scale = d.cell_volume() / blocks.cube(0).volume();
                    sums.iter().map(|s| s * scale).collect()
                }
                Average::Count => sums
                    .iter()
                    .enumerate()
                    .map(|(b, s)| s / blocks.count(b) as f64)
                    .collect(),
            };
            blocks.max_into(&vals, &mut out);
        }
    }
    GridFunction::from_raw(d, out)
}

/// Level of the smallest power-of-two side that is at least `12T`; cubes this
/// large contain the window, so larger ones only lower the averages.
fn coarsest_level(d: &Domain) -> i32 {
    -((12.0 * d.half_width()).log2().ceil() as i32)
}

/// `M f`: sup over all shifted dyadic cubes containing the point.
pub fn hl_maximal(f: &GridFunction) -> GridFunction {
    let d = f.domain();
    dyadic_sup(
        f,
        (coarsest_level(d), d.level() as i32),
        &all_shifts(d.dim()),
        Average::Volume,
    )
}

/// `M^{loc,R} f`: cubes with side at most `R`.
pub fn local_maximal(f: &GridFunction, r: f64) -> Result<GridFunction> {
    let d = f.domain();
    if r < d.h() {
        return Err(Error::ScaleBelowResolution { t: r, h: d.h() });
    }
    Ok(dyadic_sup(
        f,
        (level_for_side(r), d.level() as i32),
        &all_shifts(d.dim()),
        Average::Volume,
    ))
}

/// `M^{𝒟_a} f`: one shifted grid, all sizes.
pub fn grid_maximal(f: &GridFunction, a: Shift) -> Result<GridFunction> {
    let d = f.domain();
    if a[..d.dim()].iter().any(|&s| s > 2) {
        return Err(Error::InvalidParameter(format!("shift {a:?}")));
    }
    Ok(dyadic_sup(
        f,
        (coarsest_level(d), d.level() as i32),
        &[a],
        Average::Volume,
    ))
}

/// `out[x] = max src[j]` over `j ∈ [x - lo_off, x] ∩ [0, src.len())`, for `x < n_out`.
fn trailing_max(src: &[f64], n_out: usize, lo_off: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_out];
    let mut q: VecDeque<usize> = VecDeque::new();
    for (x, o) in out.iter_mut().enumerate() {
        if x < src.len() {
            while q.back().is_some_and(|&b| src[b] <= src[x]) {
                q.pop_back();
            }
            q.push_back(x);
        }
        while q.front().is_some_and(|&f| f + lo_off < x) {
            q.pop_front();
        }
        *o = src[*q.front().expect("window never empty")];
    }
    out
}

/// Exact sup of `∫_Q |f| / |Q|` over lattice-aligned cubes of `s ≤ max_points`
/// cells lying inside the window.
///
/// Cubes sticking out of the window never help under zero extension (shifting
/// them inward keeps the point and can only gain mass), so this dominates the
/// sup over arbitrary cubes whose sides are multiples of `h`.
pub fn lattice_maximal(f: &GridFunction, max_points: usize) -> GridFunction {
    let d = *f.domain();
    let n = d.axis_len();
    let smax = max_points.min(n).max(1);
    let abs: Vec<f64> = f.samples().iter().map(|v| v.abs()).collect();
    if d.dim() == 1 {
        let mut pre = vec![0.0; n + 1];
        for i in 0..n {
            pre[i + 1] = pre[i] + abs[i];
        }
        let out = max_over_sides(smax, n, |s| {
            let avg: Vec<f64> = (0..=n - s)
                .map(|i| (pre[i + s] - pre[i]) / s as f64)
                .collect();
            trailing_max(&avg, n, s - 1)
        });
        return GridFunction::from_raw(d, out);
    }
    let mut pre = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            pre[(i + 1) * (n + 1) + j + 1] =
                abs[i * n + j] + pre[i * (n + 1) + j + 1] + pre[(i + 1) * (n + 1) + j]
                    - pre[i * (n + 1) + j];
        }
    }
    let out = max_over_sides(smax, n * n, |s| {
        let m = n - s + 1;
        let area = (s * s) as f64;
        let box_avg = |i: usize, j: usize| {
            (pre[(i + s) * (n + 1) + j + s] - pre[i * (n + 1) + j + s] - pre[(i + s) * (n + 1) + j]
                + pre[i * (n + 1) + j])
                / area
        };
        // rows of starts, maxed along axis 1, then along axis 0
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| trailing_max(&(0..m).map(|j| box_avg(i, j)).collect::<Vec<_>>(), n, s - 1))
            .collect();
        let mut out = vec![0.0; n * n];
        for x1 in 0..n {
            let col: Vec<f64> = rows.iter().map(|r| r[x1]).collect();
            for (x0, v) in trailing_max(&col, n, s - 1).into_iter().enumerate() {
                out[x0 * n + x1] = v;
            }
        }
        out
    });
    GridFunction::from_raw(d, out)
}

/// Pointwise max of `per_side(s)` over `s = 1..=smax`, without keeping every layer.
fn max_over_sides(
    smax: usize,
    len: usize,
    per_side: impl Fn(usize) -> Vec<f64> + Sync,
) -> Vec<f64> {
    let merge = |mut a: Vec<f64>, b: Vec<f64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x = x.max(y);
        }
        a
    };
    (1..=smax)
        .into_par_iter()
        .fold(|| vec![0.0; len], |acc, s| merge(acc, per_side(s)))
        .reduce(|| vec![0.0; len], merge)
}

/// `sup_{Q ∋ x, ℓ(Q) ≤ 1} (w(Q)^{-1} ∫_Q |f|^u w)^{1/u}`.
pub fn powered_weighted_local_maximal(
    f: &GridFunction,
    w: &Weight,
    u: f64,
) -> Result<GridFunction> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidParameter(format!("power u = {u}")));
    }
    f.check_same(w.values())?;
    let d = *f.domain();
    let fw: Vec<f64> = (0..d.len())
        .map(|i| f.samples()[i].abs().powf(u) * w.at(i))
        .collect();
    let mut out = vec![0.0; d.len()];
    for k in (0..=d.level() as i32).rev() {
        for a in all_shifts(d.dim()) {
            let blocks = LevelBlocks::new(&d, k, a);
            let num = blocks.sums(&fw);
            let den = blocks.sums(w.values().samples());
            let vals: Vec<f64> = num
                .iter()
                .zip(&den)
                .map(|(a, b)| (a / b).powf(1.0 / u))
                .collect();
            blocks.max_into(&vals, &mut out);
        }
    }
    Ok(GridFunction::from_raw(d, out))
}

fn radial_kernel(d: Domain, k: impl Fn(f64) -> f64 + Sync) -> GridFunction {
    GridFunction::from_raw(
        d,
        (0..d.len())
            .into_par_iter()
            .map(|i| k(norm(&d.point(i), d.dim())))
            .collect(),
    )
}

/// `K_B f = ∫ e^{-B|x-y|} f(y) dy`.
pub fn k_b_operator(f: &GridFunction, b: f64) -> Result<GridFunction> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("B = {b}")));
    }
    convolve(f, &radial_kernel(*f.domain(), |r| (-b * r).exp()))
}

/// `m_{j,A,B}(x) = (1 + 2^j |x|)^A e^{B|x|}`.
pub fn peak_majorant(j: i32, a: f64, b: f64, r: f64) -> f64 {
    (1.0 + 2f64.powi(j) * r).powf(a) * (b * r).exp()
}

/// `2^{jn} ∫ f(x-y) / m_{j,A,B}(y) dy`.
pub fn peak_majorant_convolution(f: &GridFunction, j: i32, a: f64, b: f64) -> Result<GridFunction> {
    if !(a > 0.0 && b > 0.0) || j < 0 {
        return Err(Error::InvalidParameter(format!(
            "j = {j}, A = {a}, B = {b}"
        )));
    }
    let d = *f.domain();
    let amp = 2f64.powi(j * d.dim() as i32);
    convolve(f, &radial_kernel(d, |r| amp / peak_majorant(j, a, b, r)))
}

/// Pointwise constant in `2^{jn} |f| * m_{j,A,B}^{-1} ≤ C (K_B|f| + M^loc f)`.
pub fn peak_majorant_domination(f: &GridFunction, j: i32, a: f64, b: f64) -> Result<Report> {
    let fa = f.abs();
    let lhs = peak_majorant_convolution(&fa, j, a, b)?;
    let kb = k_b_operator(&fa, b)?;
    let ml = local_maximal(f, 1.0)?;
    let floor = 1e-12 * lhs.max_abs().max(1e-300);
    let c = (0..f.len())
        .filter(|&i| lhs.samples()[i] > floor)
        .map(|i| lhs.samples()[i] / (kb.samples()[i] + ml.samples()[i]))
        .fold(0.0, f64::max);
    Ok(Report::new("peak_majorant_domination")
        .with("constant", c)
        .passing(c.is_finite()))
}

fn check_level(d: &Domain, k: i32) -> Result<()> {
    let t = 2f64.powi(-k);
    if k > d.level() as i32 {
        return Err(Error::ScaleBelowResolution { t, h: d.h() });
    }
    Ok(())
}

/// `E_k f = Σ_{Q ∈ 𝔇_k} χ_Q m_Q(f)`.
pub fn averaging_e_k(f: &GridFunction, k: i32) -> Result<GridFunction> {
    let d = *f.domain();
    check_level(&d, k)?;
    let blocks = LevelBlocks::new(&d, k, reference_shift(d.dim()));
    let sums = blocks.sums(f.samples());
    let avg: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(b, s)| s / blocks.count(b) as f64)
        .collect();
    Ok(GridFunction::from_raw(d, blocks.broadcast(&avg)))
}

/// Side restriction of [`restricted_dyadic_maximal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideBound {
    Below,
    Above,
}

/// `M^𝔇_{≤r₀}` or `M^𝔇_{≥r₀}` over the reference grid.
pub fn restricted_dyadic_maximal(
    f: &GridFunction,
    r0: f64,
    mode: SideBound,
) -> Result<GridFunction> {
    let d = *f.domain();
    if !(r0 >= d.h() && r0 <= 2.0 * d.half_width()) {
        return Err(Error::InvalidParameter(format!(
            "r0 = {r0} outside [h, 2T]"
        )));
    }
    let kc = coarsest_level(&d);
    let levels = match mode {
        SideBound::Below => (level_for_side(r0), d.level() as i32),
        SideBound::Above => (kc, -(r0.log2().ceil() as i32)),
    };
    Ok(dyadic_sup(
        f,
        levels,
        &[reference_shift(d.dim())],
        Average::Count,
    ))
}

/// `M^𝔇`: the full reference-grid maximal function.
pub fn reference_dyadic_maximal(f: &GridFunction) -> GridFunction {
    let d = *f.domain();
    dyadic_sup(
        f,
        (coarsest_level(&d), d.level() as i32),
        &[reference_shift(d.dim())],
        Average::Count,
    )
}

/// Operator selector, parsed from `M`, `Mloc`, `MlocR:<R>`, `Mgrid:<digits>`,
/// `Mwpow:<u>`, `KB:<B>`, `Ek:<k>`, `Mdleq:<r0>`, `Mdgeq:<r0>`, `Id`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MaximalOperator {
    Identity,
    Hl,
    Local,
    LocalR(f64),
    Grid(Shift),
    WeightedPower(f64),
    KB(f64),
    Ek(i32),
    DyadicBelow(f64),
    DyadicAbove(f64),
}

impl MaximalOperator {
    pub fn apply(&self, f: &GridFunction, w: &Weight) -> Result<GridFunction> {
        match *self {
            MaximalOperator::Identity => Ok(f.clone()),
            MaximalOperator::Hl => Ok(hl_maximal(f)),
            MaximalOperator::Local => local_maximal(f, 1.0),
            MaximalOperator::LocalR(r) => local_maximal(f, r),
            MaximalOperator::Grid(a) => grid_maximal(f, a),
            MaximalOperator::WeightedPower(u) => powered_weighted_local_maximal(f, w, u),
            MaximalOperator::KB(b) => k_b_operator(f, b),
            MaximalOperator::Ek(k) => averaging_e_k(f, k),
            MaximalOperator::DyadicBelow(r) => restricted_dyadic_maximal(f, r, SideBound::Below),
            MaximalOperator::DyadicAbove(r) => restricted_dyadic_maximal(f, r, SideBound::Above),
        }
    }
}

impl FromStr for MaximalOperator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownPreset(s.to_string());
        let (head, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let num = |v: Option<&str>| -> Result<f64> {
            v.and_then(|v| v.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(bad)
        };
        Ok(match head {
            "Id" if arg.is_none() => MaximalOperator::Identity,
            "M" if arg.is_none() => MaximalOperator::Hl,
            "Mloc" if arg.is_none() => MaximalOperator::Local,
            "MlocR" => MaximalOperator::LocalR(num(arg)?),
            "Mgrid" => {
                let digits: Vec<u8> = arg
                    .ok_or_else(bad)?
                    .chars()
                    .map(|c| c.to_digit(3).map(|v| v as u8))
                    .collect::<Option<_>>()
                    .ok_or_else(bad)?;
                match digits.as_slice() {
                    [a] => MaximalOperator::Grid([*a, 0]),
                    [a, b] => MaximalOperator::Grid([*a, *b]),
                    _ => return Err(bad()),
                }
            }
            "Mwpow" => MaximalOperator::WeightedPower(num(arg)?),
            "KB" => MaximalOperator::KB(num(arg)?),
            "Ek" => MaximalOperator::Ek(arg.and_then(|v| v.parse().ok()).ok_or_else(bad)?),
            "Mdleq" => MaximalOperator::DyadicBelow(num(arg)?),
            "Mdgeq" => MaximalOperator::DyadicAbove(num(arg)?),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for MaximalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaximalOperator::Identity => write!(f, "Id"),
            MaximalOperator::Hl => write!(f, "M"),
            MaximalOperator::Local => write!(f, "Mloc"),
            MaximalOperator::LocalR(r) => write!(f, "MlocR:{r}"),
            MaximalOperator::Grid(a) => write!(f, "Mgrid:{}{}", a[0], a[1]),
            MaximalOperator::WeightedPower(u) => write!(f, "Mwpow:{u}"),
            MaximalOperator::KB(b) => write!(f, "KB:{b}"),
            MaximalOperator::Ek(k) => write!(f, "Ek:{k}"),
            MaximalOperator::DyadicBelow(r) => write!(f, "Mdleq:{r}"),
            MaximalOperator::DyadicAbove(r) => write!(f, "Mdgeq:{r}"),
        }
    }
}

/// Empirical operator norm `sup ‖Tf‖ / ‖f‖` in `L^{p(·)}(w)` over a family.
pub fn boundedness_probe(
    op: MaximalOperator,
    p: &VariableExponent,
    w: &Weight,
    family: &[GridFunction],
) -> Result<Report> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty family".into()));
    }
    let ratios: Vec<Option<f64>> = family
        .par_iter()
        .map(|f| -> Result<Option<f64>> {
            let nf = luxemburg_norm(f, p, w)?;
            if nf == 0.0 {
                return Ok(None);
            }
            Ok(Some(luxemburg_norm(&op.apply(f, w)?, p, w)? / nf))
        })
        .collect::<Result<_>>()?;
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let ratio = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let mut r = Report::new(format!("boundedness:{op}"))
        .with("ratio", ratio)
        .with("members", (family.len() - skipped) as f64)
        .with("skipped", skipped as f64);
    if skipped > 0 {
        r.note(format!("{skipped} zero-norm members skipped"));
    }
    Ok(r.passing(ratio.is_finite()))
}

/// `‖(Σ (M^loc f_j)^q)^{1/q}‖ / ‖(Σ |f_j|^q)^{1/q}‖` in `L^{p(·)}(w)`.
pub fn vector_valued_maximal_ratio(
    family: &[GridFunction],
    q: f64,
    p: &VariableExponent,
    w: &Weight,
) -> Result<Report> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    let first = family
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty family".into()))?;
    let d = *first.domain();
    let maxed: Vec<GridFunction> = family
        .par_iter()
        .map(|f| local_maximal(f, 1.0))
        .collect::<Result<_>>()?;
    let lq = |fs: &[GridFunction]| -> GridFunction {
        GridFunction::from_raw(
            d,
            (0..d.len())
                .map(|i| {
                    fs.iter()
                        .map(|f| f.samples()[i].abs().powf(q))
                        .sum::<f64>()
                        .powf(1.0 / q)
                })
                .collect(),
        )
    };
    let lhs = luxemburg_norm(&lq(&maxed), p, w)?;
    let rhs = luxemburg_norm(&lq(family), p, w)?;
    let ratio = crate::stability::ratio(rhs, lhs);
    Ok(Report::new("vector_valued_maximal")
        .with("lhs", lhs)
        .with("rhs", rhs)
        .with("ratio", ratio)
        .passing(ratio.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{enumerate_cubes, Cube};
    use crate::presets::{family, FamilyKind};
    use proptest::prelude::*;

    fn d1() -> Domain {
        Domain::new(1, 4.0, 5).unwrap()
    }

    fn chi01(d: Domain) -> GridFunction {
        GridFunction::from_fn(d, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap()
    }

    /// Direct oracle: explicit cube list, explicit membership, zero extension.
    fn enumerated_sup(f: &GridFunction, cubes: &[Cube], x: usize) -> f64 {
        let d = f.domain();
        cubes
            .iter()
            .filter(|q| q.lattice_points(d).contains(&x))
            .map(|q| {
                q.lattice_points(d)
                    .iter()
                    .map(|&i| f.samples()[i].abs())
                    .sum::<f64>()
                    * d.cell_volume()
                    / q.volume()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn hl_matches_enumeration() {
        let d = d1();
        let f = GridFunction::from_fn(d, |x| (3.0 * x[0]).sin() * (-x[0] * x[0]).exp()).unwrap();
        let m = hl_maximal(&f);
        let cubes = enumerate_cubes(&d, 2f64.powi(-coarsest_level(&d)), &all_shifts(1));
        for x in (0..d.len()).step_by(7) {
            assert!((m.samples()[x] - enumerated_sup(&f, &cubes, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn hl_examples() {
        let d = d1();
        let f = chi01(d);
        let m = hl_maximal(&f);
        let at2 = m.samples()[d.locate(&[2.0]).unwrap()];
        assert!((1.0 / 4.0 - 1e-12..=1.0).contains(&at2));
        let c = hl_maximal(&GridFunction::constant(d, 2.0));
        // cubes straddling the window edge see the zero extension
        let interior = d.locate(&[0.0]).unwrap();
        assert!((c.samples()[interior] - 2.0).abs() < 1e-12);
        for i in 0..d.len() {
            assert!(m.samples()[i] >= f.samples()[i] - 1e-12);
        }
    }

    #[test]
    fn local_examples() {
        let d = Domain::new(1, 8.0, 5).unwrap();
        let f = chi01(d);
        let m = hl_maximal(&f);
        let l1 = local_maximal(&f, 1.0).unwrap();
        let l2 = local_maximal(&f, 2.0).unwrap();
        assert_eq!(l1.samples()[d.locate(&[5.0]).unwrap()], 0.0);
        for i in 0..d.len() {
            assert!(l1.samples()[i] <= m.samples()[i] + 1e-12);
            assert!(l1.samples()[i] <= l2.samples()[i] + 1e-12);
        }
        assert!(local_maximal(&f, d.h() / 2.0).is_err());
    }

    #[test]
    fn grid_maximal_delta_profile() {
        let d = d1();
        let f = GridFunction::delta(d);
        let m = grid_maximal(&f, [0, 0]).unwrap();
        // in 𝒟_0 the origin is a left endpoint; x = ih lies with 0 in [0, 2^⌈log2(i+1)⌉ h)
        for i in 0..4usize {
            let side = ((i + 1).next_power_of_two()) as f64 * d.h();
            assert!((m.samples()[d.origin() + i] - 1.0 / side).abs() < 1e-9);
        }
    }

    #[test]
    fn covering_bound_1d_and_2d() {
        for d in [
            Domain::new(1, 2.0, 5).unwrap(),
            Domain::new(2, 1.0, 4).unwrap(),
        ] {
            let f = GridFunction::from_fn(d, |x| (x[0] * 5.0).cos() + x[d.dim() - 1]).unwrap();
            let lhs = lattice_maximal(&f, d.axis_len());
            let mut rhs = vec![0.0; d.len()];
            for a in all_shifts(d.dim()) {
                let g = grid_maximal(&f, a).unwrap();
                for (r, v) in rhs.iter_mut().zip(g.samples()) {
                    *r += v;
                }
            }
            let c = 6f64.powi(d.dim() as i32);
            for i in 0..d.len() {
                assert!(lhs.samples()[i] <= c * rhs[i] * (1.0 + 1e-12));
                assert!(hl_maximal(&f).samples()[i] <= c * rhs[i] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn lattice_maximal_matches_brute_force() {
        let d = Domain::new(2, 1.0, 3).unwrap();
        let f = GridFunction::from_fn(d, |x| x[0] * x[0] - x[1]).unwrap();
        let got = lattice_maximal(&f, 5);
        let n = d.axis_len();
        for x in 0..d.len() {
            let [x0, x1] = d.unflatten(x);
            let mut best = 0.0f64;
            for s in 1..=5 {
                for i in x0.saturating_sub(s - 1)..=x0.min(n - s) {
                    for j in x1.saturating_sub(s - 1)..=x1.min(n - s) {
                        let mut t = 0.0;
                        for a in i..i + s {
                            for b in j..j + s {
                                t += f.samples()[a * n + b].abs();
                            }
                        }
                        best = best.max(t / (s * s) as f64);
                    }
                }
            }
            assert!((got.samples()[x] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn powered_examples() {
        let d = d1();
        let w = crate::presets::WeightPreset::Power(1.0).build(d).unwrap();
        let c = powered_weighted_local_maximal(&GridFunction::constant(d, 3.0), &w, 2.5).unwrap();
        assert!(c.samples().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let f = GridFunction::from_fn(d, |x| (2.0 * x[0]).sin()).unwrap();
        let one = Weight::unit(d);
        let a = powered_weighted_local_maximal(&f, &one, 1.0).unwrap();
        let b = local_maximal(&f, 1.0).unwrap();
        // same cubes; Q ∩ window averaging agrees with |Q| on interior cubes
        let interior = d.locate(&[0.0]).unwrap();
        assert!((a.samples()[interior] - b.samples()[interior]).abs() < 1e-12);
        // two-valued f with large u approaches the reachable max
        let g = GridFunction::from_fn(d, |x| if x[0] < 0.0 { 1.0 } else { 3.0 }).unwrap();
        let hi = powered_weighted_local_maximal(&g, &w, 16.0).unwrap();
        let x = d.locate(&[-0.5]).unwrap();
        assert!(hi.samples()[x] > 2.7 && hi.samples()[x] <= 3.0 + 1e-12);
        assert!(powered_weighted_local_maximal(&g, &w, 0.0).is_err());
    }

    #[test]
    fn k_b_examples() {
        let d = Domain::new(1, 8.0, 6).unwrap();
        let k = k_b_operator(&GridFunction::delta(d), 2.0).unwrap();
        for i in (0..d.len()).step_by(13) {
            let x = d.coord(i);
            assert!((k.samples()[i] - (-2.0 * x.abs()).exp()).abs() < 1e-12);
        }
        let one = k_b_operator(&GridFunction::constant(d, 1.0), 16.0).unwrap();
        let c = one.samples()[d.origin()];
        assert!((c - 2.0 / 16.0).abs() < 2.0 * d.h());
    }

    #[test]
    fn peak_majorant_examples() {
        assert_eq!(peak_majorant(0, 2.0, 16.0, 0.0), 1.0);
        let d = d1();
        assert!(
            peak_majorant_convolution(&GridFunction::zeros(d), 2, 2.0, 16.0)
                .unwrap()
                .is_zero()
        );
        for (s, sig) in family(FamilyKind::Bump, 5, 3, 1).iter().enumerate() {
            let f = sig.realize(d).unwrap();
            let r = peak_majorant_domination(&f, s as i32, 2.0, 16.0).unwrap();
            assert!(r.value("constant") < 20.0, "{r:?}");
        }
    }

    #[test]
    fn e_k_examples() {
        let d = d1();
        let f = GridFunction::from_fn(d, |x| x[0].powi(3) - x[0]).unwrap();
        let e = averaging_e_k(&f, 1).unwrap();
        assert_eq!(averaging_e_k(&e, 1).unwrap().samples(), e.samples());
        let c = averaging_e_k(&GridFunction::constant(d, 4.0), 2).unwrap();
        assert!(c.samples().iter().all(|&v| (v - 4.0).abs() < 1e-12));
        let below = restricted_dyadic_maximal(&f, 1.0, SideBound::Below).unwrap();
        for k in 0..=3 {
            let e = averaging_e_k(&f, k).unwrap();
            for i in 0..d.len() {
                assert!(e.samples()[i].abs() <= below.samples()[i] + 1e-12);
            }
        }
        assert!(averaging_e_k(&f, d.level() as i32 + 1).is_err());
    }

    #[test]
    fn restricted_examples() {
        let d = Domain::new(1, 8.0, 4).unwrap();
        let f = GridFunction::from_fn(d, |x| (x[0] * 0.7).sin()).unwrap();
        let full = reference_dyadic_maximal(&f);
        let below = restricted_dyadic_maximal(&f, 16.0, SideBound::Below).unwrap();
        let above = restricted_dyadic_maximal(&f, d.h(), SideBound::Above).unwrap();
        for i in 0..d.len() {
            assert!((below.samples()[i].max(above.samples()[i]) - full.samples()[i]).abs() < 1e-12);
        }
        let chi = chi01(d);
        let a4 = restricted_dyadic_maximal(&chi, 4.0, SideBound::Above).unwrap();
        for i in 0..d.len() {
            let x = d.coord(i);
            if !(-4.0..5.0).contains(&x) {
                assert!(a4.samples()[i] <= 0.25 + 1e-12);
            }
        }
        let b1 = restricted_dyadic_maximal(&f, 1.0, SideBound::Below).unwrap();
        let b2 = restricted_dyadic_maximal(&f, 2.0, SideBound::Below).unwrap();
        assert!((0..d.len()).all(|i| b1.samples()[i] <= b2.samples()[i]));
    }

    #[test]
    fn operator_parsing() {
        for s in [
            "M", "Mloc", "MlocR:2", "Mgrid:1", "Mgrid:21", "Mwpow:2", "KB:16", "Ek:3", "Mdleq:1",
            "Mdgeq:4", "Id",
        ] {
            let op: MaximalOperator = s.parse().unwrap();
            assert_eq!(op.to_string().parse::<MaximalOperator>().unwrap(), op);
        }
        assert!("Mgrid:3".parse::<MaximalOperator>().is_err());
        assert!("Mx".parse::<MaximalOperator>().is_err());
    }

    #[test]
    fn probes() {
        let d = Domain::new(1, 4.0, 6).unwrap();
        let p = VariableExponent::constant(d, 2.0).unwrap();
        let w = Weight::unit(d);
        let fam: Vec<GridFunction> = family(FamilyKind::Bump, 6, 1, 1)
            .iter()
            .map(|s| s.realize(d).unwrap())
            .collect();
        let id = boundedness_probe(MaximalOperator::Identity, &p, &w, &fam).unwrap();
        assert!((id.value("ratio") - 1.0).abs() < 1e-12);
        let single = vector_valued_maximal_ratio(&fam[..1], 2.0, &p, &w).unwrap();
        let scalar = boundedness_probe(MaximalOperator::Local, &p, &w, &fam[..1]).unwrap();
        assert!((single.value("ratio") - scalar.value("ratio")).abs() < 1e-9);
        let mut with_zero = fam.clone();
        with_zero.push(GridFunction::zeros(d));
        assert_eq!(
            boundedness_probe(MaximalOperator::Local, &p, &w, &with_zero)
                .unwrap()
                .value("skipped"),
            1.0
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sublinear_and_homogeneous(a in 0.1..3.0f64, b in -2.0..2.0f64, c in -5.0..5.0f64) {
            let d = Domain::new(1, 2.0, 5).unwrap();
            let f = GridFunction::from_fn(d, |x| (a * x[0]).sin()).unwrap();
            let g = GridFunction::from_fn(d, |x| (x[0] - b).abs() - 1.0).unwrap();
            let mfg = hl_maximal(&f.add(&g).unwrap());
            let (mf, mg) = (hl_maximal(&f), hl_maximal(&g));
            let mcf = hl_maximal(&f.scale(c));
            for i in 0..d.len() {
                prop_assert!(mfg.samples()[i] <= mf.samples()[i] + mg.samples()[i] + 1e-12);
                prop_assert!((mcf.samples()[i] - c.abs() * mf.samples()[i]).abs() <= 1e-12 * (1.0 + mcf.samples()[i]));
            }
        }

        #[test]
        fn powered_monotone_in_u(u1 in 0.2..4.0f64, du in 0.0..4.0f64) {
            let d = Domain::new(1, 2.0, 5).unwrap();
            let w = crate::presets::WeightPreset::Power(2.0).build(d).unwrap();
            let f = GridFunction::from_fn(d, |x| (3.0 * x[0]).cos()).unwrap();
            let lo = powered_weighted_local_maximal(&f, &w, u1).unwrap();
            let hi = powered_weighted_local_maximal(&f, &w, u1 + du).unwrap();
            for i in 0..d.len() {
                prop_assert!(lo.samples()[i] <= hi.samples()[i] * (1.0 + 1e-12));
            }
        }
    }
}
