//! Grand maximal functions over finite test dictionaries and the Hardy quasi-norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{ball_max_filter, norm, rescale_mollifier, Convolver, Domain, GridFunction};
use crate::norms::luxemburg_norm;
use crate::presets::unit_bump;
use crate::report::Report;
use crate::weight::{q_w_estimate, Weight};

/// Default radius of the large dictionary.
pub const DEFAULT_RADIUS: f64 = 4.0;

/// Largest finite-difference derivative allowed after normalization.
pub const DERIVATIVE_MARGIN: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Members supported in `B(1)`.
    Small,
    /// The small members plus copies dilated to `B(r_D)`.
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `sup_t |φ_t * f(x)|` over the small dictionary.
    M0,
    /// Same over the large dictionary.
    Mbar0,
    /// Adds the offsets `|z - x| < t`, large dictionary.
    MN,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum Modulation {
    Plain,
    Even(f64),
    Odd(f64),
}

/// Analytic description of a member before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    center: [f64; 2],
    radius: f64,
    modulation: Modulation,
    /// `1 + a sin(b y₁ + c)` perturbation of the profile.
    wobble: [f64; 3],
}

impl MemberSpec {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut y = [0.0; 2];
        for (a, xa) in x.iter().enumerate() {
            y[a] = (xa - self.center[a]) / self.radius;
        }
        let r = norm(&y, x.len());
        if r >= 1.0 {
            return 0.0;
        }
        let m = match self.modulation {
            Modulation::Plain => 1.0,
            Modulation::Even(w) => (w * y[0]).cos(),
            Modulation::Odd(w) => (w * y[0]).sin(),
        };
        let [a, b, c] = self.wobble;
        unit_bump(r) * m * (1.0 + a * (b * y[0] + c).sin())
    }

    fn dilated(&self, s: f64) -> MemberSpec {
        MemberSpec {
            center: [self.center[0] * s, self.center[1] * s],
            radius: self.radius * s,
            ..*self
        }
    }

    /// Radius of a ball around the origin containing the support.
    pub fn reach(&self) -> f64 {
        norm(&self.center, 2) + self.radius
    }
}

/// Finite family of normalized test functions sampled on one lattice.
#[derive(Clone, Debug)]
pub struct TestDictionary {
    pub order: usize,
    pub variant: Variant,
    pub radius: f64,
    pub seed: u64,
    pub specs: Vec<MemberSpec>,
    pub members: Vec<GridFunction>,
    /// Largest `|∫φ|` over the members; nonzero for a nondegenerate dictionary.
    pub max_mass: f64,
}

impl TestDictionary {
    pub fn domain(&self) -> &Domain {
        self.members[0].domain()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.max_mass > 0.0
    }

    /// Same specs sampled and normalized on another lattice.
    pub fn resample(&self, domain: Domain) -> Result<TestDictionary> {
        realize(
            domain,
            self.order,
            self.variant,
            self.radius,
            self.seed,
            &self.specs,
        )
    }
}

fn central_diff(v: &[f64], d: &Domain, axis: usize) -> Vec<f64> {
    let n = d.axis_len();
    let stride = if d.dim() == 1 || axis == 1 { 1 } else { n };
    let inv = 0.5 / d.h();
    (0..v.len())
        .map(|i| {
            let ix = d.unflatten(i)[axis];
            if ix == 0 || ix + 1 == n {
                0.0
            } else {
                (v[i + stride] - v[i - stride]) * inv
            }
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest `sup |∂^α φ|` over `|α| ≤ order`, by repeated central differences.
pub fn max_derivative(phi: &GridFunction, order: usize) -> f64 {
    let d = phi.domain();
    let mut best = 0.0f64;
    let mut d0 = phi.samples().to_vec();
    for a0 in 0..=order {
        if a0 > 0 {
            d0 = central_diff(&d0, d, 0);
        }
        best = best.max(max_abs(&d0));
        if d.dim() == 2 {
            let mut d1 = d0.clone();
            for _ in 1..=order - a0 {
                d1 = central_diff(&d1, d, 1);
                best = best.max(max_abs(&d1));
            }
        }
    }
    best
}

fn small_specs(count: usize, seed: u64, dim: usize) -> Vec<MemberSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = vec![MemberSpec {
        center: [0.0; 2],
        radius: 1.0,
        modulation: Modulation::Plain,
        wobble: [0.0; 3],
    }];
    while specs.len() < count {
        let radius = rng.gen_range(0.5..1.0);
        let mut center = [0.0; 2];
        // uniform direction and distance keep |c| + radius ≤ 1
        let dist = rng.gen_range(0.0..1.0 - radius);
        if dim == 1 {
            center[0] = if rng.gen_bool(0.5) { dist } else { -dist };
        } else {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            center = [dist * th.cos(), dist * th.sin()];
        }
        let modulation = match specs.len() % 3 {
            0 => Modulation::Plain,
            1 => Modulation::Even(rng.gen_range(1.0..4.0)),
            _ => Modulation::Odd(rng.gen_range(1.0..4.0)),
        };
        let wobble = [
            rng.gen_range(0.0..0.3),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
        ];
        specs.push(MemberSpec {
            center,
            radius,
            modulation,
            wobble,
        });
    }
    specs
}

fn realize(
    domain: Domain,
    order: usize,
    variant: Variant,
    radius: f64,
    seed: u64,
    specs: &[MemberSpec],
) -> Result<TestDictionary> {
    let built: Vec<(MemberSpec, GridFunction)> = specs
        .par_iter()
        .filter_map(|s| {
            let raw = GridFunction::from_fn(domain, |x| s.eval(x)).ok()?;
            let top = max_derivative(&raw, order + 1);
            (top > 0.0 && top.is_finite()).then(|| (*s, raw.scale(DERIVATIVE_MARGIN / top)))
        })
        .collect();
    if built.is_empty() {
        return Err(Error::InvalidParameter(
            "every dictionary member failed normalization".into(),
        ));
    }
    let max_mass = built
        .iter()
        .map(|(_, g)| g.integral().abs())
        .fold(0.0, f64::max);
    let (specs, members) = built.into_iter().unzip();
    Ok(TestDictionary {
        order,
        variant,
        radius,
        seed,
        specs,
        members,
        max_mass,
    })
}

/// `count` normalized members (twice that for the large variant).
pub fn build_dictionary(
    domain: Domain,
    order: usize,
    variant: Variant,
    count: usize,
    seed: u64,
) -> Result<TestDictionary> {
    build_dictionary_with_radius(domain, order, variant, count, seed, DEFAULT_RADIUS)
}

pub fn build_dictionary_with_radius(
    domain: Domain,
    order: usize,
    variant: Variant,
    count: usize,
    seed: u64,
    radius: f64,
) -> Result<TestDictionary> {
    if count < 4 {
        return Err(Error::InvalidParameter(format!(
            "dictionary needs at least 4 members, got {count}"
        )));
    }
    if !(radius >= 1.0 && radius < domain.half_width()) {
        return Err(Error::InvalidParameter(format!(
            "dictionary radius {radius} must lie in [1, T)"
        )));
    }
    let mut specs = small_specs(count, seed, domain.dim());
    let r = match variant {
        Variant::Small => 1.0,
        Variant::Large => {
            let big: Vec<MemberSpec> = specs.iter().map(|s| s.dilated(radius)).collect();
            specs.extend(big);
            radius
        }
    };
    realize(domain, order, variant, r, seed, &specs)
}

/// Grand maximal function at dyadic scales `t = 2^-j`, `0 ≤ j ≤ m - 2`.
pub fn grand_maximal(f: &GridFunction, dict: &TestDictionary, mode: Mode) -> Result<GridFunction> {
    let d = *f.domain();
    if *dict.domain() != d {
        return Err(Error::DomainMismatch);
    }
    match (mode, dict.variant) {
        (Mode::M0, Variant::Small) | (Mode::Mbar0 | Mode::MN, Variant::Large) => {}
        _ => {
            return Err(Error::InvalidParameter(format!(
                "mode {mode:?} does not use the {:?} dictionary",
                dict.variant
            )))
        }
    }
    let conv = Convolver::new(f);
    let jmax = d.level().saturating_sub(2);
    let per_scale: Vec<Vec<f64>> = (0..=jmax)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let t = 2f64.powi(-(j as i32));
            let mut u = vec![0.0f64; d.len()];
            for phi in &dict.members {
                let c = conv.apply(&rescale_mollifier(phi, t)?)?;
                for (o, v) in u.iter_mut().zip(c.samples()) {
                    *o = o.max(v.abs());
                }
            }
            Ok(if mode == Mode::MN {
                ball_max_filter(&u, &d, t / d.h())
            } else {
                u
            })
        })
        .collect::<Result<_>>()?;
    let out = (0..d.len())
        .map(|i| per_scale.iter().map(|v| v[i]).fold(0.0, f64::max))
        .collect();
    GridFunction::new(d, out)
}

/// `‖ℳ_N f‖_{L^{p(·)}(w)}` over a large dictionary.
pub fn hardy_norm(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    dict: &TestDictionary,
) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    luxemburg_norm(&grand_maximal(f, dict, Mode::MN)?, p, w)
}

/// `2 + ⌊n (q_w / min(1, p₋) - 1)⌋`.
pub fn capital_n(dim: usize, q_w: f64, p_minus: f64) -> usize {
    let v = dim as f64 * (q_w / p_minus.min(1.0) - 1.0);
    (2 + v.floor().max(0.0) as i64) as usize
}

/// [`capital_n`] with `q_w` estimated from the weight.
pub fn capital_n_for(p: &VariableExponent, w: &Weight) -> Result<usize> {
    Ok(capital_n(p.domain().dim(), q_w_estimate(w)?, p.p_minus()))
}

fn dirac_integral(p: &VariableExponent, w: &Weight, d: Domain) -> Result<f64> {
    let pp = p
        .profile()
        .ok_or_else(|| Error::InvalidExponent("exponent has no profile".into()))?;
    let wp = w
        .profile()
        .ok_or_else(|| Error::InvalidWeight("weight has no profile".into()))?;
    let n = d.dim() as f64;
    let terms: Vec<f64> = (0..d.len())
        .into_par_iter()
        .map(|i| {
            let c = d.center(i);
            let x = &c[..d.dim()];
            let r = norm(&c, d.dim());
            if r < 1.0 {
                r.powf(-n * pp(x)) * wp(x)
            } else {
                0.0
            }
        })
        .collect();
    Ok(d.cell_volume() * crate::grid::pairwise_sum(&terms))
}

/// `∫_{B(1)} |x|^{-n p(x)} w(x) dx` by the midpoint rule at two resolutions.
///
/// Finite when the refined value exceeds the coarse one by at most 1.5;
/// a ratio of 2 or more marks divergence.
pub fn dirac_membership_check(p: &VariableExponent, w: &Weight) -> Result<Report> {
    let d = *p.domain();
    let i0 = dirac_integral(p, w, d)?;
    let i1 = dirac_integral(p, w, d.refined())?;
    let ratio = crate::stability::ratio(i0, i1);
    let mut r = Report::new("dirac_membership")
        .with("integral_m", i0)
        .with("integral_m1", i1)
        .with("ratio", ratio)
        .passing(ratio <= crate::stability::RATIO_THRESHOLD);
    r.set("divergent", if ratio >= 2.0 { 1.0 } else { 0.0 });
    Ok(r)
}

/// Least-squares slope of `log v` against `log |x|` over lattice points with
/// `lo ≤ |x| ≤ hi` and positive `v`.
pub fn radial_log_slope(v: &GridFunction, lo: f64, hi: f64) -> f64 {
    let d = v.domain();
    let pts: Vec<(f64, f64)> = (0..d.len())
        .filter_map(|i| {
            let r = norm(&d.point(i), d.dim());
            let y = v.samples()[i];
            (r >= lo && r <= hi && y > 0.0).then(|| (r.ln(), y.ln()))
        })
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{ExponentPreset, TestSignal, WeightPreset};

    fn d1() -> Domain {
        Domain::new(1, 8.0, 7).unwrap()
    }

    #[test]
    fn derivative_bound_holds() {
        let d = d1();
        let dict = build_dictionary(d, 2, Variant::Large, 6, 1).unwrap();
        assert_eq!(dict.members.len(), 12);
        for (s, m) in dict.specs.iter().zip(&dict.members) {
            assert!(max_derivative(m, 3) <= DERIVATIVE_MARGIN * (1.0 + 1e-12));
            assert!(s.reach() <= dict.radius + 1e-12);
            for i in 0..d.len() {
                if norm(&d.point(i), 1) >= dict.radius {
                    assert_eq!(m.samples()[i], 0.0);
                }
            }
        }
        assert!(dict.is_nondegenerate());
    }

    #[test]
    fn max_derivative_oracle() {
        // Gaussian: sup|f| = 1, sup|f'| = sqrt(2/e), sup|f''| = 2
        let d = Domain::new(1, 8.0, 9).unwrap();
        let f = GridFunction::from_fn(d, |x| (-x[0] * x[0]).exp()).unwrap();
        assert!((max_derivative(&f, 1) - 1.0).abs() < 1e-9);
        assert!((max_derivative(&f, 2) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn dictionary_is_reproducible() {
        let d = Domain::new(1, 8.0, 6).unwrap();
        let a = build_dictionary(d, 2, Variant::Small, 12, 42).unwrap();
        let b = build_dictionary(d, 2, Variant::Small, 12, 42).unwrap();
        assert_eq!(a.members.len(), 12);
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.samples(), y.samples());
        }
        assert!(build_dictionary(d, 2, Variant::Small, 3, 42).is_err());
    }

    #[test]
    fn chain_and_support() {
        let d = d1();
        let small = build_dictionary(d, 2, Variant::Small, 6, 7).unwrap();
        let large = build_dictionary(d, 2, Variant::Large, 6, 7).unwrap();
        let f = TestSignal::Haar {
            center: [0.2, 0.0],
            width: 0.5,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let m0 = grand_maximal(&f, &small, Mode::M0).unwrap();
        let mb = grand_maximal(&f, &large, Mode::Mbar0).unwrap();
        let mn = grand_maximal(&f, &large, Mode::MN).unwrap();
        for i in 0..d.len() {
            assert!(m0.samples()[i] <= mb.samples()[i] * (1.0 + 1e-12) + 1e-300);
            assert!(mb.samples()[i] <= mn.samples()[i] * (1.0 + 1e-12) + 1e-300);
            if norm(&d.point(i), 1) > 0.7 + 1.0 + d.h() {
                assert!(m0.samples()[i] < 1e-14);
            }
        }
        assert!(grand_maximal(&f, &small, Mode::MN).is_err());
    }

    #[test]
    fn bump_peak_comparable() {
        let d = d1();
        let large = build_dictionary(d, 2, Variant::Large, 6, 3).unwrap();
        let f = TestSignal::Bump {
            center: [0.0; 2],
            width: 0.8,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let m = grand_maximal(&f, &large, Mode::MN).unwrap();
        let i = f.argmax();
        let ratio = m.samples()[i] / f.samples()[i] / large.max_mass;
        assert!((0.5..=4.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn delta_profile_slope() {
        let d = Domain::new(1, 8.0, 9).unwrap();
        let dict = build_dictionary(d, 2, Variant::Small, 12, 42).unwrap();
        let m = grand_maximal(&GridFunction::delta(d), &dict, Mode::M0).unwrap();
        let s = radial_log_slope(&m, 4.0 * d.h(), 0.25);
        assert!((s + 1.0).abs() <= 0.15, "slope {s}");
    }

    #[test]
    fn hardy_norm_basics() {
        let d = Domain::new(1, 8.0, 6).unwrap();
        let dict = build_dictionary(d, 2, Variant::Large, 4, 5).unwrap();
        let p = VariableExponent::constant(d, 2.0).unwrap();
        let w = Weight::unit(d);
        assert_eq!(
            hardy_norm(&GridFunction::zeros(d), &p, &w, &dict).unwrap(),
            0.0
        );
        let f = TestSignal::Bump {
            center: [0.1, 0.0],
            width: 0.6,
            amp: 1.0,
        }
        .realize(d)
        .unwrap();
        let hn = hardy_norm(&f, &p, &w, &dict).unwrap();
        assert!(hn > 0.0);
        let h2 = hardy_norm(&f.scale(-3.0), &p, &w, &dict).unwrap();
        assert!((h2 - 3.0 * hn).abs() < 1e-8 * h2);
    }

    #[test]
    fn capital_n_examples() {
        assert_eq!(capital_n(1, 1.0, 1.5), 2);
        assert_eq!(capital_n(1, 1.5, 0.5), 4);
        assert_eq!(capital_n(2, 1.0, 1.0), 2);
        let mut last = usize::MAX;
        for k in 1..20 {
            let v = capital_n(2, 1.7, k as f64 * 0.1);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn dirac_examples() {
        let d = Domain::new(1, 2.0, 8).unwrap();
        let one = Weight::unit(d);
        let p91 = ExponentPreset::Paper91.build(d).unwrap();
        assert!(dirac_membership_check(&p91, &one).unwrap().pass);
        let two = VariableExponent::constant(d, 2.0).unwrap();
        for wp in [WeightPreset::Paper91b, WeightPreset::Paper91c] {
            assert!(
                dirac_membership_check(&two, &wp.build(d).unwrap())
                    .unwrap()
                    .pass,
                "{wp}"
            );
        }
        let r = dirac_membership_check(&two, &one).unwrap();
        assert!(!r.pass && r.value("divergent") == 1.0);
    }
}
