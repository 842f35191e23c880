//! Named exponent, weight and test-function presets used by the CLI and suites.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{Domain, GridFunction};
use crate::weight::Weight;

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn parse_num(key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::UnknownPreset(key.to_string()))
}

/// Exponent presets: `const:<v>`, `paper91`, `lhdecay:<a>`, `sin2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExponentPreset {
    Const(f64),
    /// `max(1/2, min(1, |x|))`, declared limit 1.
    Paper91,
    /// `a + 1/log(e + |x|)`, declared limit `a`.
    LhDecay(f64),
    /// `2 + sin²|x|`, no declared limit.
    Sin2,
}

impl ExponentPreset {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = radius(x);
        match *self {
            ExponentPreset::Const(v) => v,
            ExponentPreset::Paper91 => r.clamp(0.5, 1.0),
            ExponentPreset::LhDecay(a) => a + 1.0 / (std::f64::consts::E + r).ln(),
            ExponentPreset::Sin2 => 2.0 + r.sin().powi(2),
        }
    }

    pub fn p_infty(&self) -> Option<f64> {
        match *self {
            ExponentPreset::Const(v) => Some(v),
            ExponentPreset::Paper91 => Some(1.0),
            ExponentPreset::LhDecay(a) => Some(a),
            ExponentPreset::Sin2 => None,
        }
    }

    pub fn build(&self, domain: Domain) -> Result<VariableExponent> {
        let me = *self;
        VariableExponent::from_fn(domain, move |x| me.eval(x), self.p_infty())
    }
}

impl FromStr for ExponentPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let out = match (head, arg) {
            ("const", Some(v)) => ExponentPreset::Const(parse_num(s, v)?),
            ("paper91", None) => ExponentPreset::Paper91,
            ("lhdecay", Some(v)) => ExponentPreset::LhDecay(parse_num(s, v)?),
            ("sin2", None) => ExponentPreset::Sin2,
            _ => return Err(Error::UnknownPreset(s.to_string())),
        };
        let positive = match out {
            ExponentPreset::Const(v) | ExponentPreset::LhDecay(v) => v > 0.0,
            _ => true,
        };
        if positive {
            Ok(out)
        } else {
            Err(Error::UnknownPreset(s.to_string()))
        }
    }
}

impl fmt::Display for ExponentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentPreset::Const(v) => write!(f, "const:{v}"),
            ExponentPreset::Paper91 => write!(f, "paper91"),
            ExponentPreset::LhDecay(a) => write!(f, "lhdecay:{a}"),
            ExponentPreset::Sin2 => write!(f, "sin2"),
        }
    }
}

/// Weight presets: `const:<c>`, `power:<μ>`, `exp:<μ>`, `absp:<α>`, `paper91b`, `paper91c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightPreset {
    Const(f64),
    /// `(1 + |x|)^μ`.
    Power(f64),
    /// `exp(μ x₁)`.
    Exp(f64),
    /// `|x|^α`, evaluated at cell centers.
    AbsPower(f64),
    /// `|x|^{n+1} / (1 + |x|^{2n+1})`.
    Paper91b,
    /// `|x|^{n+1} e^{|x|}`.
    Paper91c,
}

impl WeightPreset {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = radius(x);
        let n = x.len() as i32;
        match *self {
            WeightPreset::Const(c) => c,
            WeightPreset::Power(mu) => (1.0 + r).powf(mu),
            WeightPreset::Exp(mu) => (mu * x[0]).exp(),
            WeightPreset::AbsPower(a) => r.powf(a),
            WeightPreset::Paper91b => r.powi(n + 1) / (1.0 + r.powi(2 * n + 1)),
            WeightPreset::Paper91c => r.powi(n + 1) * r.exp(),
        }
    }

    pub fn build(&self, domain: Domain) -> Result<Weight> {
        let me = *self;
        Weight::from_fn(domain, move |x| me.eval(x))
    }
}

impl FromStr for WeightPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let out = match (head, arg) {
            ("const", Some(v)) => {
                let c = parse_num(s, v)?;
                if c <= 0.0 {
                    return Err(Error::UnknownPreset(s.to_string()));
                }
                WeightPreset::Const(c)
            }
            ("power", Some(v)) => WeightPreset::Power(parse_num(s, v)?),
            ("exp", Some(v)) => WeightPreset::Exp(parse_num(s, v)?),
            ("absp", Some(v)) => WeightPreset::AbsPower(parse_num(s, v)?),
            ("paper91b", None) => WeightPreset::Paper91b,
            ("paper91c", None) => WeightPreset::Paper91c,
            _ => return Err(Error::UnknownPreset(s.to_string())),
        };
        Ok(out)
    }
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPreset::Const(c) => write!(f, "const:{c}"),
            WeightPreset::Power(m) => write!(f, "power:{m}"),
            WeightPreset::Exp(m) => write!(f, "exp:{m}"),
            WeightPreset::AbsPower(a) => write!(f, "absp:{a}"),
            WeightPreset::Paper91b => write!(f, "paper91b"),
            WeightPreset::Paper91c => write!(f, "paper91c"),
        }
    }
}

/// Test-function family names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Bump,
    Haar,
    Plateau,
    Spike,
    Delta,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Bump,
        FamilyKind::Haar,
        FamilyKind::Plateau,
        FamilyKind::Spike,
        FamilyKind::Delta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Bump => "bump",
            FamilyKind::Haar => "haar",
            FamilyKind::Plateau => "plateau",
            FamilyKind::Spike => "spike",
            FamilyKind::Delta => "delta",
        }
    }
}

impl FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Resolution-independent description of a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestSignal {
    /// `amp · exp(1 - 1/(1 - r²))` with `r = |x - c|/width`; peak value `amp`.
    Bump {
        center: [f64; 2],
        width: f64,
        amp: f64,
    },
    /// `+amp` on the left half and `-amp` on the right half (first axis) of the cube of half-side `width`.
    Haar {
        center: [f64; 2],
        width: f64,
        amp: f64,
    },
    /// Polynomial `c0 + c1 (x₁-c₁) + c2 (x₁-c₁)²` on the cube of half-side `width`.
    Plateau {
        center: [f64; 2],
        width: f64,
        coeffs: [f64; 3],
    },
    /// `amp · max(|x-c|, h/2)^{-beta}` on the ball of radius `width`.
    Spike {
        center: [f64; 2],
        width: f64,
        beta: f64,
        amp: f64,
    },
    /// Unit-mass spike at the origin.
    Delta,
}

/// Canonical bump `exp(1 - 1/(1 - r²))` on `r < 1`.
pub fn unit_bump(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

impl TestSignal {
    fn offset(c: &[f64; 2], x: &[f64]) -> [f64; 2] {
        let mut y = [0.0; 2];
        for (a, xa) in x.iter().enumerate() {
            y[a] = xa - c[a];
        }
        y
    }

    /// Value at `x` on a lattice with step `h`.
    pub fn eval(&self, x: &[f64], h: f64) -> f64 {
        let dim = x.len();
        match self {
            TestSignal::Bump { center, width, amp } => {
                let y = Self::offset(center, x);
                amp * unit_bump(radius(&y[..dim]) / width)
            }
            TestSignal::Haar { center, width, amp } => {
                let y = Self::offset(center, x);
                if y[..dim].iter().all(|v| *v >= -width && *v < *width) {
                    if y[0] < 0.0 {
                        *amp
                    } else {
                        -amp
                    }
                } else {
                    0.0
                }
            }
            TestSignal::Plateau {
                center,
                width,
                coeffs,
            } => {
                let y = Self::offset(center, x);
                if y[..dim].iter().all(|v| *v >= -width && *v < *width) {
                    coeffs[0] + coeffs[1] * y[0] + coeffs[2] * y[0] * y[0]
                } else {
                    0.0
                }
            }
            TestSignal::Spike {
                center,
                width,
                beta,
                amp,
            } => {
                let y = Self::offset(center, x);
                let r = radius(&y[..dim]);
                if r < *width {
                    amp * r.max(0.5 * h).powf(-beta)
                } else {
                    0.0
                }
            }
            TestSignal::Delta => {
                let at_origin = x.iter().all(|v| v.abs() < 0.5 * h);
                if at_origin {
                    h.powi(-(dim as i32))
                } else {
                    0.0
                }
            }
        }
    }

    pub fn realize(&self, domain: Domain) -> Result<GridFunction> {
        if let TestSignal::Delta = self {
            return Ok(GridFunction::delta(domain));
        }
        let h = domain.h();
        GridFunction::from_fn(domain, |x| self.eval(x, h))
    }

    /// Radius of a ball centered at the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        let c = |center: &[f64; 2]| radius(center);
        match self {
            TestSignal::Bump { center, width, .. } | TestSignal::Spike { center, width, .. } => {
                c(center) + width
            }
            TestSignal::Haar { center, width, .. } | TestSignal::Plateau { center, width, .. } => {
                c(center) + width * 2f64.sqrt()
            }
            TestSignal::Delta => 0.0,
        }
    }
}

/// `count` seeded members of a family; supports stay inside `[-2, 2]^n`.
pub fn family(kind: FamilyKind, count: usize, seed: u64, dim: usize) -> Vec<TestSignal> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let center = |rng: &mut ChaCha8Rng| {
        let mut c = [0.0; 2];
        for ca in c.iter_mut().take(dim) {
            *ca = rng.gen_range(-0.75..0.75);
        }
        c
    };
    (0..count)
        .map(|_| match kind {
            FamilyKind::Bump => TestSignal::Bump {
                center: center(&mut rng),
                width: rng.gen_range(0.35..1.0),
                amp: rng.gen_range(0.5..2.0),
            },
            FamilyKind::Haar => TestSignal::Haar {
                center: center(&mut rng),
                width: rng.gen_range(0.125..0.75),
                amp: rng.gen_range(0.5..2.0),
            },
            FamilyKind::Plateau => TestSignal::Plateau {
                center: center(&mut rng),
                width: rng.gen_range(0.5..1.0),
                coeffs: [
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ],
            },
            FamilyKind::Spike => TestSignal::Spike {
                center: center(&mut rng),
                width: rng.gen_range(0.25..0.75),
                beta: rng.gen_range(0.1..0.4) * dim as f64,
                amp: rng.gen_range(0.5..1.5),
            },
            FamilyKind::Delta => TestSignal::Delta,
        })
        .collect()
}

/// Human-readable preset catalogue in a fixed order.
pub fn list_presets() -> String {
    let lines = [
        "exponents:",
        "  const:<v>      constant exponent v > 0",
        "  paper91        max(1/2, min(1, |x|)), p_infty = 1",
        "  lhdecay:<a>    a + 1/log(e + |x|), p_infty = a",
        "  sin2           2 + sin^2|x|, no p_infty",
        "weights:",
        "  const:<c>      constant weight c > 0",
        "  power:<μ>      (1 + |x|)^μ",
        "  exp:<μ>        exp(μ x_1)",
        "  absp:<α>       |x|^α at cell centers, floored at 2^-52",
        "  paper91b       |x|^(n+1) / (1 + |x|^(2n+1))",
        "  paper91c       |x|^(n+1) exp(|x|)",
        "functions:",
        "  bump           smooth bumps, random center and width",
        "  haar           Haar-type sign changes on a cube",
        "  plateau        quadratic polynomial on a cube",
        "  spike          clamped |x - c|^-β singularities",
        "  delta          unit-mass spike at the origin",
    ];
    let mut s = lines.join("\n");
    s.push('\n');
    s
}
