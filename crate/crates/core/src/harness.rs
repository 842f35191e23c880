//! Experiment configuration, suites `E1`–`E9` and report serialization.
//!
//! Every suite evaluates its probes at resolutions `m` and `m + 1` and emits
//! one [`Row`] per (case, quantity). Rows are assembled in case order, so a
//! fixed configuration always yields the same report apart from `wall_time_s`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{
    self, atomic_decompose, cz_decompose_with, validate_atom, whitney_geometry, AtomicParams,
};
use crate::error::{Error, Result};
use crate::exponent::VariableExponent;
use crate::grid::{all_shifts, Domain, GridFunction};
use crate::hardy::{
    build_dictionary, build_dictionary_with_radius, capital_n, dirac_membership_check,
    grand_maximal, hardy_norm, radial_log_slope, Mode, TestDictionary, Variant,
};
use crate::lp::{lp_norm, make_phi_pair, telescoping_reconstruct};
use crate::maximal::{boundedness_probe, grid_maximal, lattice_maximal, MaximalOperator};
use crate::norms::{holder_check, luxemburg_norm, modular};
use crate::presets::{family, ExponentPreset, FamilyKind, WeightPreset};
use crate::stability::{ratio, two_resolution_stable};
use crate::wavelet::{analyze, build_wavelet_system, v_from, w_from, wavelet_norm_with};
use crate::weight::{
    a_loc_infty_constant, a_loc_var_constant, q_w_estimate, reverse_holder_check, Weight,
};

pub const SUITES: [&str; 9] = ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"];

/// All knobs of a run. Field names mirror the CLI flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub m: u32,
    pub p: String,
    pub w: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub suite: String,
    /// Operator for the maximal suite, e.g. `Mloc`, `M`, `KB:16`.
    pub operator: String,
    pub family: String,
    pub count: usize,
    /// Two-resolution ratio threshold.
    pub threshold: f64,
    /// Largest allowed `max/min` of an equivalence ratio over the family.
    pub band: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1,
            t: 8.0,
            m: 9,
            p: "const:2".into(),
            w: "const:1".into(),
            seed: 0,
            out: None,
            suite: "E1".into(),
            operator: "Mloc".into(),
            family: "bump".into(),
            count: 20,
            threshold: crate::stability::RATIO_THRESHOLD,
            band: 4.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Checks ranges and that every preset resolves.
    pub fn validate(&self) -> Result<()> {
        if !(5..=12).contains(&self.m) {
            return Err(Error::InvalidParameter(format!(
                "m = {} outside [5, 12]",
                self.m
            )));
        }
        if !(1..=2).contains(&self.n) {
            return Err(Error::InvalidParameter(format!(
                "n = {} must be 1 or 2",
                self.n
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("count must be positive".into()));
        }
        ExponentPreset::from_str(&self.p)?;
        WeightPreset::from_str(&self.w)?;
        FamilyKind::from_str(&self.family)?;
        MaximalOperator::from_str(&self.operator)?;
        if !SUITES.contains(&self.suite.as_str()) && self.suite != "all" {
            return Err(Error::UnknownPreset(self.suite.clone()));
        }
        Domain::new(self.n, self.t, self.m)?;
        Ok(())
    }
}

/// One line of the CSV summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub suite: String,
    pub case: String,
    pub quantity: String,
    pub value_m: f64,
    pub value_m1: Option<f64>,
    pub ratio: Option<f64>,
    pub pass: bool,
}

impl Row {
    /// A quantity judged by the two-resolution test.
    fn stable(suite: &str, case: &str, quantity: &str, a: f64, b: f64, threshold: f64) -> Row {
        Row {
            suite: suite.into(),
            case: case.into(),
            quantity: quantity.into(),
            value_m: a,
            value_m1: Some(b),
            ratio: Some(ratio(a, b)),
            pass: two_resolution_stable(a, b, threshold),
        }
    }

    /// Two resolutions with an explicit verdict.
    fn pair(suite: &str, case: &str, quantity: &str, a: f64, b: f64, pass: bool) -> Row {
        Row {
            suite: suite.into(),
            case: case.into(),
            quantity: quantity.into(),
            value_m: a,
            value_m1: Some(b),
            ratio: Some(ratio(a, b)),
            pass,
        }
    }

    /// A single value.
    fn single(suite: &str, case: &str, quantity: &str, v: f64, pass: bool) -> Row {
        Row {
            suite: suite.into(),
            case: case.into(),
            quantity: quantity.into(),
            value_m: v,
            value_m1: None,
            ratio: None,
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub m: u32,
    pub h: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub rows: Vec<Row>,
    pub pass: bool,
    /// Excluded from the determinism guarantee.
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// JSON without the wall time.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "suite", "case", "quantity", "value_m", "value_m1", "ratio", "pass",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            w.write_record([
                r.suite.clone(),
                r.case.clone(),
                r.quantity.clone(),
                r.value_m.to_string(),
                opt(r.value_m1),
                opt(r.ratio),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<out>` as JSON and `<out>` with extension `csv` next to it.
    pub fn write(&self, out: &Path) -> Result<()> {
        self.write_json(out)?;
        self.write_csv(&out.with_extension("csv"))
    }
}

/// Inputs realized at one resolution.
struct Level {
    d: Domain,
    p: VariableExponent,
    w: Weight,
    fam: Vec<GridFunction>,
}

struct Setup {
    cfg: ExperimentConfig,
    levels: [Level; 2],
    kind: FamilyKind,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pp = ExponentPreset::from_str(&cfg.p)?;
        let wp = WeightPreset::from_str(&cfg.w)?;
        let kind = FamilyKind::from_str(&cfg.family)?;
        let signals = family(kind, cfg.count, cfg.seed, cfg.n);
        let level = |m: u32| -> Result<Level> {
            let d = Domain::new(cfg.n, cfg.t, m)?;
            let fam = signals
                .iter()
                .map(|s| s.realize(d))
                .collect::<Result<_>>()?;
            Ok(Level {
                d,
                p: pp.build(d)?,
                w: wp.build(d)?,
                fam,
            })
        };
        Ok(Setup {
            cfg: cfg.clone(),
            levels: [level(cfg.m)?, level(cfg.m + 1)?],
            kind,
        })
    }

    fn case(&self, i: usize) -> String {
        format!("{}{:02}", self.kind.name(), i)
    }

    fn tag(&self) -> String {
        format!("p={},w={}", self.cfg.p, self.cfg.w)
    }

    /// Dictionaries for `ℳ_N` at both resolutions, `N` from the estimated `q_w`.
    fn dictionaries(&self, variant: Variant) -> Result<(f64, [TestDictionary; 2])> {
        let l0 = &self.levels[0];
        let q_w = q_w_estimate(&l0.w)?;
        let order = capital_n(self.cfg.n, q_w, l0.p.p_minus());
        let a = build_dictionary(l0.d, order, variant, DICTIONARY_SIZE, self.cfg.seed)?;
        let b = a.resample(self.levels[1].d)?;
        Ok((q_w, [a, b]))
    }
}

const DICTIONARY_SIZE: usize = 8;
const COVERING_MEMBERS: usize = 4;

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Per-member ratio rows plus one band row per resolution pair.
fn band_rows(suite: &str, tag: &str, quantity: &str, s: &Setup, vals: &[[f64; 2]]) -> Vec<Row> {
    let mut rows: Vec<Row> = vals
        .iter()
        .enumerate()
        .map(|(i, v)| Row::stable(suite, &s.case(i), quantity, v[0], v[1], s.cfg.threshold))
        .collect();
    let sp = [
        spread(&vals.iter().map(|v| v[0]).collect::<Vec<_>>()),
        spread(&vals.iter().map(|v| v[1]).collect::<Vec<_>>()),
    ];
    rows.push(Row::pair(
        suite,
        tag,
        &format!("{quantity}_spread"),
        sp[0],
        sp[1],
        sp[0] <= s.cfg.band && sp[1] <= s.cfg.band,
    ));
    rows
}

fn per_member<T: Send>(
    s: &Setup,
    f: impl Fn(&Level, &GridFunction, usize) -> Result<T> + Sync,
) -> Result<Vec<[T; 2]>> {
    first_members(s, s.cfg.count, f)
}

/// [`per_member`] restricted to the first `count` members.
fn first_members<T: Send>(
    s: &Setup,
    count: usize,
    f: impl Fn(&Level, &GridFunction, usize) -> Result<T> + Sync,
) -> Result<Vec<[T; 2]>> {
    (0..count.min(s.cfg.count))
        .into_par_iter()
        .map(|i| -> Result<[T; 2]> {
            let a = f(&s.levels[0], &s.levels[0].fam[i], 0)?;
            let b = f(&s.levels[1], &s.levels[1].fam[i], 1)?;
            Ok([a, b])
        })
        .collect()
}

/// E1: Luxemburg norms, unit-sphere modular, Hölder.
fn suite_norms(s: &Setup) -> Result<Vec<Row>> {
    let norms = per_member(s, |l, f, _| luxemburg_norm(f, &l.p, &l.w))?;
    let unit = per_member(s, |l, f, _| {
        let nf = luxemburg_norm(f, &l.p, &l.w)?;
        Ok(if nf > 0.0 {
            modular(&f.scale(1.0 / nf), &l.p, &l.w)
        } else {
            1.0
        })
    })?;
    let holder = (0..s.cfg.count)
        .into_par_iter()
        .map(|i| -> Result<[crate::report::Report; 2]> {
            let j = (i + 1) % s.cfg.count;
            let [a, b] = [0, 1].map(|k| {
                let l = &s.levels[k];
                holder_check(&l.fam[i], &l.fam[j], &l.p)
            });
            Ok([a?, b?])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, ((n, u), h)) in norms.iter().zip(&unit).zip(&holder).enumerate() {
        let c = s.case(i);
        rows.push(Row::stable(
            "E1",
            &c,
            "luxemburg_norm",
            n[0],
            n[1],
            s.cfg.threshold,
        ));
        let ok = u.iter().all(|v| (v - 1.0).abs() <= 1e-6);
        rows.push(Row::pair("E1", &c, "unit_modular", u[0], u[1], ok));
        let q = |r: &crate::report::Report| r.value("rhs") / r.value("lhs");
        rows.push(Row::pair(
            "E1",
            &c,
            "holder_rhs_over_lhs",
            q(&h[0]),
            q(&h[1]),
            h[0].pass && h[1].pass,
        ));
    }
    Ok(rows)
}

/// E2: empirical operator norm and the covering bound.
fn suite_maximal(s: &Setup) -> Result<Vec<Row>> {
    let op = MaximalOperator::from_str(&s.cfg.operator)?;
    let tag = s.tag();
    let probe = [0, 1].map(|k| {
        boundedness_probe(op, &s.levels[k].p, &s.levels[k].w, &s.levels[k].fam)
            .map(|r| r.value("ratio"))
    });
    let [a, b] = [
        probe[0].as_ref().map_err(clone_err)?,
        probe[1].as_ref().map_err(clone_err)?,
    ];
    let mut rows = vec![Row::stable(
        "E2",
        &tag,
        &format!("ratio:{op}"),
        *a,
        *b,
        s.cfg.threshold,
    )];
    // the unrestricted lattice sup is quadratic in the axis length
    let violations = first_members(s, COVERING_MEMBERS, |l, f, _| {
        let lhs = lattice_maximal(f, l.d.axis_len());
        let mut rhs = vec![0.0; l.d.len()];
        for a in all_shifts(l.d.dim()) {
            for (r, v) in rhs.iter_mut().zip(grid_maximal(f, a)?.samples()) {
                *r += v;
            }
        }
        let c = 6f64.powi(l.d.dim() as i32);
        Ok(lhs
            .samples()
            .iter()
            .zip(&rhs)
            .filter(|(x, y)| **x > c * **y * (1.0 + 1e-12))
            .count() as f64)
    })?;
    for (i, v) in violations.iter().enumerate() {
        rows.push(Row::pair(
            "E2",
            &s.case(i),
            "covering_violations",
            v[0],
            v[1],
            v[0] == 0.0 && v[1] == 0.0,
        ));
    }
    Ok(rows)
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidParameter(e.to_string())
}

/// E3: weight constants.
fn suite_weights(s: &Setup) -> Result<Vec<Row>> {
    let tag = s.tag();
    let [l0, l1] = &s.levels;
    let ainf = [
        a_loc_infty_constant(&l0.w)?.constant,
        a_loc_infty_constant(&l1.w)?.constant,
    ];
    let avar = [
        a_loc_var_constant(&l0.w, &l0.p)?.constant,
        a_loc_var_constant(&l1.w, &l1.p)?.constant,
    ];
    let rh = [reverse_holder_check(&l0.w)?, reverse_holder_check(&l1.w)?];
    let q_w = q_w_estimate(&l0.w)?;
    let th = s.cfg.threshold;
    Ok(vec![
        Row::stable("E3", &tag, "a_loc_infty", ainf[0], ainf[1], th),
        Row::stable("E3", &tag, "a_loc_var", avar[0], avar[1], th),
        Row::pair(
            "E3",
            &tag,
            "reverse_holder_violations",
            rh[0].value("violations"),
            rh[1].value("violations"),
            rh[0].pass && rh[1].pass,
        ),
        Row::single("E3", &tag, "q_w", q_w, q_w.is_finite()),
    ])
}

/// E4: grand maximal norms and the Dirac profile.
fn suite_hardy(s: &Setup) -> Result<Vec<Row>> {
    let (_, dicts) = s.dictionaries(Variant::Large)?;
    let norms = per_member(s, |l, f, k| hardy_norm(f, &l.p, &l.w, &dicts[k]))?;
    let mut rows: Vec<Row> = norms
        .iter()
        .enumerate()
        .map(|(i, v)| Row::stable("E4", &s.case(i), "hardy_norm", v[0], v[1], s.cfg.threshold))
        .collect();
    let n = s.cfg.n as f64;
    let slope = [0, 1].map(|k| -> Result<f64> {
        let d = s.levels[k].d;
        let dict = build_dictionary(d, 2, Variant::Small, 12, s.cfg.seed)?;
        let m = grand_maximal(&GridFunction::delta(d), &dict, Mode::M0)?;
        Ok(radial_log_slope(&m, 4.0 * d.h(), 0.25))
    });
    let slope = [
        slope[0].as_ref().map_err(clone_err)?,
        slope[1].as_ref().map_err(clone_err)?,
    ];
    let ok = slope.iter().all(|v| (**v + n).abs() <= 0.15);
    rows.push(Row::pair(
        "E4",
        "delta",
        "log_slope",
        *slope[0],
        *slope[1],
        ok,
    ));
    let dm = dirac_membership_check(&s.levels[0].p, &s.levels[0].w)?;
    // membership is a property of (p, w), recorded rather than required
    rows.push(Row::pair(
        "E4",
        &s.tag(),
        "dirac_integral",
        dm.value("integral_m"),
        dm.value("integral_m1"),
        true,
    ));
    rows.push(Row::single(
        "E4",
        &s.tag(),
        "dirac_member",
        if dm.pass { 1.0 } else { 0.0 },
        true,
    ));
    Ok(rows)
}

/// E5: Calderón–Zygmund split at the median height and Whitney geometry.
fn suite_cz(s: &Setup) -> Result<Vec<Row>> {
    let (_, dicts) = s.dictionaries(Variant::Large)?;
    let out = per_member(s, |l, f, k| -> Result<[f64; 4]> {
        let mf = grand_maximal(f, &dicts[k], Mode::MN)?;
        let mut sorted = mf.samples().to_vec();
        sorted.sort_by(f64::total_cmp);
        let lambda = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
        let cz = cz_decompose_with(f, &mf, lambda, 1)?;
        let err = cz.reassemble().sub(f)?.max_abs() / f.max_abs().max(f64::MIN_POSITIVE);
        let omega: Vec<bool> = mf.samples().iter().map(|&v| v > lambda).collect();
        let g = whitney_geometry(&l.d, &omega, &cz.cubes())?;
        let viol = g.value("lower_violations") + g.value("upper_violations");
        Ok([err, viol, g.value("overlap"), cz.bad.len() as f64])
    })?;
    let mut rows = Vec::new();
    for (i, v) in out.iter().enumerate() {
        let c = s.case(i);
        rows.push(Row::pair(
            "E5",
            &c,
            "reconstruction_error",
            v[0][0],
            v[1][0],
            v[0][0] <= 1e-10 && v[1][0] <= 1e-10,
        ));
        rows.push(Row::pair(
            "E5",
            &c,
            "whitney_violations",
            v[0][1],
            v[1][1],
            v[0][1] == 0.0 && v[1][1] == 0.0,
        ));
        rows.push(Row::stable(
            "E5",
            &c,
            "overlap",
            v[0][2],
            v[1][2],
            s.cfg.threshold,
        ));
        rows.push(Row::pair("E5", &c, "cubes", v[0][3], v[1][3], true));
    }
    Ok(rows)
}

fn atomic_params(q_w: f64) -> AtomicParams {
    AtomicParams {
        single: true,
        q_w: Some(q_w),
        ..AtomicParams::default()
    }
}

/// `(error, invalid atoms, (λ₀ + 𝒜)/‖f‖_h, atoms, truncated share)` for one member.
fn atomic_case(
    l: &Level,
    f: &GridFunction,
    dict: &TestDictionary,
    par: &AtomicParams,
) -> Result<[f64; 5]> {
    let dec = atomic_decompose(f, &l.p, &l.w, dict, par)?;
    let nf = luxemburg_norm(f, &l.p, &l.w)?;
    let err = luxemburg_norm(&atoms::synthesize(&dec).sub(f)?, &l.p, &l.w)? / nf;
    let bad = dec
        .atoms
        .iter()
        .filter(|a| !validate_atom(a, &l.w).pass)
        .count()
        + dec
            .single_part
            .iter()
            .filter(|(_, a)| !validate_atom(a, &l.w).pass)
            .count();
    let total = dec.lambda0() + dec.sequence_norm(&l.p, &l.w, par.v)?;
    let hn = hardy_norm(f, &l.p, &l.w, dict)?;
    let share = dec
        .single_part
        .as_ref()
        .map_or(dec.truncated, |(l0, _)| *l0)
        / f.max_abs();
    Ok([err, bad as f64, total / hn, dec.len() as f64, share])
}

/// E6: atomic round trip and the norm-equivalence band.
fn suite_atoms(s: &Setup) -> Result<Vec<Row>> {
    let (q_w, dicts) = s.dictionaries(Variant::Large)?;
    let par = atomic_params(q_w);
    let out = per_member(s, |l, f, k| atomic_case(l, f, &dicts[k], &par))?;
    let mut rows = Vec::new();
    for (i, v) in out.iter().enumerate() {
        let c = s.case(i);
        rows.push(Row::pair(
            "E6",
            &c,
            "roundtrip_error",
            v[0][0],
            v[1][0],
            v[0][0] <= 0.05 && v[1][0] <= 0.05,
        ));
        rows.push(Row::pair(
            "E6",
            &c,
            "invalid_atoms",
            v[0][1],
            v[1][1],
            v[0][1] == 0.0 && v[1][1] == 0.0,
        ));
        rows.push(Row::pair("E6", &c, "atoms", v[0][3], v[1][3], true));
    }
    let ratios: Vec<[f64; 2]> = out.iter().map(|v| [v[0][2], v[1][2]]).collect();
    rows.extend(band_rows("E6", &s.tag(), "atomic_over_hardy", s, &ratios));
    Ok(rows)
}

/// E7: Littlewood–Paley norm against the Hardy norm; telescoping.
fn suite_lp(s: &Setup) -> Result<Vec<Row>> {
    let (_, dicts) = s.dictionaries(Variant::Large)?;
    let pairs = [
        make_phi_pair(s.levels[0].d, 1)?,
        make_phi_pair(s.levels[1].d, 1)?,
    ];
    let out = per_member(s, |l, f, k| -> Result<[f64; 3]> {
        let pair = &pairs[k];
        let j = pair.default_depth();
        let r = lp_norm(f, &l.p, &l.w, pair, j)? / hardy_norm(f, &l.p, &l.w, &dicts[k])?;
        let tel = telescoping_reconstruct(f, pair, j)?;
        let direct = crate::lp::mollify(f, pair, j)?;
        let ident = tel.sum.sub(&direct)?.max_abs() / f.max_abs();
        Ok([r, ident, tel.relative_error])
    })?;
    let mut rows = Vec::new();
    for (i, v) in out.iter().enumerate() {
        let c = s.case(i);
        rows.push(Row::pair(
            "E7",
            &c,
            "telescope_identity",
            v[0][1],
            v[1][1],
            v[0][1] <= 1e-10 && v[1][1] <= 1e-10,
        ));
        rows.push(Row::pair(
            "E7",
            &c,
            "mollification_error",
            v[0][2],
            v[1][2],
            true,
        ));
    }
    let ratios: Vec<[f64; 2]> = out.iter().map(|v| [v[0][0], v[1][0]]).collect();
    rows.extend(band_rows("E7", &s.tag(), "lp_over_hardy", s, &ratios));
    Ok(rows)
}

/// Wavelet order needed by the moment bound, at least 4.
fn wavelet_order(dim: usize, q_w: f64, p_minus: f64) -> usize {
    let need = crate::wavelet::required_moments(dim, q_w, p_minus);
    ((need + 1).max(4) as usize).min(10)
}

/// E8: wavelet norm against the Hardy norm; Parseval.
fn suite_wavelet(s: &Setup) -> Result<Vec<Row>> {
    let (q_w, dicts) = s.dictionaries(Variant::Large)?;
    let sys = build_wavelet_system(wavelet_order(s.cfg.n, q_w, s.levels[0].p.p_minus()))?;
    let out = per_member(s, |l, f, k| -> Result<[f64; 2]> {
        let jmax = l.d.level() as i32 - 1;
        let r = wavelet_norm_with(f, &l.p, &l.w, &sys, 0, jmax, q_w)?
            / hardy_norm(f, &l.p, &l.w, &dicts[k])?;
        let c = analyze(f, &sys, 0, jmax)?;
        let e = v_from(&c).l2_norm().powi(2) + w_from(&c).l2_norm().powi(2);
        let f2 = f.l2_norm().powi(2);
        Ok([r, (e - f2).abs() / f2])
    })?;
    let mut rows = Vec::new();
    for (i, v) in out.iter().enumerate() {
        rows.push(Row::pair(
            "E8",
            &s.case(i),
            "parseval_error",
            v[0][1],
            v[1][1],
            v[0][1] <= 1e-7 && v[1][1] <= 1e-7,
        ));
    }
    let ratios: Vec<[f64; 2]> = out.iter().map(|v| [v[0][0], v[1][0]]).collect();
    rows.extend(band_rows("E8", &s.tag(), "wavelet_over_hardy", s, &ratios));
    Ok(rows)
}

/// E9: sensitivity to the dictionary radius and to the LP moment order.
fn suite_sensitivity(s: &Setup) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let l0 = &s.levels[0];
    let q_w = q_w_estimate(&l0.w)?;
    let order = capital_n(s.cfg.n, q_w, l0.p.p_minus());
    let par = atomic_params(q_w);
    // the radius-8 dictionary needs a window wider than 8
    let t = s.cfg.t.max(16.0);
    let cfg = ExperimentConfig { t, ..s.cfg.clone() };
    let wide = Setup::new(&cfg)?;
    for radius in [4.0, 8.0] {
        let dict = build_dictionary_with_radius(
            wide.levels[0].d,
            order,
            Variant::Large,
            DICTIONARY_SIZE,
            s.cfg.seed,
            radius,
        )?;
        let dicts = [dict.clone(), dict.resample(wide.levels[1].d)?];
        let out = per_member(&wide, |l, f, k| atomic_case(l, f, &dicts[k], &par))?;
        let tag = format!("r_D={radius}");
        for (i, v) in out.iter().enumerate() {
            rows.push(Row::pair(
                "E9",
                &format!("{}:{tag}", s.case(i)),
                "bottom_share",
                v[0][4],
                v[1][4],
                true,
            ));
        }
        let ratios: Vec<[f64; 2]> = out.iter().map(|v| [v[0][2], v[1][2]]).collect();
        rows.extend(band_rows("E9", &tag, "atomic_over_hardy", &wide, &ratios));
    }
    let (_, dicts) = s.dictionaries(Variant::Large)?;
    for l in [0u32, 1, 2, 4] {
        let pairs = [
            make_phi_pair(s.levels[0].d, l)?,
            make_phi_pair(s.levels[1].d, l)?,
        ];
        let out = per_member(s, |lv, f, k| {
            let pair = &pairs[k];
            Ok(lp_norm(f, &lv.p, &lv.w, pair, pair.default_depth())?
                / hardy_norm(f, &lv.p, &lv.w, &dicts[k])?)
        })?;
        let sp = [
            spread(&out.iter().map(|v| v[0]).collect::<Vec<_>>()),
            spread(&out.iter().map(|v| v[1]).collect::<Vec<_>>()),
        ];
        rows.push(Row::pair(
            "E9",
            &format!("L={l}"),
            "lp_over_hardy_spread",
            sp[0],
            sp[1],
            sp.iter().all(|v| v.is_finite()),
        ));
    }
    Ok(rows)
}

fn suite_rows(id: &str, s: &Setup) -> Result<Vec<Row>> {
    match id {
        "E1" => suite_norms(s),
        "E2" => suite_maximal(s),
        "E3" => suite_weights(s),
        "E4" => suite_hardy(s),
        "E5" => suite_cz(s),
        "E6" => suite_atoms(s),
        "E7" => suite_lp(s),
        "E8" => suite_wavelet(s),
        "E9" => suite_sensitivity(s),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Runs `cfg.suite` (or every suite for `all`) and writes the report when `out` is set.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let start = Instant::now();
    let setup = Setup::new(cfg)?;
    let ids: Vec<&str> = if cfg.suite == "all" {
        SUITES.to_vec()
    } else {
        vec![cfg.suite.as_str()]
    };
    let mut rows = Vec::new();
    for id in ids {
        rows.extend(suite_rows(id, &setup)?);
    }
    let d = setup.levels[0].d;
    let report = SuiteReport {
        suite: cfg.suite.clone(),
        config: cfg.clone(),
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").into(),
            n: cfg.n,
            t: cfg.t,
            m: cfg.m,
            h: d.h(),
            seed: cfg.seed,
        },
        pass: rows.iter().all(|r| r.pass),
        rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(out) = &cfg.out {
        report.write(out)?;
    }
    Ok(report)
}

pub use crate::presets::list_presets;
