//! End-to-end flows across modules: decompose, export, re-read, rebuild.

use std::str::FromStr;

use varhardy::atoms::{
    self, atomic_decompose, read_decomposition, write_decomposition, AtomicParams,
};
use varhardy::grid::{Domain, GridFunction};
use varhardy::hardy::{
    build_dictionary, build_dictionary_with_radius, capital_n, hardy_norm, Variant,
};
use varhardy::harness::{run_suite, ExperimentConfig};
use varhardy::lp::{lp_norm, make_phi_pair};
use varhardy::norms::luxemburg_norm;
use varhardy::presets::{family, ExponentPreset, FamilyKind, WeightPreset};
use varhardy::wavelet::{
    self, analyze, build_wavelet_system, read_coefficients, write_coefficients,
};
use varhardy::weight::q_w_estimate;

fn bumps(d: Domain, count: usize, seed: u64) -> Vec<GridFunction> {
    family(FamilyKind::Bump, count, seed, d.dim())
        .iter()
        .map(|s| s.realize(d).unwrap())
        .collect()
}

#[test]
fn decomposition_survives_export() {
    let d = Domain::new(1, 8.0, 7).unwrap();
    let p = ExponentPreset::from_str("lhdecay:1.5")
        .unwrap()
        .build(d)
        .unwrap();
    let w = WeightPreset::from_str("power:1").unwrap().build(d).unwrap();
    let q_w = q_w_estimate(&w).unwrap();
    let dict = build_dictionary(d, capital_n(1, q_w, p.p_minus()), Variant::Large, 8, 0).unwrap();
    let f = &bumps(d, 1, 4)[0];
    let par = AtomicParams {
        single: true,
        q_w: Some(q_w),
        ..AtomicParams::default()
    };
    let dec = atomic_decompose(f, &p, &w, &dict, &par).unwrap();
    assert!(!dec.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let (json, bin) = (dir.path().join("dec.json"), dir.path().join("dec.bin"));
    write_decomposition(&dec, &json, &bin).unwrap();
    let back = read_decomposition(&json, &bin).unwrap();
    assert_eq!(back.lambdas, dec.lambdas);
    assert_eq!(back.len(), dec.len());

    let rebuilt = atoms::synthesize(&back);
    let err = luxemburg_norm(&rebuilt.sub(f).unwrap(), &p, &w).unwrap()
        / luxemburg_norm(f, &p, &w).unwrap();
    assert!(err <= 1e-12, "relative error {err}");
}

#[test]
fn wavelet_coefficients_survive_export_in_2d() {
    let d = Domain::new(2, 2.0, 5).unwrap();
    let sys = build_wavelet_system(3).unwrap();
    let f = &bumps(d, 1, 8)[0];
    let c = analyze(f, &sys, 0, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (json, bin) = (dir.path().join("c.json"), dir.path().join("c.bin"));
    write_coefficients(&c, &json, &bin).unwrap();
    let back = read_coefficients(&json, &bin).unwrap();
    assert_eq!(back.scaling, c.scaling);
    let g = wavelet::synthesize(&back, &sys).unwrap();
    assert!(g.sub(f).unwrap().max_abs() <= 1e-10 * f.max_abs());
}

#[test]
fn three_norms_agree_up_to_constants_in_2d() {
    let d = Domain::new(2, 4.0, 5).unwrap();
    let p = ExponentPreset::from_str("const:2")
        .unwrap()
        .build(d)
        .unwrap();
    let w = WeightPreset::from_str("const:1").unwrap().build(d).unwrap();
    let dict = build_dictionary_with_radius(d, 2, Variant::Large, 8, 1, 2.0).unwrap();
    let pair = make_phi_pair(d, 1).unwrap();
    let sys = build_wavelet_system(4).unwrap();
    let mut lp_ratios = Vec::new();
    let mut wv_ratios = Vec::new();
    for f in bumps(d, 6, 2) {
        let hn = hardy_norm(&f, &p, &w, &dict).unwrap();
        lp_ratios.push(lp_norm(&f, &p, &w, &pair, pair.default_depth()).unwrap() / hn);
        wv_ratios.push(wavelet::wavelet_norm_with(&f, &p, &w, &sys, 0, 4, 1.0).unwrap() / hn);
    }
    for r in [&lp_ratios, &wv_ratios] {
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo <= 4.0, "{r:?}");
    }
}

#[test]
fn every_suite_runs_at_small_resolution() {
    for suite in ["E1", "E3", "E5", "E6", "E7", "E8"] {
        let cfg = ExperimentConfig {
            m: 6,
            count: 4,
            suite: suite.into(),
            ..ExperimentConfig::default()
        };
        let rep = run_suite(&cfg).unwrap();
        assert!(!rep.rows.is_empty());
        assert!(rep.rows.iter().all(|r| r.suite == suite));
        assert!(
            rep.pass,
            "{suite}: {:?}",
            rep.failures().collect::<Vec<_>>()
        );
    }
}

#[test]
fn weighted_suite_rows_carry_both_resolutions() {
    let cfg = ExperimentConfig {
        m: 6,
        count: 3,
        p: "lhdecay:1.5".into(),
        w: "power:1".into(),
        suite: "E7".into(),
        ..ExperimentConfig::default()
    };
    let rep = run_suite(&cfg).unwrap();
    assert!(rep.rows.iter().all(|r| r.value_m1.is_some()));
    assert_eq!(rep.environment.h, 1.0 / 64.0);
}
