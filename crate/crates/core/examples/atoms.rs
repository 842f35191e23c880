//! Atomic decomposition, atom validation, synthesis and export.
//!
//! `cargo run --example atoms`

use std::str::FromStr;

use varhardy::atoms::{self, atomic_decompose, validate_atom, write_decomposition, AtomicParams};
use varhardy::grid::Domain;
use varhardy::hardy::{build_dictionary, capital_n, hardy_norm, Variant};
use varhardy::norms::luxemburg_norm;
use varhardy::presets::{family, ExponentPreset, FamilyKind, WeightPreset};
use varhardy::weight::q_w_estimate;
use varhardy::Result;

fn main() -> Result<()> {
    let d = Domain::new(1, 8.0, 8)?;
    let p = ExponentPreset::from_str("lhdecay:1.5")?.build(d)?;
    let w = WeightPreset::from_str("power:1")?.build(d)?;
    let q_w = q_w_estimate(&w)?;
    let dict = build_dictionary(d, capital_n(1, q_w, p.p_minus()), Variant::Large, 8, 0)?;
    let f = family(FamilyKind::Bump, 1, 3, 1)[0].realize(d)?;

    let params = AtomicParams {
        single: true,
        q_w: Some(q_w),
        ..AtomicParams::default()
    };
    let dec = atomic_decompose(&f, &p, &w, &dict, &params)?;
    let valid = dec
        .atoms
        .iter()
        .filter(|a| validate_atom(a, &w).pass)
        .count();
    println!(
        "{} atoms over {} heights, {valid} valid",
        dec.len(),
        dec.levels
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    );

    let back = atoms::synthesize(&dec);
    let err = luxemburg_norm(&back.sub(&f)?, &p, &w)? / luxemburg_norm(&f, &p, &w)?;
    let total = dec.lambda0() + dec.sequence_norm(&p, &w, params.v)?;
    println!(
        "round trip error {err:.2e}, (λ₀ + 𝒜)/‖f‖_h = {:.3}",
        total / hardy_norm(&f, &p, &w, &dict)?
    );

    let dir = std::env::temp_dir();
    let (json, bin) = (
        dir.join("varhardy_atoms.json"),
        dir.join("varhardy_atoms.bin"),
    );
    write_decomposition(&dec, &json, &bin)?;
    println!("wrote {} and {}", json.display(), bin.display());
    Ok(())
}
