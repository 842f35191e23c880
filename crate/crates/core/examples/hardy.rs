//! Grand maximal functions and the local Hardy norm.
//!
//! `cargo run --example hardy`

use std::str::FromStr;

use varhardy::grid::{Domain, GridFunction};
use varhardy::hardy::{
    build_dictionary, capital_n_for, dirac_membership_check, grand_maximal, hardy_norm,
    radial_log_slope, Mode, Variant,
};
use varhardy::norms::luxemburg_norm;
use varhardy::presets::{ExponentPreset, WeightPreset};
use varhardy::Result;

fn main() -> Result<()> {
    let d = Domain::new(1, 8.0, 9)?;
    let p = ExponentPreset::from_str("const:2")?.build(d)?;
    let w = WeightPreset::from_str("power:1")?.build(d)?;
    let order = capital_n_for(&p, &w)?;
    let dict = build_dictionary(d, order, Variant::Large, 8, 0)?;
    println!(
        "dictionary: order N = {order}, {} members, radius {}",
        dict.members.len(),
        dict.radius
    );

    let f = GridFunction::from_fn(d, |x| (1.0 - x[0] * x[0]).max(0.0).powi(3))?;
    println!(
        "‖f‖_L = {:.5}, ‖f‖_h = {:.5}",
        luxemburg_norm(&f, &p, &w)?,
        hardy_norm(&f, &p, &w, &dict)?
    );

    let small = build_dictionary(d, 2, Variant::Small, 12, 42)?;
    let md = grand_maximal(&GridFunction::delta(d), &small, Mode::M0)?;
    println!(
        "slope of log ℳ⁰δ against log|x|: {:.3}",
        radial_log_slope(&md, 4.0 * d.h(), 0.25)
    );

    for (pn, wn) in [
        ("paper91", "const:1"),
        ("const:2", "paper91c"),
        ("const:2", "const:1"),
    ] {
        let p = ExponentPreset::from_str(pn)?.build(d)?;
        let w = WeightPreset::from_str(wn)?.build(d)?;
        let r = dirac_membership_check(&p, &w)?;
        println!(
            "δ in h^p(w) for p = {pn}, w = {wn}: {} (ratio {:.2})",
            r.pass,
            r.value("ratio")
        );
    }
    Ok(())
}
