//! Luxemburg norms in a weighted variable-exponent Lebesgue space.
//!
//! `cargo run --example norms`

use std::str::FromStr;

use varhardy::grid::{Domain, GridFunction};
use varhardy::norms::{holder_check, luxemburg_norm, modular, unit_ball_modular_check};
use varhardy::presets::{ExponentPreset, WeightPreset};
use varhardy::Result;

fn main() -> Result<()> {
    let d = Domain::new(1, 8.0, 9)?;
    let p = ExponentPreset::from_str("lhdecay:1.5")?.build(d)?;
    let w = WeightPreset::from_str("power:1")?.build(d)?;
    let f = GridFunction::from_fn(d, |x| (-x[0] * x[0]).exp() * (3.0 * x[0]).cos())?;

    let norm = luxemburg_norm(&f, &p, &w)?;
    println!("‖f‖ = {norm:.6}");
    println!("ρ(f / ‖f‖) = {:.12}", modular(&f.scale(1.0 / norm), &p, &w));

    let sandwich = unit_ball_modular_check(&f.scale(2.0 / norm), &p, &w)?;
    println!(
        "at norm 2: {:.4} ≤ ρ = {:.4} ≤ {:.4} ({})",
        sandwich.value("lower"),
        sandwich.value("modular"),
        sandwich.value("upper"),
        if sandwich.pass { "ok" } else { "violated" }
    );

    let g = GridFunction::from_fn(d, |x| 1.0 / (1.0 + x[0].abs()).powi(2))?;
    let h = holder_check(&f, &g, &p)?;
    println!(
        "Hölder: ∫|fg| = {:.4} ≤ r_p ‖f‖ ‖g‖' = {:.4} with r_p = {:.4}",
        h.value("lhs"),
        h.value("rhs"),
        h.value("r_p")
    );
    Ok(())
}
