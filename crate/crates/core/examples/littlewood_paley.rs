//! Littlewood–Paley pieces, the square-function norm and the telescoping sum.
//!
//! `cargo run --example littlewood_paley`

use varhardy::grid::{Domain, GridFunction};
use varhardy::lp::{lp_levels, lp_norm, make_phi_pair, telescoping_reconstruct};
use varhardy::{Result, VariableExponent, Weight};

fn main() -> Result<()> {
    let d = Domain::new(1, 4.0, 9)?;
    let pair = make_phi_pair(d, 2)?;
    println!(
        "φ: B-spline order {}, depth up to {}",
        pair.spline_order(),
        pair.max_depth()
    );

    let f = GridFunction::from_fn(d, |x| {
        if x[0].abs() < 1.0 {
            1.0 - x[0].abs()
        } else {
            0.0
        }
    })?;
    let j = pair.default_depth();
    for (k, g) in lp_levels(&f, &pair, j)?.iter().enumerate() {
        println!(
            "  level {}: sup |φ*_(2^-j) * f| = {:.3e}",
            k + 1,
            g.max_abs()
        );
    }
    let tel = telescoping_reconstruct(&f, &pair, j)?;
    println!(
        "telescope at J = {j}: relative L² error {:.2e}",
        tel.relative_error
    );

    let p = VariableExponent::constant(d, 2.0)?;
    let w = Weight::unit(d);
    println!(
        "LP norm {:.5}, L² norm {:.5}",
        lp_norm(&f, &p, &w, &pair, j)?,
        f.l2_norm()
    );
    Ok(())
}
