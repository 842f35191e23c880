//! Maximal operators and a two-resolution boundedness probe.
//!
//! `cargo run --example maximal`

use std::str::FromStr;

use varhardy::grid::{Domain, GridFunction};
use varhardy::maximal::{
    boundedness_probe, grid_maximal, hl_maximal, local_maximal, MaximalOperator,
};
use varhardy::presets::{family, FamilyKind, WeightPreset};
use varhardy::{Result, VariableExponent};

fn main() -> Result<()> {
    let d = Domain::new(1, 4.0, 7)?;
    let delta = GridFunction::delta(d);
    let at = |g: &GridFunction, x: f64| g.value_at(&[x]);
    let (m, mloc, m0) = (
        hl_maximal(&delta),
        local_maximal(&delta, 1.0)?,
        grid_maximal(&delta, [0, 0])?,
    );
    for x in [0.25, 1.0, 3.0] {
        println!(
            "x = {x}: M δ = {:.4}, M^loc δ = {:.4}, M^D0 δ = {:.4}",
            at(&m, x),
            at(&mloc, x),
            at(&m0, x)
        );
    }

    // boundedness on L^2(|x|^α): bounded for α < 1, unbounded growth for α = 1.5
    for alpha in ["absp:0.5", "absp:1.5"] {
        let ratios: Vec<f64> = [6, 8, 10]
            .iter()
            .map(|&m| -> Result<f64> {
                let d = Domain::new(1, 4.0, m)?;
                let p = VariableExponent::constant(d, 2.0)?;
                let w = WeightPreset::from_str(alpha)?.build(d)?;
                let mut fam: Vec<GridFunction> = family(FamilyKind::Spike, 6, 1, 1)
                    .iter()
                    .map(|s| s.realize(d))
                    .collect::<Result<_>>()?;
                fam.push(GridFunction::delta(d));
                Ok(boundedness_probe(MaximalOperator::Local, &p, &w, &fam)?.value("ratio"))
            })
            .collect::<Result<_>>()?;
        println!(
            "{alpha}: ‖M^loc f‖/‖f‖ at m = 6, 8, 10: {:.3}, {:.3}, {:.3} (per two levels x{:.2}, x{:.2})",
            ratios[0],
            ratios[1],
            ratios[2],
            ratios[1] / ratios[0],
            ratios[2] / ratios[1]
        );
    }
    Ok(())
}
