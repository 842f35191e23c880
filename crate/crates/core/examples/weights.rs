//! Local Muckenhoupt constants, the critical index and reverse Hölder.
//!
//! `cargo run --example weights`

use std::str::FromStr;

use varhardy::grid::Domain;
use varhardy::presets::{ExponentPreset, WeightPreset};
use varhardy::weight::{
    a_loc_infty_constant, a_loc_p_constant, a_loc_var_constant, q_w_estimate, reverse_holder_check,
};
use varhardy::Result;

fn main() -> Result<()> {
    let d = Domain::new(1, 4.0, 7)?;
    let p = ExponentPreset::from_str("sin2")?.build(d)?;
    for name in ["const:1", "power:1", "exp:1", "absp:0.5"] {
        let w = WeightPreset::from_str(name)?.build(d)?;
        let ainf = a_loc_infty_constant(&w)?;
        let a2 = a_loc_p_constant(&w, 2.0)?;
        let avar = a_loc_var_constant(&w, &p)?;
        let rh = reverse_holder_check(&w)?;
        println!(
            "{name:>9}: A∞ {:.3}, A2 {:.3}, A_p(·) {:.3} (stable: {:?}), q_w ≈ {:.3}, reverse Hölder violations {}",
            ainf.constant,
            a2.constant,
            avar.constant,
            avar.resolution_stable,
            q_w_estimate(&w)?,
            rh.value("violations")
        );
    }
    Ok(())
}
