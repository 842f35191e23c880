//! Daubechies filters, the periodized transform and the wavelet norm.
//!
//! `cargo run --example wavelets`

use std::str::FromStr;

use varhardy::grid::{Domain, GridFunction};
use varhardy::presets::{ExponentPreset, WeightPreset};
use varhardy::wavelet::{analyze, build_wavelet_system, synthesize, wavelet_norm, WaveletSystem};
use varhardy::Result;

fn main() -> Result<()> {
    let sys: WaveletSystem = build_wavelet_system(4)?;
    println!(
        "h = {:?}",
        sys.scaling_filter
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
    );

    let d = Domain::new(2, 2.0, 6)?;
    let f = GridFunction::from_fn(d, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp())?;
    let c = analyze(&f, &sys, 0, 5)?;
    let back = synthesize(&c, &sys)?;
    println!("2D reconstruction error {:.2e}", back.sub(&f)?.max_abs());
    println!(
        "energy {:.6} vs ‖f‖² {:.6}",
        c.energy(),
        f.l2_norm().powi(2)
    );

    let p = ExponentPreset::from_str("const:2")?.build(d)?;
    let w = WeightPreset::from_str("power:1")?.build(d)?;
    println!("wavelet norm {:.5}", wavelet_norm(&f, &p, &w, &sys, 0, 5)?);
    Ok(())
}
