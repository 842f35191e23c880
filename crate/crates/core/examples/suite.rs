//! Running an experiment suite from code and writing its report.
//!
//! `cargo run --example suite`

use varhardy::harness::{run_suite, ExperimentConfig};
use varhardy::Result;

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("varhardy_e7.json");
    let cfg = ExperimentConfig {
        m: 7,
        count: 6,
        p: "lhdecay:1.5".into(),
        w: "power:1".into(),
        suite: "E7".into(),
        out: Some(out.clone()),
        ..ExperimentConfig::default()
    };
    let report = run_suite(&cfg)?;
    for row in report
        .rows
        .iter()
        .filter(|r| r.quantity.ends_with("spread"))
    {
        println!(
            "{} {}: {:.3} / {:.3}",
            row.case,
            row.quantity,
            row.value_m,
            row.value_m1.unwrap_or(f64::NAN)
        );
    }
    println!(
        "{} rows, all pass: {}; report at {}",
        report.rows.len(),
        report.pass,
        out.display()
    );
    Ok(())
}
