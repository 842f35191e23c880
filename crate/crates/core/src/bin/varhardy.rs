use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use varhardy::harness::{list_presets, run_suite, ExperimentConfig};
use varhardy::Error;

#[derive(Parser)]
#[command(
    name = "varhardy",
    version,
    about = "Weighted local Hardy space experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the suite named by --suite (default E1), or `all`.
    Suite,
    /// E1: Luxemburg norms.
    Norm,
    /// E2: maximal operators.
    Maximal,
    /// E3: weight constants.
    Awconst,
    /// E6: atomic decomposition.
    Atoms,
    /// E7: Littlewood-Paley characterization.
    Lp,
    /// E8: wavelet characterization.
    Wavelet,
    /// Print exponent, weight and function presets.
    List,
}

#[derive(clap::Args)]
struct Flags {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    m: Option<u32>,
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    w: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    suite: Option<String>,
    #[arg(long, alias = "op", global = true)]
    operator: Option<String>,
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    count: Option<usize>,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let f = &cli.flags;
    let mut cfg = match &f.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = f.$field.clone() { cfg.$field = v; })* };
    }
    set!(n, t, m, p, w, seed, operator, family, count);
    if f.out.is_some() {
        cfg.out = f.out.clone();
    }
    cfg.suite = match cli.command {
        Command::Suite => f.suite.clone().unwrap_or(cfg.suite),
        Command::Norm => "E1".into(),
        Command::Maximal => "E2".into(),
        Command::Awconst => "E3".into(),
        Command::Atoms => "E6".into(),
        Command::Lp => "E7".into(),
        Command::Wavelet => "E8".into(),
        Command::List => cfg.suite,
    };
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::List = cli.command {
        print!("{}", list_presets());
        return ExitCode::SUCCESS;
    }
    let cfg = match config(&cli).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("varhardy: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("varhardy: {e}");
            return ExitCode::FAILURE;
        }
    };
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        println!(
            "{} {} {} {:.6e} {} {} {}",
            r.suite,
            r.case,
            r.quantity,
            r.value_m,
            opt(r.value_m1),
            opt(r.ratio),
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = report.failures().count();
    println!(
        "{}: {} rows, {} failed, {:.2} s",
        report.suite,
        report.rows.len(),
        failed,
        report.wall_time_s
    );
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
