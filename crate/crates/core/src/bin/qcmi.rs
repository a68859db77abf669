use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcmi::cli::{self, AnalysisOptions, ProfileConfig, SweepConfig};
use qcmi::observables::format_sig9;

#[derive(Parser)]
#[command(name = "qcmi", version, about = "Monitored variable-range Clifford circuits")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state QCMI for every (alpha, p, L, scheme) cell of a sweep.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the full-scale realization count.
        #[arg(long = "paper-scale")]
        full_scale: bool,
    },
    /// Collapse, L_min extrapolation and crossing fits on a results CSV.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional key = value file with analysis options.
        #[arg(long)]
        options: Option<PathBuf>,
    },
    /// Steady-state entropies against chord length at fixed p.
    EntropyProfile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "paper-scale")]
        full_scale: bool,
    },
    /// Enumerate the two-qubit Clifford group.
    Census,
    /// Crossing points I(p, L) = I(p, 2L) for every group of a results CSV.
    Crossings {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn run(args: Args) -> qcmi::Result<()> {
    match args.command {
        Command::Simulate { config, out, full_scale } => {
            let cfg = SweepConfig::from_file(&config, full_scale)?;
            let total = cfg.cells().len();
            let mut seen = 0;
            let s = cli::simulate(&cfg, &out, |e, fresh| {
                seen += 1;
                log::info!(
                    "[{seen}/{total}] alpha={} p={} L={} scheme={} I={}{}",
                    e.alpha,
                    e.p,
                    e.l,
                    e.scheme,
                    format_sig9(e.mean),
                    if fresh { "" } else { " (cached)" }
                );
            })?;
            println!("{} cells computed, {} reused -> {}", s.computed, s.reused, s.csv_path.display());
        }
        Command::Analyze { results, out, options } => {
            let opts = match options {
                Some(p) => AnalysisOptions::parse(&std::fs::read_to_string(p)?)?,
                None => AnalysisOptions::default(),
            };
            let report = cli::analyze(&results, &out, &opts)?;
            for g in &report.groups {
                let show = |v: Option<f64>| v.map_or("-".to_string(), format_sig9);
                println!(
                    "alpha={} scheme={} p_c={} nu={} omega1={} c/3={}",
                    g.alpha,
                    g.scheme,
                    show(g.p_c),
                    show(g.nu),
                    show(g.omega1),
                    show(g.c_over_3)
                );
                for gap in &g.gaps {
                    println!("  gap: {gap}");
                }
            }
            println!("report -> {}", out.join("report.json").display());
        }
        Command::EntropyProfile { config, out, full_scale } => {
            let cfg = ProfileConfig::from_file(&config, full_scale)?;
            let s = cli::run_entropy_profile(&cfg, &out)?;
            match s.fit {
                Some(f) => println!("c/3 = {} +- {}, c' = {}", format_sig9(f.c_over_3), format_sig9(f.c_over_3_err), format_sig9(f.offset)),
                None => println!("log-fit unavailable (fewer than three distinct chord lengths or degenerate data)"),
            }
            println!("profile -> {}", s.csv_path.display());
        }
        Command::Census => {
            let (size, passing) = cli::census()?;
            println!("{size} distinct two-qubit Clifford actions, {passing} symplectic");
        }
        Command::Crossings { results, resamples, seed } => {
            print!("{}", cli::crossings(&results, resamples, seed)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
