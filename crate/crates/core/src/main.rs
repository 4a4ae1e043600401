use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use kato_lab::harness::{self, ExperimentConfig, ExperimentReport};
use kato_lab::synthetic::{self, SynthConfig};
use kato_lab::{Error, ErrorClass};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

/// Boundary-layer dissipation experiments on a wall-bounded channel.
#[derive(Parser)]
#[command(name = "kato-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a viscosity ladder described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Keep finished runs already present in the output directory.
        #[arg(long)]
        resume: bool,
        /// Worker threads (KATO_LAB_WORKERS takes precedence).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Finish an interrupted or damaged experiment directory.
    Resume { dir: PathBuf },
    /// Re-verify the invariants of stored outputs without recomputing.
    Check { dir: PathBuf },
    /// Scaling checks on synthetic Hölder fields; no solver involved.
    Synth {
        /// Regularity exponents to test, in (1/3, 1).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.4, 0.75])]
        alpha: Vec<f64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        octaves: Option<usize>,
    },
}

fn error_exit(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e.class() {
        ErrorClass::Config => ExitCode::from(EXIT_CONFIG),
        ErrorClass::Run => ExitCode::from(EXIT_RUN),
    }
}

fn print_report(r: &ExperimentReport) {
    println!("manifest {}", r.manifest_hash);
    println!(
        "{:>10} {:>12} {:>12} {:>12} {:>12}",
        "nu", "kato", "global", "residual", "l3_to_next"
    );
    for row in &r.rows {
        let l3 = row.next.map_or("-".to_string(), |m| format!("{:.4e}", m.l3_l3));
        println!(
            "{:>10.3e} {:>12.4e} {:>12.4e} {:>12.3e} {:>12}",
            row.nu, row.kato_total, row.global_total, row.balance_residual, l3
        );
    }
    let slope = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "slopes: kato {} global {} l3 {} ({} rungs)",
        slope(r.trends.kato_slope),
        slope(r.trends.global_slope),
        slope(r.trends.l3_slope),
        r.trends.points
    );
    if !r.recomputed.is_empty() {
        info!("computed {} run(s)", r.recomputed.len());
    }
    for w in &r.warnings {
        warn!("{w}");
    }
}

fn report_exit(r: &ExperimentReport) -> ExitCode {
    print_report(r);
    if !r.failures.is_empty() {
        for f in &r.failures {
            eprintln!("run nu={} failed: {}", f.nu, f.message);
        }
        return ExitCode::from(EXIT_RUN);
    }
    if !r.flags.passed() {
        eprintln!("acceptance properties failed: {}", r.flags.failures().join(", "));
        return ExitCode::from(EXIT_ACCEPTANCE);
    }
    println!("all acceptance properties hold");
    ExitCode::SUCCESS
}

fn run(config: PathBuf, output: Option<PathBuf>, resume: bool, workers: Option<usize>) -> ExitCode {
    let mut c = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return error_exit(&e),
    };
    if let Some(o) = output {
        c.output = o;
    }
    if let Some(w) = workers {
        c.workers = w;
    }
    c.resume |= resume;
    match harness::run_ladder(&c) {
        Ok(r) => report_exit(&r),
        Err(e) => error_exit(&e),
    }
}

fn check(dir: PathBuf) -> ExitCode {
    let r = match harness::check(&dir) {
        Ok(r) => r,
        Err(e) => return error_exit(&e),
    };
    for v in &r.violations {
        println!("violation: {v}");
    }
    for f in &r.failures {
        println!("failed run nu={}: {}", f.nu, f.message);
    }
    if !r.consistent() {
        eprintln!("{} violation(s) in {}", r.violations.len(), r.root.display());
        return ExitCode::from(EXIT_ACCEPTANCE);
    }
    if !r.failures.is_empty() {
        return ExitCode::from(EXIT_RUN);
    }
    match r.flags {
        Some(f) if f.passed() => {
            println!("stored outputs are consistent and all acceptance properties hold");
            ExitCode::SUCCESS
        }
        Some(f) => {
            eprintln!("acceptance properties failed: {}", f.failures().join(", "));
            ExitCode::from(EXIT_ACCEPTANCE)
        }
        None => ExitCode::from(EXIT_ACCEPTANCE),
    }
}

fn synth(alphas: Vec<f64>, resolution: Option<usize>, seed: Option<u64>, octaves: Option<usize>) -> ExitCode {
    let mut ok = true;
    for alpha in alphas {
        let mut cfg = SynthConfig {
            alpha,
            ..SynthConfig::default()
        };
        if let Some(n) = resolution {
            cfg.resolution = n;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = octaves {
            cfg.octaves = o;
        }
        println!("alpha = {alpha}");
        match synthetic::run_suite(&cfg) {
            Ok(checks) => {
                for c in &checks {
                    println!("  {c}");
                    ok &= c.passed();
                }
            }
            Err(e) => return error_exit(&e),
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output,
            resume,
            workers,
        } => run(config, output, resume, workers),
        Command::Resume { dir } => match harness::resume(&dir) {
            Ok(r) => report_exit(&r),
            Err(e) => error_exit(&e),
        },
        Command::Check { dir } => check(dir),
        Command::Synth {
            alpha,
            resolution,
            seed,
            octaves,
        } => synth(alpha, resolution, seed, octaves),
    }
}
