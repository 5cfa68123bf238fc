// SPDX-License-Identifier: Apache-2.0

//! Command line front end: scenario configuration, execution and output.

pub mod config;
pub mod output;
pub mod runner;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use anisoflow::verify::{self, EocSetup, Reference};
use anisoflow::{circle, Bundle, Vec2};
use clap::{Parser, Subcommand, ValueEnum};

use config::{Assignments, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "anisoflow", version, about = "Anisotropic curve shortening flow scenarios")]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write frames, diagnostics and a summary.
    Run(RunArgs),
    /// Run the built-in property checks.
    Verify,
    /// Measure experimental orders of convergence.
    Eoc(EocArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Option<String>,
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "J")]
    elements: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "T")]
    final_time: Option<String>,
    #[arg(long)]
    frames_every: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. --set solver=picard.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EocDensity {
    Elliptic,
    /// Isotropic circle against the exact solution.
    Isotropic,
}

#[derive(Debug, clap::Args)]
struct EocArgs {
    #[arg(long, value_enum, default_value = "elliptic")]
    density: EocDensity,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long = "J", value_delimiter = ',', default_values_t = [32, 64, 128])]
    elements: Vec<usize>,
}

fn flag_assignments(args: &RunArgs) -> Result<Assignments, config::ConfigError> {
    let mut a = Assignments::default();
    for pair in &args.set {
        let (k, v) = pair.split_once('=').ok_or_else(|| config::ConfigError::Syntax {
            line: 0,
            text: pair.clone(),
        })?;
        a.push(k.trim(), v.trim())?;
    }
    let out = args.out.as_ref().map(|p| p.display().to_string());
    let named = [
        ("scenario", args.scenario.as_deref()),
        ("J", args.elements.as_deref()),
        ("dt", args.dt.as_deref()),
        ("T", args.final_time.as_deref()),
        ("frames_every", args.frames_every.as_deref()),
        ("out", out.as_deref()),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            a.push(k, v)?;
        }
    }
    Ok(a)
}

fn run_command(args: &RunArgs) -> u8 {
    let resolved = (|| {
        let file = match &args.config {
            Some(p) => Assignments::read(p)?,
            None => Assignments::default(),
        };
        ScenarioConfig::resolve(&file.merged(flag_assignments(args)?))
    })();
    let config = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match runner::run_scenario(&config) {
        Ok(s) => {
            println!(
                "{}: {} steps to t = {}, {:?}, {} frames in {}",
                config.scenario,
                s.steps,
                s.final_time,
                s.stop,
                s.frames,
                config.output_dir.display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn verify_command() -> u8 {
    match verify::self_check() {
        Ok(checks) => {
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            println!("{}/{} checks passed", checks.len() - failed, checks.len());
            if failed == 0 {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn eoc_command(args: &EocArgs) -> u8 {
    let setup = match args.density {
        EocDensity::Elliptic => verify::elliptic_eoc_setup(args.delta, &args.elements),
        EocDensity::Isotropic => verify::elliptic_eoc_setup(0.5, &args.elements).map(|s| EocSetup {
            bundle: Bundle::isotropic(),
            initial: Arc::new(circle(Vec2::new(0.0, 0.0), 1.0)),
            reference: Reference::ExactCircle {
                center: Vec2::new(0.0, 0.0),
                r0: 1.0,
            },
            ..s
        }),
    };
    let result = setup.and_then(|s| verify::eoc_study(&s));
    match result {
        Ok(r) => {
            println!("J,error,l2_part,h1_seminorm_part,eoc,eoc_l2,eoc_h1");
            let (e, l2, h1) = (r.combined.eocs(), r.l2.eocs(), r.h1_seminorm.eocs());
            for (i, ((j, err), ((_, a), (_, b)))) in r
                .combined
                .pairs()
                .iter()
                .zip(r.l2.pairs().iter().zip(r.h1_seminorm.pairs()))
                .enumerate()
            {
                let fmt = |v: &[f64]| match i.checked_sub(1).and_then(|k| v.get(k)) {
                    Some(x) => format!("{x:.4}"),
                    None => "-".to_string(),
                };
                println!("{j},{err:.6e},{a:.6e},{b:.6e},{},{},{}", fmt(&e), fmt(&l2), fmt(&h1));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                anisoflow::Error::InvalidParameter(_) | anisoflow::Error::ConvexityGuard { .. } => 1,
                _ => 2,
            }
        }
    }
}

/// Parses `args` and runs the selected command, returning the exit code.
pub fn execute<I, A>(args: I) -> u8
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Verify => verify_command(),
        Command::Eoc(args) => eoc_command(args),
    }
}
