use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cesbl::capacity::bounds_table;
use cesbl::harness::{
    emit_plots, run_sweep, simulate_report, ExperimentSpec, Profile, SweepParam, SweepSpec,
    SystemConfig,
};
use cesbl::sbl::SolverKind;

/// Grant-free random access simulator with cluster-extended SBL.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file: a system config for `simulate`, an experiment spec for `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Built-in scenario used when no config is given.
    #[arg(long, global = true, default_value = "fast")]
    profile: Profile,

    /// Comma-separated subset of ce_sbl,m_sbl.
    #[arg(long, global = true, value_delimiter = ',')]
    solvers: Option<Vec<SolverKind>>,

    /// Worker threads for trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print users, detections and scores.
    Simulate,
    /// Monte-Carlo sweep to CSV.
    Sweep {
        /// Also write one SVG per metric next to the CSV.
        #[arg(long)]
        plot: bool,
    },
    /// Table of the identifiability bounds.
    Bounds {
        #[arg(long, value_delimiter = ',', default_value = "68")]
        l_hat: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "64")]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        d: Vec<usize>,
    },
    /// Run the built-in oracle checks.
    Verify,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_or_print(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn default_spec(profile: Profile) -> ExperimentSpec {
    let system = SystemConfig::profile(profile);
    let values = match profile {
        Profile::Fast => vec![4.0, 8.0, 12.0, 16.0, 20.0],
        Profile::Paper => vec![10.0, 20.0, 30.0, 40.0, 50.0],
    };
    ExperimentSpec {
        seed: 0,
        trials: 50,
        solvers: vec![SolverKind::CeSbl, SolverKind::MSbl],
        output: PathBuf::from("sweep.csv"),
        sweep: SweepSpec {
            param: SweepParam::K,
            values,
        },
        system,
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting worker pool")?;
    }
    let solvers = cli
        .solvers
        .clone()
        .unwrap_or_else(|| vec![SolverKind::CeSbl, SolverKind::MSbl]);
    match cli.command {
        Command::Simulate => {
            let cfg: SystemConfig = match &cli.config {
                Some(path) => read_toml(path)?,
                None => SystemConfig::profile(cli.profile),
            };
            cfg.validate()?;
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let report = simulate_report(&cfg, &solvers, cli.seed.unwrap_or(0))?;
            write_or_print(cli.out.as_deref(), "simulate.txt", &report)?;
        }
        Command::Sweep { plot } => {
            let mut spec = match &cli.config {
                Some(path) => ExperimentSpec::load(path)?,
                None => default_spec(cli.profile),
            };
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            if let Some(s) = cli.solvers {
                spec.solvers = s;
            }
            if let Some(dir) = &cli.out {
                let name = spec.output.file_name().map_or("sweep.csv".into(), |n| n.to_owned());
                spec.output = dir.join(name);
            }
            spec.validate()?;
            for w in spec.system.warnings() {
                eprintln!("warning: {w}");
            }
            let rows = run_sweep(&spec)?;
            eprintln!("wrote {} ({} rows)", spec.output.display(), rows.len());
            if plot {
                let dir = spec.output.parent().unwrap_or(Path::new("."));
                for path in emit_plots(&rows, dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
        }
        Command::Bounds { l_hat, m, d } => {
            let table = bounds_table(&l_hat, &m, &d)?;
            write_or_print(cli.out.as_deref(), "bounds.csv", &table)?;
        }
        Command::Verify => {
            let checks = cesbl::verify::run_all();
            let mut all = true;
            for c in &checks {
                println!("{} {:<30} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
