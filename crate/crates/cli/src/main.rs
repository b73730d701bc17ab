use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polarsim::error::CliError;
use polarsim::output::write_run;
use polarsim::sweep::{write_bisection, write_sweep};
use polarsim::{bisect_critical_mass, parse_config, run, sweep, SweepParam};

#[derive(Parser)]
#[command(name = "polarsim", version, about = "Nonlocal boundary Keller-Segel polarisation solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write series.csv, report.json and terminal_field.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one configuration per parameter value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of mass, alpha, L, gamma, C_2d, j0_scale.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bracket the critical mass between a global and a blowing-up run.
    Bisect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        m_lo: f64,
        #[arg(long)]
        m_hi: f64,
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out } => {
            let result = run(&parse_config(&config)?)?;
            write_run(&out, &result)?;
            let b = &result.output.blowup;
            match b.t_detect {
                Some(t) => println!("blow-up detected at t = {t:.6e}"),
                None if b.detected => println!("blow-up detected"),
                None => println!("global run to t = {}", result.config.t_end),
            }
        }
        Command::Sweep { config, param, values, out } => {
            let param = SweepParam::parse(&param)?;
            let rows = sweep(&parse_config(&config)?, param, &values)?;
            write_sweep(&out, &rows)?;
            for row in &rows {
                println!("{:>12} detected = {}", row.value, row.detected());
            }
        }
        Command::Bisect { config, m_lo, m_hi, tol, out } => {
            let b = bisect_critical_mass(&parse_config(&config)?, m_lo, m_hi, tol)?;
            write_bisection(&out, &b)?;
            println!("critical mass estimate {:.6} in [{:.6}, {:.6}]", b.estimate, b.bracket.0, b.bracket.1);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
