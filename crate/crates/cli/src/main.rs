use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use almg_core::spinmodel::Parity;
use almg_core::workstats::{Esqpt, InitialState};

mod commands;
mod output;

use commands::{CliError, Run};

#[derive(Parser, Debug)]
#[command(name = "almg", version, about = "Anharmonic LMG spectra, work statistics and classical limit")]
struct Cli {
    /// Directory receiving the CSV tables and manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Model {
    /// Particle number N (even, >= 2).
    #[arg(long = "n")]
    n: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    alpha: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of one parity sector, optionally over a range of gamma.
    Spectrum {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "even")]
        parity: Parity,
        /// Sweep gamma from --gamma to this value.
        #[arg(long)]
        gamma_end: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        gamma_step: f64,
    },
    /// Histogram of rescaled excitation energies (even sector).
    Dos {
        #[command(flatten)]
        model: Model,
        /// Defaults to max(50, dim/20).
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Monte Carlo semiclassical density of states.
    DosSc {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 400)]
        bins: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Density of states at fixed excitation energy across gamma.
    DosSlice {
        #[arg(long = "n")]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        epsilon: f64,
        /// Energy window around --epsilon.
        #[arg(long, default_value_t = 0.004)]
        width: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma_start: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_end: f64,
        #[arg(long, default_value_t = 201)]
        gamma_points: usize,
    },
    /// Work distribution of one sudden quench.
    Quench(QuenchArgs),
    /// Entropy of P(W) across rescaled quench strengths.
    EntropySweep {
        #[arg(long)]
        esqpt: Esqpt,
        #[arg(long)]
        gamma_i: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "n")]
        n: usize,
        #[command(flatten)]
        grid: Grid,
    },
    /// Entropy of P_n(W) for every initial eigenstate at a small quench.
    EntropyEnergy {
        #[arg(long)]
        gamma_i: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "n")]
        n: usize,
        #[arg(long, default_value_t = 0.001, allow_hyphen_values = true)]
        dgamma: f64,
        #[arg(long, default_value = "even")]
        parity: Parity,
    },
    /// Finite-size scaling of the entropy peak.
    Scaling {
        #[arg(long)]
        esqpt: Esqpt,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma_i: f64,
        #[arg(long, value_delimiter = ',', default_value = "200,400,800,1600,3200")]
        sizes: Vec<usize>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Curvature of the ground-state energy density across gamma.
    GsMarker {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "n")]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        gamma_start: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma_end: f64,
        #[arg(long, default_value_t = 151)]
        gamma_points: usize,
    },
    /// Full Hamiltonian matrix in the |j, m> basis (N <= 40).
    Dense {
        #[command(flatten)]
        model: Model,
    },
    /// Mean-field phase space.
    #[command(subcommand)]
    Classical(ClassicalCommand),
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Grid {
    #[arg(long, default_value_t = 0.2)]
    grid_min: f64,
    #[arg(long, default_value_t = 1.8)]
    grid_max: f64,
    #[arg(long, default_value_t = 161)]
    grid_points: usize,
}

#[derive(Args, Debug, Clone)]
pub struct QuenchArgs {
    #[arg(long)]
    gamma_i: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long = "n")]
    n: usize,
    /// Absolute quench strength gamma_f - gamma_i.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["dgamma_tilde"])]
    dgamma: Option<f64>,
    /// Quench strength in units of the critical quench of --esqpt.
    #[arg(long, requires = "esqpt")]
    dgamma_tilde: Option<f64>,
    #[arg(long)]
    esqpt: Option<Esqpt>,
    /// ground, highest or an eigenstate index; defaults to the state
    /// matching --esqpt, else ground.
    #[arg(long)]
    initial: Option<InitialState>,
    #[arg(long, default_value = "even")]
    parity: Parity,
}

#[derive(Subcommand, Debug)]
enum ClassicalCommand {
    FixedPoints {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
    },
    CriticalEnergies {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
    },
    Evolve {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, allow_hyphen_values = true)]
        q: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Keep every n-th sample.
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
}

/// Arguments as typed, minus `--out` and its value.
fn recorded_argv(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn dispatch(command: Command) -> Result<Run, CliError> {
    match command {
        Command::Spectrum { model, parity, gamma_end, gamma_step } => {
            commands::spectrum(model.n, model.gamma, model.alpha, parity, gamma_end, gamma_step)
        }
        Command::Dos { model, bins } => commands::dos(model.n, model.gamma, model.alpha, bins),
        Command::DosSc { gamma, alpha, samples, bins, seed } => commands::dos_sc(gamma, alpha, samples, bins, seed),
        Command::DosSlice { n, alpha, epsilon, width, gamma_start, gamma_end, gamma_points } => {
            commands::dos_slice(n, alpha, epsilon, width, gamma_start, gamma_end, gamma_points)
        }
        Command::Quench(q) => commands::quench(&q),
        Command::EntropySweep { esqpt, gamma_i, alpha, n, grid } => {
            commands::entropy_sweep(esqpt, gamma_i, alpha, n, &grid)
        }
        Command::EntropyEnergy { gamma_i, alpha, n, dgamma, parity } => {
            commands::entropy_energy(gamma_i, alpha, n, dgamma, parity)
        }
        Command::Scaling { esqpt, alpha, gamma_i, sizes, grid } => {
            commands::scaling(esqpt, alpha, gamma_i, &sizes, &grid)
        }
        Command::GsMarker { alpha, n, gamma_start, gamma_end, gamma_points } => {
            commands::gs_marker(alpha, n, gamma_start, gamma_end, gamma_points)
        }
        Command::Dense { model } => commands::dense(model.n, model.gamma, model.alpha),
        Command::Classical(ClassicalCommand::FixedPoints { gamma, alpha }) => commands::fixed_points(gamma, alpha),
        Command::Classical(ClassicalCommand::CriticalEnergies { gamma, alpha }) => {
            commands::critical_energies(gamma, alpha)
        }
        Command::Classical(ClassicalCommand::Evolve { gamma, alpha, p, q, dt, steps, stride }) => {
            commands::evolve(gamma, alpha, p, q, dt, steps, stride)
        }
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
}

fn configure_workers() {
    if let Ok(v) = std::env::var("ALMG_WORKERS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring ALMG_WORKERS={v:?}, expected a positive integer"),
        }
    }
}

fn execute(argv: Vec<String>, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let full: Vec<String> = std::iter::once("almg".to_string()).chain(argv.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&full).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Command::Replay { manifest } = cli.command {
        let recorded = output::read_manifest(&manifest)?;
        if recorded.version != env!("CARGO_PKG_VERSION") {
            eprintln!(
                "warning: manifest written by version {}, replaying with {}",
                recorded.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        return execute(recorded.argv, out.or(cli.out));
    }
    let out = out.or(cli.out).ok_or_else(|| CliError::Usage("--out <DIR> is required".into()))?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let run = dispatch(cli.command)?;
    let files = output::emit(&out, &run.artifacts)?;
    let manifest = output::RunManifest {
        command: run.command.to_string(),
        argv: recorded_argv(&argv),
        parameters: run.parameters,
        seed: run.seed,
        summary: run.summary,
        version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema: output::CSV_SCHEMA_VERSION,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        files,
    };
    Ok(output::write_manifest(&out, &manifest)?)
}

fn main() -> ExitCode {
    configure_workers();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if let Err(e) = Cli::try_parse_from(std::iter::once("almg".to_string()).chain(argv.iter().cloned())) {
        let _ = e.print();
        // help and version requests are not errors
        return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
    }
    match execute(argv, None) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_flag_is_not_recorded() {
        let args: Vec<String> =
            ["spectrum", "--n", "4", "--out", "/tmp/x", "--gamma=0.5", "--out=/y"].iter().map(|s| s.to_string()).collect();
        assert_eq!(recorded_argv(&args), vec!["spectrum", "--n", "4", "--gamma=0.5"]);
    }

    #[test]
    fn parses_every_command() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
