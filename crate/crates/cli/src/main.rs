use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ustrong_core::correlations::Normalization;
use ustrong_core::sweep::config::OutputFormat;
use ustrong_core::sweep::{parse_config, run, ModelChoice, Overrides, Task};

#[derive(Parser)]
#[command(name = "ustrong", version, about = "Thermal photon statistics of ultrastrongly coupled cavity QED")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-delay g2 over the coupling/temperature grid, with region labels.
    G2zero(Common),
    /// Dressed energies along the coupling grid, with level crossings.
    Levels(Common),
    /// Delayed g2(tau) traces.
    G2tau(Common),
    /// Frequency-filtered cross-correlation of the 2->1 and 1->0 lines.
    Crosscorr(Common),
    /// Emission spectra.
    Spectrum(Common),
    /// g2(0) of the standard master equation for comparison.
    Baseline(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Raw,
    PerFlux,
    PaperFigure,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    g_min: Option<f64>,
    #[arg(long, alias = "gmax")]
    g_max: Option<f64>,
    #[arg(long)]
    g_steps: Option<usize>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    n_fock: Option<usize>,
    #[arg(long)]
    gamma_a: Option<f64>,
    #[arg(long)]
    gamma_x: Option<f64>,
    /// rabi, multi-tls:N or two-mode.
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelChoice>,
    /// Use the four reference points instead of the grid.
    #[arg(long)]
    markers: bool,
    #[arg(long, value_enum)]
    normalize: Option<NormArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: $USTRONG_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn parse_model(s: &str) -> Result<ModelChoice, String> {
    s.parse().map_err(|e: ustrong_core::sweep::ConfigError| e.to_string())
}

impl Common {
    fn overrides(&self, task: Task) -> Overrides {
        Overrides {
            task: Some(task),
            model: self.model,
            g_min: self.g_min,
            g_max: self.g_max,
            g_steps: self.g_steps,
            t_min: self.t_min,
            t_max: self.t_max,
            t_steps: self.t_steps,
            n_fock: self.n_fock,
            gamma_a: self.gamma_a,
            gamma_x: self.gamma_x,
            markers: self.markers,
            normalize: self.normalize.map(|n| match n {
                NormArg::Raw => Normalization::Raw,
                NormArg::PerFlux => Normalization::PerFlux,
                NormArg::PaperFigure => Normalization::PaperFigure,
            }),
            out: self.out.clone(),
            workers: self.workers,
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match &cli.command {
        Command::G2zero(c) => (Task::G2zero, c),
        Command::Levels(c) => (Task::Levels, c),
        Command::G2tau(c) => (Task::G2tau, c),
        Command::Crosscorr(c) => (Task::Crosscorr, c),
        Command::Spectrum(c) => (Task::Spectrum, c),
        Command::Baseline(c) => (Task::Baseline, c),
    };
    let config = match parse_config(common.config.as_deref(), &common.overrides(task)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(result) => {
            let failed = result.records.iter().filter(|r| r.error.is_some()).count();
            let unconverged = result.records.iter().filter(|r| r.converged == Some(false)).count();
            eprintln!(
                "{}: {} points ({} reused, {} failed, {} unconverged) in {}",
                task.as_str(),
                result.records.len(),
                result.reused,
                failed,
                unconverged,
                config.out_dir().display()
            );
            ExitCode::from(result.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
