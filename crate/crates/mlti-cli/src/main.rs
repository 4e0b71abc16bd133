use clap::{Parser, Subcommand};

use mlti_cli::commands::{decompose, heat, identify, reduce, synth};
use mlti_cli::exit_code;

#[derive(Parser)]
#[command(
    name = "mlti",
    version,
    about = "Tensor-train linear algebra and model reduction for multilinear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a stored tensor into train form and report ranks.
    Decompose(decompose::DecomposeArgs),
    /// Reduce a stored system with hobt, hobpod or hoera.
    Reduce(reduce::ReduceArgs),
    /// Fit a low-order model to a scalar impulse or step response.
    Identify(identify::IdentifyArgs),
    /// Heat-equation benchmark: reduction error and timing tables.
    HeatDemo(heat::HeatArgs),
    /// Random train systems benchmark: train versus dense balanced truncation.
    SynthDemo(synth::SynthArgs),
}

fn main() {
    // Bad arguments are validation failures and share exit code 1; clap's
    // default of 2 is reserved for numerical trouble.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Decompose(args) => decompose::run(args),
        Command::Reduce(args) => reduce::run(args),
        Command::Identify(args) => identify::run(args),
        Command::HeatDemo(args) => heat::run(args),
        Command::SynthDemo(args) => synth::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
