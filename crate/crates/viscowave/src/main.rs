//! Thin command-line front end over the library commands.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use viscowave::commands::{self, CommandOptions};

#[derive(Parser)]
#[command(
    name = "viscowave",
    version,
    about = "Viscoelastic wave equation with memory and a dynamic boundary: simulation and stability certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Export the assembled matrices as coordinate-triplet files.
    #[arg(long)]
    dump_operators: bool,
    /// Downgrade kernel admissibility failures to warnings.
    #[arg(long)]
    allow_violating_kernel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the memory kernel against the admissibility assumptions.
    VerifyKernel(Common),
    /// Integrate the system and audit the energy balance.
    Simulate(Common),
    /// Eigenvalues and resolvent sweep of the generator, with a stability
    /// verdict.
    Spectrum(Common),
    /// Run all three memory formulations on one configuration and compare
    /// the trajectories.
    Triad(Common),
}

fn options(c: &Common) -> CommandOptions {
    CommandOptions {
        out_dir: c.out.clone(),
        dump_operators: c.dump_operators,
        allow_violating_kernel: c.allow_violating_kernel,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::VerifyKernel(c) => commands::verify_kernel(&c.config, &options(c)),
        Command::Simulate(c) => commands::simulate(&c.config, &options(c)),
        Command::Spectrum(c) => commands::spectrum(&c.config, &options(c)),
        Command::Triad(c) => commands::triad(&c.config, &options(c)),
    };
    std::process::exit(code);
}
