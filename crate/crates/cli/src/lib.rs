//! Command-line front end: argument parsing, config resolution and the
//! subcommands of the `hkt` binary.

pub mod args;
pub mod commands;
mod error;
pub mod manifest;

pub use args::{Cli, Command};
pub use commands::Context;
pub use error::CliError;
pub use manifest::RunManifest;

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(&cli.config, &cli.set, cli.seed, cli.out)?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a).map(drop),
        Command::Synth => commands::synth(&ctx).map(drop),
        Command::Train(a) => commands::train(&ctx, a).map(drop),
        Command::Eval(a) => commands::eval(&ctx, a).map(drop),
        Command::Trace(a) => commands::trace(&ctx, a).map(drop),
        Command::Graph(a) => commands::graph(&ctx, a).map(drop),
        Command::Gradcheck(a) => commands::gradcheck(&ctx, a).map(drop),
    }
}
