mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command, Recorded};
use commands::{execute, params, replay};

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Params(m) => params(&m),
        Command::Simulate(c) => execute(&Recorded::Simulate(c.args), &c.output, cli.threads),
        Command::Verify(c) => execute(&Recorded::Verify(c.args), &c.output, cli.threads),
        Command::Pde(c) => execute(&Recorded::Pde(c.args), &c.output, cli.threads),
        Command::Replay(c) => replay(&c.manifest, &c.output, cli.threads),
    };
    let code = result.unwrap_or_else(|f| {
        eprintln!("error: {}", f.message);
        f.code
    });
    std::process::exit(code);
}
