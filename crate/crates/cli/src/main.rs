use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use miniver_core::driver::{cmd_graph, cmd_matrix, cmd_run, cmd_verify, CommandOutput, Format};
use miniver_core::Mode;

/// Contract verifier and interpreter for MiniOO programs.
#[derive(Parser)]
#[command(name = "miniver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every callable in a file under a termination policy.
    Verify {
        file: PathBuf,
        /// partial, self-check, callgraph or sound.
        #[arg(long, default_value = "sound")]
        mode: Mode,
        /// text or json.
        #[arg(long, default_value = "text")]
        format: Format,
        /// Print every verification condition before the report.
        #[arg(long)]
        dump_vcs: bool,
    },
    /// Run a top-level function.
    Run {
        file: PathBuf,
        #[arg(long)]
        entry: String,
        /// An integer or boolean argument; repeat for each parameter.
        #[arg(long = "arg", allow_hyphen_values = true)]
        args: Vec<String>,
        /// Maximum number of call frames to enter.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
        /// Keep ghost code.
        #[arg(long)]
        no_erase: bool,
        /// Check the entry function's requires and ensures clauses.
        #[arg(long)]
        check_contracts: bool,
    },
    /// Print the call graph and its strongly connected components.
    Graph {
        file: PathBuf,
        /// Let closure invocations reach every lambda of a matching type.
        #[arg(long)]
        overapprox: bool,
        /// Emit Graphviz DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Compare verdicts over a corpus against a manifest of expectations.
    Matrix {
        dir: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

fn emit(out: CommandOutput) -> ExitCode {
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    emit(match cli.command {
        Command::Verify {
            file,
            mode,
            format,
            dump_vcs,
        } => cmd_verify(&file, mode, format, dump_vcs),
        Command::Run {
            file,
            entry,
            args,
            fuel,
            no_erase,
            check_contracts,
        } => cmd_run(&file, &entry, &args, fuel, no_erase, check_contracts),
        Command::Graph {
            file,
            overapprox,
            dot,
        } => cmd_graph(&file, overapprox, dot),
        Command::Matrix {
            dir,
            manifest,
            format,
        } => cmd_matrix(&dir, &manifest, format),
    })
}
