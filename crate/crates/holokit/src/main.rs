use clap::{Parser, Subcommand};
use holokit::error::RunError;
use holokit::Overrides;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "holokit", version, about = "Holonomic gate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (default: config "output", then $HOLOKIT_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override resolution.steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiments, or print one parameter schema.
    List {
        #[arg(long, value_name = "NAME")]
        schema: Option<String>,
    },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, steps, seed } => {
            let run = match holokit::load_config(&config) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            match holokit::run(run, &Overrides { out, steps, seed }) {
                Ok(o) => {
                    for f in &o.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::List { schema: None } => {
            print!("{}", holokit::list_text());
            ExitCode::SUCCESS
        }
        Command::List { schema: Some(name) } => match holokit::schema_text(&name) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
